//! Dormand–Prince 5(4) with Hairer's fourth-order dense output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

/// Dense samples plus the accumulated local-error estimate at each sample.
pub(crate) struct Samples<const D: usize> {
    pub values: Vec<[f64; D]>,
    pub error: Vec<f64>,
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` and samples the solution at every
/// point of `outputs`, which must be ascending and start at or after `t0`.
pub(crate) fn integrate<const D: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; D],
    outputs: &[f64],
    tol: Tolerances,
) -> Result<Samples<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut values = Vec::with_capacity(outputs.len());
    let mut error = Vec::with_capacity(outputs.len());
    let mut next = 0;
    while next < outputs.len() && outputs[next] <= t0 {
        values.push(y0);
        error.push(0.0);
        next += 1;
    }
    if next == outputs.len() {
        return Ok(Samples { values, error });
    }
    let t_end = outputs[outputs.len() - 1];

    let scale = |y: &[f64; D], z: &[f64; D], i: usize| tol.atol + tol.rtol * y[i].abs().max(z[i].abs());

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);

    // Initial step from the usual two-probe heuristic.
    let mut h = {
        let (mut d0, mut d1) = (0.0f64, 0.0f64);
        for i in 0..D {
            let sk = scale(&y, &y, i);
            d0 += (y[i] / sk).powi(2);
            d1 += (k1[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(t_end - t0);
        let y1 = axpy(&y, h0, &[(1.0, &k1)]);
        let k = f(t + h0, &y1);
        let mut d2 = 0.0f64;
        for i in 0..D {
            d2 += ((k[i] - k1[i]) / scale(&y, &y, i)).powi(2);
        }
        let d2 = (d2 / D as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(t_end - t0)
    };

    let mut global = 0.0;
    let mut steps = 0;
    let mut last_rejected = false;
    while next < outputs.len() {
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::Convergence { what: "ODE integration (step budget)", estimate: global });
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Convergence { what: "ODE integration (step size underflow)", estimate: global });
        }
        let h_step = if t + h >= t_end { t_end - t } else { h };

        let k2 = f(t + C2 * h_step, &axpy(&y, h_step, &[(A21, &k1)]));
        let k3 = f(t + C3 * h_step, &axpy(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h_step, &axpy(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h_step,
            &axpy(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h_step,
            &axpy(&y, h_step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, h_step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h_step, &y1);

        let mut err = 0.0f64;
        let mut local = 0.0f64;
        for i in 0..D {
            let e = h_step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            local = local.max(e.abs());
            err += (e / scale(&y, &y1, i)).powi(2);
        }
        let err = (err / D as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let t1 = if h_step == t_end - t { t_end } else { t + h_step };
            global += local;
            while next < outputs.len() && outputs[next] <= t1 {
                let theta = (outputs[next] - t) / h_step;
                let mut out = [0.0; D];
                for i in 0..D {
                    let ydiff = y1[i] - y[i];
                    let bspl = h_step * k1[i] - ydiff;
                    let rc5 = h_step
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    let rc4 = ydiff - h_step * k7[i] - bspl;
                    out[i] = y[i] + theta * (ydiff + (1.0 - theta) * (bspl + theta * (rc4 + (1.0 - theta) * rc5)));
                }
                if outputs[next] == t1 {
                    out = y1;
                }
                values.push(out);
                error.push(global);
                next += 1;
            }
            t = t1;
            y = y1;
            k1 = k7;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = h_step * fac;
            last_rejected = false;
        } else {
            h = h_step * (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    Ok(Samples { values, error })
}
