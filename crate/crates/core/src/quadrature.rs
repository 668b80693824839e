//! Globally adaptive 10/21-point Gauss–Kronrod integration.

// nodes and weights kept at their published precision
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525204580,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_k = kron.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv[j] = (f1, f2);
        kron += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = kron * h;
    let asc = asc * h.abs();
    let abs_k = abs_k * h.abs();
    let mut error = ((kron - gauss) * h).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_k);
    }
    Segment { a, b, value, error }
}

/// Integral of `f` over [a, b] with an estimate of the absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub segments: usize,
}

/// Bisects the worst segment until the summed error estimate meets
/// `max(epsabs, epsrel·|I|)` or `limit` segments are in use.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    epsabs: f64,
    epsrel: f64,
    limit: usize,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, segments: 0 });
    }
    let mut segs = vec![kronrod21(&mut f, a, b)];
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Convergence { what: "adaptive quadrature (non-finite integrand)", estimate: error });
        }
        if error <= epsabs.max(epsrel * value.abs()) {
            return Ok(Estimate { value, error, segments: segs.len() });
        }
        if segs.len() >= limit {
            return Err(Error::Convergence { what: "adaptive quadrature", estimate: error });
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let s = segs.swap_remove(worst);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a.min(s.b) || m >= s.a.max(s.b) {
            return Err(Error::Convergence { what: "adaptive quadrature (interval too small)", estimate: error });
        }
        segs.push(kronrod21(&mut f, s.a, m));
        segs.push(kronrod21(&mut f, m, s.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact_on_one_segment() {
        let r = integrate(|x| x.powi(20) - 3.0 * x.powi(7), -1.0, 2.0, 0.0, 1e-12, 10).unwrap();
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert!((r.value - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(|x| (30.0 * x).cos(), 0.0, 3.0, 1e-13, 0.0, 1000).unwrap();
        assert!((r.value - (90f64).sin() / 30.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_change_sign() {
        let f = |x: f64| x.exp();
        let fwd = integrate(f, 0.0, 1.0, 0.0, 1e-13, 50).unwrap().value;
        let rev = integrate(f, 1.0, 0.0, 0.0, 1e-13, 50).unwrap().value;
        assert!((fwd + rev).abs() < 1e-15);
        assert!((fwd - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn subdivision_cap_is_an_error() {
        let r = integrate(|x| x.abs().sqrt().recip(), -1.0, 1.0, 1e-15, 0.0, 5);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }
}
