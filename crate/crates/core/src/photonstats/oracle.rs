use nalgebra::{DMatrix, DVector};

use crate::blochsim::{solve_drive, SolverOptions, SystemConfig, TimeGrid};
use crate::error::{Error, Result};

/// Largest order the fit oracle supports.
pub const ORACLE_KMAX: usize = 6;
/// Upper end of the sampled intensities x = |α|².
pub const ORACLE_RADIUS: f64 = 0.25;
const MAX_CONDITION: f64 = 1e10;

/// Taylor coefficients b_K = 𝒞_K λ^K of w̄ in x = |α|², estimated by a
/// least-squares fit over directly integrated branches.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorEstimate {
    pub zeta: Vec<f64>,
    /// `coeffs[i][k - 1]` is b_k at `zeta[i]`.
    pub coeffs: Vec<Vec<f64>>,
    /// Error estimate per coefficient, same layout.
    pub error: Vec<Vec<f64>>,
}

impl TaylorEstimate {
    /// ½ Σ_K b_K N!/(N−K)!, the Fock-N population rebuilt from the fit,
    /// with its error estimate. Needs N no larger than the fitted order.
    pub fn fock_population(&self, i: usize, n: usize) -> Result<(f64, f64)> {
        if n > self.coeffs[i].len() {
            return Err(Error::InvalidInput(format!(
                "fit has {} orders, Fock N = {n} needs {n}",
                self.coeffs[i].len()
            )));
        }
        let (mut v, mut e, mut ff) = (0.0, 0.0, 1.0);
        for k in 1..=n {
            ff *= (n + 1 - k) as f64;
            v += 0.5 * self.coeffs[i][k - 1] * ff;
            e += 0.5 * self.error[i][k - 1] * ff;
        }
        Ok((v, e))
    }
}

struct Fit {
    coeffs: Vec<f64>,
    sigma: Vec<f64>,
}

/// Least squares through the origin in s = x/radius, degree `deg`.
fn fit(s: &[f64], y: &[f64], deg: usize) -> Result<Fit> {
    let m = s.len();
    let a = DMatrix::from_fn(m, deg, |r, c| s[r].powi(c as i32 + 1));
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = smax / smin;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::OracleUnreliable { condition });
    }
    let b = DVector::from_column_slice(y);
    let c = svd.solve(&b, 0.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let resid = &a * &c - &b;
    let dof = (m - deg).max(1) as f64;
    let s2 = resid.norm_squared() / dof;
    // Coefficient variances from diag((AᵀA)⁻¹) = Σ_j V_kj² / σ_j².
    let vt = svd.v_t.as_ref().expect("requested");
    let sigma = (0..deg)
        .map(|k| {
            let var: f64 = (0..sv.len()).map(|j| (vt[(j, k)] / sv[j]).powi(2)).sum();
            (s2 * var).sqrt()
        })
        .collect();
    Ok(Fit { coeffs: c.iter().copied().collect(), sigma })
}

/// Estimates b_1..b_kmax at each ζ by integrating the Bloch equations at
/// M = 2·kmax + 3 intensities x_j = 0.25·j/M and fitting polynomials of
/// degree kmax and kmax + 1 through the origin. The error estimate is the
/// change between the two fits plus three standard errors.
pub fn taylor_oracle(cfg: &SystemConfig, kmax: usize, zeta_points: &[f64]) -> Result<TaylorEstimate> {
    if kmax == 0 || kmax > ORACLE_KMAX {
        return Err(Error::InvalidInput(format!("oracle order must be in 1..={ORACLE_KMAX}, got {kmax}")));
    }
    for &z in zeta_points {
        if !(z > 0.0 && z <= 1.0) {
            return Err(Error::Domain(format!("zeta must lie in (0, 1], got {z}")));
        }
    }
    let mut order: Vec<usize> = (0..zeta_points.len()).collect();
    order.sort_by(|&a, &b| zeta_points[b].total_cmp(&zeta_points[a]));
    let mut times: Vec<f64> = vec![0.0];
    let mut slot = vec![0usize; zeta_points.len()];
    for &i in &order {
        let t = -2.0 * zeta_points[i].ln();
        if t > *times.last().unwrap() {
            times.push(t);
        }
        slot[i] = times.len() - 1;
    }
    let grid = TimeGrid::new(times)?;
    let opts = SolverOptions { rtol: 1e-12, atol: 1e-15, ..SolverOptions::default() };

    let m = 2 * kmax + 3;
    let s: Vec<f64> = (1..=m).map(|j| j as f64 / m as f64).collect();
    let lam = cfg.coupling_sq();
    let branches = s
        .iter()
        .map(|sj| solve_drive(cfg, (sj * ORACLE_RADIUS * lam).sqrt(), &grid, &opts))
        .collect::<Result<Vec<_>>>()?;

    let mut coeffs = Vec::with_capacity(zeta_points.len());
    let mut error = Vec::with_capacity(zeta_points.len());
    for &j in &slot {
        let y: Vec<f64> = branches.iter().map(|b| b.wbar[j]).collect();
        let ode_err = branches.iter().map(|b| b.error_estimate[j]).fold(0.0, f64::max);
        let lo = fit(&s, &y, kmax)?;
        let hi = fit(&s, &y, kmax + 1)?;
        let mut c = Vec::with_capacity(kmax);
        let mut e = Vec::with_capacity(kmax);
        for k in 0..kmax {
            let scale = ORACLE_RADIUS.powi(k as i32 + 1);
            c.push(lo.coeffs[k] / scale);
            let spread = (lo.coeffs[k] - hi.coeffs[k]).abs() + 3.0 * lo.sigma[k].max(hi.sigma[k]);
            e.push((spread + ode_err * (m as f64).sqrt()) / scale);
        }
        coeffs.push(c);
        error.push(e);
    }
    Ok(TaylorEstimate { zeta: zeta_points.to_vec(), coeffs, error })
}
