//! Exact Bessel-function solution of the single-branch problem and its
//! closed-form limits.

use std::f64::consts::PI;

use complex_bessel::{besselj, bessely};
use num_complex::Complex64;

use crate::blochsim::SystemConfig;
use crate::error::{Error, Result};
use crate::quadrature;

/// Exponent and Bessel order of the Frobenius-type solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrobeniusParams {
    pub p: f64,
    pub nu: f64,
}

impl FrobeniusParams {
    pub fn new(gamma_tilde: f64) -> Self {
        Self { p: 0.5 * (1.0 + 3.0 * gamma_tilde), nu: 0.5 * (gamma_tilde - 1.0).abs() }
    }
}

/// J_ν(x) and Y_ν(x) for real order ν ≥ 0 and x > 0.
///
/// Backed by the Amos algorithms. Y comes from the Hankel pair rather than the
/// (J_ν cos νπ − J_{−ν})/sin νπ quotient, so integer and near-integer orders
/// need no limiting formula or order offset.
pub fn bessel_jy(nu: f64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be positive, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("Bessel order must be non-negative, got {nu}")));
    }
    let z = Complex64::new(x, 0.0);
    let j = besselj(nu, z).map_err(|e| Error::Domain(format!("J_{nu}({x}): {e:?}")))?;
    let y = bessely(nu, z).map_err(|e| Error::Domain(format!("Y_{nu}({x}): {e:?}")))?;
    Ok((j.re, y.re))
}

/// w̄ = w + 1 at ζ = e^{−κt/2} for drive strength Ẽ, by adaptive quadrature
/// of the Bessel-kernel integral. Absolute error target 1e−9.
pub fn wbar_exact(cfg: &SystemConfig, e_tilde: f64, zeta: f64) -> Result<f64> {
    wbar_exact_tol(cfg, e_tilde, zeta, 1e-10)
}

pub(crate) fn wbar_exact_tol(cfg: &SystemConfig, e_tilde: f64, zeta: f64, epsabs: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::Domain(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    let e = e_tilde.abs();
    if !e.is_finite() {
        return Err(Error::InvalidInput(format!("drive strength must be finite, got {e_tilde}")));
    }
    if zeta == 1.0 || e == 0.0 {
        return Ok(0.0);
    }
    let FrobeniusParams { p, nu } = FrobeniusParams::new(cfg.gamma_tilde);
    let (jz, yz) = bessel_jy(nu, 2.0 * e * zeta)?;
    let pref = 2.0 * PI * e * e * zeta.powf(p);
    // ∫₁^ζ = −∫_ζ^1; the prefactor is folded into the integrand so that the
    // tolerance applies to w̄ itself.
    let mut failure = None;
    let integrand = |eta: f64| match bessel_jy(nu, 2.0 * e * eta) {
        Ok((j, y)) => -pref * (yz * j - jz * y) * eta.powf(1.0 - p),
        Err(err) => {
            failure.get_or_insert(err);
            f64::NAN
        }
    };
    let est = quadrature::integrate(integrand, zeta, 1.0, epsabs, 1e-13, 10_000);
    if let Some(err) = failure {
        return Err(err);
    }
    let est = est?;
    Ok(est.value.clamp(0.0, 2.0))
}

/// Excited population of the dissipation-free branch, sin²[Ẽ(1 − e^{−κt/2})].
pub fn nbar_no_dissipation(e_tilde: f64, t: f64) -> f64 {
    (e_tilde * -(-0.5 * t).exp_m1()).sin().powi(2)
}

/// Excited population for a single-photon pulse from the fully quantum
/// treatment, 2γ̃(e^{−γ̃τ/2} − e^{−τ/2})²/(γ̃ − 1)² with τ = κt.
///
/// Written as 2γ̃ e^{−τ}[expm1(−dτ/2)/d]² with d = γ̃ − 1, which is exact
/// through d → 0, where it tends to ½γ̃τ²e^{−τ}.
pub fn single_photon_exact(cfg: &SystemConfig, t: f64) -> f64 {
    let g = cfg.gamma_tilde;
    let d = g - 1.0;
    let r = if d == 0.0 { -0.5 * t } else { (-0.5 * d * t).exp_m1() / d };
    2.0 * g * (-t).exp() * r * r
}
