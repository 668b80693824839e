//! Expansion of w̄ in powers of the drive intensity,
//! w̄(ζ) = Σ_K 𝒞_K(ζ) Ẽ^{2K}, and the tables that the photon-statistics
//! averages consume.

pub(crate) mod exact;

use std::io::Write;

use rayon::prelude::*;

use crate::blochsim::SystemConfig;
use crate::error::{Error, Result};

/// Default relative threshold of the truncation rule.
pub const DEFAULT_TRUNCATION_RTOL: f64 = 1e-10;
/// Hard cap on K for sums that are not exactly finite.
pub const DEFAULT_KMAX_CAP: usize = 150;

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("zeta must lie in (0, 1], got {zeta}")))
    }
}

/// 𝒞₁(ζ) = 2(ζ − ζ^γ̃)²/(1 − γ̃)², evaluated as 2ζ²[expm1((γ̃−1)ln ζ)/(γ̃−1)]²
/// so that it is accurate through γ̃ = 1, where it becomes 2(ζ ln ζ)².
pub fn coeff_c1(gamma_tilde: f64, zeta: f64) -> f64 {
    let l = zeta.ln();
    let d = gamma_tilde - 1.0;
    let r = if d == 0.0 { l } else { (d * l).exp_m1() / d };
    2.0 * zeta * zeta * r * r
}

/// φ(a, ζ) = (ζ^a − 1)/a, with φ(0, ζ) = ln ζ. Small |a| uses expm1.
pub fn phi(a: f64, zeta: f64) -> f64 {
    let l = zeta.ln();
    if a == 0.0 {
        l
    } else if a.abs() < 1e-4 {
        (a * l).exp_m1() / a
    } else {
        (zeta.powf(a) - 1.0) / a
    }
}

/// Single coefficient 𝒞_K(ζ).
pub fn coeff_ck(gamma_tilde: f64, k: usize, zeta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("expansion order must be >= 1".into()));
    }
    check_zeta(zeta)?;
    check_gamma(gamma_tilde)?;
    let col = exact::ColumnEvaluator::new(gamma_tilde, k).column(zeta)?;
    Ok(col[k - 1])
}

fn check_gamma(gamma_tilde: f64) -> Result<()> {
    if gamma_tilde.is_finite() && gamma_tilde >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma_tilde must be finite and >= 0, got {gamma_tilde}")))
    }
}

/// 𝒞_K(ζ_i) for K = 1..kmax over a ζ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub gamma_tilde: f64,
    pub zetas: Vec<f64>,
    pub kmax: usize,
    /// `coeffs[i][k - 1]` is 𝒞_k(zetas[i]).
    pub coeffs: Vec<Vec<f64>>,
    pub truncation_rtol: f64,
}

impl SeriesTable {
    pub fn coeff(&self, k: usize, i: usize) -> f64 {
        self.coeffs[i][k - 1]
    }

    /// Writes a CSV with header `zeta,C1,...,Ckmax`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.kmax).map(|k| format!("C{k}")).collect();
        writeln!(out, "zeta,{}", header.join(","))?;
        for (z, row) in self.zetas.iter().zip(&self.coeffs) {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:.15e}")).collect();
            writeln!(out, "{z:.15e},{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Truncated sum Σ_K 𝒞_K(ζ_i) x_K at one grid point, with the index at
    /// which the rule stopped. Fails if the rule is not met by `kmax`.
    pub fn truncated_sum(&self, i: usize, weights: &[f64], rtol: f64) -> Result<(f64, usize)> {
        let terms = self.coeffs[i].iter().zip(weights).map(|(c, w)| c * w);
        truncated_sum(terms, rtol).ok_or(Error::Convergence {
            what: "coefficient series (truncation rule)",
            estimate: self.coeffs[i].last().zip(weights.last()).map_or(f64::NAN, |(c, w)| (c * w).abs()),
        })
    }
}

/// Adds terms until three consecutive ones satisfy
/// |term| < rtol·max(1, |partial sum|). Returns the sum and the number of
/// terms consumed, or `None` if the iterator runs out first.
pub fn truncated_sum<I: IntoIterator<Item = f64>>(terms: I, rtol: f64) -> Option<(f64, usize)> {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut quiet = 0;
    for (n, t) in terms.into_iter().enumerate() {
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
        if t.abs() < rtol * (sum + comp).abs().max(1.0) {
            quiet += 1;
            if quiet == 3 {
                return Some((sum + comp, n + 1));
            }
        } else {
            quiet = 0;
        }
    }
    None
}

/// Tabulates 𝒞_1..𝒞_kmax on `zetas`, in parallel over ζ.
pub fn build_table(cfg: &SystemConfig, zetas: &[f64], kmax: usize) -> Result<SeriesTable> {
    if kmax == 0 {
        return Err(Error::InvalidInput("kmax must be >= 1".into()));
    }
    check_gamma(cfg.gamma_tilde)?;
    for &z in zetas {
        check_zeta(z)?;
    }
    let ev = exact::ColumnEvaluator::new(cfg.gamma_tilde, kmax);
    let chunks = zetas.par_chunks(32).map(|c| ev.sweep(c)).collect::<Result<Vec<_>>>()?;
    let coeffs = chunks.into_iter().flatten().collect();
    Ok(SeriesTable {
        gamma_tilde: cfg.gamma_tilde,
        zetas: zetas.to_vec(),
        kmax,
        coeffs,
        truncation_rtol: DEFAULT_TRUNCATION_RTOL,
    })
}
