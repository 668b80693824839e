use rayon::prelude::*;
use rug::Float;

use super::{CoherenceOrders, Distribution, PhotonStatistics, StatisticsKind};
use crate::analytic;
use crate::blochsim::SystemConfig;
use crate::error::{Error, Result};
use crate::series::exact::WeightedKernel;
use crate::series::{truncated_sum, SeriesTable, DEFAULT_KMAX_CAP};

/// Results slightly outside [0, 1] by less than this are rounding noise and
/// get clamped; anything further out is reported.
const PROBABILITY_SLACK: f64 = 1e-9;

/// Largest accepted error bound of a double-precision table sum before the
/// extended-precision kernel takes over.
const F64_PATH_BOUND: f64 = 1e-10;

/// Excited-state population n̄_e over a ζ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCurve {
    pub kappa_t: Vec<f64>,
    pub zeta: Vec<f64>,
    pub nbar_e: Vec<f64>,
    /// Absolute error bound per point from the summation (excludes the
    /// truncated probability mass, which is at most 1e−10).
    pub error_bound: Vec<f64>,
}

impl PopulationCurve {
    fn checked(zetas: &[f64], values: Vec<f64>, error_bound: Vec<f64>) -> Result<Self> {
        let mut nbar_e = values;
        for (z, v) in zetas.iter().zip(nbar_e.iter_mut()) {
            if !(*v >= -PROBABILITY_SLACK && *v <= 1.0 + PROBABILITY_SLACK) {
                return Err(Error::NumericalIntegrity { zeta: *z, value: *v });
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            kappa_t: zetas.iter().map(|z| if *z == 1.0 { 0.0 } else { -2.0 * z.ln() }).collect(),
            zeta: zetas.to_vec(),
            nbar_e,
            error_bound,
        })
    }

    fn zeros(zetas: &[f64]) -> Self {
        Self::checked(zetas, vec![0.0; zetas.len()], vec![0.0; zetas.len()]).expect("zero is a probability")
    }

    /// Largest pointwise deviation from another curve on the same grid.
    pub fn max_deviation(&self, other: &PopulationCurve) -> f64 {
        self.nbar_e.iter().zip(&other.nbar_e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_table(cfg: &SystemConfig, table: &SeriesTable) -> Result<()> {
    if cfg.gamma_tilde != table.gamma_tilde {
        return Err(Error::InvalidInput(format!(
            "table was built for gamma_tilde = {}, configuration has {}",
            table.gamma_tilde, cfg.gamma_tilde
        )));
    }
    Ok(())
}

/// Compensated sum of `terms` and a rounding-error bound. `rel` gives the
/// relative error already carried by each term.
fn sum_with_bound(terms: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut sum, mut comp, mut bound) = (0.0f64, 0.0f64, 0.0f64);
    let mut abs = 0.0;
    for (t, rel) in terms {
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
        abs += t.abs();
        bound += t.abs() * rel;
    }
    (sum + comp, bound + 2.0 * f64::EPSILON * abs + f64::EPSILON * (sum + comp).abs())
}

/// Weights w_1, w_2, … as mantissa/exponent pairs, built from the running
/// product w_K = w_{K−1}·step_K starting at w_0, so that large factorials
/// neither overflow nor pick up the rounding error of a logarithm.
fn scaled_products(w0: f64, steps: impl Iterator<Item = f64>) -> Vec<(f64, i32)> {
    let (mut m, mut e) = libm::frexp(w0);
    steps
        .map(|s| {
            let (sm, se) = libm::frexp(m * s);
            m = sm;
            e += se;
            (m, e)
        })
        .collect()
}

/// Evaluates Σ_K 𝒞_K w_K from the table, w_K given as mantissa/exponent
/// pairs with relative error at most (K + 2)·eps, falling back to the
/// extended-precision kernel for points whose bound is too loose.
fn table_or_kernel<K>(table: &SeriesTable, weights: &[(f64, i32)], kernel: K) -> Result<(Vec<f64>, Vec<f64>)>
where
    K: FnOnce() -> Result<WeightedKernel>,
{
    let eps = f64::EPSILON;
    let mut values = Vec::with_capacity(table.zetas.len());
    let mut bounds = Vec::with_capacity(table.zetas.len());
    let mut loose = Vec::new();
    for (i, row) in table.coeffs.iter().enumerate() {
        let terms = row.iter().zip(weights).enumerate().filter(|(_, (_, (m, _)))| *m != 0.0).map(|(k, (c, (m, e)))| {
            (libm::ldexp(c * m, *e), eps * (k + 5) as f64)
        });
        let (v, b) = sum_with_bound(terms);
        if !(b <= F64_PATH_BOUND) || !v.is_finite() {
            loose.push(i);
        }
        values.push(v);
        bounds.push(b);
    }
    if !loose.is_empty() {
        let kernel = kernel()?;
        let err = kernel.error_bound() + f64::EPSILON;
        for i in loose {
            values[i] = kernel.eval(table.zetas[i]);
            bounds[i] = err;
        }
    }
    Ok((values, bounds))
}

fn kernel_only(zetas: &[f64], kernel: WeightedKernel) -> (Vec<f64>, Vec<f64>) {
    let err = kernel.error_bound() + f64::EPSILON;
    (zetas.iter().map(|&z| kernel.eval(z)).collect(), vec![err; zetas.len()])
}

/// Kernel weights ½ λ^K N!/(N−K)!, K = 0..=N.
fn fock_kernel(gamma_tilde: f64, n: usize) -> Result<WeightedKernel> {
    WeightedKernel::new(gamma_tilde, n, move |g, prec| {
        let lam = Float::with_val(prec, 2.0 * g);
        let mut w = Float::with_val(prec, 0.5);
        let mut out = vec![w.clone()];
        for k in 1..=n {
            w *= &lam;
            w *= (n + 1 - k) as u32;
            out.push(w.clone());
        }
        out
    })
}

/// n̄_e under an N-photon Fock pulse, ½ Σ_{K≤N} 𝒞_K λ^K N!/(N−K)! with
/// λ = (η₀/ħκ)² = 2γ̃.
///
/// The sum is taken from the table in double precision, with falling
/// factorials in log space, wherever its rounding bound is below 1e−10;
/// other points (large N, where the alternating terms reach e^{O(√N)}) and
/// tables with kmax < N use the exact finite sum in extended precision.
pub fn fock_average(cfg: &SystemConfig, table: &SeriesTable, n: usize) -> Result<PopulationCurve> {
    check_table(cfg, table)?;
    if n == 0 {
        return Ok(PopulationCurve::zeros(&table.zetas));
    }
    let (values, bounds) = if n <= table.kmax {
        let lam = cfg.coupling_sq();
        let w = scaled_products(0.5, (1..=n).map(|k| lam * (n + 1 - k) as f64));
        table_or_kernel(table, &w, || fock_kernel(cfg.gamma_tilde, n))?
    } else {
        kernel_only(&table.zetas, fock_kernel(cfg.gamma_tilde, n)?)
    };
    PopulationCurve::checked(&table.zetas, values, bounds)
}

/// Σ_N p_N n̄_e^{(N)} for an arbitrary distribution, rearranged exactly as
/// ½ Σ_K 𝒞_K λ^K μ_K with the factorial moments μ_K of the truncated
/// distribution and summed in extended precision.
pub fn mixture_average(cfg: &SystemConfig, table: &SeriesTable, stats: &PhotonStatistics) -> Result<PopulationCurve> {
    check_table(cfg, table)?;
    if let StatisticsKind::Fock(n) = stats.kind {
        return fock_average(cfg, table, n);
    }
    let dist = stats.distribution()?;
    let nmax = dist.p.len() - 1;
    if nmax == 0 {
        return Ok(PopulationCurve::zeros(&table.zetas));
    }
    let kernel = moment_kernel(cfg.gamma_tilde, &dist, nmax)?;
    let (values, bounds) = kernel_only(&table.zetas, kernel);
    let bounds = bounds.into_iter().map(|b| b + dist.tail_mass).collect();
    PopulationCurve::checked(&table.zetas, values, bounds)
}

fn moment_kernel(gamma_tilde: f64, dist: &Distribution, kmax: usize) -> Result<WeightedKernel> {
    WeightedKernel::new(gamma_tilde, kmax, |g, prec| {
        let lam = Float::with_val(prec, 2.0 * g);
        let mut scale = Float::with_val(prec, 0.5);
        let mu = dist.factorial_moments(kmax, prec);
        mu.into_iter()
            .enumerate()
            .map(|(k, m)| {
                if k > 0 {
                    scale *= &lam;
                }
                m * &scale
            })
            .collect()
    })
}

/// The literal mixture Σ_N p_N n̄_e^{(N)}, one Fock average per photon
/// number, accumulated in ascending N.
pub fn mixture_average_by_fock(
    cfg: &SystemConfig,
    table: &SeriesTable,
    stats: &PhotonStatistics,
) -> Result<PopulationCurve> {
    check_table(cfg, table)?;
    let dist = stats.distribution()?;
    let len = table.zetas.len();
    // Fock curves are computed in parallel and accumulated in ascending N so
    // the result does not depend on scheduling.
    let curves = (1..dist.p.len())
        .into_par_iter()
        .filter(|&n| dist.p[n] != 0.0)
        .map(|n| fock_average(cfg, table, n).map(|f| (n, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![(0.0f64, 0.0f64); len];
    let mut bounds = vec![dist.tail_mass; len];
    for (n, f) in curves {
        let pn = dist.p[n];
        for i in 0..len {
            let t = pn * f.nbar_e[i];
            let (sum, comp) = &mut acc[i];
            let s = *sum + t;
            *comp += if sum.abs() >= t.abs() { (*sum - s) + t } else { (t - s) + *sum };
            *sum = s;
            bounds[i] += pn * f.error_bound[i];
        }
    }
    PopulationCurve::checked(&table.zetas, acc.into_iter().map(|(s, c)| s + c).collect(), bounds)
}

/// ½ Σ_K 𝒞_K λ^K g^(K) ⟨n⟩^K, truncated by the table's rule (at most
/// `min(table.kmax, 150)` orders).
pub fn series_average(
    cfg: &SystemConfig,
    table: &SeriesTable,
    orders: &CoherenceOrders,
    mean: f64,
) -> Result<PopulationCurve> {
    check_table(cfg, table)?;
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::InvalidInput(format!("mean photon number must be >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(PopulationCurve::zeros(&table.zetas));
    }
    let kcap = table.kmax.min(DEFAULT_KMAX_CAP).min(orders.g.len());
    let x = cfg.coupling_sq() * mean;
    let weights: Vec<(f64, i32)> = scaled_products(0.5, std::iter::repeat(x).take(kcap))
        .into_iter()
        .zip(&orders.g)
        .map(|((m, e), g)| {
            let (gm, ge) = libm::frexp(m * g);
            (gm, e + ge)
        })
        .collect();

    let mut kstop = 0;
    let mut values = Vec::with_capacity(table.zetas.len());
    let mut bounds = Vec::with_capacity(table.zetas.len());
    let mut loose = false;
    for row in &table.coeffs {
        let terms: Vec<(f64, f64)> = row
            .iter()
            .zip(&weights)
            .enumerate()
            .map(|(k, (c, (m, e)))| (libm::ldexp(c * m, *e), f64::EPSILON * (k + 6) as f64))
            .collect();
        let (_, used) = truncated_sum(terms.iter().map(|t| t.0), table.truncation_rtol).ok_or(Error::Convergence {
            what: "coherence-weighted series",
            estimate: terms.last().map_or(f64::NAN, |t| t.0.abs()),
        })?;
        kstop = kstop.max(used);
        let (v, b) = sum_with_bound(terms[..used].iter().copied());
        loose |= !(b <= F64_PATH_BOUND) || !v.is_finite();
        values.push(v);
        bounds.push(b);
    }
    if loose {
        let g = orders.g[..kstop].to_vec();
        let kernel = WeightedKernel::new(cfg.gamma_tilde, kstop, move |gt, prec| {
            let x = Float::with_val(prec, 2.0 * gt) * mean;
            let mut scale = Float::with_val(prec, 0.5);
            let mut out = vec![scale.clone()];
            for gk in &g {
                scale *= &x;
                out.push(Float::with_val(prec, &scale * gk));
            }
            out
        })?;
        let (v, b) = kernel_only(&table.zetas, kernel);
        // The truncation itself leaves at most three terms below rtol.
        let trunc = 3.0 * table.truncation_rtol;
        return PopulationCurve::checked(&table.zetas, v, b.into_iter().map(|e| e + trunc).collect());
    }
    PopulationCurve::checked(&table.zetas, values, bounds)
}

/// n̄_e for a coherent pulse of mean photon number `mean`, from the Bessel
/// quadrature at Ẽ = √(mean·λ).
pub fn coherent_average(cfg: &SystemConfig, zetas: &[f64], mean: f64) -> Result<PopulationCurve> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::InvalidInput(format!("mean photon number must be >= 0, got {mean}")));
    }
    let e = (mean * cfg.coupling_sq()).sqrt();
    let values = zetas.iter().map(|&z| analytic::wbar_exact(cfg, e, z).map(|w| 0.5 * w)).collect::<Result<_>>()?;
    PopulationCurve::checked(zetas, values, vec![5e-11; zetas.len()])
}

/// Coherent pulse through the coefficient series with g^(K) = 1.
pub fn coherent_average_series(cfg: &SystemConfig, table: &SeriesTable, mean: f64) -> Result<PopulationCurve> {
    let orders = CoherenceOrders { g: vec![1.0; table.kmax.min(DEFAULT_KMAX_CAP)] };
    series_average(cfg, table, &orders, mean)
}

/// Indices of interior local maxima whose topographic prominence exceeds
/// `prominence`. A plateau counts once, at its left edge.
pub fn prominent_maxima(values: &[f64], prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let h = values[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if values[k] > h {
                        break;
                    }
                    left_min = left_min.min(values[k]);
                }
                let mut right_min = h;
                for &v in &values[j + 1..] {
                    if v > h {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                if h - left_min.max(right_min) > prominence {
                    peaks.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_need_prominence() {
        let v = [0.0, 1.0, 0.5, 0.52, 0.3, 0.9, 0.9, 0.0];
        assert_eq!(prominent_maxima(&v, 0.01), vec![1, 3, 5]);
        assert_eq!(prominent_maxima(&v, 0.05), vec![1, 5]);
        assert!(prominent_maxima(&[0.0, 1.0, 2.0], 0.0).is_empty());
    }
}
