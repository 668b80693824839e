//! Photon-number statistics of the input pulse and the P-function averages
//! that turn single-branch results into the dynamics under that pulse.

mod average;
mod oracle;

use std::path::Path;

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use average::{
    coherent_average, coherent_average_series, fock_average, mixture_average, mixture_average_by_fock,
    prominent_maxima, series_average, PopulationCurve,
};
pub use oracle::{taylor_oracle, TaylorEstimate, ORACLE_KMAX, ORACLE_RADIUS};

/// Probability mass that truncated distributions may leave in the tail.
pub const TAIL_MASS: f64 = 1e-10;
/// Largest photon number a truncated distribution may reach.
pub const N_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticsKind {
    Fock(usize),
    Thermal(f64),
    SqueezedVacuum(f64),
    Coherent(f64),
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub kind: StatisticsKind,
    pub mean_photons: f64,
}

/// Truncated photon-number distribution, `p[N]` for N = 0..p.len().
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub p: Vec<f64>,
    /// Mass beyond the last entry (not redistributed).
    pub tail_mass: f64,
}

fn non_negative(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {x}")))
    }
}

impl PhotonStatistics {
    pub fn fock(n: usize) -> Self {
        Self { kind: StatisticsKind::Fock(n), mean_photons: n as f64 }
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        let nbar = non_negative("mean photon number", nbar)?;
        Ok(Self { kind: StatisticsKind::Thermal(nbar), mean_photons: nbar })
    }

    /// Squeezed vacuum with squeezing strength `r`; ⟨n⟩ = sinh²r.
    pub fn squeezed_vacuum(r: f64) -> Result<Self> {
        let r = non_negative("squeezing strength", r)?;
        Ok(Self { kind: StatisticsKind::SqueezedVacuum(r), mean_photons: r.sinh().powi(2) })
    }

    pub fn coherent(mean: f64) -> Result<Self> {
        let mean = non_negative("mean photon number", mean)?;
        Ok(Self { kind: StatisticsKind::Coherent(mean), mean_photons: mean })
    }

    /// Arbitrary distribution. Entries must be non-negative and sum to one
    /// within 1e−6; the list is then renormalized exactly.
    pub fn custom(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty photon-number distribution".into()));
        }
        if let Some(n) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput(format!("p_{n} = {} is not a probability", p[n])));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        let p: Vec<f64> = p.into_iter().map(|x| x / total).collect();
        let mean = p.iter().enumerate().map(|(n, x)| n as f64 * x).sum();
        Ok(Self { kind: StatisticsKind::Custom(p), mean_photons: mean })
    }

    /// Parses whitespace-separated `N p_N` lines; `#` starts a comment.
    /// Photon numbers not listed have zero probability.
    pub fn parse_custom(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::InvalidInput(format!("line {}: expected `N p_N`, got {line:?}", lineno + 1));
            let mut it = line.split_whitespace();
            let n: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let p: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if it.next().is_some() {
                return Err(bad());
            }
            if n > N_CAP {
                return Err(Error::InvalidInput(format!("line {}: N = {n} exceeds {N_CAP}", lineno + 1)));
            }
            entries.push((n, p));
        }
        let len = entries.iter().map(|&(n, _)| n + 1).max().unwrap_or(0);
        let mut p = vec![0.0; len];
        for (n, x) in entries {
            if p[n] != 0.0 {
                return Err(Error::InvalidInput(format!("photon number {n} listed twice")));
            }
            p[n] = x;
        }
        Self::custom(p)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_custom(&text)
    }

    /// Distribution truncated once the cumulative mass reaches 1 − 1e−10.
    pub fn distribution(&self) -> Result<Distribution> {
        match &self.kind {
            StatisticsKind::Fock(n) => {
                let mut p = vec![0.0; n + 1];
                p[*n] = 1.0;
                Ok(Distribution { p, tail_mass: 0.0 })
            }
            StatisticsKind::Custom(p) => Ok(Distribution { p: p.clone(), tail_mass: 0.0 }),
            StatisticsKind::Thermal(nbar) => thermal_distribution(*nbar),
            StatisticsKind::SqueezedVacuum(r) => squeezed_distribution(*r),
            StatisticsKind::Coherent(m) => poisson_distribution(*m),
        }
    }
}

fn thermal_distribution(nbar: f64) -> Result<Distribution> {
    if nbar == 0.0 {
        return Ok(Distribution::delta0());
    }
    let ratio = nbar / (1.0 + nbar);
    // Tail beyond M is ratio^{M+1}.
    let m = (TAIL_MASS.ln() / ratio.ln()).ceil() as usize;
    let m = m.saturating_sub(1);
    if m > N_CAP {
        return Err(Error::Truncation { n_cap: N_CAP, mass: 1.0 - ratio.powi(N_CAP as i32 + 1) });
    }
    let mut p = Vec::with_capacity(m + 1);
    let mut x = 1.0 / (1.0 + nbar);
    for _ in 0..=m {
        p.push(x);
        x *= ratio;
    }
    Ok(Distribution { p, tail_mass: ratio.powi(m as i32 + 1) })
}

/// p_{2n} = C(2n, n)/4ⁿ · tanh^{2n} r / cosh r, built by the ratio
/// p_{2n+2}/p_{2n} = (2n+1)/(2n+2) · tanh² r.
fn squeezed_distribution(r: f64) -> Result<Distribution> {
    if r == 0.0 {
        return Ok(Distribution::delta0());
    }
    let t2 = r.tanh().powi(2);
    let mut x = 1.0 / r.cosh();
    let mut p = vec![x];
    let mut mass = x;
    let mut n = 0usize;
    while 1.0 - mass > TAIL_MASS {
        if 2 * n + 2 > N_CAP {
            return Err(Error::Truncation { n_cap: N_CAP, mass });
        }
        x *= (2 * n + 1) as f64 / (2 * n + 2) as f64 * t2;
        n += 1;
        p.push(0.0);
        p.push(x);
        mass += x;
    }
    Ok(Distribution { p, tail_mass: (1.0 - mass).max(0.0) })
}

fn poisson_distribution(m: f64) -> Result<Distribution> {
    if m == 0.0 {
        return Ok(Distribution::delta0());
    }
    let mut p = Vec::new();
    let mut mass = 0.0;
    let mut n = 0usize;
    loop {
        let x = (-m + n as f64 * m.ln() - libm::lgamma(n as f64 + 1.0)).exp();
        p.push(x);
        mass += x;
        if n as f64 > m && 1.0 - mass <= TAIL_MASS {
            break;
        }
        n += 1;
        if n > N_CAP {
            return Err(Error::Truncation { n_cap: N_CAP, mass });
        }
    }
    Ok(Distribution { p, tail_mass: (1.0 - mass).max(0.0) })
}

impl Distribution {
    fn delta0() -> Self {
        Self { p: vec![1.0], tail_mass: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, x)| n as f64 * x).sum()
    }

    /// Falling-factorial moments Σ_N p_N N!/(N−K)! for K = 0..=kmax, in
    /// extended precision.
    pub(crate) fn factorial_moments(&self, kmax: usize, prec: u32) -> Vec<Float> {
        let mut mu = vec![Float::new(prec); kmax + 1];
        for (n, &pn) in self.p.iter().enumerate() {
            if pn == 0.0 {
                continue;
            }
            let mut term = Float::with_val(prec, pn);
            mu[0] += &term;
            for (k, m) in mu.iter_mut().enumerate().take(kmax.min(n) + 1).skip(1) {
                term *= (n + 1 - k) as u32;
                *m += &term;
            }
        }
        mu
    }
}

/// Normalized factorial moments g^(K) = ⟨a†^K a^K⟩/⟨n⟩^K, K = 1..=kmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceOrders {
    pub g: Vec<f64>,
}

impl CoherenceOrders {
    pub fn order(&self, k: usize) -> f64 {
        self.g[k - 1]
    }
}

pub fn coherence_orders(stats: &PhotonStatistics, kmax: usize) -> Result<CoherenceOrders> {
    if kmax == 0 {
        return Err(Error::InvalidInput("kmax must be >= 1".into()));
    }
    if stats.mean_photons == 0.0 {
        return Err(Error::UndefinedCoherence);
    }
    let g = match &stats.kind {
        StatisticsKind::Coherent(_) => vec![1.0; kmax],
        StatisticsKind::Thermal(_) => {
            let mut f = 1.0;
            (1..=kmax)
                .map(|k| {
                    f *= k as f64;
                    f
                })
                .collect()
        }
        StatisticsKind::Fock(n) => {
            let n = *n;
            let mut f = 1.0;
            (1..=kmax)
                .map(|k| {
                    if k > n {
                        0.0
                    } else {
                        f *= (n + 1 - k) as f64 / n as f64;
                        f
                    }
                })
                .collect()
        }
        StatisticsKind::SqueezedVacuum(_) | StatisticsKind::Custom(_) => {
            let dist = stats.distribution()?;
            let mean = dist.mean();
            let mu = dist.factorial_moments(kmax, 128);
            (1..=kmax)
                .map(|k| {
                    let scale = Float::with_val(128, Float::with_val(128, mean).pow(k as u32));
                    Float::with_val(128, &mu[k] / &scale).to_f64()
                })
                .collect()
        }
    };
    Ok(CoherenceOrders { g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeezed_first_weights() {
        let r = 1.87;
        let s = PhotonStatistics::squeezed_vacuum(r).unwrap();
        assert!((s.mean_photons - 10.0).abs() < 0.05);
        let d = s.distribution().unwrap();
        assert_eq!(d.p[0], 1.0 / r.cosh());
        assert!((d.p[2] - 0.5 * r.tanh().powi(2) / r.cosh()).abs() < 1e-16);
        assert!(d.p.iter().skip(1).step_by(2).all(|&x| x == 0.0));
        assert!((d.total() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn thermal_tail_bound() {
        let d = PhotonStatistics::thermal(10.0).unwrap().distribution().unwrap();
        assert!(d.tail_mass <= 1e-10);
        assert!((d.total() + d.tail_mass - 1.0).abs() < 1e-13);
        assert!((d.p[3] - 1000.0 / 11f64.powi(4)).abs() < 1e-16);
    }

    #[test]
    fn coherence_examples() {
        let c = coherence_orders(&PhotonStatistics::coherent(3.0).unwrap(), 4).unwrap();
        assert_eq!(c.g, vec![1.0; 4]);
        let t = coherence_orders(&PhotonStatistics::thermal(2.0).unwrap(), 3).unwrap();
        assert_eq!((t.order(2), t.order(3)), (2.0, 6.0));
        let f = coherence_orders(&PhotonStatistics::fock(100), 2).unwrap();
        assert!((f.order(2) - 0.99).abs() < 1e-15);
        let f = coherence_orders(&PhotonStatistics::fock(2), 3).unwrap();
        assert_eq!(f.order(3), 0.0);
        assert!(matches!(coherence_orders(&PhotonStatistics::fock(0), 1), Err(Error::UndefinedCoherence)));
    }

    #[test]
    fn custom_file_format() {
        let s = PhotonStatistics::parse_custom("# two-photon mix\n0 0.25\n2 0.75 # tail\n\n").unwrap();
        assert_eq!(s.mean_photons, 1.5);
        assert_eq!(s.distribution().unwrap().p, vec![0.25, 0.0, 0.75]);
        assert!(PhotonStatistics::parse_custom("0 0.5").is_err());
        assert!(PhotonStatistics::parse_custom("1 x").is_err());
        assert!(PhotonStatistics::parse_custom("0 0.5\n0 0.5").is_err());
    }

    #[test]
    fn custom_squeezed_matches_moment_route() {
        let s = PhotonStatistics::squeezed_vacuum(0.6).unwrap();
        let g = coherence_orders(&s, 2).unwrap();
        // squeezed vacuum has g2 = 3 + 1/sinh²r
        assert!((g.order(1) - 1.0).abs() < 1e-9);
        // the 1e-10 tail cut shifts the second moment by about N_max^2 * 1e-10
        assert!((g.order(2) - (3.0 + 1.0 / s.mean_photons)).abs() < 1e-6);
    }
}
