//! Quasi-classical Bloch equations for a single coherent branch under the
//! exponential pulse, in the dimensionless time τ = κt.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};

/// Physical parameters of the emitter and the pulse (resonant driving).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub gamma: f64,
    pub kappa: f64,
    pub gamma_tilde: f64,
    pub eta0_over_hbar_kappa: f64,
}

impl SystemConfig {
    /// `gamma = 0` is accepted so that the dissipation-free limit can be run
    /// through the same code paths.
    pub fn new(gamma: f64, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be non-negative, got {gamma}")));
        }
        let gamma_tilde = gamma / kappa;
        Ok(Self { gamma, kappa, gamma_tilde, eta0_over_hbar_kappa: (2.0 * gamma_tilde).sqrt() })
    }

    /// Configuration in units where κ = 1.
    pub fn from_ratio(gamma_tilde: f64) -> Result<Self> {
        Self::new(gamma_tilde, 1.0)
    }

    /// Squared single-photon coupling (η₀/ħκ)² = 2γ̃, the intensity unit of
    /// the series expansion.
    pub fn coupling_sq(&self) -> f64 {
        2.0 * self.gamma_tilde
    }
}

/// Coherent-branch amplitude α = |α| e^{iφ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchAmplitude {
    pub magnitude: f64,
    pub phase: f64,
}

impl BranchAmplitude {
    /// The phase is wrapped into [0, 2π).
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::InvalidInput(format!("|alpha| must be non-negative, got {magnitude}")));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidInput("phase must be finite".into()));
        }
        let mut phase = phase.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        Ok(Self { magnitude, phase })
    }

    /// Dimensionless drive strength Ẽ = |ε_α|/κ.
    pub fn e_tilde(&self, cfg: &SystemConfig) -> f64 {
        self.magnitude * cfg.eta0_over_hbar_kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochState {
    pub const GROUND: BlochState = BlochState { u: 0.0, v: 0.0, w: -1.0 };

    pub fn norm_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.w * self.w
    }
}

/// Ascending grid of κt values starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("time grid is empty".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidInput(format!("time grid must start at 0, got {}", times[0])));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidInput(format!("time grid not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { times })
    }

    /// `points` uniform samples over [0, tmax].
    pub fn uniform(tmax: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidInput("need at least two grid points".into()));
        }
        if !(tmax.is_finite() && tmax > 0.0) {
            return Err(Error::InvalidInput(format!("tmax must be positive, got {tmax}")));
        }
        let n = points - 1;
        let times = (0..points).map(|i| if i == n { tmax } else { tmax * i as f64 / n as f64 }).collect();
        Self::new(times)
    }

    /// 600 points over κt ∈ [0, 12·max(1, 1/γ̃)].
    pub fn default_for(cfg: &SystemConfig) -> Self {
        let stretch = if cfg.gamma_tilde > 0.0 { (1.0 / cfg.gamma_tilde).max(1.0) } else { 1.0 };
        Self::uniform(12.0 * stretch, 600).expect("default grid is valid")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.times.iter().map(|t| (-0.5 * t).exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sampled Bloch-vector evolution.
///
/// `wbar` carries w + 1 (twice the excited population) as integrated, which
/// keeps full relative precision where w sits close to −1.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    pub states: Vec<BlochState>,
    pub wbar: Vec<f64>,
    /// Accumulated local-error estimate of the integrator at each sample.
    pub error_estimate: Vec<f64>,
}

impl Trajectory {
    /// Excited-state population (w + 1)/2.
    pub fn excited_population(&self) -> Vec<f64> {
        self.wbar.iter().map(|w| 0.5 * w).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000 }
    }
}

/// Integrates one branch from the ground state with the drive phase set to
/// zero, then rotates by the branch phase.
pub fn solve_branch(cfg: &SystemConfig, amp: &BranchAmplitude, grid: &TimeGrid) -> Result<Trajectory> {
    solve_branch_with(cfg, amp, grid, &SolverOptions::default())
}

pub fn solve_branch_with(
    cfg: &SystemConfig,
    amp: &BranchAmplitude,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let traj = solve_drive(cfg, amp.e_tilde(cfg), grid, opts)?;
    Ok(if amp.phase == 0.0 { traj } else { rotate_phase(&traj, amp.phase) })
}

/// Zero-phase branch for a given drive strength Ẽ.
pub fn solve_drive(cfg: &SystemConfig, e_tilde: f64, grid: &TimeGrid, opts: &SolverOptions) -> Result<Trajectory> {
    if !(e_tilde.is_finite() && e_tilde >= 0.0) {
        return Err(Error::InvalidInput(format!("drive strength must be non-negative, got {e_tilde}")));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let g = cfg.gamma_tilde;
    let e = e_tilde;
    // State is (u, v, w + 1).
    let rhs = |t: f64, y: &[f64; 3]| {
        let drive = e * (-0.5 * t).exp();
        [-0.5 * g * y[0], -0.5 * g * y[1] + drive * (y[2] - 1.0), -g * y[2] - drive * y[1]]
    };
    let tol = Tolerances { rtol: opts.rtol, atol: opts.atol, max_steps: opts.max_steps };
    let samples = ode::integrate(rhs, 0.0, [0.0, 0.0, 0.0], grid.times(), tol)?;

    let states = samples.values.iter().map(|y| BlochState { u: y[0], v: y[1], w: y[2] - 1.0 }).collect();
    let wbar = samples.values.iter().map(|y| y[2]).collect();
    Ok(Trajectory {
        times: grid.times().to_vec(),
        zeta: grid.zetas(),
        states,
        wbar,
        error_estimate: samples.error,
    })
}

/// Rotates the transverse components by `phase`; w is untouched.
pub fn rotate_phase(traj: &Trajectory, phase: f64) -> Trajectory {
    let (s, c) = phase.sin_cos();
    let states = traj
        .states
        .iter()
        .map(|b| BlochState { u: b.u * c + b.v * s, v: -b.u * s + b.v * c, w: b.w })
        .collect();
    Trajectory { states, ..traj.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single(state: BlochState) -> Trajectory {
        Trajectory {
            times: vec![0.0],
            zeta: vec![1.0],
            states: vec![state],
            wbar: vec![state.w + 1.0],
            error_estimate: vec![0.0],
        }
    }

    #[test]
    fn config_relations() {
        let cfg = SystemConfig::new(3.0, 2.0).unwrap();
        assert_eq!(cfg.gamma_tilde, 1.5);
        assert!((cfg.eta0_over_hbar_kappa.powi(2) - 3.0).abs() < 1e-15);
        assert!(SystemConfig::new(1.0, 0.0).is_err());
        assert!(SystemConfig::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn amplitude_phase_wraps() {
        let a = BranchAmplitude::new(1.0, -FRAC_PI_2).unwrap();
        assert!((a.phase - 1.5 * PI).abs() < 1e-15);
        assert!(BranchAmplitude::new(-1.0, 0.0).is_err());
        let cfg = SystemConfig::from_ratio(1.0).unwrap();
        assert!((a.e_tilde(&cfg) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.5, 1.0]).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());
        let g = TimeGrid::default_for(&SystemConfig::from_ratio(0.5).unwrap());
        assert_eq!(g.len(), 600);
        assert_eq!(*g.times().last().unwrap(), 24.0);
    }

    #[test]
    fn zero_drive_stays_in_ground_state() {
        let cfg = SystemConfig::from_ratio(0.7).unwrap();
        let grid = TimeGrid::uniform(10.0, 50).unwrap();
        let amp = BranchAmplitude::new(0.0, 1.0).unwrap();
        let tr = solve_branch(&cfg, &amp, &grid).unwrap();
        assert!(tr.states.iter().all(|s| *s == BlochState::GROUND));
    }

    #[test]
    fn lossless_pi_pulse_inverts() {
        let cfg = SystemConfig::from_ratio(0.0).unwrap();
        let grid = TimeGrid::uniform(60.0, 20).unwrap();
        let tr = solve_drive(&cfg, FRAC_PI_2, &grid, &SolverOptions::default()).unwrap();
        assert!((tr.states.last().unwrap().w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_examples() {
        let tr = single(BlochState { u: 0.3, v: 0.4, w: -0.5 });
        assert_eq!(rotate_phase(&tr, 0.0), tr);
        let r = rotate_phase(&tr, FRAC_PI_2).states[0];
        assert!((r.u - 0.4).abs() < 1e-15 && (r.v + 0.3).abs() < 1e-15 && r.w == -0.5);
        let r = rotate_phase(&tr, 2.0 * PI).states[0];
        assert!((r.u - 0.3).abs() < 1e-14 && (r.v - 0.4).abs() < 1e-14);
    }

    #[test]
    fn non_monotone_grid_is_rejected_before_solving() {
        assert!(matches!(TimeGrid::new(vec![0.0, 2.0, 1.0]), Err(Error::InvalidInput(_))));
    }
}
