use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pulsebranch::series::{DEFAULT_KMAX_CAP, DEFAULT_TRUNCATION_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Branch,
    Coherent,
    Fock,
    Thermal,
    Sqv,
    Custom,
    CompareFig2,
    CompareFig3,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Branch => "branch",
            Scenario::Coherent => "coherent",
            Scenario::Fock => "fock",
            Scenario::Thermal => "thermal",
            Scenario::Sqv => "sqv",
            Scenario::Custom => "custom",
            Scenario::CompareFig2 => "compare-fig2",
            Scenario::CompareFig3 => "compare-fig3",
        };
        f.write_str(s)
    }
}

/// One scenario to run.
///
/// `photons` is read according to the scenario: |α|² for `branch` and
/// `coherent`, N for `fock` and `compare-fig2`, n̄ for `thermal` and
/// `compare-fig3`, and the squeezing strength r for `sqv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub scenario: Scenario,
    #[serde(default = "default_gamma_tilde")]
    pub gamma_tilde: f64,
    #[serde(default)]
    pub photons: Option<f64>,
    /// End of the κt window; defaults to 12·max(1, 1/γ̃).
    #[serde(default)]
    pub tmax_kappa: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Highest series order tabulated; defaults per scenario.
    #[serde(default)]
    pub kmax: Option<usize>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Two-column "N p_N" file for the `custom` scenario.
    #[serde(default)]
    pub pn_file: Option<PathBuf>,
}

fn default_gamma_tilde() -> f64 {
    1.0
}

fn default_steps() -> usize {
    600
}

fn default_rtol() -> f64 {
    DEFAULT_TRUNCATION_RTOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid run spec: {}", self.0)
    }
}

impl std::error::Error for SpecError {}

impl RunSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            gamma_tilde: default_gamma_tilde(),
            photons: None,
            tmax_kappa: None,
            steps: default_steps(),
            kmax: None,
            rtol: default_rtol(),
            output_path: None,
            pn_file: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpecError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SpecError(format!("{}: {e}", path.display())))
    }

    pub fn tmax(&self) -> f64 {
        self.tmax_kappa.unwrap_or(12.0 * 1f64.max(1.0 / self.gamma_tilde))
    }

    /// Photon parameter, checked to be present and of the right kind.
    pub fn photons(&self) -> Result<f64, SpecError> {
        let x = match (self.scenario, self.photons) {
            (Scenario::Custom, _) => return Ok(0.0),
            (_, None) => return Err(SpecError(format!("scenario {} needs a photon parameter", self.scenario))),
            (_, Some(x)) => x,
        };
        if !(x.is_finite() && x >= 0.0) {
            return Err(SpecError(format!("photon parameter must be finite and >= 0, got {x}")));
        }
        Ok(x)
    }

    /// Photon number for the Fock scenarios.
    pub fn photon_number(&self) -> Result<usize, SpecError> {
        let x = self.photons()?;
        if x.fract() != 0.0 || x > 1e6 {
            return Err(SpecError(format!("Fock photon number must be a non-negative integer, got {x}")));
        }
        Ok(x as usize)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.gamma_tilde.is_finite() && self.gamma_tilde >= 0.0) {
            return Err(SpecError(format!("gamma_tilde must be finite and >= 0, got {}", self.gamma_tilde)));
        }
        if self.gamma_tilde == 0.0 && self.tmax_kappa.is_none() {
            return Err(SpecError("gamma_tilde = 0 needs an explicit tmax_kappa".into()));
        }
        let tmax = self.tmax();
        if !(tmax.is_finite() && tmax > 0.0) {
            return Err(SpecError(format!("tmax_kappa must be > 0, got {tmax}")));
        }
        if self.steps < 2 {
            return Err(SpecError(format!("steps must be >= 2, got {}", self.steps)));
        }
        if self.kmax == Some(0) {
            return Err(SpecError("kmax must be >= 1".into()));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(SpecError(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        match self.scenario {
            Scenario::Fock | Scenario::CompareFig2 => {
                self.photon_number()?;
            }
            Scenario::Custom => {
                if self.pn_file.is_none() {
                    return Err(SpecError("scenario custom needs pn_file".into()));
                }
            }
            _ => {
                self.photons()?;
            }
        }
        Ok(())
    }

    /// Highest series order the run tabulates. Set explicitly, it also
    /// switches the coherent and mixture scenarios to the g^(K)-weighted
    /// series truncated at `rtol`.
    pub fn table_kmax(&self) -> usize {
        if let Some(k) = self.kmax {
            return k;
        }
        match self.scenario {
            // beyond the cap the exact finite sum is evaluated without a table
            Scenario::Fock | Scenario::CompareFig2 => match self.photon_number().unwrap_or(1) {
                n if (1..=DEFAULT_KMAX_CAP).contains(&n) => n,
                _ => 1,
            },
            _ => 1,
        }
    }
}
