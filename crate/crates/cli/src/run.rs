use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pulsebranch::{
    build_table, coherence_orders, coherent_average, coherent_average_series, fock_average, mixture_average,
    series_average, solve_branch, BranchAmplitude, PhotonStatistics, PopulationCurve, SeriesTable, SystemConfig,
    TimeGrid,
};

use crate::spec::{RunSpec, Scenario, SpecError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Spec(SpecError),
    Numerics(pulsebranch::Error),
    Io(io::Error),
}

impl CliError {
    /// 2 for anything wrong with the request, 3 when a computed probability
    /// left [0, 1], 1 for other numerical failures.
    pub fn exit_code(&self) -> i32 {
        use pulsebranch::Error as E;
        match self {
            CliError::Spec(_) => 2,
            CliError::Numerics(E::NumericalIntegrity { .. }) => 3,
            CliError::Numerics(E::InvalidInput(_) | E::Domain(_) | E::Io(_) | E::UndefinedCoherence) => 2,
            CliError::Numerics(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Spec(e) => e.fmt(f),
            CliError::Numerics(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Spec(e)
    }
}

impl From<pulsebranch::Error> for CliError {
    fn from(e: pulsebranch::Error) -> Self {
        CliError::Numerics(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Where a photon-number distribution was cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub series: String,
    pub n_max: usize,
    pub tail_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub table_kmax: usize,
    /// Order of the exactly finite Fock sum, when there is one.
    pub fock_order: Option<usize>,
    /// "exact" for finite sums and quadrature, "series" for g^(K)-weighted
    /// sums truncated at `rtol`.
    pub method: String,
    pub truncation: Vec<Truncation>,
    /// Rough single-core runtime from a cost model calibrated on a desktop.
    pub estimated_seconds: f64,
    pub max_error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub spec: RunSpec,
    pub diagnostics: Diagnostics,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub kappa_t: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: Metadata,
}

impl RunResult {
    /// CSV with a version comment line, a header and one row per grid point,
    /// every value with 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# pulsebranch v{VERSION}")?;
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(out, "kappa_t,{}", names.join(","))?;
        let mut line = String::new();
        for (i, t) in self.kappa_t.iter().enumerate() {
            line.clear();
            line.push_str(&format!("{t:.14e}"));
            for (_, col) in &self.columns {
                line.push_str(&format!(",{:.14e}", col[i]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Writes the CSV to `path` and the metadata next to it as
    /// `<path>.meta.json`.
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut csv = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut csv)?;
        csv.flush()?;
        let meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        std::fs::write(sidecar_path(path), meta + "\n")?;
        Ok(())
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Statistics the scenario averages over, with their column names.
fn statistics(spec: &RunSpec) -> Result<Vec<(&'static str, PhotonStatistics)>, CliError> {
    let x = spec.photons()?;
    Ok(match spec.scenario {
        Scenario::Branch => vec![],
        Scenario::Coherent => vec![("coherent", PhotonStatistics::coherent(x)?)],
        Scenario::Fock => vec![("fock", PhotonStatistics::fock(spec.photon_number()?))],
        Scenario::Thermal => vec![("thermal", PhotonStatistics::thermal(x)?)],
        Scenario::Sqv => vec![("sqv", PhotonStatistics::squeezed_vacuum(x)?)],
        Scenario::Custom => {
            let path = spec.pn_file.as_ref().ok_or_else(|| SpecError("scenario custom needs pn_file".into()))?;
            vec![("custom", PhotonStatistics::from_file(path)?)]
        }
        Scenario::CompareFig2 => {
            let n = spec.photon_number()?;
            vec![("fock", PhotonStatistics::fock(n)), ("coherent", PhotonStatistics::coherent(n as f64)?)]
        }
        Scenario::CompareFig3 => vec![
            ("coherent", PhotonStatistics::coherent(x)?),
            ("thermal", PhotonStatistics::thermal(x)?),
            ("sqv", PhotonStatistics::squeezed_vacuum(x.sqrt().asinh())?),
        ],
    })
}

fn average(
    cfg: &SystemConfig,
    table: &SeriesTable,
    stats: &PhotonStatistics,
    series: bool,
) -> Result<PopulationCurve, CliError> {
    use pulsebranch::StatisticsKind as K;
    let curve = match (&stats.kind, series) {
        (K::Fock(n), _) => fock_average(cfg, table, *n)?,
        (K::Coherent(m), false) => coherent_average(cfg, &table.zetas, *m)?,
        (K::Coherent(m), true) => coherent_average_series(cfg, table, *m)?,
        (_, false) => mixture_average(cfg, table, stats)?,
        (_, true) if stats.mean_photons == 0.0 => mixture_average(cfg, table, stats)?,
        (_, true) => series_average(cfg, table, &coherence_orders(stats, table.kmax)?, stats.mean_photons)?,
    };
    Ok(curve)
}

/// Everything `run` would do short of the numerics.
pub fn diagnose(spec: &RunSpec) -> Result<Diagnostics, CliError> {
    spec.validate()?;
    let stats = statistics(spec)?;
    let steps = spec.steps as f64;
    let kmax = spec.table_kmax() as f64;
    let mut estimate = if spec.scenario == Scenario::Branch { 0.01 } else { 4e-7 * steps * kmax * kmax };
    let mut truncation = Vec::new();
    let mut fock_order = None;
    for (name, s) in &stats {
        let n = match s.kind {
            pulsebranch::StatisticsKind::Fock(n) => {
                fock_order = Some(n);
                n
            }
            pulsebranch::StatisticsKind::Coherent(_) if spec.kmax.is_none() => {
                estimate += 7e-4 * steps;
                continue;
            }
            _ => {
                let d = s.distribution()?;
                truncation.push(Truncation { series: name.to_string(), n_max: d.p.len() - 1, tail_mass: d.tail_mass });
                d.p.len() - 1
            }
        } as f64;
        estimate += 2e-6 * steps * n + 1e-6 * n * n;
    }
    let method = if spec.kmax.is_some() && !matches!(spec.scenario, Scenario::Branch) { "series" } else { "exact" };
    Ok(Diagnostics {
        table_kmax: spec.table_kmax(),
        fock_order,
        method: method.into(),
        truncation,
        estimated_seconds: estimate,
        max_error_bound: 0.0,
    })
}

pub fn run(spec: &RunSpec) -> Result<RunResult, CliError> {
    let started = std::time::Instant::now();
    let mut diagnostics = diagnose(spec)?;
    let cfg = SystemConfig::from_ratio(spec.gamma_tilde)?;
    let grid = TimeGrid::uniform(spec.tmax(), spec.steps)?;

    let mut columns = Vec::new();
    let mut worst = 0.0f64;
    if spec.scenario == Scenario::Branch {
        let amp = BranchAmplitude::new(spec.photons()?.sqrt(), 0.0)?;
        let traj = solve_branch(&cfg, &amp, &grid)?;
        worst = traj.error_estimate.iter().fold(0.0, |a, b| a.max(*b));
        columns.push(("branch".to_string(), traj.excited_population()));
    } else {
        let mut table = build_table(&cfg, &grid.zetas(), spec.table_kmax())?;
        table.truncation_rtol = spec.rtol;
        let series = diagnostics.method == "series";
        for (name, stats) in statistics(spec)? {
            let curve = average(&cfg, &table, &stats, series)?;
            worst = curve.error_bound.iter().fold(worst, |a, b| a.max(*b));
            columns.push((name.to_string(), curve.nbar_e));
        }
    }
    diagnostics.max_error_bound = worst;
    Ok(RunResult {
        kappa_t: grid.times().to_vec(),
        columns,
        metadata: Metadata {
            version: VERSION.into(),
            spec: spec.clone(),
            diagnostics,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulsebranch::Error as E;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(SpecError("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(E::NumericalIntegrity { zeta: 0.5, value: 1.1 }).exit_code(), 3);
        assert_eq!(CliError::from(E::InvalidInput("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(E::Convergence { what: "ode", estimate: 1.0 }).exit_code(), 1);
        assert_eq!(CliError::from(io::Error::other("x")).exit_code(), 1);
    }

    #[test]
    fn sidecar_sits_next_to_the_csv() {
        assert_eq!(sidecar_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta.json"));
    }
}
