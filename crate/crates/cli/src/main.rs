use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulsebranch_cli::{diagnose, run, CliError, RunSpec, Scenario, SpecError};

#[derive(Parser)]
#[command(name = "pulsebranch", version, about = "Two-level emitter driven by an exponential pulse in any photon state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the excited-state population and write it as CSV.
    Run(SpecArgs),
    /// Report truncation points, series orders and a runtime estimate.
    Validate(SpecArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// JSON run spec; flags given alongside override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Decay rate over pulse linewidth, γ/κ.
    #[arg(long = "gamma-ratio", value_name = "G")]
    gamma_ratio: Option<f64>,
    /// Photon number N (fock, compare-fig2).
    #[arg(long, group = "photons")]
    n: Option<u64>,
    /// Mean photon number n̄ (thermal, compare-fig3).
    #[arg(long, group = "photons")]
    nbar: Option<f64>,
    /// Squeezing strength r (sqv).
    #[arg(long, group = "photons")]
    r: Option<f64>,
    /// Coherent intensity |α|² (branch, coherent).
    #[arg(long, group = "photons")]
    alpha2: Option<f64>,
    /// End of the κt window [default: 12·max(1, κ/γ)].
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of grid points [default: 600].
    #[arg(long)]
    steps: Option<usize>,
    /// Series order; when set, coherent and mixture runs use the truncated
    /// g^(K) series instead of the exact sums.
    #[arg(long)]
    kmax: Option<usize>,
    /// Truncation threshold of the series [default: 1e-10].
    #[arg(long)]
    rtol: Option<f64>,
    /// Output CSV path [default: stdout]; metadata goes to <out>.meta.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Two-column "N p_N" file (custom).
    #[arg(long = "pn-file", value_name = "FILE")]
    pn_file: Option<PathBuf>,
}

impl SpecArgs {
    fn into_spec(self) -> Result<RunSpec, SpecError> {
        let mut spec = match (&self.config, self.scenario) {
            (Some(path), _) => RunSpec::from_json_file(path)?,
            (None, Some(s)) => RunSpec::new(s),
            (None, None) => return Err(SpecError("either --scenario or --config is required".into())),
        };
        if let Some(s) = self.scenario {
            spec.scenario = s;
        }
        if let Some(g) = self.gamma_ratio {
            spec.gamma_tilde = g;
        }
        let photons = [
            ("--n", self.n.map(|n| n as f64), &[Scenario::Fock, Scenario::CompareFig2][..]),
            ("--nbar", self.nbar, &[Scenario::Thermal, Scenario::CompareFig3][..]),
            ("--r", self.r, &[Scenario::Sqv][..]),
            ("--alpha2", self.alpha2, &[Scenario::Branch, Scenario::Coherent][..]),
        ];
        for (flag, value, scenarios) in photons {
            if let Some(x) = value {
                if !scenarios.contains(&spec.scenario) {
                    return Err(SpecError(format!("{flag} does not apply to scenario {}", spec.scenario)));
                }
                spec.photons = Some(x);
            }
        }
        if self.tmax.is_some() {
            spec.tmax_kappa = self.tmax;
        }
        if let Some(s) = self.steps {
            spec.steps = s;
        }
        if self.kmax.is_some() {
            spec.kmax = self.kmax;
        }
        if let Some(r) = self.rtol {
            spec.rtol = r;
        }
        if self.out.is_some() {
            spec.output_path = self.out;
        }
        if self.pn_file.is_some() {
            spec.pn_file = self.pn_file;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn configure_threads() -> Result<(), SpecError> {
    let Ok(value) = std::env::var("PULSEBRANCH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| SpecError(format!("PULSEBRANCH_THREADS must be a positive integer, got {value:?}")))?;
    // Only fails if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Run(args) => {
            let spec = args.into_spec()?;
            let result = run(&spec)?;
            match &spec.output_path {
                Some(path) => result.save(path)?,
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    result.write_csv(&mut lock)?;
                    lock.flush()?;
                }
            }
        }
        Command::Validate(args) => {
            let spec = args.into_spec()?;
            let d = diagnose(&spec)?;
            println!("scenario: {}", spec.scenario);
            println!("gamma_tilde: {}", spec.gamma_tilde);
            println!("grid: {} points over kappa_t in [0, {}]", spec.steps, spec.tmax());
            println!("method: {}", d.method);
            println!("table kmax: {}", d.table_kmax);
            if let Some(n) = d.fock_order {
                println!("fock sum: exact, kmax = {n}");
            }
            if d.method == "series" {
                println!("series truncation: 3 consecutive terms below rtol = {:e}, cap {}", spec.rtol, d.table_kmax);
            }
            for t in &d.truncation {
                println!("{}: truncated at N = {} (tail mass {:.3e})", t.series, t.n_max, t.tail_mass);
            }
            println!("estimated runtime: {:.1} s", d.estimated_seconds);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pulsebranch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
