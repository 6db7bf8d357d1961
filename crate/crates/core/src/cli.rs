//! The `cavity-noon` runner: flag/config resolution, the six pipelines and
//! their CSV + JSON-manifest output.
//!
//! Every numeric flag may also come from a flat JSON config file whose keys
//! are the flag names (`{"omega": 1, "c-im": 1, ...}`); flags on the command
//! line win. The resolved values, including defaults, are written to
//! `<stem>.manifest.json` beside the data file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::dynamics::{self, Method, Propagator, Truncation};
use crate::entanglement::{self, DEFAULT_ZERO_TOL};
use crate::model::{self, BlockIndex, Mode, ModelParams};
use crate::oracle::{self, ExactEvolution, FockTruncation};
use crate::states::{self, InitialNoonState};
use crate::{Error, Result};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "CAVITY_NOON_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cavity-noon", version, about = "N00N-state qubit entanglement in coupled ultrastrong cavities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Block energies and parities of one (N0, N1) block over a coupling sweep.
    Spectrum,
    /// Concurrence and reduced density matrix along a time grid.
    Simulate,
    /// Closest pure state in the generalized Bell basis at one instant.
    Bellfit,
    /// Adiabatic against exact-diagonalization dynamics.
    OracleCompare,
    /// Couplings at which a block's off-diagonal element vanishes.
    Degeneracy,
    /// Truncated check of the hypergeometric orthogonality identity.
    IdentityCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Bellfit => "bellfit",
            Command::OracleCompare => "oracle-compare",
            Command::Degeneracy => "degeneracy",
            Command::IdentityCheck => "identity-check",
        }
    }
}

/// All flags, shared by every subcommand. `None` means "not given here".
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Flags {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long = "c-re", global = true, allow_hyphen_values = true)]
    #[serde(rename = "c-re")]
    pub c_re: Option<f64>,
    #[arg(long = "c-im", global = true, allow_hyphen_values = true)]
    #[serde(rename = "c-im")]
    pub c_im: Option<f64>,
    /// Photon number of the N00N state.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Largest ωt of the time grid.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Number of grid points (sweep points for `spectrum`).
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// The instant used by `bellfit`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega_t: Option<f64>,
    /// Truncation tolerance on the uncaptured weight.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Hard cap on the adiabatic truncation.
    #[arg(long, global = true)]
    pub n_max_cap: Option<usize>,
    #[arg(long, global = true)]
    pub n0: Option<usize>,
    #[arg(long, global = true)]
    pub n1: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda_max: Option<f64>,
    /// Cutoff of the exact oracle's local Fock spaces.
    #[arg(long, global = true)]
    pub n_max_local: Option<usize>,
    /// Truncation of the identity-check sum.
    #[arg(long, global = true)]
    pub identity_n_max: Option<usize>,
    /// `first-principles` or `paper-formulas`.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Also write the method crosscheck audit (simulate only).
    #[arg(long, global = true)]
    #[serde(default)]
    pub crosscheck: bool,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Flat JSON file of flag values; command-line flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Flags {
    /// `self` wins wherever it has a value.
    fn over(self, base: Flags) -> Flags {
        macro_rules! pick {
            ($($f:ident),*) => { Flags { $($f: self.$f.or(base.$f),)* crosscheck: self.crosscheck || base.crosscheck, config: self.config } };
        }
        pick!(
            omega, delta, lambda, nu, c_re, c_im, n, t_max, steps, omega_t, epsilon, n_max_cap, n0, n1, lambda_max,
            n_max_local, identity_n_max, method, output
        )
    }
}

/// Fully resolved run configuration; every default is explicit here and is
/// echoed into the manifest.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub mode: &'static str,
    pub omega: f64,
    pub delta: f64,
    pub lambda: f64,
    pub nu: f64,
    pub c_re: f64,
    pub c_im: f64,
    pub n: usize,
    pub t_max: f64,
    pub steps: usize,
    pub omega_t: f64,
    pub epsilon: f64,
    pub n_max_cap: usize,
    pub n0: usize,
    pub n1: usize,
    pub lambda_max: f64,
    pub n_max_local: usize,
    pub identity_n_max: usize,
    pub method: Method,
    pub crosscheck: bool,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn resolve(command: Command, flags: Flags) -> Result<Self> {
        let flags = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
                let file: Flags = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
                flags.over(file)
            }
            None => flags,
        };
        let method = match &flags.method {
            Some(m) => m.parse()?,
            None => Method::FirstPrinciples,
        };
        let default_output = match command {
            Command::Bellfit => format!("{}.json", command.name()),
            _ => format!("{}.csv", command.name()),
        };
        let cfg = Self {
            mode: command.name(),
            omega: flags.omega.unwrap_or(1.0),
            delta: flags.delta.unwrap_or(0.15),
            lambda: flags.lambda.unwrap_or(0.1),
            nu: flags.nu.unwrap_or(0.5),
            c_re: flags.c_re.unwrap_or(0.0),
            c_im: flags.c_im.unwrap_or(0.0),
            n: flags.n.unwrap_or(1),
            t_max: flags.t_max.unwrap_or(1000.0),
            steps: flags.steps.unwrap_or(1001),
            omega_t: flags.omega_t.unwrap_or(0.0),
            epsilon: flags.epsilon.unwrap_or(1e-12),
            n_max_cap: flags.n_max_cap.unwrap_or(64),
            n0: flags.n0.unwrap_or(0),
            n1: flags.n1.unwrap_or(0),
            lambda_max: flags.lambda_max.unwrap_or(0.2),
            n_max_local: flags.n_max_local.unwrap_or(20),
            identity_n_max: flags.identity_n_max.unwrap_or(60),
            method,
            crosscheck: flags.crosscheck,
            output: flags.output.unwrap_or_else(|| PathBuf::from(default_output)),
        };
        for (name, v) in [
            ("omega", cfg.omega),
            ("delta", cfg.delta),
            ("lambda", cfg.lambda),
            ("nu", cfg.nu),
            ("c-re", cfg.c_re),
            ("c-im", cfg.c_im),
            ("t-max", cfg.t_max),
            ("omega-t", cfg.omega_t),
            ("epsilon", cfg.epsilon),
            ("lambda-max", cfg.lambda_max),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if cfg.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.omega, self.delta, self.lambda, self.nu)
    }

    fn state(&self) -> Result<InitialNoonState> {
        InitialNoonState::new(self.n, Complex64::new(self.c_re, self.c_im))
    }

    fn manifest_path(&self) -> PathBuf {
        let stem = self.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.output.with_file_name(format!("{stem}.manifest.json"))
    }

    fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.output.with_file_name(format!("{stem}.{suffix}"))
    }
}

/// Fixed-width scientific notation with 9 significant digits; negative zero
/// is printed as zero so identical runs stay byte-identical.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// What a run produced, besides its files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: Value,
}

/// Runs one resolved configuration, writing the data file(s) and manifest.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let (mut outputs, details) = match cfg.mode {
        "spectrum" => run_spectrum(cfg)?,
        "simulate" => run_simulate(cfg)?,
        "bellfit" => run_bellfit(cfg)?,
        "oracle-compare" => run_oracle_compare(cfg)?,
        "degeneracy" => run_degeneracy(cfg)?,
        "identity-check" => run_identity_check(cfg)?,
        other => return Err(Error::Config(format!("unknown mode {other}"))),
    };
    let manifest_path = cfg.manifest_path();
    outputs.push(manifest_path.clone());
    let manifest = json!({
        "program": "cavity-noon",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "threads": rayon::current_num_threads(),
        "results": details,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    write_file(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(RunSummary { outputs, manifest })
}

fn run_spectrum(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let block = BlockIndex::new(cfg.n0, cfg.n1);
    if cfg.lambda_max.is_nan() || cfg.lambda_max < 0.0 {
        return Err(Error::Config(format!("lambda-max must be non-negative, got {}", cfg.lambda_max)));
    }
    let grid: Vec<f64> = if cfg.steps == 1 {
        vec![0.0]
    } else {
        (0..cfg.steps).map(|i| cfg.lambda_max * i as f64 / (cfg.steps - 1) as f64).collect()
    };
    let rows = model::energy_sweep(cfg.omega, cfg.delta, cfg.nu, block, &grid)?;
    let mut csv = Csv::new(&["lambda", "E0", "E1", "Eplus", "Eminus", "parity0", "parity1", "parityP", "parityM"]);
    for r in &rows {
        csv.row(
            std::iter::once(fmt_num(r.lambda))
                .chain(r.energies.iter().map(|&e| fmt_num(e)))
                .chain(r.parities.iter().map(|p| p.to_string())),
        );
    }
    csv.write(&cfg.output)?;
    let violations = rows.iter().filter(|r| !r.hierarchy_holds).count();
    Ok((vec![cfg.output.clone()], json!({ "block": block, "hierarchy_violations": violations })))
}

fn propagator(cfg: &RunConfig) -> Result<Propagator> {
    let params = cfg.params()?;
    if params.adiabatic_warning() {
        log::warn!("delta/omega = {} is large for the adiabatic treatment", params.delta / params.omega);
    }
    let state = cfg.state()?;
    Propagator::new(&state, &params, Truncation::Auto { epsilon: cfg.epsilon, cap: cfg.n_max_cap })
}

fn rho_columns() -> Vec<String> {
    let mut cols = vec!["omega_t".to_string(), "concurrence".to_string()];
    for i in 0..4 {
        for j in i..4 {
            cols.push(format!("rho_re_{i}{j}"));
            cols.push(format!("rho_im_{i}{j}"));
        }
    }
    cols
}

fn run_simulate(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let prop = propagator(cfg)?;
    let grid = dynamics::time_grid(cfg.t_max, cfg.steps)?;
    let trace = dynamics::concurrence_trace(&prop, &grid, cfg.method)?;

    let header = rho_columns();
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for p in &trace {
        let mut cells = vec![fmt_num(p.omega_t), fmt_num(p.concurrence)];
        for i in 0..4 {
            for j in i..4 {
                cells.push(fmt_num(p.rho.elements[i][j].re));
                cells.push(fmt_num(p.rho.elements[i][j].im));
            }
        }
        csv.row(cells);
    }
    csv.write(&cfg.output)?;
    let mut outputs = vec![cfg.output.clone()];

    let pairs: Vec<(f64, f64)> = trace.iter().map(|p| (p.omega_t, p.concurrence)).collect();
    let sd = entanglement::detect_sudden_death(&pairs, DEFAULT_ZERO_TOL);
    let mut details = json!({
        "n_max": prop.nmax(),
        "captured_weight": prop.captured_weight(),
        "sudden_death_zero_tol": DEFAULT_ZERO_TOL,
        "sudden_death_intervals": sd.intervals.len(),
        "sudden_death_longest": sd.longest_duration,
    });

    if cfg.crosscheck {
        let samples: Vec<f64> = if grid.len() <= 20 {
            grid.clone()
        } else {
            (0..20).map(|k| grid[k * (grid.len() - 1) / 19]).collect()
        };
        let report = dynamics::crosscheck_formulas(&prop, &samples);
        let path = cfg.sibling("crosscheck.json");
        write_file(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
        details["crosscheck_diagonal_max"] = json!(report.diagonal_max);
        details["crosscheck_max_deviation"] = json!(report.max_deviation);
        outputs.push(path);
    }
    Ok((outputs, details))
}

fn run_bellfit(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let prop = propagator(cfg)?;
    let rho = prop.reduced_density(cfg.omega_t, cfg.method);
    let fit = entanglement::bell_fit(&rho)?;
    let concurrence = entanglement::concurrence(&rho)?;
    let coefficients: Vec<Value> = entanglement::BellLabel::ALL
        .iter()
        .zip(fit.coefficients.iter())
        .map(|(label, z)| json!({ "label": label.to_string(), "re": z.re, "im": z.im, "abs": z.norm() }))
        .collect();
    let out = json!({
        "omega_t": cfg.omega_t,
        "coefficients": coefficients,
        "distance": fit.distance,
        "dominant": fit.dominant.to_string(),
        "degenerate": fit.degenerate,
        "concurrence": concurrence,
    });
    write_file(&cfg.output, (serde_json::to_string_pretty(&out)? + "\n").as_bytes())?;
    Ok((
        vec![cfg.output.clone()],
        json!({ "n_max": prop.nmax(), "captured_weight": prop.captured_weight() }),
    ))
}

fn run_oracle_compare(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let prop = propagator(cfg)?;
    let params = cfg.params()?;
    let state = cfg.state()?;
    let trunc = FockTruncation::new(cfg.n_max_local)?;
    let exact = ExactEvolution::new(&params, trunc)?;
    let traj = exact.trajectory(&state)?;
    let grid = dynamics::time_grid(cfg.t_max, cfg.steps)?;

    let mut csv = Csv::new(&["omega_t", "max_deviation", "concurrence_adiabatic", "concurrence_exact"]);
    let first = traj.snapshot(0.0);
    let (mut worst, mut leak, mut drift_e, mut drift_n, mut drift_p) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &t in &grid {
        let a = prop.reduced_density(t, cfg.method);
        let snap = traj.snapshot(t);
        let dev = crate::linalg::max_abs_diff(&a.elements, &snap.rho.elements);
        worst = worst.max(dev);
        leak = leak.max(snap.leakage);
        drift_e = drift_e.max((snap.energy - first.energy).abs());
        drift_n = drift_n.max((snap.norm - 1.0).abs());
        drift_p = drift_p.max((snap.parity - first.parity).abs());
        csv.row([
            fmt_num(t),
            fmt_num(dev),
            fmt_num(entanglement::concurrence(&a)?),
            fmt_num(entanglement::concurrence(&snap.rho)?),
        ]);
    }
    csv.write(&cfg.output)?;
    Ok((
        vec![cfg.output.clone()],
        json!({
            "n_max": prop.nmax(),
            "captured_weight": prop.captured_weight(),
            "oracle_dimension": trunc.dimension(),
            "oracle_margin": oracle::DEFAULT_MARGIN,
            "max_deviation": worst,
            "max_leakage": leak,
            "reliable": leak <= oracle::LEAKAGE_THRESHOLD,
            "parity_commutator_norm": oracle::parity_commutator_norm(&params, trunc),
            "energy_drift": drift_e,
            "norm_drift": drift_n,
            "parity_drift": drift_p,
        }),
    ))
}

fn run_degeneracy(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let block = BlockIndex::new(cfg.n0, cfg.n1);
    let couplings = model::degeneracy_couplings(cfg.omega, cfg.nu, block, cfg.lambda_max)?;
    let mut csv = Csv::new(&["n0", "n1", "lambda"]);
    for &l in &couplings {
        csv.row([cfg.n0.to_string(), cfg.n1.to_string(), fmt_num(l)]);
    }
    csv.write(&cfg.output)?;
    Ok((vec![cfg.output.clone()], json!({ "block": block, "count": couplings.len() })))
}

/// Relative tolerance for the diagonal identity cases.
const IDENTITY_REL_TOL: f64 = 1e-8;
/// Absolute tolerance where the right side vanishes.
const IDENTITY_ABS_TOL: f64 = 1e-10;

fn run_identity_check(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Value)> {
    let params = cfg.params()?;
    let max = 3usize;
    let mut csv = Csv::new(&["mode", "n0", "n1", "n0p", "n1p", "x", "lhs", "rhs", "error", "pass"]);
    let mut failures = 0usize;
    for mode in [Mode::Zero, Mode::One] {
        let om = params.mode_frequency(mode);
        let x = 2.0 * params.lambda * params.lambda / (om * om);
        for n0 in 0..=max {
            for n1 in 0..=max {
                for n0p in 0..=max {
                    for n1p in 0..=max {
                        let (lhs, rhs) = states::hypergeometric_identity_check(n0, n1, n0p, n1p, x, cfg.identity_n_max)?;
                        let (err, ok) = if rhs != 0.0 {
                            let e = (lhs - rhs).abs() / rhs.abs();
                            (e, e <= IDENTITY_REL_TOL)
                        } else {
                            let e = lhs.abs();
                            (e, e <= IDENTITY_ABS_TOL)
                        };
                        failures += usize::from(!ok);
                        csv.row([
                            (mode as u8).to_string(),
                            n0.to_string(),
                            n1.to_string(),
                            n0p.to_string(),
                            n1p.to_string(),
                            fmt_num(x),
                            fmt_num(lhs),
                            fmt_num(rhs),
                            fmt_num(err),
                            ok.to_string(),
                        ]);
                    }
                }
            }
        }
    }
    csv.write(&cfg.output)?;
    Ok((
        vec![cfg.output.clone()],
        json!({ "failures": failures, "rel_tol": IDENTITY_REL_TOL, "abs_tol": IDENTITY_ABS_TOL }),
    ))
}

/// Exit status for each error class.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) | Error::OracleCap { .. } => 2,
        Error::Domain(_) => 3,
        Error::TruncationCap { .. } => 4,
        Error::Io(_) | Error::MalformedDensity(_) => 1,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Config(_) | Error::Json(_) => "config",
        Error::InvalidArgument(_) => "invalid-argument",
        Error::OracleCap { .. } => "oracle-cap",
        Error::Domain(_) => "domain",
        Error::TruncationCap { .. } => "truncation-cap",
        Error::Io(_) => "io",
        Error::MalformedDensity(_) => "malformed-density",
    }
}

/// One line, `key=value` pairs, message JSON-quoted.
pub fn error_line(err: &Error) -> String {
    let msg = err.to_string().replace('\n', " ");
    format!("error kind={} code={} message={}", error_kind(err), exit_code(err), Value::from(msg))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool may already exist when called repeatedly in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs, and returns the process exit status. Errors go to
/// stderr as a single machine-parseable line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("bad arguments").trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line(&Error::Config(first)));
            return 2;
        }
    };
    let outcome = configure_threads()
        .and_then(|()| RunConfig::resolve(cli.command, cli.flags))
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(summary) => {
            for p in &summary.outputs {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}
