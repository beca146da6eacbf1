//! Experiment runner behind the `trotter-scar` binary.
//!
//! Every command writes into one run directory: versioned CSV tables, JSON
//! reports, and a `manifest.json` whose `content_hash` covers the config and
//! every numeric artifact (but not wall time).

mod config;
mod selftest;
mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{InitialState, LossSection, OptimizerSection, RunConfig, MAX_SITES};
pub use selftest::{run_selftest, SelfCheck};

use crate::analysis::{ladder_report, record_trajectory, LadderReport, TrajectoryRecord};
use crate::formulas::{error_kernel, ErrorKernel, ProductFormulaSchedule, TrotterCircuit};
use crate::linalg::{eigendecompose_hermitian, SpectralDecomposition, StateVector};
use crate::models::SplitHamiltonian;
use crate::variational::{
    haar_ensemble, haar_random_product_state, neel_state, optimize_with, prepare_product_state, LossEvaluator,
    OptimizationResult,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] crate::Error),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) | CliError::Check(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "trotter-scar", version, about = "State-dependent Trotter error experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Record exact and Trotterized trajectories of one initial state.
    Simulate,
    /// Search product states for a low-error initial state.
    Optimize,
    /// Render one figure from an existing run directory.
    Figure {
        #[arg(value_enum)]
        which: FigureKind,
    },
    /// Quick numerical self-checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureKind {
    Echo,
    Error,
    Overlaps,
    Bloch,
}

impl FigureKind {
    fn name(self) -> &'static str {
        match self {
            FigureKind::Echo => "echo",
            FigureKind::Error => "error",
            FigureKind::Overlaps => "overlaps",
            FigureKind::Bloch => "bloch",
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let src = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&src).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Selftest = cli.command {
        let checks = run_selftest();
        let mut ok = true;
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            ok &= c.passed;
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        return if ok {
            Ok(())
        } else {
            Err(CliError::Check(format!("{failed} self-check(s) failed")))
        };
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.model.name()));
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &out).map(|m| println!("wrote {} ({})", out.display(), m.content_hash)),
        Command::Optimize => cmd_optimize(&cfg, &out).map(|m| println!("wrote {} ({})", out.display(), m.content_hash)),
        Command::Figure { which } => cmd_figure(&out, which).map(|p| println!("wrote {}", p.display())),
        Command::Selftest => unreachable!(),
    }
}

/// A CSV table with optional cells, written with a schema-version comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn new(kind: &str, columns: Vec<String>) -> Self {
        Self {
            kind: kind.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Values of a column with empty cells dropped, paired with `time`-like key column.
    pub fn pairs(&self, x: &str, y: &str) -> Vec<(f64, f64)> {
        match (self.column(x), self.column(y)) {
            (Some(xs), Some(ys)) => xs
                .into_iter()
                .zip(ys)
                .filter_map(|(a, b)| Some((a?, b?)))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.map(|v| format!("{v:e}")).unwrap_or_default()).collect();
            w.write_record(&cells).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
        format!("# schema_version={SCHEMA_VERSION} kind={}\n{body}", self.kind)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let first = text.lines().next().unwrap_or_default();
        let kind = first
            .strip_prefix("# schema_version=")
            .and_then(|rest| {
                let (v, k) = rest.split_once(" kind=")?;
                (v.trim() == SCHEMA_VERSION.to_string()).then(|| k.trim().to_string())
            })
            .ok_or_else(|| io_err(path, format!("missing or unsupported schema header {first:?}")))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| io_err(path, e))?;
            let row = rec
                .iter()
                .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some) })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| io_err(path, e))?;
            rows.push(row);
        }
        Ok(Self { kind, columns, rows })
    }
}

pub fn trajectory_table(rec: &TrajectoryRecord) -> Table {
    let mut cols: Vec<String> = ["time", "loschmidt_exact", "loschmidt_trotter", "trotter_error", "predicted_error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for s in &rec.tracked_sites {
        for axis in ["x", "y", "z"] {
            cols.push(format!("bloch_{axis}_site{s}"));
        }
    }
    let mut t = Table::new("trajectory", cols);
    for k in 0..rec.times.len() {
        let mut row = vec![
            Some(rec.times[k]),
            Some(rec.loschmidt_exact[k]),
            Some(rec.loschmidt_trotter[k]),
            Some(rec.trotter_error[k]),
            rec.predicted_error.get(k).copied(),
        ];
        for b in &rec.bloch[k] {
            row.extend(b.iter().map(|&v| Some(v)));
        }
        t.rows.push(row);
    }
    t
}

fn overlaps_table(report: &LadderReport) -> Table {
    let mut t = Table::new("overlaps", vec!["rank".into(), "energy".into(), "weight".into()]);
    for (i, &(e, w)) in report.top_overlaps.iter().enumerate() {
        t.rows.push(vec![Some((i + 1) as f64), Some(e), Some(w)]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    pub config: RunConfig,
    pub wall_time_seconds: f64,
    pub derived: serde_json::Value,
    /// SHA-256 of each artifact, by file name.
    pub artifacts: BTreeMap<String, String>,
    /// SHA-256 over config, derived quantities and artifact hashes.
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts in memory, then writes them all at once.
struct RunWriter {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl RunWriter {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), contents.into());
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.add(name, s);
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        derived: serde_json::Value,
        started: Instant,
    ) -> Result<Manifest, CliError> {
        let artifacts: BTreeMap<String, String> = self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect();
        let hashed = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "library_version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "derived": derived,
            "artifacts": artifacts,
        });
        let content_hash = sha256_hex(serde_json::to_string(&hashed).expect("serializable").as_bytes());
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            derived,
            artifacts,
            content_hash,
        };
        self.add_json("manifest.json", &manifest);
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        for (name, bytes) in &self.files {
            let p = self.dir.join(name);
            fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        }
        Ok(manifest)
    }
}

/// Hamiltonian, spectrum, circuit and (when available) error kernel of a run.
pub struct Prepared {
    pub ham: SplitHamiltonian,
    pub spec: SpectralDecomposition,
    pub circuit: TrotterCircuit,
    pub kernel: Option<ErrorKernel>,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let ham = cfg.hamiltonian()?;
        let spec = eigendecompose_hermitian(&ham.dense())?;
        let schedule = ProductFormulaSchedule::for_order(cfg.schedule_order)?;
        let circuit = TrotterCircuit::new(&ham, &schedule, cfg.dt)?;
        let kernel = match cfg.schedule_order {
            1 | 2 | 4 => Some(error_kernel(&ham, cfg.schedule_order)?),
            _ => None,
        };
        Ok(Self {
            ham,
            spec,
            circuit,
            kernel,
        })
    }

    fn trajectory(&self, cfg: &RunConfig, psi: &StateVector, sites: &[usize], predict: bool) -> crate::Result<TrajectoryRecord> {
        record_trajectory(
            &self.spec,
            &self.circuit,
            if predict { self.kernel.as_ref() } else { None },
            psi,
            cfg.dt,
            cfg.n_record_steps(),
            cfg.record_every,
            sites,
        )
    }
}

pub fn initial_state(cfg: &RunConfig) -> crate::Result<StateVector> {
    match &cfg.initial_state {
        InitialState::Haar => Ok(haar_random_product_state(cfg.n_sites, cfg.seed)),
        InitialState::Neel => Ok(neel_state(cfg.n_sites)),
        InitialState::AllUp => StateVector::basis_state(cfg.n_sites, 0),
        InitialState::XPolarized | InitialState::Product { .. } => {
            prepare_product_state(&cfg.product_parameters().expect("product variant"))
        }
    }
}

fn model_derived(cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "model": cfg.model.name(),
        "n_sites": cfg.n_sites,
        "omega": cfg.model.omega(),
        "strobe_times": cfg.model.strobe_times(5),
        "omega_validity": cfg.model.validity_note(),
        "n_record_steps": cfg.n_record_steps(),
    })
}

/// Trajectory of the configured initial state.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let started = Instant::now();
    let prep = Prepared::new(cfg)?;
    let psi = initial_state(cfg)?;
    let rec = prep.trajectory(cfg, &psi, &cfg.tracked_sites(), true)?;
    let ladder = ladder_report(&prep.spec, &psi, cfg.weight_cutoff, cfg.top_k)?;
    let mut w = RunWriter::new(out);
    w.add("trajectory.csv", trajectory_table(&rec).to_csv());
    w.add("overlaps.csv", overlaps_table(&ladder).to_csv());
    w.add_json("ladder.json", &ladder);
    let mut derived = model_derived(cfg);
    derived["ladder"] = serde_json::to_value(&ladder).expect("serializable");
    derived["final_trotter_error"] = serde_json::json!(rec.trotter_error.last());
    w.finish("simulate", cfg, derived, started)
}

/// Mean of several trajectories' error and echo columns, row by row.
fn ensemble_mean(recs: &[TrajectoryRecord]) -> (Vec<f64>, Vec<f64>) {
    let n = recs.len() as f64;
    let rows = recs[0].times.len();
    let mut err = vec![0.0; rows];
    let mut echo = vec![0.0; rows];
    for r in recs {
        for k in 0..rows {
            err[k] += r.trotter_error[k] / n;
            echo[k] += r.loschmidt_trotter[k] / n;
        }
    }
    (err, echo)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub optimized_error_term: f64,
    /// Mean `l1·‖δψ(T_l)‖` over the Haar-random baseline ensemble.
    pub baseline_mean_error_term: f64,
    pub reference_error_term: f64,
    pub reference_state: &'static str,
}

/// Optimization plus comparison against a Haar-random ensemble and the Néel state.
pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let started = Instant::now();
    let prep = Prepared::new(cfg)?;
    let eval = LossEvaluator::with_spectrum(&prep.ham, &cfg.loss_config(), prep.spec.clone())?;
    let result: OptimizationResult = optimize_with(&eval, &cfg.optimizer_options())?;
    let psi = prepare_product_state(&result.params)?;
    let ladder = ladder_report(&prep.spec, &psi, cfg.weight_cutoff, cfg.top_k)?;
    let sites = cfg.tracked_sites();
    let optimized = prep.trajectory(cfg, &psi, &sites, true)?;
    let reference_psi = neel_state(cfg.n_sites);
    let reference = prep.trajectory(cfg, &reference_psi, &[], false)?;
    let ensemble = haar_ensemble(cfg.n_sites, cfg.baseline_size, cfg.seed);
    let baseline: Vec<TrajectoryRecord> = ensemble
        .par_iter()
        .map(|s| prep.trajectory(cfg, s, &[], false))
        .collect::<crate::Result<_>>()?;
    let baseline_terms: Vec<f64> = ensemble
        .par_iter()
        .map(|s| eval.loss_of_state(s).map(|v| v.error_term))
        .collect::<crate::Result<_>>()?;
    let (base_err, base_echo) = ensemble_mean(&baseline);

    let mut cmp = Table::new(
        "comparison",
        [
            "time",
            "optimized_error",
            "baseline_mean_error",
            "reference_error",
            "optimized_echo",
            "baseline_mean_echo",
            "reference_echo",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for k in 0..optimized.times.len() {
        cmp.rows.push(vec![
            Some(optimized.times[k]),
            Some(optimized.trotter_error[k]),
            Some(base_err[k]),
            Some(reference.trotter_error[k]),
            Some(optimized.loschmidt_trotter[k]),
            Some(base_echo[k]),
            Some(reference.loschmidt_trotter[k]),
        ]);
    }
    let l = cfg.n_sites;
    let mut hist_cols: Vec<String> = ["iteration", "loss", "error_term", "echo_term", "learning_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    hist_cols.extend((1..=l).map(|j| format!("theta_{j}")));
    hist_cols.extend((1..=l).map(|j| format!("phi_{j}")));
    let mut hist = Table::new("history", hist_cols);
    for r in &result.history.records {
        let mut row = vec![
            Some(r.iteration as f64),
            Some(r.loss),
            Some(r.error_term),
            Some(r.echo_term),
            Some(r.learning_rate),
        ];
        row.extend(r.params.iter().map(|&p| Some(p)));
        hist.rows.push(row);
    }

    let summary = OptimizeSummary {
        optimized_error_term: result.loss.error_term,
        baseline_mean_error_term: baseline_terms.iter().sum::<f64>() / baseline_terms.len() as f64,
        reference_error_term: eval.loss_of_state(&reference_psi)?.error_term,
        reference_state: "neel",
    };
    let mut w = RunWriter::new(out);
    w.add_json(
        "params.json",
        &serde_json::json!({
            "theta": result.params.theta,
            "phi": result.params.phi,
            "loss": result.loss,
            "restart": result.history.restart,
        }),
    );
    w.add("history.csv", hist.to_csv());
    w.add("trajectory.csv", trajectory_table(&optimized).to_csv());
    w.add("comparison.csv", cmp.to_csv());
    w.add("overlaps.csv", overlaps_table(&ladder).to_csv());
    w.add_json("ladder.json", &ladder);
    let mut derived = model_derived(cfg);
    derived["ladder"] = serde_json::to_value(&ladder).expect("serializable");
    derived["summary"] = serde_json::to_value(&summary).expect("serializable");
    derived["restarts"] = serde_json::to_value(&result.restarts).expect("serializable");
    w.finish("optimize", cfg, derived, started)
}

/// Renders `figure_<which>.svg` and the plotted data `figure_<which>.csv`.
pub fn cmd_figure(run_dir: &Path, which: FigureKind) -> Result<PathBuf, CliError> {
    let need = |name: &str| {
        let p = run_dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Io(format!(
                "{}: missing artifact; run simulate or optimize into this directory first",
                p.display()
            )))
        }
    };
    let optional = |name: &str| -> Result<Option<Table>, CliError> {
        let p = run_dir.join(name);
        if p.is_file() {
            Table::read(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let (data, plot_svg) = match which {
        FigureKind::Echo | FigureKind::Error => {
            let traj = Table::read(&need("trajectory.csv")?)?;
            let cmp = optional("comparison.csv")?;
            let (cols, title, ylabel, log_y): (&[&str], &str, &str, bool) = if which == FigureKind::Echo {
                (&["loschmidt_exact", "loschmidt_trotter"], "Loschmidt echo", "F(t)", false)
            } else {
                (&["trotter_error", "predicted_error"], "Trotter error", "error", true)
            };
            let extra: &[&str] = match (which, &cmp) {
                (FigureKind::Echo, Some(_)) => &["baseline_mean_echo", "reference_echo"],
                (FigureKind::Error, Some(_)) => &["baseline_mean_error", "reference_error"],
                _ => &[],
            };
            let mut table = Table::new(
                &format!("figure_{}", which.name()),
                std::iter::once("time").chain(cols.iter().copied()).chain(extra.iter().copied()).map(String::from).collect(),
            );
            let times = traj.column("time").unwrap_or_default();
            for (k, t) in times.iter().enumerate() {
                let mut row = vec![*t];
                for c in cols {
                    row.push(traj.column(c).and_then(|v| v[k]));
                }
                for c in extra {
                    row.push(cmp.as_ref().and_then(|t| t.column(c)).and_then(|v| v.get(k).copied().flatten()));
                }
                table.rows.push(row);
            }
            let series = table.columns[1..]
                .iter()
                .map(|c| svg::Series {
                    label: c,
                    points: table.pairs("time", c),
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            let svg = svg::Plot {
                title,
                x_label: "t",
                y_label: ylabel,
                log_y,
                style: svg::Style::Lines,
                series,
            }
            .render();
            (table, svg)
        }
        FigureKind::Overlaps => {
            let ov = Table::read(&need("overlaps.csv")?)?;
            let mut table = Table::new("figure_overlaps", vec!["energy".into(), "weight".into()]);
            table.rows = ov.pairs("energy", "weight").into_iter().map(|(e, w)| vec![Some(e), Some(w)]).collect();
            let svg = svg::Plot {
                title: "Largest eigenstate overlaps",
                x_label: "E_n",
                y_label: "|c_n|^2",
                log_y: true,
                style: svg::Style::Stems,
                series: vec![svg::Series {
                    label: "overlap",
                    points: table.pairs("energy", "weight"),
                }],
            }
            .render();
            (table, svg)
        }
        FigureKind::Bloch => {
            let traj = Table::read(&need("trajectory.csv")?)?;
            let site_col = traj
                .columns
                .iter()
                .find(|c| c.starts_with("bloch_x_site"))
                .cloned()
                .ok_or_else(|| CliError::Io("trajectory.csv has no tracked-site columns".into()))?;
            let site = site_col.trim_start_matches("bloch_x_site").to_string();
            let mut table = Table::new(
                "figure_bloch",
                ["time", "x", "y", "z"].iter().map(|s| s.to_string()).collect(),
            );
            let cols: Vec<Vec<Option<f64>>> = ["x", "y", "z"]
                .iter()
                .map(|a| traj.column(&format!("bloch_{a}_site{site}")).unwrap_or_default())
                .collect();
            for (k, t) in traj.column("time").unwrap_or_default().into_iter().enumerate() {
                table.rows.push(vec![t, cols[0][k], cols[1][k], cols[2][k]]);
            }
            let title = format!("Bloch trajectory of site {site}");
            let svg = svg::Plot {
                title: &title,
                x_label: "<sigma^x>",
                y_label: "<sigma^y>, <sigma^z>",
                log_y: false,
                style: svg::Style::Lines,
                series: vec![
                    svg::Series {
                        label: "(x, y)",
                        points: table.pairs("x", "y"),
                    },
                    svg::Series {
                        label: "(x, z)",
                        points: table.pairs("x", "z"),
                    },
                ],
            }
            .render();
            (table, svg)
        }
    };
    let csv_path = run_dir.join(format!("figure_{}.csv", which.name()));
    let svg_path = run_dir.join(format!("figure_{}.svg", which.name()));
    fs::write(&csv_path, data.to_csv()).map_err(|e| io_err(&csv_path, e))?;
    if let Err(e) = fs::write(&svg_path, plot_svg) {
        let _ = fs::remove_file(&csv_path);
        return Err(io_err(&svg_path, e));
    }
    Ok(svg_path)
}
