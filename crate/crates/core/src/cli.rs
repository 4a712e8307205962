//! Command-line front end: argument types and the subcommand drivers.
//!
//! Configuration is layered as defaults < `--config` file < `--set key=value`
//! < dedicated flags (`--seed`). Every subcommand validates its inputs before
//! creating any output, writes its data files, and writes `manifest.json`
//! last, so a run is complete iff its manifest exists.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analysis::{fit_lognormal, read_scan_csv, Direction, QuantityKind, ScanRow, UnitMap, SCAN_HEADER};
use crate::effective::{build_h_eff, closed_form, numeric_observables, tau_of, ClosedForm, LABELS};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{build_config, initial_state, parse_config_text, AtomLevel, BasisIndex, InitialKind, StateVector, SystemConfig};
use crate::observables::coherent_series;
use crate::propagator::TimeSeries;
use crate::trajectories::{post_select, run_ensemble_with, EnsembleResult, Sampling, TrajectoryEngine, TrajectoryOptions};

pub const OUT_ENV: &str = "RYDCHAIN_OUT";
pub const MANIFEST: &str = "manifest.json";

/// Exit code for invalid configuration or arguments.
pub const EXIT_USAGE: u8 = 2;
/// Exit code for failures during a run.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "rydchain", version, about = "Oscillators coupled through a Rydberg chain")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Configuration override, repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "rydchain-out")]
    pub out: PathBuf,
    /// Worker threads for ensembles, 0 for all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Amplitudes of a custom initial state (CSV: fock_a,levels,fock_b,re,im
    /// with levels such as `udg`).
    #[arg(long, global = true)]
    pub amplitudes: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherent evolution under the full Hamiltonian.
    Coherent(CoherentArgs),
    /// One quantum-jump trajectory with sampled observables.
    Trajectory(TrajectoryArgs),
    /// Many trajectories, final negativities and their statistics.
    Ensemble(EnsembleArgs),
    /// One ensemble per decay rate `gamma_down`.
    Scan(ScanArgs),
    /// Log-normal fit of a scan.
    Fit(FitArgs),
    /// Converts between model units and laboratory units.
    Units(UnitsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CoherentArgs {
    /// End time in units of 1/J; defaults to τ = 4π for two atoms, else 50.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    /// Trajectory seed, also stored as `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Uniform sample points over [0, t_max].
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Keep propagating after the chain has decayed.
    #[arg(long)]
    pub to_t_max: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Post-selection cutoff time.
    #[arg(long, conflicts_with = "cutoff_kappa")]
    pub cutoff: Option<f64>,
    /// Post-selection cutoff in units of 1/κ.
    #[arg(long)]
    pub cutoff_kappa: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    #[arg(long, default_value_t = 1000)]
    pub traj: usize,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Comma-separated decay rates.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["gamma_min", "gamma_max", "gamma_count"])]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, requires_all = ["gamma_max", "gamma_count"])]
    pub gamma_min: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    /// Number of logarithmically spaced rates in [gamma_min, gamma_max].
    #[arg(long)]
    pub gamma_count: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub traj: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Scan CSV; defaults to `scan.csv` in the output directory.
    #[arg(long)]
    pub scan: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct UnitsArgs {
    pub value: f64,
    /// rate, time or energy.
    #[arg(long, default_value = "rate")]
    pub kind: String,
    /// Convert laboratory units (MHz, µs) to model units instead.
    #[arg(long)]
    pub to_model: bool,
    /// Coupling J in MHz.
    #[arg(long, default_value_t = 1.0)]
    pub j_mhz: f64,
}

/// Record of a completed run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<SystemConfig>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub version: String,
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InitialState(_) | Error::NoTermination | Error::Parse(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Layers the config file and `--set` overrides into a raw key map.
pub fn raw_config(common: &CommonArgs) -> Result<BTreeMap<String, String>> {
    let mut raw = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        raw.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(raw)
}

fn load_config(common: &CommonArgs, seed: Option<u64>) -> Result<SystemConfig> {
    let mut raw = raw_config(common)?;
    if let Some(s) = seed {
        raw.insert("master_seed".into(), s.to_string());
    }
    Ok(build_config(&raw)?)
}

fn parse_levels(s: &str) -> Result<Vec<AtomLevel>> {
    s.chars()
        .map(|c| match c {
            'g' => Ok(AtomLevel::Ground),
            'd' => Ok(AtomLevel::Down),
            'u' => Ok(AtomLevel::Up),
            _ => Err(Error::InitialState(format!("unknown atom level `{c}` in `{s}` (g, d, u)"))),
        })
        .collect()
}

/// Reads custom amplitudes, one basis state per row.
pub fn read_amplitudes(path: &Path) -> Result<Vec<(BasisIndex, C64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |s: &str| Error::InitialState(format!("cannot parse `{s}` in {}", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::InitialState("amplitude rows need fock_a,levels,fock_b,re,im".into()));
        }
        let fock_a = rec[0].trim().parse().map_err(|_| bad(&rec[0]))?;
        let levels = parse_levels(rec[1].trim())?;
        let fock_b = rec[2].trim().parse().map_err(|_| bad(&rec[2]))?;
        let re = rec[3].trim().parse().map_err(|_| bad(&rec[3]))?;
        let im = rec[4].trim().parse().map_err(|_| bad(&rec[4]))?;
        out.push((BasisIndex::new(fock_a, &levels, fock_b), C64::new(re, im)));
    }
    Ok(out)
}

fn load_state(common: &CommonArgs, config: &SystemConfig) -> Result<StateVector> {
    let custom = match (&common.amplitudes, config.initial) {
        (Some(path), InitialKind::Custom) => Some(read_amplitudes(path)?),
        (Some(_), kind) => {
            return Err(Error::InvalidArgument(format!("--amplitudes needs initial = custom, not {kind}")));
        }
        (None, _) => None,
    };
    initial_state(config.initial, config, custom.as_deref())
}

fn cutoff(sel: &SelectionArgs, config: &SystemConfig) -> Result<Option<f64>> {
    match (sel.cutoff, sel.cutoff_kappa) {
        (Some(t), _) if !(t >= 0.0) => Err(Error::InvalidArgument("--cutoff must be ≥ 0".into())),
        (Some(t), _) => Ok(Some(t)),
        (None, Some(_)) if config.kappa <= 0.0 => Err(Error::InvalidArgument("--cutoff-kappa needs kappa > 0".into())),
        (None, Some(f)) if !(f >= 0.0) => Err(Error::InvalidArgument("--cutoff-kappa must be ≥ 0".into())),
        (None, Some(f)) => Ok(Some(f / config.kappa)),
        (None, None) => Ok(None),
    }
}

fn check_traj(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("--traj must be ≥ 1".into()));
    }
    Ok(())
}

/// Output directory plus the list of files written so far.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
    start: Instant,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            start: Instant::now(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        f(&mut w)?;
        w.flush()?;
        self.record(name);
        Ok(())
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    fn finish(mut self, subcommand: &str, config: Option<SystemConfig>, seeds: Vec<u64>) -> Result<()> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config,
            seeds,
            outputs: self.files.clone(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        self.files.clear();
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(self.path(MANIFEST), json + "\n")?;
        Ok(())
    }
}

fn write_json<T: Serialize>(w: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Coherent(a) => cmd_coherent(common, a),
        Command::Trajectory(a) => cmd_trajectory(common, a),
        Command::Ensemble(a) => cmd_ensemble(common, a),
        Command::Scan(a) => cmd_scan(common, a),
        Command::Fit(a) => cmd_fit(common, a),
        Command::Units(a) => cmd_units(a, &mut std::io::stdout().lock()),
    }
}

/// Closed forms apply to two atoms starting from `ψ1` or `ψ2` (all up).
fn closed_form_kind(config: &SystemConfig) -> Option<InitialKind> {
    if config.n_atoms != 2 || config.interaction_v == 0.0 {
        return None;
    }
    match config.initial {
        InitialKind::Psi1 => Some(InitialKind::Psi1),
        InitialKind::Psi2 | InitialKind::AllUp => Some(InitialKind::Psi2),
        InitialKind::Custom => None,
    }
}

/// Writes `coherent.csv` and, for two atoms, `analytic.csv` (closed forms as
/// printed, with a `tau` column) and `effective.csv` (numerics under `H_eff`).
pub fn cmd_coherent(common: &CommonArgs, args: &CoherentArgs) -> Result<()> {
    let config = load_config(common, None)?;
    let state = load_state(common, &config)?;
    let t_end = match args.t_end {
        Some(t) => t,
        None if config.n_atoms == 2 && config.interaction_v != 0.0 => {
            4.0 * std::f64::consts::PI * config.interaction_v.abs() / (2.0 * std::f64::consts::SQRT_2 * config.coupling_j.powi(2))
        }
        None => 50.0 / config.coupling_j,
    };
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument("--t-end must be ≥ 0".into()));
    }
    if args.points == 0 || (args.points > 1 && t_end == 0.0) {
        return Err(Error::InvalidArgument("--points must be ≥ 1, and 1 when t_end = 0".into()));
    }
    let grid: Vec<f64> = if args.points == 1 {
        vec![0.0]
    } else {
        (0..args.points).map(|i| t_end * i as f64 / (args.points - 1) as f64).collect()
    };
    let h_eff = if config.n_atoms == 2 && config.interaction_v != 0.0 {
        Some(build_h_eff(&config)?)
    } else {
        None
    };

    let full = coherent_series(&config, &state, &grid, true)?;
    let effective = h_eff.map(|h| numeric_observables(&config, &h, &state, &grid)).transpose()?;
    let analytic = closed_form_kind(&config)
        .map(|kind| -> Result<TimeSeries> {
            let mut labels = vec!["tau".to_string()];
            labels.extend(LABELS.iter().map(|s| s.to_string()));
            let mut ts = TimeSeries::new(labels);
            for &t in &grid {
                let tau = tau_of(&config, t);
                let [na, nb, neg] = closed_form(kind, ClosedForm::Printed, tau)?;
                ts.push(t, &[tau, na, nb, neg])?;
            }
            Ok(ts)
        })
        .transpose()?;

    let mut out = Output::create(&common.out)?;
    out.write("coherent.csv", |w| full.write_csv(w))?;
    if let Some(ts) = analytic {
        out.write("analytic.csv", |w| ts.write_csv(w))?;
    }
    if let Some(ts) = effective {
        out.write("effective.csv", |w| ts.write_csv(w))?;
    }
    out.finish("coherent", Some(config), Vec::new())
}

pub const EVENTS_HEADER: [&str; 3] = ["time", "channel", "pre_jump_norm_sq"];

/// Writes `trajectory.csv` (sampled observables), `events.csv` and
/// `record.json`.
pub fn cmd_trajectory(common: &CommonArgs, args: &TrajectoryArgs) -> Result<()> {
    let config = load_config(common, args.seed)?;
    let state = load_state(common, &config)?;
    let engine = TrajectoryEngine::new(&config)?;
    let opts = TrajectoryOptions {
        sampling: Sampling::Uniform(args.points),
        stop_at_completion: !args.to_t_max,
        ..TrajectoryOptions::default()
    };
    let seed = config.master_seed;
    let record = engine.run(&state, seed, &opts)?;

    let mut out = Output::create(&common.out)?;
    if let Some(series) = &record.series {
        out.write("trajectory.csv", |w| series.write_csv(w))?;
    }
    out.write("events.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(EVENTS_HEADER)?;
        for e in &record.events {
            c.write_record([fmt_f64(e.time), e.channel.to_string(), fmt_f64(e.pre_jump_norm_sq)])?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.write("record.json", |w| write_json(w, &record))?;
    out.finish("trajectory", Some(config), vec![seed])
}

fn ensemble(common: &CommonArgs, config: &SystemConfig, state: &StateVector, n_traj: usize, cut: Option<f64>) -> Result<EnsembleResult> {
    let engine = TrajectoryEngine::new(config)?;
    let e = run_ensemble_with(&engine, state, n_traj, config.master_seed, &TrajectoryOptions::final_only(), common.workers)?;
    Ok(match cut {
        Some(c) => post_select(&e, c),
        None => e,
    })
}

/// Writes `ensemble.csv` (one row per trajectory) and `summary.json`.
pub fn cmd_ensemble(common: &CommonArgs, args: &EnsembleArgs) -> Result<()> {
    check_traj(args.traj)?;
    let config = load_config(common, args.seed)?;
    let state = load_state(common, &config)?;
    let cut = cutoff(&args.selection, &config)?;
    TrajectoryEngine::new(&config)?;
    let e = ensemble(common, &config, &state, args.traj, cut)?;

    let mut out = Output::create(&common.out)?;
    out.write("ensemble.csv", |w| e.write_csv(w))?;
    out.write("summary.json", |w| write_json(w, &e.summary()))?;
    out.finish("ensemble", Some(config.clone()), vec![config.master_seed])
}

/// Decay rates requested by a scan.
pub fn scan_gammas(args: &ScanArgs) -> Result<Vec<f64>> {
    let gammas = match (&args.gammas, args.gamma_min, args.gamma_max, args.gamma_count) {
        (Some(g), ..) => g.clone(),
        (None, Some(lo), Some(hi), Some(n)) => {
            if !(lo > 0.0 && hi >= lo) || n == 0 || (n == 1 && hi != lo) {
                return Err(Error::InvalidArgument("need 0 < gamma_min ≤ gamma_max and gamma_count ≥ 1".into()));
            }
            if n == 1 {
                vec![lo]
            } else {
                let (a, b) = (lo.ln(), hi.ln());
                (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        }
        _ => return Err(Error::InvalidArgument("give --gammas or --gamma-min/--gamma-max/--gamma-count".into())),
    };
    if gammas.is_empty() || gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument("decay rates must be finite and ≥ 0".into()));
    }
    Ok(gammas)
}

/// One ensemble per `gamma_down`, all with the same master seed. Rows of
/// `scan.csv` are flushed as they complete; rerunning the same scan into the
/// same directory resumes after the last complete row.
pub fn cmd_scan(common: &CommonArgs, args: &ScanArgs) -> Result<()> {
    check_traj(args.traj)?;
    let gammas = scan_gammas(args)?;
    let base = load_config(common, args.seed)?;
    let mut configs = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let mut c = base.clone();
        c.gamma_down = g;
        c.validate()?;
        let cut = cutoff(&args.selection, &c)?;
        TrajectoryEngine::new(&c)?;
        configs.push((c, cut));
    }
    let state = load_state(common, &base)?;

    let path = common.out.join("scan.csv");
    let done = if path.exists() {
        let rows = read_scan_csv(File::open(&path)?)?;
        let matches = rows.len() <= gammas.len()
            && rows
                .iter()
                .zip(&gammas)
                .all(|(r, g)| fmt_f64(r.gamma_down) == fmt_f64(*g) && r.n_traj == args.traj);
        if !matches {
            return Err(Error::InvalidArgument(format!(
                "{} belongs to a different scan; use a fresh output directory",
                path.display()
            )));
        }
        rows.len()
    } else {
        0
    };

    let mut out = Output::create(&common.out)?;
    let mut w = if done == 0 {
        let mut w = csv::Writer::from_writer(File::create(&path)?);
        w.write_record(SCAN_HEADER)?;
        w.flush()?;
        w
    } else {
        csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(fs::OpenOptions::new().append(true).open(&path)?)
    };
    out.record("scan.csv");
    for (c, cut) in configs.iter().skip(done) {
        let e = ensemble(common, c, &state, args.traj, *cut)?;
        let row = ScanRow {
            gamma_down: c.gamma_down,
            avg_negativity: e.avg_negativity().unwrap_or(f64::NAN),
            std_error: e.std_error().unwrap_or(f64::NAN),
            n_traj: args.traj,
            acceptance_fraction: e.acceptance_fraction(),
        };
        w.write_record(row.record())?;
        w.flush()?;
    }
    drop(w);
    out.finish("scan", Some(base.clone()), vec![base.master_seed])
}

/// Fits the log-normal model to a scan and writes `fit.txt`. Rows without
/// accepted trajectories are skipped.
pub fn cmd_fit(common: &CommonArgs, args: &FitArgs) -> Result<()> {
    let path = args.scan.clone().unwrap_or_else(|| common.out.join("scan.csv"));
    let file = File::open(&path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<ScanRow> = read_scan_csv(file)?
        .into_iter()
        .filter(|r| r.avg_negativity.is_finite())
        .collect();
    let gammas: Vec<f64> = rows.iter().map(|r| r.gamma_down).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.avg_negativity).collect();
    let fit = fit_lognormal(&gammas, &values)?;
    let mut out = Output::create(&common.out)?;
    out.write("fit.txt", |w| Ok(w.write_all(fit.to_text().as_bytes())?))?;
    out.finish("fit", None, Vec::new())
}

/// Prints the converted value and a readable physical form.
pub fn cmd_units(args: &UnitsArgs, w: &mut impl Write) -> Result<()> {
    let kind: QuantityKind = args.kind.parse()?;
    let map = UnitMap::new(args.j_mhz)?;
    let (direction, model_value) = if args.to_model {
        let v = map.convert(args.value, kind, Direction::ToModel);
        (Direction::ToModel, v)
    } else {
        (Direction::ToPhysical, args.value)
    };
    let converted = map.convert(args.value, kind, direction);
    let unit = match (kind, direction) {
        (QuantityKind::Time, Direction::ToPhysical) => "µs",
        (_, Direction::ToPhysical) => "MHz",
        (QuantityKind::Time, Direction::ToModel) => "1/J",
        (_, Direction::ToModel) => "J",
    };
    writeln!(w, "{} {unit} ({})", fmt_f64(converted), map.describe(model_value, kind))?;
    Ok(())
}
