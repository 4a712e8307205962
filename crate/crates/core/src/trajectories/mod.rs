//! Quantum-jump trajectories, ensembles and post-selection.

mod lindblad;
mod sector;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{histogram, mean_and_stderr, negativity_edges, Histogram, DEFAULT_BINS};
use crate::entanglement::{negativity, reduce_amplitudes};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{norm_sqr, StateVector, SystemConfig};
use crate::observables::Observables;
use crate::operators::{build_h_nonhermitian, build_jump_set, Channel, JumpSet};
use crate::propagator::TimeSeries;

pub use lindblad::{lindblad_solve, LindbladResult, LINDBLAD_LIMIT};
pub use sector::{Advance, Ladder, SectorKey, SectorState, FINE_LEVELS};

/// Total Rydberg population at or below which the chain counts as decayed.
pub const COMPLETION_THRESHOLD: f64 = 1e-9;

/// Seed of a trajectory that decays through `down_decay` jumps only, for
/// `N = 5`, `V = 2J`, `γ↑ = γ↓ = 0.2J`, `κ = 0`, started from all atoms up.
/// Selected by scanning seeds, not drawn at random.
pub const FIG2_ALL_DOWN_DECAY_SEED: u64 = 8;

/// Tolerance for the normalization of initial states.
const INITIAL_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: Channel,
    pub pre_jump_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ChainDead,
    TMax,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ChainDead => "chain_dead",
            Termination::TMax => "t_max",
        })
    }
}

impl FromStr for Termination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain_dead" => Ok(Termination::ChainDead),
            "t_max" => Ok(Termination::TMax),
            _ => Err(Error::Parse(format!("unknown termination `{s}`"))),
        }
    }
}

/// Where a trajectory records its observables.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    None,
    /// This many uniformly spaced points over `[0, t_max]`.
    Uniform(usize),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOptions {
    pub sampling: Sampling,
    /// Also record a sample right after every jump.
    pub sample_jumps: bool,
    pub record_negativity: bool,
    /// Stop as soon as every atom is in `g`.
    pub stop_at_completion: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            sampling: Sampling::Uniform(200),
            sample_jumps: true,
            record_negativity: true,
            stop_at_completion: true,
        }
    }
}

impl TrajectoryOptions {
    /// Only the final state is analysed.
    pub fn final_only() -> Self {
        TrajectoryOptions {
            sampling: Sampling::None,
            sample_jumps: false,
            record_negativity: false,
            stop_at_completion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub events: Vec<JumpEvent>,
    #[serde(skip)]
    pub series: Option<TimeSeries>,
    pub final_negativity: f64,
    pub completion_time: Option<f64>,
    pub terminated_by: Termination,
    /// Time at which the simulation stopped.
    pub final_time: f64,
    /// Excitation number `M` of the state at `final_time`.
    pub final_mu: f64,
    /// `⟨a†a + b†b⟩` at the time `final_negativity` refers to.
    pub final_oscillator_excitations: f64,
}

impl TrajectoryRecord {
    pub fn count(&self, pred: impl Fn(&Channel) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.channel)).count()
    }

    pub fn n_up_decays(&self) -> usize {
        self.count(|c| matches!(c, Channel::UpDecay(_)))
    }

    pub fn n_down_decays(&self) -> usize {
        self.count(|c| matches!(c, Channel::DownDecay(_)))
    }

    pub fn n_osc_decays(&self) -> usize {
        self.count(|c| matches!(c, Channel::OscA | Channel::OscB))
    }
}

/// Seed of trajectory `index` in an ensemble: the first output of the
/// ChaCha8 stream `index` keyed by `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            return r;
        }
    }
}

/// Operators and propagators shared by all trajectories of one configuration.
#[derive(Debug)]
pub struct TrajectoryEngine {
    config: SystemConfig,
    horizon: f64,
    jumps: JumpSet,
    ladder: Ladder,
    /// Basis indices whose chain holds at least one Rydberg atom.
    rydberg: Vec<bool>,
}

impl TrajectoryEngine {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let horizon = config.horizon().ok_or(Error::NoTermination)?;
        let basis = config.basis();
        let full_mask = if basis.n_atoms() >= 32 { u32::MAX } else { (1u32 << basis.n_atoms()) - 1 };
        let rydberg = (0..basis.dim())
            .map(|i| basis.ground_mask(basis.split(i).1) != full_mask)
            .collect();
        Ok(TrajectoryEngine {
            config: config.clone(),
            horizon,
            jumps: build_jump_set(config),
            ladder: Ladder::new(basis, build_h_nonhermitian(config), horizon),
            rydberg,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn t_max(&self) -> f64 {
        self.horizon
    }

    fn rydberg_population(&self, amps: &[C64]) -> f64 {
        amps.iter()
            .zip(&self.rydberg)
            .filter(|(_, r)| **r)
            .map(|(a, _)| a.norm_sqr())
            .sum::<f64>()
    }

    fn sample_times(&self, opts: &TrajectoryOptions) -> Result<Vec<f64>> {
        let times = match &opts.sampling {
            Sampling::None => Vec::new(),
            Sampling::Uniform(0) => Vec::new(),
            Sampling::Uniform(1) => vec![0.0],
            Sampling::Uniform(n) => (0..*n).map(|i| self.horizon * i as f64 / (*n - 1) as f64).collect(),
            Sampling::Times(t) => t.clone(),
        };
        if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::InvalidArgument("sample times must be increasing and ≥ 0".into()));
        }
        Ok(times.into_iter().filter(|t| *t <= self.horizon).collect())
    }

    /// Runs one trajectory from a normalized initial state.
    pub fn run(&self, state0: &StateVector, seed: u64, opts: &TrajectoryOptions) -> Result<TrajectoryRecord> {
        let basis = self.ladder.basis();
        if state0.basis() != basis {
            return Err(Error::Dimension {
                expected: basis.dim(),
                found: state0.dim(),
            });
        }
        if (state0.norm_sqr() - 1.0).abs() > INITIAL_NORM_TOL {
            return Err(Error::InitialState(format!(
                "trajectories need a normalized state, got ‖ψ‖² = {}",
                state0.norm_sqr()
            )));
        }
        let observables = Observables::new(basis, opts.record_negativity);
        let mut series = observables.empty_series();
        let samples = self.sample_times(opts)?;
        let mut next_sample = 0;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.ladder.split(state0.amplitudes())?;
        let mut t = 0.0;
        let mut r = uniform_open(&mut rng);
        let mut events: Vec<JumpEvent> = Vec::new();
        let mut completion: Option<(f64, Vec<C64>)> = None;

        let record = |series: &mut TimeSeries, t: f64, amps: &[C64]| -> Result<()> {
            if series.times().last().is_some_and(|last| t <= *last) {
                return Ok(());
            }
            let n = norm_sqr(amps).sqrt();
            let normed: Vec<C64> = amps.iter().map(|a| a / n).collect();
            series.push(t, &observables.evaluate_amplitudes(&normed)?)
        };

        let terminated_by = loop {
            if completion.is_none() {
                let full = self.ladder.to_full(&state);
                if self.rydberg_population(&full) / state.norm_sqr() <= COMPLETION_THRESHOLD {
                    completion = Some((t, full));
                    if opts.stop_at_completion {
                        break Termination::ChainDead;
                    }
                }
            }
            if next_sample < samples.len() && samples[next_sample] <= t {
                record(&mut series, t, &self.ladder.to_full(&state))?;
                next_sample += 1;
                continue;
            }
            if t >= self.horizon {
                break Termination::TMax;
            }
            let target = samples.get(next_sample).copied().unwrap_or(self.horizon).min(self.horizon);
            match self.ladder.advance(&mut state, &mut t, target, r) {
                Advance::Reached => {}
                Advance::Crossed(t_jump) => {
                    let pre = state.norm_sqr();
                    let full = self.ladder.to_full(&state);
                    let (channel, after) = self.jump(&full, &mut rng, t_jump)?;
                    if events.last().is_some_and(|e| t_jump <= e.time) {
                        return Err(Error::Integration {
                            time: t_jump,
                            reason: "jump times are not increasing".into(),
                        });
                    }
                    events.push(JumpEvent {
                        time: t_jump,
                        channel,
                        pre_jump_norm_sq: pre,
                    });
                    t = t_jump;
                    state = self.ladder.split(&after)?;
                    if opts.sample_jumps && !matches!(opts.sampling, Sampling::None) {
                        record(&mut series, t, &after)?;
                    }
                    r = uniform_open(&mut rng);
                }
            }
        };

        let final_full = self.ladder.to_full(&state);
        let eval_amps = match &completion {
            Some((_, amps)) => amps.as_slice(),
            None => final_full.as_slice(),
        };
        let final_negativity = negativity(&reduce_amplitudes(&basis, eval_amps))?;
        let n = norm_sqr(eval_amps);
        let osc = (0..basis.dim())
            .map(|i| {
                let (a, _, b) = basis.split(i);
                eval_amps[i].norm_sqr() * (a + b) as f64
            })
            .sum::<f64>()
            / n;
        let nf = norm_sqr(&final_full);
        let final_mu = (0..basis.dim())
            .map(|i| final_full[i].norm_sqr() * basis.excitation(i) as f64)
            .sum::<f64>()
            / nf;
        Ok(TrajectoryRecord {
            seed,
            events,
            series: (!matches!(opts.sampling, Sampling::None)).then_some(series),
            final_negativity,
            completion_time: completion.map(|c| c.0),
            terminated_by,
            final_time: t,
            final_mu,
            final_oscillator_excitations: osc,
        })
    }

    /// Picks a channel with probability proportional to `‖L ψ‖²` and
    /// returns the normalized post-jump state.
    fn jump(&self, amps: &[C64], rng: &mut ChaCha8Rng, time: f64) -> Result<(Channel, Vec<C64>)> {
        let outcomes: Vec<(Channel, Vec<C64>, f64)> = self
            .jumps
            .channels()
            .iter()
            .map(|ch| {
                let v = ch.operator.apply(amps);
                let w = norm_sqr(&v);
                (ch.channel, v, w)
            })
            .collect();
        let total: f64 = outcomes.iter().map(|o| o.2).sum();
        if !(total > 0.0) {
            return Err(Error::Stalled { time, target: norm_sqr(amps) });
        }
        let mut u = rng.random::<f64>() * total;
        let pick = outcomes
            .iter()
            .position(|o| {
                if o.2 > 0.0 && u < o.2 {
                    return true;
                }
                u -= o.2;
                false
            })
            .unwrap_or_else(|| outcomes.iter().rposition(|o| o.2 > 0.0).unwrap());
        let (channel, v, w) = &outcomes[pick];
        let s = 1.0 / w.sqrt();
        Ok((*channel, v.iter().map(|a| a * s).collect()))
    }
}

/// One trajectory with default options.
pub fn run_trajectory(config: &SystemConfig, state0: &StateVector, seed: u64) -> Result<TrajectoryRecord> {
    TrajectoryEngine::new(config)?.run(state0, seed, &TrajectoryOptions::default())
}

/// Aggregated trajectories. Statistics refer to the selected subset, which
/// is every trajectory unless [`post_select`] was applied.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: SystemConfig,
    pub master_seed: u64,
    pub records: Vec<TrajectoryRecord>,
    pub selected: Vec<usize>,
    pub cutoff_time: Option<f64>,
}

impl EnsembleResult {
    pub fn n_trajectories(&self) -> usize {
        self.records.len()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.seed).collect()
    }

    pub fn final_negativities(&self) -> Vec<f64> {
        self.selected.iter().map(|&i| self.records[i].final_negativity).collect()
    }

    /// `None` when nothing was selected.
    pub fn avg_negativity(&self) -> Option<f64> {
        let v = self.final_negativities();
        (!v.is_empty()).then(|| mean_and_stderr(&v).0)
    }

    pub fn std_error(&self) -> Option<f64> {
        let v = self.final_negativities();
        (!v.is_empty()).then(|| mean_and_stderr(&v).1)
    }

    /// Fraction kept by post-selection, `None` without post-selection.
    pub fn acceptance_fraction(&self) -> Option<f64> {
        self.cutoff_time
            .map(|_| self.selected.len() as f64 / self.records.len() as f64)
    }

    /// Histogram of the selected final negativities over the default bins.
    pub fn histogram(&self) -> Option<Histogram> {
        let mu = self.config.initial.excitations(self.config.n_atoms).unwrap_or(self.config.n_max) as f64;
        histogram(&self.final_negativities(), &negativity_edges(mu, DEFAULT_BINS)).ok()
    }

    pub fn summary(&self) -> EnsembleSummary {
        EnsembleSummary {
            n_trajectories: self.n_trajectories(),
            n_selected: self.selected.len(),
            avg_negativity: self.avg_negativity(),
            std_error: self.std_error(),
            acceptance_fraction: self.acceptance_fraction(),
            cutoff_time: self.cutoff_time,
            histogram: self.histogram(),
            master_seed: self.master_seed,
            config: self.config.clone(),
        }
    }

    /// One row per trajectory, in index order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ENSEMBLE_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.seed.to_string(),
                fmt_f64(r.final_negativity),
                r.completion_time.map(fmt_f64).unwrap_or_default(),
                r.n_up_decays().to_string(),
                r.n_down_decays().to_string(),
                r.n_osc_decays().to_string(),
                r.terminated_by.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const ENSEMBLE_HEADER: [&str; 7] = [
    "seed",
    "final_negativity",
    "completion_time",
    "n_up_decays",
    "n_down_decays",
    "n_osc_decays",
    "terminated_by",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub n_selected: usize,
    pub avg_negativity: Option<f64>,
    pub std_error: Option<f64>,
    pub acceptance_fraction: Option<f64>,
    pub cutoff_time: Option<f64>,
    pub histogram: Option<Histogram>,
    pub master_seed: u64,
    pub config: SystemConfig,
}

/// Runs `n_traj` trajectories on `workers` threads (`0` = all cores).
/// Results do not depend on the worker count.
pub fn run_ensemble_with(
    engine: &TrajectoryEngine,
    state0: &StateVector,
    n_traj: usize,
    master_seed: u64,
    opts: &TrajectoryOptions,
    workers: usize,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("an ensemble needs at least one trajectory".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<TrajectoryRecord>> = pool.install(|| {
        (0..n_traj)
            .into_par_iter()
            .map(|i| engine.run(state0, trajectory_seed(master_seed, i), opts))
            .collect()
    });
    let mut records = Vec::with_capacity(n_traj);
    for (index, r) in results.into_iter().enumerate() {
        records.push(r.map_err(|e| Error::Trajectory {
            index,
            source: Box::new(e),
        })?);
    }
    Ok(EnsembleResult {
        config: engine.config().clone(),
        master_seed,
        selected: (0..n_traj).collect(),
        records,
        cutoff_time: None,
    })
}

/// Ensemble with final-state analysis only, on all cores.
pub fn run_ensemble(config: &SystemConfig, state0: &StateVector, n_traj: usize, master_seed: u64) -> Result<EnsembleResult> {
    let engine = TrajectoryEngine::new(config)?;
    run_ensemble_with(&engine, state0, n_traj, master_seed, &TrajectoryOptions::final_only(), 0)
}

/// Keeps trajectories whose chain decayed by `cutoff_time`.
pub fn post_select(ensemble: &EnsembleResult, cutoff_time: f64) -> EnsembleResult {
    let selected = (0..ensemble.records.len())
        .filter(|&i| ensemble.records[i].completion_time.is_some_and(|t| t <= cutoff_time))
        .collect();
    EnsembleResult {
        selected,
        cutoff_time: Some(cutoff_time),
        ..ensemble.clone()
    }
}

/// Whether every event of a record is an atom decay from `|↓⟩`.
pub fn is_all_down_decay(record: &TrajectoryRecord) -> bool {
    !record.events.is_empty() && record.events.iter().all(|e| matches!(e.channel, Channel::DownDecay(_)))
}

/// First seed in `start..start + count` whose trajectory only has
/// `down_decay` events.
pub fn find_all_down_decay_seed(engine: &TrajectoryEngine, state0: &StateVector, start: u64, count: u64) -> Result<Option<u64>> {
    let opts = TrajectoryOptions::final_only();
    for seed in start..start + count {
        if is_all_down_decay(&engine.run(state0, seed, &opts)?) {
            return Ok(Some(seed));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests;
