use super::*;
use crate::entanglement::negativity_bound_mu;
use crate::model::{initial_state, DensityOperator, InitialKind};
use crate::observables::coherent_series;
use approx::assert_abs_diff_eq;

fn fig2(gamma_up: f64) -> SystemConfig {
    SystemConfig::chain(5, 2.0).with_rates(gamma_up, 0.2, 0.0)
}

fn all_up(c: &SystemConfig) -> StateVector {
    initial_state(InitialKind::AllUp, c, None).unwrap()
}

#[test]
fn no_dissipation_follows_coherent_evolution() {
    let c = SystemConfig::chain(2, 3.0).with_initial(InitialKind::Psi2).with_t_max(6.0);
    let s = initial_state(InitialKind::Psi2, &c, None).unwrap();
    let engine = TrajectoryEngine::new(&c).unwrap();
    let opts = TrajectoryOptions {
        sampling: Sampling::Uniform(13),
        ..TrajectoryOptions::default()
    };
    let rec = engine.run(&s, 7, &opts).unwrap();
    assert!(rec.events.is_empty());
    assert_eq!(rec.terminated_by, Termination::TMax);
    assert_eq!(rec.completion_time, None);
    let series = rec.series.unwrap();
    let reference = coherent_series(&c, &s, series.times(), true).unwrap();
    for l in reference.labels() {
        for (x, y) in series.column(l).unwrap().iter().zip(reference.column(l).unwrap()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-7);
        }
    }
}

#[test]
fn no_dissipation_without_t_max_is_an_error() {
    let c = SystemConfig::chain(2, 3.0);
    assert!(matches!(TrajectoryEngine::new(&c), Err(Error::NoTermination)));
}

#[test]
fn rejects_unnormalized_initial_state() {
    let c = fig2(0.2);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let mut amps = all_up(&c).into_amplitudes();
    amps.iter_mut().for_each(|a| *a *= 2.0);
    let s = StateVector::new(c.basis(), amps).unwrap();
    assert!(matches!(engine.run(&s, 1, &TrajectoryOptions::final_only()), Err(Error::InitialState(_))));
}

#[test]
fn deterministic_given_seed() {
    let c = fig2(0.2);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let s = all_up(&c);
    let a = engine.run(&s, 42, &TrajectoryOptions::default()).unwrap();
    let b = engine.run(&s, 42, &TrajectoryOptions::default()).unwrap();
    assert_eq!(a, b);
    let other = engine.run(&s, 43, &TrajectoryOptions::default()).unwrap();
    assert_ne!(a.events, other.events);
}

#[test]
fn event_bookkeeping() {
    let c = SystemConfig::chain(3, 2.0).with_rates(0.1, 0.2, 0.05);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let s = all_up(&c);
    for seed in 0..40 {
        let rec = engine.run(&s, seed, &TrajectoryOptions::final_only()).unwrap();
        assert!(rec.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(rec.events.iter().all(|e| e.pre_jump_norm_sq > 0.0 && e.pre_jump_norm_sq <= 1.0));
        let lost: i64 = rec.events.iter().map(|e| e.channel.excitation_change()).sum();
        assert_abs_diff_eq!(rec.final_mu, 3.0 + lost as f64, epsilon = 1e-9);
        assert!(rec.final_negativity >= 0.0);
        assert!(rec.final_negativity <= negativity_bound_mu(rec.final_mu) + 1e-9);
        if rec.terminated_by == Termination::ChainDead {
            assert_eq!(rec.completion_time, Some(rec.final_time));
        }
    }
}

#[test]
fn selected_seed_decays_through_down_channels_only() {
    let c = fig2(0.2);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let rec = engine.run(&all_up(&c), FIG2_ALL_DOWN_DECAY_SEED, &TrajectoryOptions::default()).unwrap();
    assert!(is_all_down_decay(&rec));
    assert_eq!(rec.n_down_decays(), 5);
    assert_eq!(rec.terminated_by, Termination::ChainDead);
    assert_abs_diff_eq!(rec.final_oscillator_excitations, 5.0, epsilon = 1e-6);
}

#[test]
fn negativity_frozen_after_completion() {
    let c = SystemConfig::chain(3, 2.0).with_rates(0.0, 0.3, 0.0).with_t_max(80.0);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let opts = TrajectoryOptions {
        sampling: Sampling::Uniform(41),
        stop_at_completion: false,
        ..TrajectoryOptions::default()
    };
    let mut checked = 0;
    for seed in 0..10 {
        let rec = engine.run(&all_up(&c), seed, &opts).unwrap();
        let Some(tc) = rec.completion_time else { continue };
        let series = rec.series.as_ref().unwrap();
        for (t, n) in series.times().iter().zip(series.column("negativity").unwrap()) {
            if *t >= tc {
                assert_abs_diff_eq!(*n, rec.final_negativity, epsilon = 1e-8);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn ensemble_seeds_and_worker_independence() {
    let c = SystemConfig::chain(3, 2.0).with_rates(0.1, 0.2, 0.0);
    let engine = TrajectoryEngine::new(&c).unwrap();
    let s = all_up(&c);
    let opts = TrajectoryOptions::final_only();
    let one = run_ensemble_with(&engine, &s, 24, 9, &opts, 1).unwrap();
    let three = run_ensemble_with(&engine, &s, 24, 9, &opts, 3).unwrap();
    assert_eq!(one.records, three.records);
    assert_eq!(one.seeds()[5], trajectory_seed(9, 5));
    assert_eq!(one.records[5], engine.run(&s, trajectory_seed(9, 5), &opts).unwrap());
    let mean = one.final_negativities().iter().sum::<f64>() / 24.0;
    assert_abs_diff_eq!(one.avg_negativity().unwrap(), mean, epsilon = 1e-15);
    assert!(run_ensemble_with(&engine, &s, 0, 9, &opts, 1).is_err());
}

#[test]
fn single_trajectory_ensemble() {
    let c = SystemConfig::chain(2, 2.0).with_rates(0.1, 0.2, 0.0);
    let e = run_ensemble(&c, &all_up(&c), 1, 3).unwrap();
    assert_eq!(e.avg_negativity(), Some(e.records[0].final_negativity));
}

#[test]
fn post_selection_bounds() {
    let c = SystemConfig::chain(2, 2.0).with_rates(0.05, 0.2, 0.01);
    let e = run_ensemble(&c, &all_up(&c), 30, 5).unwrap();
    let all = post_select(&e, f64::INFINITY);
    assert_eq!(all.acceptance_fraction(), Some(1.0));
    assert_eq!(all.avg_negativity(), e.avg_negativity());
    let none = post_select(&e, 0.0);
    assert_eq!(none.acceptance_fraction(), Some(0.0));
    assert_eq!(none.avg_negativity(), None);
    let mid = post_select(&e, 10.0);
    let kept = e.records.iter().filter(|r| r.completion_time.is_some_and(|t| t <= 10.0)).count();
    assert_abs_diff_eq!(mid.acceptance_fraction().unwrap(), kept as f64 / 30.0);
}

#[test]
fn ensemble_csv_and_summary() {
    let c = SystemConfig::chain(2, 2.0).with_rates(0.1, 0.2, 0.0);
    let e = run_ensemble(&c, &all_up(&c), 4, 11).unwrap();
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ENSEMBLE_HEADER.join(","));
    assert_eq!(lines.count(), 4);
    let summary = e.summary();
    assert_eq!(summary.histogram.as_ref().unwrap().total(), 4);
    let json = serde_json::to_string(&summary).unwrap();
    let back: EnsembleSummary = serde_json::from_str(&json).unwrap();
    assert_eq!(back, summary);
}

#[test]
fn lindblad_without_rates_is_coherent() {
    let c = SystemConfig::chain(2, 3.0).with_initial(InitialKind::Psi2);
    let s = initial_state(InitialKind::Psi2, &c, None).unwrap();
    let grid = [0.0, 0.5, 2.0, 4.0];
    let lr = lindblad_solve(&c, &DensityOperator::from_pure(&s), &grid).unwrap();
    let reference = coherent_series(&c, &s, &grid, true).unwrap();
    for l in reference.labels() {
        for (x, y) in lr.series.column(l).unwrap().iter().zip(reference.column(l).unwrap()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-7);
        }
    }
    assert_eq!(lr.snapshots.len(), grid.len());
}

#[test]
fn lindblad_trace_and_excitation_decay() {
    let c = SystemConfig::chain(2, 2.0).with_rates(0.1, 0.2, 0.05);
    let s = all_up(&c);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64).collect();
    let lr = lindblad_solve(&c, &DensityOperator::from_pure(&s), &grid).unwrap();
    for tr in lr.series.column("trace").unwrap() {
        assert_abs_diff_eq!(*tr, 1.0, epsilon = 1e-8);
    }
    let m = lr.series.column("M").unwrap();
    assert!(m.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(m[20] < m[0]);
    lr.snapshots.last().unwrap().validate().unwrap();
}

#[test]
fn lindblad_dimension_limit() {
    let big = SystemConfig::chain(7, 2.0).with_rates(0.1, 0.1, 0.0);
    assert!(big.basis().dim() > LINDBLAD_LIMIT);
    let small = SystemConfig::chain(1, 2.0);
    let rho = DensityOperator::from_pure(&all_up(&small));
    assert!(matches!(lindblad_solve(&big, &rho, &[0.0]), Err(Error::TooLarge { .. })));
}
