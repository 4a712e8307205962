//! The trajectory average against the master equation for two atoms,
//! V = 2J, γ↑ = γ↓ = 0.2J, κ = 0.05J.
//!
//! ```text
//! cargo run --release --example lindblad_check [n_traj]
//! ```

use rydchain::analysis::mean_and_stderr;
use rydchain::model::{initial_state, DensityOperator, InitialKind, SystemConfig};
use rydchain::trajectories::{lindblad_solve, run_ensemble_with, Sampling, TrajectoryEngine, TrajectoryOptions};

fn main() -> anyhow::Result<()> {
    let n_traj = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 1000,
    };
    let config = SystemConfig::chain(2, 2.0).with_rates(0.2, 0.2, 0.05);
    let psi = initial_state(InitialKind::AllUp, &config, None)?;
    let grid: Vec<f64> = (0..10).map(|i| 1.5 * i as f64).collect();

    let exact = lindblad_solve(&config, &DensityOperator::from_pure(&psi), &grid)?;
    let engine = TrajectoryEngine::new(&config)?;
    let opts = TrajectoryOptions {
        sampling: Sampling::Times(grid.clone()),
        sample_jumps: false,
        record_negativity: false,
        stop_at_completion: false,
    };
    let e = run_ensemble_with(&engine, &psi, n_traj, 5, &opts, 0)?;

    println!("{:>6} {:>9} {:>9} {:>7}", "Jt", "n_a ME", "n_a MC", "z");
    for (i, t) in grid.iter().enumerate() {
        let samples: Vec<f64> = e.records.iter().map(|r| r.series.as_ref().unwrap().column("n_a").unwrap()[i]).collect();
        let (mean, err) = mean_and_stderr(&samples);
        let me = exact.series.column("n_a").unwrap()[i];
        let z = if err > 0.0 { (mean - me) / err } else { 0.0 };
        println!("{t:6.2} {me:9.5} {mean:9.5} {z:7.2}");
    }
    Ok(())
}
