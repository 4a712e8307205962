//! One quantum-jump trajectory of five atoms starting all up, V = 2J,
//! γ↑ = γ↓ = 0.2J, κ = 0. The default seed is a trajectory in which every
//! atom decays from `|↓⟩`, so all five excitations end up in the oscillators.
//!
//! ```text
//! cargo run --release --example quantum_jump_trajectory [seed]
//! ```

use rydchain::model::{initial_state, InitialKind, SystemConfig};
use rydchain::trajectories::{TrajectoryEngine, TrajectoryOptions, FIG2_ALL_DOWN_DECAY_SEED};

fn main() -> anyhow::Result<()> {
    let seed = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => FIG2_ALL_DOWN_DECAY_SEED,
    };
    let config = SystemConfig::chain(5, 2.0).with_rates(0.2, 0.2, 0.0);
    let psi = initial_state(InitialKind::AllUp, &config, None)?;
    let engine = TrajectoryEngine::new(&config)?;
    let rec = engine.run(&psi, seed, &TrajectoryOptions::default())?;

    println!("seed {seed}");
    for e in &rec.events {
        println!("  Jt = {:8.3}  {:<14} ‖ψ‖² before = {:.4}", e.time, e.channel.to_string(), e.pre_jump_norm_sq);
    }
    let series = rec.series.as_ref().unwrap();
    let (n_a, n_b, neg) = (
        series.column("n_a").unwrap(),
        series.column("n_b").unwrap(),
        series.column("negativity").unwrap(),
    );
    println!("{:>8} {:>7} {:>7} {:>7}", "Jt", "n_a", "n_b", "N");
    let step = (series.len() / 15).max(1);
    for i in (0..series.len()).step_by(step) {
        println!("{:8.3} {:7.3} {:7.3} {:7.3}", series.times()[i], n_a[i], n_b[i], neg[i]);
    }
    println!(
        "terminated by {} at Jt = {:.3}; final negativity {:.4}, oscillator excitations {:.6}",
        rec.terminated_by, rec.final_time, rec.final_negativity, rec.final_oscillator_excitations
    );
    Ok(())
}
