//! Distribution of final-state negativities for five atoms, V = 2J,
//! γ↓ = 0.2J, κ = 0, with and without decay from `|↑⟩`.
//!
//! ```text
//! cargo run --release --example negativity_distribution [n_traj]
//! ```

use rydchain::model::{initial_state, InitialKind, SystemConfig};
use rydchain::trajectories::run_ensemble;

fn main() -> anyhow::Result<()> {
    let n_traj = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 400,
    };
    for gamma_up in [0.0, 0.2] {
        let config = SystemConfig::chain(5, 2.0).with_rates(gamma_up, 0.2, 0.0);
        let psi = initial_state(InitialKind::AllUp, &config, None)?;
        let e = run_ensemble(&config, &psi, n_traj, 1)?;
        let hist = e.histogram().unwrap();
        println!(
            "γ↑ = {gamma_up}: N_avg = {:.4} ± {:.4} over {n_traj} trajectories",
            e.avg_negativity().unwrap(),
            e.std_error().unwrap()
        );
        for (i, p) in hist.probabilities.iter().enumerate() {
            if *p > 0.0 {
                println!("  [{:.3}, {:.3})  {:.3} {}", hist.edges[i], hist.edges[i + 1], p, "#".repeat((p * 100.0).round() as usize));
            }
        }
    }
    Ok(())
}
