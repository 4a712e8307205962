//! Post-selection on fast chain decay: with oscillator loss κ = 0.001J,
//! keep trajectories whose atoms have all decayed within 0.3/κ.
//!
//! ```text
//! cargo run --release --example post_selection [n_traj]
//! ```

use rydchain::model::{initial_state, InitialKind, SystemConfig};
use rydchain::trajectories::{post_select, run_ensemble};

fn main() -> anyhow::Result<()> {
    let n_traj = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 500,
    };
    let kappa = 0.001;
    for gamma_down in [0.001, 0.02, 0.2] {
        let config = SystemConfig::chain(5, 2.0).with_rates(0.001, gamma_down, kappa);
        let psi = initial_state(InitialKind::AllUp, &config, None)?;
        let all = run_ensemble(&config, &psi, n_traj, 3)?;
        let kept = post_select(&all, 0.3 / kappa);
        println!(
            "γ↓ = {gamma_down}: acceptance {:.4}, N_avg all {:.4}, post-selected {}",
            kept.acceptance_fraction().unwrap(),
            all.avg_negativity().unwrap(),
            kept.avg_negativity().map_or("none".into(), |a| format!("{a:.4}"))
        );
    }
    Ok(())
}
