//! Average final negativity against the decay rate γ↓ for three atoms,
//! V = 2J, γ↑ = 0.001J, κ = 0, with a log-normal fit through the points.
//!
//! ```text
//! cargo run --release --example decay_rate_scan [n_traj]
//! ```

use rydchain::analysis::fit_lognormal;
use rydchain::model::{initial_state, InitialKind, SystemConfig};
use rydchain::trajectories::run_ensemble;

fn main() -> anyhow::Result<()> {
    let n_traj = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 300,
    };
    let gammas: Vec<f64> = (0..8).map(|i| (0.003f64.ln() + i as f64 / 7.0 * (1.0f64 / 0.003).ln()).exp()).collect();
    let mut avgs = Vec::new();
    println!("{:>10} {:>10} {:>10}", "γ↓/J", "N_avg", "stderr");
    for &g in &gammas {
        let config = SystemConfig::chain(3, 2.0).with_rates(0.001, g, 0.0);
        let psi = initial_state(InitialKind::AllUp, &config, None)?;
        let e = run_ensemble(&config, &psi, n_traj, 7)?;
        let (avg, err) = (e.avg_negativity().unwrap(), e.std_error().unwrap());
        println!("{g:10.4} {avg:10.4} {err:10.4}");
        avgs.push(avg);
    }
    let fit = fit_lognormal(&gammas, &avgs)?;
    println!("\nfit: A = {:.4}, ν = {:.4}, σ = {:.4}", fit.amplitude, fit.nu, fit.sigma);
    println!("peak at γ↓ = {:.4} J (converged: {})", fit.peak(), fit.converged);
    Ok(())
}
