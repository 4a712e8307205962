//! Operator assembly: Hamiltonian, conserved excitation number and the
//! jump set, with the algebraic identities they satisfy.
//!
//! ```text
//! cargo run --example operator_algebra
//! ```

use rydchain::model::SystemConfig;
use rydchain::operators::{build_h_nonhermitian, build_h_total, build_jump_set, build_m};

fn main() -> anyhow::Result<()> {
    let config = SystemConfig::chain(3, 2.0).with_rates(0.1, 0.2, 0.05);
    let basis = config.basis();
    let h = build_h_total(&config);
    let m = build_m(&config);
    println!("N = 3, n_max = {}: dimension {}", basis.n_max(), basis.dim());
    println!("H: {} nonzeros, Hermitian deviation {:e}", h.nnz(), h.hermitian_deviation());
    println!("max |[H, M]| = {:e}", h.commutator(&m).max_abs());
    let heff = build_h_nonhermitian(&config);
    println!("max |[𝓗, M]| = {:e}", heff.commutator(&m).max_abs());
    for c in build_jump_set(&config).channels() {
        println!("  {:<14} rate {:<5} nnz {:>4}  ΔM = {}", c.channel.to_string(), c.rate, c.operator.nnz(), c.channel.excitation_change());
    }

    let single = SystemConfig::chain(1, 2.0);
    println!("\nN = 1 Hamiltonian in matrix-market form:");
    build_h_total(&single).write_matrix_market(std::io::stdout().lock())?;
    Ok(())
}
