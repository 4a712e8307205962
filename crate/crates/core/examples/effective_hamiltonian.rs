//! The two-atom effective Hamiltonian against the full model, for growing
//! V/J, using the printed closed forms and the ones consistent with `H_eff`.
//!
//! ```text
//! cargo run --release --example effective_hamiltonian
//! ```

use rydchain::effective::{compare_effective_full_with, t_of, ClosedForm};
use rydchain::model::{InitialKind, SystemConfig};

fn main() -> anyhow::Result<()> {
    println!("{:>6} {:>6} {:>10} {:>10} {:>10}", "state", "V/J", "form", "max|Δn_a|", "max|ΔN|");
    for kind in [InitialKind::Psi1, InitialKind::Psi2] {
        for v in [10.0, 30.0, 100.0] {
            let config = SystemConfig::chain(2, v).with_initial(kind);
            let grid: Vec<f64> = (0..=200).map(|i| t_of(&config, i as f64 * 4.0 * std::f64::consts::PI / 200.0)).collect();
            for form in [ClosedForm::Printed, ClosedForm::Consistent] {
                let r = compare_effective_full_with(&config, kind, &grid, form)?;
                println!("{:>6} {v:>6} {:>10} {:10.4} {:10.4}", kind.to_string(), format!("{form:?}"), r.n_a, r.negativity);
            }
        }
    }
    Ok(())
}
