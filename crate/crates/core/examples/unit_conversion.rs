//! Model units (J = 1) to laboratory units with J = 1 MHz.
//!
//! ```text
//! cargo run --example unit_conversion
//! ```

use rydchain::analysis::{Direction, QuantityKind, UnitMap};

fn main() -> anyhow::Result<()> {
    let map = UnitMap::default();
    for (label, value, kind) in [
        ("coupling J", 1.0, QuantityKind::Energy),
        ("flip-flop V", 2.0, QuantityKind::Energy),
        ("natural decay", 0.001, QuantityKind::Rate),
        ("optimal γ↓", 0.02, QuantityKind::Rate),
        ("cutoff 0.3/κ", 300.0, QuantityKind::Time),
    ] {
        println!("{label:<14} {value:>8} → {}", map.describe(value, kind));
    }
    let lifetime_us = 1000.0;
    let rate = 1.0 / map.convert(lifetime_us, QuantityKind::Time, Direction::ToModel);
    println!("a 1 ms lifetime is a decay rate of {rate} J");
    Ok(())
}
