//! Effective two-atom model and its closed-form solutions.
//!
//! For two atoms with `J << V` the chain can be eliminated perturbatively,
//! leaving a direct oscillator coupling of strength `J²/V`. The effective
//! Hamiltonian lives on the same computational basis as the full model; chain
//! configurations containing `g` are left untouched.

use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;

use crate::entanglement::state_negativity;
use crate::error::{Error, Result};
use crate::model::{initial_state, AtomLevel, InitialKind, StateVector, SystemConfig};
use crate::operators::{build_h_total, number_a, number_b, SparseOperator};
use crate::propagator::{evolve_grid, TimeSeries};

/// Labels of the series produced in this module.
pub const LABELS: [&str; 3] = ["n_a", "n_b", "negativity"];

/// Dimensionless time `τ = 2√2 J² t / V`.
pub fn tau_of(config: &SystemConfig, t: f64) -> f64 {
    2.0 * SQRT_2 * config.coupling_j * config.coupling_j * t / config.interaction_v
}

pub fn t_of(config: &SystemConfig, tau: f64) -> f64 {
    tau * config.interaction_v / (2.0 * SQRT_2 * config.coupling_j * config.coupling_j)
}

/// Effective Hamiltonian for `n_atoms = 2`. The `M ω` term is dropped in
/// the rotating frame, matching [`build_h_total`].
pub fn build_h_eff(config: &SystemConfig) -> Result<SparseOperator> {
    if config.n_atoms != 2 {
        return Err(Error::InvalidArgument(format!(
            "effective Hamiltonian needs n_atoms = 2, got {}",
            config.n_atoms
        )));
    }
    if config.interaction_v == 0.0 {
        return Err(Error::InvalidArgument("effective Hamiltonian needs V ≠ 0".into()));
    }
    let basis = config.basis();
    let n_max = basis.n_max();
    let g = config.coupling_j * config.coupling_j / config.interaction_v;
    let v = config.interaction_v;
    let pair = |l0, l1| basis.with_level(basis.with_level(0, 0, l0), 1, l1);
    let (dd, du, ud, uu) = (
        pair(AtomLevel::Down, AtomLevel::Down),
        pair(AtomLevel::Down, AtomLevel::Up),
        pair(AtomLevel::Up, AtomLevel::Down),
        pair(AtomLevel::Up, AtomLevel::Up),
    );
    let sf = |n: usize| (n as f64).sqrt();
    let mut t: Vec<(usize, usize, C64)> = Vec::new();
    let mut push = |r: usize, c: usize, x: f64| t.push((r, c, C64::new(x, 0.0)));

    for a in 0..=n_max {
        for b in 0..=n_max {
            // oscillator exchange, sign set by the chain state
            for (c, sign) in [(dd, 1.0), (uu, 1.0), (ud, -1.0), (du, -1.0)] {
                if b >= 1 && a < n_max {
                    let x = -g * sign * sf((a + 1) * b);
                    push(basis.join(a + 1, c, b - 1), basis.join(a, c, b), x);
                }
                if a >= 1 && b < n_max {
                    let x = -g * sign * sf(a * (b + 1));
                    push(basis.join(a - 1, c, b + 1), basis.join(a, c, b), x);
                }
            }
            // pair exchange between the chain and each oscillator
            if a + 2 <= n_max {
                let x = -g * sf((a + 1) * (a + 2));
                push(basis.join(a + 2, dd, b), basis.join(a, uu, b), x);
                push(basis.join(a, uu, b), basis.join(a + 2, dd, b), x);
            }
            if b + 2 <= n_max {
                let x = -g * sf((b + 1) * (b + 2));
                push(basis.join(a, dd, b + 2), basis.join(a, uu, b), x);
                push(basis.join(a, uu, b), basis.join(a, dd, b + 2), x);
            }
            // (V + g M)(P_T - P_S) swaps |↑↓> and |↓↑>
            let x = v + g * (a + b + 1) as f64;
            push(basis.join(a, du, b), basis.join(a, ud, b), x);
            push(basis.join(a, ud, b), basis.join(a, du, b), x);
        }
    }
    if !config.rotating_frame {
        let w = config.omega();
        for i in 0..basis.dim() {
            push(i, i, w * basis.excitation(i) as f64);
        }
    }
    Ok(SparseOperator::from_triplets(basis.dim(), t, true))
}

/// Which set of closed forms to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// The textbook expressions with the `ψ1` argument `τ/(2√2)`.
    Printed,
    /// The `ψ1` expressions with argument `τ/√2`, which is what evolving
    /// under [`build_h_eff`] actually produces. `ψ2` is identical to `Printed`.
    Consistent,
}

/// `(⟨a†a⟩, ⟨b†b⟩, N)` at dimensionless time `tau`.
pub fn closed_form(initial: InitialKind, form: ClosedForm, tau: f64) -> Result<[f64; 3]> {
    match initial {
        InitialKind::Psi1 => {
            let x = match form {
                ClosedForm::Printed => tau / (2.0 * SQRT_2),
                ClosedForm::Consistent => tau / SQRT_2,
            };
            let na = 0.5 * (1.0 + x.cos());
            Ok([na, 1.0 - na, 0.5 * x.sin().abs()])
        }
        InitialKind::Psi2 => {
            let c = tau.cos();
            let n = 1.0 - (tau / 2.0).cos().powi(4);
            let neg = 0.5 * (1.0 - c) * tau.sin().abs()
                + 0.125 * (1.0 + c) * ((5.0 * c * c - 6.0 * c + 5.0).sqrt() - 1.0 - c);
            Ok([n, n, neg])
        }
        other => Err(Error::InvalidArgument(format!(
            "closed forms exist only for psi1 and psi2, not {other}"
        ))),
    }
}

/// The closed forms as printed, on a `τ` grid (the time column holds `τ`).
pub fn analytic_observables(initial: InitialKind, tau_grid: &[f64]) -> Result<TimeSeries> {
    closed_form_series(initial, ClosedForm::Printed, tau_grid)
}

/// Closed forms consistent with evolution under [`build_h_eff`].
pub fn effective_observables(initial: InitialKind, tau_grid: &[f64]) -> Result<TimeSeries> {
    closed_form_series(initial, ClosedForm::Consistent, tau_grid)
}

fn closed_form_series(initial: InitialKind, form: ClosedForm, tau_grid: &[f64]) -> Result<TimeSeries> {
    let mut ts = TimeSeries::new(LABELS.iter().map(|s| s.to_string()).collect());
    for &tau in tau_grid {
        ts.push(tau, &closed_form(initial, form, tau)?)?;
    }
    Ok(ts)
}

/// `⟨a†a⟩`, `⟨b†b⟩` and negativity of the evolved state on a time grid.
pub fn numeric_observables(
    config: &SystemConfig,
    generator: &SparseOperator,
    state0: &StateVector,
    t_grid: &[f64],
) -> Result<TimeSeries> {
    let basis = config.basis();
    let (na, nb) = (number_a(&basis), number_b(&basis));
    let mut ts = TimeSeries::new(LABELS.iter().map(|s| s.to_string()).collect());
    evolve_grid(state0, generator, t_grid, config.integrator_tol, |t, psi| {
        let n = psi.norm_sqr();
        let row = [
            na.expectation(psi.amplitudes()).re / n,
            nb.expectation(psi.amplitudes()).re / n,
            state_negativity(psi)?,
        ];
        ts.push(t, &row)
    })?;
    Ok(ts)
}

/// Largest absolute deviation per observable between full numerics and a
/// closed form.
#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub n_a: f64,
    pub n_b: f64,
    pub negativity: f64,
    /// Full-model series on the requested time grid.
    pub full: TimeSeries,
    /// Closed-form series on the matching `τ` grid.
    pub analytic: TimeSeries,
}

impl DeviationReport {
    pub fn max(&self) -> f64 {
        self.n_a.max(self.n_b).max(self.negativity)
    }
}

/// Full-model evolution against the printed closed forms.
pub fn compare_effective_full(config: &SystemConfig, initial: InitialKind, t_grid: &[f64]) -> Result<DeviationReport> {
    compare_effective_full_with(config, initial, t_grid, ClosedForm::Printed)
}

pub fn compare_effective_full_with(
    config: &SystemConfig,
    initial: InitialKind,
    t_grid: &[f64],
    form: ClosedForm,
) -> Result<DeviationReport> {
    if config.n_atoms != 2 {
        return Err(Error::InvalidArgument("comparison needs n_atoms = 2".into()));
    }
    let state0 = initial_state(initial, config, None)?;
    let full = numeric_observables(config, &build_h_total(config), &state0, t_grid)?;
    let taus: Vec<f64> = t_grid.iter().map(|&t| tau_of(config, t)).collect();
    let analytic = if config.coupling_j == 0.0 {
        // no dynamics at all: the closed forms reduce to their τ = 0 values
        let mut ts = TimeSeries::new(LABELS.iter().map(|s| s.to_string()).collect());
        let v0 = closed_form(initial, form, 0.0)?;
        for &t in t_grid {
            ts.push(t, &v0)?;
        }
        ts
    } else {
        closed_form_series(initial, form, &taus)?
    };
    let dev = |label: &str| {
        full.column(label)
            .unwrap()
            .iter()
            .zip(analytic.column(label).unwrap())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(DeviationReport {
        n_a: dev("n_a"),
        n_b: dev("n_b"),
        negativity: dev("negativity"),
        full,
        analytic,
    })
}
