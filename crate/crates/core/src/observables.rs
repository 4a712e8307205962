//! The standard observable set: oscillator occupations, Rydberg populations
//! and negativity.

use num_complex::Complex64 as C64;

use crate::entanglement::{negativity, reduce_amplitudes, reduce_density};
use crate::error::{Error, Result};
use crate::model::{norm_sqr, AtomLevel, Basis, DensityOperator, StateVector, SystemConfig};
use crate::operators::{build_h_total, number_a, number_b, projector, SparseOperator};
use crate::propagator::{evolve_grid, TimeSeries};

/// `n_a`, `n_b`, `p_up_1..p_up_N` and optionally `negativity`.
#[derive(Debug, Clone)]
pub struct Observables {
    basis: Basis,
    operators: Vec<SparseOperator>,
    labels: Vec<String>,
    with_negativity: bool,
}

impl Observables {
    pub fn new(basis: Basis, with_negativity: bool) -> Self {
        let mut operators = vec![number_a(&basis), number_b(&basis)];
        let mut labels = vec!["n_a".to_string(), "n_b".to_string()];
        for site in 0..basis.n_atoms() {
            operators.push(projector(&basis, site, AtomLevel::Up));
            labels.push(format!("p_up_{}", site + 1));
        }
        if with_negativity {
            labels.push("negativity".into());
        }
        Observables {
            basis,
            operators,
            labels,
            with_negativity,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn empty_series(&self) -> TimeSeries {
        TimeSeries::new(self.labels.clone())
    }

    /// Normalized expectation values for a (possibly unnormalized) pure state.
    pub fn evaluate_amplitudes(&self, amps: &[C64]) -> Result<Vec<f64>> {
        let n = norm_sqr(amps);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let mut out: Vec<f64> = self.operators.iter().map(|o| o.expectation(amps).re / n).collect();
        if self.with_negativity {
            out.push(negativity(&reduce_amplitudes(&self.basis, amps))?);
        }
        Ok(out)
    }

    pub fn evaluate_state(&self, state: &StateVector) -> Result<Vec<f64>> {
        self.evaluate_amplitudes(state.amplitudes())
    }

    /// `tr(O ρ) / tr ρ` for each observable.
    pub fn evaluate_density(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        let m = rho.matrix();
        let tr = rho.trace().re;
        if tr <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        let mut out: Vec<f64> = self
            .operators
            .iter()
            .map(|o| o.triplets().map(|(r, c, v)| (v * m[(c, r)]).re).sum::<f64>() / tr)
            .collect();
        if self.with_negativity {
            out.push(negativity(&reduce_density(rho))?);
        }
        Ok(out)
    }
}

/// Evolves `state0` under the full Hamiltonian and records the standard
/// observables on `t_grid`.
pub fn coherent_series(config: &SystemConfig, state0: &StateVector, t_grid: &[f64], with_negativity: bool) -> Result<TimeSeries> {
    let obs = Observables::new(config.basis(), with_negativity);
    let mut series = obs.empty_series();
    evolve_grid(state0, &build_h_total(config), t_grid, config.integrator_tol, |t, psi| {
        series.push(t, &obs.evaluate_state(psi)?)
    })?;
    Ok(series)
}
