//! Dense master-equation integrator used as an oracle for the unraveling.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{DensityOperator, SystemConfig};
use crate::observables::Observables;
use crate::operators::{build_h_nonhermitian, build_jump_set, build_m, SparseOperator};
use crate::propagator::TimeSeries;

/// Largest Hilbert-space dimension accepted by [`lindblad_solve`].
pub const LINDBLAD_LIMIT: usize = 4096;

const MAX_TERMS: usize = 60;
const SOLVER_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct LindbladResult {
    /// Standard observables plus `M` and `trace`.
    pub series: TimeSeries,
    /// `ρ(t)` at every grid point.
    pub snapshots: Vec<DensityOperator>,
}

/// `out[:, j] = op · m[:, j]`.
fn sparse_mul(op: &SparseOperator, m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    let mut out = DMatrix::<C64>::zeros(n, m.ncols());
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mut dst = out.column_mut(j);
        op.apply_into(col.as_slice(), dst.as_mut_slice());
    }
    out
}

struct Liouvillian {
    h: SparseOperator,
    jumps: Vec<SparseOperator>,
}

impl Liouvillian {
    /// `-i(𝓗ρ - ρ𝓗†) + Σ LρL†`, valid for Hermitian `ρ`.
    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let x = sparse_mul(&self.h, rho);
        let i = C64::new(0.0, 1.0);
        let mut out = (x.adjoint() - &x) * i;
        for l in &self.jumps {
            let y = sparse_mul(l, rho);
            out += sparse_mul(l, &y.adjoint());
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        2.0 * self.h.norm_bound() + self.jumps.iter().map(|l| l.norm_bound().powi(2)).sum::<f64>()
    }
}

/// Integrates the master equation from `rho0` and records `ρ(t)` on an
/// increasing grid starting at `t >= 0`.
pub fn lindblad_solve(config: &SystemConfig, rho0: &DensityOperator, t_grid: &[f64]) -> Result<LindbladResult> {
    config.validate()?;
    let basis = config.basis();
    if basis.dim() > LINDBLAD_LIMIT {
        return Err(Error::TooLarge {
            dim: basis.dim(),
            limit: LINDBLAD_LIMIT,
        });
    }
    if rho0.basis() != basis {
        return Err(Error::Dimension {
            expected: basis.dim(),
            found: rho0.basis().dim(),
        });
    }
    if t_grid.first().is_some_and(|t| *t < 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be increasing from t ≥ 0".into()));
    }
    let liou = Liouvillian {
        h: build_h_nonhermitian(config),
        jumps: build_jump_set(config)
            .channels()
            .iter()
            .filter(|c| c.operator.nnz() > 0)
            .map(|c| c.operator.clone())
            .collect(),
    };
    let bound = liou.norm_bound();
    let m_op = build_m(config);
    let obs = Observables::new(basis, true);
    let mut labels = obs.labels().to_vec();
    labels.push("M".into());
    labels.push("trace".into());
    let mut series = TimeSeries::new(labels);
    let mut snapshots = Vec::with_capacity(t_grid.len());

    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = ((bound * span).ceil() as usize).max(1);
            let h = span / steps as f64;
            let eps = 1e-2 * SOLVER_TOL / steps as f64;
            for s in 0..steps {
                let scale = rho.norm();
                let mut term = rho.clone();
                let mut converged = false;
                for k in 1..=MAX_TERMS {
                    term = liou.apply(&term) * C64::new(h / k as f64, 0.0);
                    rho += &term;
                    if term.norm() <= eps * scale {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::Integration {
                        time: t + (s + 1) as f64 * h,
                        reason: "master-equation series did not converge".into(),
                    });
                }
                rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            }
            t = target;
        }
        let dop = DensityOperator::new(basis, rho.clone())?;
        let mut row = obs.evaluate_density(&dop)?;
        let tr = dop.trace().re;
        let m = m_op.triplets().map(|(r, c, v)| (v * rho[(c, r)]).re).sum::<f64>() / tr;
        row.push(m);
        row.push(tr);
        series.push(target, &row)?;
        snapshots.push(dop);
    }
    Ok(LindbladResult { series, snapshots })
}
