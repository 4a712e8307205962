//! Time evolution `exp(-i G t)|psi>` for sparse generators.
//!
//! The integrator is a truncated Taylor series applied in substeps of
//! length `h` with `|G| h <= 1`. Each substep is summed until the next term
//! falls below a share of the requested tolerance, so the global relative
//! error stays below `tol` for Hermitian and dissipative generators alike.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{norm_sqr, StateVector};
use crate::operators::SparseOperator;

const ZERO: C64 = C64::new(0.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Largest `|G| h` of one Taylor substep.
const SUBSTEP_NORM: f64 = 1.0;
const MAX_TERMS: usize = 60;

/// Largest dimension handled by [`evolve_dense`].
pub const DENSE_LIMIT: usize = 64;

/// Taylor propagator bound to one generator.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    generator: &'a SparseOperator,
    norm: f64,
    tol: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(generator: &'a SparseOperator, tol: f64) -> Result<Self> {
        if !(tol >= f64::EPSILON && tol < 1.0) {
            return Err(Error::Integration {
                time: 0.0,
                reason: format!("tolerance {tol:e} is unreachable in double precision"),
            });
        }
        Ok(Propagator {
            generator,
            norm: generator.norm_bound(),
            tol,
        })
    }

    /// Advances the amplitudes `x` by `dt`.
    pub fn step(&self, x: &[C64], dt: f64) -> Result<Vec<C64>> {
        if x.len() != self.generator.dim() {
            return Err(Error::Dimension {
                expected: self.generator.dim(),
                found: x.len(),
            });
        }
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be ≥ 0")));
        }
        if dt == 0.0 {
            return Ok(x.to_vec());
        }
        let substeps = ((self.norm * dt / SUBSTEP_NORM).ceil() as usize).max(1);
        let h = dt / substeps as f64;
        let eps = 1e-2 * self.tol / substeps as f64;
        let dim = x.len();
        let mut psi = x.to_vec();
        let mut term = vec![ZERO; dim];
        let mut next = vec![ZERO; dim];
        for s in 0..substeps {
            let scale = norm_sqr(&psi).sqrt();
            if scale == 0.0 {
                return Ok(psi);
            }
            term.copy_from_slice(&psi);
            let mut converged = false;
            for k in 1..=MAX_TERMS {
                self.generator.apply_into(&term, &mut next);
                let f = MINUS_I * (h / k as f64);
                for (t, n) in term.iter_mut().zip(&next) {
                    *t = n * f;
                }
                for (p, t) in psi.iter_mut().zip(&term) {
                    *p += t;
                }
                if norm_sqr(&term).sqrt() <= eps * scale {
                    converged = true;
                    break;
                }
            }
            let t_here = (s + 1) as f64 * h;
            if !converged {
                return Err(Error::Integration {
                    time: t_here,
                    reason: format!("Taylor series did not converge within {MAX_TERMS} terms"),
                });
            }
            if psi.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
                return Err(Error::Integration {
                    time: t_here,
                    reason: "non-finite amplitudes".into(),
                });
            }
        }
        Ok(psi)
    }
}

/// Approximates `exp(-i G dt)|psi>` with relative error at most `tol`.
pub fn evolve(state: &StateVector, generator: &SparseOperator, dt: f64, tol: f64) -> Result<StateVector> {
    let amps = Propagator::new(generator, tol)?.step(state.amplitudes(), dt)?;
    StateVector::new(state.basis(), amps)
}

/// Evolves `state0` along an increasing time grid starting at `t >= 0`,
/// calling `visit` with the state at every grid point.
pub fn evolve_grid(
    state0: &StateVector,
    generator: &SparseOperator,
    t_grid: &[f64],
    tol: f64,
    mut visit: impl FnMut(f64, &StateVector) -> Result<()>,
) -> Result<()> {
    check_grid(t_grid)?;
    let prop = Propagator::new(generator, tol)?;
    let mut t = 0.0;
    let mut amps = state0.amplitudes().to_vec();
    for &target in t_grid {
        amps = prop.step(&amps, target - t).map_err(|e| shift_time(e, t))?;
        t = target;
        visit(t, &StateVector::new(state0.basis(), amps.clone())?)?;
    }
    Ok(())
}

fn shift_time(e: Error, t0: f64) -> Error {
    match e {
        Error::Integration { time, reason } => Error::Integration {
            time: time + t0,
            reason,
        },
        other => other,
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("time grid must start at t ≥ 0".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Normalized expectation values `<psi(t)|O|psi(t)> / <psi(t)|psi(t)>` of
/// each labelled observable on the grid.
pub fn observable_series(
    state0: &StateVector,
    generator: &SparseOperator,
    observables: &[(String, SparseOperator)],
    t_grid: &[f64],
    tol: f64,
) -> Result<TimeSeries> {
    let mut series = TimeSeries::new(observables.iter().map(|(l, _)| l.clone()).collect());
    evolve_grid(state0, generator, t_grid, tol, |t, psi| {
        let n = psi.norm_sqr();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let row: Vec<f64> = observables
            .iter()
            .map(|(_, op)| op.expectation(psi.amplitudes()).re / n)
            .collect();
        series.push(t, &row)
    })?;
    Ok(series)
}

/// Exact propagation by eigendecomposition for small Hermitian generators.
pub fn evolve_dense(state: &StateVector, generator: &SparseOperator, dt: f64) -> Result<StateVector> {
    let dim = generator.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim,
            limit: DENSE_LIMIT,
        });
    }
    if state.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: state.dim(),
        });
    }
    let dev = generator.hermitian_deviation();
    if dev > 1e-12 {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for (r, c, v) in generator.triplets() {
        h[(r, c)] = v;
    }
    let eig = h.symmetric_eigen();
    let v = DVector::from_column_slice(state.amplitudes());
    let coeffs = eig.eigenvectors.adjoint() * v;
    let phased = DVector::from_iterator(
        dim,
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c * C64::from_polar(1.0, -l * dt)),
    );
    let out = &eig.eigenvectors * phased;
    StateVector::new(state.basis(), out.iter().copied().collect())
}

/// Real observable values on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(labels: Vec<String>) -> Self {
        let columns = vec![Vec::new(); labels.len()];
        TimeSeries {
            times: Vec::new(),
            labels,
            columns,
        }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.labels.len() {
            return Err(Error::Dimension {
                expected: self.labels.len(),
                found: values.len(),
            });
        }
        if self.times.last().is_some_and(|last| t <= *last) {
            return Err(Error::InvalidArgument(format!("time {t} is not increasing")));
        }
        self.times.push(t);
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(*v);
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.columns[i].as_slice())
    }

    /// CSV with a `time` column followed by one column per label.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            row.extend(self.columns.iter().map(|c| fmt_f64(c[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("time") {
            return Err(Error::Parse("first CSV column must be `time`".into()));
        }
        let mut series = TimeSeries::new(header.iter().skip(1).map(String::from).collect());
        for record in r.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            series.push(values[0], &values[1..])?;
        }
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_state, InitialKind, SystemConfig};
    use crate::operators::{build_h_nonhermitian, build_h_total, build_m, number_a, number_b};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = norm_sqr(&v).sqrt();
        v.into_iter().map(|a| a / n).collect()
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_step_is_identity() {
        let c = SystemConfig::chain(2, 3.0);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let out = evolve(&s, &build_h_total(&c), 0.0, 1e-8).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn hermitian_evolution_preserves_norm() {
        let c = SystemConfig::chain(3, 2.0);
        let h = build_h_total(&c);
        let s = StateVector::new(c.basis(), random_state(h.dim(), 3)).unwrap();
        let out = evolve(&s, &h, 1.0, 1e-8).unwrap();
        assert!((out.norm_sqr().sqrt() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn matches_dense_oracle() {
        let mut c = SystemConfig::chain(1, 1.0);
        c.rotating_frame = false;
        c.detuning = 0.7;
        c.n_max = 3;
        let h = build_h_total(&c);
        assert!(h.dim() <= DENSE_LIMIT);
        let s = StateVector::new(c.basis(), random_state(h.dim(), 11)).unwrap();
        for dt in [0.1, 1.0, 7.3] {
            let a = evolve(&s, &h, dt, 1e-10).unwrap();
            let b = evolve_dense(&s, &h, dt).unwrap();
            assert!(dist(a.amplitudes(), b.amplitudes()) < 1e-9, "dt = {dt}");
        }
    }

    #[test]
    fn dense_oracle_limits() {
        let c = SystemConfig::chain(2, 1.0);
        let h = build_h_total(&c);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        assert!(matches!(evolve_dense(&s, &h, 1.0), Err(Error::TooLarge { .. })));
        let mut small = SystemConfig::chain(1, 1.0).with_rates(0.1, 0.1, 0.1);
        small.n_max = 1;
        let hn = build_h_nonhermitian(&small);
        let s = initial_state(InitialKind::AllUp, &small, None).unwrap();
        assert!(matches!(evolve_dense(&s, &hn, 1.0), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn nonhermitian_norm_decreases() {
        let c = SystemConfig::chain(3, 2.0).with_rates(0.2, 0.1, 0.05);
        let h = build_h_nonhermitian(&c);
        let mut s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let mut last = s.norm_sqr();
        for _ in 0..20 {
            s = evolve(&s, &h, 0.5, 1e-8).unwrap();
            let n = s.norm_sqr();
            assert!(n <= last + 1e-14);
            last = n;
        }
        assert!(last < 0.9);
    }

    #[test]
    fn unreachable_tolerance_is_an_error() {
        let c = SystemConfig::chain(2, 1.0);
        let h = build_h_total(&c);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        assert!(matches!(evolve(&s, &h, 1.0, 1e-20), Err(Error::Integration { .. })));
    }

    #[test]
    fn excitation_conserved_and_identity_constant() {
        let c = SystemConfig::chain(2, 10.0).with_initial(InitialKind::Psi2);
        let s = initial_state(InitialKind::Psi2, &c, None).unwrap();
        let dim = c.basis().dim();
        let obs = vec![
            ("M".to_string(), build_m(&c)),
            ("one".to_string(), SparseOperator::identity(dim)),
        ];
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        let ts = observable_series(&s, &build_h_total(&c), &obs, &grid, 1e-8).unwrap();
        assert!(ts.column("M").unwrap().iter().all(|m| (m - 2.0).abs() < 1e-8));
        assert!(ts.column("one").unwrap().iter().all(|m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn psi1_keeps_one_oscillator_quantum_in_effective_regime() {
        // For psi1 the oscillators share one quantum up to O(J^2/V^2) leakage
        // into the chain; check the sum stays near one at large V.
        let c = SystemConfig::chain(2, 100.0).with_initial(InitialKind::Psi1);
        let s = initial_state(InitialKind::Psi1, &c, None).unwrap();
        let b = c.basis();
        let obs = vec![("n".to_string(), number_a(&b).add(&number_b(&b)))];
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 5.0).collect();
        let ts = observable_series(&s, &build_h_total(&c), &obs, &grid, 1e-8).unwrap();
        assert!(ts.column("n").unwrap().iter().all(|n| (n - 1.0).abs() < 1e-3));
    }

    #[test]
    fn tighter_tolerance_never_moves_away_from_reference() {
        let c = SystemConfig::chain(3, 2.0).with_rates(0.1, 0.2, 0.0);
        let h = build_h_nonhermitian(&c);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let reference = evolve(&s, &h, 5.0, 1e-14).unwrap();
        let mut last = f64::INFINITY;
        for tol in [1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6] {
            let d = dist(evolve(&s, &h, 5.0, tol).unwrap().amplitudes(), reference.amplitudes());
            assert!(d <= tol);
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn grid_validation() {
        let c = SystemConfig::chain(1, 1.0);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let h = build_h_total(&c);
        assert!(observable_series(&s, &h, &[], &[0.0, 0.0], 1e-8).is_err());
        assert!(observable_series(&s, &h, &[], &[-1.0], 1e-8).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut ts = TimeSeries::new(vec!["n_a".into(), "negativity".into()]);
        ts.push(0.0, &[1.0, 0.0]).unwrap();
        ts.push(0.1, &[0.5, 1.0 / 3.0]).unwrap();
        assert!(ts.push(0.1, &[0.0, 0.0]).is_err());
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,n_a,negativity\n"));
        assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), ts);
    }
}
