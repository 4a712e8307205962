//! Reduced oscillator state and its negativity.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{hermitian_blocks, hermitian_deviation, submatrix, Basis, DensityOperator, StateVector, DENSITY_TOL};

/// Partial-transpose eigenvalues smaller than this in magnitude count as zero.
pub const NEGATIVITY_EIGEN_CUTOFF: f64 = 1e-12;

/// Slightly negative negativities down to `-NEGATIVITY_CLIP` are reported as zero.
pub const NEGATIVITY_CLIP: f64 = 1e-9;

/// Guard for ceilings of floating-point excitation numbers.
const CEIL_SLACK: f64 = 1e-9;

/// Density matrix of the two oscillators over Fock(a) ⊗ Fock(b), `a` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    n_max: usize,
    matrix: DMatrix<C64>,
}

impl OscillatorState {
    pub fn new(n_max: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let d = (n_max + 1) * (n_max + 1);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(OscillatorState { n_max, matrix })
    }

    /// Projector onto a pure two-oscillator state given as `(m, n, amplitude)`.
    pub fn from_amplitudes(n_max: usize, terms: &[(usize, usize, C64)]) -> Result<Self> {
        let f = n_max + 1;
        let mut v = nalgebra::DVector::<C64>::zeros(f * f);
        for &(m, n, c) in terms {
            if m > n_max || n > n_max {
                return Err(Error::InvalidArgument(format!(
                    "Fock state ({m}, {n}) exceeds cutoff {n_max}"
                )));
            }
            v[m * f + n] += c;
        }
        Ok(OscillatorState {
            n_max,
            matrix: &v * v.adjoint(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `<a†a + b†b>` normalized by the trace.
    pub fn mean_excitations(&self) -> f64 {
        let f = self.fock_dim();
        let tr = self.trace();
        if tr == 0.0 {
            return 0.0;
        }
        (0..f * f)
            .map(|i| self.matrix[(i, i)].re * ((i / f) + (i % f)) as f64)
            .sum::<f64>()
            / tr
    }

    /// Hermiticity and unit trace within [`DENSITY_TOL`].
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > DENSITY_TOL {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = self.matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("trace {tr} differs from 1")));
        }
        Ok(())
    }

    /// Writes `row,col,re,im` lines for every nonzero entry.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,re,im")?;
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                let v = self.matrix[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    writeln!(out, "{r},{c},{},{}", fmt_f64(v.re), fmt_f64(v.im))?;
                }
            }
        }
        Ok(())
    }
}

/// The maximally entangled state `sum_i |i>|i> / sqrt(n+1)`.
pub fn phi_max(n: usize, n_max: usize) -> Result<OscillatorState> {
    let c = C64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0);
    let terms: Vec<_> = (0..=n).map(|i| (i, i, c)).collect();
    OscillatorState::from_amplitudes(n_max, &terms)
}

/// Traces out the chain of a pure state without forming the full density matrix.
pub fn reduce_pure(state: &StateVector) -> OscillatorState {
    reduce_amplitudes(&state.basis(), state.amplitudes())
}

pub(crate) fn reduce_amplitudes(basis: &Basis, amps: &[C64]) -> OscillatorState {
    let f = basis.fock_dim();
    let mut rho = DMatrix::<C64>::zeros(f * f, f * f);
    let mut entries: Vec<(usize, C64)> = Vec::with_capacity(f * f);
    for c in 0..basis.chain_dim() {
        entries.clear();
        for a in 0..f {
            for b in 0..f {
                let v = amps[basis.join(a, c, b)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((a * f + b, v));
                }
            }
        }
        for &(i, x) in &entries {
            for &(j, y) in &entries {
                rho[(i, j)] += x * y.conj();
            }
        }
    }
    OscillatorState {
        n_max: basis.n_max(),
        matrix: rho,
    }
}

/// Traces out the chain of a full density operator.
pub fn reduce_density(rho: &DensityOperator) -> OscillatorState {
    let basis = rho.basis();
    let m = rho.matrix();
    let f = basis.fock_dim();
    let mut out = DMatrix::<C64>::zeros(f * f, f * f);
    for a in 0..f {
        for b in 0..f {
            for a2 in 0..f {
                for b2 in 0..f {
                    let mut s = C64::new(0.0, 0.0);
                    for c in 0..basis.chain_dim() {
                        s += m[(basis.join(a, c, b), basis.join(a2, c, b2))];
                    }
                    out[(a * f + b, a2 * f + b2)] = s;
                }
            }
        }
    }
    OscillatorState {
        n_max: basis.n_max(),
        matrix: out,
    }
}

/// Input accepted by [`reduce_to_oscillators`].
pub enum FullState<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a StateVector> for FullState<'a> {
    fn from(s: &'a StateVector) -> Self {
        FullState::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for FullState<'a> {
    fn from(r: &'a DensityOperator) -> Self {
        FullState::Mixed(r)
    }
}

/// `tr_chain` of a pure or mixed full state.
pub fn reduce_to_oscillators<'a>(state: impl Into<FullState<'a>>) -> OscillatorState {
    match state.into() {
        FullState::Pure(s) => reduce_pure(s),
        FullState::Mixed(r) => reduce_density(r),
    }
}

/// `(T_a rho)_{(m,n),(m',n')} = rho_{(m',n),(m,n')}`.
pub fn partial_transpose_a(rho: &OscillatorState) -> DMatrix<C64> {
    let f = rho.fock_dim();
    let m = &rho.matrix;
    DMatrix::from_fn(f * f, f * f, |r, c| {
        let (ma, nb) = (r / f, r % f);
        let (ma2, nb2) = (c / f, c % f);
        m[(ma2 * f + nb, ma * f + nb2)]
    })
}

/// `(|T_a rho|_1 - 1) / 2` for the trace-normalized state.
pub fn negativity(rho: &OscillatorState) -> Result<f64> {
    let dev = hermitian_deviation(&rho.matrix);
    if dev > DENSITY_TOL {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let tr = rho.trace();
    if tr <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let pt = partial_transpose_a(rho) / C64::new(tr, 0.0);
    let mut norm1 = 0.0;
    for idx in hermitian_blocks(&pt) {
        norm1 += trace_norm(submatrix(&pt, &idx))?;
    }
    let n = 0.5 * (norm1 - 1.0);
    Ok(if n < 0.0 && n >= -NEGATIVITY_CLIP { 0.0 } else { n })
}

/// `Σ|λ|` over eigenvalues above the cutoff. The Hermitian eigensolver can
/// return non-finite values on some sparse blocks; singular values, which
/// are the same moduli, are used then.
fn trace_norm(block: DMatrix<C64>) -> Result<f64> {
    let sum = |v: &mut dyn Iterator<Item = f64>| v.filter(|l| l.abs() >= NEGATIVITY_EIGEN_CUTOFF).map(f64::abs).sum::<f64>();
    if block.nrows() == 1 {
        return Ok(sum(&mut std::iter::once(block[(0, 0)].re)));
    }
    let eig = block.clone().symmetric_eigenvalues();
    if eig.iter().all(|l| l.is_finite()) {
        return Ok(sum(&mut eig.iter().copied()));
    }
    let sv = block.singular_values();
    if sv.iter().all(|l| l.is_finite()) {
        return Ok(sum(&mut sv.iter().copied()));
    }
    Err(Error::Eigensolver("partial transpose spectrum is not finite".into()))
}

/// Negativity of the oscillators for a pure full state.
pub fn state_negativity(state: &StateVector) -> Result<f64> {
    negativity(&reduce_pure(state))
}

/// `ceil(<a†a + b†b>) / 2`.
pub fn negativity_bound_excitations(rho: &OscillatorState) -> f64 {
    ceil_half(rho.mean_excitations())
}

/// `ceil(mu) / 2`.
pub fn negativity_bound_mu(mu: f64) -> f64 {
    ceil_half(mu)
}

fn ceil_half(x: f64) -> f64 {
    (x - CEIL_SLACK).ceil().max(0.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hermitian_eigenvalues, initial_state, AtomLevel::*, BasisIndex, InitialKind, SystemConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> OscillatorState {
        OscillatorState::from_amplitudes(1, &[(0, 1, c(S)), (1, 0, c(S))]).unwrap()
    }

    #[test]
    fn psi1_reduces_to_product() {
        let cfg = SystemConfig::chain(2, 10.0).with_initial(InitialKind::Psi1);
        let s = initial_state(InitialKind::Psi1, &cfg, None).unwrap();
        let rho = reduce_to_oscillators(&s);
        let f = rho.fock_dim();
        for i in 0..f * f {
            for j in 0..f * f {
                let expect = if i == f && j == f { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(rho.matrix()[(i, j)].re, expect, epsilon = 1e-14);
                assert_abs_diff_eq!(rho.matrix()[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
        assert_abs_diff_eq!(negativity(&rho).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_chain_states_give_mixture() {
        let cfg = SystemConfig::chain(2, 10.0).with_initial(InitialKind::Psi1);
        let terms = [
            (BasisIndex::new(1, &[Up, Down], 0), c(S)),
            (BasisIndex::new(0, &[Up, Up], 1), c(S)),
        ];
        let s = initial_state(InitialKind::Custom, &cfg, Some(&terms)).unwrap();
        let rho = reduce_to_oscillators(&s);
        let f = rho.fock_dim();
        let m = rho.matrix();
        assert_abs_diff_eq!(m[(f, f)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(f, 1)].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(negativity(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_equals_norm_for_unnormalized_input() {
        let cfg = SystemConfig::chain(2, 1.0);
        let amps: Vec<C64> = (0..cfg.basis().dim()).map(|i| C64::new(0.01 * i as f64, -0.02)).collect();
        let s = StateVector::new(cfg.basis(), amps).unwrap();
        assert_abs_diff_eq!(reduce_pure(&s).trace(), s.norm_sqr(), epsilon = 1e-12);
    }

    #[test]
    fn pure_and_density_reductions_agree() {
        let cfg = SystemConfig::chain(2, 1.0);
        let amps: Vec<C64> = (0..cfg.basis().dim())
            .map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let s = StateVector::new(cfg.basis(), amps).unwrap().normalized().unwrap();
        let a = reduce_to_oscillators(&s);
        let b = reduce_to_oscillators(&DensityOperator::from_pure(&s));
        assert!((a.matrix() - b.matrix()).camax() < 1e-13);
    }

    #[test]
    fn sparse_three_quantum_state() {
        let terms: Vec<(usize, usize, C64)> = [
            (0, 3, 6.9382781275890886e-3f64.sqrt()),
            (1, 2, 3.4653854364748597e-2f64.sqrt()),
            (2, 1, -8.4975575147167637e-1f64.sqrt()),
            (3, 0, -1.0865211603598597e-1f64.sqrt()),
        ]
        .iter()
        .map(|&(m, n, c)| (m, n, C64::new(c, 0.0)))
        .collect();
        let rho = OscillatorState::from_amplitudes(5, &terms).unwrap();
        let schmidt: f64 = terms.iter().map(|t| t.2.norm()).sum();
        let want = 0.5 * (schmidt * schmidt / rho.trace() - 1.0);
        assert_abs_diff_eq!(negativity(&rho).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn bell_spectrum_and_negativity() {
        let pt = partial_transpose_a(&bell());
        let mut eig = hermitian_eigenvalues(&pt).unwrap();
        eig.sort_by(f64::total_cmp);
        for (l, e) in eig.iter().zip([-0.5, 0.5, 0.5, 0.5]) {
            assert_abs_diff_eq!(*l, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(negativity(&bell()).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn transpose_is_involution() {
        let rho = bell();
        let once = OscillatorState::new(1, partial_transpose_a(&rho)).unwrap();
        assert_eq!(partial_transpose_a(&once), *rho.matrix());
    }

    #[test]
    fn phi_max_negativity() {
        for n in 1..=5 {
            let rho = phi_max(n, 5).unwrap();
            assert_abs_diff_eq!(negativity(&rho).unwrap(), n as f64 / 2.0, epsilon = 1e-10);
            assert_abs_diff_eq!(rho.mean_excitations(), 2.0 * n as f64 / 2.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(negativity(&phi_max(2, 2).unwrap()).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn bounds() {
        assert_eq!(negativity_bound_mu(2.0), 1.0);
        assert_eq!(negativity_bound_mu(5.0), 2.5);
        assert_eq!(negativity_bound_mu(0.0), 0.0);
        assert_eq!(negativity_bound_mu(4.2), 2.5);
        assert_eq!(negativity_bound_mu(2.0 + 1e-12), 1.0);
        assert_eq!(negativity_bound_excitations(&bell()), 0.5);
        let vac = OscillatorState::from_amplitudes(2, &[(0, 0, c(1.0))]).unwrap();
        assert_eq!(negativity_bound_excitations(&vac), 0.0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = bell().matrix().clone();
        m[(0, 1)] = c(0.3);
        let rho = OscillatorState::new(1, m).unwrap();
        assert!(matches!(negativity(&rho), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn dump_lists_nonzero_entries() {
        let mut buf = Vec::new();
        bell().write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("row,col,re,im\n"));
    }

    fn arb_pure(n_max: usize) -> impl Strategy<Value = OscillatorState> {
        let f = n_max + 1;
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), f * f).prop_filter_map("nonzero", move |v| {
            let norm: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            (norm > 1e-3).then(|| {
                let terms: Vec<_> = v
                    .iter()
                    .enumerate()
                    .map(|(i, (a, b))| (i / f, i % f, C64::new(*a, *b) / norm))
                    .collect();
                OscillatorState::from_amplitudes(n_max, &terms).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn negativity_within_bound(rho in arb_pure(3)) {
            let n = negativity(&rho).unwrap();
            prop_assert!(n >= 0.0);
            prop_assert!(n <= negativity_bound_excitations(&rho) + 1e-9);
        }

        #[test]
        fn product_states_have_zero_negativity(
            a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
        ) {
            let mut terms = Vec::new();
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    terms.push((i, j, C64::new(x.0, x.1) * C64::new(y.0, y.1)));
                }
            }
            let norm: f64 = terms.iter().map(|t| t.2.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let terms: Vec<_> = terms.into_iter().map(|(i, j, v)| (i, j, v / norm)).collect();
            let rho = OscillatorState::from_amplitudes(2, &terms).unwrap();
            prop_assert!(negativity(&rho).unwrap().abs() < 1e-9);
        }

        #[test]
        fn local_phases_leave_negativity_unchanged(rho in arb_pure(2), th in 0.0f64..6.3, ph in 0.0f64..6.3) {
            let f = rho.fock_dim();
            let u = DMatrix::<C64>::from_fn(f * f, f * f, |r, c| {
                if r == c { C64::from_polar(1.0, -th * (r / f) as f64 - ph * (r % f) as f64) } else { C64::new(0.0, 0.0) }
            });
            let rotated = OscillatorState::new(2, &u * rho.matrix() * u.adjoint()).unwrap();
            prop_assert!((negativity(&rho).unwrap() - negativity(&rotated).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn reduced_pure_full_state_is_valid(seed in 0u64..1000) {
            let cfg = SystemConfig::chain(2, 1.0);
            let amps: Vec<C64> = (0..cfg.basis().dim())
                .map(|i| C64::new(((i as u64 * 31 + seed) as f64).sin(), ((i as u64 + seed) as f64 * 0.7).cos()))
                .collect();
            let s = StateVector::new(cfg.basis(), amps).unwrap().normalized().unwrap();
            let rho = reduce_pure(&s);
            prop_assert!(rho.validate().is_ok());
            for l in hermitian_eigenvalues(rho.matrix()).unwrap().iter() {
                prop_assert!(*l >= -1e-10 && *l <= 1.0 + 1e-10);
            }
        }
    }
}
