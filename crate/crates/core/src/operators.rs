//! Sparse Hamiltonians, the excitation counter `M`, and the jump operators.

use std::fmt;
use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{AtomLevel, Basis, SystemConfig};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance for the `hermitian_hint` check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Complex sparse matrix in compressed-row form.
///
/// Assembled from coordinate triplets; duplicates are summed and exact zeros
/// dropped during assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    hermitian_hint: bool,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>, hermitian_hint: bool) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            dim,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
            hermitian_hint,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new(), true)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(dim, |_| 1.0)
    }

    /// Real diagonal operator with entries `f(i)`.
    pub fn diagonal(dim: usize, f: impl Fn(usize) -> f64) -> Self {
        let t = (0..dim).map(|i| (i, i, C64::new(f(i), 0.0))).collect();
        Self::from_triplets(dim, t, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn with_hermitian_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }

    /// Entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// `<x|A|x>` (not divided by the norm).
    pub fn expectation(&self, x: &[C64]) -> C64 {
        (0..self.dim)
            .map(|r| {
                let mut acc = ZERO;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                x[r].conj() * acc
            })
            .sum()
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t, self.hermitian_hint)
    }

    pub fn scale(&self, s: C64) -> Self {
        let t = self.triplets().map(|(r, c, v)| (r, c, v * s)).collect();
        Self::from_triplets(self.dim, t, self.hermitian_hint && s.im == 0.0)
    }

    /// Sum; the result keeps the Hermitian hint only if both terms carry it.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.dim, t, self.hermitian_hint && other.hermitian_hint)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, t, false)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Bound on the spectral norm, `sqrt(|A|_1 |A|_inf)`.
    pub fn norm_bound(&self) -> f64 {
        let mut col = vec![0.0; self.dim];
        let mut row_max: f64 = 0.0;
        for r in 0..self.dim {
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                s += v.norm();
                col[c] += v.norm();
            }
            row_max = row_max.max(s);
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    /// Writes one `row col re im` line per stored entry after a size header.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{} {} {:.16e} {:.16e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Builds a sparse operator from the action on each basis state: `f(idx)`
/// pushes `(target, value)` pairs meaning `<target|A|idx> += value`.
fn from_action(basis: &Basis, hermitian: bool, f: impl Fn(usize, &mut Vec<(usize, C64)>)) -> SparseOperator {
    let mut triplets = Vec::new();
    let mut out = Vec::new();
    for col in 0..basis.dim() {
        out.clear();
        f(col, &mut out);
        triplets.extend(out.iter().map(|&(row, v)| (row, col, v)));
    }
    SparseOperator::from_triplets(basis.dim(), triplets, hermitian)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `omega (a†a + b†b)`.
pub fn build_h_osc(config: &SystemConfig) -> SparseOperator {
    let basis = config.basis();
    let w = config.omega();
    SparseOperator::diagonal(basis.dim(), |i| {
        let (fa, _, fb) = basis.split(i);
        w * (fa + fb) as f64
    })
}

fn chain_terms(config: &SystemConfig, detuning: f64) -> SparseOperator {
    use AtomLevel::{Down, Up};
    let basis = config.basis();
    let v = config.interaction_v;
    from_action(&basis, true, |idx, out| {
        let (fa, chain, fb) = basis.split(idx);
        let ups = basis.count_up(chain);
        if ups > 0 && detuning != 0.0 {
            out.push((idx, re(detuning * ups as f64)));
        }
        for i in 0..basis.n_atoms().saturating_sub(1) {
            let (li, lj) = (basis.level(chain, i), basis.level(chain, i + 1));
            let flipped = match (li, lj) {
                (Up, Down) => basis.with_level(basis.with_level(chain, i, Down), i + 1, Up),
                (Down, Up) => basis.with_level(basis.with_level(chain, i, Up), i + 1, Down),
                _ => continue,
            };
            out.push((basis.join(fa, flipped, fb), re(v)));
        }
    })
}

/// Nearest-neighbour flip-flop coupling plus `detuning * sum_i P_up(i)`.
pub fn build_h_chain(config: &SystemConfig) -> SparseOperator {
    chain_terms(config, config.detuning)
}

/// Exchange between the end atoms and their oscillators:
/// `J (|down><up|_1 a† + |down><up|_N b† + h.c.)`. Raising a mode that sits
/// at the cutoff gives zero.
pub fn build_h_couple(config: &SystemConfig) -> SparseOperator {
    use AtomLevel::{Down, Up};
    let basis = config.basis();
    let j = config.coupling_j;
    let n_max = basis.n_max();
    let last = basis.n_atoms() - 1;
    from_action(&basis, true, |idx, out| {
        let (fa, chain, fb) = basis.split(idx);
        // oscillator a on atom 1
        match basis.level(chain, 0) {
            Up if fa < n_max => {
                let c = basis.with_level(chain, 0, Down);
                out.push((basis.join(fa + 1, c, fb), re(j * ((fa + 1) as f64).sqrt())));
            }
            Down if fa > 0 => {
                let c = basis.with_level(chain, 0, Up);
                out.push((basis.join(fa - 1, c, fb), re(j * (fa as f64).sqrt())));
            }
            _ => {}
        }
        // oscillator b on atom N
        match basis.level(chain, last) {
            Up if fb < n_max => {
                let c = basis.with_level(chain, last, Down);
                out.push((basis.join(fa, c, fb + 1), re(j * ((fb + 1) as f64).sqrt())));
            }
            Down if fb > 0 => {
                let c = basis.with_level(chain, last, Up);
                out.push((basis.join(fa, c, fb - 1), re(j * (fb as f64).sqrt())));
            }
            _ => {}
        }
    })
}

/// `H = H_osc + H_chain + H_couple`. In the rotating frame the term
/// `omega M` is removed, which drops `H_osc` and the detuning part of the
/// chain Hamiltonian (resonance makes them equal to `omega M`).
pub fn build_h_total(config: &SystemConfig) -> SparseOperator {
    if config.rotating_frame {
        chain_terms(config, 0.0).add(&build_h_couple(config))
    } else {
        build_h_osc(config)
            .add(&build_h_chain(config))
            .add(&build_h_couple(config))
    }
}

/// The conserved excitation counter `M = a†a + b†b + sum_i P_up(i)`.
pub fn build_m(config: &SystemConfig) -> SparseOperator {
    let basis = config.basis();
    SparseOperator::diagonal(basis.dim(), |i| basis.excitation(i) as f64)
}

/// `a†a`.
pub fn number_a(basis: &Basis) -> SparseOperator {
    SparseOperator::diagonal(basis.dim(), |i| basis.split(i).0 as f64)
}

/// `b†b`.
pub fn number_b(basis: &Basis) -> SparseOperator {
    SparseOperator::diagonal(basis.dim(), |i| basis.split(i).2 as f64)
}

/// Projector onto `level` for atom `site` (0-based).
pub fn projector(basis: &Basis, site: usize, level: AtomLevel) -> SparseOperator {
    SparseOperator::diagonal(basis.dim(), |i| {
        let (_, chain, _) = basis.split(i);
        if basis.level(chain, site) == level {
            1.0
        } else {
            0.0
        }
    })
}

/// Number of atoms in `level`, `sum_i P_level(i)`.
pub fn level_count(basis: &Basis, level: AtomLevel) -> SparseOperator {
    SparseOperator::diagonal(basis.dim(), |i| {
        let (_, chain, _) = basis.split(i);
        (0..basis.n_atoms()).filter(|&s| basis.level(chain, s) == level).count() as f64
    })
}

/// Annihilation operator of oscillator `a`.
pub fn lower_a(basis: &Basis) -> SparseOperator {
    from_action(basis, false, |idx, out| {
        let (fa, chain, fb) = basis.split(idx);
        if fa > 0 {
            out.push((basis.join(fa - 1, chain, fb), re((fa as f64).sqrt())));
        }
    })
}

/// Annihilation operator of oscillator `b`.
pub fn lower_b(basis: &Basis) -> SparseOperator {
    from_action(basis, false, |idx, out| {
        let (fa, chain, fb) = basis.split(idx);
        if fb > 0 {
            out.push((basis.join(fa, chain, fb - 1), re((fb as f64).sqrt())));
        }
    })
}

/// `|to><from|` on atom `site`.
pub fn atom_transition(basis: &Basis, site: usize, from: AtomLevel, to: AtomLevel) -> SparseOperator {
    from_action(basis, false, |idx, out| {
        let (fa, chain, fb) = basis.split(idx);
        if basis.level(chain, site) == from {
            out.push((basis.join(fa, basis.with_level(chain, site, to), fb), re(1.0)));
        }
    })
}

/// Dissipation channel of a jump operator. Sites are 0-based; `Display`
/// prints the 1-based atom number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Channel {
    UpDecay(usize),
    DownDecay(usize),
    OscA,
    OscB,
}

impl Channel {
    /// Change of the excitation number `M` caused by this jump.
    pub fn excitation_change(&self) -> i64 {
        match self {
            Channel::DownDecay(_) => 0,
            _ => -1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::UpDecay(i) => write!(f, "up_decay({})", i + 1),
            Channel::DownDecay(i) => write!(f, "down_decay({})", i + 1),
            Channel::OscA => f.write_str("osc_a"),
            Channel::OscB => f.write_str("osc_b"),
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown channel `{s}`"));
        let site = |rest: &str| -> Result<usize> {
            let n: usize = rest
                .strip_suffix(')')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            n.checked_sub(1).ok_or_else(bad)
        };
        match s {
            "osc_a" => Ok(Channel::OscA),
            "osc_b" => Ok(Channel::OscB),
            _ if s.starts_with("up_decay(") => Ok(Channel::UpDecay(site(&s[9..])?)),
            _ if s.starts_with("down_decay(") => Ok(Channel::DownDecay(site(&s[11..])?)),
            _ => Err(bad()),
        }
    }
}

impl From<Channel> for String {
    fn from(c: Channel) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Channel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub channel: Channel,
    /// Jump operator with `sqrt(rate)` already folded in.
    pub operator: SparseOperator,
    pub rate: f64,
}

/// The `2N + 2` jump operators in fixed order: up-decays of atoms `1..N`,
/// down-decays of atoms `1..N`, then oscillator `a` and `b` decay.
/// Zero-rate channels stay in the list with a zero operator.
#[derive(Debug, Clone)]
pub struct JumpSet {
    channels: Vec<JumpChannel>,
}

impl JumpSet {
    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `sum_a L_a† L_a`.
    pub fn decay_operator(&self, dim: usize) -> SparseOperator {
        self.channels
            .iter()
            .fold(SparseOperator::zero(dim), |acc, ch| {
                acc.add(&ch.operator.adjoint().matmul(&ch.operator))
            })
            .with_hermitian_hint(true)
    }
}

pub fn build_jump_set(config: &SystemConfig) -> JumpSet {
    use AtomLevel::{Down, Ground, Up};
    let basis = config.basis();
    let n = basis.n_atoms();
    let mut channels = Vec::with_capacity(2 * n + 2);
    let scaled = |op: SparseOperator, rate: f64| {
        if rate > 0.0 {
            op.scale(re(rate.sqrt()))
        } else {
            SparseOperator::zero(basis.dim())
        }
        .with_hermitian_hint(false)
    };
    for site in 0..n {
        channels.push(JumpChannel {
            channel: Channel::UpDecay(site),
            operator: scaled(atom_transition(&basis, site, Up, Ground), config.gamma_up),
            rate: config.gamma_up,
        });
    }
    for site in 0..n {
        channels.push(JumpChannel {
            channel: Channel::DownDecay(site),
            operator: scaled(atom_transition(&basis, site, Down, Ground), config.gamma_down),
            rate: config.gamma_down,
        });
    }
    channels.push(JumpChannel {
        channel: Channel::OscA,
        operator: scaled(lower_a(&basis), config.kappa),
        rate: config.kappa,
    });
    channels.push(JumpChannel {
        channel: Channel::OscB,
        operator: scaled(lower_b(&basis), config.kappa),
        rate: config.kappa,
    });
    JumpSet { channels }
}

/// `H - (i/2) sum_a L_a† L_a`.
pub fn build_h_nonhermitian(config: &SystemConfig) -> SparseOperator {
    let h = build_h_total(config);
    let decay = build_jump_set(config).decay_operator(h.dim());
    h.add(&decay.scale(C64::new(0.0, -0.5))).with_hermitian_hint(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_state, BasisIndex, InitialKind, StateVector};
    use AtomLevel::{Down, Ground, Up};

    fn lab(n: usize, v: f64, w: f64) -> SystemConfig {
        let mut c = SystemConfig::chain(n, v);
        c.rotating_frame = false;
        c.detuning = w;
        c
    }

    fn apply_to(op: &SparseOperator, basis: &Basis, idx: &BasisIndex) -> Vec<(BasisIndex, C64)> {
        let s = StateVector::basis_state(*basis, basis.encode(idx).unwrap());
        op.apply(s.amplitudes())
            .into_iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, a)| (basis.decode(i), a))
            .collect()
    }

    #[test]
    fn assembly_merges_duplicates() {
        let op = SparseOperator::from_triplets(
            3,
            vec![(0, 1, re(1.0)), (0, 1, re(2.0)), (2, 2, re(1.0)), (2, 2, re(-1.0))],
            false,
        );
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(0, 1), re(3.0));
        assert_eq!(op.get(2, 2), ZERO);
    }

    #[test]
    fn h_osc_is_diagonal_count() {
        let mut c = lab(2, 1.0, 1.0);
        c.n_max = 3;
        let b = c.basis();
        let h = build_h_osc(&c);
        let out = apply_to(&h, &b, &BasisIndex::new(2, &[Ground, Ground], 3));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, re(5.0));
        assert_eq!(build_h_osc(&lab(2, 1.0, 0.0)).nnz(), 0);
    }

    #[test]
    fn h_osc_on_psi1() {
        let c = lab(2, 10.0, 0.7).with_initial(InitialKind::Psi1);
        let s = initial_state(InitialKind::Psi1, &c, None).unwrap();
        let e = build_h_osc(&c).expectation(s.amplitudes());
        assert!((e.re - 0.7).abs() < 1e-14 && e.im.abs() < 1e-14);
    }

    #[test]
    fn h_chain_flip_flop() {
        let (v, w) = (10.0, 0.3);
        let c = lab(2, v, w);
        let b = c.basis();
        let out = apply_to(&build_h_chain(&c), &b, &BasisIndex::new(0, &[Up, Down], 0));
        assert_eq!(out.len(), 2);
        for (idx, amp) in out {
            if idx.atom_levels == [Down, Up] {
                assert_eq!(amp, re(v));
            } else {
                assert_eq!(idx.atom_levels, vec![Up, Down]);
                assert_eq!(amp, re(w));
            }
        }
    }

    #[test]
    fn singlet_eigenvalue() {
        let (v, w) = (10.0, 0.3);
        let c = lab(2, v, w).with_initial(InitialKind::Psi1);
        let s = initial_state(InitialKind::Psi1, &c, None).unwrap();
        let hs = build_h_chain(&c).apply(s.amplitudes());
        for (x, y) in hs.iter().zip(s.amplitudes()) {
            assert!((x - y * (w - v)).norm() < 1e-13);
        }
    }

    #[test]
    fn ground_atom_blocks_flip_flop() {
        let c = lab(3, 2.0, 0.0);
        let b = c.basis();
        let out = apply_to(&build_h_chain(&c), &b, &BasisIndex::new(0, &[Up, Ground, Down], 0));
        assert!(out.is_empty());
    }

    #[test]
    fn h_couple_single_element() {
        let c = SystemConfig::chain(3, 2.0);
        let b = c.basis();
        let out = apply_to(&build_h_couple(&c), &b, &BasisIndex::new(0, &[Up, Ground, Ground], 0));
        assert_eq!(out, vec![(BasisIndex::new(1, &[Down, Ground, Ground], 0), re(1.0))]);
        let mut zero = c.clone();
        zero.coupling_j = 0.0;
        assert_eq!(build_h_couple(&zero).nnz(), 0);
    }

    #[test]
    fn cutoff_raising_gives_zero() {
        let mut c = SystemConfig::chain(1, 1.0);
        c.n_max = 1;
        let b = c.basis();
        let out = apply_to(&build_h_couple(&c), &b, &BasisIndex::new(1, &[Up], 1));
        assert!(out.is_empty());
    }

    #[test]
    fn hamiltonians_are_hermitian_and_conserve_m() {
        for n in 1..=4 {
            let c = lab(n, 2.0, 1.3).with_rates(0.1, 0.2, 0.05);
            let m = build_m(&c);
            for h in [build_h_osc(&c), build_h_chain(&c), build_h_couple(&c), build_h_total(&c)] {
                assert!(h.hermitian_hint());
                assert!(h.hermitian_deviation() <= HERMITIAN_TOL);
                assert!(h.commutator(&m).max_abs() <= 1e-12);
            }
            assert!(build_h_nonhermitian(&c).commutator(&m).max_abs() <= 1e-12);
            for ch in build_jump_set(&c).channels() {
                let ll = ch.operator.adjoint().matmul(&ch.operator);
                assert!(ll.commutator(&m).max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn total_is_sum_of_parts() {
        let c = lab(3, 2.0, 0.4);
        let sum = build_h_osc(&c).add(&build_h_chain(&c)).add(&build_h_couple(&c));
        assert_eq!(build_h_total(&c).sub(&sum).max_abs(), 0.0);
    }

    #[test]
    fn rotating_frame_removes_omega_m() {
        let c = lab(3, 2.0, 0.4);
        let mut r = c.clone();
        r.rotating_frame = true;
        let diff = build_h_total(&c).sub(&build_h_total(&r)).sub(&build_m(&c).scale(re(0.4)));
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn jump_set_order_and_count() {
        let c = SystemConfig::chain(5, 2.0).with_rates(0.1, 0.2, 0.3);
        let js = build_jump_set(&c);
        assert_eq!(js.len(), 12);
        let labels: Vec<String> = js.channels().iter().map(|c| c.channel.to_string()).collect();
        assert_eq!(labels[0], "up_decay(1)");
        assert_eq!(labels[5], "down_decay(1)");
        assert_eq!(labels[10], "osc_a");
        assert_eq!(labels[11], "osc_b");
        for l in &labels {
            assert_eq!(l.parse::<Channel>().unwrap().to_string(), *l);
        }
        let silent = build_jump_set(&SystemConfig::chain(5, 2.0));
        assert_eq!(silent.len(), 12);
        assert!(silent.channels().iter().all(|c| c.operator.nnz() == 0));
    }

    #[test]
    fn decay_operator_identity() {
        let (gu, gd, k) = (0.13, 0.2, 0.05);
        let c = SystemConfig::chain(3, 2.0).with_rates(gu, gd, k);
        let b = c.basis();
        let lhs = build_jump_set(&c).decay_operator(b.dim());
        let rhs = level_count(&b, Up)
            .scale(re(gu))
            .add(&level_count(&b, Down).scale(re(gd)))
            .add(&number_a(&b).add(&number_b(&b)).scale(re(k)));
        assert!(lhs.sub(&rhs).max_abs() < 1e-14);
    }

    #[test]
    fn nonhermitian_generator() {
        let c = SystemConfig::chain(2, 2.0);
        assert_eq!(build_h_nonhermitian(&c).sub(&build_h_total(&c)).max_abs(), 0.0);
        let c = c.with_rates(0.2, 0.1, 0.3);
        let h = build_h_nonhermitian(&c);
        assert!(!h.hermitian_hint());
        for i in 0..h.dim() {
            assert!(h.get(i, i).im <= 0.0);
        }
    }

    #[test]
    fn matrix_market_dump() {
        let c = SystemConfig::chain(1, 1.0);
        let mut buf = Vec::new();
        build_h_couple(&c).write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "12 12 8");
        assert_eq!(lines.len(), 10);
    }
}
