//! Composite Hilbert space of oscillator `a`, the atom chain and oscillator `b`.
//!
//! Basis states are ordered with oscillator `a` outermost and oscillator `b`
//! innermost:
//!
//! ```text
//! idx = fock_a * (3^N * (n_max + 1)) + chain * (n_max + 1) + fock_b
//! ```
//!
//! where `chain` writes the atom levels in base 3 (`g = 0`, `down = 1`,
//! `up = 2`) with atom 1 as the most significant digit. Tracing out the chain
//! is then a strided reduction over the middle index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};

/// Largest chain supported. Ground-state masks are stored in a `u32` and the
/// Hilbert space is far beyond memory long before this.
pub const MAX_ATOMS: usize = 16;

/// Level of one atom: the effective ground state or one of the two Rydberg states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomLevel {
    Ground = 0,
    Down = 1,
    Up = 2,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::Ground, AtomLevel::Down, AtomLevel::Up];

    fn from_digit(d: usize) -> Self {
        match d {
            0 => AtomLevel::Ground,
            1 => AtomLevel::Down,
            _ => AtomLevel::Up,
        }
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomLevel::Ground => "g",
            AtomLevel::Down => "down",
            AtomLevel::Up => "up",
        })
    }
}

/// Which state a run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `|1>_a (|up,down> - |down,up>)/sqrt2 |0>_b`, two atoms only.
    Psi1,
    /// `|0>_a |up,up> |0>_b`, two atoms only.
    Psi2,
    /// `|0>_a |up...up> |0>_b`.
    AllUp,
    /// Explicit amplitudes supplied by the caller.
    Custom,
}

impl InitialKind {
    /// Total excitation number of the built-in initial states.
    pub fn excitations(self, n_atoms: usize) -> Option<usize> {
        match self {
            InitialKind::Psi1 | InitialKind::Psi2 => Some(2),
            InitialKind::AllUp => Some(n_atoms),
            InitialKind::Custom => None,
        }
    }
}

impl FromStr for InitialKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psi1" => Ok(InitialKind::Psi1),
            "psi2" => Ok(InitialKind::Psi2),
            "all_up" | "allup" => Ok(InitialKind::AllUp),
            "custom" => Ok(InitialKind::Custom),
            other => Err(format!("expected psi1, psi2, all_up or custom, got `{other}`")),
        }
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialKind::Psi1 => "psi1",
            InitialKind::Psi2 => "psi2",
            InitialKind::AllUp => "all_up",
            InitialKind::Custom => "custom",
        })
    }
}

/// Physical and numerical parameters of one simulation, in units of `J`.
///
/// The oscillator frequency is not a separate field: resonance `omega = detuning`
/// is always assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_atoms: usize,
    /// Fock cutoff of each oscillator.
    pub n_max: usize,
    pub coupling_j: f64,
    pub interaction_v: f64,
    pub detuning: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
    pub kappa: f64,
    pub rotating_frame: bool,
    pub integrator_tol: f64,
    /// Explicit time horizon; see [`SystemConfig::horizon`] for the default.
    pub t_max: Option<f64>,
    pub master_seed: u64,
    pub initial: InitialKind,
}

pub const DEFAULT_INTEGRATOR_TOL: f64 = 1e-8;

impl SystemConfig {
    /// Chain of `n_atoms` atoms with flip-flop strength `interaction_v`, no
    /// dissipation, starting from all atoms up. The Fock cutoff equals the
    /// initial excitation number.
    pub fn chain(n_atoms: usize, interaction_v: f64) -> Self {
        SystemConfig {
            n_atoms,
            n_max: n_atoms,
            coupling_j: 1.0,
            interaction_v,
            detuning: 0.0,
            gamma_up: 0.0,
            gamma_down: 0.0,
            kappa: 0.0,
            rotating_frame: true,
            integrator_tol: DEFAULT_INTEGRATOR_TOL,
            t_max: None,
            master_seed: 0,
            initial: InitialKind::AllUp,
        }
    }

    pub fn with_rates(mut self, gamma_up: f64, gamma_down: f64, kappa: f64) -> Self {
        self.gamma_up = gamma_up;
        self.gamma_down = gamma_down;
        self.kappa = kappa;
        self
    }

    pub fn with_initial(mut self, initial: InitialKind) -> Self {
        self.initial = initial;
        if let Some(mu) = initial.excitations(self.n_atoms) {
            self.n_max = mu;
        }
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = Some(t_max);
        self
    }

    /// Oscillator frequency; equal to the detuning by resonance.
    pub fn omega(&self) -> f64 {
        self.detuning
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.n_atoms, self.n_max)
    }

    pub fn has_dissipation(&self) -> bool {
        self.gamma_up > 0.0 || self.gamma_down > 0.0 || self.kappa > 0.0
    }

    /// Time horizon of a trajectory: the explicit `t_max`, otherwise
    /// `10 / min(positive rates)`. `None` when neither exists.
    pub fn horizon(&self) -> Option<f64> {
        if self.t_max.is_some() {
            return self.t_max;
        }
        [self.gamma_up, self.gamma_down, self.kappa]
            .into_iter()
            .filter(|r| *r > 0.0)
            .reduce(f64::min)
            .map(|r| 10.0 / r)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_atoms < 1 {
            return Err(ConfigError::range("n_atoms", "≥ 1"));
        }
        if self.n_atoms > MAX_ATOMS {
            return Err(ConfigError::range("n_atoms", &format!("≤ {MAX_ATOMS}")));
        }
        if !(self.coupling_j > 0.0 && self.coupling_j.is_finite()) {
            return Err(ConfigError::range("coupling_j", "> 0"));
        }
        for (key, value) in [
            ("gamma_up", self.gamma_up),
            ("gamma_down", self.gamma_down),
            ("kappa", self.kappa),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::range(key, "≥ 0"));
            }
        }
        for (key, value) in [("interaction_v", self.interaction_v), ("detuning", self.detuning)] {
            if !value.is_finite() {
                return Err(ConfigError::range(key, "finite"));
            }
        }
        if !(self.integrator_tol > 0.0 && self.integrator_tol < 1.0) {
            return Err(ConfigError::range("integrator_tol", "in (0, 1)"));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::range("t_max", "> 0"));
            }
        }
        Ok(())
    }
}

const CONFIG_KEYS: &[&str] = &[
    "n_atoms",
    "n_max",
    "coupling_j",
    "interaction_v",
    "detuning",
    "gamma_up",
    "gamma_down",
    "kappa",
    "rotating_frame",
    "integrator_tol",
    "t_max",
    "master_seed",
    "initial",
];

fn parse_key<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    match raw.get(key) {
        None => Ok(None),
        Some(value) => value.trim().parse::<T>().map(Some).map_err(|e| ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.clone(),
            reason: e.to_string(),
        }),
    }
}

fn require<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    parse_key(raw, key)?.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
}

/// Builds and validates a configuration from flat string key-value pairs.
///
/// `n_atoms` and `interaction_v` are required. When `n_max` is omitted it
/// defaults to the excitation number of the initial state, which is an exact
/// cutoff: the excitation number is conserved by the Hamiltonian and never
/// raised by a jump. A `custom` initial state has no known excitation number
/// and therefore needs an explicit `n_max`.
pub fn build_config(raw: &BTreeMap<String, String>) -> Result<SystemConfig, ConfigError> {
    if let Some(unknown) = raw.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(unknown.clone()));
    }
    let n_atoms: i64 = require(raw, "n_atoms")?;
    if n_atoms < 1 {
        return Err(ConfigError::range("n_atoms", "≥ 1"));
    }
    let n_atoms = n_atoms as usize;
    let interaction_v: f64 = require(raw, "interaction_v")?;
    let initial: InitialKind = parse_key(raw, "initial")?.unwrap_or(InitialKind::AllUp);
    let n_max: Option<i64> = parse_key(raw, "n_max")?;
    let n_max = match (n_max, initial.excitations(n_atoms)) {
        (Some(n), _) if n < 0 => return Err(ConfigError::range("n_max", "≥ 0")),
        (Some(n), _) => n as usize,
        (None, Some(mu)) => mu,
        (None, None) => return Err(ConfigError::MissingKey("n_max".to_string())),
    };
    let mut defaults = SystemConfig::chain(n_atoms, interaction_v);
    defaults.initial = initial;
    let config = SystemConfig {
        n_atoms,
        n_max,
        coupling_j: parse_key(raw, "coupling_j")?.unwrap_or(defaults.coupling_j),
        interaction_v,
        detuning: parse_key(raw, "detuning")?.unwrap_or(defaults.detuning),
        gamma_up: parse_key(raw, "gamma_up")?.unwrap_or(0.0),
        gamma_down: parse_key(raw, "gamma_down")?.unwrap_or(0.0),
        kappa: parse_key(raw, "kappa")?.unwrap_or(0.0),
        rotating_frame: parse_key(raw, "rotating_frame")?.unwrap_or(defaults.rotating_frame),
        integrator_tol: parse_key(raw, "integrator_tol")?.unwrap_or(defaults.integrator_tol),
        t_max: parse_key(raw, "t_max")?,
        master_seed: parse_key(raw, "master_seed")?.unwrap_or(0),
        initial,
    };
    config.validate()?;
    Ok(config)
}

/// Reads a flat TOML document into the string map accepted by [`build_config`].
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let mut raw = BTreeMap::new();
    for (key, value) in table {
        let s = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            other => {
                return Err(Error::Parse(format!(
                    "key `{key}` must be a scalar, found {}",
                    other.type_str()
                )))
            }
        };
        raw.insert(key, s);
    }
    Ok(raw)
}

/// One basis state in readable form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub fock_a: usize,
    pub atom_levels: Vec<AtomLevel>,
    pub fock_b: usize,
}

impl BasisIndex {
    pub fn new(fock_a: usize, atom_levels: &[AtomLevel], fock_b: usize) -> Self {
        BasisIndex {
            fock_a,
            atom_levels: atom_levels.to_vec(),
            fock_b,
        }
    }
}

/// Dimensions and index arithmetic of the composite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Basis {
    n_atoms: usize,
    n_max: usize,
    chain_dim: usize,
}

impl Basis {
    pub fn new(n_atoms: usize, n_max: usize) -> Self {
        Basis {
            n_atoms,
            n_max,
            chain_dim: 3usize.pow(n_atoms as u32),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn chain_dim(&self) -> usize {
        self.chain_dim
    }

    pub fn dim(&self) -> usize {
        self.fock_dim() * self.fock_dim() * self.chain_dim
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let f = self.fock_dim();
        let fock_b = idx % f;
        let rest = idx / f;
        (rest / self.chain_dim, rest % self.chain_dim, fock_b)
    }

    #[inline]
    pub fn join(&self, fock_a: usize, chain: usize, fock_b: usize) -> usize {
        (fock_a * self.chain_dim + chain) * self.fock_dim() + fock_b
    }

    #[inline]
    fn stride(&self, site: usize) -> usize {
        3usize.pow((self.n_atoms - 1 - site) as u32)
    }

    /// Level of atom `site` (0-based, atom 1 is site 0) in a chain configuration.
    #[inline]
    pub fn level(&self, chain: usize, site: usize) -> AtomLevel {
        AtomLevel::from_digit((chain / self.stride(site)) % 3)
    }

    /// Chain configuration with atom `site` replaced by `level`.
    #[inline]
    pub fn with_level(&self, chain: usize, site: usize, level: AtomLevel) -> usize {
        let stride = self.stride(site);
        let old = (chain / stride) % 3;
        chain - old * stride + level as usize * stride
    }

    pub fn chain_levels(&self, chain: usize) -> Vec<AtomLevel> {
        (0..self.n_atoms).map(|s| self.level(chain, s)).collect()
    }

    pub fn count_up(&self, chain: usize) -> usize {
        (0..self.n_atoms)
            .filter(|&s| self.level(chain, s) == AtomLevel::Up)
            .count()
    }

    /// Bit `site` is set when that atom is in the ground state.
    pub fn ground_mask(&self, chain: usize) -> u32 {
        (0..self.n_atoms)
            .filter(|&s| self.level(chain, s) == AtomLevel::Ground)
            .fold(0u32, |m, s| m | (1 << s))
    }

    /// Eigenvalue of `M = a†a + b†b + sum_i P_up(i)` on a basis state.
    pub fn excitation(&self, idx: usize) -> usize {
        let (fa, chain, fb) = self.split(idx);
        fa + fb + self.count_up(chain)
    }

    pub fn encode(&self, index: &BasisIndex) -> Result<usize> {
        if index.atom_levels.len() != self.n_atoms {
            return Err(Error::Dimension {
                expected: self.n_atoms,
                found: index.atom_levels.len(),
            });
        }
        if index.fock_a > self.n_max || index.fock_b > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "Fock number above cutoff {} in {:?}",
                self.n_max, index
            )));
        }
        let chain = index
            .atom_levels
            .iter()
            .fold(0usize, |acc, &l| acc * 3 + l as usize);
        Ok(self.join(index.fock_a, chain, index.fock_b))
    }

    pub fn decode(&self, idx: usize) -> BasisIndex {
        let (fock_a, chain, fock_b) = self.split(idx);
        BasisIndex {
            fock_a,
            atom_levels: self.chain_levels(chain),
            fock_b,
        }
    }
}

/// Complex amplitudes over the full basis. Norm is tracked, never silently
/// restored.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Basis,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Basis, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Dimension {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(StateVector { basis, amplitudes })
    }

    pub fn zeros(basis: Basis) -> Self {
        StateVector {
            basis,
            amplitudes: vec![C64::new(0.0, 0.0); basis.dim()],
        }
    }

    pub fn basis_state(basis: Basis, idx: usize) -> Self {
        let mut s = Self::zeros(basis);
        s.amplitudes[idx] = C64::new(1.0, 0.0);
        s
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn amplitude(&self, index: &BasisIndex) -> Result<C64> {
        Ok(self.amplitudes[self.basis.encode(index)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        Ok(StateVector {
            basis: self.basis,
            amplitudes: self.amplitudes.iter().map(|a| a * s).collect(),
        })
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Dense density matrix over the full basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    basis: Basis,
    matrix: DMatrix<C64>,
}

/// Tolerance for the density-matrix checks in [`DensityOperator::validate`].
pub const DENSITY_TOL: f64 = 1e-10;

impl DensityOperator {
    pub fn new(basis: Basis, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::Dimension {
                expected: basis.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(DensityOperator { basis, matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        DensityOperator {
            basis: state.basis(),
            matrix: &v * v.adjoint(),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Checks Hermiticity, unit trace and positivity, each to [`DENSITY_TOL`].
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > DENSITY_TOL {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&self.matrix)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidArgument(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Index sets of the connected blocks of a Hermitian matrix: `i` and `j`
/// share a block when linked through nonzero entries.
pub(crate) fn hermitian_blocks(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut block = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if block[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        block[start] = id;
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if block[j] == usize::MAX && (m[(i, j)] != C64::new(0.0, 0.0) || m[(j, i)] != C64::new(0.0, 0.0)) {
                    block[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        blocks.push(members);
    }
    blocks
}

pub(crate) fn submatrix(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Eigenvalues of a Hermitian matrix, computed block by block.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(m.nrows());
    for idx in hermitian_blocks(m) {
        if idx.len() == 1 {
            out.push(m[(idx[0], idx[0])].re);
            continue;
        }
        let eig = submatrix(m, &idx).symmetric_eigenvalues();
        if eig.iter().any(|l| !l.is_finite()) {
            return Err(Error::Eigensolver(format!("non-finite eigenvalue in a {}x{} block", idx.len(), idx.len())));
        }
        out.extend(eig.iter());
    }
    Ok(out)
}

pub(crate) fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Builds one of the named initial states, normalized.
///
/// `custom` takes explicit `(basis state, amplitude)` pairs, which are
/// normalized here.
pub fn initial_state(
    kind: InitialKind,
    config: &SystemConfig,
    custom: Option<&[(BasisIndex, C64)]>,
) -> Result<StateVector> {
    let basis = config.basis();
    let n = config.n_atoms;
    let mut state = StateVector::zeros(basis);
    use AtomLevel::{Down, Up};
    match kind {
        InitialKind::Psi1 | InitialKind::Psi2 if n != 2 => {
            return Err(Error::InitialState(format!("{kind} needs exactly 2 atoms, got {n}")));
        }
        InitialKind::Psi1 => {
            if config.n_max < 1 {
                return Err(Error::InitialState("psi1 needs n_max ≥ 1".into()));
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            state.amplitudes[basis.encode(&BasisIndex::new(1, &[Up, Down], 0))?] = C64::new(h, 0.0);
            state.amplitudes[basis.encode(&BasisIndex::new(1, &[Down, Up], 0))?] = C64::new(-h, 0.0);
        }
        InitialKind::Psi2 | InitialKind::AllUp => {
            let idx = basis.encode(&BasisIndex::new(0, &vec![Up; n], 0))?;
            state.amplitudes[idx] = C64::new(1.0, 0.0);
        }
        InitialKind::Custom => {
            let spec = custom.ok_or_else(|| {
                Error::InitialState("custom initial state needs explicit amplitudes".into())
            })?;
            for (index, amp) in spec {
                state.amplitudes[basis.encode(index)?] += amp;
            }
            if state.norm_sqr() == 0.0 {
                return Err(Error::InitialState("custom amplitudes have zero norm".into()));
            }
            return state.normalized();
        }
    }
    Ok(state)
}

/// `<M> / <psi|psi>` with `M = a†a + b†b + sum_i P_up(i)`.
pub fn total_excitation(state: &StateVector) -> Result<f64> {
    let basis = state.basis();
    let mut weighted = 0.0;
    let mut norm = 0.0;
    for (idx, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p != 0.0 {
            norm += p;
            weighted += p * basis.excitation(idx) as f64;
        }
    }
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(weighted / norm)
}
