//! Sector-resolved propagation under the non-Hermitian generator.
//!
//! The generator conserves the excitation number `M` and never touches atoms
//! in `g`, so it is block diagonal in sectors labelled by the set of ground
//! atoms and `M`. For every sector we store dense propagators for a ladder of
//! step sizes `δ·2^k`, `k = -FINE_LEVELS..=coarse`. Advancing to a norm
//! threshold is then a greedy descent over the ladder, which is a bisection
//! in time whose resolution is `δ·2^-FINE_LEVELS`.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::Basis;
use crate::operators::SparseOperator;

/// `|G| δ` for the base step.
const BASE_STEP_NORM: f64 = 0.5;
/// Taylor terms for the base step, enough for `0.5^19 / 19! < 1e-22`.
const TAYLOR_TERMS: usize = 18;
/// Number of halvings below the base step.
pub const FINE_LEVELS: usize = 20;
const MAX_COARSE_LEVELS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorKey {
    pub ground_mask: u32,
    pub excitations: usize,
}

#[derive(Debug)]
struct Sector {
    /// `-i 𝓗` restricted to the sector.
    generator: DMatrix<C64>,
    /// Propagators with step `dts[k]`, ascending.
    levels: Vec<DMatrix<C64>>,
}

/// Outcome of [`Ladder::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    /// The target time was reached with the norm still above the threshold.
    Reached,
    /// The norm crosses the threshold at (within resolution) the given time.
    Crossed(f64),
}

/// A state stored as one dense vector per occupied sector.
#[derive(Debug, Clone)]
pub struct SectorState {
    pub parts: Vec<(usize, DVector<C64>)>,
}

impl SectorState {
    pub fn norm_sqr(&self) -> f64 {
        self.parts.iter().map(|(_, v)| v.norm_squared()).sum()
    }
}

/// Shared propagator ladder for all sectors of one generator.
#[derive(Debug)]
pub struct Ladder {
    basis: Basis,
    dim: usize,
    /// Sector id of each basis index.
    sector_of: Vec<u32>,
    /// Position of each basis index within its sector.
    local_of: Vec<u32>,
    keys: Vec<SectorKey>,
    members: Vec<Vec<usize>>,
    sectors: Vec<OnceLock<Sector>>,
    generator: SparseOperator,
    dts: Vec<f64>,
}

impl Ladder {
    /// `horizon` bounds the largest step of the ladder; longer spans are
    /// covered by repeating the top level.
    pub fn new(basis: Basis, generator: SparseOperator, horizon: f64) -> Self {
        let dim = basis.dim();
        let mut ids: HashMap<SectorKey, u32> = HashMap::new();
        let mut keys = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut sector_of = vec![0u32; dim];
        let mut local_of = vec![0u32; dim];
        for idx in 0..dim {
            let (_, chain, _) = basis.split(idx);
            let key = SectorKey {
                ground_mask: basis.ground_mask(chain),
                excitations: basis.excitation(idx),
            };
            let id = *ids.entry(key).or_insert_with(|| {
                keys.push(key);
                members.push(Vec::new());
                (keys.len() - 1) as u32
            });
            sector_of[idx] = id;
            local_of[idx] = members[id as usize].len() as u32;
            members[id as usize].push(idx);
        }
        let norm = generator.norm_bound();
        let delta = if norm > 0.0 { BASE_STEP_NORM / norm } else { horizon.max(1.0) };
        let mut coarse = 0;
        while coarse < MAX_COARSE_LEVELS && delta * 2f64.powi(coarse as i32) < horizon {
            coarse += 1;
        }
        let dts = (0..=FINE_LEVELS + coarse)
            .map(|i| delta * 2f64.powi(i as i32 - FINE_LEVELS as i32))
            .collect();
        let sectors = (0..keys.len()).map(|_| OnceLock::new()).collect();
        Ladder {
            basis,
            dim,
            sector_of,
            local_of,
            keys,
            members,
            sectors,
            generator,
            dts,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn base_step(&self) -> f64 {
        self.dts[FINE_LEVELS]
    }

    pub fn resolution(&self) -> f64 {
        self.dts[0]
    }

    pub fn key(&self, id: usize) -> SectorKey {
        self.keys[id]
    }

    fn sector(&self, id: usize) -> &Sector {
        self.sectors[id].get_or_init(|| self.build_sector(id))
    }

    fn build_sector(&self, id: usize) -> Sector {
        let members = &self.members[id];
        let n = members.len();
        let mut g = DMatrix::<C64>::zeros(n, n);
        for (i, &idx) in members.iter().enumerate() {
            for (c, v) in self.generator.row(idx) {
                debug_assert_eq!(self.sector_of[c] as usize, id);
                g[(i, self.local_of[c] as usize)] = C64::new(0.0, -1.0) * v;
            }
        }
        let delta = self.base_step();
        let a = &g * C64::new(delta, 0.0);
        let mut powers = vec![DMatrix::<C64>::identity(n, n)];
        for k in 1..=TAYLOR_TERMS {
            let next = &a * powers.last().unwrap() / C64::new(k as f64, 0.0);
            powers.push(next);
        }
        let mut levels = Vec::with_capacity(self.dts.len());
        for k in (1..=FINE_LEVELS).rev() {
            let s = 0.5f64.powi(k as i32);
            let mut u = DMatrix::<C64>::zeros(n, n);
            let mut f = 1.0;
            for p in &powers {
                if f < 1e-30 {
                    break;
                }
                u += p * C64::new(f, 0.0);
                f *= s;
            }
            levels.push(u);
        }
        let mut u = DMatrix::<C64>::zeros(n, n);
        for p in &powers {
            u += p;
        }
        levels.push(u);
        while levels.len() < self.dts.len() {
            let last = levels.last().unwrap();
            levels.push(last * last);
        }
        Sector {
            generator: g,
            levels,
        }
    }

    /// Splits a full-space vector into its occupied sectors.
    pub fn split(&self, amps: &[C64]) -> Result<SectorState> {
        if amps.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: amps.len(),
            });
        }
        let mut parts: Vec<(usize, DVector<C64>)> = Vec::new();
        let mut slot: HashMap<u32, usize> = HashMap::new();
        for (idx, a) in amps.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let id = self.sector_of[idx];
            let p = *slot.entry(id).or_insert_with(|| {
                parts.push((id as usize, DVector::zeros(self.members[id as usize].len())));
                parts.len() - 1
            });
            parts[p].1[self.local_of[idx] as usize] = *a;
        }
        parts.sort_by_key(|(id, _)| *id);
        Ok(SectorState { parts })
    }

    pub fn to_full(&self, state: &SectorState) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (id, v) in &state.parts {
            for (&idx, a) in self.members[*id].iter().zip(v.iter()) {
                out[idx] = *a;
            }
        }
        out
    }

    fn apply_level(&self, state: &SectorState, level: usize) -> SectorState {
        SectorState {
            parts: state
                .parts
                .iter()
                .map(|(id, v)| (*id, &self.sector(*id).levels[level] * v))
                .collect(),
        }
    }

    /// Short Taylor step for spans below the ladder resolution.
    fn residual_step(&self, state: &SectorState, dt: f64) -> SectorState {
        SectorState {
            parts: state
                .parts
                .iter()
                .map(|(id, v)| {
                    let g = &self.sector(*id).generator;
                    let mut out = v.clone();
                    let mut term = v.clone();
                    for k in 1..=4 {
                        term = g * term * C64::new(dt / k as f64, 0.0);
                        out += &term;
                    }
                    (*id, out)
                })
                .collect(),
        }
    }

    /// Propagates from `*t` towards `target`, stopping early where the
    /// squared norm would drop to `threshold` or below.
    pub fn advance(&self, state: &mut SectorState, t: &mut f64, target: f64, threshold: f64) -> Advance {
        let top = self.dts.len() - 1;
        let fits = |t: f64, dt: f64| t + dt <= target * (1.0 + 4.0 * f64::EPSILON);
        let mut level = top;
        loop {
            let dt = self.dts[level];
            let mut accepted = false;
            if fits(*t, dt) {
                let cand = self.apply_level(state, level);
                if cand.norm_sqr() > threshold {
                    *state = cand;
                    *t += dt;
                    accepted = true;
                }
            }
            if !(level == top && accepted) {
                if level == 0 {
                    break;
                }
                level -= 1;
            }
        }
        let rest = target - *t;
        if rest >= self.dts[0] {
            return Advance::Crossed(*t + 0.5 * self.dts[0]);
        }
        if rest > 0.0 {
            let cand = self.residual_step(state, rest);
            if cand.norm_sqr() <= threshold {
                return Advance::Crossed(*t + 0.5 * rest);
            }
            *state = cand;
        }
        *t = target;
        Advance::Reached
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_state, InitialKind, SystemConfig};
    use crate::operators::build_h_nonhermitian;
    use crate::propagator::evolve;

    fn setup() -> (SystemConfig, Ladder) {
        let c = SystemConfig::chain(3, 2.0).with_rates(0.2, 0.1, 0.05);
        let l = Ladder::new(c.basis(), build_h_nonhermitian(&c), 100.0);
        (c, l)
    }

    #[test]
    fn split_and_join_round_trip() {
        let (c, l) = setup();
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let st = l.split(s.amplitudes()).unwrap();
        assert_eq!(st.parts.len(), 1);
        assert_eq!(l.key(st.parts[0].0).ground_mask, 0);
        assert_eq!(l.key(st.parts[0].0).excitations, 3);
        assert_eq!(l.to_full(&st), s.amplitudes());
    }

    #[test]
    fn reaching_a_target_matches_sparse_propagation() {
        let (c, l) = setup();
        let h = build_h_nonhermitian(&c);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        for target in [0.0, 1e-9, 0.37, 3.0, 17.123] {
            let mut st = l.split(s.amplitudes()).unwrap();
            let mut t = 0.0;
            assert_eq!(l.advance(&mut st, &mut t, target, 0.0), Advance::Reached);
            assert_eq!(t, target);
            let want = evolve(&s, &h, target, 1e-12).unwrap();
            let got = l.to_full(&st);
            let d: f64 = got.iter().zip(want.amplitudes()).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!(d.sqrt() < 1e-9, "target {target}: {}", d.sqrt());
        }
    }

    #[test]
    fn crossing_time_is_bracketed() {
        let (c, l) = setup();
        let h = build_h_nonhermitian(&c);
        let s = initial_state(InitialKind::AllUp, &c, None).unwrap();
        let mut st = l.split(s.amplitudes()).unwrap();
        let mut t = 0.0;
        let r = 0.4;
        let Advance::Crossed(tj) = l.advance(&mut st, &mut t, 1e3, r) else {
            panic!("no crossing");
        };
        let before = evolve(&s, &h, tj - 1e-6, 1e-12).unwrap().norm_sqr();
        let after = evolve(&s, &h, tj + 1e-6, 1e-12).unwrap().norm_sqr();
        assert!(before > r && after < r);
        assert!(st.norm_sqr() > r);
        assert!((tj - t).abs() <= l.resolution());
    }
}
