//! Histograms, ensemble statistics, the log-normal rate fit and unit conversion.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entanglement::negativity_bound_mu;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Number of bins used for negativity distributions unless overridden.
pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Fraction of values in bins whose upper edge is at most `x`.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.probabilities)
            .filter(|(e, _)| e[1] <= x)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Bins are left-closed and right-open except the last, which is closed.
/// Probabilities are relative to the number of input values.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty value list".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "histogram edges must be at least two strictly increasing values".into(),
        ));
    }
    let nb = edges.len() - 1;
    let last = edges[nb];
    let mut counts = vec![0usize; nb];
    for &v in values {
        if v == last {
            counts[nb - 1] += 1;
        } else if v >= edges[0] && v < last {
            let i = edges.partition_point(|e| *e <= v) - 1;
            counts[i] += 1;
        }
    }
    let n = values.len() as f64;
    Ok(Histogram {
        edges: edges.to_vec(),
        probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
        counts,
    })
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Uniform bins over `[0, ceil(mu)/2]`; a zero bound falls back to `[0, 1/2]`.
pub fn negativity_edges(mu: f64, bins: usize) -> Vec<f64> {
    let hi = negativity_bound_mu(mu);
    uniform_edges(0.0, if hi > 0.0 { hi } else { 0.5 }, bins)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Parameters of `N(γ) = (A/γ) exp(-(ln γ - ν)² / (2σ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub nu: f64,
    pub sigma: f64,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn eval(&self, gamma: f64) -> f64 {
        lognormal(self.amplitude, self.nu, self.sigma, gamma)
    }

    /// Maximum of the fitted curve, `exp(ν - σ²)`.
    pub fn peak(&self) -> f64 {
        (self.nu - self.sigma * self.sigma).exp()
    }

    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        format!(
            "amplitude = {}\nnu = {}\nsigma = {}\npeak_gamma = {}\nrss = {}\nconverged = {}\niterations = {}\n",
            fmt_f64(self.amplitude),
            fmt_f64(self.nu),
            fmt_f64(self.sigma),
            fmt_f64(self.peak()),
            fmt_f64(self.rss),
            self.converged,
            self.iterations
        )
    }
}

pub fn lognormal(amplitude: f64, nu: f64, sigma: f64, gamma: f64) -> f64 {
    let l = gamma.ln() - nu;
    amplitude / gamma * (-l * l / (2.0 * sigma * sigma)).exp()
}

const FIT_MAX_ITER: usize = 5000;
const FIT_XTOL: f64 = 1e-12;
const GRID_NU: usize = 9;
const GRID_SIGMA: [f64; 3] = [0.3, 1.0, 3.0];

struct Objective<'a> {
    gammas: &'a [f64],
    values: &'a [f64],
}

impl Objective<'_> {
    /// Best amplitude and residual for fixed `(ν, ln σ)`.
    fn solve(&self, nu: f64, ln_sigma: f64) -> (f64, f64) {
        let sigma = ln_sigma.exp();
        let basis: Vec<f64> = self.gammas.iter().map(|&g| lognormal(1.0, nu, sigma, g)).collect();
        let ff: f64 = basis.iter().map(|f| f * f).sum();
        let a = if ff > 0.0 {
            basis.iter().zip(self.values).map(|(f, y)| f * y).sum::<f64>() / ff
        } else {
            0.0
        };
        let rss = basis.iter().zip(self.values).map(|(f, y)| (a * f - y).powi(2)).sum();
        (a, if f64::is_finite(rss) { rss } else { f64::INFINITY })
    }

    fn rss(&self, p: [f64; 2]) -> f64 {
        self.solve(p[0], p[1]).1
    }
}

/// Least-squares fit of the log-normal rate model: a fixed grid of starts
/// over `(ν, σ)` with the amplitude solved linearly, then Nelder-Mead
/// refinement of the best start.
pub fn fit_lognormal(gammas: &[f64], values: &[f64]) -> Result<FitResult> {
    if gammas.len() != values.len() {
        return Err(Error::Dimension {
            expected: gammas.len(),
            found: values.len(),
        });
    }
    if gammas.len() < 4 {
        return Err(Error::InvalidArgument("fit needs at least 4 points".into()));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("fit needs finite values and γ > 0".into()));
    }
    let obj = Objective { gammas, values };
    let lo = gammas.iter().copied().fold(f64::INFINITY, f64::min).ln();
    let hi = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max).ln();
    let mut best = ([lo, 0.0], f64::INFINITY);
    for i in 0..GRID_NU {
        let nu = lo + (hi - lo) * i as f64 / (GRID_NU - 1) as f64;
        for s in GRID_SIGMA {
            let p = [nu, s.ln()];
            let r = obj.rss(p);
            if r < best.1 {
                best = (p, r);
            }
        }
    }
    let step = [((hi - lo) / (GRID_NU - 1) as f64).max(0.1), 0.3];
    let (p, iterations, converged) = nelder_mead(|p| obj.rss(p), best.0, step);
    let (amplitude, rss) = obj.solve(p[0], p[1]);
    Ok(FitResult {
        amplitude,
        nu: p[0],
        sigma: p[1].exp(),
        rss,
        converged,
        iterations,
    })
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2]) -> ([f64; 2], usize, bool) {
    let mut s = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut v = s.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for it in 0..FIT_MAX_ITER {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = order.map(|i| s[i]);
        v = order.map(|i| v[i]);
        let diam = (1..3)
            .map(|i| ((s[i][0] - s[0][0]).powi(2) + (s[i][1] - s[0][1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        if diam < FIT_XTOL {
            return (s[0], it, true);
        }
        let c = lerp(s[0], s[1], 0.5);
        let xr = lerp(c, s[2], -1.0);
        let fr = f(xr);
        if fr < v[0] {
            let xe = lerp(c, s[2], -2.0);
            let fe = f(xe);
            (s[2], v[2]) = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < v[1] {
            (s[2], v[2]) = (xr, fr);
        } else {
            let xc = if fr < v[2] { lerp(c, xr, 0.5) } else { lerp(c, s[2], 0.5) };
            let fc = f(xc);
            if fc < v[2].min(fr) {
                (s[2], v[2]) = (xc, fc);
            } else {
                for i in 1..3 {
                    s[i] = lerp(s[0], s[i], 0.5);
                    v[i] = f(s[i]);
                }
            }
        }
    }
    let i = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    (s[i], FIT_MAX_ITER, false)
}

/// One row of a decay-rate scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub gamma_down: f64,
    pub avg_negativity: f64,
    pub std_error: f64,
    pub n_traj: usize,
    pub acceptance_fraction: Option<f64>,
}

pub const SCAN_HEADER: [&str; 5] = ["gamma_down", "avg_negativity", "std_error", "n_traj", "acceptance_fraction"];

impl ScanRow {
    pub fn record(&self) -> [String; 5] {
        [
            fmt_f64(self.gamma_down),
            fmt_f64(self.avg_negativity),
            fmt_f64(self.std_error),
            self.n_traj.to_string(),
            self.acceptance_fraction.map(fmt_f64).unwrap_or_default(),
        ]
    }
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(SCAN_HEADER) {
        return Err(Error::Parse(format!("scan CSV header must be {}", SCAN_HEADER.join(","))));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ScanRow {
            gamma_down: num(&rec[0])?,
            avg_negativity: num(&rec[1])?,
            std_error: num(&rec[2])?,
            n_traj: rec[3].parse().map_err(|e| Error::Parse(format!("`{}`: {e}", &rec[3])))?,
            acceptance_fraction: if rec[4].is_empty() { None } else { Some(num(&rec[4])?) },
        });
    }
    Ok(rows)
}

/// Physical quantity kinds handled by [`UnitMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityKind {
    Rate,
    Time,
    Energy,
}

impl FromStr for QuantityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(QuantityKind::Rate),
            "time" => Ok(QuantityKind::Time),
            "energy" => Ok(QuantityKind::Energy),
            _ => Err(Error::InvalidArgument(format!("unknown quantity kind `{s}` (rate, time, energy)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Units of `J` (or `1/J`) to MHz (or µs).
    ToPhysical,
    ToModel,
}

/// Maps model units, where `J = 1`, to laboratory units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitMap {
    /// `J` in MHz.
    pub j_mhz: f64,
}

impl Default for UnitMap {
    fn default() -> Self {
        UnitMap { j_mhz: 1.0 }
    }
}

impl UnitMap {
    pub fn new(j_mhz: f64) -> Result<Self> {
        if !(j_mhz > 0.0 && j_mhz.is_finite()) {
            return Err(Error::InvalidArgument(format!("J = {j_mhz} MHz must be positive")));
        }
        Ok(UnitMap { j_mhz })
    }

    /// Rates and energies convert to MHz, times to µs.
    pub fn convert(&self, value: f64, kind: QuantityKind, direction: Direction) -> f64 {
        match (kind, direction) {
            (QuantityKind::Rate | QuantityKind::Energy, Direction::ToPhysical) => value * self.j_mhz,
            (QuantityKind::Rate | QuantityKind::Energy, Direction::ToModel) => value / self.j_mhz,
            (QuantityKind::Time, Direction::ToPhysical) => value / self.j_mhz,
            (QuantityKind::Time, Direction::ToModel) => value * self.j_mhz,
        }
    }

    /// Human-readable physical value with a scaled SI prefix.
    pub fn describe(&self, value: f64, kind: QuantityKind) -> String {
        let phys = self.convert(value, kind, Direction::ToPhysical);
        match kind {
            QuantityKind::Time => PhysicalValue::scaled(phys * 1e-6, &[("s", 1.0), ("ms", 1e-3), ("µs", 1e-6), ("ns", 1e-9)]).to_string(),
            _ => PhysicalValue::scaled(phys * 1e6, &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)]).to_string(),
        }
    }
}

/// Convenience wrapper for [`UnitMap::convert`] with `J = 1 MHz`.
pub fn convert_units(value: f64, kind: QuantityKind, direction: Direction) -> f64 {
    UnitMap::default().convert(value, kind, direction)
}

struct PhysicalValue {
    value: f64,
    unit: &'static str,
}

impl PhysicalValue {
    /// Largest unit of the ladder in which the magnitude is at least one.
    fn scaled(base: f64, ladder: &[(&'static str, f64)]) -> Self {
        let (unit, scale) = ladder
            .iter()
            .copied()
            .filter(|(_, s)| base.abs() / s >= 1.0 - 1e-9)
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or_else(|| *ladder.iter().min_by(|x, y| x.1.total_cmp(&y.1)).unwrap());
        PhysicalValue {
            value: base / scale,
            unit,
        }
    }
}

impl fmt::Display for PhysicalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = (self.value * 1e9).round() / 1e9;
        write!(f, "{v} {}", self.unit)
    }
}
