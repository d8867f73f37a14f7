//! Driving noise: a `p`-dimensional Wiener process plus `q` independent,
//! compensated compound-Poisson martingales with bounded jump support.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

const QUAD_TOL: f64 = 1e-14;

/// Probability density on a declared support, with an upper bound used for
/// rejection sampling.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub probability: f64,
}

/// Jump-size law of one coordinate. The Lévy measure is `intensity * law`.
#[derive(Clone)]
pub enum JumpLaw {
    Uniform { lo: f64, hi: f64 },
    Atoms(Vec<Atom>),
    Density {
        support: Vec<(f64, f64)>,
        pdf: DensityFn,
        bound: f64,
    },
}

impl fmt::Debug for JumpLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpLaw::Uniform { lo, hi } => write!(f, "Uniform[{lo}, {hi}]"),
            JumpLaw::Atoms(a) => write!(f, "Atoms({a:?})"),
            JumpLaw::Density { support, bound, .. } => {
                write!(f, "Density(support = {support:?}, bound = {bound})")
            }
        }
    }
}

/// Finite Lévy measure `F = intensity * law` with bounded support.
#[derive(Clone, Debug)]
pub struct JumpMeasureSpec {
    intensity: f64,
    law: JumpLaw,
}

fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// `e^u - 1 - u` without cancellation for small `u`.
fn exp_m1_minus_x(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut term = u * u / 2.0;
        let mut sum = term;
        for k in 3..=14 {
            term *= u / k as f64;
            sum += term;
        }
        sum
    } else {
        u.exp_m1() - u
    }
}

impl JumpMeasureSpec {
    fn check_intensity(intensity: f64) -> Result<()> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(Error::config(format!(
                "jump intensity must be positive and finite, got {intensity}"
            )));
        }
        Ok(())
    }

    /// `F(dx) = intensity / (hi - lo) dx` on `[lo, hi]`.
    pub fn uniform(intensity: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::check_intensity(intensity)?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("invalid uniform support [{lo}, {hi}]")));
        }
        Ok(Self {
            intensity,
            law: JumpLaw::Uniform { lo, hi },
        })
    }

    /// Single atom: every jump has size `location` (a Poisson process for `location = 1`).
    pub fn atom(intensity: f64, location: f64) -> Result<Self> {
        Self::atoms(intensity, &[(location, 1.0)])
    }

    /// Discrete law given as `(location, probability)` pairs.
    pub fn atoms(intensity: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        Self::check_intensity(intensity)?;
        if atoms.is_empty() {
            return Err(Error::config("atom list is empty"));
        }
        if atoms
            .iter()
            .any(|(x, p)| !(x.is_finite() && p.is_finite() && *p > 0.0))
        {
            return Err(Error::config("atoms need finite locations and positive masses"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "atom probabilities must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            intensity,
            law: JumpLaw::Atoms(
                atoms
                    .iter()
                    .map(|&(location, probability)| Atom {
                        location,
                        probability: probability / total,
                    })
                    .collect(),
            ),
        })
    }

    /// General density on a finite union of intervals.
    ///
    /// The density is trusted to be positive on the declared support; it is
    /// spot-checked at 100 points and its normalization is verified.
    pub fn density(
        intensity: f64,
        support: Vec<(f64, f64)>,
        pdf: DensityFn,
        bound: f64,
    ) -> Result<Self> {
        Self::check_intensity(intensity)?;
        if support.is_empty()
            || support
                .iter()
                .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::config("density support must be nonempty bounded intervals"));
        }
        let support = merge_intervals(support);
        let total_len: f64 = support.iter().map(|(a, b)| b - a).sum();
        for i in 0..100 {
            // interior points, spread over the union proportionally to length
            let mut s = (i as f64 + 0.5) / 100.0 * total_len;
            for &(a, b) in &support {
                if s <= b - a {
                    let value = pdf(a + s);
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(Error::config(format!(
                            "density not positive at {} inside its declared support",
                            a + s
                        )));
                    }
                    if value > bound {
                        return Err(Error::config(format!(
                            "density exceeds its declared bound {bound} at {}",
                            a + s
                        )));
                    }
                    break;
                }
                s -= b - a;
            }
        }
        let mass: f64 = support
            .iter()
            .map(|&(a, b)| quad::integrate(|x| pdf(x), a, b, 1e-12))
            .sum::<Result<f64>>()?;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("density integrates to {mass}, expected 1")));
        }
        Ok(Self {
            intensity,
            law: JumpLaw::Density { support, pdf, bound },
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    /// Closed support as merged intervals; empty for purely atomic laws.
    pub fn support_intervals(&self) -> Vec<(f64, f64)> {
        match &self.law {
            JumpLaw::Uniform { lo, hi } => vec![(*lo, *hi)],
            JumpLaw::Atoms(_) => Vec::new(),
            JumpLaw::Density { support, .. } => support.clone(),
        }
    }

    /// Smallest and largest point of the support.
    pub fn support_hull(&self) -> (f64, f64) {
        match &self.law {
            JumpLaw::Atoms(atoms) => atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, a| {
                (acc.0.min(a.location), acc.1.max(a.location))
            }),
            _ => {
                let iv = self.support_intervals();
                (iv[0].0, iv[iv.len() - 1].1)
            }
        }
    }

    /// True if the support contains `[0, eps]` or `[-eps, 0]` for some `eps >= eps_min`.
    pub fn has_small_jumps(&self, eps_min: f64) -> bool {
        self.support_intervals()
            .iter()
            .any(|&(a, b)| (a <= 0.0 && b >= eps_min) || (a <= -eps_min && b >= 0.0))
    }

    /// `n` jump sizes spanning the support (the atom set for atomic laws).
    pub fn support_grid(&self, n: usize) -> Vec<f64> {
        match &self.law {
            JumpLaw::Atoms(atoms) => atoms.iter().map(|a| a.location).collect(),
            _ => {
                let iv = self.support_intervals();
                let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
                let n = n.max(2);
                (0..n)
                    .map(|i| {
                        let mut s = total * i as f64 / (n - 1) as f64;
                        for &(a, b) in &iv {
                            if s <= b - a + 1e-15 {
                                return (a + s).min(b);
                            }
                            s -= b - a;
                        }
                        iv[iv.len() - 1].1
                    })
                    .collect()
            }
        }
    }

    /// `int g dF`, by closed form for atoms and adaptive quadrature otherwise.
    pub fn integrate(&self, g: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
        let raw = match &self.law {
            JumpLaw::Atoms(atoms) => atoms.iter().map(|a| a.probability * g(a.location)).sum(),
            JumpLaw::Uniform { lo, hi } => {
                let density = 1.0 / (hi - lo);
                density * quad::integrate_with_breaks(&g, *lo, *hi, breaks, QUAD_TOL)?
            }
            JumpLaw::Density { support, pdf, .. } => support
                .iter()
                .map(|&(a, b)| quad::integrate_with_breaks(|x| g(x) * pdf(x), a, b, breaks, QUAD_TOL))
                .sum::<Result<f64>>()?,
        };
        Ok(self.intensity * raw)
    }

    /// Mean jump size under the normalized law.
    pub fn mean_jump(&self) -> f64 {
        match &self.law {
            JumpLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            _ => self.integrate(|x| x, &[]).expect("bounded support") / self.intensity,
        }
    }

    /// `int x^2 F(dx)`: the variance rate of the compensated process.
    pub fn second_moment(&self) -> f64 {
        self.integrate(|x| x * x, &[]).expect("bounded support")
    }

    /// Drift per unit time that turns the compound Poisson process into a martingale.
    pub fn compensator_rate(&self) -> f64 {
        -self.intensity * self.mean_jump()
    }

    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            JumpLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            JumpLaw::Atoms(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.probability;
                    if u < acc {
                        return a.location;
                    }
                }
                atoms[atoms.len() - 1].location
            }
            JumpLaw::Density { support, pdf, bound } => {
                let total: f64 = support.iter().map(|(a, b)| b - a).sum();
                loop {
                    let mut s = total * rng.random::<f64>();
                    let mut x = support[support.len() - 1].1;
                    for &(a, b) in support {
                        if s < b - a {
                            x = a + s;
                            break;
                        }
                        s -= b - a;
                    }
                    if rng.random::<f64>() * bound <= pdf(x) {
                        return x;
                    }
                }
            }
        }
    }
}

/// `int (|x|^2 v |x|^4) F(dx)`, the integrability condition on each jump coordinate.
pub fn moment_check(spec: &JumpMeasureSpec) -> Result<f64> {
    let value = spec.integrate(|x| (x * x).max(x.powi(4)), &[-1.0, 1.0])?;
    if !value.is_finite() {
        return Err(Error::numeric("moment integral is not finite"));
    }
    Ok(value)
}

/// Wiener coordinates plus independent compensated jump coordinates.
#[derive(Clone, Debug)]
pub struct LevyDriver {
    wiener_dim: usize,
    jumps: Vec<JumpMeasureSpec>,
    include_wiener_in_x: bool,
}

/// Single jump of one coordinate (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
    pub coordinate: usize,
}

/// One realization of the driving noise on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverPath {
    /// `0 = t_0 < ... < t_M = T`.
    pub time_grid: Vec<f64>,
    /// `wiener_increments[i][j]` is the increment of `W^j` over `[t_i, t_{i+1}]`.
    pub wiener_increments: Vec<Vec<f64>>,
    /// Per jump coordinate, events sorted by time.
    pub jumps: Vec<Vec<JumpEvent>>,
    /// Per jump coordinate, compensator drift per unit time (`-lambda E[x]`).
    pub compensator_drift: Vec<f64>,
}

/// Mixes a base seed with an index to get an independent substream seed.
/// The rule is SplitMix64 applied to `seed ^ splitmix(index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(index))
}

/// Regular grid `0, dt, 2 dt, ...` ending exactly at `horizon`.
pub fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::config(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= horizon) {
        return Err(Error::config(format!("need 0 < dt <= T, got dt = {dt}, T = {horizon}")));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * dt).min(horizon)).collect();
    grid[steps] = horizon;
    Ok(grid)
}

impl LevyDriver {
    pub fn new(
        wiener_dim: usize,
        jumps: Vec<JumpMeasureSpec>,
        include_wiener_in_x: bool,
    ) -> Result<Self> {
        if jumps.is_empty() {
            return Err(Error::config("driver needs at least one jump coordinate"));
        }
        if include_wiener_in_x && wiener_dim == 0 {
            return Err(Error::config("include_wiener_in_x requires a Wiener coordinate"));
        }
        Ok(Self {
            wiener_dim,
            jumps,
            include_wiener_in_x,
        })
    }

    pub fn wiener_dim(&self) -> usize {
        self.wiener_dim
    }

    pub fn jump_dim(&self) -> usize {
        self.jumps.len()
    }

    pub fn jump_specs(&self) -> &[JumpMeasureSpec] {
        &self.jumps
    }

    pub fn include_wiener_in_x(&self) -> bool {
        self.include_wiener_in_x
    }

    /// 0-based indices of the coordinates with small jumps.
    pub fn small_jump_indices(&self, eps_min: f64) -> BTreeSet<usize> {
        self.jumps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.has_small_jumps(eps_min))
            .map(|(k, _)| k)
            .collect()
    }

    fn scalar_spec(&self) -> Result<&JumpMeasureSpec> {
        if self.jumps.len() != 1 {
            return Err(Error::config(format!(
                "cumulant is defined for one-dimensional drivers, this one has q = {}",
                self.jumps.len()
            )));
        }
        Ok(&self.jumps[0])
    }

    fn wiener_weight(&self) -> f64 {
        if self.include_wiener_in_x {
            1.0
        } else {
            0.0
        }
    }

    /// `Psi(z) = z^2/2 [W in X] + int (e^{zx} - 1 - zx) F(dx)`.
    pub fn cumulant(&self, z: f64) -> Result<f64> {
        let spec = self.scalar_spec()?;
        Ok(0.5 * z * z * self.wiener_weight() + spec.integrate(|x| exp_m1_minus_x(z * x), &[])?)
    }

    /// `Psi'(z) = z [W in X] + int x (e^{zx} - 1) F(dx)`; vanishes at `z = 0`.
    pub fn cumulant_prime(&self, z: f64) -> Result<f64> {
        let spec = self.scalar_spec()?;
        Ok(z * self.wiener_weight() + spec.integrate(|x| x * (z * x).exp_m1(), &[])?)
    }

    /// Samples the noise exactly: Gaussian increments on the grid and
    /// compound-Poisson jumps at continuous times. Coordinate `j` draws from
    /// ChaCha stream `j` (Wiener coordinates first), so coordinates are
    /// independent and the jump part does not depend on `dt`.
    pub fn sample_path(&self, horizon: f64, dt: f64, seed: u64) -> Result<DriverPath> {
        let time_grid = time_grid(horizon, dt)?;
        let steps = time_grid.len() - 1;
        let mut wiener_increments = vec![vec![0.0; self.wiener_dim]; steps];
        for j in 0..self.wiener_dim {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            for (i, row) in wiener_increments.iter_mut().enumerate() {
                let h = time_grid[i + 1] - time_grid[i];
                let z: f64 = StandardNormal.sample(&mut rng);
                row[j] = z * h.sqrt();
            }
        }
        let mut jumps = Vec::with_capacity(self.jumps.len());
        for (k, spec) in self.jumps.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((self.wiener_dim + k) as u64);
            let poisson = Poisson::new(spec.intensity * horizon)
                .map_err(|e| Error::config(format!("poisson rate: {e}")))?;
            let count = poisson.sample(&mut rng) as usize;
            let mut events: Vec<JumpEvent> = (0..count)
                .map(|_| {
                    // uniform on (0, T]
                    let time = horizon * (1.0 - rng.random::<f64>());
                    JumpEvent {
                        time,
                        size: 0.0,
                        coordinate: k,
                    }
                })
                .collect();
            events.sort_by(|a, b| a.time.total_cmp(&b.time));
            for e in events.iter_mut() {
                e.size = spec.sample_size(&mut rng);
            }
            jumps.push(events);
        }
        Ok(DriverPath {
            time_grid,
            wiener_increments,
            jumps,
            compensator_drift: self.jumps.iter().map(|s| s.compensator_rate()).collect(),
        })
    }
}

impl DriverPath {
    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().expect("nonempty grid")
    }

    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    /// `X^k_T`: jumps minus compensator.
    pub fn jump_terminal(&self, k: usize) -> f64 {
        self.jumps[k].iter().map(|e| e.size).sum::<f64>() + self.compensator_drift[k] * self.horizon()
    }

    pub fn wiener_terminal(&self, j: usize) -> f64 {
        self.wiener_increments.iter().map(|row| row[j]).sum()
    }

    /// All jump events of all coordinates in time order (ties by coordinate).
    pub fn merged_jumps(&self) -> Vec<JumpEvent> {
        let mut all: Vec<JumpEvent> = self.jumps.iter().flatten().copied().collect();
        all.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.coordinate.cmp(&b.coordinate)));
        all
    }

    /// Same noise on a coarser grid whose nodes are nodes of this one.
    /// Wiener increments are summed; jumps are untouched.
    pub fn coarsen(&self, dt: f64) -> Result<DriverPath> {
        let horizon = self.horizon();
        let coarse = time_grid(horizon, dt)?;
        let fine = &self.time_grid;
        let scale = 1e-9 * horizon.max(1.0);
        let mut index = Vec::with_capacity(coarse.len());
        let mut cursor = 0;
        for &t in &coarse {
            while cursor < fine.len() && fine[cursor] < t - scale {
                cursor += 1;
            }
            if cursor == fine.len() || (fine[cursor] - t).abs() > scale {
                return Err(Error::config(format!(
                    "coarse node {t} is not a node of the fine grid"
                )));
            }
            index.push(cursor);
        }
        let p = self.wiener_increments.first().map_or(0, |r| r.len());
        let wiener_increments = index
            .windows(2)
            .map(|w| {
                let mut acc = vec![0.0; p];
                for row in &self.wiener_increments[w[0]..w[1]] {
                    for (a, x) in acc.iter_mut().zip(row) {
                        *a += x;
                    }
                }
                acc
            })
            .collect();
        Ok(DriverPath {
            time_grid: coarse,
            wiener_increments,
            jumps: self.jumps.clone(),
            compensator_drift: self.compensator_drift.clone(),
        })
    }
}
