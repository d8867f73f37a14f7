//! Mild solutions of `dr = (A r + alpha(r)) dt + sigma(r) dW + gamma(r-) dX`
//! by exponential Euler with exact jump insertion.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{GridSpace, HVector};
use crate::interp::MonotoneCubic;
use crate::levy::{derive_seed, DriverPath, LevyDriver};

/// Times at which the pseudo-contraction constant is measured.
pub const BETA_SAMPLE_TIMES: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Clone, Debug)]
pub enum SemigroupKind {
    Identity,
    /// `S_t = exp(t A_h)` for a discretized generator acting on grid values.
    MatrixGenerator(DMatrix<f64>),
    /// `(S_t v)(xi) = v(xi + t)`, interpolated monotonically with constant
    /// extension beyond the last node.
    ShiftInterpolating,
}

/// Most matrix exponentials kept per semigroup; regular steps hit the cache,
/// jump-split sub-steps mostly do not.
const EXP_CACHE_LIMIT: usize = 256;

/// Discretized `C_0`-semigroup with its measured growth bound `beta`.
#[derive(Clone, Debug)]
pub struct Semigroup {
    space: GridSpace,
    kind: SemigroupKind,
    beta: f64,
    exp_cache: Arc<RwLock<HashMap<u64, Arc<DMatrix<f64>>>>>,
}

impl Semigroup {
    pub fn identity(space: &GridSpace) -> Self {
        Self {
            space: space.clone(),
            kind: SemigroupKind::Identity,
            beta: 0.0,
            exp_cache: Arc::default(),
        }
    }

    pub fn matrix_generator(space: &GridSpace, generator: DMatrix<f64>) -> Result<Self> {
        let n = space.dim();
        if generator.nrows() != n || generator.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: generator.nrows().max(generator.ncols()),
            });
        }
        if generator.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("generator has non-finite entries"));
        }
        Self::measured(space, SemigroupKind::MatrixGenerator(generator))
    }

    /// Shift on the grid points, which must be strictly increasing.
    pub fn shift(space: &GridSpace) -> Result<Self> {
        if space.dim() < 2 || space.points().windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "shift semigroup needs at least two strictly increasing points".into(),
            ));
        }
        Self::measured(space, SemigroupKind::ShiftInterpolating)
    }

    fn measured(space: &GridSpace, kind: SemigroupKind) -> Result<Self> {
        let mut sg = Self {
            space: space.clone(),
            kind,
            beta: 0.0,
            exp_cache: Arc::default(),
        };
        let mut beta = f64::NEG_INFINITY;
        for t in BETA_SAMPLE_TIMES {
            beta = beta.max(sg.operator_norm(t)?.ln() / t);
        }
        sg.beta = beta;
        Ok(sg)
    }

    pub fn kind(&self) -> &SemigroupKind {
        &self.kind
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    /// Smallest `beta` with `||S_t|| <= e^{beta t}` at the sampled times.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn exponential(&self, a: &DMatrix<f64>, t: f64) -> Arc<DMatrix<f64>> {
        let key = t.to_bits();
        if let Some(m) = self.exp_cache.read().expect("cache lock").get(&key) {
            return Arc::clone(m);
        }
        let m = Arc::new((a * t).exp());
        let mut cache = self.exp_cache.write().expect("cache lock");
        if cache.len() < EXP_CACHE_LIMIT {
            cache.insert(key, Arc::clone(&m));
        }
        m
    }

    /// `S_t v`.
    pub fn apply(&self, t: f64, v: &HVector) -> Result<HVector> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::config(format!("semigroup time must be >= 0, got {t}")));
        }
        self.space.check(v)?;
        if t == 0.0 {
            return Ok(v.clone());
        }
        Ok(match &self.kind {
            SemigroupKind::Identity => v.clone(),
            SemigroupKind::MatrixGenerator(a) => self.exponential(a, t).as_ref() * v,
            SemigroupKind::ShiftInterpolating => {
                let p = MonotoneCubic::new(self.space.points(), v.as_slice());
                HVector::from_iterator(v.len(), self.space.points().iter().map(|&x| p.value(x + t)))
            }
        })
    }

    /// Matrix of `S_t` acting on grid values.
    pub fn matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        let n = self.space.dim();
        match &self.kind {
            SemigroupKind::MatrixGenerator(a) if t >= 0.0 => Ok(self.exponential(a, t).as_ref().clone()),
            _ => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = HVector::zeros(n);
                    e[j] = 1.0;
                    m.set_column(j, &self.apply(t, &e)?);
                }
                Ok(m)
            }
        }
    }

    /// Operator norm of `S_t` in the weighted norm.
    pub fn operator_norm(&self, t: f64) -> Result<f64> {
        let w = self.space.weights();
        let mut m = self.matrix(t)?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= (w[i] / w[j]).sqrt();
            }
        }
        Ok(m.singular_values().max())
    }

    /// `max ||S_{t+s} v - S_t S_s v|| / ||v||` over the given vectors.
    pub fn law_defect(&self, t: f64, s: f64, vectors: &[HVector]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for v in vectors {
            let direct = self.apply(t + s, v)?;
            let composed = self.apply(t, &self.apply(s, v)?)?;
            let scale = self.space.norm(v).max(f64::MIN_POSITIVE);
            worst = worst.max(self.space.distance(&direct, &composed) / scale);
        }
        Ok(worst)
    }
}

/// `S_t v`.
pub fn apply_semigroup(s: &Semigroup, t: f64, v: &HVector) -> Result<HVector> {
    s.apply(t, v)
}

pub type VectorField = Arc<dyn Fn(&HVector) -> HVector + Send + Sync>;

/// Wraps a closure as a shareable vector field.
pub fn field(f: impl Fn(&HVector) -> HVector + Send + Sync + 'static) -> VectorField {
    Arc::new(f)
}

/// Constant vector field.
pub fn constant_field(value: HVector) -> VectorField {
    Arc::new(move |_| value.clone())
}

#[derive(Clone)]
pub struct Coefficients {
    pub alpha: VectorField,
    pub sigma: Vec<VectorField>,
    pub gamma: Vec<VectorField>,
    pub lipschitz_hint: Option<f64>,
}

impl std::fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coefficients")
            .field("p", &self.sigma.len())
            .field("q", &self.gamma.len())
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish()
    }
}

/// `sum_k x_k gamma^k(h)`.
pub fn jump_coefficient(coeffs: &Coefficients, h: &HVector, x: &[f64]) -> Result<HVector> {
    if x.len() != coeffs.gamma.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.gamma.len(),
            found: x.len(),
        });
    }
    let mut out = HVector::zeros(h.len());
    for (g, &xk) in coeffs.gamma.iter().zip(x) {
        if xk != 0.0 {
            out.axpy(xk, &g(h), 1.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SpdeProblem {
    pub space: GridSpace,
    pub semigroup: Semigroup,
    pub coefficients: Coefficients,
    pub driver: LevyDriver,
}

impl SpdeProblem {
    pub fn new(
        space: GridSpace,
        semigroup: Semigroup,
        coefficients: Coefficients,
        driver: LevyDriver,
    ) -> Result<Self> {
        if coefficients.sigma.len() != driver.wiener_dim() {
            return Err(Error::config(format!(
                "{} diffusion coefficients for a driver with p = {}",
                coefficients.sigma.len(),
                driver.wiener_dim()
            )));
        }
        if coefficients.gamma.len() != driver.jump_dim() {
            return Err(Error::config(format!(
                "{} jump coefficients for a driver with q = {}",
                coefficients.gamma.len(),
                driver.jump_dim()
            )));
        }
        if semigroup.space().dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: semigroup.space().dim(),
            });
        }
        Ok(Self {
            space,
            semigroup,
            coefficients,
            driver,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateFlag {
    Step,
    Pre,
    Post,
}

impl StateFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            StateFlag::Step => "step",
            StateFlag::Pre => "pre",
            StateFlag::Post => "post",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub t: f64,
    pub flag: StateFlag,
    pub state: HVector,
}

/// Stored states: every grid node, plus pre- and post-jump states at jump times.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedPath {
    pub records: Vec<PathRecord>,
}

impl SimulatedPath {
    pub fn terminal(&self) -> &HVector {
        &self.records.last().expect("path has the initial state").state
    }
}

fn finite_or_err(v: HVector, what: &str, t: f64) -> Result<HVector> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Numeric {
            what: format!("{what} returned a non-finite value"),
            time: Some(t),
        })
    }
}

/// Drives the scheme along `path`, reporting each stored state to `observe`.
fn run_scheme(
    problem: &SpdeProblem,
    h0: &HVector,
    path: &DriverPath,
    mut observe: impl FnMut(f64, StateFlag, &HVector),
) -> Result<HVector> {
    problem.space.check(h0)?;
    let coeffs = &problem.coefficients;
    let events = path.merged_jumps();
    let grid = &path.time_grid;
    let mut r = h0.clone();
    let mut t = 0.0;
    let mut next_event = 0;
    observe(t, StateFlag::Step, &r);

    let step = |r: &HVector, from: f64, to: f64, dw: Option<&[f64]>| -> Result<HVector> {
        let dt = to - from;
        let mut incr = r.clone();
        incr.axpy(dt, &finite_or_err((coeffs.alpha)(r), "alpha", from)?, 1.0);
        if let Some(dw) = dw {
            for (s, &w) in coeffs.sigma.iter().zip(dw) {
                incr.axpy(w, &finite_or_err(s(r), "sigma", from)?, 1.0);
            }
        }
        for (g, &c) in coeffs.gamma.iter().zip(&path.compensator_drift) {
            if c != 0.0 {
                incr.axpy(c * dt, &finite_or_err(g(r), "gamma", from)?, 1.0);
            }
        }
        let out = problem.semigroup.apply(dt, &incr)?;
        finite_or_err(out, "semigroup step", to)
    };

    for i in 0..grid.len() - 1 {
        let end = grid[i + 1];
        let mut dw = path.wiener_increments.get(i).map(|v| v.as_slice());
        while next_event < events.len() && events[next_event].time <= end {
            let e = events[next_event];
            if e.time > t {
                r = step(&r, t, e.time, dw.take())?;
                t = e.time;
                if t == end {
                    observe(t, StateFlag::Step, &r);
                }
            }
            observe(t, StateFlag::Pre, &r);
            let g = finite_or_err((coeffs.gamma[e.coordinate])(&r), "gamma", t)?;
            r.axpy(e.size, &g, 1.0);
            observe(t, StateFlag::Post, &r);
            next_event += 1;
        }
        if end > t {
            r = step(&r, t, end, dw.take())?;
            t = end;
            observe(t, StateFlag::Step, &r);
        }
    }
    Ok(r)
}

/// Simulates one path with noise drawn from `seed`.
pub fn simulate_mild(
    problem: &SpdeProblem,
    h0: &HVector,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<SimulatedPath> {
    let noise = problem.driver.sample_path(horizon, dt, seed)?;
    simulate_with_noise(problem, h0, &noise)
}

/// Simulates along a given noise realization.
pub fn simulate_with_noise(
    problem: &SpdeProblem,
    h0: &HVector,
    noise: &DriverPath,
) -> Result<SimulatedPath> {
    let mut records = Vec::with_capacity(noise.time_grid.len() + 2 * noise.jumps.iter().map(Vec::len).sum::<usize>());
    run_scheme(problem, h0, noise, |t, flag, state| {
        records.push(PathRecord {
            t,
            flag,
            state: state.clone(),
        })
    })?;
    Ok(SimulatedPath { records })
}

/// Terminal state only, without storing the path.
pub fn simulate_terminal(problem: &SpdeProblem, h0: &HVector, noise: &DriverPath) -> Result<HVector> {
    run_scheme(problem, h0, noise, |_, _, _| {})
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Least-squares slope of `log error` against `log dt`; `None` when skipped.
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    /// `(dt, mean strong error)` per step size.
    pub errors: Vec<(f64, f64)>,
    /// True when every error is at rounding level, so no slope exists.
    pub skipped: bool,
}

/// Strong-error order from coupled simulations: each path's noise is drawn
/// once on the reference grid and summed onto coarser grids.
pub fn convergence_order(
    problem: &SpdeProblem,
    h0: &HVector,
    horizon: f64,
    dt_list: &[f64],
    n_paths: usize,
    seed: u64,
    reference_dt: f64,
) -> Result<ConvergenceReport> {
    if dt_list.len() < 2 {
        return Err(Error::config("convergence order needs at least two step sizes"));
    }
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("dt_list must be strictly descending"));
    }
    if reference_dt >= dt_list[dt_list.len() - 1] {
        return Err(Error::config("reference_dt must be smaller than every dt"));
    }
    if n_paths == 0 {
        return Err(Error::config("n_paths must be positive"));
    }
    let per_path: Vec<(Vec<f64>, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64)> {
            let noise = problem.driver.sample_path(horizon, reference_dt, derive_seed(seed, i as u64))?;
            let reference = simulate_terminal(problem, h0, &noise)?;
            let errs = dt_list
                .iter()
                .map(|&dt| {
                    let coarse = noise.coarsen(dt)?;
                    let approx = simulate_terminal(problem, h0, &coarse)?;
                    Ok(problem.space.distance(&approx, &reference))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((errs, problem.space.norm(&reference)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = vec![0.0; dt_list.len()];
    let mut scale = 0.0;
    for (errs, norm) in &per_path {
        for (m, e) in mean.iter_mut().zip(errs) {
            *m += e;
        }
        scale += norm;
    }
    let n = n_paths as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    scale /= n;
    let errors: Vec<(f64, f64)> = dt_list.iter().copied().zip(mean.iter().copied()).collect();

    if mean.iter().all(|&e| e <= 1e-12 * (1.0 + scale)) {
        return Ok(ConvergenceReport {
            slope: None,
            r_squared: None,
            errors,
            skipped: true,
        });
    }
    if mean.iter().any(|&e| e <= 0.0) {
        return Err(Error::numeric("zero error at some step size; slope undefined"));
    }
    let xs: Vec<f64> = dt_list.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = mean.iter().map(|e| e.ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    Ok(ConvergenceReport {
        slope: Some(slope),
        r_squared: Some(r2),
        errors,
        skipped: false,
    })
}

/// Least-squares slope and coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}
