//! Finite-dimensional submanifolds given by explicit parametrizations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    intersect, max_principal_angle, orthonormalize_columns, rejection_spectrum, GridSpace,
    HVector, Subspace, DEFAULT_RANK_TOL,
};
use crate::levy::derive_seed;

pub type ChartMap = Arc<dyn Fn(&[f64]) -> HVector + Send + Sync>;
pub type ChartJacobian = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

const DEFAULT_FD_STEP: f64 = 1e-6;
const DEFAULT_LATTICE: usize = 11;

/// Parametrization `phi: V -> H` on an axis-aligned box `V`.
#[derive(Clone)]
pub struct ManifoldChart {
    lower: Vec<f64>,
    upper: Vec<f64>,
    map: ChartMap,
    jacobian: Option<ChartJacobian>,
    fd_step: f64,
    lattice: Vec<usize>,
}

impl std::fmt::Debug for ManifoldChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManifoldChart")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl ManifoldChart {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        map: impl Fn(&[f64]) -> HVector + Send + Sync + 'static,
    ) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::config("chart box needs matching, nonempty bounds"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::config("chart box bounds must be finite with lower < upper"));
        }
        let m = lower.len();
        Ok(Self {
            lower,
            upper,
            map: Arc::new(map),
            jacobian: None,
            fd_step: DEFAULT_FD_STEP,
            lattice: vec![DEFAULT_LATTICE; m],
        })
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::config(format!("fd_step must be positive, got {step}")));
        }
        self.fd_step = step;
        Ok(self)
    }

    /// Nodes per axis of the start lattice used when projection from the
    /// supplied hints is not good enough.
    pub fn with_search_lattice(mut self, per_axis: Vec<usize>) -> Result<Self> {
        if per_axis.len() != self.dim() || per_axis.iter().any(|&k| k < 2) {
            return Err(Error::config("search lattice needs >= 2 nodes on every axis"));
        }
        self.lattice = per_axis;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    fn clamp(&self, y: &mut [f64]) {
        for (v, (a, b)) in y.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*a, *b);
        }
    }

    pub fn eval(&self, y: &[f64]) -> HVector {
        (self.map)(y)
    }

    /// Central finite-difference Jacobian.
    pub fn fd_jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let cols: Vec<HVector> = (0..self.dim())
            .map(|i| {
                let mut plus = y.to_vec();
                let mut minus = y.to_vec();
                plus[i] += self.fd_step;
                minus[i] -= self.fd_step;
                (self.eval(&plus) - self.eval(&minus)) / (2.0 * self.fd_step)
            })
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Analytic Jacobian if supplied, finite differences otherwise.
    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(y),
            None => self.fd_jacobian(y),
        }
    }

    /// Max relative Frobenius distance between analytic and finite-difference
    /// Jacobians at `n_points` uniform points of the box; `None` without an
    /// analytic Jacobian.
    pub fn jacobian_check(&self, n_points: usize, seed: u64) -> Option<f64> {
        let analytic = self.jacobian.as_ref()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n_points {
            let y: Vec<f64> = self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect();
            let ja = analytic(&y);
            let jf = self.fd_jacobian(&y);
            worst = worst.max((&ja - &jf).norm() / ja.norm().max(f64::MIN_POSITIVE));
        }
        Some(worst)
    }

    fn lattice_points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for (axis, &k) in self.lattice.iter().enumerate() {
            let (a, b) = (self.lower[axis], self.upper[axis]);
            points = points
                .into_iter()
                .flat_map(|p| {
                    (0..k).map(move |i| {
                        let mut q = p.clone();
                        q.push(a + (b - a) * i as f64 / (k - 1) as f64);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// A point of the manifold given by chart index and coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePoint {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl SamplePoint {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        Self { chart, coords }
    }
}

/// `m`-dimensional submanifold of a grid space, covered by finitely many charts.
///
/// Closedness in `H` cannot be checked numerically and is carried as declared
/// metadata.
#[derive(Clone, Debug)]
pub struct Manifold {
    space: GridSpace,
    charts: Vec<ManifoldChart>,
    dim: usize,
    smoothness: u32,
    closed: bool,
}

impl Manifold {
    pub fn new(space: &GridSpace, charts: Vec<ManifoldChart>, smoothness: u32) -> Result<Self> {
        let first = charts
            .first()
            .ok_or_else(|| Error::config("manifold needs at least one chart"))?;
        let m = first.dim();
        if m > space.dim() {
            return Err(Error::config(format!(
                "manifold dimension {m} exceeds ambient dimension {}",
                space.dim()
            )));
        }
        if smoothness == 0 {
            return Err(Error::config("smoothness class must be at least 1"));
        }
        for c in &charts {
            if c.dim() != m {
                return Err(Error::config("all charts must share the manifold dimension"));
            }
            let centre: Vec<f64> = c.lower.iter().zip(&c.upper).map(|(a, b)| 0.5 * (a + b)).collect();
            space.check(&c.eval(&centre))?;
        }
        Ok(Self {
            space: space.clone(),
            charts,
            dim: m,
            smoothness,
            closed: true,
        })
    }

    pub fn with_closed(mut self, closed: bool) -> Self {
        self.closed = closed;
        self
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    pub fn charts(&self) -> &[ManifoldChart] {
        &self.charts
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn declared_closed(&self) -> bool {
        self.closed
    }

    fn chart_for(&self, p: &SamplePoint) -> Result<&ManifoldChart> {
        let chart = self
            .charts
            .get(p.chart)
            .ok_or_else(|| Error::config(format!("no chart with index {}", p.chart)))?;
        if p.coords.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: p.coords.len(),
            });
        }
        if !chart.contains(&p.coords) {
            return Err(Error::DomainExit {
                coords: p.coords.clone(),
            });
        }
        Ok(chart)
    }

    pub fn point(&self, p: &SamplePoint) -> Result<HVector> {
        Ok(self.chart_for(p)?.eval(&p.coords))
    }

    /// Tangent space: orthonormalized columns of the chart Jacobian.
    pub fn tangent_at(&self, p: &SamplePoint) -> Result<Subspace> {
        let chart = self.chart_for(p)?;
        let (tangent, _) = orthonormalize_columns(&self.space, &chart.jacobian(&p.coords), DEFAULT_RANK_TOL)?;
        if tangent.dim() < self.dim {
            return Err(Error::DegenerateChart {
                coords: p.coords.clone(),
                rank: tangent.dim(),
                dim: self.dim,
            });
        }
        Ok(tangent)
    }
}

/// `T_y M` for the given chart coordinates.
pub fn tangent_at(m: &Manifold, p: &SamplePoint) -> Result<Subspace> {
    m.tangent_at(p)
}

/// Stopping contract for the Gauss–Newton projection.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussNewton {
    pub max_iterations: usize,
    /// Convergence when `||D phi^T W (phi - h)|| < gradient_tol * (1 + ||h||)`.
    pub gradient_tol: f64,
    /// ... and the residual a full step would still remove, `||J delta||`, is
    /// below `residual_tol * (1 + ||h||) + 1e-6 * ||phi - h||`; off the
    /// manifold such a step changes the distance by under `1e-12` relative.
    pub residual_tol: f64,
    pub max_halvings: usize,
    /// Gradient level accepted once no step can reduce the residual in
    /// floating point.
    pub stall_tol: f64,
}

impl Default for GaussNewton {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tol: 1e-10,
            residual_tol: 1e-13,
            max_halvings: 60,
            stall_tol: 1e-7,
        }
    }
}

/// Result of projecting a vector onto the manifold.
#[derive(Clone, Debug)]
pub struct Projection {
    pub chart: usize,
    pub coords: Vec<f64>,
    pub point: HVector,
    pub distance: f64,
    pub iterations: usize,
}

impl Projection {
    pub fn sample_point(&self) -> SamplePoint {
        SamplePoint::new(self.chart, self.coords.clone())
    }
}

fn gauss_newton(
    space: &GridSpace,
    chart: &ManifoldChart,
    chart_index: usize,
    h: &HVector,
    start: &[f64],
    opts: &GaussNewton,
) -> Result<Projection> {
    if !chart.contains(start) {
        return Err(Error::DomainExit {
            coords: start.to_vec(),
        });
    }
    let sqrt_w = DVector::from_iterator(h.len(), space.weights().iter().map(|w| w.sqrt()));
    let scale = 1.0 + space.norm(h);
    let m = chart.dim();
    let mut y = start.to_vec();
    let mut r = (chart.eval(&y) - h).component_mul(&sqrt_w);
    let mut f = r.norm_squared();
    let mut last_gradient = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let mut jac = chart.jacobian(&y);
        for (i, s) in sqrt_w.iter().enumerate() {
            jac.row_mut(i).scale_mut(*s);
        }
        let g = jac.tr_mul(&r);
        // components pushing out of the box at an active bound do not count
        let projected: f64 = (0..m)
            .map(|i| {
                let blocked = (y[i] <= chart.lower[i] && g[i] > 0.0) || (y[i] >= chart.upper[i] && g[i] < 0.0);
                if blocked {
                    0.0
                } else {
                    g[i] * g[i]
                }
            })
            .sum::<f64>()
            .sqrt();
        last_gradient = projected;
        let done = |y: Vec<f64>, r: &DVector<f64>| -> Result<Projection> {
            if g.norm() >= opts.stall_tol * scale {
                return Err(Error::DomainExit { coords: y });
            }
            let point = chart.eval(&y);
            Ok(Projection {
                chart: chart_index,
                coords: y,
                point,
                distance: r.norm(),
                iterations: it,
            })
        };
        let small = projected < opts.gradient_tol * scale;
        let svd = jac.clone().svd(true, true);
        let eps = 1e-14 * svd.singular_values.max();
        let delta = svd
            .solve(&(-&r), eps)
            .map_err(|e| Error::numeric(format!("Gauss-Newton step: {e}")))?;
        // a small gradient with an ill-conditioned Jacobian can still leave a
        // reducible residual `|J delta|`
        if small && (&jac * &delta).norm() < opts.residual_tol * scale + 1e-6 * r.norm() {
            return done(y, &r);
        }
        // halve until the residual decreases, then keep halving while it
        // still improves (large-residual problems overshoot symmetrically)
        let base = y.clone();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let mut trial: Vec<f64> = base.iter().zip(delta.iter()).map(|(a, d)| a + step * d).collect();
            chart.clamp(&mut trial);
            let r_trial = (chart.eval(&trial) - h).component_mul(&sqrt_w);
            let f_trial = r_trial.norm_squared();
            if f_trial < f {
                y = trial;
                r = r_trial;
                f = f_trial;
                accepted = true;
            } else if accepted {
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if small || projected < opts.stall_tol * scale {
                return done(y, &r);
            }
            return Err(Error::NoConvergence {
                iterations: it,
                gradient_norm: projected,
                last: y,
            });
        }
    }
    if last_gradient < opts.gradient_tol * scale {
        let point = chart.eval(&y);
        return Ok(Projection {
            chart: chart_index,
            distance: space.distance(&point, h),
            coords: y,
            point,
            iterations: opts.max_iterations,
        });
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        gradient_norm: last_gradient,
        last: y,
    })
}

/// Gauss–Newton projection of `h` onto the chart of `start`, started at its
/// coordinates.
pub fn closest_point(m: &Manifold, h: &HVector, start: &SamplePoint) -> Result<Projection> {
    closest_point_with(m, h, start, &GaussNewton::default())
}

pub fn closest_point_with(
    m: &Manifold,
    h: &HVector,
    start: &SamplePoint,
    opts: &GaussNewton,
) -> Result<Projection> {
    m.space.check(h)?;
    let chart = m
        .charts
        .get(start.chart)
        .ok_or_else(|| Error::config(format!("no chart with index {}", start.chart)))?;
    gauss_newton(&m.space, chart, start.chart, h, &start.coords, opts)
}

/// Distance from `h` to the manifold.
///
/// Projects from each hint in order, stopping at the first within `accept`;
/// if none lands within it, restarts from the best nodes of every chart's
/// search lattice and keeps the smallest distance.
pub fn distance_to_manifold(
    m: &Manifold,
    h: &HVector,
    hints: &[SamplePoint],
    accept: f64,
) -> Result<Projection> {
    m.space.check(h)?;
    let opts = GaussNewton::default();
    let mut best: Option<Projection> = None;
    let mut first_err: Option<Error> = None;
    let mut consider = |res: Result<Projection>, best: &mut Option<Projection>| match res {
        Ok(p) => {
            if best.as_ref().is_none_or(|b| p.distance < b.distance) {
                *best = Some(p);
            }
        }
        Err(e) => {
            first_err.get_or_insert(e);
        }
    };
    for hint in hints {
        consider(closest_point_with(m, h, hint, &opts), &mut best);
        if best.as_ref().is_some_and(|b| b.distance <= accept) {
            return Ok(best.expect("checked"));
        }
    }
    const STARTS_PER_CHART: usize = 4;
    for (ci, chart) in m.charts.iter().enumerate() {
        let mut scored: Vec<(f64, Vec<f64>)> = chart
            .lattice_points()
            .into_iter()
            .map(|y| (m.space.distance(&chart.eval(&y), h), y))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, y) in scored.into_iter().take(STARTS_PER_CHART) {
            consider(gauss_newton(&m.space, chart, ci, h, &y, &opts), &mut best);
        }
    }
    match best {
        Some(b) => Ok(b),
        None => Err(first_err.unwrap_or_else(|| Error::numeric("projection found no candidate"))),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatnessOptions {
    pub radius: f64,
    pub n_samples: usize,
    /// Sine-distance threshold for a direction to count as common.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FlatnessOptions {
    fn default() -> Self {
        Self {
            radius: 0.1,
            n_samples: 32,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Local flatness estimate at one base point.
#[derive(Clone, Debug)]
pub struct FlatnessReport {
    pub base: SamplePoint,
    pub base_point: HVector,
    pub flatness: usize,
    pub common_subspace: Subspace,
    pub samples_used: usize,
    pub radius: f64,
    pub tol: f64,
    pub seed: u64,
    /// Singular values, ascending, of the stacked rejections of `T_{y0} M`
    /// from the sampled tangent spaces (scaled into `[0, 1]`).
    pub spectrum: Vec<f64>,
    /// Smallest spectrum value above `tol` minus the largest at or below it
    /// (1 and 0 stand in for a missing side).
    pub singular_value_gap: f64,
}

/// Coordinates drawn uniformly from the ball around `y0`, restricted to the box.
pub(crate) fn ball_samples(chart: &ManifoldChart, y0: &[f64], radius: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = y0.len();
    (0..n)
        .map(|_| {
            let mut candidate = y0.to_vec();
            for _ in 0..1000 {
                let dir: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / m as f64);
                candidate = y0.iter().zip(&dir).map(|(a, d)| a + r * d / norm).collect();
                if chart.contains(&candidate) {
                    return candidate;
                }
            }
            chart.clamp(&mut candidate);
            candidate
        })
        .collect()
}

/// Largest subspace contained in `T_{y0} M` and in the tangent spaces at
/// `n_samples` points of the coordinate ball around `y0`.
///
/// Samples are drawn sequentially from one seeded stream, so a run with more
/// samples uses a superset of the points of a run with fewer.
pub fn flatness_at(m: &Manifold, base: &SamplePoint, opts: &FlatnessOptions) -> Result<FlatnessReport> {
    if !(opts.radius > 0.0) || opts.n_samples == 0 {
        return Err(Error::config("flatness needs radius > 0 and n_samples >= 1"));
    }
    let chart = m.chart_for(base)?;
    let base_tangent = m.tangent_at(base)?;
    let samples = ball_samples(chart, &base.coords, opts.radius, opts.n_samples, opts.seed);
    let others = samples
        .iter()
        .map(|y| m.tangent_at(&SamplePoint::new(base.chart, y.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut all = Vec::with_capacity(others.len() + 1);
    all.push(base_tangent.clone());
    all.extend(others.iter().cloned());
    let common = intersect(&all, opts.tol)?;
    let spectrum = rejection_spectrum(&base_tangent, &others)?;
    let below = spectrum.iter().copied().filter(|&s| s <= opts.tol).fold(0.0, f64::max);
    let above = spectrum
        .iter()
        .copied()
        .filter(|&s| s > opts.tol)
        .fold(1.0, f64::min);
    Ok(FlatnessReport {
        base: base.clone(),
        base_point: m.point(base)?,
        flatness: common.dim(),
        common_subspace: common,
        samples_used: samples.len(),
        radius: opts.radius,
        tol: opts.tol,
        seed: opts.seed,
        spectrum,
        singular_value_gap: above - below,
    })
}

#[derive(Clone, Debug)]
pub struct GlobalFlatness {
    pub flatness: usize,
    pub per_point: Vec<FlatnessReport>,
}

/// Minimum local flatness over a sample plan. Point `i` uses seed
/// `derive_seed(opts.seed, i)`.
pub fn flatness_global(m: &Manifold, plan: &[SamplePoint], opts: &FlatnessOptions) -> Result<GlobalFlatness> {
    if plan.is_empty() {
        return Err(Error::config("flatness_global needs a nonempty sample plan"));
    }
    let per_point = plan
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let local = FlatnessOptions {
                seed: derive_seed(opts.seed, i as u64),
                ..*opts
            };
            flatness_at(m, p, &local)
        })
        .collect::<Result<Vec<_>>>()?;
    let flatness = per_point.iter().map(|r| r.flatness).min().expect("nonempty");
    Ok(GlobalFlatness { flatness, per_point })
}

/// True iff every listed pair of reports has common subspaces of equal
/// dimension with max principal angle below `angle_tol`.
pub fn chain_consistency(reports: &[FlatnessReport], pairs: &[(usize, usize)], angle_tol: f64) -> Result<bool> {
    for &(i, j) in pairs {
        let (a, b) = match (reports.get(i), reports.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::config(format!("pair ({i}, {j}) out of range"))),
        };
        if a.flatness != b.flatness {
            return Ok(false);
        }
        if max_principal_angle(&a.common_subspace, &b.common_subspace)? >= angle_tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecomposeOptions {
    /// Largest coefficient, per basis direction of `L`, of the tested shifts.
    pub extent: f64,
    /// Shift lattice nodes per direction of `L` (including both ends).
    pub shifts_per_axis: usize,
    /// Projection distances at or below this skip the lattice search.
    pub accept: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            extent: 1.0,
            shifts_per_axis: 5,
            accept: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecomposeReport {
    /// `Pi_{L^perp} h` for each sampled `h`.
    pub n_points: Vec<HVector>,
    /// Per sample: max distance of `h + g` to `M` over the shift lattice.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Largest rejection of a basis vector of `L` from a sampled tangent space.
    pub tangency_residual: f64,
    /// Largest relative error of `P_L h + P_{L^perp} h = h`.
    pub roundtrip_residual: f64,
    /// Samples whose projections failed, with the error text.
    pub failures: Vec<(usize, String)>,
}

fn shift_lattice(d: usize, extent: f64, k: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if k < 2 {
        vec![extent]
    } else {
        (0..k).map(|i| -extent + 2.0 * extent * i as f64 / (k - 1) as f64).collect()
    };
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Tests `M + L = M` on sampled points and returns the `L^perp` parts.
pub fn decompose(m: &Manifold, l: &Subspace, plan: &[SamplePoint], opts: &DecomposeOptions) -> Result<DecomposeReport> {
    if plan.is_empty() {
        return Err(Error::config("decompose needs a nonempty sample plan"));
    }
    if l.space() != m.space() {
        return Err(Error::DimensionMismatch {
            expected: m.space().dim(),
            found: l.space().dim(),
        });
    }
    let l_perp = l.complement();
    let basis: Vec<HVector> = (0..l.dim()).map(|i| l.basis_vector(i)).collect();
    let shifts = shift_lattice(l.dim(), opts.extent, opts.shifts_per_axis);
    struct Sample {
        n_point: HVector,
        residual: f64,
        tangency: f64,
        roundtrip: f64,
        failure: Option<String>,
    }
    let per_sample = plan
        .par_iter()
        .map(|p| -> Result<Sample> {
            let h = m.point(p)?;
            let tangent = m.tangent_at(p)?;
            let tangency = basis
                .iter()
                .map(|b| tangent.residual_norm(b))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let n_point = l_perp.project(&h)?;
            let back = l.project(&h)? + &n_point;
            let roundtrip = m.space().distance(&back, &h) / m.space().norm(&h).max(f64::MIN_POSITIVE);
            let mut residual: f64 = 0.0;
            let mut failure = None;
            for c in &shifts {
                let mut shifted = h.clone();
                for (b, ci) in basis.iter().zip(c) {
                    shifted.axpy(*ci, b, 1.0);
                }
                match distance_to_manifold(m, &shifted, std::slice::from_ref(p), opts.accept) {
                    Ok(proj) => residual = residual.max(proj.distance),
                    Err(e) => {
                        residual = f64::INFINITY;
                        failure.get_or_insert(e.to_string());
                    }
                }
            }
            Ok(Sample {
                n_point,
                residual,
                tangency,
                roundtrip,
                failure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = DecomposeReport {
        n_points: Vec::with_capacity(plan.len()),
        residuals: Vec::with_capacity(plan.len()),
        max_residual: 0.0,
        tangency_residual: 0.0,
        roundtrip_residual: 0.0,
        failures: Vec::new(),
    };
    for (i, s) in per_sample.into_iter().enumerate() {
        report.max_residual = report.max_residual.max(s.residual);
        report.tangency_residual = report.tangency_residual.max(s.tangency);
        report.roundtrip_residual = report.roundtrip_residual.max(s.roundtrip);
        report.n_points.push(s.n_point);
        report.residuals.push(s.residual);
        if let Some(f) = s.failure {
            report.failures.push((i, f));
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    AffineSpace,
    Foliation,
    General,
}

/// `AffineSpace` iff `d = m`, `Foliation` iff `d = m - 1 >= 1`; a curve with
/// `d = 0` is only trivially a stack of points and counts as `General`.
pub fn classify(m: usize, d: usize) -> Classification {
    if d == m {
        Classification::AffineSpace
    } else if d + 1 == m && d >= 1 {
        Classification::Foliation
    } else {
        Classification::General
    }
}
