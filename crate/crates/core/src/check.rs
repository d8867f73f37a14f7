//! Numerical verdicts: tangency of small-jump volatilities, closure under
//! jumps, Monte Carlo invariance, and the flatness lower bound.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{intersect, orthonormalize, HVector, Subspace, DEFAULT_RANK_TOL};
use crate::levy::derive_seed;
use crate::manifold::{
    ball_samples, classify, distance_to_manifold, flatness_global, Classification, FlatnessOptions,
    GlobalFlatness, Manifold, SamplePoint,
};
use crate::spde::{simulate_with_noise, SimulatedPath, SpdeProblem};

pub const DEFAULT_TANGENCY_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_JUMP_CLOSURE_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_PATH_THRESHOLD: f64 = 1e-2;
/// Residual ratio between `dt` and `dt / 2` above which the residual is read
/// as scheme error.
pub const RATIO_CUTOFF: f64 = 1.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub label: String,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Outcome of one test. `pass` holds iff `max_residual < threshold`.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub test_name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
    pub verdict: Verdict,
    pub statement: String,
    pub parameters: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub details: Vec<SampleRecord>,
}

impl TestReport {
    /// Pass iff every residual is below `threshold`.
    pub fn new(name: &str, threshold: f64, details: Vec<SampleRecord>) -> Self {
        let max_residual = details.iter().map(|d| d.residual).fold(0.0, |a: f64, b| {
            if b.is_nan() {
                f64::INFINITY
            } else {
                a.max(b)
            }
        });
        let pass = max_residual < threshold;
        Self {
            test_name: name.to_string(),
            samples: details.len(),
            max_residual,
            threshold,
            pass,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            statement: String::new(),
            parameters: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            details,
        }
    }

    pub fn skip(name: &str, threshold: f64, statement: &str) -> Self {
        let mut r = Self::new(name, threshold, Vec::new());
        r.verdict = Verdict::Skip;
        r.statement = statement.to_string();
        r
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

fn check_indices(problem: &SpdeProblem, k: &BTreeSet<usize>) -> Result<()> {
    let q = problem.driver.jump_dim();
    match k.iter().find(|&&i| i >= q) {
        Some(i) => Err(Error::config(format!("jump index {i} out of range for q = {q}"))),
        None => Ok(()),
    }
}

/// `||(I - P_{T_h M}) gamma^k(h)|| / ||gamma^k(h)||` for `k` in `K` at every
/// sample point (zero for a vanishing volatility); a skip verdict for empty `K`.
pub fn tangency_test(
    m: &Manifold,
    problem: &SpdeProblem,
    k: &BTreeSet<usize>,
    plan: &[SamplePoint],
    threshold: f64,
) -> Result<TestReport> {
    check_indices(problem, k)?;
    if k.is_empty() {
        return Ok(TestReport::skip(
            "tangency",
            threshold,
            "no small-jump coordinates: tangency is not required",
        ));
    }
    let per_point = plan
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Vec<SampleRecord>> {
            let h = m.point(p)?;
            let tangent = m.tangent_at(p)?;
            k.iter()
                .map(|&kk| {
                    let g = (problem.coefficients.gamma[kk])(&h);
                    let norm = m.space().norm(&g);
                    let residual = if norm == 0.0 {
                        0.0
                    } else {
                        tangent.residual_norm(&g)? / norm
                    };
                    Ok(SampleRecord {
                        index: i,
                        label: format!("point {i}, k = {}", kk + 1),
                        residual,
                        note: None,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = TestReport::new("tangency", threshold, per_point.into_iter().flatten().collect());
    report.statement = "jump volatilities of small-jump coordinates lie in the tangent spaces".into();
    Ok(report)
}

/// Distance of `h + x gamma^k(h)` to the manifold over sample points and jump sizes.
pub fn jump_closure_test(
    m: &Manifold,
    problem: &SpdeProblem,
    k: usize,
    x_grid: &[f64],
    plan: &[SamplePoint],
    threshold: f64,
) -> Result<TestReport> {
    check_indices(problem, &BTreeSet::from([k]))?;
    if x_grid.is_empty() {
        return Err(Error::config("jump closure needs at least one jump size"));
    }
    let accept = 1e-3 * threshold;
    let per_point = plan
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Vec<SampleRecord>> {
            let h = m.point(p)?;
            let g = (problem.coefficients.gamma[k])(&h);
            Ok(x_grid
                .iter()
                .map(|&x| {
                    let mut target = h.clone();
                    target.axpy(x, &g, 1.0);
                    let (residual, note) = match distance_to_manifold(m, &target, std::slice::from_ref(p), accept) {
                        Ok(proj) => (proj.distance, None),
                        Err(e) => (f64::INFINITY, Some(e.to_string())),
                    };
                    SampleRecord {
                        index: i,
                        label: format!("point {i}, x = {x}"),
                        residual,
                        note,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = TestReport::new("jump_closure", threshold, per_point.into_iter().flatten().collect())
        .param("k", (k + 1) as f64)
        .param("x_min", x_grid.iter().copied().fold(f64::INFINITY, f64::min))
        .param("x_max", x_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .param("x_count", x_grid.len() as f64);
    report.statement = format!("h + x gamma^{}(h) stays on the manifold for the sampled x", k + 1);
    Ok(report)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathOptions {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PathInvarianceOutcome {
    pub report: TestReport,
    /// Largest distance at `dt` and at `dt / 2`.
    pub residual_dt: f64,
    pub residual_half_dt: f64,
    /// `residual_dt / residual_half_dt`.
    pub ratio: f64,
    /// `(t, distance)` along the first path at `dt`.
    pub trace: Vec<(f64, f64)>,
    /// First simulated path at `dt`.
    pub first_path: SimulatedPath,
}

struct PathResidual {
    max: f64,
    trace: Vec<(f64, f64)>,
    failures: usize,
}

fn path_residual(m: &Manifold, path: &SimulatedPath, start: &SamplePoint, accept: f64) -> PathResidual {
    let mut hint = start.clone();
    let mut max: f64 = 0.0;
    let mut failures = 0;
    let mut trace = Vec::with_capacity(path.records.len());
    for rec in &path.records {
        let hints = [hint.clone(), start.clone()];
        let d = match distance_to_manifold(m, &rec.state, &hints, accept) {
            Ok(p) => {
                hint = p.sample_point();
                p.distance
            }
            Err(_) => {
                failures += 1;
                f64::INFINITY
            }
        };
        max = max.max(d);
        trace.push((rec.t, d));
    }
    PathResidual { max, trace, failures }
}

/// Monte Carlo invariance surrogate: the largest distance to `M` over stored
/// states of `n_paths` simulated paths.
///
/// Each path's noise is drawn on the `dt / 2` grid and summed onto the `dt`
/// grid, so the two runs share jumps and Brownian paths. The verdict uses the
/// `dt` residual; the ratio between the two runs is reported as a diagnostic.
pub fn path_invariance_test(
    m: &Manifold,
    problem: &SpdeProblem,
    starts: &[SamplePoint],
    opts: &PathOptions,
) -> Result<PathInvarianceOutcome> {
    if starts.is_empty() || opts.n_paths == 0 {
        return Err(Error::config("path invariance needs starts and n_paths >= 1"));
    }
    let accept = 0.1 * opts.threshold;
    for s in starts {
        let h = m.point(s)?;
        let p = distance_to_manifold(m, &h, std::slice::from_ref(s), 1e-10)?;
        if p.distance >= 1e-10 {
            return Err(Error::config(format!("start {:?} is not on the manifold", s.coords)));
        }
    }
    let runs = (0..opts.n_paths)
        .into_par_iter()
        .map(|j| -> Result<(PathResidual, PathResidual, Option<SimulatedPath>)> {
            let start = &starts[j % starts.len()];
            let h0 = m.point(start)?;
            let fine = problem
                .driver
                .sample_path(opts.horizon, 0.5 * opts.dt, derive_seed(opts.seed, j as u64))?;
            let coarse = fine.coarsen(opts.dt)?;
            let path = simulate_with_noise(problem, &h0, &coarse)?;
            let half = simulate_with_noise(problem, &h0, &fine)?;
            let r = path_residual(m, &path, start, accept);
            let r_half = path_residual(m, &half, start, accept);
            Ok((r, r_half, (j == 0).then_some(path)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut details = Vec::with_capacity(runs.len());
    let mut residual_half_dt: f64 = 0.0;
    let mut failures = 0;
    let mut trace = Vec::new();
    let mut first_path = None;
    for (j, (r, r_half, path)) in runs.into_iter().enumerate() {
        residual_half_dt = residual_half_dt.max(r_half.max);
        failures += r.failures + r_half.failures;
        details.push(SampleRecord {
            index: j,
            label: format!("path {j}"),
            residual: r.max,
            note: (r.failures > 0).then(|| format!("{} projections failed", r.failures)),
        });
        if j == 0 {
            trace = r.trace;
            first_path = path;
        }
    }
    let mut report = TestReport::new("path_invariance", opts.threshold, details)
        .param("n_paths", opts.n_paths as f64)
        .param("horizon", opts.horizon)
        .param("dt", opts.dt)
        .param("seed", opts.seed as f64)
        .param("ratio_cutoff", RATIO_CUTOFF);
    let residual_dt = report.max_residual;
    let ratio = if residual_half_dt > 0.0 {
        residual_dt / residual_half_dt
    } else {
        f64::INFINITY
    };
    report.diagnostics.insert("residual_half_dt".into(), residual_half_dt);
    report.diagnostics.insert("dt_ratio".into(), ratio);
    report.diagnostics.insert("failed_projections".into(), failures as f64);
    report.statement = if report.pass {
        format!(
            "consistent with invariance at dt = {}, threshold = {}",
            opts.dt, opts.threshold
        )
    } else if ratio >= RATIO_CUTOFF {
        format!("residual above threshold but contracts with dt (ratio {ratio:.3}): scheme error")
    } else {
        format!("residual above threshold and does not contract with dt (ratio {ratio:.3}): paths leave the manifold")
    };
    Ok(PathInvarianceOutcome {
        report,
        residual_dt,
        residual_half_dt,
        ratio,
        trace,
        first_path: first_path.expect("path 0 simulated"),
    })
}

#[derive(Clone, Debug)]
pub struct FlatnessBoundOutcome {
    pub report: TestReport,
    /// `None` when `K` is empty.
    pub global: Option<GlobalFlatness>,
    /// Per base point: dimension of the common span of `gamma^k`, `k` in `K`.
    pub local_bounds: Vec<usize>,
    pub global_bound: usize,
    pub classification: Option<Classification>,
}

fn volatility_span(m: &Manifold, problem: &SpdeProblem, k: &BTreeSet<usize>, h: &HVector) -> Result<Subspace> {
    let vectors: Vec<HVector> = k.iter().map(|&kk| (problem.coefficients.gamma[kk])(h)).collect();
    orthonormalize(m.space(), &vectors, DEFAULT_RANK_TOL)
}

/// Checks `fl M(h0) >= d` at each base point, where `d` is the dimension of
/// the common span of the small-jump volatilities over the sampled
/// neighborhood, and the same inequality globally.
pub fn flatness_bound_check(
    m: &Manifold,
    problem: &SpdeProblem,
    k: &BTreeSet<usize>,
    plan: &[SamplePoint],
    opts: &FlatnessOptions,
) -> Result<FlatnessBoundOutcome> {
    check_indices(problem, k)?;
    if k.is_empty() {
        return Ok(FlatnessBoundOutcome {
            report: TestReport::skip(
                "flatness_bound",
                0.5,
                "no small-jump coordinates: no statement about the flatness is possible",
            ),
            global: None,
            local_bounds: Vec::new(),
            global_bound: 0,
            classification: None,
        });
    }
    let global = flatness_global(m, plan, opts)?;
    let spans = plan
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Vec<Subspace>> {
            let chart = &m.charts()[p.chart];
            let seed = derive_seed(opts.seed, i as u64);
            let mut points = vec![p.coords.clone()];
            points.extend(ball_samples(chart, &p.coords, opts.radius, opts.n_samples, seed));
            points
                .into_iter()
                .map(|y| volatility_span(m, problem, k, &chart.eval(&y)))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let local_bounds = spans
        .iter()
        .map(|s| intersect(s, opts.tol).map(|c| c.dim()))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Subspace> = spans.into_iter().flatten().collect();
    let global_bound = intersect(&all, opts.tol)?.dim();

    let mut details: Vec<SampleRecord> = local_bounds
        .iter()
        .zip(&global.per_point)
        .enumerate()
        .map(|(i, (&d, rep))| SampleRecord {
            index: i,
            label: format!("point {i}: flatness {} vs bound {d}", rep.flatness),
            residual: d.saturating_sub(rep.flatness) as f64,
            note: None,
        })
        .collect();
    details.push(SampleRecord {
        index: plan.len(),
        label: format!("global: flatness {} vs bound {global_bound}", global.flatness),
        residual: global_bound.saturating_sub(global.flatness) as f64,
        note: None,
    });
    let classification = classify(m.dim(), global.flatness);
    let mut report = TestReport::new("flatness_bound", 0.5, details)
        .param("radius", opts.radius)
        .param("n_samples", opts.n_samples as f64)
        .param("tol", opts.tol)
        .param("seed", opts.seed as f64);
    report.diagnostics.insert("flatness_global".into(), global.flatness as f64);
    report.diagnostics.insert("volatility_bound_global".into(), global_bound as f64);
    report.statement = "flatness is at least the dimension of the common small-jump volatility span".into();
    Ok(FlatnessBoundOutcome {
        report,
        global: Some(global),
        local_bounds,
        global_bound,
        classification: Some(classification),
    })
}
