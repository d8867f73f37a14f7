use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use levyflat::check::{
    flatness_bound_check, jump_closure_test, path_invariance_test, tangency_test, PathOptions, SampleRecord, TestReport,
    Verdict,
};
use levyflat::hilbert::max_principal_angle;
use levyflat::manifold::{decompose, flatness_global, Classification, DecomposeOptions, FlatnessOptions, GlobalFlatness};
use levyflat::models::{build_model, ModelInstance};
use levyflat::spde::SimulatedPath;
use serde::Serialize;

use crate::config::{parse_tests, RunConfig, SeedResolution, SeedSource, TestKind, SEED_ENV};
use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const FLATNESS_CSV: &str = "flatness.csv";
pub const PATH_CSV: &str = "path_0.csv";

#[derive(Serialize)]
pub struct Report {
    pub tool: Tool,
    pub environment: Environment,
    pub config: RunConfig,
    pub seed: SeedEcho,
    pub model: ModelSummary,
    pub tests: Vec<TestReport>,
    pub flatness: Option<FlatnessSection>,
    pub decompose: Option<DecomposeSection>,
    pub path_invariance: Option<PathSection>,
    pub exit_code: i32,
}

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Serialize)]
pub struct Environment {
    /// The only field allowed to differ between identical runs.
    pub timestamp: u64,
    pub os: &'static str,
    pub arch: &'static str,
}

#[derive(Serialize)]
pub struct SeedEcho {
    pub value: u64,
    pub source: SeedSource,
    pub env_var: &'static str,
    pub env_value: Option<String>,
}

#[derive(Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub ambient_dim: usize,
    pub manifold_dim: usize,
    pub wiener_dim: usize,
    pub jump_dim: usize,
    pub eps_min: f64,
    /// 1-based indices of the jump coordinates with small jumps.
    pub small_jump_indices: Vec<usize>,
    pub k_set: String,
    pub plan_size: usize,
    pub expected_invariant: bool,
    pub expected_flatness: Option<usize>,
    pub expected_classification: Option<Classification>,
}

#[derive(Serialize)]
pub struct FlatnessPoint {
    pub point_index: usize,
    pub chart: usize,
    pub coords: Vec<f64>,
    pub d: usize,
    pub sv_gap: f64,
    pub samples_used: usize,
    pub seed: u64,
    /// Rejection spectrum, ascending, scaled into `[0, 1]`.
    pub spectrum: Vec<f64>,
}

#[derive(Serialize)]
pub struct FlatnessSection {
    pub flatness_global: usize,
    pub classification: Classification,
    pub options: FlatnessOptions,
    pub local_bounds: Vec<usize>,
    pub global_bound: Option<usize>,
    /// Largest principal angle between common subspaces of consecutive points.
    pub principal_angle_chain: Vec<Option<f64>>,
    /// Largest principal angle between each common subspace and the declared `L`.
    pub declared_l_max_angle: Option<f64>,
    pub per_point: Vec<FlatnessPoint>,
}

#[derive(Serialize)]
pub struct DecomposeSection {
    pub options: DecomposeOptions,
    pub l_dim: usize,
    pub max_residual: f64,
    pub tangency_residual: f64,
    pub roundtrip_residual: f64,
    pub residuals: Vec<f64>,
    pub failures: Vec<(usize, String)>,
}

#[derive(Serialize)]
pub struct PathSection {
    pub options: PathOptions,
    pub residual_dt: f64,
    pub residual_half_dt: f64,
    pub ratio: f64,
    pub csv: String,
    /// `(t, distance)` along the first path.
    pub trace: Vec<(f64, f64)>,
}

fn k_display(k: &[usize]) -> String {
    let items: Vec<String> = k.iter().map(|i| i.to_string()).collect();
    format!("K = {{{}}}", items.join(", "))
}

fn finite_or(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "inf".into()
    }
}

fn flatness_section(m: &ModelInstance, global: &GlobalFlatness, opts: FlatnessOptions) -> Result<FlatnessSection, CliError> {
    let per = &global.per_point;
    let principal_angle_chain = per
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].common_subspace, &w[1].common_subspace);
            if a.dim() == b.dim() && a.dim() > 0 {
                max_principal_angle(a, b).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<levyflat::Result<Vec<_>>>()?;
    let declared_l_max_angle = match &m.declared_l {
        Some(l) if per.iter().all(|r| r.common_subspace.dim() == l.dim()) && l.dim() > 0 => {
            let mut worst: f64 = 0.0;
            for r in per {
                worst = worst.max(max_principal_angle(&r.common_subspace, l)?);
            }
            Some(worst)
        }
        _ => None,
    };
    Ok(FlatnessSection {
        flatness_global: global.flatness,
        classification: levyflat::manifold::classify(m.manifold.dim(), global.flatness),
        options: opts,
        local_bounds: Vec::new(),
        global_bound: None,
        principal_angle_chain,
        declared_l_max_angle,
        per_point: per
            .iter()
            .enumerate()
            .map(|(i, r)| FlatnessPoint {
                point_index: i,
                chart: r.base.chart,
                coords: r.base.coords.clone(),
                d: r.flatness,
                sv_gap: r.singular_value_gap,
                samples_used: r.samples_used,
                seed: r.seed,
                spectrum: r.spectrum.clone(),
            })
            .collect(),
    })
}

fn decompose_report(section: &DecomposeSection, threshold: f64) -> TestReport {
    let details = section
        .residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| SampleRecord {
            index: i,
            label: format!("point {i}"),
            residual: r,
            note: section.failures.iter().find(|f| f.0 == i).map(|f| f.1.clone()),
        })
        .collect();
    let mut report = TestReport::new("decompose", threshold, details)
        .param("extent", section.options.extent)
        .param("shifts_per_axis", section.options.shifts_per_axis as f64)
        .param("accept", section.options.accept)
        .param("l_dim", section.l_dim as f64);
    report.diagnostics.insert("tangency_residual".into(), section.tangency_residual);
    report.diagnostics.insert("roundtrip_residual".into(), section.roundtrip_residual);
    report.statement = format!("M + L = M for shifts in L up to norm {}", section.options.extent);
    report
}

pub fn write_path_csv(path: &SimulatedPath, file: &Path) -> Result<(), CliError> {
    let n = path.records.first().map_or(0, |r| r.state.len());
    let mut out = String::from("t,flag");
    for i in 0..n {
        write!(out, ",v_{i}").expect("string write");
    }
    out.push('\n');
    for rec in &path.records {
        write!(out, "{:e},{}", rec.t, rec.flag.as_str()).expect("string write");
        for v in rec.state.iter() {
            write!(out, ",{v:e}").expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(file, out).map_err(|e| CliError::Config(format!("cannot write {}: {e}", file.display())))
}

fn write_flatness_csv(section: &FlatnessSection, file: &Path) -> Result<(), CliError> {
    let mut out = String::from("point_index,d,sv_gap\n");
    for p in &section.per_point {
        writeln!(out, "{},{},{:e}", p.point_index, p.d, p.sv_gap).expect("string write");
    }
    std::fs::write(file, out).map_err(|e| CliError::Config(format!("cannot write {}: {e}", file.display())))
}

/// Runs the selected tests, writes all artifacts and returns the exit code.
pub fn run(mut config: RunConfig, seed: SeedResolution) -> Result<i32, CliError> {
    config.seed = Some(seed.seed);
    config.validate()?;
    let tests = parse_tests(&config.tests)?;
    let name = config.model.clone().expect("validated");
    let m = build_model(&name, &config.params)?;
    let n = &config.numerics;
    let th = &config.thresholds;
    let problem = &m.problem;
    let k_set: BTreeSet<usize> = problem.driver.small_jump_indices(n.eps_min);
    let k_one_based: Vec<usize> = k_set.iter().map(|k| k + 1).collect();
    let out_dir = config.output.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", out_dir.display())))?;

    let mut reports = Vec::new();
    let mut flatness = None;
    let mut decomposition = None;
    let mut path_section = None;

    for test in &tests {
        match test {
            TestKind::Tangency => {
                let mut r = tangency_test(&m.manifold, problem, &k_set, &m.plan, th.tangency)?;
                r.parameters.insert("eps_min".into(), n.eps_min);
                reports.push(r);
            }
            TestKind::JumpClosure => {
                for (k, spec) in problem.driver.jump_specs().iter().enumerate() {
                    let xs = spec.support_grid(n.jump_sizes);
                    reports.push(jump_closure_test(&m.manifold, problem, k, &xs, &m.plan, th.jump_closure)?);
                }
            }
            TestKind::PathInvariance => {
                let opts = PathOptions {
                    n_paths: n.n_paths,
                    horizon: n.horizon,
                    dt: n.dt,
                    threshold: th.path,
                    seed: seed.seed,
                };
                let outcome = path_invariance_test(&m.manifold, problem, &m.starts, &opts)?;
                write_path_csv(&outcome.first_path, &out_dir.join(PATH_CSV))?;
                path_section = Some(PathSection {
                    options: opts,
                    residual_dt: outcome.residual_dt,
                    residual_half_dt: outcome.residual_half_dt,
                    ratio: outcome.ratio,
                    csv: PATH_CSV.into(),
                    trace: outcome.trace,
                });
                reports.push(outcome.report);
            }
            TestKind::Flatness => {
                let opts = FlatnessOptions {
                    radius: n.radius,
                    n_samples: n.n_samples,
                    tol: n.tol,
                    seed: seed.seed,
                };
                let outcome = flatness_bound_check(&m.manifold, problem, &k_set, &m.plan, &opts)?;
                let global = match outcome.global {
                    Some(g) => g,
                    None => flatness_global(&m.manifold, &m.plan, &opts)?,
                };
                let mut section = flatness_section(&m, &global, opts)?;
                if !k_set.is_empty() {
                    section.local_bounds = outcome.local_bounds;
                    section.global_bound = Some(outcome.global_bound);
                }
                write_flatness_csv(&section, &out_dir.join(FLATNESS_CSV))?;
                flatness = Some(section);
                reports.push(outcome.report);
            }
            TestKind::Decompose => match &m.declared_l {
                None => reports.push(TestReport::skip(
                    "decompose",
                    th.decompose,
                    "the model declares no translation subspace L",
                )),
                Some(l) => {
                    let opts = DecomposeOptions {
                        extent: n.decompose_extent.unwrap_or(m.decompose_extent),
                        shifts_per_axis: n.shifts_per_axis,
                        ..DecomposeOptions::default()
                    };
                    let d = decompose(&m.manifold, l, &m.plan, &opts)?;
                    let section = DecomposeSection {
                        options: opts,
                        l_dim: l.dim(),
                        max_residual: d.max_residual,
                        tangency_residual: d.tangency_residual,
                        roundtrip_residual: d.roundtrip_residual,
                        residuals: d.residuals,
                        failures: d.failures,
                    };
                    reports.push(decompose_report(&section, th.decompose));
                    decomposition = Some(section);
                }
            },
        }
    }

    let exit_code = if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        1
    } else {
        0
    };
    for r in &reports {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "skip",
        };
        let k = r.parameters.get("k").map(|k| format!(" (k = {k})")).unwrap_or_default();
        println!(
            "{verdict:4}  {}{k}: max residual {} vs threshold {:e} over {} samples",
            r.test_name,
            finite_or(r.max_residual),
            r.threshold,
            r.samples
        );
    }
    if let Some(f) = &flatness {
        println!("flatness {} ({:?}), {}", f.flatness_global, f.classification, k_display(&k_one_based));
    }

    let report = Report {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        environment: Environment {
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
        },
        seed: SeedEcho {
            value: seed.seed,
            source: seed.source,
            env_var: SEED_ENV,
            env_value: seed.env_value,
        },
        model: ModelSummary {
            name: m.name.clone(),
            ambient_dim: m.manifold.space().dim(),
            manifold_dim: m.manifold.dim(),
            wiener_dim: problem.driver.wiener_dim(),
            jump_dim: problem.driver.jump_dim(),
            eps_min: n.eps_min,
            k_set: k_display(&k_one_based),
            small_jump_indices: k_one_based,
            plan_size: m.plan.len(),
            expected_invariant: m.expected.invariant,
            expected_flatness: m.expected.flatness,
            expected_classification: m.expected.classification,
        },
        config,
        tests: reports,
        flatness,
        decompose: decomposition,
        path_invariance: path_section,
        exit_code,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let file = out_dir.join(REPORT_FILE);
    std::fs::write(&file, json + "\n").map_err(|e| CliError::Config(format!("cannot write {}: {e}", file.display())))?;
    Ok(exit_code)
}
