//! Built-in model instances: the Lévy-driven Hull–White extension of the
//! Vasiček model with its invariant foliation, the sine-graph counterexample,
//! toy fixtures, and small problems for scheme validation.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{orthonormalize, GridSpace, HVector, Subspace, DEFAULT_RANK_TOL};
use crate::interp::MonotoneCubic;
use crate::levy::{JumpMeasureSpec, LevyDriver};
use crate::manifold::{Classification, Manifold, ManifoldChart, SamplePoint};
use crate::spde::{constant_field, field, Coefficients, Semigroup, SpdeProblem};

/// Smallest one-sided support interval that counts as small jumps.
pub const DEFAULT_EPS_MIN: f64 = 1e-6;

/// Initial forward curve `b0 + b1 e^{-xi/tau} + b2 (xi/tau) e^{-xi/tau}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelsonSiegel {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau: f64,
}

impl Default for NelsonSiegel {
    fn default() -> Self {
        Self {
            beta0: 0.04,
            beta1: -0.02,
            beta2: 0.03,
            tau: 2.0,
        }
    }
}

impl NelsonSiegel {
    pub fn value(&self, xi: f64) -> f64 {
        let u = xi / self.tau;
        let e = (-u).exp();
        self.beta0 + self.beta1 * e + self.beta2 * u * e
    }
}

/// Parameters of the Vasiček–Hull–White model. Defaults are implementation
/// choices, not calibrated values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VasicekParams {
    pub rho: f64,
    pub c: f64,
    pub lambda: f64,
    /// Jump support `[lo, hi]`; must contain `[0, eps]` or `[-eps, 0]`.
    pub support: (f64, f64),
    pub xi_max: f64,
    pub n_grid: usize,
    pub h0: NelsonSiegel,
    /// Chart box: `t` in `[0, t_max]`, `z` in `[-z_max, z_max]`.
    pub t_max: f64,
    pub z_max: f64,
}

impl Default for VasicekParams {
    fn default() -> Self {
        Self {
            rho: 0.05,
            c: 0.3,
            lambda: 5.0,
            support: (0.0, 0.02),
            xi_max: 10.0,
            n_grid: 64,
            h0: NelsonSiegel::default(),
            t_max: 3.0,
            z_max: 2.0,
        }
    }
}

impl VasicekParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho != 0.0 && self.rho.is_finite()) {
            return Err(Error::config("rho must be nonzero and finite"));
        }
        if !self.c.is_finite() {
            return Err(Error::config("c must be finite"));
        }
        let (lo, hi) = self.support;
        let spec = JumpMeasureSpec::uniform(self.lambda, lo, hi)?;
        if !spec.has_small_jumps(DEFAULT_EPS_MIN) {
            return Err(Error::config(format!(
                "jump support [{lo}, {hi}] must contain [0, eps] or [-eps, 0] for small jumps"
            )));
        }
        if !(self.xi_max > 0.0) || self.n_grid < 4 {
            return Err(Error::config("need xi_max > 0 and at least 4 grid nodes"));
        }
        if !(self.t_max > 0.0 && self.z_max > 0.0) {
            return Err(Error::config("chart box needs t_max > 0 and z_max > 0"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpace> {
        GridSpace::chebyshev(self.n_grid, self.xi_max, "xi")
    }

    /// Driver `X = W + compensated jumps` with uniform jump sizes.
    pub fn driver(&self) -> Result<LevyDriver> {
        let spec = JumpMeasureSpec::uniform(self.lambda, self.support.0, self.support.1)?;
        LevyDriver::new(1, vec![spec], true)
    }

    /// `gamma(xi) = rho e^{-c xi}`.
    pub fn gamma(&self, xi: f64) -> f64 {
        self.rho * (-self.c * xi).exp()
    }

    /// `Gamma(xi) = int_0^xi gamma`, in closed form.
    pub fn gamma_integral(&self, xi: f64) -> f64 {
        if self.c == 0.0 {
            self.rho * xi
        } else {
            -self.rho * (-self.c * xi).exp_m1() / self.c
        }
    }
}

/// `alpha(xi) = -gamma(xi) Psi'(-Gamma(xi))` on the grid.
pub fn hjm_drift(params: &VasicekParams, space: &GridSpace, driver: &LevyDriver) -> Result<HVector> {
    let values = space
        .points()
        .iter()
        .map(|&xi| Ok(-params.gamma(xi) * driver.cumulant_prime(-params.gamma_integral(xi))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(HVector::from_vec(values))
}

/// Deterministic mild flow `Phi(t) = S_t h0 + int_0^t S_{t-s} alpha ds` for the
/// interpolating shift, with the time integral taken exactly from the
/// antiderivative of the interpolant of `alpha`.
#[derive(Clone, Debug)]
pub struct MildFlow {
    points: Vec<f64>,
    h0: MonotoneCubic,
    alpha: MonotoneCubic,
    alpha_integral_at_nodes: Vec<f64>,
}

impl MildFlow {
    pub fn new(space: &GridSpace, h0: &HVector, alpha: &HVector) -> Self {
        let points = space.points().to_vec();
        let h0 = MonotoneCubic::new(&points, h0.as_slice());
        let alpha = MonotoneCubic::new(&points, alpha.as_slice());
        let alpha_integral_at_nodes = points.iter().map(|&x| alpha.integral(x)).collect();
        Self {
            points,
            h0,
            alpha,
            alpha_integral_at_nodes,
        }
    }

    pub fn value(&self, t: f64) -> HVector {
        HVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .zip(&self.alpha_integral_at_nodes)
                .map(|(&x, &a0)| self.h0.value(x + t) + (self.alpha.integral(x + t) - a0)),
        )
    }

    /// `d Phi / dt`.
    pub fn derivative(&self, t: f64) -> HVector {
        HVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|&x| self.h0.slope(x + t) + self.alpha.value(x + t)),
        )
    }
}

/// A model ready for the checks, with its default sample plan and the
/// verdicts it is built to produce.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub name: String,
    pub problem: SpdeProblem,
    pub manifold: Manifold,
    /// Candidate common subspace for the decomposition test.
    pub declared_l: Option<Subspace>,
    /// Base points for tangency, closure, flatness and decomposition.
    pub plan: Vec<SamplePoint>,
    /// Starting points for simulated paths.
    pub starts: Vec<SamplePoint>,
    /// Largest shift coefficient used by the decomposition test.
    pub decompose_extent: f64,
    pub expected: Expected,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Expected {
    pub invariant: bool,
    pub flatness: Option<usize>,
    pub classification: Option<Classification>,
}

/// Output of [`build_hjmm_vasicek`].
#[derive(Clone, Debug)]
pub struct HjmmVasicek {
    pub problem: SpdeProblem,
    pub manifold: Manifold,
    /// `span{e^{-c xi}}`.
    pub l: Subspace,
    pub h0: HVector,
    pub alpha: HVector,
    pub e_gamma: HVector,
    pub flow: Arc<MildFlow>,
}

/// HJMM equation with constant volatility `rho e^{-c xi}` and its invariant
/// manifold `phi(t, z) = Phi(t) + z e^{-c xi}`.
pub fn build_hjmm_vasicek(params: &VasicekParams) -> Result<HjmmVasicek> {
    params.validate()?;
    let space = params.grid()?;
    let driver = params.driver()?;
    let alpha = hjm_drift(params, &space, &driver)?;
    let gamma = space.sample(|xi| params.gamma(xi));
    let e_gamma = space.sample(|xi| (-params.c * xi).exp());
    let h0 = space.sample(|xi| params.h0.value(xi));
    let semigroup = Semigroup::shift(&space)?;
    let coefficients = Coefficients {
        alpha: constant_field(alpha.clone()),
        sigma: vec![constant_field(gamma.clone())],
        gamma: vec![constant_field(gamma)],
        lipschitz_hint: Some(0.0),
    };
    let problem = SpdeProblem::new(space.clone(), semigroup, coefficients, driver)?;

    let flow = Arc::new(MildFlow::new(&space, &h0, &alpha));
    let (f_map, f_jac, e_map, e_jac) = (Arc::clone(&flow), Arc::clone(&flow), e_gamma.clone(), e_gamma.clone());
    let chart = ManifoldChart::new(vec![0.0, -params.z_max], vec![params.t_max, params.z_max], move |y| {
        let mut v = f_map.value(y[0]);
        v.axpy(y[1], &e_map, 1.0);
        v
    })?
    .with_jacobian(move |y| DMatrix::from_columns(&[f_jac.derivative(y[0]), e_jac.clone()]))
    .with_search_lattice(vec![31, 11])?;
    let manifold = Manifold::new(&space, vec![chart], 1)?;
    let l = orthonormalize(&space, &[e_gamma.clone()], DEFAULT_RANK_TOL)?;
    Ok(HjmmVasicek {
        problem,
        manifold,
        l,
        h0,
        alpha,
        e_gamma,
        flow,
    })
}

fn hjmm_instance(params: &VasicekParams) -> Result<ModelInstance> {
    let model = build_hjmm_vasicek(params)?;
    let mut plan = Vec::new();
    for i in 0..10 {
        for j in 0..6 {
            let t = 0.1 + (params.t_max - 0.2) * i as f64 / 9.0;
            let z = -0.5 * params.z_max + params.z_max * j as f64 / 5.0;
            plan.push(SamplePoint::new(0, vec![t, z]));
        }
    }
    Ok(ModelInstance {
        name: "hjmm-vasicek".into(),
        problem: model.problem,
        manifold: model.manifold,
        declared_l: Some(model.l),
        plan,
        starts: vec![SamplePoint::new(0, vec![0.0, 0.0])],
        decompose_extent: 0.5 * params.z_max,
        expected: Expected {
            invariant: true,
            flatness: Some(1),
            classification: Some(Classification::Foliation),
        },
    })
}

fn sine_manifold() -> Result<Manifold> {
    let space = GridSpace::euclidean(2)?;
    let chart = ManifoldChart::new(vec![-4.0], vec![8.0], |y| {
        HVector::from_vec(vec![y[0], (2.0 * PI * y[0]).sin()])
    })?
    .with_jacobian(|y| DMatrix::from_column_slice(2, 1, &[1.0, 2.0 * PI * (2.0 * PI * y[0]).cos()]))
    .with_search_lattice(vec![241])?;
    Manifold::new(&space, vec![chart], 1000)
}

/// `dr = gamma dN` on `R^2` with `gamma = (1, 0)` and `N` a Poisson process,
/// written with a compensated driver and the drift `lambda gamma` that undoes
/// the compensation.
fn horizontal_jump_problem(spec: JumpMeasureSpec) -> Result<SpdeProblem> {
    let space = GridSpace::euclidean(2)?;
    let gamma = HVector::from_vec(vec![1.0, 0.0]);
    let drift = &gamma * (spec.intensity() * spec.mean_jump());
    let driver = LevyDriver::new(0, vec![spec], false)?;
    SpdeProblem::new(
        space.clone(),
        Semigroup::identity(&space),
        Coefficients {
            alpha: constant_field(drift),
            sigma: vec![],
            gamma: vec![constant_field(gamma)],
            lipschitz_hint: Some(0.0),
        },
        driver,
    )
}

fn sine_plan() -> Vec<SamplePoint> {
    (0..60).map(|i| SamplePoint::new(0, vec![0.05 * i as f64 + 0.0123])).collect()
}

/// The sine graph in `R^2`, invariant under unit horizontal jumps and of
/// flatness zero.
pub fn build_sine_counterexample(lambda: f64) -> Result<(SpdeProblem, Manifold)> {
    Ok((horizontal_jump_problem(JumpMeasureSpec::atom(lambda, 1.0)?)?, sine_manifold()?))
}

fn sine_instance(lambda: f64) -> Result<ModelInstance> {
    let (problem, manifold) = build_sine_counterexample(lambda)?;
    Ok(ModelInstance {
        name: "sine-counterexample".into(),
        problem,
        manifold,
        declared_l: None,
        plan: sine_plan(),
        starts: vec![SamplePoint::new(0, vec![0.3])],
        decompose_extent: 0.5,
        expected: Expected {
            invariant: true,
            flatness: Some(0),
            classification: Some(Classification::General),
        },
    })
}

fn affine_fixture() -> Result<ModelInstance> {
    let space = GridSpace::euclidean(5)?;
    let g0 = HVector::from_vec(vec![1.0, -0.5, 0.25, 2.0, 0.0]);
    let l1 = HVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, -1.0]);
    let l2 = HVector::from_vec(vec![0.0, 2.0, 1.0, 1.0, 0.0]);
    let (g, a, b) = (g0.clone(), l1.clone(), l2.clone());
    let (ja, jb) = (l1.clone(), l2.clone());
    let chart = ManifoldChart::new(vec![-20.0, -20.0], vec![20.0, 20.0], move |y| &g + &a * y[0] + &b * y[1])?
        .with_jacobian(move |_| DMatrix::from_columns(&[ja.clone(), jb.clone()]));
    let manifold = Manifold::new(&space, vec![chart], 1000)?;
    let driver = LevyDriver::new(
        0,
        vec![JumpMeasureSpec::uniform(2.0, 0.0, 0.5)?, JumpMeasureSpec::uniform(3.0, -0.3, 0.0)?],
        false,
    )?;
    let problem = SpdeProblem::new(
        space.clone(),
        Semigroup::identity(&space),
        Coefficients {
            alpha: constant_field(&l1 * 0.2 - &l2 * 0.1),
            sigma: vec![],
            gamma: vec![constant_field(l1.clone()), constant_field(l2.clone())],
            lipschitz_hint: Some(0.0),
        },
        driver,
    )?;
    let l = orthonormalize(&space, &[l1, l2], DEFAULT_RANK_TOL)?;
    let plan = (0..50)
        .map(|i| {
            let s = i as f64;
            SamplePoint::new(0, vec![-5.0 + 0.2 * s, 3.0 * (0.7 * s).sin()])
        })
        .collect();
    Ok(ModelInstance {
        name: "fixture:affine".into(),
        problem,
        manifold,
        declared_l: Some(l),
        plan,
        starts: vec![SamplePoint::new(0, vec![0.0, 0.0]), SamplePoint::new(0, vec![1.0, -2.0])],
        decompose_extent: 2.0,
        expected: Expected {
            invariant: true,
            flatness: Some(2),
            classification: Some(Classification::AffineSpace),
        },
    })
}

fn cylinder_fixture() -> Result<ModelInstance> {
    let space = GridSpace::euclidean(3)?;
    let chart = ManifoldChart::new(vec![-2.0 * PI, -20.0], vec![4.0 * PI, 20.0], |y| {
        HVector::from_vec(vec![y[0].cos(), y[0].sin(), y[1]])
    })?
    .with_jacobian(|y| DMatrix::from_row_slice(3, 2, &[-y[0].sin(), 0.0, y[0].cos(), 0.0, 0.0, 1.0]))
    .with_search_lattice(vec![25, 11])?;
    let manifold = Manifold::new(&space, vec![chart], 1000)?;
    let axis = HVector::from_vec(vec![0.0, 0.0, 1.0]);
    let driver = LevyDriver::new(0, vec![JumpMeasureSpec::uniform(2.0, 0.0, 0.5)?], false)?;
    let problem = SpdeProblem::new(
        space.clone(),
        Semigroup::identity(&space),
        Coefficients {
            alpha: constant_field(HVector::zeros(3)),
            sigma: vec![],
            gamma: vec![constant_field(axis.clone())],
            lipschitz_hint: Some(0.0),
        },
        driver,
    )?;
    let l = orthonormalize(&space, &[axis], DEFAULT_RANK_TOL)?;
    let plan = (0..50)
        .map(|i| SamplePoint::new(0, vec![2.0 * PI * i as f64 / 50.0, -2.0 + 0.08 * i as f64]))
        .collect();
    Ok(ModelInstance {
        name: "fixture:cylinder".into(),
        problem,
        manifold,
        declared_l: Some(l),
        plan,
        starts: vec![SamplePoint::new(0, vec![0.5, 0.0])],
        decompose_extent: 2.0,
        expected: Expected {
            invariant: true,
            flatness: Some(1),
            classification: Some(Classification::Foliation),
        },
    })
}

fn sine_noninvariant_fixture() -> Result<ModelInstance> {
    let problem = horizontal_jump_problem(JumpMeasureSpec::uniform(1.0, 0.0, 0.5)?)?;
    let manifold = sine_manifold()?;
    let l = orthonormalize(manifold.space(), &[HVector::from_vec(vec![1.0, 0.0])], DEFAULT_RANK_TOL)?;
    Ok(ModelInstance {
        name: "fixture:sine-noninvariant".into(),
        problem,
        manifold,
        declared_l: Some(l),
        plan: sine_plan(),
        starts: vec![SamplePoint::new(0, vec![0.3])],
        decompose_extent: 0.5,
        expected: Expected {
            invariant: false,
            flatness: Some(0),
            classification: Some(Classification::General),
        },
    })
}

/// Toy corpus: an affine plane in `R^5`, a cylinder in `R^3`, and the sine
/// graph under non-integer jumps (not invariant).
pub fn build_fixtures() -> Result<Vec<ModelInstance>> {
    Ok(vec![affine_fixture()?, cylinder_fixture()?, sine_noninvariant_fixture()?])
}

pub const MODEL_NAMES: [&str; 5] = [
    "hjmm-vasicek",
    "sine-counterexample",
    "fixture:affine",
    "fixture:cylinder",
    "fixture:sine-noninvariant",
];

/// Parameters a caller may override when building a model by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub vasicek: VasicekParams,
    /// Intensity of the Poisson driver of the sine counterexample.
    pub sine_lambda: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            vasicek: VasicekParams::default(),
            sine_lambda: 1.0,
        }
    }
}

pub fn build_model(name: &str, params: &ModelParams) -> Result<ModelInstance> {
    match name {
        "hjmm-vasicek" => hjmm_instance(&params.vasicek),
        "sine-counterexample" => sine_instance(params.sine_lambda),
        "fixture:affine" => affine_fixture(),
        "fixture:cylinder" => cylinder_fixture(),
        "fixture:sine-noninvariant" => sine_noninvariant_fixture(),
        other => Err(Error::config(format!(
            "unknown model '{other}'; known models: {}",
            MODEL_NAMES.join(", ")
        ))),
    }
}

/// Problems with known strong order for the convergence harness.
pub mod convergence {
    use super::*;

    fn inert_jumps() -> Result<JumpMeasureSpec> {
        JumpMeasureSpec::atom(1.0, 1.0)
    }

    fn generator() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -2.0, 1.0, 0.0, 0.0, //
                1.0, -2.0, 1.0, 0.0, //
                0.0, 1.0, -2.0, 1.0, //
                0.0, 0.0, 1.0, -2.0,
            ],
        )
    }

    fn initial() -> HVector {
        HVector::from_vec(vec![1.0, -0.5, 0.25, 2.0])
    }

    /// `dr = (A r + B r) dt` with a jump coordinate whose volatility vanishes.
    pub fn deterministic_linear() -> Result<(SpdeProblem, HVector)> {
        let space = GridSpace::euclidean(4)?;
        let b = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.5, 0.3, 0.0, 0.0, //
                -0.3, 0.2, 0.1, 0.0, //
                0.0, 0.4, -0.6, 0.2, //
                0.1, 0.0, 0.0, 0.3,
            ],
        );
        let problem = SpdeProblem::new(
            space.clone(),
            Semigroup::matrix_generator(&space, generator())?,
            Coefficients {
                alpha: field(move |h| &b * h),
                sigma: vec![],
                gamma: vec![constant_field(HVector::zeros(4))],
                lipschitz_hint: None,
            },
            LevyDriver::new(0, vec![inert_jumps()?], false)?,
        )?;
        Ok((problem, initial()))
    }

    /// `dr = (A r + B r) dt + s dW` with constant `s`.
    pub fn additive_wiener() -> Result<(SpdeProblem, HVector)> {
        let (det, h0) = deterministic_linear()?;
        let space = det.space.clone();
        let sigma = HVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]);
        let problem = SpdeProblem::new(
            space,
            det.semigroup,
            Coefficients {
                sigma: vec![constant_field(sigma)],
                ..det.coefficients
            },
            LevyDriver::new(1, vec![inert_jumps()?], false)?,
        )?;
        Ok((problem, h0))
    }

    /// `dr = mu r dt + kappa r dW` with the identity semigroup.
    pub fn multiplicative_wiener() -> Result<(SpdeProblem, HVector)> {
        let space = GridSpace::euclidean(2)?;
        let problem = SpdeProblem::new(
            space.clone(),
            Semigroup::identity(&space),
            Coefficients {
                alpha: field(|h| h * 0.1),
                sigma: vec![field(|h| h * 0.8)],
                gamma: vec![constant_field(HVector::zeros(2))],
                lipschitz_hint: Some(0.8),
            },
            LevyDriver::new(1, vec![inert_jumps()?], false)?,
        )?;
        Ok((problem, HVector::from_vec(vec![1.0, 2.0])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn drift_reduces_to_classical_hjm_without_jumps() {
        let params = VasicekParams {
            rho: 1.0,
            c: 0.0,
            ..Default::default()
        };
        let space = GridSpace::chebyshev(16, 5.0, "xi").unwrap();
        // intensity 1e-300: the jump integral vanishes below rounding
        let driver = LevyDriver::new(1, vec![JumpMeasureSpec::uniform(1e-300, 0.0, 0.02).unwrap()], true).unwrap();
        let alpha = hjm_drift(&params, &space, &driver).unwrap();
        for (a, &xi) in alpha.iter().zip(space.points()) {
            assert_relative_eq!(*a, xi, epsilon = 1e-12);
        }
        assert_eq!(alpha[0], 0.0);
    }

    #[test]
    fn drift_with_atom_matches_closed_form() {
        let params = VasicekParams {
            rho: 1.0,
            c: 1.0,
            ..Default::default()
        };
        let space = GridSpace::new(vec![0.0, 1.0], vec![0.5, 0.5], "xi").unwrap();
        let driver = LevyDriver::new(1, vec![JumpMeasureSpec::atom(1.0, 0.1).unwrap()], true).unwrap();
        let alpha = hjm_drift(&params, &space, &driver).unwrap();
        let z = -(1.0 - (-1f64).exp());
        let expected = -(-1f64).exp() * (z + 0.1 * ((0.1 * z).exp() - 1.0));
        assert_relative_eq!(alpha[1], expected, epsilon = 1e-14);
    }

    #[test]
    fn flow_starts_at_h0_and_chart_contains_l() {
        let model = build_hjmm_vasicek(&VasicekParams::default()).unwrap();
        assert_eq!(model.flow.value(0.0), model.h0);
        let chart = &model.manifold.charts()[0];
        assert!(chart.jacobian_check(20, 5).unwrap() < 1e-6);
        for t in [0.0, 0.4, 1.7, 2.9] {
            let tangent = model.manifold.tangent_at(&SamplePoint::new(0, vec![t, 0.3])).unwrap();
            assert!(tangent.residual_norm(&model.l.basis_vector(0)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn invalid_params_are_config_errors() {
        let bad = VasicekParams {
            rho: 0.0,
            ..Default::default()
        };
        assert!(build_hjmm_vasicek(&bad).unwrap_err().is_config());
        let no_small = VasicekParams {
            support: (0.2, 0.7),
            ..Default::default()
        };
        assert!(build_hjmm_vasicek(&no_small).unwrap_err().is_config());
        assert!(build_model("nope", &ModelParams::default()).unwrap_err().is_config());
    }

    #[test]
    fn every_registered_name_builds() {
        for name in MODEL_NAMES {
            let m = build_model(name, &ModelParams::default()).unwrap();
            assert_eq!(m.name, name);
            assert!(!m.plan.is_empty());
        }
    }
}
