//! Python bindings: models, losses, the counterfactual solver, and the main
//! verification/robustness operations.
//!
//! Build as a cdylib and import the shared object as `credence_py`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use credence_core::loss::LossBundle;
use credence_core::model::{self, DifferentiableModel};
use credence_core::robustness::{self, AttackConfig};
use credence_core::solver::{
    self, CounterfactualResult, LambdaInit, SolverConfig, SolverStatus, WeightSpec,
};
use credence_core::verify::{self, BayesParams, GridSolution, PiInstance};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A differentiable model with exact input gradients.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: DifferentiableModel,
}

#[pymethods]
impl PyModel {
    /// Deserialize from the JSON document format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: DifferentiableModel = serde_json::from_str(text).map_err(err)?;
        inner.validate().map_err(err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let body = std::fs::read_to_string(path).map_err(err)?;
        Self::from_json(&body)
    }

    #[staticmethod]
    fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> PyResult<Self> {
        let inner = DifferentiableModel::linear(weights, bias);
        inner.validate().map_err(err)?;
        Ok(PyModel { inner })
    }

    /// The identity map on p inputs.
    #[staticmethod]
    fn identity(p: usize) -> PyResult<Self> {
        let inner = DifferentiableModel::identity(p);
        inner.validate().map_err(err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn constant(input_dim: usize, output: Vec<f64>) -> PyResult<Self> {
        let inner = DifferentiableModel::constant(input_dim, output);
        inner.validate().map_err(err)?;
        Ok(PyModel { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        credence_core::report::to_json_precise(&self.inner).map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x).map_err(err)
    }
}

/// Per-class losses over model outputs.
#[pyclass(name = "Loss", frozen)]
struct PyLoss {
    inner: LossBundle,
}

#[pymethods]
impl PyLoss {
    #[staticmethod]
    fn cross_entropy(num_classes: usize) -> Self {
        PyLoss {
            inner: LossBundle::cross_entropy(num_classes),
        }
    }

    #[staticmethod]
    fn logistic(num_classes: usize) -> Self {
        PyLoss {
            inner: LossBundle::logistic_nll(num_classes),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (num_classes, smoothing = 0.1))]
    fn hinge(num_classes: usize, smoothing: f64) -> Self {
        PyLoss {
            inner: LossBundle {
                num_classes,
                kind: credence_core::loss::LossKind::Hinge { smoothing },
            },
        }
    }

    #[staticmethod]
    fn squared_distance(anchors: Vec<Vec<f64>>) -> Self {
        PyLoss {
            inner: LossBundle::squared_distance(anchors),
        }
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes
    }

    fn loss(&self, z: Vec<f64>, class: usize) -> PyResult<f64> {
        self.inner.loss(&z, class).map_err(err)
    }

    fn losses(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.losses(&z).map_err(err)
    }
}

fn weights_from(gamma: Option<f64>, diag: Option<Vec<f64>>, k: usize) -> PyResult<WeightSpec> {
    let spec = match (gamma, diag) {
        (Some(_), Some(_)) => return Err(err("pass either gamma or diag, not both")),
        (Some(g), None) => WeightSpec::gamma(k, g),
        (None, Some(d)) => WeightSpec::diagonal(d),
        (None, None) => WeightSpec::gamma(k, 200.0),
    };
    spec.validate().map_err(err)?;
    Ok(spec)
}

fn solver_config(
    eta_x: f64,
    eta_lambda: f64,
    max_iters: u64,
    tol: f64,
    lambda_init: Option<Vec<f64>>,
) -> SolverConfig {
    SolverConfig {
        eta_x,
        eta_lambda,
        max_iters,
        fixed_point_tol: tol,
        stationarity_tol: tol,
        lambda_init: match lambda_init {
            Some(v) => LambdaInit::Vector(v),
            None => LambdaInit::default(),
        },
        ..SolverConfig::default()
    }
}

fn status_str(status: SolverStatus) -> &'static str {
    match status {
        SolverStatus::Converged => "converged",
        SolverStatus::MaxIters => "max_iters",
        SolverStatus::Diverged => "diverged",
    }
}

fn result_dict<'py>(py: Python<'py>, r: &CounterfactualResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x_dagger", r.x_dagger.clone())?;
    d.set_item("lambda", r.lambda.clone())?;
    d.set_item("c_dagger", r.c_dagger.clone())?;
    d.set_item("risk", r.risk)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("status", status_str(r.status))?;
    d.set_item("residual_fixed_point", r.residuals.fixed_point)?;
    d.set_item("residual_stationarity", r.residuals.stationarity)?;
    d.set_item("residual_comp_slack", r.residuals.comp_slack)?;
    Ok(d)
}

/// Solve for the credibility profile of `x_origin`.
#[pyfunction]
#[pyo3(signature = (model, loss, x_origin, gamma = None, diag = None,
                    eta_x = 1e-3, eta_lambda = 1e-2, max_iters = 50_000,
                    tol = 1e-6, lambda_init = None))]
#[allow(clippy::too_many_arguments)]
fn solve_counterfactual<'py>(
    py: Python<'py>,
    model: &PyModel,
    loss: &PyLoss,
    x_origin: Vec<f64>,
    gamma: Option<f64>,
    diag: Option<Vec<f64>>,
    eta_x: f64,
    eta_lambda: f64,
    max_iters: u64,
    tol: f64,
    lambda_init: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let weights = weights_from(gamma, diag, loss.inner.num_classes)?;
    let cfg = solver_config(eta_x, eta_lambda, max_iters, tol, lambda_init);
    let r = solver::solve_counterfactual(&model.inner, &loss.inner, &x_origin, &weights, &cfg)
        .map_err(err)?;
    result_dict(py, &r)
}

/// Credences of the unperturbed input: c_k = −ℓ_k(φ(x)).
#[pyfunction]
fn credence_at_origin(model: &PyModel, loss: &PyLoss, x: Vec<f64>) -> PyResult<Vec<f64>> {
    model::credence_at_origin(&model.inner, &loss.inner, &x).map_err(err)
}

/// Exact gradient of x ↦ ℓ_class(φ(x)).
#[pyfunction]
fn input_gradient(model: &PyModel, loss: &PyLoss, x: Vec<f64>, class: usize) -> PyResult<Vec<f64>> {
    model::input_gradient(&model.inner, &loss.inner, &x, class).map_err(err)
}

/// PGD attack on one sample; returns the strongest iterate and its loss.
#[pyfunction]
#[pyo3(signature = (model, loss, x, label, epsilon, steps = 100,
                    step_size = 0.01, restarts = 10, input_box = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn pgd_attack<'py>(
    py: Python<'py>,
    model: &PyModel,
    loss: &PyLoss,
    x: Vec<f64>,
    label: usize,
    epsilon: f64,
    steps: u32,
    step_size: f64,
    restarts: u32,
    input_box: Option<Vec<[f64; 2]>>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = AttackConfig {
        epsilon,
        steps,
        step_size,
        restarts,
        input_box,
        seed,
    };
    let out = robustness::pgd_attack(&model.inner, &loss.inner, &x, label, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x_adv", out.x_adv)?;
    d.set_item("loss_achieved", out.loss_achieved)?;
    d.set_item(
        "restart_losses",
        out.per_restart.iter().map(|r| r.loss).collect::<Vec<f64>>(),
    )?;
    Ok(d)
}

/// Argmax class from softmax probabilities (ties → smallest index).
#[pyfunction]
fn classify_softmax(probs: Vec<f64>) -> usize {
    robustness::classify_softmax(&probs)
}

/// Argmax class from a credibility profile (ties → smallest index).
#[pyfunction]
fn classify_credibility(credences: Vec<f64>) -> usize {
    robustness::classify_credibility(&credences)
}

/// Reject-option rule: returns (classify, class).
#[pyfunction]
fn filter_decision(scores: Vec<f64>, alpha: f64) -> PyResult<(bool, usize)> {
    let d = robustness::filter_decision(&scores, alpha).map_err(err)?;
    Ok((d.classify, d.class))
}

/// Exhaustive grid minimization of the constrained problem (p ≤ 2).
/// Returns (r_star, x_star) or None when infeasible.
#[pyfunction]
fn grid_solve_pi(
    model: &PyModel,
    loss: &PyLoss,
    x_origin: Vec<f64>,
    credences: Vec<f64>,
    box_: Vec<(f64, f64)>,
    step: f64,
) -> PyResult<Option<(f64, Vec<f64>)>> {
    let inst = PiInstance::new(model.inner.clone(), loss.inner.clone(), x_origin, credences)
        .map_err(err)?;
    match verify::grid_solve_pi(&inst, &box_, step).map_err(err)? {
        GridSolution::Feasible { r_star, x_star } => Ok(Some((r_star, x_star))),
        GridSolution::Infeasible => Ok(None),
    }
}

/// Unnormalized log-density of the joint failure model at (x, c).
#[pyfunction]
#[pyo3(signature = (model, loss, x_origin, x, credences, t, gamma = None, diag = None))]
#[allow(clippy::too_many_arguments)]
fn log_joint(
    model: &PyModel,
    loss: &PyLoss,
    x_origin: Vec<f64>,
    x: Vec<f64>,
    credences: Vec<f64>,
    t: f64,
    gamma: Option<f64>,
    diag: Option<Vec<f64>>,
) -> PyResult<f64> {
    let weights = weights_from(gamma, diag, loss.inner.num_classes)?;
    let params = BayesParams::new(t, weights).map_err(err)?;
    verify::log_joint(&model.inner, &loss.inner, &x_origin, &x, &credences, &params).map_err(err)
}

#[pymodule]
fn credence_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyLoss>()?;
    m.add_function(wrap_pyfunction!(solve_counterfactual, m)?)?;
    m.add_function(wrap_pyfunction!(credence_at_origin, m)?)?;
    m.add_function(wrap_pyfunction!(input_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(pgd_attack, m)?)?;
    m.add_function(wrap_pyfunction!(classify_softmax, m)?)?;
    m.add_function(wrap_pyfunction!(classify_credibility, m)?)?;
    m.add_function(wrap_pyfunction!(filter_decision, m)?)?;
    m.add_function(wrap_pyfunction!(grid_solve_pi, m)?)?;
    m.add_function(wrap_pyfunction!(log_joint, m)?)?;
    Ok(())
}
