//! Counterfactual primal-dual solver.
//!
//! The profile we want solves
//!
//! ```text
//!     minimize ‖x − x°‖²   subject to   ℓ_k(φ(x)) ≤ −c_k  for every class k
//! ```
//!
//! except that the credences c are not given: they must close the loop
//! c = −½ W λ against the dual variables λ of the very problem they define.
//! Substituting that relation into the dual ascent step of the classical
//! Arrow-Hurwicz saddle-point iteration gives the update pair
//!
//! ```text
//!     x⁺   = x − η_x [ 2(x − x°) + Σ_k λ_k ∇_x ℓ_k(φ(x)) ]
//!     λ_k⁺ = [ λ_k + η_λ ( ℓ_k(φ(x)) − ½ w_k λ_k ) ]₊
//! ```
//!
//! whose fixed points deliver the profile directly: at convergence,
//! ℓ_k(φ(x†)) = ½ w_k λ_k for every k, so setting c† = −½Wλ makes every
//! constraint tight and (x†, λ) a KKT pair for the resulting problem.
//!
//! [`solve_fixed_credence`] keeps the classical dual update
//! λ_k⁺ = [λ_k + η_λ(ℓ_k(φ(x)) + c_k)]₊ for a user-supplied c; it is the
//! reference implementation behind the dual-variable sensitivity checks.
//!
//! The iteration is not guaranteed to converge for non-convex models. Runs
//! that wander past a norm cap or produce non-finite values stop with
//! [`SolverStatus::Diverged`]; exhausted iteration budgets stop with
//! [`SolverStatus::MaxIters`]. Both still report the last iterate and its
//! residuals so callers can diagnose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::LossBundle;
use crate::model::{losses_and_weighted_gradient, DifferentiableModel};

/// Diagonal positive definite weight matrix W, optionally the γI shorthand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightSpec {
    pub diag: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl WeightSpec {
    /// W = γI for `num_classes` classes.
    pub fn gamma(num_classes: usize, gamma: f64) -> Self {
        WeightSpec {
            diag: vec![gamma; num_classes],
            gamma: Some(gamma),
        }
    }

    pub fn diagonal(diag: Vec<f64>) -> Self {
        WeightSpec { diag, gamma: None }
    }

    pub fn num_classes(&self) -> usize {
        self.diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.diag.is_empty() {
            return Err(Error::invalid("weights", "diagonal must be non-empty"));
        }
        if !self.diag.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(Error::invalid(
                "weights",
                "diagonal entries must be finite and strictly positive",
            ));
        }
        Ok(())
    }

    /// ‖v‖²_{W⁻¹} = Σ_k v_k² / w_k.
    pub fn inv_weighted_norm_sq(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.diag).map(|(vi, wi)| vi * vi / wi).sum()
    }
}

/// Initial dual variables: a broadcast scalar or an explicit vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaInit {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Default for LambdaInit {
    fn default() -> Self {
        LambdaInit::Scalar(1.0)
    }
}

impl LambdaInit {
    fn materialize(&self, k: usize) -> Result<Vec<f64>> {
        let v = match self {
            LambdaInit::Scalar(s) => vec![*s; k],
            LambdaInit::Vector(v) => v.clone(),
        };
        if v.len() != k {
            return Err(Error::DimensionMismatch {
                what: "lambda_init",
                expected: k,
                actual: v.len(),
            });
        }
        if !v.iter().all(|l| *l >= 0.0 && l.is_finite()) {
            return Err(Error::invalid("lambda_init", "entries must be >= 0 and finite"));
        }
        Ok(v)
    }
}

/// Geometric step-size decay, disabled by default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDecay {
    pub factor: f64,
    pub every: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eta_x: f64,
    pub eta_lambda: f64,
    pub max_iters: u64,
    pub fixed_point_tol: f64,
    pub stationarity_tol: f64,
    /// Divergence is declared when ‖x − x°‖₂ > cap · (1 + ‖x°‖₂).
    pub divergence_norm_cap: f64,
    pub lambda_init: LambdaInit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_decay: Option<StepDecay>,
    /// Optional per-dimension clamp applied after each primal step, for
    /// image-like data with a declared range. Off by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_box: Option<Vec<[f64; 2]>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta_x: 1e-3,
            eta_lambda: 1e-2,
            max_iters: 50_000,
            fixed_point_tol: 1e-6,
            stationarity_tol: 1e-6,
            divergence_norm_cap: 1e3,
            lambda_init: LambdaInit::default(),
            step_decay: None,
            clamp_box: None,
        }
    }
}

impl SolverConfig {
    /// Same schedule, tighter stopping residuals.
    pub fn with_tolerances(mut self, tol: f64) -> Self {
        self.fixed_point_tol = tol;
        self.stationarity_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 5] = [
            ("eta_x", self.eta_x),
            ("eta_lambda", self.eta_lambda),
            ("fixed_point_tol", self.fixed_point_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("divergence_norm_cap", self.divergence_norm_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("solver config", format!("{name} must be > 0")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver config", "max_iters must be >= 1"));
        }
        if let Some(d) = &self.step_decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) || d.every == 0 {
                return Err(Error::invalid(
                    "solver config",
                    "step decay needs factor in (0,1] and every >= 1",
                ));
            }
        }
        if let Some(b) = &self.clamp_box {
            if b.iter().any(|r| r[0] > r[1]) {
                return Err(Error::invalid("solver config", "clamp box has lo > hi"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Diverged,
}

/// Residuals at the returned iterate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Residuals {
    /// ‖ℓ(φ(x)) − ½Wλ‖_∞ — the counterfactual fixed-point defect.
    pub fixed_point: f64,
    /// ‖2(x − x°) + Σ_k λ_k ∇ℓ_k‖_∞ — Lagrangian stationarity defect.
    pub stationarity: f64,
    /// max_k |λ_k (ℓ_k(φ(x)) + c_k)| with c = −½Wλ.
    pub comp_slack: f64,
}

/// Output of the counterfactual solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub x_dagger: Vec<f64>,
    pub lambda: Vec<f64>,
    /// c† = −½Wλ, computed from `lambda` elementwise.
    pub c_dagger: Vec<f64>,
    /// ‖x† − x°‖².
    pub risk: f64,
    pub iterations: u64,
    pub status: SolverStatus,
    pub residuals: Residuals,
}

impl CounterfactualResult {
    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

/// One primal descent step on the Lagrangian.
pub fn primal_step(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    lambda: &[f64],
    x_origin: &[f64],
    eta_x: f64,
) -> Result<Vec<f64>> {
    let (_, grad) = losses_and_weighted_gradient(model, bundle, x, lambda)?;
    if !linalg::all_finite(&grad) {
        return Err(Error::NonFinite {
            what: "weighted loss gradient",
        });
    }
    Ok(x.iter()
        .zip(x_origin)
        .zip(&grad)
        .map(|((xi, oi), gi)| xi - eta_x * (2.0 * (xi - oi) + gi))
        .collect())
}

/// One projected dual step with the counterfactual update.
/// `losses` are the current ℓ_k(φ(x)).
pub fn dual_step(losses: &[f64], lambda: &[f64], weights: &WeightSpec, eta_lambda: f64) -> Vec<f64> {
    losses
        .iter()
        .zip(lambda)
        .zip(&weights.diag)
        .map(|((l, lam), w)| (lam + eta_lambda * (l - 0.5 * w * lam)).max(0.0))
        .collect()
}

/// Classical projected dual step for fixed credences c.
pub fn dual_step_fixed(losses: &[f64], lambda: &[f64], credences: &[f64], eta_lambda: f64) -> Vec<f64> {
    losses
        .iter()
        .zip(lambda)
        .zip(credences)
        .map(|((l, lam), c)| (lam + eta_lambda * (l + c)).max(0.0))
        .collect()
}

fn clamp_in_place(x: &mut [f64], box_: &Option<Vec<[f64; 2]>>) {
    if let Some(b) = box_ {
        for (xi, r) in x.iter_mut().zip(b) {
            *xi = xi.clamp(r[0], r[1]);
        }
    }
}

struct IterState {
    losses: Vec<f64>,
    grad: Vec<f64>,
    stationarity: f64,
}

fn evaluate(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    lambda: &[f64],
    x_origin: &[f64],
) -> Result<IterState> {
    let (losses, grad) = losses_and_weighted_gradient(model, bundle, x, lambda)?;
    let stationarity = x
        .iter()
        .zip(x_origin)
        .zip(&grad)
        .fold(0.0f64, |m, ((xi, oi), gi)| {
            m.max((2.0 * (xi - oi) + gi).abs())
        });
    Ok(IterState {
        losses,
        grad,
        stationarity,
    })
}

fn diverged(x: &[f64], lambda: &[f64], x_origin: &[f64], cap: f64) -> bool {
    !linalg::all_finite(x)
        || !linalg::all_finite(lambda)
        || linalg::dist_sq(x, x_origin).sqrt() > cap * (1.0 + linalg::norm_l2(x_origin))
}

/// Run the counterfactual iteration from x⁽⁰⁾ = x°, λ⁽⁰⁾ per config (default 𝟙).
///
/// Stops as soon as both the fixed-point and stationarity residuals are within
/// tolerance. The returned `c_dagger` is exactly −½Wλ for the returned λ.
pub fn solve_counterfactual(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: &[f64],
    weights: &WeightSpec,
    cfg: &SolverConfig,
) -> Result<CounterfactualResult> {
    cfg.validate()?;
    weights.validate()?;
    model.validate()?;
    bundle.validate(model.output_dim)?;
    if weights.num_classes() != bundle.num_classes {
        return Err(Error::DimensionMismatch {
            what: "weight diagonal",
            expected: bundle.num_classes,
            actual: weights.num_classes(),
        });
    }
    if !linalg::all_finite(x_origin) {
        return Err(Error::NonFinite { what: "origin input" });
    }

    let mut x = x_origin.to_vec();
    clamp_in_place(&mut x, &cfg.clamp_box);
    let mut lambda = cfg.lambda_init.materialize(bundle.num_classes)?;
    let mut eta_x = cfg.eta_x;
    let mut eta_lambda = cfg.eta_lambda;

    let mut iterations = 0u64;
    let finish = |x: Vec<f64>, lambda: Vec<f64>, iterations: u64, status: SolverStatus, st: &IterState| {
        let c_dagger: Vec<f64> = lambda
            .iter()
            .zip(&weights.diag)
            .map(|(l, w)| -0.5 * w * l)
            .collect();
        let fixed_point = st
            .losses
            .iter()
            .zip(&c_dagger)
            .fold(0.0f64, |m, (l, c)| m.max((l + c).abs()));
        let comp_slack = st
            .losses
            .iter()
            .zip(&c_dagger)
            .zip(&lambda)
            .fold(0.0f64, |m, ((l, c), lam)| m.max((lam * (l + c)).abs()));
        let risk = linalg::dist_sq(&x, x_origin);
        CounterfactualResult {
            risk,
            x_dagger: x,
            lambda,
            c_dagger,
            iterations,
            status,
            residuals: Residuals {
                fixed_point,
                stationarity: st.stationarity,
                comp_slack,
            },
        }
    };

    loop {
        let st = match evaluate(model, bundle, &x, &lambda, x_origin) {
            Ok(st) => st,
            Err(Error::NonFinite { .. }) => {
                // salvage what we can for diagnosis
                let st = IterState {
                    losses: vec![f64::NAN; bundle.num_classes],
                    grad: vec![f64::NAN; x.len()],
                    stationarity: f64::NAN,
                };
                return Ok(finish(x, lambda, iterations, SolverStatus::Diverged, &st));
            }
            Err(e) => return Err(e),
        };

        let fixed_point = st
            .losses
            .iter()
            .zip(&lambda)
            .zip(&weights.diag)
            .fold(0.0f64, |m, ((l, lam), w)| m.max((l - 0.5 * w * lam).abs()));
        if fixed_point <= cfg.fixed_point_tol && st.stationarity <= cfg.stationarity_tol {
            return Ok(finish(x, lambda, iterations, SolverStatus::Converged, &st));
        }
        if iterations >= cfg.max_iters {
            return Ok(finish(x, lambda, iterations, SolverStatus::MaxIters, &st));
        }

        // simultaneous update, both sides evaluated at the current iterate
        let new_x: Vec<f64> = x
            .iter()
            .zip(x_origin)
            .zip(&st.grad)
            .map(|((xi, oi), gi)| xi - eta_x * (2.0 * (xi - oi) + gi))
            .collect();
        let new_lambda = dual_step(&st.losses, &lambda, weights, eta_lambda);
        x = new_x;
        clamp_in_place(&mut x, &cfg.clamp_box);
        lambda = new_lambda;
        iterations += 1;

        if let Some(d) = &cfg.step_decay {
            if iterations % d.every == 0 {
                eta_x *= d.factor;
                eta_lambda *= d.factor;
            }
        }

        if diverged(&x, &lambda, x_origin, cfg.divergence_norm_cap) {
            let st = evaluate(model, bundle, &x, &lambda, x_origin).unwrap_or(IterState {
                losses: vec![f64::NAN; bundle.num_classes],
                grad: vec![f64::NAN; x.len()],
                stationarity: f64::NAN,
            });
            return Ok(finish(x, lambda, iterations, SolverStatus::Diverged, &st));
        }
    }
}

/// Residuals for a fixed-credence solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub comp_slack: f64,
    /// max_k max(0, ℓ_k(φ(x)) + c_k).
    pub primal_feasibility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedCredenceResult {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub risk: f64,
    pub iterations: u64,
    pub status: SolverStatus,
    pub residuals: KktResiduals,
}

/// Arrow-Hurwicz iteration at fixed credences: seeks a KKT point of the
/// constrained problem for the given c. Used by the sensitivity oracle, where
/// the dual variables at a prescribed c are the object of interest.
pub fn solve_fixed_credence(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: &[f64],
    credences: &[f64],
    cfg: &SolverConfig,
) -> Result<FixedCredenceResult> {
    cfg.validate()?;
    model.validate()?;
    bundle.validate(model.output_dim)?;
    if credences.len() != bundle.num_classes {
        return Err(Error::DimensionMismatch {
            what: "credences",
            expected: bundle.num_classes,
            actual: credences.len(),
        });
    }
    if !linalg::all_finite(x_origin) || !linalg::all_finite(credences) {
        return Err(Error::NonFinite {
            what: "fixed-credence inputs",
        });
    }

    let mut x = x_origin.to_vec();
    let mut lambda = cfg.lambda_init.materialize(bundle.num_classes)?;
    let mut iterations = 0u64;

    let residuals_at = |st: &IterState, lambda: &[f64]| {
        let comp_slack = st
            .losses
            .iter()
            .zip(credences)
            .zip(lambda)
            .fold(0.0f64, |m, ((l, c), lam)| m.max((lam * (l + c)).abs()));
        let primal = st
            .losses
            .iter()
            .zip(credences)
            .fold(0.0f64, |m, (l, c)| m.max((l + c).max(0.0)));
        KktResiduals {
            stationarity: st.stationarity,
            comp_slack,
            primal_feasibility: primal,
        }
    };

    loop {
        let st = evaluate(model, bundle, &x, &lambda, x_origin)?;
        let res = residuals_at(&st, &lambda);
        let done = res.stationarity <= cfg.stationarity_tol
            && res.comp_slack <= cfg.fixed_point_tol
            && res.primal_feasibility <= cfg.fixed_point_tol;
        let status = if done {
            Some(SolverStatus::Converged)
        } else if iterations >= cfg.max_iters {
            Some(SolverStatus::MaxIters)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(FixedCredenceResult {
                risk: linalg::dist_sq(&x, x_origin),
                x,
                lambda,
                iterations,
                status,
                residuals: res,
            });
        }

        let new_x: Vec<f64> = x
            .iter()
            .zip(x_origin)
            .zip(&st.grad)
            .map(|((xi, oi), gi)| xi - cfg.eta_x * (2.0 * (xi - oi) + gi))
            .collect();
        lambda = dual_step_fixed(&st.losses, &lambda, credences, cfg.eta_lambda);
        x = new_x;
        iterations += 1;

        if diverged(&x, &lambda, x_origin, cfg.divergence_norm_cap) {
            let st = evaluate(model, bundle, &x, &lambda, x_origin)?;
            let res = residuals_at(&st, &lambda);
            return Ok(FixedCredenceResult {
                risk: linalg::dist_sq(&x, x_origin),
                x,
                lambda,
                iterations,
                status: SolverStatus::Diverged,
                residuals: res,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::credence_at_origin;

    fn quadratic() -> (DifferentiableModel, LossBundle, Vec<f64>, WeightSpec) {
        (
            DifferentiableModel::identity(1),
            LossBundle::squared_distance(vec![vec![2.0]]),
            vec![0.0],
            WeightSpec::diagonal(vec![2.0]),
        )
    }

    #[test]
    fn primal_step_zero_lambda_at_origin_is_fixed() {
        let (m, b, x0, _) = quadratic();
        let x = primal_step(&m, &b, &x0, &[0.0], &x0, 0.1).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn primal_step_stationary_point_arithmetic() {
        // x⁺ = 1 − 0.1·(2·1 + 1·(−2)) = 1
        let (m, b, x0, _) = quadratic();
        let x = primal_step(&m, &b, &[1.0], &[1.0], &x0, 0.1).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn dual_step_formula_and_projection() {
        let w = WeightSpec::diagonal(vec![0.2]);
        let out = dual_step(&[0.5], &[1.0], &w, 0.1);
        assert!((out[0] - 1.04).abs() < 1e-15);

        let w0 = WeightSpec::diagonal(vec![1.0]);
        assert_eq!(dual_step(&[0.0], &[0.0], &w0, 0.1), vec![0.0]);

        let w4 = WeightSpec::diagonal(vec![4.0]);
        assert_eq!(dual_step(&[0.0], &[0.1], &w4, 1.0), vec![0.0]);
    }

    #[test]
    fn quadratic_instance_reaches_closed_form() {
        let (m, b, x0, w) = quadratic();
        let r = solve_counterfactual(&m, &b, &x0, &w, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Converged);
        assert!((r.x_dagger[0] - 1.0).abs() < 1e-4, "x = {}", r.x_dagger[0]);
        assert!((r.lambda[0] - 1.0).abs() < 1e-4);
        assert!((r.c_dagger[0] + 1.0).abs() < 1e-4);
        assert!((r.risk - 1.0).abs() < 3e-4);
    }

    #[test]
    fn constant_model_profile_equals_origin_credence() {
        let m = DifferentiableModel::constant(2, vec![0.5, -0.5]);
        let b = LossBundle::cross_entropy(2);
        let x0 = vec![0.3, -0.9];
        let w = WeightSpec::diagonal(vec![1.0, 3.0]);
        let r = solve_counterfactual(&m, &b, &x0, &w, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Converged);
        assert_eq!(r.x_dagger, x0);
        assert_eq!(r.risk, 0.0);
        let c0 = credence_at_origin(&m, &b, &x0).unwrap();
        for ((c, c0), (lam, w)) in r
            .c_dagger
            .iter()
            .zip(&c0)
            .zip(r.lambda.iter().zip(&w.diag))
        {
            assert!((c - c0).abs() <= 1e-6, "{c} vs {c0}");
            // λ_k = 2 ℓ_k / w_k at the fixed point
            assert!((lam - 2.0 * (-c0) / w).abs() < 1e-5);
        }
    }

    #[test]
    fn c_dagger_is_exactly_minus_half_w_lambda() {
        let (m, b, x0, w) = quadratic();
        let r = solve_counterfactual(&m, &b, &x0, &w, &SolverConfig::default()).unwrap();
        for ((c, lam), wk) in r.c_dagger.iter().zip(&r.lambda).zip(&w.diag) {
            assert_eq!(c.to_bits(), (-0.5 * wk * lam).to_bits());
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let (m, b, x0, w) = quadratic();
        let cfg = SolverConfig::default();
        let r1 = solve_counterfactual(&m, &b, &x0, &w, &cfg).unwrap();
        let r2 = solve_counterfactual(&m, &b, &x0, &w, &cfg).unwrap();
        assert_eq!(r1.iterations, r2.iterations);
        assert_eq!(r1.x_dagger[0].to_bits(), r2.x_dagger[0].to_bits());
        assert_eq!(r1.lambda[0].to_bits(), r2.lambda[0].to_bits());
    }

    #[test]
    fn divergence_is_reported_not_hung() {
        // gradient step far too large for the curvature
        let (m, b, x0, w) = quadratic();
        let cfg = SolverConfig {
            eta_x: 2.0,
            ..SolverConfig::default()
        };
        let r = solve_counterfactual(&m, &b, &x0, &w, &cfg).unwrap();
        assert_eq!(r.status, SolverStatus::Diverged);
    }

    #[test]
    fn max_iters_reported_with_last_iterate() {
        let (m, b, x0, w) = quadratic();
        let cfg = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default()
        };
        let r = solve_counterfactual(&m, &b, &x0, &w, &cfg).unwrap();
        assert_eq!(r.status, SolverStatus::MaxIters);
        assert_eq!(r.iterations, 3);
        assert!(r.residuals.fixed_point.is_finite());
    }

    #[test]
    fn lambda_stays_nonnegative_along_run() {
        let (m, b, x0, _) = quadratic();
        let w = WeightSpec::diagonal(vec![6.0]);
        let mut x = x0.clone();
        let mut lambda = vec![1.0];
        for _ in 0..2000 {
            let losses = vec![b.loss(&m.forward(&x).unwrap(), 0).unwrap()];
            x = primal_step(&m, &b, &x, &lambda, &x0, 1e-3).unwrap();
            lambda = dual_step(&losses, &lambda, &w, 0.5);
            assert!(lambda[0] >= 0.0);
        }
    }

    #[test]
    fn fixed_credence_solve_recovers_kkt_point() {
        // same quadratic at c = −1: x* = 1, λ* = 1
        let (m, b, x0, _) = quadratic();
        let cfg = SolverConfig::default().with_tolerances(1e-9);
        let r = solve_fixed_credence(&m, &b, &x0, &[-1.0], &cfg).unwrap();
        assert_eq!(r.status, SolverStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4);
        assert!((r.lambda[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fixed_credence_slack_constraint_drops_lambda_to_zero() {
        // c = −9 keeps the constraint inactive at the unconstrained optimum x°
        let (m, b, x0, _) = quadratic();
        let r =
            solve_fixed_credence(&m, &b, &x0, &[-9.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Converged);
        assert!(r.lambda[0].abs() < 1e-9);
        assert!(r.x[0].abs() < 1e-6);
    }

    #[test]
    fn different_lambda_inits_reach_same_profile_on_convex_instance() {
        let (m, b, x0, w) = quadratic();
        let base = SolverConfig::default().with_tolerances(1e-10);
        let a = solve_counterfactual(&m, &b, &x0, &w, &base).unwrap();
        let cfg2 = SolverConfig {
            lambda_init: LambdaInit::Scalar(7.0),
            ..SolverConfig::default().with_tolerances(1e-10)
        };
        let c = solve_counterfactual(&m, &b, &x0, &w, &cfg2).unwrap();
        assert!((a.c_dagger[0] - c.c_dagger[0]).abs() < 1e-8);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad = SolverConfig {
            eta_x: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(WeightSpec::diagonal(vec![1.0, 0.0]).validate().is_err());
    }
}
