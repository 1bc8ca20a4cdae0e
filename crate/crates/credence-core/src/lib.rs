//! Credibility profiles for classifier predictions.
//!
//! Given a trained differentiable model and a per-class loss, the credence a
//! prediction deserves can be read off the negated losses. That raw score is
//! fragile: it reflects one point evaluation of a possibly miscalibrated,
//! possibly attacked model. This crate computes a stabler quantity — a
//! credibility profile obtained by trading off how much a perturbation of the
//! input improves the fit against how far it strays from the original input —
//! and ships the machinery to verify, numerically and independently, every
//! property that profile is supposed to satisfy.
//!
//! The pieces:
//!
//! - [`model`] / [`loss`]: differentiable models φ: ℝᵖ → ℝᵐ with exact
//!   reverse-mode input gradients, and smooth non-negative per-class losses.
//! - [`solver`]: the counterfactual primal-dual iteration that finds the
//!   profile, plus a fixed-credence variant for dual-variable studies.
//! - [`verify`]: independent oracles — exhaustive grid minimization, KKT and
//!   fixed-point residuals, dual-vs-sensitivity comparison, compromise
//!   inequality sampling, and the Bayesian log-joint with its local-maximum
//!   check.
//! - [`robustness`]: PGD attacks, softmax/credibility classifiers, filtered
//!   classification curves, and the risk-aversion sweep.
//! - [`instances`]: built-in problem families used by the verification
//!   harness, including synthetic datasets and a desk-scale trained classifier.
//! - [`dataset`]: CSV-backed feature/label storage with an optional
//!   feature-range sidecar.
//!
//! Everything is `f64`, deterministic, and safe to evaluate concurrently;
//! sampling routines take explicit seeds and use a counter-based generator
//! ([`rng::StreamRng`]) so results do not depend on thread scheduling.

pub mod dataset;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod report;
pub mod rng;
pub mod robustness;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use loss::{LossBundle, LossKind};
pub use model::{
    credence_at_origin, input_gradient, softmax, Activation, DenseLayer, DifferentiableModel,
    ModelKind,
};
pub use solver::{
    dual_step, primal_step, solve_counterfactual, solve_fixed_credence, CounterfactualResult,
    SolverConfig, SolverStatus, WeightSpec,
};
