//! Independent verification oracles.
//!
//! Nothing in this module reuses the solver's iteration to check the solver:
//! the grid oracle minimizes by exhaustive scan, the sensitivity check compares
//! dual variables against finite differences of that scan, the compromise and
//! MAP checks sample neighborhoods, and the 1-D oracle locates the profile by
//! bisection on a derivative. Residual routines (`kkt_residuals`,
//! `fixed_point_residual`) are straight-line evaluations of the optimality
//! conditions.
//!
//! Sampling-based checks take explicit seeds and draw from
//! [`crate::rng::StreamRng`], so each verdict is reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::LossBundle;
use crate::model::{input_gradient, losses_and_weighted_gradient, DifferentiableModel, ModelKind};
use crate::rng::StreamRng;
use crate::solver::{
    solve_fixed_credence, CounterfactualResult, SolverConfig, WeightSpec,
};

/// Slack allowed before a sampled compromise comparison counts as a violation.
pub const COMPROMISE_TOL: f64 = 1e-8;
/// Margin below which a sampled neighbor is considered to dominate the profile.
pub const MAP_TOL: f64 = 1e-8;

const GRID_REFINE_PASSES: usize = 2;
/// Refinement rescans this many coarse cells around the incumbent. Thin
/// feasible regions (two constraint boundaries crossing at a shallow angle)
/// can park the coarse incumbent several cells from the true minimizer.
const GRID_REFINE_WINDOW: f64 = 8.0;
const GRID_MAX_DIM: usize = 2;

/// A constrained-minimization instance: fixed model, losses, origin, credences.
#[derive(Debug, Clone)]
pub struct PiInstance {
    pub model: DifferentiableModel,
    pub bundle: LossBundle,
    pub x_origin: Vec<f64>,
    pub credences: Vec<f64>,
    /// True when the composed per-class losses are convex in the input, which
    /// holds for affine (or constant) models under every loss family here.
    pub convex: bool,
}

impl PiInstance {
    pub fn new(
        model: DifferentiableModel,
        bundle: LossBundle,
        x_origin: Vec<f64>,
        credences: Vec<f64>,
    ) -> Result<Self> {
        model.validate()?;
        bundle.validate(model.output_dim)?;
        if x_origin.len() != model.input_dim {
            return Err(Error::DimensionMismatch {
                what: "instance origin",
                expected: model.input_dim,
                actual: x_origin.len(),
            });
        }
        if credences.len() != bundle.num_classes {
            return Err(Error::DimensionMismatch {
                what: "instance credences",
                expected: bundle.num_classes,
                actual: credences.len(),
            });
        }
        let convex = matches!(
            model.kind,
            ModelKind::Linear { .. } | ModelKind::Constant { .. }
        );
        Ok(PiInstance {
            model,
            bundle,
            x_origin,
            credences,
            convex,
        })
    }

    pub fn with_credences(&self, credences: Vec<f64>) -> Result<Self> {
        Self::new(
            self.model.clone(),
            self.bundle.clone(),
            self.x_origin.clone(),
            credences,
        )
    }

    fn feasible_at(&self, x: &[f64]) -> Result<bool> {
        let losses = self.bundle.losses(&self.model.forward(x)?)?;
        Ok(losses
            .iter()
            .zip(&self.credences)
            .all(|(l, c)| *l <= -*c))
    }
}

/// Result of the exhaustive grid minimization.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSolution {
    Feasible { r_star: f64, x_star: Vec<f64> },
    Infeasible,
}

impl GridSolution {
    pub fn r_star(&self) -> Option<f64> {
        match self {
            GridSolution::Feasible { r_star, .. } => Some(*r_star),
            GridSolution::Infeasible => None,
        }
    }
}

fn lattice_indices(lo: f64, hi: f64, anchor: f64, step: f64) -> (i64, i64) {
    let first = ((lo - anchor) / step).ceil() as i64;
    let last = ((hi - anchor) / step).floor() as i64;
    (first, last)
}

/// Brute-force minimization of ‖x − x°‖² over grid points satisfying every
/// constraint ℓ_k(φ(x)) ≤ −c_k. The lattice is anchored at x°, so the origin
/// itself is always a candidate; ties prefer the lexicographically smallest
/// grid index. After the base scan, the window around the incumbent is
/// rescanned twice at step/10 and step/100.
///
/// Only p ≤ 2 is supported — the scan is exponential in p, and its whole value
/// is being assumption-free.
pub fn grid_solve_pi(inst: &PiInstance, box_: &[(f64, f64)], step: f64) -> Result<GridSolution> {
    let p = inst.model.input_dim;
    if p > GRID_MAX_DIM {
        return Err(Error::UnsupportedDimension {
            dim: p,
            max: GRID_MAX_DIM,
        });
    }
    if box_.len() != p {
        return Err(Error::DimensionMismatch {
            what: "grid box",
            expected: p,
            actual: box_.len(),
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("grid step", "must be finite and > 0"));
    }
    for (d, (lo, hi)) in box_.iter().enumerate() {
        if !(lo <= &inst.x_origin[d] && &inst.x_origin[d] <= hi) {
            return Err(Error::invalid(
                "grid box",
                format!("must contain the origin in dimension {d}"),
            ));
        }
    }
    // losses are non-negative, so any positive credence is unreachable
    if inst.credences.iter().any(|c| *c > 0.0) {
        return Ok(GridSolution::Infeasible);
    }

    let scan = |window: &[(f64, f64)], step: f64, mut best: Option<(f64, Vec<f64>)>| -> Result<Option<(f64, Vec<f64>)>> {
        let mut consider = |x: &[f64]| -> Result<()> {
            if inst.feasible_at(x)? {
                let r = linalg::dist_sq(x, &inst.x_origin);
                if best.as_ref().map_or(true, |(br, _)| r < *br) {
                    best = Some((r, x.to_vec()));
                }
            }
            Ok(())
        };
        match p {
            1 => {
                let (a, b) = lattice_indices(window[0].0, window[0].1, inst.x_origin[0], step);
                for j in a..=b {
                    consider(&[inst.x_origin[0] + j as f64 * step])?;
                }
            }
            2 => {
                let (a0, b0) = lattice_indices(window[0].0, window[0].1, inst.x_origin[0], step);
                let (a1, b1) = lattice_indices(window[1].0, window[1].1, inst.x_origin[1], step);
                for j0 in a0..=b0 {
                    let x0 = inst.x_origin[0] + j0 as f64 * step;
                    for j1 in a1..=b1 {
                        consider(&[x0, inst.x_origin[1] + j1 as f64 * step])?;
                    }
                }
            }
            _ => unreachable!("dimension checked above"),
        }
        Ok(best)
    };

    let mut best = scan(box_, step, None)?;
    if best.is_none() {
        return Ok(GridSolution::Infeasible);
    }
    let mut cur_step = step;
    for _ in 0..GRID_REFINE_PASSES {
        let incumbent = best.as_ref().expect("incumbent exists").1.clone();
        let reach = GRID_REFINE_WINDOW * cur_step;
        let window: Vec<(f64, f64)> = incumbent
            .iter()
            .zip(box_)
            .map(|(xi, (lo, hi))| ((xi - reach).max(*lo), (xi + reach).min(*hi)))
            .collect();
        cur_step /= 10.0;
        best = scan(&window, cur_step, best)?;
    }
    let (r_star, x_star) = best.expect("feasible incumbent survives refinement");
    Ok(GridSolution::Feasible { r_star, x_star })
}

/// First-order optimality quantities at a candidate primal-dual pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KktReport {
    /// ‖2(x − x°) + Σ_k λ_k ∇ℓ_k(φ(x))‖_∞.
    pub stationarity: f64,
    /// max_k |λ_k (ℓ_k(φ(x)) + c_k)|.
    pub comp_slack: f64,
    /// λ ≥ 0 elementwise.
    pub dual_feas: bool,
    /// max_k max(0, ℓ_k(φ(x)) + c_k).
    pub primal_feas: f64,
}

pub fn kkt_residuals(inst: &PiInstance, x: &[f64], lambda: &[f64]) -> Result<KktReport> {
    if lambda.len() != inst.bundle.num_classes {
        return Err(Error::DimensionMismatch {
            what: "dual variables",
            expected: inst.bundle.num_classes,
            actual: lambda.len(),
        });
    }
    if !linalg::all_finite(lambda) {
        return Err(Error::NonFinite {
            what: "dual variables",
        });
    }
    let (losses, grad) = losses_and_weighted_gradient(&inst.model, &inst.bundle, x, lambda)?;
    let stationarity = x
        .iter()
        .zip(&inst.x_origin)
        .zip(&grad)
        .fold(0.0f64, |m, ((xi, oi), gi)| {
            m.max((2.0 * (xi - oi) + gi).abs())
        });
    let comp_slack = losses
        .iter()
        .zip(&inst.credences)
        .zip(lambda)
        .fold(0.0f64, |m, ((l, c), lam)| m.max((lam * (l + c)).abs()));
    let primal_feas = losses
        .iter()
        .zip(&inst.credences)
        .fold(0.0f64, |m, (l, c)| m.max((l + c).max(0.0)));
    Ok(KktReport {
        stationarity,
        comp_slack,
        dual_feas: lambda.iter().all(|l| *l >= 0.0),
        primal_feas,
    })
}

/// ‖c + ½Wλ‖_∞ — the defect of the counterfactual coupling between credences
/// and dual variables.
pub fn fixed_point_residual(credences: &[f64], lambda: &[f64], weights: &WeightSpec) -> f64 {
    credences
        .iter()
        .zip(lambda)
        .zip(&weights.diag)
        .fold(0.0f64, |m, ((c, lam), w)| m.max((c + 0.5 * w * lam).abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub lambda_solver: Vec<f64>,
    pub grad_fd: Vec<f64>,
    pub max_abs_diff: f64,
}

/// Compare dual variables against the numerical gradient of the perturbation
/// function: solve the instance at fixed credences c for λ, then difference
/// the grid oracle's minimum value at c ± h·e_k. Convex instances only — the
/// dual/derivative identity is a convex-duality fact.
pub fn sensitivity_check(
    inst: &PiInstance,
    credences: &[f64],
    h: f64,
    box_: &[(f64, f64)],
    step: f64,
    cfg: &SolverConfig,
) -> Result<SensitivityReport> {
    if !inst.convex {
        return Err(Error::invalid(
            "sensitivity check",
            "only defined for convex instances",
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("sensitivity step", "must be finite and > 0"));
    }
    let fixed = solve_fixed_credence(&inst.model, &inst.bundle, &inst.x_origin, credences, cfg)?;
    let k = credences.len();
    let mut grad_fd = Vec::with_capacity(k);
    for i in 0..k {
        let mut plus = credences.to_vec();
        plus[i] += h;
        let mut minus = credences.to_vec();
        minus[i] -= h;
        let r_plus = grid_solve_pi(&inst.with_credences(plus)?, box_, step)?
            .r_star()
            .ok_or(Error::InfeasiblePerturbation { coord: i })?;
        let r_minus = grid_solve_pi(&inst.with_credences(minus)?, box_, step)?
            .r_star()
            .ok_or(Error::InfeasiblePerturbation { coord: i })?;
        grad_fd.push((r_plus - r_minus) / (2.0 * h));
    }
    let max_abs_diff = fixed
        .lambda
        .iter()
        .zip(&grad_fd)
        .fold(0.0f64, |m, (l, g)| m.max((l - g).abs()));
    Ok(SensitivityReport {
        lambda_solver: fixed.lambda,
        grad_fd,
        max_abs_diff,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompromiseReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest slack observed; negative values beyond [`COMPROMISE_TOL`]
    /// count as violations.
    pub worst_slack: f64,
}

/// Sample the compromise inequality around a converged profile.
///
/// Comparison points are x′ drawn uniformly in a ball around x† (plus x° and
/// x† themselves), each paired with their tightest feasible credences
/// c′_k = −ℓ_k(φ(x′)) — the choice that makes the right-hand side smallest.
/// The inequality checked per sample:
///
/// ```text
///     r† − ‖x′ − x°‖²  ≤  ‖c′‖²_{W⁻¹} − ‖c†‖²_{W⁻¹} + tol
/// ```
pub fn compromise_check(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: &[f64],
    weights: &WeightSpec,
    result: &CounterfactualResult,
    trials: usize,
    radius: f64,
    seed: u64,
) -> Result<CompromiseReport> {
    if !result.converged() {
        return Err(Error::invalid(
            "compromise check",
            "requires a converged result",
        ));
    }
    let ref_norm = weights.inv_weighted_norm_sq(&result.c_dagger);
    let mut rng = StreamRng::new(seed, "compromise", 0);
    let mut samples = Vec::with_capacity(trials + 2);
    samples.push(result.x_dagger.clone());
    samples.push(x_origin.to_vec());
    for _ in 0..trials {
        samples.push(rng.in_ball(&result.x_dagger, radius));
    }

    let mut violations = 0usize;
    let mut worst_slack = f64::INFINITY;
    for x_prime in &samples {
        let losses = bundle.losses(&model.forward(x_prime)?)?;
        let c_prime: Vec<f64> = losses.iter().map(|l| -l).collect();
        let lhs = result.risk - linalg::dist_sq(x_prime, x_origin);
        let rhs = weights.inv_weighted_norm_sq(&c_prime) - ref_norm;
        let slack = rhs - lhs;
        worst_slack = worst_slack.min(slack);
        if slack < -COMPROMISE_TOL {
            violations += 1;
        }
    }
    Ok(CompromiseReport {
        samples: samples.len(),
        violations,
        worst_slack,
    })
}

/// Joint objective of risk plus weighted credence norm:
/// ‖x − x°‖² + ‖c‖²_{W⁻¹}. A converged profile locally minimizes this over
/// feasible pairs.
pub fn pa_objective(x: &[f64], credences: &[f64], x_origin: &[f64], weights: &WeightSpec) -> f64 {
    linalg::dist_sq(x, x_origin) + weights.inv_weighted_norm_sq(credences)
}

/// Concentration parameter and weight matrix for the probabilistic reading.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesParams {
    pub t: f64,
    pub weights: WeightSpec,
}

impl BayesParams {
    pub fn new(t: f64, weights: WeightSpec) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("concentration t", "must be finite and > 0"));
        }
        weights.validate()?;
        Ok(BayesParams { t, weights })
    }
}

/// Unnormalized log-density of the joint failure model at (x, c):
///
/// ```text
///     −t‖x − x°‖²  −  t Σ_{c_k≠0} ρ_k [ℓ_k(φ(x)) + c_k]  −  t‖c‖²_{W⁻¹}
///                  +  Σ_{c_k≠0} ln(ρ_k t),        ρ_k = 2|c_k| / w_k
/// ```
///
/// The Gaussian piece models input corruption; each shifted-exponential piece
/// penalizes excess of the class loss over the credence bound −c_k at rate
/// ρ_k t (the rate enters by magnitude — with c_k ≤ 0 the signed expression
/// would be a negative rate); the last sum is the rates' normalizers. Terms
/// with c_k = 0 are skipped. Additive constants independent of (x, c, t) are
/// dropped throughout, so only differences at fixed t are meaningful.
pub fn log_joint(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: &[f64],
    x: &[f64],
    credences: &[f64],
    params: &BayesParams,
) -> Result<f64> {
    if credences.len() != bundle.num_classes {
        return Err(Error::DimensionMismatch {
            what: "credences",
            expected: bundle.num_classes,
            actual: credences.len(),
        });
    }
    let t = params.t;
    let losses = bundle.losses(&model.forward(x)?)?;
    let mut lj = -t * linalg::dist_sq(x, x_origin);
    for ((c, l), w) in credences.iter().zip(&losses).zip(&params.weights.diag) {
        lj -= t * c * c / w;
        if *c != 0.0 {
            let rate = 2.0 * c.abs() / w;
            lj -= t * rate * (l + c);
            lj += (rate * t).ln();
        }
    }
    Ok(lj)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapVerdict {
    pub t: f64,
    pub is_local_max: bool,
    /// min over sampled neighbors of log_joint(x†, c†) − log_joint(x′, c†).
    pub margin: f64,
}

/// Check that the converged pair (x†, c†) dominates sampled neighbors of x†
/// in the joint log-density, per concentration value. Neighbors share the
/// profile's credences; the same draw is reused across the schedule so the
/// verdicts are comparable in t.
pub fn map_check(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: &[f64],
    weights: &WeightSpec,
    result: &CounterfactualResult,
    t_schedule: &[f64],
    trials: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<MapVerdict>> {
    if !result.converged() {
        return Err(Error::invalid("map check", "requires a converged result"));
    }
    if t_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "t schedule",
            "must be strictly increasing",
        ));
    }
    let mut rng = StreamRng::new(seed, "map-check", 0);
    let neighbors: Vec<Vec<f64>> = (0..trials)
        .map(|_| rng.in_ball(&result.x_dagger, radius))
        .collect();

    let mut verdicts = Vec::with_capacity(t_schedule.len());
    for &t in t_schedule {
        let params = BayesParams::new(t, weights.clone())?;
        let reference = log_joint(
            model,
            bundle,
            x_origin,
            &result.x_dagger,
            &result.c_dagger,
            &params,
        )?;
        let mut margin = f64::INFINITY;
        for x_prime in &neighbors {
            let lj = log_joint(model, bundle, x_origin, x_prime, &result.c_dagger, &params)?;
            margin = margin.min(reference - lj);
        }
        verdicts.push(MapVerdict {
            t,
            is_local_max: margin >= -MAP_TOL,
            margin,
        });
    }
    Ok(verdicts)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub checked: usize,
    pub violations: usize,
    pub worst_defect: f64,
}

/// Empirical check of the bounded-nonconvexity condition around a reference
/// point: for sampled x and every class k with ℓ_k(φ(x_ref)) > 0,
///
/// ```text
///     ℓ_k(φ(x)) ≥ ℓ_k(φ(x_ref)) + (x − x_ref)ᵀ ∇ℓ_k(φ(x_ref))
///                − [ℓ_k(φ(x)) − ℓ_k(φ(x_ref))]² / (2 ℓ_k(φ(x_ref)))
/// ```
///
/// Classes with vanishing reference loss are skipped (the correction term
/// divides by it). This is a sampled surrogate, not a proof.
pub fn assumption2_check(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_ref: &[f64],
    trials: usize,
    radius: f64,
    seed: u64,
) -> Result<CurvatureReport> {
    let ref_losses = bundle.losses(&model.forward(x_ref)?)?;
    let mut grads = Vec::with_capacity(bundle.num_classes);
    for k in 0..bundle.num_classes {
        grads.push(input_gradient(model, bundle, x_ref, k)?);
    }
    let mut rng = StreamRng::new(seed, "assumption2", 0);
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let x = rng.in_ball(x_ref, radius);
        let losses = bundle.losses(&model.forward(&x)?)?;
        for k in 0..bundle.num_classes {
            let l_ref = ref_losses[k];
            if l_ref <= 1e-12 {
                continue;
            }
            let step: Vec<f64> = linalg::sub(&x, x_ref);
            let linear = l_ref + linalg::dot(&step, &grads[k]);
            let gap = losses[k] - l_ref;
            let bound = linear - gap * gap / (2.0 * l_ref);
            let defect = losses[k] - bound;
            checked += 1;
            worst = worst.min(defect);
            if defect < -1e-9 {
                violations += 1;
            }
        }
    }
    Ok(CurvatureReport {
        checked,
        violations,
        worst_defect: if checked == 0 { 0.0 } else { worst },
    })
}

/// One verification check outcome, CSV-shaped for report files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub instance_id: String,
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Pass iff the residual is within tolerance.
    pub fn within(instance_id: &str, check: &str, residual: f64, tolerance: f64) -> Self {
        CheckRow {
            instance_id: instance_id.to_string(),
            check: check.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    pub const CSV_HEADER: &'static str = "instance_id,check,residual,tolerance,pass";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.instance_id,
            self.check,
            crate::report::fmt_f64(self.residual),
            crate::report::fmt_f64(self.tolerance),
            self.pass
        )
    }
}

/// Profile located by the 1-D oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleProfile {
    pub x: f64,
    pub lambda: Vec<f64>,
    pub credences: Vec<f64>,
    pub risk: f64,
}

/// Independent 1-D profile oracle.
///
/// Any counterfactual fixed point makes every constraint tight, so the profile
/// is a critical point of g(x) = (x − x°)² + Σ_k ℓ_k(φ(x))² / w_k. This scans
/// g on a coarse lattice, then drives g′ to zero by bisection inside the
/// bracketing cell, and reads λ_k = 2 ℓ_k / w_k and c_k = −ℓ_k off the root.
/// Entirely separate from the primal-dual iteration.
pub fn oracle_profile_1d(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x_origin: f64,
    weights: &WeightSpec,
    box_: (f64, f64),
    coarse_step: f64,
) -> Result<OracleProfile> {
    if model.input_dim != 1 {
        return Err(Error::UnsupportedDimension {
            dim: model.input_dim,
            max: 1,
        });
    }
    weights.validate()?;
    let objective = |x: f64| -> Result<f64> {
        let losses = bundle.losses(&model.forward(&[x])?)?;
        Ok((x - x_origin) * (x - x_origin)
            + losses
                .iter()
                .zip(&weights.diag)
                .map(|(l, w)| l * l / w)
                .sum::<f64>())
    };
    let derivative = |x: f64| -> Result<f64> {
        let losses = bundle.losses(&model.forward(&[x])?)?;
        let mut d = 2.0 * (x - x_origin);
        for (k, (l, w)) in losses.iter().zip(&weights.diag).enumerate() {
            d += 2.0 * l / w * input_gradient(model, bundle, &[x], k)?[0];
        }
        Ok(d)
    };

    let (a_idx, b_idx) = lattice_indices(box_.0, box_.1, x_origin, coarse_step);
    let mut best = (f64::INFINITY, x_origin);
    for j in a_idx..=b_idx {
        let x = x_origin + j as f64 * coarse_step;
        let g = objective(x)?;
        if g < best.0 {
            best = (g, x);
        }
    }
    let (mut lo, mut hi) = (best.1 - coarse_step, best.1 + coarse_step);
    if derivative(lo)? < 0.0 && derivative(hi)? > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if derivative(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        // boundary or flat region: fall back to a ternary refinement of g
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if objective(m1)? <= objective(m2)? {
                hi = m2;
            } else {
                lo = m1;
            }
        }
    }
    let x = 0.5 * (lo + hi);

    let losses = bundle.losses(&model.forward(&[x])?)?;
    let lambda: Vec<f64> = losses
        .iter()
        .zip(&weights.diag)
        .map(|(l, w)| 2.0 * l / w)
        .collect();
    let credences: Vec<f64> = losses.iter().map(|l| -l).collect();
    Ok(OracleProfile {
        x,
        lambda,
        credences,
        risk: (x - x_origin) * (x - x_origin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_counterfactual;

    fn quadratic_instance(credences: Vec<f64>) -> PiInstance {
        PiInstance::new(
            DifferentiableModel::identity(1),
            LossBundle::squared_distance(vec![vec![2.0]]),
            vec![0.0],
            credences,
        )
        .unwrap()
    }

    #[test]
    fn grid_positive_credence_is_infeasible() {
        let inst = quadratic_instance(vec![0.5]);
        assert_eq!(
            grid_solve_pi(&inst, &[(-5.0, 5.0)], 1e-3).unwrap(),
            GridSolution::Infeasible
        );
    }

    #[test]
    fn grid_origin_credences_give_zero_risk() {
        // c = c°(x°): the origin is feasible with equality, and on the lattice
        let inst = quadratic_instance(vec![-4.0]);
        match grid_solve_pi(&inst, &[(-5.0, 5.0)], 1e-3).unwrap() {
            GridSolution::Feasible { r_star, x_star } => {
                assert_eq!(r_star, 0.0);
                assert_eq!(x_star, vec![0.0]);
            }
            GridSolution::Infeasible => panic!("origin must be feasible"),
        }
    }

    #[test]
    fn grid_quadratic_closed_form() {
        let inst = quadratic_instance(vec![-1.0]);
        let r = grid_solve_pi(&inst, &[(-5.0, 5.0)], 1e-3)
            .unwrap()
            .r_star()
            .unwrap();
        assert!((r - 1.0).abs() < 1e-3, "r = {r}");
    }

    #[test]
    fn grid_rejects_high_dimensions() {
        let inst = PiInstance::new(
            DifferentiableModel::identity(3),
            LossBundle::squared_distance(vec![vec![0.0; 3]]),
            vec![0.0; 3],
            vec![-1.0],
        )
        .unwrap();
        assert!(matches!(
            grid_solve_pi(&inst, &[(-1.0, 1.0); 3], 0.1),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn kkt_residuals_vanish_at_closed_form_point() {
        let inst = quadratic_instance(vec![-1.0]);
        let rep = kkt_residuals(&inst, &[1.0], &[1.0]).unwrap();
        assert!(rep.stationarity.abs() < 1e-12);
        assert!(rep.comp_slack.abs() < 1e-12);
        assert_eq!(rep.primal_feas, 0.0);
        assert!(rep.dual_feas);
    }

    #[test]
    fn kkt_zero_lambda_at_origin_is_stationary() {
        let inst = quadratic_instance(vec![-9.0]);
        let rep = kkt_residuals(&inst, &[0.0], &[0.0]).unwrap();
        assert_eq!(rep.stationarity, 0.0);
    }

    #[test]
    fn kkt_random_point_matches_recomputation() {
        let inst = quadratic_instance(vec![-1.0]);
        let (x, lam) = (0.7, 0.4);
        let rep = kkt_residuals(&inst, &[x], &[lam]).unwrap();
        let expect_st = (2.0 * x + lam * 2.0 * (x - 2.0)).abs();
        let expect_cs = (lam * ((x - 2.0f64).powi(2) - 1.0)).abs();
        assert!((rep.stationarity - expect_st).abs() < 1e-15);
        assert!((rep.comp_slack - expect_cs).abs() < 1e-15);
        assert!(rep.stationarity > 0.0);
    }

    #[test]
    fn fixed_point_residual_cases() {
        let w = WeightSpec::diagonal(vec![2.0]);
        assert_eq!(fixed_point_residual(&[-1.0], &[1.0], &w), 0.0);
        assert_eq!(fixed_point_residual(&[0.0], &[1.0], &w), 1.0);
        let w13 = WeightSpec::diagonal(vec![1.0, 3.0]);
        let c = [-0.5, -1.5];
        let lam = [1.0, 1.0];
        assert_eq!(fixed_point_residual(&c, &lam, &w13), 0.0);
    }

    #[test]
    fn pa_objective_arithmetic() {
        let w = WeightSpec::diagonal(vec![2.0]);
        assert_eq!(pa_objective(&[0.0], &[0.0], &[0.0], &w), 0.0);
        assert_eq!(pa_objective(&[1.0], &[-1.0], &[0.0], &w), 1.5);
        let w2 = WeightSpec::diagonal(vec![4.0, 0.5]);
        let v = pa_objective(&[0.3, -0.2], &[-2.0, 1.0], &[0.1, 0.1], &w2);
        let expect = (0.2f64 * 0.2 + 0.3 * 0.3) + (4.0 / 4.0 + 1.0 / 0.5);
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn log_joint_degenerate_cases() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let params = BayesParams::new(10.0, WeightSpec::diagonal(vec![2.0])).unwrap();
        // empty product at c = 0
        let lj = log_joint(&model, &bundle, &[0.0], &[0.7], &[0.0], &params).unwrap();
        assert!((lj - (-10.0 * 0.49)).abs() < 1e-12);
        let lj0 = log_joint(&model, &bundle, &[0.0], &[0.0], &[0.0], &params).unwrap();
        assert_eq!(lj0, 0.0);
    }

    #[test]
    fn log_joint_reduces_at_fixed_point() {
        // at (x†, c†) the exponential terms vanish: −t(r† + ‖c†‖²_W⁻¹) + ln(ρt)
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let t = 1e3;
        let params = BayesParams::new(t, WeightSpec::diagonal(vec![2.0])).unwrap();
        let lj = log_joint(&model, &bundle, &[0.0], &[1.0], &[-1.0], &params).unwrap();
        let expect = -t * (1.0 + 0.5) + (1.0 * t).ln();
        assert!((lj - expect).abs() < 1e-9, "{lj} vs {expect}");
    }

    #[test]
    fn map_check_quadratic_dominates_neighbors() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let w = WeightSpec::diagonal(vec![2.0]);
        let cfg = SolverConfig::default().with_tolerances(1e-10);
        let result = solve_counterfactual(&model, &bundle, &[0.0], &w, &cfg).unwrap();
        let verdicts = map_check(
            &model,
            &bundle,
            &[0.0],
            &w,
            &result,
            &[1e2, 1e3, 1e4],
            500,
            1e-2,
            1234,
        )
        .unwrap();
        assert!(verdicts.iter().all(|v| v.is_local_max), "{verdicts:?}");
        // onset is monotone: once true, stays true
        let mut seen_true = false;
        for v in &verdicts {
            if seen_true {
                assert!(v.is_local_max);
            }
            seen_true |= v.is_local_max;
        }
    }

    #[test]
    fn map_check_deliberate_perturbation_is_dominated() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let w = WeightSpec::diagonal(vec![2.0]);
        let cfg = SolverConfig::default().with_tolerances(1e-10);
        let result = solve_counterfactual(&model, &bundle, &[0.0], &w, &cfg).unwrap();
        let params = BayesParams::new(1e4, w.clone()).unwrap();
        let at = |x: f64| {
            log_joint(&model, &bundle, &[0.0], &[x], &result.c_dagger, &params).unwrap()
        };
        assert!(at(result.x_dagger[0]) > at(result.x_dagger[0] + 0.1));
    }

    #[test]
    fn compromise_quadratic_no_violations() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let w = WeightSpec::diagonal(vec![2.0]);
        let cfg = SolverConfig::default().with_tolerances(1e-10);
        let result = solve_counterfactual(&model, &bundle, &[0.0], &w, &cfg).unwrap();
        let rep =
            compromise_check(&model, &bundle, &[0.0], &w, &result, 1000, 0.5, 99).unwrap();
        assert_eq!(rep.violations, 0, "worst slack {}", rep.worst_slack);
        assert_eq!(rep.samples, 1002);
    }

    #[test]
    fn compromise_requires_convergence() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let w = WeightSpec::diagonal(vec![2.0]);
        let cfg = SolverConfig {
            max_iters: 2,
            ..SolverConfig::default()
        };
        let result = solve_counterfactual(&model, &bundle, &[0.0], &w, &cfg).unwrap();
        assert!(compromise_check(&model, &bundle, &[0.0], &w, &result, 10, 0.1, 1).is_err());
    }

    #[test]
    fn sensitivity_quadratic_matches_dual() {
        let inst = quadratic_instance(vec![-1.0]);
        let cfg = SolverConfig::default().with_tolerances(1e-9);
        let rep =
            sensitivity_check(&inst, &[-1.0], 0.05, &[(-5.0, 5.0)], 1e-3, &cfg).unwrap();
        assert!(
            rep.max_abs_diff <= 1e-2,
            "lambda {:?} vs fd {:?}",
            rep.lambda_solver,
            rep.grad_fd
        );
    }

    #[test]
    fn sensitivity_slack_constraint_is_flat() {
        let inst = quadratic_instance(vec![-9.0]);
        let cfg = SolverConfig::default().with_tolerances(1e-9);
        let rep =
            sensitivity_check(&inst, &[-9.0], 0.05, &[(-5.0, 5.0)], 1e-3, &cfg).unwrap();
        assert!(rep.lambda_solver[0].abs() < 1e-6);
        assert!(rep.grad_fd[0].abs() < 1e-6);
    }

    #[test]
    fn oracle_1d_agrees_with_closed_form() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let w = WeightSpec::diagonal(vec![2.0]);
        let prof = oracle_profile_1d(&model, &bundle, 0.0, &w, (-5.0, 5.0), 1e-2).unwrap();
        assert!((prof.x - 1.0).abs() < 1e-10);
        assert!((prof.lambda[0] - 1.0).abs() < 1e-9);
        assert!((prof.credences[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn assumption2_holds_for_convex_composite() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let rep = assumption2_check(&model, &bundle, &[1.0], 500, 0.3, 7).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.checked > 0);
    }
}
