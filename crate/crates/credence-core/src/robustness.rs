//! Attack and evaluation harness: PGD perturbations, softmax- vs
//! credibility-based classification, filtered (reject-option) classifiers,
//! and the risk-aversion sweep over W = γI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::LossBundle;
use crate::model::{credence_at_origin, input_gradient, softmax, DifferentiableModel};
use crate::rng::StreamRng;
use crate::solver::{solve_counterfactual, SolverConfig, SolverStatus, WeightSpec};

/// Projected gradient ascent attack configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// ℓ∞ budget around the clean input.
    pub epsilon: f64,
    pub steps: u32,
    pub step_size: f64,
    pub restarts: u32,
    /// Per-dimension clamp applied after every step (e.g. pixel range).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_box: Option<Vec<[f64; 2]>>,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.01,
            steps: 100,
            step_size: 0.01,
            restarts: 10,
            input_box: None,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("attack epsilon", "must be finite and >= 0"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("attack step size", "must be finite and > 0"));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err(Error::invalid("attack config", "steps and restarts must be >= 1"));
        }
        Ok(())
    }
}

/// Final iterate of one restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub x: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    /// Iterate with the largest achieved loss across restarts.
    pub x_adv: Vec<f64>,
    pub loss_achieved: f64,
    pub per_restart: Vec<RestartOutcome>,
}

fn project_linf(x: &mut [f64], center: &[f64], eps: f64, box_: &Option<Vec<[f64; 2]>>) {
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = xi.clamp(center[i] - eps, center[i] + eps);
        if let Some(b) = box_ {
            *xi = xi.clamp(b[i][0], b[i][1]);
        }
    }
}

/// Maximize ℓ_label(φ(·)) by signed-gradient ascent inside the ℓ∞ ball of
/// radius ε around `x`, intersected with the input box. The first restart
/// starts at `x` itself, so the achieved loss is never below the clean loss;
/// remaining restarts start uniformly in the ball. Ties across restarts keep
/// the earliest, which leaves a zero-gradient model's input untouched.
pub fn pgd_attack(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    label: usize,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    let clean_loss = bundle.loss(&model.forward(x)?, label)?;
    if cfg.epsilon == 0.0 {
        let restart = RestartOutcome {
            x: x.to_vec(),
            loss: clean_loss,
        };
        return Ok(AttackOutcome {
            x_adv: x.to_vec(),
            loss_achieved: clean_loss,
            per_restart: vec![restart; cfg.restarts as usize],
        });
    }

    let mut per_restart = Vec::with_capacity(cfg.restarts as usize);
    for r in 0..cfg.restarts {
        let mut cur = if r == 0 {
            x.to_vec()
        } else {
            let mut rng = StreamRng::new(cfg.seed, "pgd-restart", u64::from(r));
            let mut start = rng.in_linf_ball(x, cfg.epsilon);
            project_linf(&mut start, x, cfg.epsilon, &cfg.input_box);
            start
        };
        for _ in 0..cfg.steps {
            let g = input_gradient(model, bundle, &cur, label)?;
            for (ci, gi) in cur.iter_mut().zip(&g) {
                // sign(0) = 0: no movement where the model is flat
                *ci += cfg.step_size * if *gi > 0.0 { 1.0 } else if *gi < 0.0 { -1.0 } else { 0.0 };
            }
            project_linf(&mut cur, x, cfg.epsilon, &cfg.input_box);
        }
        let loss = bundle.loss(&model.forward(&cur)?, label)?;
        per_restart.push(RestartOutcome { x: cur, loss });
    }

    let best = per_restart
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.loss
                .partial_cmp(&b.loss)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ib.cmp(ia)) // strict max, earliest restart wins ties
        })
        .expect("restarts >= 1");
    Ok(AttackOutcome {
        x_adv: best.1.x.clone(),
        loss_achieved: best.1.loss,
        per_restart,
    })
}

/// Argmax with ties broken toward the smallest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicted class from softmax probabilities.
pub fn classify_softmax(probs: &[f64]) -> usize {
    argmax(probs)
}

/// Predicted class from a credibility profile (least-negative credence).
pub fn classify_credibility(credences: &[f64]) -> usize {
    argmax(credences)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterDecision {
    pub classify: bool,
    pub class: usize,
}

/// Reject-option rule on positive scores: answer only when the runner-up score
/// is at most (1 − α) times the top score.
pub fn filter_decision(scores: &[f64], alpha: f64) -> Result<FilterDecision> {
    if scores.len() < 2 {
        return Err(Error::invalid(
            "filter scores",
            "needs at least two classes",
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1]"));
    }
    let top = argmax(scores);
    let mut second = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        if i != top {
            second = second.max(*s);
        }
    }
    Ok(FilterDecision {
        classify: second <= (1.0 - alpha) * scores[top],
        class: top,
    })
}

/// Per-sample record consumed by the filtering and accuracy reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredibilityRecord {
    pub sample_id: usize,
    pub c_origin: Vec<f64>,
    pub c_dagger: Vec<f64>,
    pub risk: f64,
    pub softmax: Vec<f64>,
    pub label: usize,
    pub status: SolverStatus,
    pub iterations: u64,
    pub residual_fixed_point: f64,
    pub residual_stationarity: f64,
    pub residual_comp_slack: f64,
}

/// Which score feeds the filtered classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Softmax,
    Credibility,
}

impl ScoreSource {
    /// Positive scores for the ratio rule. Softmax probabilities are used
    /// directly; credences are mapped through exp, which is strictly monotone,
    /// so the induced ranking (and argmax) is unchanged.
    pub fn scores(self, record: &CredibilityRecord) -> Vec<f64> {
        match self {
            ScoreSource::Softmax => record.softmax.clone(),
            ScoreSource::Credibility => record.c_dagger.iter().map(|c| c.exp()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRow {
    pub alpha: f64,
    pub coverage: f64,
    /// Accuracy over classified samples; None when nothing is classified.
    pub filtered_accuracy: Option<f64>,
    pub n_classified: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterReport {
    pub source: ScoreSource,
    pub rows: Vec<FilterRow>,
}

impl FilterReport {
    pub fn to_csv(&self, n_total: usize) -> String {
        let mut out = String::from("alpha,coverage,filtered_accuracy,n_classified,n_total\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::report::fmt_f64(row.alpha),
                crate::report::fmt_f64(row.coverage),
                row.filtered_accuracy
                    .map(crate::report::fmt_f64)
                    .unwrap_or_default(),
                row.n_classified,
                n_total,
            ));
        }
        out
    }
}

/// Coverage and filtered accuracy across a threshold grid.
pub fn coverage_curve(
    records: &[CredibilityRecord],
    alphas: &[f64],
    source: ScoreSource,
) -> Result<FilterReport> {
    if records.is_empty() {
        return Err(Error::invalid("coverage curve", "no records"));
    }
    if alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("alphas", "must be sorted ascending"));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut n_classified = 0usize;
        let mut n_correct = 0usize;
        for rec in records {
            let d = filter_decision(&source.scores(rec), alpha)?;
            if d.classify {
                n_classified += 1;
                if d.class == rec.label {
                    n_correct += 1;
                }
            }
        }
        rows.push(FilterRow {
            alpha,
            coverage: n_classified as f64 / records.len() as f64,
            filtered_accuracy: (n_classified > 0)
                .then(|| n_correct as f64 / n_classified as f64),
            n_classified,
        });
    }
    Ok(FilterReport { source, rows })
}

/// Largest α that keeps coverage at or above `target` for the given source.
/// Each record answers for α up to 1 − s₂/s₁, so the k-th largest of those
/// cutoffs achieves coverage k/n.
pub fn alpha_for_coverage(
    records: &[CredibilityRecord],
    source: ScoreSource,
    target: f64,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("coverage target", "no records"));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid("coverage target", "must lie in [0, 1]"));
    }
    if target == 0.0 {
        return Ok(1.0);
    }
    let mut cutoffs: Vec<f64> = Vec::with_capacity(records.len());
    for rec in records {
        let scores = source.scores(rec);
        let top = argmax(&scores);
        let mut second = f64::NEG_INFINITY;
        for (i, s) in scores.iter().enumerate() {
            if i != top {
                second = second.max(*s);
            }
        }
        let cutoff = if scores[top] > 0.0 {
            (1.0 - second / scores[top]).max(0.0)
        } else {
            0.0
        };
        cutoffs.push(cutoff);
    }
    cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let need = ((target * records.len() as f64).ceil() as usize).clamp(1, records.len());
    // back off one notch so rounding in the ratio test cannot drop the
    // marginal record below the target
    Ok((cutoffs[need - 1] - 1e-12).max(0.0))
}

/// Solve the counterfactual problem for every sample and assemble records.
/// Order is deterministic: records are keyed and sorted by sample index.
pub fn solve_records(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    features: &[Vec<f64>],
    labels: &[usize],
    weights: &WeightSpec,
    cfg: &SolverConfig,
) -> Result<Vec<CredibilityRecord>> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let mut records = Vec::with_capacity(features.len());
    for (i, (x, &label)) in features.iter().zip(labels).enumerate() {
        records.push(record_for_sample(model, bundle, x, label, i, weights, cfg)?);
    }
    Ok(records)
}

/// One sample's record: origin credences, solved profile, softmax of the raw
/// model output.
pub fn record_for_sample(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    label: usize,
    sample_id: usize,
    weights: &WeightSpec,
    cfg: &SolverConfig,
) -> Result<CredibilityRecord> {
    let c_origin = credence_at_origin(model, bundle, x)?;
    let z = model.forward(x)?;
    let probs = if matches!(model.kind, crate::model::ModelKind::SoftmaxLinear { .. }) {
        z
    } else {
        softmax(&z)
    };
    let result = solve_counterfactual(model, bundle, x, weights, cfg)?;
    Ok(CredibilityRecord {
        sample_id,
        c_origin,
        softmax: probs,
        label,
        status: result.status,
        iterations: result.iterations,
        residual_fixed_point: result.residuals.fixed_point,
        residual_stationarity: result.residuals.stationarity,
        residual_comp_slack: result.residuals.comp_slack,
        risk: result.risk,
        c_dagger: result.c_dagger,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub median_risk: f64,
    /// Median of ‖c†‖² over converged solves.
    pub median_cred_norm: f64,
    pub n_converged: usize,
    pub n_total: usize,
    /// False when more than 10% of solves failed to converge.
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaSweepReport {
    pub rows: Vec<GammaRow>,
}

impl GammaSweepReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("gamma,median_risk,median_cred_norm,n_converged,n_total,reliable\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::report::fmt_f64(row.gamma),
                crate::report::fmt_f64(row.median_risk),
                crate::report::fmt_f64(row.median_cred_norm),
                row.n_converged,
                row.n_total,
                row.reliable,
            ));
        }
        out
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Risk-aversion sweep: solve every sample under W = γI for each γ and report
/// medians of the risk and of the profile norm. Larger γ prices credence mass
/// more cheaply relative to perturbation, so risk should fall and ‖c†‖² rise
/// along an ascending γ list.
///
/// The dual step is capped at 1/γ per γ — the dual recursion is a contraction
/// only for η_λ < 4/γ, and the configured default would be marginal already at
/// γ = 400.
pub fn gamma_sweep(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    samples: &[Vec<f64>],
    gammas: &[f64],
    cfg: &SolverConfig,
) -> Result<GammaSweepReport> {
    if samples.is_empty() {
        return Err(Error::invalid("gamma sweep", "no samples"));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::invalid("gamma sweep", "gammas must be finite and > 0"));
    }
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let weights = WeightSpec::gamma(bundle.num_classes, gamma);
        let per_gamma = SolverConfig {
            eta_lambda: cfg.eta_lambda.min(1.0 / gamma),
            ..cfg.clone()
        };
        let mut risks = Vec::new();
        let mut norms = Vec::new();
        for x in samples {
            let r = solve_counterfactual(model, bundle, x, &weights, &per_gamma)?;
            if r.converged() {
                risks.push(r.risk);
                norms.push(linalg::norm_sq(&r.c_dagger));
            }
        }
        let n_converged = risks.len();
        rows.push(GammaRow {
            gamma,
            median_risk: median(risks),
            median_cred_norm: median(norms),
            n_converged,
            n_total: samples.len(),
            reliable: n_converged * 10 >= samples.len() * 9,
        });
    }
    Ok(GammaSweepReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(c_dagger: Vec<f64>, softmax: Vec<f64>, label: usize, id: usize) -> CredibilityRecord {
        CredibilityRecord {
            sample_id: id,
            c_origin: c_dagger.clone(),
            c_dagger,
            risk: 0.0,
            softmax,
            label,
            status: SolverStatus::Converged,
            iterations: 1,
            residual_fixed_point: 0.0,
            residual_stationarity: 0.0,
            residual_comp_slack: 0.0,
        }
    }

    #[test]
    fn classify_argmax_and_ties() {
        assert_eq!(classify_softmax(&[0.7, 0.3]), 0);
        assert_eq!(classify_softmax(&[0.5, 0.5]), 0);
        assert_eq!(classify_softmax(&[0.1, 0.2, 0.7]), 2);
        assert_eq!(classify_credibility(&[-0.1, -0.5]), 0);
        assert_eq!(classify_credibility(&[-1.0, -1.0]), 0);
    }

    #[test]
    fn classify_credibility_shift_and_exp_invariant() {
        let c = [-0.3, -2.0, -0.7];
        let base = classify_credibility(&c);
        let shifted: Vec<f64> = c.iter().map(|v| v + 5.0).collect();
        assert_eq!(classify_credibility(&shifted), base);
        let exped: Vec<f64> = c.iter().map(|v| v.exp()).collect();
        assert_eq!(classify_credibility(&exped), base);
    }

    #[test]
    fn filter_decision_rules() {
        // α = 0 always classifies
        assert!(filter_decision(&[0.5, 0.5], 0.0).unwrap().classify);
        // α = 1 never classifies positive scores
        assert!(!filter_decision(&[0.9, 0.1], 1.0).unwrap().classify);
        // worked ratio: 0.3 ≤ 0.5·0.8
        let d = filter_decision(&[0.8, 0.3], 0.5).unwrap();
        assert!(d.classify);
        assert_eq!(d.class, 0);
        assert!(filter_decision(&[1.0], 0.5).is_err());
    }

    #[test]
    fn coverage_curve_endpoints_and_handmade_case() {
        // two confident correct records, one ambiguous wrong one
        let records = vec![
            record(vec![-0.1, -3.0], vec![0.9, 0.1], 0, 0),
            record(vec![-2.5, -0.2], vec![0.2, 0.8], 1, 1),
            record(vec![-0.6, -0.5], vec![0.45, 0.55], 0, 2),
        ];
        let rep = coverage_curve(&records, &[0.0, 0.2, 1.0], ScoreSource::Credibility).unwrap();
        assert_eq!(rep.rows[0].coverage, 1.0);
        let plain_acc = 2.0 / 3.0;
        assert!((rep.rows[0].filtered_accuracy.unwrap() - plain_acc).abs() < 1e-12);
        // α = 0.2 drops the ambiguous record: e^{-0.5}/e^{-0.6} ≈ 0.905 > 0.8
        assert!((rep.rows[1].coverage - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rep.rows[1].filtered_accuracy, Some(1.0));
        // α = 1 answers nothing
        assert_eq!(rep.rows[2].coverage, 0.0);
        assert_eq!(rep.rows[2].filtered_accuracy, None);
        assert_eq!(rep.rows[2].n_classified, 0);
    }

    #[test]
    fn coverage_is_monotone_in_alpha() {
        let mut rng = StreamRng::new(3, "coverage-mono", 0);
        let records: Vec<CredibilityRecord> = (0..40)
            .map(|i| {
                let a = rng.uniform(-3.0, 0.0);
                let b = rng.uniform(-3.0, 0.0);
                let p = rng.uniform(0.05, 0.95);
                record(vec![a, b], vec![p, 1.0 - p], i % 2, i)
            })
            .collect();
        let alphas: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for source in [ScoreSource::Softmax, ScoreSource::Credibility] {
            let rep = coverage_curve(&records, &alphas, source).unwrap();
            for w in rep.rows.windows(2) {
                assert!(w[1].coverage <= w[0].coverage + 1e-12);
            }
        }
    }

    #[test]
    fn alpha_for_coverage_hits_target() {
        let mut rng = StreamRng::new(9, "alpha-target", 0);
        let records: Vec<CredibilityRecord> = (0..50)
            .map(|i| {
                let p = rng.uniform(0.5, 0.99);
                record(vec![-0.1, -1.0], vec![p, 1.0 - p], 0, i)
            })
            .collect();
        for target in [0.2, 0.5, 0.9, 1.0] {
            let alpha = alpha_for_coverage(&records, ScoreSource::Softmax, target).unwrap();
            let rep = coverage_curve(&records, &[alpha], ScoreSource::Softmax).unwrap();
            assert!(
                rep.rows[0].coverage >= target - 1e-12,
                "target {target}: got {}",
                rep.rows[0].coverage
            );
        }
    }

    #[test]
    fn pgd_constant_model_returns_input() {
        let model = DifferentiableModel::constant(2, vec![0.3, -0.3]);
        let bundle = LossBundle::cross_entropy(2);
        let cfg = AttackConfig {
            epsilon: 0.5,
            steps: 10,
            step_size: 0.1,
            restarts: 4,
            input_box: None,
            seed: 5,
        };
        let out = pgd_attack(&model, &bundle, &[0.1, 0.2], 0, &cfg).unwrap();
        assert_eq!(out.x_adv, vec![0.1, 0.2]);
    }

    #[test]
    fn pgd_linear_single_step_moves_by_epsilon() {
        // loss increasing in x: one step of size 0.1 from the clean start
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![-10.0]]);
        let cfg = AttackConfig {
            epsilon: 0.1,
            steps: 1,
            step_size: 0.1,
            restarts: 1,
            input_box: None,
            seed: 0,
        };
        let out = pgd_attack(&model, &bundle, &[1.0], 0, &cfg).unwrap();
        assert!((out.x_adv[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn pgd_zero_epsilon_is_identity() {
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let cfg = AttackConfig {
            epsilon: 0.0,
            ..AttackConfig::default()
        };
        let out = pgd_attack(&model, &bundle, &[0.4], 0, &cfg).unwrap();
        assert_eq!(out.x_adv, vec![0.4]);
    }

    #[test]
    fn pgd_respects_budget_and_box() {
        let model = DifferentiableModel::identity(2);
        let bundle = LossBundle::squared_distance(vec![vec![5.0, 5.0]]);
        let cfg = AttackConfig {
            epsilon: 0.25,
            steps: 50,
            step_size: 0.05,
            restarts: 5,
            input_box: Some(vec![[0.0, 1.0], [0.0, 1.0]]),
            seed: 11,
        };
        let x = [0.9, 0.5];
        let out = pgd_attack(&model, &bundle, &x, 0, &cfg).unwrap();
        for r in &out.per_restart {
            for (xi, ci) in r.x.iter().zip(&x) {
                assert!((xi - ci).abs() <= 0.25 + 1e-12);
                assert!((0.0..=1.0).contains(xi));
            }
        }
        // best over restarts dominates each restart
        for r in &out.per_restart {
            assert!(out.loss_achieved >= r.loss);
        }
    }

    #[test]
    fn gamma_sweep_constant_model_zero_risk() {
        let model = DifferentiableModel::constant(1, vec![0.2, -0.2]);
        let bundle = LossBundle::cross_entropy(2);
        let rep = gamma_sweep(
            &model,
            &bundle,
            &[vec![0.5]],
            &[100.0, 200.0, 400.0],
            &SolverConfig::default(),
        )
        .unwrap();
        for row in &rep.rows {
            assert_eq!(row.median_risk, 0.0);
            assert!(row.reliable);
        }
    }

    #[test]
    fn gamma_sweep_quadratic_matches_closed_form_direction() {
        // K = 1 squared-distance family: risk falls, ‖c†‖² rises with γ
        let model = DifferentiableModel::identity(1);
        let bundle = LossBundle::squared_distance(vec![vec![2.0]]);
        let rep = gamma_sweep(
            &model,
            &bundle,
            &[vec![0.0]],
            &[2.0, 8.0],
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.rows[0].median_risk > rep.rows[1].median_risk);
        assert!(rep.rows[0].median_cred_norm < rep.rows[1].median_cred_norm);

        // per-γ closed form: the fixed point solves λ(1+λ)² = 8/γ with
        // x = 2λ/(1+λ); find the root by bisection and compare risks
        for (row, gamma) in rep.rows.iter().zip([2.0f64, 8.0]) {
            let target = 8.0 / gamma;
            let (mut lo, mut hi) = (0.0f64, 4.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid * (1.0 + mid) * (1.0 + mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let lambda = 0.5 * (lo + hi);
            let x = 2.0 * lambda / (1.0 + lambda);
            assert!(
                (row.median_risk - x * x).abs() < 1e-3,
                "gamma {gamma}: risk {} vs closed form {}",
                row.median_risk,
                x * x
            );
        }
    }

    #[test]
    fn constant_model_classifiers_agree() {
        // c† = c° for constant models, so the credibility argmax matches the
        // softmax argmax of the raw output
        let model = DifferentiableModel::constant(2, vec![0.9, -0.4, 0.1]);
        let bundle = LossBundle::cross_entropy(3);
        let w = WeightSpec::gamma(3, 2.0);
        let x = vec![0.3, -0.8];
        let r = solve_counterfactual(&model, &bundle, &x, &w, &SolverConfig::default()).unwrap();
        assert!(r.converged());
        let probs = crate::model::softmax(&model.forward(&x).unwrap());
        assert_eq!(
            classify_credibility(&r.c_dagger),
            classify_softmax(&probs)
        );
    }

    #[test]
    fn median_is_order_deterministic() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
