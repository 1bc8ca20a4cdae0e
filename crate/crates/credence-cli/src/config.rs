//! Run configuration: one JSON document per run, with CLI flags overriding
//! individual fields. Every numeric field is validated against the owning
//! module's invariants before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use credence_core::loss::LossBundle;
use credence_core::solver::{SolverConfig, WeightSpec};

/// W as either the γI shorthand or an explicit diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightConfig {
    Gamma { gamma: f64 },
    Diagonal { diag: Vec<f64> },
}

impl WeightConfig {
    pub fn to_spec(&self, num_classes: usize) -> Result<WeightSpec> {
        let spec = match self {
            WeightConfig::Gamma { gamma } => WeightSpec::gamma(num_classes, *gamma),
            WeightConfig::Diagonal { diag } => WeightSpec::diagonal(diag.clone()),
        };
        spec.validate()?;
        if spec.num_classes() != num_classes {
            bail!(
                "weight diagonal has {} entries, loss bundle has {} classes",
                spec.num_classes(),
                num_classes
            );
        }
        Ok(spec)
    }
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::Gamma { gamma: 200.0 }
    }
}

/// Attack settings; `epsilons` is swept, the rest is shared.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSection {
    pub epsilons: Vec<f64>,
    pub steps: u32,
    pub step_size: f64,
    pub restarts: u32,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            epsilons: vec![0.01, 0.02, 0.03],
            steps: 100,
            step_size: 0.01,
            restarts: 10,
        }
    }
}

/// The run configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Previously written credibility CSV, reused by `filter-curve`.
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub loss: Option<LossBundle>,
    pub weights: WeightConfig,
    pub solver: SolverConfig,
    pub alphas: Vec<f64>,
    /// When set, `filter-curve` additionally calibrates a per-source α for
    /// each coverage target.
    pub coverage_targets: Option<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub attack: AttackSection,
    pub t_schedule: Vec<f64>,
    /// `credibility` exits nonzero when the non-converged fraction exceeds this.
    pub max_nonconverged_rate: f64,
    /// Sample count for the sampling-based checks in `verify`.
    pub verify_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            dataset: None,
            records: None,
            out: None,
            seed: 0,
            jobs: 1,
            loss: None,
            weights: WeightConfig::default(),
            solver: SolverConfig::default(),
            alphas: (0..=20).map(|i| i as f64 / 20.0).collect(),
            coverage_targets: None,
            gammas: vec![100.0, 200.0, 400.0],
            attack: AttackSection::default(),
            t_schedule: vec![1e2, 1e3, 1e4],
            max_nonconverged_rate: 0.1,
            verify_trials: 500,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&body)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        if let Some(loss) = &self.loss {
            if loss.num_classes == 0 {
                bail!("loss bundle needs at least one class");
            }
        }
        if self.alphas.is_empty() || self.alphas.windows(2).any(|w| w[0] > w[1]) {
            bail!("alphas must be non-empty and sorted ascending");
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            bail!("alphas must lie in [0, 1]");
        }
        if let Some(targets) = &self.coverage_targets {
            if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
                bail!("coverage targets must lie in [0, 1]");
            }
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            bail!("gammas must be non-empty, finite and positive");
        }
        if self
            .attack
            .epsilons
            .iter()
            .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            bail!("attack epsilons must be finite and >= 0");
        }
        if self.attack.steps == 0 || self.attack.restarts == 0 {
            bail!("attack steps and restarts must be >= 1");
        }
        if !(self.attack.step_size > 0.0 && self.attack.step_size.is_finite()) {
            bail!("attack step_size must be finite and positive");
        }
        if self.t_schedule.is_empty() || self.t_schedule.windows(2).any(|w| w[0] >= w[1]) {
            bail!("t_schedule must be non-empty and strictly increasing");
        }
        if self.t_schedule.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            bail!("t_schedule entries must be finite and positive");
        }
        if !(0.0..=1.0).contains(&self.max_nonconverged_rate) {
            bail!("max_nonconverged_rate must lie in [0, 1]");
        }
        if self.verify_trials == 0 {
            bail!("verify_trials must be >= 1");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gets_valid_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.gammas, vec![100.0, 200.0, 400.0]);
        assert_eq!(cfg.attack.epsilons, vec![0.01, 0.02, 0.03]);
        assert_eq!(cfg.attack.steps, 100);
    }

    #[test]
    fn bad_fields_are_rejected_before_compute() {
        let cfg: RunConfig = serde_json::from_str(r#"{"gammas": [0.0]}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"alphas": [0.5, 0.1]}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig =
            serde_json::from_str(r#"{"solver": {"eta_x": -1.0}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"t_schedule": [10.0, 10.0]}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn weight_config_forms() {
        let g: WeightConfig = serde_json::from_str(r#"{"gamma": 50.0}"#).unwrap();
        assert_eq!(g.to_spec(3).unwrap().diag, vec![50.0; 3]);
        let d: WeightConfig = serde_json::from_str(r#"{"diag": [1.0, 2.0]}"#).unwrap();
        assert_eq!(d.to_spec(2).unwrap().diag, vec![1.0, 2.0]);
        assert!(d.to_spec(3).is_err());
    }
}
