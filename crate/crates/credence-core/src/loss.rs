//! Per-class loss functions over model outputs.
//!
//! A [`LossBundle`] holds one loss ℓ_k per class k, each mapping the model
//! output z ∈ ℝᵐ to a non-negative, everywhere-differentiable value. The
//! negated loss is the credence assigned to the class, so non-negativity and
//! smoothness are load-bearing: every downstream gradient computation assumes
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable ln(1 + eˣ).
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Stable logistic function 1 / (1 + e⁻ˣ).
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted log-sum-exp of the slice.
pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Loss family, tagged for JSON round trips.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LossKind {
    /// ℓ_k(z) = logsumexp(z) − z_k over logits, one logit per class.
    CrossEntropy,
    /// One-vs-rest logistic negative log-likelihood, ℓ_k(z) = softplus(−z_k).
    /// With a single output and two classes the output is treated as a signed
    /// logit: ℓ₀ = softplus(−z), ℓ₁ = softplus(z).
    LogisticNll,
    /// Softplus-smoothed hinge on the one-vs-rest margin:
    /// ℓ_k(z) = s · softplus((1 − z_k)/s). The kink of the plain hinge would
    /// break differentiability, so `smoothing` must stay strictly positive.
    Hinge { smoothing: f64 },
    /// ℓ_k(z) = ‖z − a_k‖² against a per-class anchor a_k ∈ ℝᵐ.
    SquaredDistance { anchors: Vec<Vec<f64>> },
}

/// Per-class losses for a fixed class set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBundle {
    pub num_classes: usize,
    #[serde(flatten)]
    pub kind: LossKind,
}

impl LossBundle {
    pub fn cross_entropy(num_classes: usize) -> Self {
        LossBundle {
            num_classes,
            kind: LossKind::CrossEntropy,
        }
    }

    pub fn logistic_nll(num_classes: usize) -> Self {
        LossBundle {
            num_classes,
            kind: LossKind::LogisticNll,
        }
    }

    /// Smoothed hinge with the default smoothing 0.1.
    pub fn hinge(num_classes: usize) -> Self {
        LossBundle {
            num_classes,
            kind: LossKind::Hinge { smoothing: 0.1 },
        }
    }

    pub fn squared_distance(anchors: Vec<Vec<f64>>) -> Self {
        LossBundle {
            num_classes: anchors.len(),
            kind: LossKind::SquaredDistance { anchors },
        }
    }

    /// Check internal consistency against a model output dimension.
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::invalid("loss bundle", "num_classes must be >= 1"));
        }
        match &self.kind {
            LossKind::CrossEntropy => {
                if output_dim != self.num_classes {
                    return Err(Error::DimensionMismatch {
                        what: "cross-entropy logits",
                        expected: self.num_classes,
                        actual: output_dim,
                    });
                }
            }
            LossKind::LogisticNll => {
                if !(output_dim == self.num_classes
                    || (output_dim == 1 && self.num_classes == 2))
                {
                    return Err(Error::invalid(
                        "logistic loss",
                        format!(
                            "needs one output per class (or 1 output for 2 classes), got m={} K={}",
                            output_dim, self.num_classes
                        ),
                    ));
                }
            }
            LossKind::Hinge { smoothing } => {
                if !(*smoothing > 0.0 && smoothing.is_finite()) {
                    return Err(Error::invalid("hinge smoothing", "must be finite and > 0"));
                }
                if !(output_dim == self.num_classes
                    || (output_dim == 1 && self.num_classes == 2))
                {
                    return Err(Error::invalid(
                        "hinge loss",
                        format!(
                            "needs one output per class (or 1 output for 2 classes), got m={} K={}",
                            output_dim, self.num_classes
                        ),
                    ));
                }
            }
            LossKind::SquaredDistance { anchors } => {
                if anchors.len() != self.num_classes {
                    return Err(Error::DimensionMismatch {
                        what: "squared-distance anchors",
                        expected: self.num_classes,
                        actual: anchors.len(),
                    });
                }
                for a in anchors {
                    if a.len() != output_dim {
                        return Err(Error::DimensionMismatch {
                            what: "squared-distance anchor",
                            expected: output_dim,
                            actual: a.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_inputs(&self, z: &[f64], class: usize) -> Result<()> {
        if class >= self.num_classes {
            return Err(Error::ClassOutOfRange {
                index: class,
                num_classes: self.num_classes,
            });
        }
        if !crate::linalg::all_finite(z) {
            return Err(Error::NonFinite { what: "model output" });
        }
        self.validate(z.len())
    }

    /// One-vs-rest margin for class `class` when the loss reads a single
    /// signed output for two classes.
    fn signed_output(z: &[f64], class: usize) -> f64 {
        if z.len() == 1 {
            if class == 0 {
                z[0]
            } else {
                -z[0]
            }
        } else {
            z[class]
        }
    }

    /// ℓ_class(z) ≥ 0.
    pub fn loss(&self, z: &[f64], class: usize) -> Result<f64> {
        self.check_inputs(z, class)?;
        Ok(match &self.kind {
            LossKind::CrossEntropy => log_sum_exp(z) - z[class],
            LossKind::LogisticNll => softplus(-Self::signed_output(z, class)),
            LossKind::Hinge { smoothing } => {
                let u = Self::signed_output(z, class);
                smoothing * softplus((1.0 - u) / smoothing)
            }
            LossKind::SquaredDistance { anchors } => crate::linalg::dist_sq(z, &anchors[class]),
        })
    }

    /// All per-class losses at once.
    pub fn losses(&self, z: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_classes).map(|k| self.loss(z, k)).collect()
    }

    /// Gradient of ℓ_class with respect to the model output z.
    pub fn grad_output(&self, z: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_inputs(z, class)?;
        Ok(match &self.kind {
            LossKind::CrossEntropy => {
                let lse = log_sum_exp(z);
                let mut g: Vec<f64> = z.iter().map(|&v| (v - lse).exp()).collect();
                g[class] -= 1.0;
                g
            }
            LossKind::LogisticNll => {
                let mut g = vec![0.0; z.len()];
                let u = Self::signed_output(z, class);
                let du = -sigmoid(-u);
                if z.len() == 1 {
                    g[0] = if class == 0 { du } else { -du };
                } else {
                    g[class] = du;
                }
                g
            }
            LossKind::Hinge { smoothing } => {
                let mut g = vec![0.0; z.len()];
                let u = Self::signed_output(z, class);
                let du = -sigmoid((1.0 - u) / smoothing);
                if z.len() == 1 {
                    g[0] = if class == 0 { du } else { -du };
                } else {
                    g[class] = du;
                }
                g
            }
            LossKind::SquaredDistance { anchors } => z
                .iter()
                .zip(&anchors[class])
                .map(|(v, a)| 2.0 * (v - a))
                .collect(),
        })
    }

    /// Weighted combination Σ_k w_k ∇ℓ_k(z), evaluated in one pass.
    pub fn weighted_grad_output(&self, z: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                what: "loss weights",
                expected: self.num_classes,
                actual: weights.len(),
            });
        }
        let mut acc = vec![0.0; z.len()];
        for (k, &wk) in weights.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let g = self.grad_output(z, k)?;
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += wk * gi;
            }
        }
        Ok(acc)
    }
}
