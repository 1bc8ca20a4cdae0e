//! Differentiable models φ: ℝᵖ → ℝᵐ with exact input gradients.
//!
//! Models are plain data: weights are ingested (from JSON or a constructor),
//! never trained here. Evaluation is pure, so a model can be shared across
//! threads freely. Gradients are computed in reverse mode — one backward pass
//! per scalar, built from the vector-Jacobian product of each kind — and
//! activations are restricted to smooth choices so that every composed loss
//! x ↦ ℓ_k(φ(x)) is differentiable everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{sigmoid, softplus, LossBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Softplus,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Softplus => softplus(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative evaluated at the preactivation.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(x),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One dense layer, weights row-major with one row per output unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        DenseLayer {
            weights,
            bias,
            activation,
        }
    }

    fn out_dim(&self) -> usize {
        self.weights.len()
    }

    fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Affine map; `layers` must hold exactly one identity-activation layer.
    Linear { layers: Vec<DenseLayer> },
    /// Affine map followed by softmax; outputs lie on the probability simplex.
    SoftmaxLinear { layers: Vec<DenseLayer> },
    /// Feedforward stack of dense layers with smooth activations.
    Mlp { layers: Vec<DenseLayer> },
    /// z(x) = Σᵢ coefficientsᵢ · exp(−‖x − centerᵢ‖² / (2·bandwidth²)).
    RbfKernelMachine {
        centers: Vec<Vec<f64>>,
        coefficients: Vec<Vec<f64>>,
        bandwidth: f64,
    },
    /// Same output for every input; gradient identically zero.
    Constant { output: Vec<f64> },
}

/// A model with fixed input/output dimensions and kind-specific parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferentiableModel {
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl DifferentiableModel {
    pub fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        let (m, p) = (weights.len(), weights.first().map_or(0, Vec::len));
        DifferentiableModel {
            input_dim: p,
            output_dim: m,
            kind: ModelKind::Linear {
                layers: vec![DenseLayer::new(weights, bias, Activation::Identity)],
            },
        }
    }

    /// The identity map on ℝᵖ.
    pub fn identity(p: usize) -> Self {
        let eye: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::linear(eye, vec![0.0; p])
    }

    pub fn softmax_linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        let (m, p) = (weights.len(), weights.first().map_or(0, Vec::len));
        DifferentiableModel {
            input_dim: p,
            output_dim: m,
            kind: ModelKind::SoftmaxLinear {
                layers: vec![DenseLayer::new(weights, bias, Activation::Identity)],
            },
        }
    }

    pub fn mlp(input_dim: usize, layers: Vec<DenseLayer>) -> Self {
        let output_dim = layers.last().map_or(0, DenseLayer::out_dim);
        DifferentiableModel {
            input_dim,
            output_dim,
            kind: ModelKind::Mlp { layers },
        }
    }

    pub fn rbf(centers: Vec<Vec<f64>>, coefficients: Vec<Vec<f64>>, bandwidth: f64) -> Self {
        let p = centers.first().map_or(0, Vec::len);
        let m = coefficients.first().map_or(0, Vec::len);
        DifferentiableModel {
            input_dim: p,
            output_dim: m,
            kind: ModelKind::RbfKernelMachine {
                centers,
                coefficients,
                bandwidth,
            },
        }
    }

    pub fn constant(input_dim: usize, output: Vec<f64>) -> Self {
        DifferentiableModel {
            input_dim,
            output_dim: output.len(),
            kind: ModelKind::Constant { output },
        }
    }

    /// Structural validation: dimensions chain correctly and parameters are finite.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid("model", "input_dim and output_dim must be >= 1"));
        }
        let check_layers = |layers: &[DenseLayer], linear_only: bool| -> Result<()> {
            if layers.is_empty() {
                return Err(Error::invalid("model", "needs at least one layer"));
            }
            if linear_only
                && (layers.len() != 1 || layers[0].activation != Activation::Identity)
            {
                return Err(Error::invalid(
                    "model",
                    "linear kinds take exactly one identity-activation layer",
                ));
            }
            let mut dim = self.input_dim;
            for (i, layer) in layers.iter().enumerate() {
                if layer.in_dim() != dim {
                    return Err(Error::DimensionMismatch {
                        what: "layer input",
                        expected: dim,
                        actual: layer.in_dim(),
                    });
                }
                if layer.bias.len() != layer.out_dim() {
                    return Err(Error::DimensionMismatch {
                        what: "layer bias",
                        expected: layer.out_dim(),
                        actual: layer.bias.len(),
                    });
                }
                for row in &layer.weights {
                    if row.len() != layer.in_dim() || !linalg::all_finite(row) {
                        return Err(Error::invalid(
                            "model",
                            format!("layer {i} has a ragged or non-finite weight row"),
                        ));
                    }
                }
                if !linalg::all_finite(&layer.bias) {
                    return Err(Error::NonFinite { what: "layer bias" });
                }
                dim = layer.out_dim();
            }
            if dim != self.output_dim {
                return Err(Error::DimensionMismatch {
                    what: "model output",
                    expected: self.output_dim,
                    actual: dim,
                });
            }
            Ok(())
        };
        match &self.kind {
            ModelKind::Linear { layers } | ModelKind::SoftmaxLinear { layers } => {
                check_layers(layers, true)
            }
            ModelKind::Mlp { layers } => check_layers(layers, false),
            ModelKind::RbfKernelMachine {
                centers,
                coefficients,
                bandwidth,
            } => {
                if centers.is_empty() || centers.len() != coefficients.len() {
                    return Err(Error::invalid(
                        "rbf model",
                        "centers and coefficients must be non-empty and equal length",
                    ));
                }
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(Error::invalid("rbf bandwidth", "must be finite and > 0"));
                }
                for c in centers {
                    if c.len() != self.input_dim || !linalg::all_finite(c) {
                        return Err(Error::invalid("rbf center", "wrong length or non-finite"));
                    }
                }
                for a in coefficients {
                    if a.len() != self.output_dim || !linalg::all_finite(a) {
                        return Err(Error::invalid(
                            "rbf coefficient",
                            "wrong length or non-finite",
                        ));
                    }
                }
                Ok(())
            }
            ModelKind::Constant { output } => {
                if output.len() != self.output_dim {
                    return Err(Error::DimensionMismatch {
                        what: "constant output",
                        expected: self.output_dim,
                        actual: output.len(),
                    });
                }
                if !linalg::all_finite(output) {
                    return Err(Error::NonFinite {
                        what: "constant output",
                    });
                }
                Ok(())
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "model input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        if !linalg::all_finite(x) {
            return Err(Error::NonFinite { what: "model input" });
        }
        Ok(())
    }

    /// Evaluate φ(x).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(match &self.kind {
            ModelKind::Linear { layers } => {
                let l = &layers[0];
                let mut z = linalg::matvec(&l.weights, x);
                for (zi, b) in z.iter_mut().zip(&l.bias) {
                    *zi += b;
                }
                z
            }
            ModelKind::SoftmaxLinear { layers } => {
                let l = &layers[0];
                let mut u = linalg::matvec(&l.weights, x);
                for (ui, b) in u.iter_mut().zip(&l.bias) {
                    *ui += b;
                }
                softmax(&u)
            }
            ModelKind::Mlp { layers } => {
                let mut h = x.to_vec();
                for l in layers {
                    h = layer_forward(l, &h).0;
                }
                h
            }
            ModelKind::RbfKernelMachine {
                centers,
                coefficients,
                bandwidth,
            } => {
                let inv = 1.0 / (2.0 * bandwidth * bandwidth);
                let mut z = vec![0.0; self.output_dim];
                for (c, a) in centers.iter().zip(coefficients) {
                    let k = (-linalg::dist_sq(x, c) * inv).exp();
                    for (zi, ai) in z.iter_mut().zip(a) {
                        *zi += k * ai;
                    }
                }
                z
            }
            ModelKind::Constant { output } => output.clone(),
        })
    }

    /// Vector-Jacobian product: returns Jφ(x)ᵀ · grad_output.
    pub fn backward(&self, x: &[f64], grad_output: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if grad_output.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                what: "output gradient",
                expected: self.output_dim,
                actual: grad_output.len(),
            });
        }
        Ok(match &self.kind {
            ModelKind::Linear { layers } => linalg::matvec_t(&layers[0].weights, grad_output),
            ModelKind::SoftmaxLinear { layers } => {
                let l = &layers[0];
                let mut u = linalg::matvec(&l.weights, x);
                for (ui, b) in u.iter_mut().zip(&l.bias) {
                    *ui += b;
                }
                let s = softmax(&u);
                // J_softmaxᵀ g = s ∘ (g − ⟨s, g⟩)
                let sg = linalg::dot(&s, grad_output);
                let gu: Vec<f64> = s
                    .iter()
                    .zip(grad_output)
                    .map(|(si, gi)| si * (gi - sg))
                    .collect();
                linalg::matvec_t(&l.weights, &gu)
            }
            ModelKind::Mlp { layers } => {
                // forward pass caching preactivations, then walk back
                let mut pres: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
                let mut h = x.to_vec();
                for l in layers {
                    let (out, pre) = layer_forward(l, &h);
                    pres.push(pre);
                    h = out;
                }
                let mut g = grad_output.to_vec();
                for (l, pre) in layers.iter().zip(&pres).rev() {
                    let gu: Vec<f64> = g
                        .iter()
                        .zip(pre)
                        .map(|(gi, &u)| gi * l.activation.derivative(u))
                        .collect();
                    g = linalg::matvec_t(&l.weights, &gu);
                }
                g
            }
            ModelKind::RbfKernelMachine {
                centers,
                coefficients,
                bandwidth,
            } => {
                let inv = 1.0 / (2.0 * bandwidth * bandwidth);
                let mut g = vec![0.0; self.input_dim];
                for (c, a) in centers.iter().zip(coefficients) {
                    let k = (-linalg::dist_sq(x, c) * inv).exp();
                    let scale = linalg::dot(a, grad_output) * k * (-2.0 * inv);
                    for ((gi, xi), ci) in g.iter_mut().zip(x).zip(c) {
                        *gi += scale * (xi - ci);
                    }
                }
                g
            }
            ModelKind::Constant { .. } => vec![0.0; self.input_dim],
        })
    }
}

fn layer_forward(layer: &DenseLayer, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pre = linalg::matvec(&layer.weights, input);
    for (u, b) in pre.iter_mut().zip(&layer.bias) {
        *u += b;
    }
    let out = pre.iter().map(|&u| layer.activation.apply(u)).collect();
    (out, pre)
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Loss of the model output for one class: ℓ_class(φ(x)).
pub fn composed_loss(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    class: usize,
) -> Result<f64> {
    bundle.loss(&model.forward(x)?, class)
}

/// Exact gradient of x ↦ ℓ_class(φ(x)).
pub fn input_gradient(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    class: usize,
) -> Result<Vec<f64>> {
    let z = model.forward(x)?;
    let gz = bundle.grad_output(&z, class)?;
    model.backward(x, &gz)
}

/// Losses and the weighted gradient Σ_k λ_k ∇_x ℓ_k(φ(x)) in a single
/// forward/backward pair. This is the solver's inner loop.
pub fn losses_and_weighted_gradient(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    lambda: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let z = model.forward(x)?;
    let losses = bundle.losses(&z)?;
    let gz = bundle.weighted_grad_output(&z, lambda)?;
    let gx = model.backward(x, &gz)?;
    Ok((losses, gx))
}

/// Credences induced by the raw input: c_k = −ℓ_k(φ(x)). All entries ≤ 0.
pub fn credence_at_origin(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
) -> Result<Vec<f64>> {
    let z = model.forward(x)?;
    Ok(bundle.losses(&z)?.into_iter().map(|l| -l).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear_forward() {
        let m = DifferentiableModel::identity(2);
        assert_eq!(m.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn constant_forward_and_zero_gradient() {
        let m = DifferentiableModel::constant(3, vec![3.0, -1.0]);
        assert_eq!(m.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![3.0, -1.0]);
        let b = LossBundle::squared_distance(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let g = input_gradient(&m, &b, &[0.4, -0.2, 7.0], 1).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_names_dims() {
        let m = DifferentiableModel::identity(2);
        match m.forward(&[1.0]) {
            Err(Error::DimensionMismatch {
                expected, actual, ..
            }) => {
                assert_eq!((expected, actual), (2, 1));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn identity_squared_distance_gradient() {
        // d/dx (x−2)² at x=1 is −2
        let m = DifferentiableModel::identity(1);
        let b = LossBundle::squared_distance(vec![vec![2.0]]);
        let g = input_gradient(&m, &b, &[1.0], 0).unwrap();
        assert_eq!(g, vec![-2.0]);
    }

    #[test]
    fn credence_at_origin_is_nonpositive_and_matches_losses() {
        let m = DifferentiableModel::identity(2);
        let b = LossBundle::squared_distance(vec![vec![2.0, 0.0], vec![-2.0, 0.0]]);
        let c = credence_at_origin(&m, &b, &[0.0, 0.0]).unwrap();
        assert_eq!(c, vec![-4.0, -4.0]);
        let m2 = DifferentiableModel::identity(2);
        let ce = LossBundle::cross_entropy(2);
        let c2 = credence_at_origin(&m2, &ce, &[0.0, 0.0]).unwrap();
        for v in c2 {
            assert!((v + std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn mlp_forward_matches_straight_line_reevaluation() {
        // one softplus layer then identity readout, recomputed by hand
        let l1 = DenseLayer::new(
            vec![vec![0.5, -1.0], vec![2.0, 0.3], vec![-0.7, 0.9]],
            vec![0.1, -0.2, 0.0],
            Activation::Softplus,
        );
        let l2 = DenseLayer::new(
            vec![vec![1.0, -1.0, 0.5], vec![0.2, 0.4, -0.6]],
            vec![0.0, 0.05],
            Activation::Identity,
        );
        let model = DifferentiableModel::mlp(2, vec![l1.clone(), l2.clone()]);
        let x = [0.3, -0.4];

        let mut h = vec![0.0; 3];
        for i in 0..3 {
            let pre = l1.weights[i][0] * x[0] + l1.weights[i][1] * x[1] + l1.bias[i];
            h[i] = softplus(pre);
        }
        let mut z = vec![0.0; 2];
        for i in 0..2 {
            z[i] = l2.weights[i][0] * h[0] + l2.weights[i][1] * h[1] + l2.weights[i][2] * h[2]
                + l2.bias[i];
        }
        let got = model.forward(&x).unwrap();
        for (a, b) in got.iter().zip(&z) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_linear_outputs_simplex() {
        let m = DifferentiableModel::softmax_linear(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
            vec![0.0, 0.1, -0.1],
        );
        let z = m.forward(&[0.4, -0.9]).unwrap();
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn model_json_round_trip_is_bit_exact() {
        let model = DifferentiableModel::mlp(
            2,
            vec![
                DenseLayer::new(
                    vec![vec![0.1, 0.2], vec![1.0 / 3.0, -0.7]],
                    vec![1e-15, 2.5],
                    Activation::Tanh,
                ),
                DenseLayer::new(vec![vec![0.9, -0.3]], vec![0.0], Activation::Identity),
            ],
        );
        let json = crate::report::to_json_precise(&model).unwrap();
        let back: DifferentiableModel = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        let (ModelKind::Mlp { layers: a }, ModelKind::Mlp { layers: b }) =
            (&model.kind, &back.kind)
        else {
            panic!("kind changed in round trip");
        };
        for (la, lb) in a.iter().zip(b) {
            for (ra, rb) in la.weights.iter().zip(&lb.weights) {
                for (va, vb) in ra.iter().zip(rb) {
                    assert_eq!(va.to_bits(), vb.to_bits());
                }
            }
        }
    }

    #[test]
    fn validate_rejects_ragged_weights() {
        let m = DifferentiableModel {
            input_dim: 2,
            output_dim: 1,
            kind: ModelKind::Linear {
                layers: vec![DenseLayer::new(
                    vec![vec![1.0, 2.0, 3.0]],
                    vec![0.0],
                    Activation::Identity,
                )],
            },
        };
        assert!(m.validate().is_err());
    }
}
