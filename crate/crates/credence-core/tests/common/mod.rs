#![allow(dead_code)] // each test binary uses a different subset of these helpers

//! Shared fixtures for the integration suites: random model generators and a
//! finite-difference gradient oracle kept deliberately independent of the
//! library's backward pass.

use credence_core::loss::LossBundle;
use credence_core::model::{Activation, DenseLayer, DifferentiableModel};
use credence_core::rng::StreamRng;

/// Central finite differences of x ↦ ℓ_k(φ(x)).
pub fn fd_gradient(
    model: &DifferentiableModel,
    bundle: &LossBundle,
    x: &[f64],
    class: usize,
    h: f64,
) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += h;
        let mut xm = x.to_vec();
        xm[i] -= h;
        let fp = bundle.loss(&model.forward(&xp).unwrap(), class).unwrap();
        let fm = bundle.loss(&model.forward(&xm).unwrap(), class).unwrap();
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// Relative deviation between two gradients, floored at unit scale.
pub fn gradient_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf(&diff) / inf(a).max(inf(b)).max(1.0)
}

fn random_matrix(rng: &mut StreamRng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| scale * rng.standard_normal()).collect())
        .collect()
}

fn random_vec(rng: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.standard_normal()).collect()
}

/// A random (model, bundle, x, class) quadruple covering every model kind and
/// a compatible loss family. `case` selects the combination deterministically.
pub fn random_case(seed: u64, case: u64) -> (DifferentiableModel, LossBundle, Vec<f64>, usize) {
    let mut rng = StreamRng::new(seed, "random-case", case);
    let p = 1 + (rng.next_u64() % 3) as usize;
    let kind = case % 5;
    let (model, m) = match kind {
        0 => {
            let m = 1 + (rng.next_u64() % 3) as usize;
            (
                DifferentiableModel::linear(random_matrix(&mut rng, m, p, 0.8), random_vec(&mut rng, m, 0.5)),
                m,
            )
        }
        1 => {
            let m = 2 + (rng.next_u64() % 2) as usize;
            (
                DifferentiableModel::softmax_linear(
                    random_matrix(&mut rng, m, p, 0.8),
                    random_vec(&mut rng, m, 0.5),
                ),
                m,
            )
        }
        2 => {
            let hidden = 3 + (rng.next_u64() % 5) as usize;
            let m = 2 + (rng.next_u64() % 2) as usize;
            let act = if case % 2 == 0 {
                Activation::Softplus
            } else {
                Activation::Tanh
            };
            let layers = vec![
                DenseLayer::new(
                    random_matrix(&mut rng, hidden, p, 0.8),
                    random_vec(&mut rng, hidden, 0.4),
                    act,
                ),
                DenseLayer::new(
                    random_matrix(&mut rng, m, hidden, 0.8),
                    random_vec(&mut rng, m, 0.4),
                    Activation::Identity,
                ),
            ];
            (DifferentiableModel::mlp(p, layers), m)
        }
        3 => {
            let centers = 2 + (rng.next_u64() % 4) as usize;
            let m = 1 + (rng.next_u64() % 3) as usize;
            (
                DifferentiableModel::rbf(
                    random_matrix(&mut rng, centers, p, 1.0),
                    random_matrix(&mut rng, centers, m, 1.0),
                    rng.uniform(0.6, 1.6),
                ),
                m,
            )
        }
        _ => {
            let m = 2 + (rng.next_u64() % 2) as usize;
            (
                DifferentiableModel::constant(p, random_vec(&mut rng, m, 1.0)),
                m,
            )
        }
    };

    let bundle = match case % 4 {
        0 if m >= 2 => LossBundle::cross_entropy(m),
        1 => LossBundle::logistic_nll(m.max(2).min(if m == 1 { 2 } else { m })),
        2 => LossBundle::hinge(if m == 1 { 2 } else { m }),
        _ => {
            let anchors = (0..m.max(1))
                .map(|_| random_vec(&mut rng, m, 1.0))
                .collect();
            LossBundle::squared_distance(anchors)
        }
    };
    // fall back when the draw is incompatible (e.g. cross-entropy with m = 1)
    let bundle = if bundle.validate(m).is_ok() {
        bundle
    } else {
        LossBundle::squared_distance((0..m).map(|_| random_vec(&mut rng, m, 1.0)).collect())
    };

    let x = random_vec(&mut rng, p, 1.2);
    let class = (rng.next_u64() % bundle.num_classes as u64) as usize;
    (model, bundle, x, class)
}
