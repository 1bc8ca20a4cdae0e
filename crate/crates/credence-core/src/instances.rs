//! Built-in problem families for verification runs and tests.
//!
//! The convex catalog pairs each instance with a grid box/step that the
//! exhaustive oracle can afford. Instances are chosen so that the feasible set
//! at the converged profile has interior — a profile makes every constraint
//! tight, and e.g. a 1-D instance with two opposing active constraints pinches
//! the feasible set to a single point no grid can certify.

use crate::dataset::Dataset;
use crate::linalg;
use crate::loss::LossBundle;
use crate::model::{Activation, DenseLayer, DifferentiableModel};
use crate::rng::StreamRng;
use crate::solver::WeightSpec;

/// One ready-to-verify convex instance.
#[derive(Debug, Clone)]
pub struct NamedInstance {
    pub id: &'static str,
    pub model: DifferentiableModel,
    pub bundle: LossBundle,
    pub x_origin: Vec<f64>,
    pub weights: WeightSpec,
    pub grid_box: Vec<(f64, f64)>,
    pub grid_step: f64,
}

/// Scalar quadratic family: identity model, one squared-distance anchor.
pub fn quadratic_1d(anchor: f64, w: f64) -> NamedInstance {
    NamedInstance {
        id: "quadratic-1d",
        model: DifferentiableModel::identity(1),
        bundle: LossBundle::squared_distance(vec![vec![anchor]]),
        x_origin: vec![0.0],
        weights: WeightSpec::diagonal(vec![w]),
        grid_box: vec![(-5.0, 5.0)],
        grid_step: 1e-3,
    }
}

/// Two anchors on the same side of the origin; both constraints bind from the
/// same direction, so the feasible set at the profile is an interval.
pub fn quadratic_same_side_1d(a0: f64, a1: f64, w0: f64, w1: f64) -> NamedInstance {
    NamedInstance {
        id: "quadratic-same-side-1d",
        model: DifferentiableModel::identity(1),
        bundle: LossBundle::squared_distance(vec![vec![a0], vec![a1]]),
        x_origin: vec![0.0],
        weights: WeightSpec::diagonal(vec![w0, w1]),
        grid_box: vec![(-6.0, 6.0)],
        grid_step: 1e-3,
    }
}

/// Two-class logistic pair on a scalar signed logit. The feasible set at the
/// profile is a single point, so this one is verified against the bisection
/// oracle rather than the grid.
pub fn logistic_pair_1d(scale: f64, w0: f64, w1: f64) -> NamedInstance {
    NamedInstance {
        id: "logistic-pair-1d",
        model: DifferentiableModel::linear(vec![vec![scale]], vec![0.0]),
        bundle: LossBundle::logistic_nll(2),
        x_origin: vec![0.0],
        weights: WeightSpec::diagonal(vec![w0, w1]),
        grid_box: vec![(-5.0, 5.0)],
        grid_step: 1e-3,
    }
}

/// Planar instance with a single squared-distance constraint through a 2→1
/// affine map.
pub fn linear_2d_single(a: [f64; 2], bias: f64, anchor: f64, w: f64) -> NamedInstance {
    NamedInstance {
        id: "linear-2d-single",
        model: DifferentiableModel::linear(vec![vec![a[0], a[1]]], vec![bias]),
        bundle: LossBundle::squared_distance(vec![vec![anchor]]),
        x_origin: vec![0.0, 0.0],
        weights: WeightSpec::diagonal(vec![w]),
        grid_box: vec![(-4.0, 4.0), (-4.0, 4.0)],
        grid_step: 4e-3,
    }
}

/// Planar two-class cross-entropy instance over an affine score map. The two
/// constraint boundaries cross transversally, leaving a feasible wedge.
pub fn cross_entropy_2d(weights_row0: [f64; 2], weights_row1: [f64; 2], bias: [f64; 2], w: f64) -> NamedInstance {
    NamedInstance {
        id: "cross-entropy-2d",
        model: DifferentiableModel::linear(
            vec![
                vec![weights_row0[0], weights_row0[1]],
                vec![weights_row1[0], weights_row1[1]],
            ],
            vec![bias[0], bias[1]],
        ),
        bundle: LossBundle::cross_entropy(2),
        x_origin: vec![0.0, 0.0],
        weights: WeightSpec::diagonal(vec![w, w]),
        grid_box: vec![(-4.0, 4.0), (-4.0, 4.0)],
        grid_step: 4e-3,
    }
}

/// Planar two-anchor squared-distance instance through a 2→2 affine map.
pub fn quadratic_2d_pair(
    map: [[f64; 2]; 2],
    anchors: [[f64; 2]; 2],
    w: [f64; 2],
) -> NamedInstance {
    NamedInstance {
        id: "quadratic-2d-pair",
        model: DifferentiableModel::linear(
            vec![map[0].to_vec(), map[1].to_vec()],
            vec![0.0, 0.0],
        ),
        bundle: LossBundle::squared_distance(vec![anchors[0].to_vec(), anchors[1].to_vec()]),
        x_origin: vec![0.0, 0.0],
        weights: WeightSpec::diagonal(w.to_vec()),
        grid_box: vec![(-4.0, 4.0), (-4.0, 4.0)],
        grid_step: 4e-3,
    }
}

/// Constant two-class model: the profile must coincide with the raw credences.
pub fn constant_2class(outputs: [f64; 2], p: usize) -> NamedInstance {
    NamedInstance {
        id: "constant-2class",
        model: DifferentiableModel::constant(p, outputs.to_vec()),
        bundle: LossBundle::cross_entropy(2),
        x_origin: vec![0.25; p],
        weights: WeightSpec::diagonal(vec![1.0, 2.0]),
        grid_box: vec![(-2.0, 2.0); p],
        grid_step: 1e-2,
    }
}

/// The grid-checkable convex catalog: p ≤ 2 instances whose feasible set has
/// interior at the profile. That rules out monotone losses here — a profile
/// makes every constraint tight, and cross-entropy/logistic constraints pin
/// the logit differences to a measure-zero set the grid cannot certify.
/// Squared-distance constraints are balls, which keep volume under tightness.
pub fn convex_catalog() -> Vec<NamedInstance> {
    vec![
        NamedInstance { id: "quad-a2-w2", ..quadratic_1d(2.0, 2.0) },
        NamedInstance { id: "quad-a1.5-w1", ..quadratic_1d(1.5, 1.0) },
        NamedInstance { id: "quad-a3-w4", ..quadratic_1d(3.0, 4.0) },
        NamedInstance { id: "quad-a2.5-w0.5", ..quadratic_1d(2.5, 0.5) },
        NamedInstance { id: "quad-a-2-w2", ..quadratic_1d(-2.0, 2.0) },
        NamedInstance {
            id: "same-side-2-3",
            ..quadratic_same_side_1d(2.0, 3.0, 2.0, 2.0)
        },
        NamedInstance {
            id: "same-side-1.5-2.5",
            ..quadratic_same_side_1d(1.5, 2.5, 1.0, 3.0)
        },
        NamedInstance {
            id: "lin2d-single-a",
            ..linear_2d_single([1.0, 0.5], 0.0, 2.0, 2.0)
        },
        NamedInstance {
            id: "lin2d-single-b",
            ..linear_2d_single([0.8, -0.6], 0.3, 1.5, 1.0)
        },
        NamedInstance {
            id: "quad2d-pair",
            ..quadratic_2d_pair([[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 2.0]], [2.0, 2.0])
        },
        NamedInstance {
            id: "quad2d-pair-skew",
            ..quadratic_2d_pair(
                [[1.0, 0.3], [-0.2, 0.9]],
                [[1.5, 0.5], [-0.5, 1.5]],
                [1.0, 3.0],
            )
        },
        NamedInstance {
            id: "quad2d-pair-tight",
            ..quadratic_2d_pair([[0.8, 0.0], [0.0, 1.2]], [[2.0, 1.0], [0.5, 2.5]], [2.0, 1.0])
        },
    ]
}

/// Catalog members whose perturbation function is smooth enough for central
/// finite differences at h = 0.05: credences stay strictly negative under ±h
/// and the feasible region does not collapse within the stencil. The
/// near-tangent disk pairs fail the second condition.
pub fn sensitivity_catalog_ids() -> &'static [&'static str] {
    &[
        "quad-a2-w2",
        "quad-a1.5-w1",
        "quad-a3-w4",
        "quad-a2.5-w0.5",
        "quad-a-2-w2",
        "lin2d-single-a",
        "lin2d-single-b",
        "quad2d-pair-tight",
    ]
}

/// Two-class planar Gaussian mixture: class 0 around `center`, class 1 around
/// `-center`, isotropic `spread`.
pub fn gaussian_mixture_2d(n_per_class: usize, center: [f64; 2], spread: f64, seed: u64) -> Dataset {
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2usize {
        let sign = if class == 0 { 1.0 } else { -1.0 };
        for i in 0..n_per_class {
            let mut rng = StreamRng::new(seed, "gaussian-mixture", (class * n_per_class + i) as u64);
            features.push(vec![
                sign * center[0] + spread * rng.standard_normal(),
                sign * center[1] + spread * rng.standard_normal(),
            ]);
            labels.push(class);
        }
    }
    let mut ds = Dataset::new(features, labels);
    let mut bbox = ds.bounding_box();
    for r in bbox.iter_mut() {
        r[0] -= 0.5;
        r[1] += 0.5;
    }
    ds.feature_range = Some(bbox);
    ds
}

/// K-class image-like task: each class is a prototype pattern in [0,1]^p and
/// samples are noisy copies clamped back to the unit box. The feature range
/// sidecar is the unit box, matching pixel-style data.
pub fn pattern_mixture(
    num_classes: usize,
    p: usize,
    n_per_class: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut proto_rng = StreamRng::new(seed, "prototypes", 0);
    let prototypes: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..p).map(|_| proto_rng.uniform(0.15, 0.85)).collect())
        .collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (class, proto) in prototypes.iter().enumerate() {
        for i in 0..n_per_class {
            let mut rng = StreamRng::new(seed, "pattern-noise", (class * n_per_class + i) as u64);
            features.push(
                proto
                    .iter()
                    .map(|c| (c + noise * rng.standard_normal()).clamp(0.0, 1.0))
                    .collect(),
            );
            labels.push(class);
        }
    }
    let mut ds = Dataset::new(features, labels);
    ds.feature_range = Some(vec![[0.0, 1.0]; p]);
    ds
}

/// Desk-scale classifier: a random-feature network fit by ridge regression.
///
/// The hidden layer is a fixed random tanh projection; the readout solves
/// (HᵀH + ridge·I) V = Hᵀ Y against one-hot targets in closed form. The
/// result is an ordinary trained MLP as far as every consumer is concerned.
pub fn random_feature_classifier(
    data: &Dataset,
    num_classes: usize,
    hidden: usize,
    ridge: f64,
    seed: u64,
) -> DifferentiableModel {
    let p = data.num_features();
    let n = data.len();
    let mut rng = StreamRng::new(seed, "random-features", 0);
    let w1: Vec<Vec<f64>> = (0..hidden)
        .map(|_| (0..p).map(|_| rng.standard_normal() * 1.5).collect())
        .collect();
    let b1: Vec<f64> = (0..hidden).map(|_| rng.uniform(-1.0, 1.0)).collect();

    // hidden features with an appended bias column
    let cols = hidden + 1;
    let mut h = vec![vec![0.0; cols]; n];
    for (row, x) in h.iter_mut().zip(&data.features) {
        for (j, (wj, bj)) in w1.iter().zip(&b1).enumerate() {
            row[j] = (linalg::dot(wj, x) + bj).tanh();
        }
        row[hidden] = 1.0;
    }

    // normal equations, one shared factorization input per class
    let mut gram = vec![vec![0.0; cols]; cols];
    for row in &h {
        for i in 0..cols {
            for j in 0..cols {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let mut w2 = vec![vec![0.0; hidden]; num_classes];
    let mut b2 = vec![0.0; num_classes];
    for class in 0..num_classes {
        let mut rhs = vec![0.0; cols];
        for (row, &label) in h.iter().zip(&data.labels) {
            let y = if label == class { 1.0 } else { -1.0 };
            for (r, v) in rhs.iter_mut().zip(row) {
                *r += v * y;
            }
        }
        let sol = linalg::solve_spd(&gram, &rhs).expect("ridge keeps the Gram matrix SPD");
        w2[class].copy_from_slice(&sol[..hidden]);
        b2[class] = sol[hidden];
    }

    DifferentiableModel::mlp(
        p,
        vec![
            DenseLayer::new(w1, b1, Activation::Tanh),
            DenseLayer::new(w2, b2, Activation::Identity),
        ],
    )
}

/// Plain argmax accuracy of the raw model output against the labels.
pub fn model_accuracy(model: &DifferentiableModel, data: &Dataset) -> f64 {
    let mut correct = 0usize;
    for (x, &label) in data.features.iter().zip(&data.labels) {
        let z = model.forward(x).expect("fixture data is well-formed");
        let pred = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if pred == label {
            correct += 1;
        }
    }
    correct as f64 / data.len() as f64
}
