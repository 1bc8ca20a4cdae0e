//! Small dense vector/matrix helpers. Everything is `f64` and allocation-light;
//! problem sizes here are desk scale, so no BLAS.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm_l2(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Squared distance ‖a − b‖².
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Dense matrix-vector product with `mat` stored row-major as rows of length `x.len()`.
pub fn matvec(mat: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    mat.iter().map(|row| dot(row, x)).collect()
}

/// Transposed product `matᵀ g` for `mat` row-major (rows × cols), `g` of length rows.
pub fn matvec_t(mat: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mat.len(), g.len());
    let cols = mat.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, gi) in mat.iter().zip(g) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * gi;
        }
    }
    out
}

/// Solve the symmetric positive definite system `a x = b` in place via Cholesky.
/// `a` is row-major n×n. Returns None if the factorization breaks down.
pub fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
