//! Helpers for per-node stacked vectors.
//!
//! Solver state is a `Vec<DVector<f64>>` with one block per node; blocks may
//! have different lengths when agents carry local coordinates in addition to
//! the shared ones.

use nalgebra::DVector;

pub type Stacked = Vec<DVector<f64>>;

/// Euclidean norm of the long stacked vector.
pub fn norm(x: &Stacked) -> f64 {
    x.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

pub fn zeros_like(x: &Stacked) -> Stacked {
    x.iter().map(|b| DVector::zeros(b.len())).collect()
}

/// Blockwise mean over nodes; all blocks must share a length.
pub fn block_mean(x: &Stacked) -> DVector<f64> {
    let n = x.len();
    assert!(n > 0);
    let mut m = DVector::zeros(x[0].len());
    for b in x {
        m += b;
    }
    m / n as f64
}

pub fn all_finite(x: &Stacked) -> bool {
    x.iter().all(|b| b.iter().all(|v| v.is_finite()))
}

/// Index of the first node whose block contains a non-finite entry.
pub fn first_non_finite(x: &Stacked) -> Option<usize> {
    x.iter().position(|b| b.iter().any(|v| !v.is_finite()))
}

/// `||x - y||` over stacks with matching shapes.
pub fn distance(x: &Stacked, y: &Stacked) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Projection of a single block onto the centered ball of radius `r`.
pub fn ball_project(v: &DVector<f64>, r: f64) -> DVector<f64> {
    let n = v.norm();
    if n <= r {
        v.clone()
    } else {
        v * (r / n)
    }
}

/// C-style `%.12e` formatting (two-digit signed exponent), used by the
/// metrics CSV schema so files are byte-stable across platforms.
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let s = format!("{:.12e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let e: i32 = exp.parse().expect("exponent");
    if e < 0 {
        format!("{mantissa}e-{:02}", -e)
    } else {
        format!("{mantissa}e+{:02}", e)
    }
}
