//! Nearest-bin accumulation onto a target grid and finite-difference
//! Jacobians of grid maps.

use ndarray::Array2;
use num_complex::Complex64;

use crate::parallel::{for_each_mut, Execution};

/// Default Jacobian clamp: |J|⁻¹ is bounded by 1/EPS_JACOBIAN.
pub const EPS_JACOBIAN: f64 = 1e-3;

/// Nearest-bin lookup on a strictly increasing axis.
#[derive(Debug, Clone)]
pub struct Binner<'a> {
    axis: &'a [f64],
}

impl<'a> Binner<'a> {
    pub fn new(axis: &'a [f64]) -> Self {
        Self { axis }
    }

    /// Index of the nearest axis value, ties toward the smaller index.
    /// `None` when `x` lies more than half a spacing beyond either end.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let a = self.axis;
        let n = a.len();
        if !x.is_finite() || n == 0 {
            return None;
        }
        if n == 1 {
            return Some(0);
        }
        if x < a[0] - 0.5 * (a[1] - a[0]) || x > a[n - 1] + 0.5 * (a[n - 1] - a[n - 2]) {
            return None;
        }
        let i = a.partition_point(|&v| v < x);
        if i == 0 {
            return Some(0);
        }
        if i == n {
            return Some(n - 1);
        }
        if x - a[i - 1] <= a[i] - x {
            Some(i - 1)
        } else {
            Some(i)
        }
    }
}

/// One contribution: (row, col, value).
pub type Contribution = (usize, usize, Complex64);

/// Sums contributions into a rows x cols grid. The result is independent of
/// the execution policy: contributions are bucketed by row in input order and
/// each row is summed sequentially.
pub fn accumulate(execution: Execution, rows: usize, cols: usize, items: &[Contribution]) -> Array2<Complex64> {
    let mut buckets: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); rows];
    for &(r, c, v) in items {
        buckets[r].push((c, v));
    }
    let mut out_rows: Vec<Vec<Complex64>> = vec![Vec::new(); rows];
    for_each_mut(execution, &mut out_rows, |r, row| {
        let mut acc = vec![Complex64::new(0.0, 0.0); cols];
        for &(c, v) in &buckets[r] {
            acc[c] += v;
        }
        *row = acc;
    });
    let mut out = Array2::zeros((rows, cols));
    for (r, row) in out_rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            out[[r, c]] = v;
        }
    }
    out
}

fn diff(axis: &[f64], i: usize, f: impl Fn(usize) -> f64) -> f64 {
    let n = axis.len();
    if n < 2 {
        return 0.0;
    }
    let (lo, hi) = match i {
        0 => (0, 1),
        i if i == n - 1 => (n - 2, n - 1),
        i => (i - 1, i + 1),
    };
    (f(hi) - f(lo)) / (axis[hi] - axis[lo])
}

/// Signed Jacobian of (r, c) ↦ (v(r, c), u(r, c)), where rows follow
/// `row_axis` and columns `col_axis`: J = ∂u/∂c·∂v/∂r − ∂u/∂r·∂v/∂c.
/// Central differences inside, one-sided at the borders.
pub fn jacobian(u: &Array2<f64>, v: &Array2<f64>, row_axis: &[f64], col_axis: &[f64]) -> Array2<f64> {
    let (rows, cols) = u.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let du_dc = diff(col_axis, c, |k| u[[r, k]]);
        let du_dr = diff(row_axis, r, |k| u[[k, c]]);
        let dv_dc = diff(col_axis, c, |k| v[[r, k]]);
        let dv_dr = diff(row_axis, r, |k| v[[k, c]]);
        du_dc * dv_dr - du_dr * dv_dc
    })
}

/// min(1/|J|, 1/ε) and whether the clamp was active.
pub fn clamped_inverse(j: f64, eps: f64) -> (f64, bool) {
    let a = j.abs();
    if !(a >= eps) {
        (1.0 / eps, true)
    } else {
        (1.0 / a, false)
    }
}
