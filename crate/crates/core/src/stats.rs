//! Summary statistics over grids.

use std::collections::VecDeque;

use ndarray::Array2;
use num_complex::Complex64;

/// Fraction of the peak magnitude above which a point counts as energetic.
pub const ENERGETIC_FRACTION: f64 = 0.1;

/// Median of the finite values; NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Rényi entropy (base 2) of order `alpha` of the distribution |x|²/Σ|x|².
pub fn renyi_entropy<'a>(values: impl IntoIterator<Item = &'a Complex64>, alpha: f64) -> f64 {
    let p: Vec<f64> = values.into_iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return f64::NAN;
    }
    let s: f64 = p.iter().map(|x| (x / total).powf(alpha)).sum();
    s.log2() / (1.0 - alpha)
}

/// Points whose magnitude is at least `fraction` of the peak.
pub fn energetic_mask(values: &Array2<Complex64>, fraction: f64) -> Array2<bool> {
    let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    values.mapv(|z| peak > 0.0 && z.norm() >= fraction * peak)
}

/// Number of 4-connected components of true cells.
pub fn connected_components(mask: &Array2<bool>) -> usize {
    let (rows, cols) = mask.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut count = 0;
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if !mask[[r, c]] || seen[[r, c]] {
                continue;
            }
            count += 1;
            seen[[r, c]] = true;
            queue.push_back((r, c));
            while let Some((i, j)) = queue.pop_front() {
                let mut visit = |a: usize, b: usize| {
                    if mask[[a, b]] && !seen[[a, b]] {
                        seen[[a, b]] = true;
                        queue.push_back((a, b));
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < rows {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < cols {
                    visit(i, j + 1);
                }
            }
        }
    }
    count
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}
