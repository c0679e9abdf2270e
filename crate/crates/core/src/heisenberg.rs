//! The Heisenberg group and its Schrödinger representation on signals.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// A group element (s, ξ, z): time shift in seconds, modulation in rad/s and
/// the central phase in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub s: f64,
    pub xi: f64,
    pub z: f64,
}

impl HeisenbergPoint {
    pub const IDENTITY: Self = Self {
        s: 0.0,
        xi: 0.0,
        z: 0.0,
    };

    pub fn new(s: f64, xi: f64, z: f64) -> Self {
        Self { s, xi, z }
    }

    pub fn inverse(self) -> Self {
        Self {
            s: -self.s,
            xi: -self.xi,
            z: -self.z,
        }
    }

    pub fn is_finite(self) -> bool {
        self.s.is_finite() && self.xi.is_finite() && self.z.is_finite()
    }

    /// The unitary factor e^{iz + iξ(t − s/2)} of the Schrödinger action at time `t`.
    pub fn phase_at(self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.z + self.xi * (t - 0.5 * self.s))
    }

    /// Schrödinger action on a function: (ϱ_x f)(t) = e^{iz+iξ(t−s/2)} f(t−s).
    pub fn act<F>(self, f: F) -> impl Fn(f64) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        move |t| self.phase_at(t) * f(t - self.s)
    }
}

/// Schrödinger action applied to samples on the grid `t_i = start + i/rate`.
///
/// Integral shifts move samples; fractional shifts use a band-limited shift
/// over a zero-padded frame. Content shifted out of the frame is lost.
pub fn schroedinger_action_sampled(x: HeisenbergPoint, samples: &[Complex64], rate: f64, start: f64) -> Vec<Complex64> {
    let shifted = shift_samples(samples, x.s * rate);
    shifted
        .into_iter()
        .enumerate()
        .map(|(i, v)| x.phase_at(start + i as f64 / rate) * v)
        .collect()
}

/// Delays `samples` by `k` samples (possibly fractional), zero filled.
pub(crate) fn shift_samples(samples: &[Complex64], k: f64) -> Vec<Complex64> {
    let n = samples.len();
    let rounded = k.round();
    if (k - rounded).abs() < 1e-9 {
        let k = rounded as isize;
        return (0..n as isize)
            .map(|i| {
                let j = i - k;
                if (0..n as isize).contains(&j) {
                    samples[j as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
    }
    let len = (2 * n + k.abs().ceil() as usize).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..n].copy_from_slice(samples);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (idx, v) in buf.iter_mut().enumerate() {
        let signed = if idx <= len / 2 {
            idx as f64
        } else {
            idx as f64 - len as f64
        };
        *v *= Complex64::from_polar(1.0 / len as f64, -2.0 * PI * signed * k / len as f64);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.truncate(n);
    buf
}

/// Group law: (s₁+s₂, ξ₁+ξ₂, z₁+z₂+(ξ₁s₂−ξ₂s₁)/2).
impl Mul for HeisenbergPoint {
    type Output = Self;

    fn mul(self, other: Self) -> Self {
        Self {
            s: self.s + other.s,
            xi: self.xi + other.xi,
            z: self.z + other.z + 0.5 * (self.xi * other.s - other.xi * self.s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt() -> impl Strategy<Value = HeisenbergPoint> {
        (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(s, xi, z)| HeisenbergPoint::new(s, xi, z))
    }

    #[test]
    fn mul_examples() {
        let x = HeisenbergPoint::new(0.3, -1.2, 0.7);
        assert_eq!(x * HeisenbergPoint::IDENTITY, x);
        let p = HeisenbergPoint::new(1.0, 0.0, 0.0) * HeisenbergPoint::new(0.0, 1.0, 0.0);
        assert_eq!(p, HeisenbergPoint::new(1.0, 1.0, -0.5));
    }

    proptest! {
        #[test]
        fn inverse_cancels(x in pt()) {
            let e = x * x.inverse();
            prop_assert!(e.s.abs() < 1e-12 && e.xi.abs() < 1e-12 && e.z.abs() < 1e-12);
        }

        #[test]
        fn associative(a in pt(), b in pt(), c in pt()) {
            let l = a * b * c;
            let r = a * (b * c);
            prop_assert!((l.s - r.s).abs() < 1e-9 && (l.xi - r.xi).abs() < 1e-9 && (l.z - r.z).abs() < 1e-9);
        }

        #[test]
        fn action_is_a_representation(a in pt(), b in pt(), t in -3.0f64..3.0) {
            let f = |t: f64| Complex64::new((-t * t).exp(), 0.3 * t);
            let lhs = a.act(b.act(f))(t);
            let rhs = (a * b).act(f)(t);
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    fn bump(n: usize, rate: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate - 2.0;
                Complex64::new((-16.0 * t * t).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn identity_action_leaves_samples() {
        let f = bump(256, 64.0);
        assert_eq!(schroedinger_action_sampled(HeisenbergPoint::IDENTITY, &f, 64.0, 0.0), f);
    }

    #[test]
    fn sampled_action_is_unitary() {
        let rate = 64.0;
        let f = bump(256, rate);
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for x in [
            HeisenbergPoint::new(0.25, 3.0, 0.4),
            HeisenbergPoint::new(-0.5, -7.0, 1.0),
            HeisenbergPoint::new(0.123, 2.0, 0.0),
        ] {
            let g = schroedinger_action_sampled(x, &f, rate, 0.0);
            let r = norm(&g) / norm(&f) - 1.0;
            assert!(r.abs() < 1e-12, "{x:?} {r}");
        }
    }

    #[test]
    fn sampled_composition_matches_group_law() {
        let rate = 64.0;
        let f = bump(256, rate);
        let a = HeisenbergPoint::new(0.25, 3.0, 0.4);
        let b = HeisenbergPoint::new(-0.125, -1.5, 0.2);
        let lhs = schroedinger_action_sampled(a, &schroedinger_action_sampled(b, &f, rate, 0.0), rate, 0.0);
        let rhs = schroedinger_action_sampled(a * b, &f, rate, 0.0);
        let err = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
