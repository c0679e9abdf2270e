//! Analysis windows for the short-time Fourier transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative amplitude below which a Gaussian window is truncated.
pub const GAUSSIAN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    /// h(t) = (2π)^{-1/2} exp(−t²/(2σ²)), σ in seconds.
    Gaussian { sigma: f64 },
    /// Real taps centred on the middle sample, at a fixed sample rate.
    Custom { taps: Vec<f64>, rate: f64 },
}

/// Window and its auxiliary windows h′(t) and t·h(t), sampled at τ_m = m/rate
/// for m in −half..=half.
#[derive(Debug, Clone)]
pub struct Taps {
    pub half: usize,
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
    pub th: Vec<f64>,
}

impl Taps {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

impl Window {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window width must be positive, got {sigma}"
            )));
        }
        Ok(Window::Gaussian { sigma })
    }

    /// A custom window from an odd number of taps.
    pub fn custom(taps: Vec<f64>, rate: f64) -> Result<Self> {
        if taps.len().is_multiple_of(2) || taps.len() < 3 {
            return Err(Error::InvalidParameter(
                "custom window needs an odd number (>= 3) of taps".into(),
            ));
        }
        if taps.iter().any(|x| !x.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter("custom window taps must be finite".into()));
        }
        let w = Window::Custom { taps, rate };
        if w.norm_sq() <= 0.0 {
            return Err(Error::InvalidParameter("window has zero norm".into()));
        }
        Ok(w)
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Window::Gaussian { .. })
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            Window::Gaussian { sigma } => Some(*sigma),
            Window::Custom { .. } => None,
        }
    }

    /// Half-length in samples of the sampled support at `rate`.
    pub fn half_len(&self, rate: f64) -> usize {
        match self {
            Window::Gaussian { sigma } => {
                let reach = sigma * (2.0 * (1.0 / GAUSSIAN_CUTOFF).ln()).sqrt();
                (reach * rate).ceil() as usize
            }
            Window::Custom { taps, .. } => taps.len() / 2,
        }
    }

    /// ‖h‖².
    pub fn norm_sq(&self) -> f64 {
        match self {
            Window::Gaussian { sigma } => sigma / (2.0 * PI.sqrt()),
            Window::Custom { taps, rate } => taps.iter().map(|x| x * x).sum::<f64>() / rate,
        }
    }

    /// Samples the window and its auxiliary windows at `rate`.
    pub fn taps(&self, rate: f64) -> Result<Taps> {
        match self {
            Window::Gaussian { sigma } => {
                let half = self.half_len(rate);
                let norm = 1.0 / (2.0 * PI).sqrt();
                let mut taps = Taps {
                    half,
                    h: Vec::with_capacity(2 * half + 1),
                    dh: Vec::with_capacity(2 * half + 1),
                    th: Vec::with_capacity(2 * half + 1),
                };
                for m in -(half as isize)..=half as isize {
                    let t = m as f64 / rate;
                    let h = norm * (-0.5 * t * t / (sigma * sigma)).exp();
                    taps.h.push(h);
                    taps.dh.push(-t / (sigma * sigma) * h);
                    taps.th.push(t * h);
                }
                Ok(taps)
            }
            Window::Custom { taps, rate: own } => {
                if ((own - rate) / rate).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "custom window sampled at {own} Hz used at {rate} Hz"
                    )));
                }
                let n = taps.len();
                let half = n / 2;
                let dh = (0..n)
                    .map(|i| {
                        let (lo, hi, span) = match i {
                            0 => (0, 1, 1.0),
                            i if i == n - 1 => (n - 2, n - 1, 1.0),
                            i => (i - 1, i + 1, 2.0),
                        };
                        (taps[hi] - taps[lo]) * rate / span
                    })
                    .collect();
                let th = taps
                    .iter()
                    .enumerate()
                    .map(|(i, h)| (i as f64 - half as f64) / rate * h)
                    .collect();
                Ok(Taps {
                    half,
                    h: taps.clone(),
                    dh,
                    th,
                })
            }
        }
    }

    /// Evaluator for the window's own transform Sh(Δt, Δω).
    pub fn self_transform(&self) -> SelfTransform {
        match self {
            Window::Gaussian { sigma } => SelfTransform::Gaussian { sigma: *sigma },
            Window::Custom { taps, rate } => SelfTransform::table(taps, *rate),
        }
    }

    pub fn descriptor(&self) -> serde_json::Value {
        match self {
            Window::Gaussian { sigma } => serde_json::json!({"kind": "gaussian", "sigma": sigma}),
            Window::Custom { taps, rate } => {
                serde_json::json!({"kind": "custom", "taps": taps.len(), "rate": rate})
            }
        }
    }
}

/// Sh(Δt, Δω) for a window h: closed form for the Gaussian, bilinear
/// interpolation on a dense precomputed table otherwise.
#[derive(Debug, Clone)]
pub enum SelfTransform {
    Gaussian {
        sigma: f64,
    },
    Table {
        rate: f64,
        lag_half: usize,
        omega_step: f64,
        omega_half: usize,
        values: Vec<Complex64>,
    },
}

fn direct_self_transform(taps: &[f64], rate: f64, lag: isize, omega: f64) -> Complex64 {
    let n = taps.len() as isize;
    let half = n / 2;
    let t = lag as f64 / rate;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let j = i - lag;
        if !(0..n).contains(&j) {
            continue;
        }
        let s = (i - half) as f64 / rate;
        acc += Complex64::from_polar(taps[i as usize] * taps[j as usize], -omega * s);
    }
    acc * Complex64::from_polar(1.0 / rate, 0.5 * omega * t)
}

impl SelfTransform {
    fn table(taps: &[f64], rate: f64) -> Self {
        let lag_half = taps.len() - 1;
        let omega_half = 4 * taps.len();
        let omega_step = PI * rate / omega_half as f64;
        let mut values = Vec::with_capacity((2 * lag_half + 1) * (2 * omega_half + 1));
        for lag in -(lag_half as isize)..=lag_half as isize {
            for k in -(omega_half as isize)..=omega_half as isize {
                values.push(direct_self_transform(taps, rate, lag, k as f64 * omega_step));
            }
        }
        SelfTransform::Table {
            rate,
            lag_half,
            omega_step,
            omega_half,
            values,
        }
    }

    pub fn eval(&self, dt: f64, dw: f64) -> Complex64 {
        match self {
            SelfTransform::Gaussian { sigma } => {
                let v = sigma / (2.0 * PI.sqrt())
                    * (-dt * dt / (4.0 * sigma * sigma) - sigma * sigma * dw * dw / 4.0).exp();
                Complex64::new(v, 0.0)
            }
            SelfTransform::Table {
                rate,
                lag_half,
                omega_step,
                omega_half,
                values,
            } => {
                let x = dt * rate + *lag_half as f64;
                let y = dw / omega_step + *omega_half as f64;
                let nx = 2 * lag_half + 1;
                let ny = 2 * omega_half + 1;
                if x < 0.0 || y < 0.0 || x > (nx - 1) as f64 || y > (ny - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let (i, j) = ((x.floor() as usize).min(nx - 2), (y.floor() as usize).min(ny - 2));
                let (fx, fy) = (x - i as f64, y - j as f64);
                let at = |a: usize, b: usize| values[a * ny + b];
                at(i, j) * (1.0 - fx) * (1.0 - fy)
                    + at(i + 1, j) * fx * (1.0 - fy)
                    + at(i, j + 1) * (1.0 - fx) * fy
                    + at(i + 1, j + 1) * fx * fy
            }
        }
    }
}
