//! Short-time Fourier transform with the symmetric (Weyl) phase factor
//!
//!   Sf(t, ω) = e^{iωt/2} ∫ f(s) h̄(s − t) e^{−iωs} ds
//!
//! and its inverse. Columns sit on signal samples spaced by `hop`; the signal
//! is treated as zero outside its support, so columns extend half a window
//! beyond each edge.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{AxisKind, ComplexGrid};
use crate::parallel::{map_range, Execution};
use crate::signal::Signal;
use crate::window::{Taps, Window};

/// A uniform frequency axis ω_k = start + k·step, k = 0..count, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl OmegaAxis {
    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyAxis("omega"));
        }
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega axis step must be positive, got {step}"
            )));
        }
        Ok(Self { start, step, count })
    }

    /// Non-negative FFT bin frequencies 0..=n_fft/2.
    pub fn fft_half(n_fft: usize, rate: f64) -> Self {
        Self {
            start: 0.0,
            step: 2.0 * PI * rate / n_fft as f64,
            count: n_fft / 2 + 1,
        }
    }

    /// All n_fft residues, from −(n_fft/2 − 1) to n_fft/2.
    pub fn fft_full(n_fft: usize, rate: f64) -> Self {
        let step = 2.0 * PI * rate / n_fft as f64;
        Self {
            start: -((n_fft / 2) as f64 - 1.0) * step,
            step,
            count: n_fft,
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }

    pub fn last(&self) -> f64 {
        self.value(self.count - 1)
    }

    /// (N, k0) when the axis lies on the bins of an N-point FFT, with
    /// ω_0 = k0·2π·rate/N.
    fn fft_layout(&self, rate: f64) -> Option<(usize, isize)> {
        let n = 2.0 * PI * rate / self.step;
        let n_round = n.round();
        if n_round < 2.0 || (n - n_round).abs() > 1e-9 * n {
            return None;
        }
        let k0 = self.start / self.step;
        if (k0 - k0.round()).abs() > 1e-9 * k0.abs().max(1.0) {
            return None;
        }
        Some((n_round as usize, k0.round() as isize))
    }

    fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyAxis("omega"));
        }
        if values.len() == 1 {
            return Self::uniform(values[0], 1.0, 1);
        }
        let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        let ok = values
            .iter()
            .enumerate()
            .all(|(k, w)| (w - (values[0] + k as f64 * step)).abs() <= 1e-9 * step.max(1e-300) * (k + 1) as f64);
        if !ok {
            return Err(Error::InvalidGrid("omega axis is not uniform".into()));
        }
        Self::uniform(values[0], step, values.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    /// Column spacing in samples.
    pub hop: usize,
    pub omega: OmegaAxis,
    #[serde(default)]
    pub execution: Execution,
}

impl StftParams {
    /// Hop of at most σ/2 and the non-negative bins of the smallest power of
    /// two holding the whole window.
    pub fn for_window(h: &Window, rate: f64) -> Self {
        let half = h.half_len(rate);
        let n_fft = (2 * half + 1).next_power_of_two();
        let hop = match h.sigma() {
            Some(sigma) => ((0.5 * sigma * rate).floor() as usize).max(1),
            None => ((2 * half + 1) / 8).max(1),
        };
        Self {
            hop,
            omega: OmegaAxis::fft_half(n_fft, rate),
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// The transform with the window h together with the auxiliary transforms
/// using h′(t) and t·h(t) in place of h.
#[derive(Debug, Clone)]
pub struct StftBundle {
    pub s: ComplexGrid,
    pub s_dh: Array2<Complex64>,
    pub s_th: Array2<Complex64>,
}

struct Plan {
    rate: f64,
    start: f64,
    len: usize,
    first: isize,
    cols: usize,
    hop: usize,
    omega: OmegaAxis,
    fft: Option<(Arc<dyn Fft<f64>>, usize, isize)>,
}

impl Plan {
    fn new(len: usize, rate: f64, start: f64, half: usize, p: &StftParams) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidSignal("signal is empty".into()));
        }
        if p.hop == 0 {
            return Err(Error::InvalidParameter("hop must be at least one sample".into()));
        }
        let nyquist = PI * rate;
        let reach = p.omega.start.abs().max(p.omega.last().abs());
        if reach > nyquist * (1.0 + 1e-12) {
            return Err(Error::Aliasing { freq: reach, nyquist });
        }
        let hop = p.hop as isize;
        let first = -((half as isize) / hop) * hop;
        let last = len as isize - 1 + half as isize;
        let cols = ((last - first) / hop + 1) as usize;
        let fft = p
            .omega
            .fft_layout(rate)
            .and_then(|(n, k0)| (n > 2 * half).then(|| (FftPlanner::new().plan_fft_forward(n), n, k0)));
        Ok(Self {
            rate,
            start,
            len,
            first,
            cols,
            hop: p.hop,
            omega: p.omega,
            fft,
        })
    }

    fn col_index(&self, j: usize) -> isize {
        self.first + (j * self.hop) as isize
    }

    fn col_time(&self, j: usize) -> f64 {
        self.start + self.col_index(j) as f64 / self.rate
    }

    fn time_axis(&self) -> Vec<f64> {
        (0..self.cols).map(|j| self.col_time(j)).collect()
    }

    fn metadata(&self, h: &Window, half: usize) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("transform".into(), json!("stft"));
        m.insert("window".into(), h.descriptor());
        m.insert("sample_rate".into(), json!(self.rate));
        m.insert("signal_len".into(), json!(self.len));
        m.insert("start_time".into(), json!(self.start));
        m.insert("hop".into(), json!(self.hop));
        m.insert("pad".into(), json!(half));
        m.insert(
            "omega_layout".into(),
            json!(if self.fft.is_some() { "fft" } else { "direct" }),
        );
        m
    }
}

/// Evaluates one column for each tap set in `windows`; returns the column
/// values (rows) per window, Weyl factor included.
fn column(plan: &Plan, x: &[Complex64], windows: &[&[f64]], half: usize, j: usize) -> Vec<Vec<Complex64>> {
    let c = plan.col_index(j);
    let t = plan.col_time(j);
    let rows = plan.omega.count;
    let sample = |m: isize| -> Complex64 {
        let i = c + m;
        if i >= 0 && (i as usize) < plan.len {
            x[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let weyl: Vec<Complex64> = (0..rows)
        .map(|r| Complex64::from_polar(1.0 / plan.rate, -0.5 * plan.omega.value(r) * t))
        .collect();
    windows
        .iter()
        .map(|taps| {
            let mut out = vec![Complex64::new(0.0, 0.0); rows];
            if let Some((fft, n, k0)) = &plan.fft {
                let mut buf = vec![Complex64::new(0.0, 0.0); *n];
                for (k, &w) in taps.iter().enumerate() {
                    let m = k as isize - half as isize;
                    buf[m.rem_euclid(*n as isize) as usize] += sample(m) * w;
                }
                fft.process(&mut buf);
                for (r, o) in out.iter_mut().enumerate() {
                    let bin = (k0 + r as isize).rem_euclid(*n as isize) as usize;
                    *o = buf[bin] * weyl[r];
                }
            } else {
                for (r, o) in out.iter_mut().enumerate() {
                    let w = plan.omega.value(r);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, &tap) in taps.iter().enumerate() {
                        let m = k as isize - half as isize;
                        let v = sample(m);
                        if v != Complex64::new(0.0, 0.0) {
                            acc += v * tap * Complex64::from_polar(1.0, -w * m as f64 / plan.rate);
                        }
                    }
                    *o = acc * weyl[r];
                }
            }
            out
        })
        .collect()
}

/// Auxiliary transforms with the windows h′ and t·h.
type AuxPair = (Array2<Complex64>, Array2<Complex64>);

fn run(
    x: &[Complex64],
    rate: f64,
    start: f64,
    h: &Window,
    p: &StftParams,
    aux: bool,
) -> Result<(ComplexGrid, Option<AuxPair>)> {
    let taps: Taps = h.taps(rate)?;
    let plan = Plan::new(x.len(), rate, start, taps.half, p)?;
    let windows: Vec<&[f64]> = if aux {
        vec![&taps.h, &taps.dh, &taps.th]
    } else {
        vec![&taps.h]
    };
    let cols = map_range(p.execution, plan.cols, |j| column(&plan, x, &windows, taps.half, j));
    let rows = plan.omega.count;
    let mut grids: Vec<Array2<Complex64>> = (0..windows.len()).map(|_| Array2::zeros((rows, plan.cols))).collect();
    for (j, col) in cols.into_iter().enumerate() {
        for (g, vals) in grids.iter_mut().zip(col) {
            for (r, v) in vals.into_iter().enumerate() {
                g[[r, j]] = v;
            }
        }
    }
    let mut it = grids.into_iter();
    let s = it.next().expect("main window");
    let mut grid = ComplexGrid::new(s, plan.time_axis(), plan.omega.values(), AxisKind::Frequency)?;
    grid.metadata = plan.metadata(h, taps.half);
    let rest = if aux {
        Some((it.next().expect("h'"), it.next().expect("t h")))
    } else {
        None
    };
    Ok((grid, rest))
}

fn real_to_complex(f: &Signal) -> Vec<Complex64> {
    f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

pub fn stft(f: &Signal, h: &Window, p: &StftParams) -> Result<ComplexGrid> {
    Ok(run(&real_to_complex(f), f.sample_rate(), f.start_time(), h, p, false)?.0)
}

/// The transform of complex samples; used for modulated test functions.
pub fn stft_complex(samples: &[Complex64], rate: f64, start: f64, h: &Window, p: &StftParams) -> Result<ComplexGrid> {
    if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidSignal("samples must be finite".into()));
    }
    Ok(run(samples, rate, start, h, p, false)?.0)
}

pub fn stft_with_aux(f: &Signal, h: &Window, p: &StftParams) -> Result<StftBundle> {
    let (s, aux) = run(&real_to_complex(f), f.sample_rate(), f.start_time(), h, p, true)?;
    let (s_dh, s_th) = aux.expect("auxiliary transforms requested");
    Ok(StftBundle { s, s_dh, s_th })
}

/// Recovered signal and diagnostics of how well the grid supports inversion.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub signal: Signal,
    /// max |Σ_j h(t − s_j)² Δs / ‖h‖² − 1| over the signal samples.
    pub partition_error: f64,
    /// Fraction of [0, Nyquist] covered by the omega axis.
    pub band_coverage: f64,
    /// The omega spacing is too coarse for the window length.
    pub aliased: bool,
}

impl Reconstruction {
    pub fn is_reliable(&self) -> bool {
        self.partition_error < 1e-3 && self.band_coverage > 0.999 && !self.aliased
    }
}

fn meta_f64(grid: &ComplexGrid, key: &str) -> Result<f64> {
    grid.metadata
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::InvalidGrid(format!("grid metadata lacks `{key}`")))
}

/// Inverse transform
///
///   f(t) = 1/(2π‖h‖²) Σ_j Σ_k Sf(s_j, ξ_k) e^{iξ_k(t − s_j/2)} h(t − s_j) Δs Δξ.
///
/// An axis with no negative frequencies is taken as half of the Hermitian
/// spectrum of a real signal. The real part is returned.
pub fn istft(grid: &ComplexGrid, h: &Window) -> Result<Reconstruction> {
    istft_with(grid, h, Execution::default())
}

pub fn istft_with(grid: &ComplexGrid, h: &Window, execution: Execution) -> Result<Reconstruction> {
    if grid.axis_kind() != AxisKind::Frequency {
        return Err(Error::InvalidGrid("expected a frequency grid".into()));
    }
    let rate = meta_f64(grid, "sample_rate")?;
    let start = meta_f64(grid, "start_time")?;
    let len = meta_f64(grid, "signal_len")? as usize;
    let omega = OmegaAxis::from_values(grid.second_axis())?;
    let times = grid.time_axis();
    let ds = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        1.0 / rate
    };
    let taps = h.taps(rate)?;
    let half = taps.half as isize;
    let nyquist = PI * rate;
    let one_sided = omega.start >= -1e-12 * omega.step;
    let weights: Vec<f64> = (0..omega.count)
        .map(|k| {
            let w = omega.value(k);
            if !one_sided || w.abs() < 1e-9 * omega.step || w >= nyquist * (1.0 - 1e-12) {
                1.0
            } else {
                2.0
            }
        })
        .collect();
    let fft = omega
        .fft_layout(rate)
        .map(|(n, k0)| (FftPlanner::new().plan_fft_inverse(n), n, k0));
    let aliased = match fft {
        Some((_, n, _)) => n <= 2 * taps.half,
        None => 2.0 * PI * rate / omega.step <= (2 * taps.half) as f64,
    };
    let scale = ds * omega.step / (2.0 * PI * h.norm_sq());
    let values = grid.values();
    let col_idx: Vec<isize> = times.iter().map(|t| ((t - start) * rate).round() as isize).collect();
    let contributions = map_range(execution, times.len(), |j| {
        let s = times[j];
        let coef: Vec<Complex64> = (0..omega.count)
            .map(|k| values[[k, j]] * weights[k] * Complex64::from_polar(1.0, 0.5 * omega.value(k) * s))
            .collect();
        let mut out = vec![0.0; taps.len()];
        match &fft {
            Some((plan, n, k0)) if !aliased => {
                let mut buf = vec![Complex64::new(0.0, 0.0); *n];
                for (k, c) in coef.iter().enumerate() {
                    buf[(k0 + k as isize).rem_euclid(*n as isize) as usize] += c;
                }
                plan.process(&mut buf);
                for (i, o) in out.iter_mut().enumerate() {
                    let m = i as isize - half;
                    *o = buf[m.rem_euclid(*n as isize) as usize].re * taps.h[i] * scale;
                }
            }
            _ => {
                for (i, o) in out.iter_mut().enumerate() {
                    let tau = (i as isize - half) as f64 / rate;
                    let acc: Complex64 = coef
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * Complex64::from_polar(1.0, omega.value(k) * tau))
                        .sum();
                    *o = acc.re * taps.h[i] * scale;
                }
            }
        }
        out
    });
    let mut samples = vec![0.0; len];
    let mut partition = vec![0.0; len];
    for (j, contrib) in contributions.iter().enumerate() {
        for (i, v) in contrib.iter().enumerate() {
            let idx = col_idx[j] + i as isize - half;
            if idx >= 0 && (idx as usize) < len {
                samples[idx as usize] += v;
                partition[idx as usize] += taps.h[i] * taps.h[i] * ds;
            }
        }
    }
    let norm = h.norm_sq();
    let partition_error = partition.iter().map(|p| (p / norm - 1.0).abs()).fold(0.0, f64::max);
    let lo = omega.start.max(0.0);
    let hi = (omega.last() + 0.5 * omega.step).min(nyquist);
    let band_coverage = ((hi - lo) / nyquist).clamp(0.0, 1.0);
    Ok(Reconstruction {
        signal: Signal::with_start(samples, rate, start)?,
        partition_error,
        band_coverage,
        aliased,
    })
}

/// Σ|Sf|² Δt Δω / (2π‖h‖²), using Hermitian doubling for one-sided axes.
/// Equals ‖f‖² on a well-resolved grid.
pub fn grid_energy(grid: &ComplexGrid, h: &Window) -> Result<f64> {
    let omega = OmegaAxis::from_values(grid.second_axis())?;
    let times = grid.time_axis();
    let ds = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        return Err(Error::InvalidGrid("need at least two columns".into()));
    };
    let rate = meta_f64(grid, "sample_rate")?;
    let one_sided = omega.start >= -1e-12 * omega.step;
    let mut total = 0.0;
    for (k, row) in grid.values().rows().into_iter().enumerate() {
        let w = omega.value(k);
        let weight = if !one_sided || w.abs() < 1e-9 * omega.step || w >= PI * rate * (1.0 - 1e-12) {
            1.0
        } else {
            2.0
        };
        total += weight * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(total * ds * omega.step / (2.0 * PI * h.norm_sq()))
}
