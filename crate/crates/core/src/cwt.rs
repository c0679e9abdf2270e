//! Continuous wavelet transform Wf(a, b) = (f, ψ_{a,b}) computed one scale at
//! a time in the frequency domain:
//!
//!   Wf(a, ·) = F⁻¹[ f̂(ω) √a conj ψ̂(aω) ]
//!
//! The time axis is the sample grid of the signal.

use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{AxisKind, ComplexGrid};
use crate::parallel::{map_range, Execution};
use crate::signal::Signal;
use crate::wavelet::AnalyticWavelet;

/// Relative spectral magnitude at Nyquist above which a scale is flagged.
pub const LEAKAGE_LIMIT: f64 = 1e-3;

/// Geometric scales a_j = a_min·2^{j/voices}, j = 0..count, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleAxis {
    pub a_min: f64,
    pub voices: usize,
    pub count: usize,
}

impl ScaleAxis {
    pub fn new(a_min: f64, voices: usize, count: usize) -> Result<Self> {
        if !(a_min > 0.0 && a_min.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smallest scale must be positive, got {a_min}"
            )));
        }
        if voices == 0 {
            return Err(Error::InvalidParameter("need at least one voice per octave".into()));
        }
        if count == 0 {
            return Err(Error::EmptyAxis("scale"));
        }
        Ok(Self { a_min, voices, count })
    }

    /// Covers [a_min, a_max] with `voices` scales per octave.
    pub fn spanning(a_min: f64, a_max: f64, voices: usize) -> Result<Self> {
        if !(a_max >= a_min) {
            return Err(Error::InvalidParameter(format!(
                "scale range [{a_min}, {a_max}] is empty"
            )));
        }
        let count = ((a_max / a_min).log2() * voices as f64 + 1e-9).floor() as usize + 1;
        Self::new(a_min, voices, count)
    }

    pub fn value(&self, j: usize) -> f64 {
        self.a_min * (j as f64 / self.voices as f64).exp2()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.value(j)).collect()
    }

    /// Δ log a.
    pub fn log_step(&self) -> f64 {
        LN_2 / self.voices as f64
    }

    /// Recovers a geometric axis from explicit values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid("need at least two scales".into()));
        }
        let ratio = values[1] / values[0];
        let voices = (LN_2 / ratio.ln()).round();
        if !(voices >= 1.0) {
            return Err(Error::InvalidGrid("scale axis is not geometric".into()));
        }
        let axis = Self::new(values[0], voices as usize, values.len())?;
        if values
            .iter()
            .enumerate()
            .any(|(j, a)| (a / axis.value(j) - 1.0).abs() > 1e-9)
        {
            return Err(Error::InvalidGrid("scale axis is not geometric".into()));
        }
        Ok(axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// The signal is one period of a periodic function.
    Periodic,
    /// Zero extension to a power of two at least twice the length.
    #[default]
    ZeroPad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwtParams {
    pub scales: ScaleAxis,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub execution: Execution,
}

impl CwtParams {
    pub fn new(scales: ScaleAxis) -> Self {
        Self {
            scales,
            boundary: Boundary::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// The transform with its time derivative ∂_b Wf and scale derivative a∂_a Wf.
#[derive(Debug, Clone)]
pub struct CwtBundle {
    pub w: ComplexGrid,
    pub dt: Array2<Complex64>,
    pub a_da: Array2<Complex64>,
}

fn frame_len(n: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Periodic => n,
        Boundary::ZeroPad => (2 * n).next_power_of_two(),
    }
}

/// Angular frequency of FFT bin k for positive bins 0 < k < N/2, else None.
fn bin_freq(k: usize, n: usize, rate: f64) -> Option<f64> {
    (k > 0 && 2 * k < n).then(|| 2.0 * PI * rate * k as f64 / n as f64)
}

fn run(f: &Signal, w: &AnalyticWavelet, p: &CwtParams, derivs: bool) -> Result<(ComplexGrid, Option<CwtBundleParts>)> {
    let n = f.len();
    let rate = f.sample_rate();
    let nf = frame_len(n, p.boundary);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nf);
    let inv = planner.plan_fft_inverse(nf);
    let mut spec: Vec<Complex64> = f.samples().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    spec.resize(nf, Complex64::new(0.0, 0.0));
    fwd.process(&mut spec);
    let scales = p.scales.values();
    let norm = (2.0 * PI).sqrt() / nf as f64;
    let rows = map_range(p.execution, scales.len(), |j| {
        let a = scales[j];
        let sa = a.sqrt();
        let outputs = if derivs { 3 } else { 1 };
        let mut bufs = vec![vec![Complex64::new(0.0, 0.0); nf]; outputs];
        for (k, x) in spec.iter().enumerate() {
            let Some(om) = bin_freq(k, nf, rate) else { continue };
            let psi = w.spectrum(a * om).conj() * sa;
            let v = x * psi * norm;
            bufs[0][k] = v;
            if derivs {
                bufs[1][k] = v * Complex64::new(0.0, om);
                let ld = w.log_derivative(a * om).conj();
                bufs[2][k] = v * (0.5 + a * om * ld);
            }
        }
        for b in bufs.iter_mut() {
            inv.process(b);
            b.truncate(n);
        }
        bufs
    });
    let mut grids: Vec<Array2<Complex64>> = (0..rows.first().map_or(1, |r| r.len()))
        .map(|_| Array2::zeros((scales.len(), n)))
        .collect();
    for (j, bufs) in rows.into_iter().enumerate() {
        for (g, b) in grids.iter_mut().zip(bufs) {
            for (i, v) in b.into_iter().enumerate() {
                g[[j, i]] = v;
            }
        }
    }
    let times: Vec<f64> = (0..n).map(|i| f.time(i)).collect();
    let mut it = grids.into_iter();
    let mut grid = ComplexGrid::new(it.next().expect("transform"), times, scales.clone(), AxisKind::Scale)?;
    let leak = w.relative_magnitude(scales[0] * PI * rate);
    let m = &mut grid.metadata;
    m.insert("transform".into(), json!("cwt"));
    m.insert("wavelet".into(), w.descriptor());
    m.insert("sample_rate".into(), json!(rate));
    m.insert("signal_len".into(), json!(n));
    m.insert("start_time".into(), json!(f.start_time()));
    m.insert("voices".into(), json!(p.scales.voices));
    m.insert("a_min".into(), json!(p.scales.a_min));
    m.insert("boundary".into(), serde_json::to_value(p.boundary)?);
    m.insert("nyquist_leakage".into(), json!(leak));
    if leak > LEAKAGE_LIMIT {
        m.insert(
            "warning".into(),
            json!(format!(
                "smallest scale {} leaves {:.2e} of the wavelet peak at Nyquist",
                scales[0], leak
            )),
        );
    }
    let parts = derivs.then(|| CwtBundleParts {
        dt: it.next().expect("time derivative"),
        a_da: it.next().expect("scale derivative"),
    });
    Ok((grid, parts))
}

struct CwtBundleParts {
    dt: Array2<Complex64>,
    a_da: Array2<Complex64>,
}

pub fn cwt(f: &Signal, w: &AnalyticWavelet, p: &CwtParams) -> Result<ComplexGrid> {
    Ok(run(f, w, p, false)?.0)
}

pub fn cwt_with_derivatives(f: &Signal, w: &AnalyticWavelet, p: &CwtParams) -> Result<CwtBundle> {
    let (grid, parts) = run(f, w, p, true)?;
    let parts = parts.expect("derivatives requested");
    Ok(CwtBundle {
        w: grid,
        dt: parts.dt,
        a_da: parts.a_da,
    })
}

const COVERAGE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct IcwtResult {
    pub signal: Signal,
    /// Fraction of ∫|ψ̂(aω)|² da/a captured by the scale range, averaged over
    /// frequency with the signal's spectral energy as weight. Bins captured
    /// below 1e-3 are treated as outside the band.
    pub band_coverage: f64,
}

fn meta_f64(grid: &ComplexGrid, key: &str) -> Result<f64> {
    grid.metadata
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::InvalidGrid(format!("grid metadata lacks `{key}`")))
}

/// Inverse transform with Haar weights da db / a²:
///
///   f = (1/πC′) Re Σ_j Σ_b Δlog a · a_j⁻¹ · Δb · Wf(a_j, b) ψ_{a_j,b}
///
/// with C′ = ∫|ψ̂|²/ω dω and trapezoid weights in log a.
pub fn icwt(grid: &ComplexGrid, w: &AnalyticWavelet) -> Result<IcwtResult> {
    icwt_with(grid, w, Execution::default())
}

pub fn icwt_with(grid: &ComplexGrid, w: &AnalyticWavelet, execution: Execution) -> Result<IcwtResult> {
    if grid.axis_kind() != AxisKind::Scale {
        return Err(Error::InvalidGrid("expected a scale grid".into()));
    }
    let rate = meta_f64(grid, "sample_rate")?;
    let start = meta_f64(grid, "start_time")?;
    let boundary: Boundary = grid
        .metadata
        .get("boundary")
        .map(|v| serde_json::from_value(v.clone()))
        .transpose()?
        .unwrap_or_default();
    let axis = ScaleAxis::from_values(grid.second_axis())?;
    let scales = axis.values();
    let n = grid.cols();
    let nf = frame_len(n, boundary);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nf);
    let inv = planner.plan_fft_inverse(nf);
    let values = grid.values();
    let dlog = axis.log_step();
    let cr = w.reconstruction_constant();
    let norm = (2.0 * PI).sqrt() / nf as f64;
    let rows = map_range(execution, scales.len(), |j| {
        let a = scales[j];
        let mut buf: Vec<Complex64> = values.row(j).to_vec();
        buf.resize(nf, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v = match bin_freq(k, nf, rate) {
                Some(om) => *v * w.spectrum(a * om) * a.sqrt() * norm,
                None => Complex64::new(0.0, 0.0),
            };
        }
        inv.process(&mut buf);
        let trap = if j == 0 || j + 1 == scales.len() { 0.5 } else { 1.0 };
        let weight = trap * dlog / (PI * cr * a);
        buf.truncate(n);
        buf.into_iter().map(|z| z.re * weight).collect::<Vec<f64>>()
    });
    let mut out = vec![0.0; n];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    // Energy-weighted coverage. The output spectrum is the input spectrum
    // times the per-bin coverage, so dividing it back out recovers the weights.
    let mut spec: Vec<Complex64> = out.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    spec.resize(nf, Complex64::new(0.0, 0.0));
    fwd.process(&mut spec);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x) in spec.iter().enumerate() {
        let Some(om) = bin_freq(k, nf, rate) else { continue };
        let got: f64 = scales
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let trap = if j == 0 || j + 1 == scales.len() { 0.5 } else { 1.0 };
                trap * dlog * w.spectrum(a * om).norm_sqr()
            })
            .sum::<f64>()
            / cr;
        if got < COVERAGE_FLOOR {
            continue;
        }
        let e = x.norm_sqr() / (got * got);
        num += e * got;
        den += e;
    }
    let coverage = if den > 0.0 { num / den } else { 1.0 };
    Ok(IcwtResult {
        signal: Signal::with_start(out, rate, start)?,
        band_coverage: coverage,
    })
}
