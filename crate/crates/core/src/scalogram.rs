//! Scalogram reassignment.
//!
//! With Wf = r e^{iφ}, the maps send (a, t) to (ã, t̃):
//!
//! * T:         1/ã = ∂_tφ,  t̃ = t + a²∂_aφ
//! * T_β:       1/ã = ∂_tφ,  t̃ = t + a²(∂_a + β∂_t)φ
//! * amplitude: 1/ã = ν/a − (1/γ)(∂_a + β∂_t) log r,  t̃ = t − aα + a²γ ∂_t log r
//! * holomorphic: 1/ã = Im ∂F/∂z,  t̃ = t − aα + a²γ Re ∂F/∂z
//!
//! where F = log Wf − (γν − iα) log a and z = t − aβ + iaγ. For c = 1 the
//! transform obeys a∂_a log Wf = (κν − iα) − a(β − iκ)∂_t log Wf, which makes
//! all four agree.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::accumulate::{accumulate, clamped_inverse, jacobian, Binner, Contribution, EPS_JACOBIAN};
use crate::cwt::{cwt_with_derivatives, CwtBundle, CwtParams};
use crate::error::{Error, Result};
use crate::grid::{AxisKind, ComplexGrid};
use crate::parallel::{map_range, Execution};
use crate::signal::Signal;
use crate::stats::{energetic_mask, median, wrap_phase, ENERGETIC_FRACTION};
use crate::wavelet::{AnalyticWavelet, ExtremalParams, KernelTable};

/// Default magnitude threshold relative to the peak.
pub const EPS_MAG: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LogDerivField {
    pub times: Vec<f64>,
    pub scales: Vec<f64>,
    /// ∂_t log Wf.
    pub dlog_dt: Array2<Complex64>,
    /// a ∂_a log Wf.
    pub a_dlog_da: Array2<Complex64>,
    pub mask: Array2<bool>,
}

/// Logarithmic derivatives as ratios of the spectral derivatives to Wf.
pub fn log_derivatives(bundle: &CwtBundle, eps_mag: f64) -> LogDerivField {
    let w = bundle.w.values();
    let peak = bundle.w.max_abs();
    let (rows, cols) = w.dim();
    let mask = Array2::from_shape_fn((rows, cols), |ix| {
        let m = w[ix].norm();
        peak > 0.0 && m > 0.0 && m >= eps_mag * peak
    });
    let zero = Complex64::new(0.0, 0.0);
    let dlog_dt = Array2::from_shape_fn((rows, cols), |ix| if mask[ix] { bundle.dt[ix] / w[ix] } else { zero });
    let a_dlog_da = Array2::from_shape_fn((rows, cols), |ix| if mask[ix] { bundle.a_da[ix] / w[ix] } else { zero });
    LogDerivField {
        times: bundle.w.time_axis().to_vec(),
        scales: bundle.w.second_axis().to_vec(),
        dlog_dt,
        a_dlog_da,
        mask,
    }
}

/// CWT followed by [`log_derivatives`].
pub fn cwt_log_derivatives(
    f: &Signal,
    w: &AnalyticWavelet,
    p: &CwtParams,
    eps_mag: f64,
) -> Result<(CwtBundle, LogDerivField)> {
    let bundle = cwt_with_derivatives(f, w, p)?;
    let ld = log_derivatives(&bundle, eps_mag);
    Ok((bundle, ld))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapMethod {
    #[serde(rename = "phase_T")]
    PhaseT,
    #[serde(rename = "phase_Tbeta")]
    PhaseTbeta,
    #[serde(rename = "amplitude")]
    Amplitude,
    #[serde(rename = "holomorphic")]
    Holomorphic,
}

impl MapMethod {
    pub fn tag(self) -> &'static str {
        match self {
            MapMethod::PhaseT => "phase_T",
            MapMethod::PhaseTbeta => "phase_Tbeta",
            MapMethod::Amplitude => "amplitude",
            MapMethod::Holomorphic => "holomorphic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaleTimeMap {
    pub times: Vec<f64>,
    pub scales: Vec<f64>,
    /// 1/ã in 1/s.
    pub inv_a_hat: Array2<f64>,
    pub t_hat: Array2<f64>,
    /// Signed Jacobian of (log a, t) ↦ (log ã, t̃).
    pub jacobian: Array2<f64>,
    pub mask: Array2<bool>,
    pub method: MapMethod,
}

impl ScaleTimeMap {
    pub fn a_hat(&self, r: usize, c: usize) -> f64 {
        1.0 / self.inv_a_hat[[r, c]]
    }

    fn build(
        times: &[f64],
        scales: &[f64],
        mask: &Array2<bool>,
        method: MapMethod,
        point: impl Fn(usize, usize) -> (f64, f64),
    ) -> Self {
        let (rows, cols) = mask.dim();
        let mut inv_a_hat = Array2::from_elem((rows, cols), f64::NAN);
        let mut t_hat = Array2::from_elem((rows, cols), f64::NAN);
        let mut valid = mask.clone();
        for r in 0..rows {
            for c in 0..cols {
                if !mask[[r, c]] {
                    continue;
                }
                let (ia, t) = point(r, c);
                if ia > 0.0 && ia.is_finite() && t.is_finite() {
                    inv_a_hat[[r, c]] = ia;
                    t_hat[[r, c]] = t;
                } else {
                    valid[[r, c]] = false;
                }
            }
        }
        let log_a: Vec<f64> = scales.iter().map(|a| a.ln()).collect();
        let log_a_hat = inv_a_hat.mapv(|x| -x.ln());
        let jacobian = jacobian(&t_hat, &log_a_hat, &log_a, times);
        Self {
            times: times.to_vec(),
            scales: scales.to_vec(),
            inv_a_hat,
            t_hat,
            jacobian,
            mask: valid,
            method,
        }
    }
}

/// T: 1/ã = ∂_tφ, t̃ = t + a²∂_aφ.
pub fn map_t(ld: &LogDerivField) -> ScaleTimeMap {
    ScaleTimeMap::build(&ld.times, &ld.scales, &ld.mask, MapMethod::PhaseT, |r, c| {
        let a = ld.scales[r];
        (ld.dlog_dt[[r, c]].im, ld.times[c] + a * ld.a_dlog_da[[r, c]].im)
    })
}

/// T_β: 1/ã = ∂_tφ, t̃ = t + a²(∂_a + β∂_t)φ.
pub fn map_tbeta(ld: &LogDerivField, params: &ExtremalParams) -> ScaleTimeMap {
    let beta = params.beta;
    ScaleTimeMap::build(&ld.times, &ld.scales, &ld.mask, MapMethod::PhaseTbeta, |r, c| {
        let a = ld.scales[r];
        let phi_t = ld.dlog_dt[[r, c]].im;
        (phi_t, ld.times[c] + a * ld.a_dlog_da[[r, c]].im + a * a * beta * phi_t)
    })
}

/// Amplitude map: 1/ã = ν/a − (1/γ)(∂_a + β∂_t) log r,
/// t̃ = t − aα + a²γ ∂_t log r.
pub fn map_amplitude(ld: &LogDerivField, params: &ExtremalParams) -> ScaleTimeMap {
    let g = params.gamma();
    let mask = Array2::from_shape_fn(ld.mask.dim(), |ix| ld.mask[ix] && ld.dlog_dt[ix].im > 0.0);
    ScaleTimeMap::build(&ld.times, &ld.scales, &mask, MapMethod::Amplitude, |r, c| {
        let a = ld.scales[r];
        let lt = ld.dlog_dt[[r, c]].re;
        let la = ld.a_dlog_da[[r, c]].re / a;
        (
            params.nu / a - (la + params.beta * lt) / g,
            ld.times[c] - a * params.alpha + a * a * g * lt,
        )
    })
}

/// Structure-equation constant γν − iα (κν − iα for c = 1).
pub fn structure_constant(params: &ExtremalParams) -> Complex64 {
    Complex64::new(params.gamma() * params.nu, -params.alpha)
}

#[derive(Debug, Clone)]
pub struct StructureResidual {
    /// R = a∂_a log Wf − K + a(β − iγ)∂_t log Wf.
    pub residual: Array2<Complex64>,
    pub constant: Complex64,
    /// Median over energetic points of a∂_a log Wf + a(β − iγ)∂_t log Wf,
    /// real and imaginary parts separately.
    pub calibrated: Complex64,
    pub median_abs: f64,
    pub energetic_points: usize,
}

pub fn structure_residual(w: &ComplexGrid, ld: &LogDerivField, params: &ExtremalParams) -> StructureResidual {
    let k = structure_constant(params);
    let coef = Complex64::new(params.beta, -params.gamma());
    let energetic = energetic_mask(w.values(), ENERGETIC_FRACTION);
    let (rows, cols) = ld.mask.dim();
    let lhs = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let a = ld.scales[r];
        ld.a_dlog_da[[r, c]] + a * coef * ld.dlog_dt[[r, c]]
    });
    let residual = lhs.mapv(|v| v - k);
    let pts: Vec<(usize, usize)> = energetic
        .indexed_iter()
        .filter(|(ix, on)| **on && ld.mask[*ix])
        .map(|(ix, _)| ix)
        .collect();
    let calibrated = Complex64::new(
        median(pts.iter().map(|ix| lhs[*ix].re)),
        median(pts.iter().map(|ix| lhs[*ix].im)),
    );
    let median_abs = median(pts.iter().map(|ix| residual[*ix].norm()));
    StructureResidual {
        residual,
        constant: k,
        calibrated,
        median_abs,
        energetic_points: pts.len(),
    }
}

/// F = log Wf − (γν − iα) log a with its z-derivatives.
#[derive(Debug, Clone)]
pub struct HolomorphicScalogram {
    pub times: Vec<f64>,
    pub scales: Vec<f64>,
    /// Branch: unwrapped along time in each row, rows aligned by multiples of 2π.
    pub f: Array2<Complex64>,
    pub df_dz: Array2<Complex64>,
    pub df_dzbar: Array2<Complex64>,
    pub mask: Array2<bool>,
    pub params: ExtremalParams,
}

fn unwrap_row(phase: &mut [f64]) {
    let mut offset = 0.0;
    for i in 1..phase.len() {
        let raw = phase[i] + offset;
        let d = raw - phase[i - 1];
        if d > PI {
            offset -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
        } else if d < -PI {
            offset += 2.0 * PI * ((-d + PI) / (2.0 * PI)).floor();
        }
        phase[i] += offset;
    }
}

/// Three-point stencil around `i`, shifted inward at the borders.
fn stencil(n: usize, i: usize) -> [usize; 3] {
    let lo = i.saturating_sub(1).min(n - 3);
    [lo, lo + 1, lo + 2]
}

/// Derivative at x[i] of the quadratic through the stencil points, given the
/// values minus the value at `i`.
fn lagrange_slope(x: &[f64], idx: [usize; 3], i: usize, d: [Complex64; 3]) -> Complex64 {
    let xe = x[i];
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..3 {
        let xj = x[idx[j]];
        let mut num = 0.0;
        let mut den = 1.0;
        for k in 0..3 {
            if k == j {
                continue;
            }
            den *= xj - x[idx[k]];
            let m = 3 - j - k;
            num += xe - x[idx[m]];
        }
        acc += d[j] * (num / den);
    }
    acc
}

fn wrapped(d: Complex64) -> Complex64 {
    Complex64::new(d.re, wrap_phase(d.im))
}

/// Holomorphic decomposition on the unmasked region; derivatives by finite
/// differences with wrapped phase differences.
pub fn extract_holomorphic(w: &ComplexGrid, params: &ExtremalParams, eps_mag: f64) -> Result<HolomorphicScalogram> {
    if w.axis_kind() != AxisKind::Scale {
        return Err(Error::InvalidGrid("expected a scale grid".into()));
    }
    let values = w.values();
    let times = w.time_axis();
    let scales = w.second_axis();
    let (rows, cols) = values.dim();
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidGrid("need at least 3 x 3 points".into()));
    }
    let peak = w.max_abs();
    let mask = values.mapv(|z| peak > 0.0 && z.norm() > 0.0 && z.norm() >= eps_mag * peak);
    let k = structure_constant(params);
    let log_w = values.mapv(|z| Complex64::new(z.norm().ln(), z.arg()));
    // Branch for F itself.
    let mut f = Array2::from_elem((rows, cols), Complex64::new(f64::NAN, f64::NAN));
    let mut prev_row: Option<Vec<f64>> = None;
    for r in 0..rows {
        let mut ph: Vec<f64> = (0..cols).map(|c| log_w[[r, c]].im).collect();
        unwrap_row(&mut ph);
        let pk = k * scales[r].ln();
        if let Some(prev) = &prev_row {
            // Align with the previous row at the column of largest magnitude.
            let c0 = (0..cols)
                .max_by(|&x, &y| values[[r, x]].norm().total_cmp(&values[[r, y]].norm()))
                .unwrap_or(0);
            let target = prev[c0];
            let here = ph[c0] - pk.im;
            let shift = 2.0 * PI * ((target - here) / (2.0 * PI)).round();
            ph.iter_mut().for_each(|p| *p += shift);
        }
        let fim: Vec<f64> = ph.iter().map(|p| p - pk.im).collect();
        for c in 0..cols {
            if mask[[r, c]] {
                f[[r, c]] = Complex64::new(log_w[[r, c]].re - pk.re, fim[c]);
            }
        }
        prev_row = Some(fim);
    }
    // Differences of log Wf − K log a with wrapped imaginary parts, so no
    // branch is needed here.
    let log_a: Vec<f64> = scales.iter().map(|a| a.ln()).collect();
    let g_val = |r: usize, c: usize| log_w[[r, c]] - k * log_a[r];
    let g = params.gamma();
    let beta = params.beta;
    let i = Complex64::i();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut df_dz = Array2::from_elem((rows, cols), nan);
    let mut df_dzbar = Array2::from_elem((rows, cols), nan);
    for r in 0..rows {
        for c in 0..cols {
            let st = stencil(cols, c);
            let sa = stencil(rows, r);
            if !(st.iter().all(|&x| mask[[r, x]]) && sa.iter().all(|&x| mask[[x, c]])) {
                continue;
            }
            let centre = g_val(r, c);
            let dt = st.map(|x| wrapped(g_val(r, x) - centre));
            let da = sa.map(|x| wrapped(g_val(x, c) - centre));
            let ft = lagrange_slope(times, st, c, dt);
            let fa = lagrange_slope(scales, sa, r, da);
            let shifted = fa + beta * ft;
            df_dz[[r, c]] = 0.5 * (ft - i / g * shifted);
            df_dzbar[[r, c]] = 0.5 * (ft + i / g * shifted);
        }
    }
    Ok(HolomorphicScalogram {
        times: times.to_vec(),
        scales: scales.to_vec(),
        f,
        df_dz,
        df_dzbar,
        mask,
        params: *params,
    })
}

impl HolomorphicScalogram {
    /// |∂F/∂z̄| / |∂F/∂z| where both are available.
    pub fn cr_ratio(&self) -> Array2<f64> {
        let (rows, cols) = self.f.dim();
        Array2::from_shape_fn((rows, cols), |ix| self.df_dzbar[ix].norm() / self.df_dz[ix].norm())
    }

    /// z = t − aβ + iaγ at a grid point.
    pub fn z(&self, r: usize, c: usize) -> Complex64 {
        let a = self.scales[r];
        Complex64::new(self.times[c] - a * self.params.beta, a * self.params.gamma())
    }
}

/// 1/ã = Im ∂F/∂z, t̃ = t − aα + a²γ Re ∂F/∂z.
pub fn map_holomorphic(h: &HolomorphicScalogram) -> ScaleTimeMap {
    let g = h.params.gamma();
    let valid = h.df_dz.mapv(|z| z.re.is_finite() && z.im.is_finite());
    ScaleTimeMap::build(&h.times, &h.scales, &valid, MapMethod::Holomorphic, |r, c| {
        let a = h.scales[r];
        let d = h.df_dz[[r, c]];
        (d.im, h.times[c] - a * h.params.alpha + a * a * g * d.re)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalogramMode {
    /// Kernel-weighted values at the nearest target bin.
    #[default]
    GridSum,
    /// Values moved without any weight.
    GridSumUnweighted,
    /// Kernel weight and clamped |J|⁻¹.
    FullKernel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalogramOptions {
    pub mode: ScalogramMode,
    pub eps_jacobian: f64,
    pub execution: Execution,
}

impl Default for ScalogramOptions {
    fn default() -> Self {
        Self {
            mode: ScalogramMode::default(),
            eps_jacobian: EPS_JACOBIAN,
            execution: Execution::default(),
        }
    }
}

/// Moves each valid coefficient to the target bin nearest (ã, t̃), scales
/// binned in log a. Kernel-weighted modes multiply by
/// conj Wψ(a/ã, (t − t̃)/ã) evaluated at the target bin.
pub fn reassign_scalogram(
    w: &ComplexGrid,
    map: &ScaleTimeMap,
    wavelet: &AnalyticWavelet,
    options: &ScalogramOptions,
    target: Option<(&[f64], &[f64])>,
) -> Result<ComplexGrid> {
    if w.values().dim() != map.mask.dim() {
        return Err(Error::InvalidGrid("map and transform differ in shape".into()));
    }
    let (target_times, target_scales) = target.unwrap_or((w.time_axis(), w.second_axis()));
    if target_times.is_empty() {
        return Err(Error::EmptyAxis("target time"));
    }
    if target_scales.is_empty() {
        return Err(Error::EmptyAxis("target scale"));
    }
    let log_scales: Vec<f64> = target_scales.iter().map(|a| a.ln()).collect();
    let tb = Binner::new(target_times);
    let ab = Binner::new(&log_scales);
    let values = w.values();
    let (rows, cols) = values.dim();
    let kernel = match options.mode {
        ScalogramMode::GridSumUnweighted => KernelTable::new(wavelet, []),
        _ => KernelTable::new(
            wavelet,
            map.scales
                .iter()
                .flat_map(|a| target_scales.iter().map(move |ta| a / ta)),
        ),
    };
    let per_point = map_range(options.execution, rows * cols, |idx| {
        let (r, c) = (idx / cols, idx % cols);
        if !map.mask[[r, c]] {
            return (None, false, false);
        }
        let (Some(l), Some(m)) = (tb.nearest(map.t_hat[[r, c]]), ab.nearest(-map.inv_a_hat[[r, c]].ln())) else {
            return (None, false, true);
        };
        let (a, t) = (map.scales[r], map.times[c]);
        let (ta, tt) = (target_scales[m], target_times[l]);
        let mut v = values[[r, c]];
        let mut clamped = false;
        match options.mode {
            ScalogramMode::GridSumUnweighted => {}
            ScalogramMode::GridSum => v *= kernel.eval(a / ta, (t - tt) / ta).conj(),
            ScalogramMode::FullKernel => {
                let (inv, hit) = clamped_inverse(map.jacobian[[r, c]], options.eps_jacobian);
                clamped = hit;
                v *= kernel.eval(a / ta, (t - tt) / ta).conj() * inv;
            }
        }
        (Some((m, l, v)), clamped, false)
    });
    let mut items: Vec<Contribution> = Vec::with_capacity(per_point.len());
    let (mut clamped, mut dropped) = (0usize, 0usize);
    for (item, hit, out) in per_point {
        clamped += hit as usize;
        dropped += out as usize;
        if let Some(it) = item {
            items.push(it);
        }
    }
    let out = accumulate(options.execution, target_scales.len(), target_times.len(), &items);
    let mut grid = ComplexGrid::new(out, target_times.to_vec(), target_scales.to_vec(), AxisKind::Scale)?;
    grid.metadata = w.metadata.clone();
    grid.metadata.insert("reassigned".into(), json!(true));
    grid.metadata.insert("method".into(), json!(map.method.tag()));
    grid.metadata.insert("mode".into(), serde_json::to_value(options.mode)?);
    grid.metadata.insert("contributing_points".into(), json!(items.len()));
    grid.metadata.insert("dropped_points".into(), json!(dropped));
    grid.metadata.insert("jacobian_clamped".into(), json!(clamped));
    grid.metadata.insert("eps_jacobian".into(), json!(options.eps_jacobian));
    Ok(grid)
}
