//! Reassignment of the short-time Fourier transform.
//!
//! Phase derivatives come from the auxiliary transforms with windows h′ and
//! t·h, never from unwrapped phase:
//!
//!   ∂φ/∂t = ω/2 − Im(S_{h′}/S),   ∂φ/∂ω = −t/2 − Re(S_{th}/S)
//!
//! so that t̃ = t/2 − ∂φ/∂ω = t + Re(S_{th}/S) and
//! ω̃ = ω/2 + ∂φ/∂t = ω − Im(S_{h′}/S).

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::accumulate::{accumulate, clamped_inverse, jacobian, Binner, Contribution, EPS_JACOBIAN};
use crate::error::{Error, Result};
use crate::grid::{AxisKind, ComplexGrid};
use crate::parallel::{map_range, Execution};
use crate::signal::Signal;
use crate::stats::{energetic_mask, median, wrap_phase, ENERGETIC_FRACTION};
use crate::stft::{stft_with_aux, StftBundle, StftParams};
use crate::window::Window;

/// Default magnitude threshold, relative to the peak, below which phase is
/// not used.
pub const EPS_MAG: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PhaseGradientField {
    pub times: Vec<f64>,
    pub omegas: Vec<f64>,
    /// ∂φ/∂t in rad/s.
    pub dphi_dt: Array2<f64>,
    /// ∂φ/∂ω in s.
    pub dphi_domega: Array2<f64>,
    pub mask: Array2<bool>,
}

/// Phase gradients from a transform bundle. Points with |S| < eps_mag·max|S|
/// are masked; their gradients are set to the values of a zero-phase point.
pub fn phase_gradients(bundle: &StftBundle, eps_mag: f64) -> PhaseGradientField {
    let s = bundle.s.values();
    let times = bundle.s.time_axis().to_vec();
    let omegas = bundle.s.second_axis().to_vec();
    let peak = bundle.s.max_abs();
    let threshold = eps_mag * peak;
    let (rows, cols) = s.dim();
    let mask = Array2::from_shape_fn((rows, cols), |(r, c)| {
        peak > 0.0 && s[[r, c]].norm() >= threshold && s[[r, c]].norm() > 0.0
    });
    let dphi_dt = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let w = omegas[r];
        if mask[[r, c]] {
            0.5 * w - (bundle.s_dh[[r, c]] / s[[r, c]]).im
        } else {
            0.5 * w
        }
    });
    let dphi_domega = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let t = times[c];
        if mask[[r, c]] {
            -0.5 * t - (bundle.s_th[[r, c]] / s[[r, c]]).re
        } else {
            -0.5 * t
        }
    });
    PhaseGradientField {
        times,
        omegas,
        dphi_dt,
        dphi_domega,
        mask,
    }
}

/// Computes the transform bundle and its phase gradients.
pub fn stft_phase_gradients(
    f: &Signal,
    h: &Window,
    p: &StftParams,
    eps_mag: f64,
) -> Result<(StftBundle, PhaseGradientField)> {
    let bundle = stft_with_aux(f, h, p)?;
    let pg = phase_gradients(&bundle, eps_mag);
    Ok((bundle, pg))
}

#[derive(Debug, Clone)]
pub struct ReassignmentField {
    pub times: Vec<f64>,
    pub omegas: Vec<f64>,
    pub t_hat: Array2<f64>,
    pub w_hat: Array2<f64>,
    /// Signed Jacobian of (t, ω) ↦ (t̃, ω̃).
    pub jacobian: Array2<f64>,
    pub mask: Array2<bool>,
}

/// t̃ = t/2 − ∂φ/∂ω, ω̃ = ω/2 + ∂φ/∂t.
pub fn reassignment_map(pg: &PhaseGradientField) -> ReassignmentField {
    let (rows, cols) = pg.dphi_dt.dim();
    let t_hat = Array2::from_shape_fn((rows, cols), |(r, c)| 0.5 * pg.times[c] - pg.dphi_domega[[r, c]]);
    let w_hat = Array2::from_shape_fn((rows, cols), |(r, c)| 0.5 * pg.omegas[r] + pg.dphi_dt[[r, c]]);
    let jacobian = jacobian(&t_hat, &w_hat, &pg.omegas, &pg.times);
    ReassignmentField {
        times: pg.times.clone(),
        omegas: pg.omegas.clone(),
        t_hat,
        w_hat,
        jacobian,
        mask: pg.mask.clone(),
    }
}

/// v = (t̃ − t, ω̃ − ω) = (−t/2 − ∂φ/∂ω, −ω/2 + ∂φ/∂t).
pub fn displacement_field(pg: &PhaseGradientField) -> (Array2<f64>, Array2<f64>) {
    let (rows, cols) = pg.dphi_dt.dim();
    let vt = Array2::from_shape_fn((rows, cols), |(r, c)| -0.5 * pg.times[c] - pg.dphi_domega[[r, c]]);
    let vw = Array2::from_shape_fn((rows, cols), |(r, c)| -0.5 * pg.omegas[r] + pg.dphi_dt[[r, c]]);
    (vt, vw)
}

/// Transform values (S, S_{h′}, S_{th}) at one point; `t` is rounded to the
/// nearest sample of `f`.
pub fn stft_point(f: &Signal, h: &Window, t: f64, omega: f64) -> Result<[Complex64; 3]> {
    let rate = f.sample_rate();
    let taps = h.taps(rate)?;
    let c = ((t - f.start_time()) * rate).round() as isize;
    let t = f.start_time() + c as f64 / rate;
    let x = f.samples();
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for k in 0..taps.len() {
        let m = k as isize - taps.half as isize;
        let i = c + m;
        if i < 0 || i as usize >= x.len() {
            continue;
        }
        let e = Complex64::from_polar(x[i as usize], -omega * m as f64 / rate);
        acc[0] += e * taps.h[k];
        acc[1] += e * taps.dh[k];
        acc[2] += e * taps.th[k];
    }
    let weyl = Complex64::from_polar(1.0 / rate, -0.5 * omega * t);
    Ok(acc.map(|v| v * weyl))
}

/// Φ(τ, η) = φ(t₀+τ, ω₀+η) − (τω₀ − t₀η)/2 on a local patch.
#[derive(Debug, Clone)]
pub struct GeometricPhase {
    pub t0: f64,
    pub w0: f64,
    /// Time offsets τ (columns).
    pub taus: Vec<f64>,
    /// Frequency offsets η (rows).
    pub etas: Vec<f64>,
    /// Wrapped to (−π, π].
    pub phi: Array2<f64>,
}

impl GeometricPhase {
    /// ∇Φ at the patch centre by central differences of wrapped phase.
    pub fn center_gradient(&self) -> (f64, f64) {
        let (rows, cols) = self.phi.dim();
        let (r, c) = (rows / 2, cols / 2);
        let dt = wrap_phase(self.phi[[r, c + 1]] - self.phi[[r, c - 1]]) / (self.taus[c + 1] - self.taus[c - 1]);
        let dw = wrap_phase(self.phi[[r + 1, c]] - self.phi[[r - 1, c]]) / (self.etas[r + 1] - self.etas[r - 1]);
        (dt, dw)
    }
}

/// Geometric phase on a (2·half_w+1) x (2·half_t+1) patch: time offsets are
/// whole samples, frequency offsets multiples of `dw`.
pub fn geometric_phase(
    f: &Signal,
    h: &Window,
    t0: f64,
    w0: f64,
    half_t: usize,
    half_w: usize,
    dw: f64,
) -> Result<GeometricPhase> {
    if half_t == 0 || half_w == 0 || !(dw > 0.0) {
        return Err(Error::InvalidParameter("patch must extend on both axes".into()));
    }
    let rate = f.sample_rate();
    let t0 = f.start_time() + ((t0 - f.start_time()) * rate).round() / rate;
    let centre = stft_point(f, h, t0, w0)?[0];
    let peak = centre.norm();
    if !(peak > 0.0) {
        return Err(Error::OutOfRange("patch centre has zero magnitude".into()));
    }
    let taus: Vec<f64> = (-(half_t as isize)..=half_t as isize)
        .map(|k| k as f64 / rate)
        .collect();
    let etas: Vec<f64> = (-(half_w as isize)..=half_w as isize).map(|k| k as f64 * dw).collect();
    let mut phi = Array2::zeros((etas.len(), taus.len()));
    for (r, &eta) in etas.iter().enumerate() {
        for (c, &tau) in taus.iter().enumerate() {
            let s = stft_point(f, h, t0 + tau, w0 + eta)?[0];
            phi[[r, c]] = wrap_phase(s.arg() - 0.5 * (tau * w0 - t0 * eta));
        }
    }
    Ok(GeometricPhase {
        t0,
        w0,
        taus,
        etas,
        phi,
    })
}

/// |v·∇Φ| / (|v|·|∇Φ|) at (t₀, ω₀), with ∇Φ from finite differences of the
/// geometric phase and v from the auxiliary transforms.
pub fn tangency(f: &Signal, h: &Window, t0: f64, w0: f64, dw: f64) -> Result<f64> {
    let gp = geometric_phase(f, h, t0, w0, 1, 1, dw)?;
    let [s, s_dh, s_th] = stft_point(f, h, gp.t0, w0)?;
    let vt = (s_th / s).re;
    let vw = -(s_dh / s).im;
    let (gt, gw) = gp.center_gradient();
    let dot = vt * gt + vw * gw;
    Ok(dot.abs() / ((vt * vt + vw * vw).sqrt() * (gt * gt + gw * gw).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReassignMode {
    #[default]
    GridSum,
    FullKernel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReassignOptions {
    pub mode: ReassignMode,
    pub eps_jacobian: f64,
    pub execution: Execution,
}

impl Default for ReassignOptions {
    fn default() -> Self {
        Self {
            mode: ReassignMode::GridSum,
            eps_jacobian: EPS_JACOBIAN,
            execution: Execution::default(),
        }
    }
}

/// Moves every valid coefficient to the target bin nearest (t̃, ω̃).
///
/// grid_sum adds e^{i(t̃_l ω − ω̃_m t)/2}·Sf(t, ω) with (t̃_l, ω̃_m) the
/// target bin; full_kernel additionally weights by
/// Sh(t̃_l − t, ω̃_m − ω)/‖h‖² and the clamped |J|⁻¹. The target grid
/// defaults to the source grid.
pub fn reassign_spectrogram(
    s: &ComplexGrid,
    field: &ReassignmentField,
    h: &Window,
    options: &ReassignOptions,
    target: Option<(&[f64], &[f64])>,
) -> Result<ComplexGrid> {
    if s.values().dim() != field.t_hat.dim() {
        return Err(Error::InvalidGrid("field and transform differ in shape".into()));
    }
    let (target_times, target_omegas) = target.unwrap_or((s.time_axis(), s.second_axis()));
    if target_times.is_empty() {
        return Err(Error::EmptyAxis("target time"));
    }
    if target_omegas.is_empty() {
        return Err(Error::EmptyAxis("target frequency"));
    }
    let tb = Binner::new(target_times);
    let wb = Binner::new(target_omegas);
    let kernel = h.self_transform();
    let norm = h.norm_sq();
    let values = s.values();
    let (rows, cols) = values.dim();
    let per_point = map_range(options.execution, rows * cols, |idx| {
        let (r, c) = (idx / cols, idx % cols);
        if !field.mask[[r, c]] {
            return (None, false, false);
        }
        let (Some(l), Some(m)) = (tb.nearest(field.t_hat[[r, c]]), wb.nearest(field.w_hat[[r, c]])) else {
            return (None, false, true);
        };
        let (t, w) = (field.times[c], field.omegas[r]);
        let (tl, wm) = (target_times[l], target_omegas[m]);
        let phase = Complex64::from_polar(1.0, 0.5 * (tl * w - wm * t));
        let mut v = phase * values[[r, c]];
        let mut clamped = false;
        if options.mode == ReassignMode::FullKernel {
            let (inv, hit) = clamped_inverse(field.jacobian[[r, c]], options.eps_jacobian);
            clamped = hit;
            v *= kernel.eval(tl - t, wm - w) / norm * inv;
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
    let out = accumulate(options.execution, target_omegas.len(), target_times.len(), &items);
    let mut grid = ComplexGrid::new(out, target_times.to_vec(), target_omegas.to_vec(), AxisKind::Frequency)?;
    grid.metadata = s.metadata.clone();
    grid.metadata.insert("reassigned".into(), json!(true));
    grid.metadata.insert("mode".into(), serde_json::to_value(options.mode)?);
    grid.metadata.insert("contributing_points".into(), json!(items.len()));
    grid.metadata.insert("dropped_points".into(), json!(dropped));
    grid.metadata.insert("jacobian_clamped".into(), json!(clamped));
    grid.metadata.insert("eps_jacobian".into(), json!(options.eps_jacobian));
    Ok(grid)
}

/// log F = log Sf + |z|²/4 with z = σω + it/σ, and its finite-difference
/// Cauchy–Riemann diagnostics. Only defined for Gaussian windows.
#[derive(Debug, Clone)]
pub struct HolomorphicFactor {
    pub sigma: f64,
    /// log F, imaginary part wrapped.
    pub log_f: Array2<Complex64>,
    /// |∂F/∂z̄| / |∂F/∂z| at interior points, NaN elsewhere.
    pub cr_ratio: Array2<f64>,
    /// (σ²∂_t, σ⁻²∂_ω) log|F|; the plain gradient when σ = 1.
    pub grad_log_abs_f: (Array2<f64>, Array2<f64>),
    /// (σ²∂_t, σ⁻²∂_ω) log|Sf|.
    pub grad_log_abs_s: (Array2<f64>, Array2<f64>),
    pub energetic: Array2<bool>,
}

pub fn holomorphic_factor(s: &ComplexGrid, h: &Window) -> Result<HolomorphicFactor> {
    let sigma = h.sigma().ok_or(Error::NotGaussian)?;
    if s.axis_kind() != AxisKind::Frequency {
        return Err(Error::InvalidGrid("expected a frequency grid".into()));
    }
    let times = s.time_axis();
    let omegas = s.second_axis();
    let values = s.values();
    let (rows, cols) = values.dim();
    let log_s = values.mapv(|z| Complex64::new(z.norm().ln(), z.arg()));
    let log_f = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (t, w) = (times[c], omegas[r]);
        log_s[[r, c]] + 0.25 * (sigma * sigma * w * w + t * t / (sigma * sigma))
    });
    let energetic = energetic_mask(values, ENERGETIC_FRACTION);
    let interior = |r: usize, c: usize| r > 0 && c > 0 && r + 1 < rows && c + 1 < cols;
    // Finite differences of the phase after removing the Weyl term ∓iωt/2,
    // which is linear along each direction and is differentiated exactly.
    // Without it the ω-difference of arg Sf grows like t and wraps.
    let i = Complex64::i();
    let demod = |r: usize, c: usize, sign: f64| log_s[[r, c]] + sign * 0.5 * i * omegas[r] * times[c];
    let wrapped = |d: Complex64| Complex64::new(d.re, wrap_phase(d.im));
    let mut cr_ratio = Array2::from_elem((rows, cols), f64::NAN);
    let nan = || Array2::from_elem((rows, cols), f64::NAN);
    let (mut gft, mut gfw, mut gst, mut gsw) = (nan(), nan(), nan(), nan());
    for r in 0..rows {
        for c in 0..cols {
            if !interior(r, c) || !log_s[[r, c]].re.is_finite() {
                continue;
            }
            let (t, w) = (times[c], omegas[r]);
            let st =
                wrapped(demod(r, c + 1, -1.0) - demod(r, c - 1, -1.0)) / (times[c + 1] - times[c - 1]) + 0.5 * i * w;
            let sw =
                wrapped(demod(r + 1, c, 1.0) - demod(r - 1, c, 1.0)) / (omegas[r + 1] - omegas[r - 1]) - 0.5 * i * t;
            let ft = st + 0.5 * t / (sigma * sigma);
            let fw = sw + 0.5 * sigma * sigma * w;
            // x = σω, y = t/σ
            let dx = fw / sigma;
            let dy = ft * sigma;
            let dz = 0.5 * (dx - i * dy);
            let dzbar = 0.5 * (dx + i * dy);
            cr_ratio[[r, c]] = dzbar.norm() / dz.norm();
            gft[[r, c]] = sigma * sigma * ft.re;
            gfw[[r, c]] = fw.re / (sigma * sigma);
            gst[[r, c]] = sigma * sigma * st.re;
            gsw[[r, c]] = sw.re / (sigma * sigma);
        }
    }
    Ok(HolomorphicFactor {
        sigma,
        log_f,
        cr_ratio,
        grad_log_abs_f: (gft, gfw),
        grad_log_abs_s: (gst, gsw),
        energetic,
    })
}

impl HolomorphicFactor {
    /// Median CR ratio over energetic points.
    pub fn median_cr(&self) -> f64 {
        median(
            self.cr_ratio
                .indexed_iter()
                .filter(|(ix, _)| self.energetic[*ix])
                .map(|(_, v)| *v),
        )
    }

    /// Median of |v − g|/|v| over energetic points for a gradient field g.
    pub fn median_deviation(
        v: &(Array2<f64>, Array2<f64>),
        g: &(Array2<f64>, Array2<f64>),
        mask: &Array2<bool>,
    ) -> f64 {
        median(v.0.indexed_iter().filter(|(ix, _)| mask[*ix]).map(|(ix, &vt)| {
            let vw = v.1[ix];
            let (dt, dw) = (vt - g.0[ix], vw - g.1[ix]);
            (dt * dt + dw * dw).sqrt() / (vt * vt + vw * vw).sqrt()
        }))
    }
}
