//! Extremal analytic wavelets of the affine group.
//!
//! The spectrum, for ω > 0, is
//!
//!   ψ̂(ω) = 2k e^{i(−ε + α log ω + βω)} e^{−(κ/c)ω^c} ω^{κν−1/2}
//!
//! and zero for ω ≤ 0. Phase signs are chosen so that with
//! Wf(a, b) = (f, ψ_{a,b}) and c = 1 the transform satisfies
//!
//!   a∂_a log Wf = (κν − iα) − a(β − iκ)∂_b log Wf
//!
//! exactly. Fourier transforms are unitary: f̂(ω) = (2π)^{−1/2}∫f e^{−iωt}dt.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalParams {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub kappa: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ExtremalParams {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            alpha: 0.0,
            beta: 0.0,
            kappa: 2.0,
            nu: 1.0,
            c: 1.0,
        }
    }
}

impl ExtremalParams {
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    /// γ = cκ.
    pub fn gamma(&self) -> f64 {
        self.c * self.kappa
    }

    /// Exponent of |ω| near zero, κν − 1/2.
    pub fn power(&self) -> f64 {
        self.kappa * self.nu - 0.5
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.epsilon, self.alpha, self.beta, self.kappa, self.nu, self.c];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("wavelet parameters must be finite".into()));
        }
        if self.kappa <= 0.0 || self.nu <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa and nu must be positive, got {} and {}",
                self.kappa, self.nu
            )));
        }
        if self.c < 1.0 {
            return Err(Error::InvalidParameter(format!("c must be >= 1, got {}", self.c)));
        }
        if self.kappa * self.nu <= 0.5 {
            return Err(Error::NotAdmissible {
                kappa_nu: self.kappa * self.nu,
            });
        }
        Ok(())
    }

    /// ln k for the normalization ‖ψ‖ = 1:
    /// k² = c (2κ/c)^{2κν/c} / (4 Γ(2κν/c)).
    fn ln_k(&self) -> f64 {
        let s = 2.0 * self.kappa * self.nu / self.c;
        0.5 * (self.c.ln() + s * (2.0 * self.kappa / self.c).ln() - 4f64.ln() - ln_gamma(s))
    }

    /// ln |ĥ(ω)| / k for ω ≠ 0.
    fn ln_envelope(&self, w: f64) -> f64 {
        let w = w.abs();
        -(self.kappa / self.c) * w.powf(self.c) + self.power() * w.ln()
    }

    /// Phase of ψ̂ at ω > 0.
    fn phase(&self, w: f64) -> f64 {
        -self.epsilon + self.alpha * w.ln() + self.beta * w
    }
}

/// The real extremal ĥ(ω) with amplitude `k`: conjugate-symmetric, so that
/// ψ̂ = 2ĥ on ω > 0. ĥ(0) = 0.
pub fn extremal_spectrum(params: &ExtremalParams, k: f64, w: f64) -> Complex64 {
    if w == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let v = Complex64::from_polar(k * params.ln_envelope(w).exp(), params.phase(w.abs()));
    if w > 0.0 {
        v
    } else {
        v.conj()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticWavelet {
    params: ExtremalParams,
    k: f64,
}

impl AnalyticWavelet {
    pub fn new(params: ExtremalParams) -> Result<Self> {
        params.validate()?;
        let k = params.ln_k().exp();
        Ok(Self { params, k })
    }

    pub fn params(&self) -> &ExtremalParams {
        &self.params
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// ψ̂(ω); zero for ω ≤ 0.
    pub fn spectrum(&self, w: f64) -> Complex64 {
        if w <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(
            2.0 * (self.params.ln_envelope(w) + self.params.ln_k()).exp(),
            self.params.phase(w),
        )
    }

    /// ψ̂′/ψ̂ at ω > 0: (κν − 1/2)/ω + iα/ω + iβ − κω^{c−1}.
    pub fn log_derivative(&self, w: f64) -> Complex64 {
        let p = &self.params;
        Complex64::new(p.power() / w - p.kappa * w.powf(p.c - 1.0), p.alpha / w + p.beta)
    }

    /// Frequency of the modulus peak, ((κν − 1/2)/κ)^{1/c}.
    pub fn peak_frequency(&self) -> f64 {
        (self.params.power() / self.params.kappa).powf(1.0 / self.params.c)
    }

    /// C = ∫₀^∞ |ψ̂(ω)|/ω dω = 2k (1/c)(c/κ)^{(κν−1/2)/c} Γ((κν−1/2)/c).
    pub fn admissibility_constant(&self) -> f64 {
        let p = &self.params;
        let s = p.power() / p.c;
        2.0 * self.k * (s * (p.c / p.kappa).ln() + ln_gamma(s) - p.c.ln()).exp()
    }

    /// C′ = ∫₀^∞ |ψ̂(ω)|²/ω dω = 4k² (1/c)(c/2κ)^{(2κν−1)/c} Γ((2κν−1)/c).
    pub fn reconstruction_constant(&self) -> f64 {
        let p = &self.params;
        let s = 2.0 * p.power() / p.c;
        4.0 * self.k * self.k * (s * (p.c / (2.0 * p.kappa)).ln() + ln_gamma(s) - p.c.ln()).exp()
    }

    /// Auto-transform Wψ(a, b) = (ψ, ψ_{a,b}). Closed form for c = 1:
    /// a^{κν−iα}(2κ)^{2κν} D^{−2κν} with D = κ(1+a) − iβ(1−a) − ib.
    pub fn kernel(&self, a: f64, b: f64) -> Complex64 {
        let p = &self.params;
        if !(a > 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        if p.c == 1.0 {
            let s = 2.0 * p.kappa * p.nu;
            let d = Complex64::new(p.kappa * (1.0 + a), -p.beta * (1.0 - a) - b);
            let ln = Complex64::new(p.kappa * p.nu * a.ln() + s * (2.0 * p.kappa).ln(), -p.alpha * a.ln()) - s * d.ln();
            return ln.exp();
        }
        self.kernel_quadrature(a, b)
    }

    /// ∫₀^∞ ψ̂(ω) √a conj ψ̂(aω) e^{ibω} dω by the trapezoid rule in log ω.
    pub fn kernel_quadrature(&self, a: f64, b: f64) -> Complex64 {
        let p = &self.params;
        let w_peak = self.peak_frequency();
        let lo = w_peak.ln() - 40.0 / (2.0 * p.power() + 1.0) - 2.0;
        let top = (w_peak.powf(p.c) + 60.0 * p.c / (p.kappa * (1.0 + a.powf(p.c)))).powf(1.0 / p.c);
        let hi = top.ln();
        let n = (4000.0 + 8.0 * b.abs() * top * (hi - lo)) as usize;
        let du = (hi - lo) / n as f64;
        let sa = a.sqrt();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let u = lo + i as f64 * du;
            let w = u.exp();
            let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
            let v = self.spectrum(w) * self.spectrum(a * w).conj() * Complex64::from_polar(sa * w, b * w);
            acc += v * weight;
        }
        acc * du
    }

    /// |ψ̂(ω)| relative to its peak.
    pub fn relative_magnitude(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let p = &self.params;
        (p.ln_envelope(w) - p.ln_envelope(self.peak_frequency())).exp()
    }

    pub fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "extremal",
            "params": self.params,
            "k": self.k,
            "gamma": self.params.gamma(),
            "convention": "psi_hat(w) = 2k exp(i(-eps + alpha ln w + beta w)) exp(-(kappa/c) w^c) w^(kappa nu - 1/2), w > 0",
            "structure_constant": {"re": self.params.kappa * self.params.nu, "im": -self.params.alpha},
        })
    }
}

/// Auto-transform evaluator for repeated calls with few distinct scale
/// ratios. For c ≠ 1 the log-ω quadrature nodes of each registered ratio are
/// tabulated once; other ratios, and shifts too large for the tabulated
/// spacing, fall back to [`AnalyticWavelet::kernel_quadrature`].
#[derive(Debug, Clone)]
pub struct KernelTable {
    wavelet: AnalyticWavelet,
    nodes: HashMap<i64, RatioNodes>,
}

#[derive(Debug, Clone)]
struct RatioNodes {
    omega: Vec<f64>,
    weight: Vec<Complex64>,
    /// Largest |b| the node spacing resolves.
    b_max: f64,
}

/// Relative size below which the integrand is dropped.
const KERNEL_TAIL: f64 = 28.0;
/// Shift range, in units of 1/ω_peak, resolved by the tabulated nodes.
const KERNEL_SHIFT: f64 = 24.0;

fn ratio_key(a: f64) -> i64 {
    (a.ln() * 1e9).round() as i64
}

impl KernelTable {
    pub fn new(wavelet: &AnalyticWavelet, ratios: impl IntoIterator<Item = f64>) -> Self {
        let mut nodes = HashMap::new();
        if wavelet.params.c != 1.0 {
            for a in ratios {
                if a > 0.0 && a.is_finite() {
                    nodes.entry(ratio_key(a)).or_insert_with(|| wavelet.ratio_nodes(a));
                }
            }
        }
        Self {
            wavelet: *wavelet,
            nodes,
        }
    }

    pub fn wavelet(&self) -> &AnalyticWavelet {
        &self.wavelet
    }

    /// Same value as [`AnalyticWavelet::kernel`].
    pub fn eval(&self, a: f64, b: f64) -> Complex64 {
        if self.wavelet.params.c == 1.0 || !(a > 0.0) {
            return self.wavelet.kernel(a, b);
        }
        match self.nodes.get(&ratio_key(a)) {
            Some(n) if b.abs() <= n.b_max => n
                .omega
                .iter()
                .zip(&n.weight)
                .map(|(&w, &g)| g * Complex64::from_polar(1.0, b * w))
                .sum(),
            _ => self.wavelet.kernel_quadrature(a, b),
        }
    }
}

impl AnalyticWavelet {
    /// Log-ω nodes covering the integrand of the auto-transform at ratio `a`.
    fn ratio_nodes(&self, a: f64) -> RatioNodes {
        let p = &self.params;
        let w0 = self.peak_frequency();
        let ln_mag = |u: f64| {
            let w = u.exp();
            p.ln_envelope(w) + p.ln_envelope(a * w) + u
        };
        let (scan_lo, scan_hi) = (w0.ln() - 60.0, w0.ln() + 8.0);
        let steps = 6800;
        let du_scan = (scan_hi - scan_lo) / steps as f64;
        let peak = (0..=steps)
            .map(|i| ln_mag(scan_lo + i as f64 * du_scan))
            .fold(f64::NEG_INFINITY, f64::max);
        let inside = |i: usize| ln_mag(scan_lo + i as f64 * du_scan) >= peak - KERNEL_TAIL;
        let first = (0..=steps).find(|&i| inside(i)).unwrap_or(0).saturating_sub(1);
        let last = ((0..=steps).rev().find(|&i| inside(i)).unwrap_or(steps) + 1).min(steps);
        let (lo, hi) = (scan_lo + first as f64 * du_scan, scan_lo + last as f64 * du_scan);
        let b_max = KERNEL_SHIFT / w0;
        let w_hi = hi.exp();
        let du = ((hi - lo) / 256.0).min(1.0 / (b_max * w_hi));
        let n = ((hi - lo) / du).ceil() as usize;
        let du = (hi - lo) / n as f64;
        let sa = a.sqrt();
        let mut omega = Vec::with_capacity(n + 1);
        let mut weight = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let w = (lo + i as f64 * du).exp();
            let end = if i == 0 || i == n { 0.5 } else { 1.0 };
            omega.push(w);
            weight.push(self.spectrum(w) * self.spectrum(a * w).conj() * (sa * w * du * end));
        }
        RatioNodes { omega, weight, b_max }
    }
}

/// ϱ_{a,b}f(t) = a^{−1/2} f((t − b)/a).
pub fn affine_action<F>(a: f64, b: f64, f: F) -> impl Fn(f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let s = a.sqrt().recip();
    move |t| s * f((t - b) / a)
}

/// The affine action on samples, through the band-limited (trigonometric)
/// interpolant of the samples. Needs the result to stay inside the band.
pub fn affine_action_sampled(a: f64, b: f64, samples: &[f64], rate: f64, start: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("dilation must be positive, got {a}")));
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidSignal("signal is empty".into()));
    }
    let mut spec: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let half = n / 2;
    let interp = |x: f64| -> f64 {
        // x in samples from the first one
        let mut acc = spec[0].re;
        for (k, c) in spec.iter().enumerate().take(half + 1).skip(1) {
            let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / n as f64);
            let term = (c * e).re;
            acc += if n.is_multiple_of(2) && k == half {
                term
            } else {
                2.0 * term
            };
        }
        acc / n as f64
    };
    let s = a.sqrt().recip();
    Ok((0..n)
        .map(|i| {
            let t = start + i as f64 / rate;
            s * interp(((t - b) / a - start) * rate)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let du = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = (lo + i as f64 * du).exp();
                let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
                weight * f(w) * w
            })
            .sum::<f64>()
            * du
    }

    #[test]
    fn normalization_constant_for_kappa_two() {
        let w = AnalyticWavelet::new(ExtremalParams::default()).unwrap();
        assert!((w.k() * w.k() - 256.0 / 24.0).abs() < 1e-10);
    }

    #[test]
    fn unit_norm_for_parameter_matrix() {
        for &(kappa, nu, c) in &[
            (2.0, 1.0, 1.0),
            (8.0, 1.0, 1.0),
            (1.0, 0.75, 1.0),
            (2.0, 1.0, 2.0),
            (3.0, 0.5, 1.5),
        ] {
            let p = ExtremalParams::default()
                .with_kappa(kappa)
                .with_nu(nu)
                .with_c(c)
                .with_alpha(0.3)
                .with_beta(0.1);
            let w = AnalyticWavelet::new(p).unwrap();
            let e = quad_log(|x| w.spectrum(x).norm_sqr(), -40.0, 5.0, 200_000);
            assert!((e - 1.0).abs() < 1e-10, "{p:?} {e}");
        }
    }

    #[test]
    fn constants_match_quadrature() {
        for &(kappa, c) in &[(2.0, 1.0), (5.0, 1.0), (2.0, 2.0)] {
            let w = AnalyticWavelet::new(ExtremalParams::default().with_kappa(kappa).with_c(c)).unwrap();
            let ca = quad_log(|x| w.spectrum(x).norm() / x, -60.0, 5.0, 400_000);
            let cr = quad_log(|x| w.spectrum(x).norm_sqr() / x, -60.0, 5.0, 400_000);
            assert!((ca / w.admissibility_constant() - 1.0).abs() < 1e-8);
            assert!((cr / w.reconstruction_constant() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn admissibility_grows_near_the_bound() {
        let mut last = 0.0;
        for kn in [0.9, 0.7, 0.6, 0.55, 0.51] {
            let w = AnalyticWavelet::new(ExtremalParams::default().with_kappa(1.0).with_nu(kn)).unwrap();
            let c = w.admissibility_constant() / w.k();
            assert!(c > last);
            last = c;
        }
        assert!(matches!(
            AnalyticWavelet::new(ExtremalParams::default().with_kappa(1.0).with_nu(0.5)),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn spectrum_peak_and_support() {
        let w = AnalyticWavelet::new(ExtremalParams::default()).unwrap();
        let wp = w.peak_frequency();
        assert!((wp - 0.75).abs() < 1e-15);
        let m = w.spectrum(wp).norm();
        assert!(w.spectrum(wp * 1.001).norm() < m && w.spectrum(wp * 0.999).norm() < m);
        assert_eq!(w.spectrum(0.0), Complex64::new(0.0, 0.0));
        assert_eq!(w.spectrum(-1.0), Complex64::new(0.0, 0.0));
        let h = extremal_spectrum(w.params(), w.k(), 0.4);
        assert!(h.im.abs() < 1e-15 && h.re > 0.0);
        assert!((2.0 * h - w.spectrum(0.4)).norm() < 1e-14);
    }

    #[test]
    fn log_derivative_matches_difference() {
        let p = ExtremalParams::default().with_alpha(0.7).with_beta(0.2).with_c(1.5);
        let w = AnalyticWavelet::new(p).unwrap();
        for x in [0.2, 0.9, 2.5] {
            let h = 1e-6 * x;
            let fd = (w.spectrum(x + h) - w.spectrum(x - h)) / (2.0 * h) / w.spectrum(x);
            assert!((fd - w.log_derivative(x)).norm() < 1e-6);
        }
    }

    #[test]
    fn kernel_identity_bound_and_symmetry() {
        for c in [1.0, 2.0] {
            let p = ExtremalParams::default().with_alpha(0.4).with_beta(0.3).with_c(c);
            let w = AnalyticWavelet::new(p).unwrap();
            assert!((w.kernel(1.0, 0.0) - 1.0).norm() < 1e-8);
            for &(a, b) in &[(0.5, 0.3), (1.7, -2.0), (3.0, 4.0)] {
                let k = w.kernel(a, b);
                assert!(k.norm() <= 1.0 + 1e-9);
                let inv = w.kernel(1.0 / a, -b / a);
                assert!((inv - k.conj()).norm() < 1e-7, "{c} {a} {b} {k} {inv}");
            }
        }
    }

    #[test]
    fn closed_kernel_matches_quadrature() {
        let w = AnalyticWavelet::new(ExtremalParams::default().with_alpha(0.5).with_beta(0.2)).unwrap();
        for &(a, b) in &[(1.0, 0.0), (0.6, 0.4), (2.0, -1.5)] {
            assert!((w.kernel(a, b) - w.kernel_quadrature(a, b)).norm() < 1e-8);
        }
    }

    #[test]
    fn kernel_table_matches_quadrature() {
        for (c, kappa) in [(2.0, 2.0), (1.5, 8.0), (1.0, 2.0)] {
            let w = AnalyticWavelet::new(
                ExtremalParams::default()
                    .with_kappa(kappa)
                    .with_c(c)
                    .with_alpha(0.3)
                    .with_beta(0.1),
            )
            .unwrap();
            let ratios: Vec<f64> = (-40..=40).map(|k| (k as f64 * 0.0433).exp()).collect();
            let table = KernelTable::new(&w, ratios.iter().copied());
            let w0 = w.peak_frequency();
            for &a in ratios.iter().step_by(7) {
                for bw in [0.0, 0.7, -3.0, 11.0, -23.0, 60.0] {
                    let b = bw / w0;
                    let want = w.kernel_quadrature(a, b);
                    let got = table.eval(a, b);
                    assert!((got - want).norm() < 1e-9, "c={c} a={a} b={b}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn dilated_spectrum_is_another_member() {
        // |ĥ(aω)| for c = 1 is ∝ |ĥ| with κ → aκ and the same power κν.
        let p = ExtremalParams::default();
        let a = 1.6;
        let q = ExtremalParams::default().with_kappa(a * p.kappa).with_nu(p.nu / a);
        let ratio = |w: f64| extremal_spectrum(&p, 1.0, a * w).norm() / extremal_spectrum(&q, 1.0, w).norm();
        let r0 = ratio(0.3);
        for w in [0.5, 1.0, 2.0, 4.0] {
            assert!((ratio(w) / r0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_action_is_unitary_and_composes() {
        let rate = 64.0;
        let n = 1024;
        let start = -8.0;
        let f = |t: f64| (-2.0 * t * t).exp() * (3.0 * t).cos();
        let x: Vec<f64> = (0..n).map(|i| f(start + i as f64 / rate)).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let y = affine_action_sampled(1.5, 0.7, &x, rate, start).unwrap();
        assert!((norm(&y) / norm(&x) - 1.0).abs() < 1e-10);
        let id = affine_action_sampled(1.0, 0.0, &x, rate, start).unwrap();
        assert!(x.iter().zip(&id).all(|(a, b)| (a - b).abs() < 1e-10));
        // (a, b)(a', b') = (aa', ab' + b)
        let (a1, b1, a2, b2) = (1.3, 0.4, 0.8, -0.5);
        let two = affine_action_sampled(
            a1,
            b1,
            &affine_action_sampled(a2, b2, &x, rate, start).unwrap(),
            rate,
            start,
        )
        .unwrap();
        let one = affine_action_sampled(a1 * a2, a1 * b2 + b1, &x, rate, start).unwrap();
        assert!(two.iter().zip(&one).all(|(a, b)| (a - b).abs() < 1e-9));
        let g = affine_action(a1 * a2, a1 * b2 + b1, f);
        assert!(one
            .iter()
            .enumerate()
            .all(|(i, v)| (v - g(start + i as f64 / rate)).abs() < 1e-9));
    }

    #[test]
    fn params_json_keys() {
        let p: ExtremalParams =
            serde_json::from_str(r#"{"epsilon":0.1,"alpha":0.2,"beta":0.3,"kappa":2,"nu":1,"c":1}"#).unwrap();
        assert_eq!(p.beta, 0.3);
        let v = serde_json::to_value(p).unwrap();
        for key in ["epsilon", "alpha", "beta", "kappa", "nu", "c"] {
            assert!(v.get(key).is_some());
        }
    }
}
