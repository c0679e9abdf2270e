use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use tfr_core::cwt::{cwt_with_derivatives, Boundary, CwtParams, ScaleAxis};
use tfr_core::grid::ComplexGrid;
use tfr_core::scalogram::{
    cwt_log_derivatives, extract_holomorphic, log_derivatives, map_amplitude, map_holomorphic, map_t, map_tbeta,
    reassign_scalogram, structure_residual, LogDerivField, MapMethod, ScaleTimeMap, ScalogramMode, ScalogramOptions,
    EPS_MAG,
};
use tfr_core::signal::{gen_chirp, gen_click, gen_cosine, gen_gaussian_tone, gen_two_tone, Signal};
use tfr_core::stats::{energetic_mask, median, renyi_entropy, ENERGETIC_FRACTION};
use tfr_core::wavelet::{AnalyticWavelet, ExtremalParams};

const N: usize = 4096;
const RATE: f64 = 512.0;

fn bin(k: usize) -> f64 {
    2.0 * PI * RATE * k as f64 / N as f64
}

fn analyse(f: &Signal, params: ExtremalParams, axis: ScaleAxis, boundary: Boundary) -> (ComplexGrid, LogDerivField) {
    let w = AnalyticWavelet::new(params).unwrap();
    let p = CwtParams::new(axis).with_boundary(boundary);
    let (b, ld) = cwt_log_derivatives(f, &w, &p, EPS_MAG).unwrap();
    (b.w, ld)
}

fn cosine_setup(params: ExtremalParams) -> (f64, ComplexGrid, LogDerivField) {
    let nu0 = bin(64);
    let f = gen_cosine(nu0, 1.0, N, RATE).unwrap();
    let axis = ScaleAxis::spanning(0.2 / nu0, 5.0 / nu0, 16).unwrap();
    let (w, ld) = analyse(&f, params, axis, Boundary::Periodic);
    (nu0, w, ld)
}

fn energetic_points(w: &ComplexGrid, map: &ScaleTimeMap) -> Vec<(usize, usize)> {
    energetic_mask(w.values(), ENERGETIC_FRACTION)
        .indexed_iter()
        .filter(|(ix, on)| **on && map.mask[*ix])
        .map(|(ix, _)| ix)
        .collect()
}

#[test]
fn cosine_phase_derivative_is_the_tone() {
    let (nu0, _, ld) = cosine_setup(ExtremalParams::default().with_alpha(0.5).with_beta(0.2));
    let mut seen = 0;
    for (ix, on) in ld.mask.indexed_iter() {
        if *on {
            seen += 1;
            assert!((ld.dlog_dt[ix].im - nu0).abs() < 1e-10 * nu0);
        }
    }
    assert!(seen > N);
}

#[test]
fn cosine_maps_are_exact() {
    let (alpha, beta) = (0.5, 0.2);
    let params = ExtremalParams::default().with_alpha(alpha).with_beta(beta);
    let (nu0, _, ld) = cosine_setup(params);
    let t = map_t(&ld);
    let tb = map_tbeta(&ld, &params);
    let am = map_amplitude(&ld, &params);
    assert_eq!(t.method, MapMethod::PhaseT);
    for (ix, on) in t.mask.indexed_iter() {
        if !*on {
            continue;
        }
        let (a, time) = (ld.scales[ix.0], ld.times[ix.1]);
        assert!((t.inv_a_hat[ix] - nu0).abs() < 1e-6 * nu0);
        assert!((t.t_hat[ix] - (time - a * alpha - a * a * beta * nu0)).abs() < 1e-3 * a);
        assert!((tb.inv_a_hat[ix] - nu0).abs() < 1e-6 * nu0);
        assert!((tb.t_hat[ix] - (time - a * alpha)).abs() < 1e-3 * a);
        assert!((am.inv_a_hat[ix] - nu0).abs() < 1e-6 * nu0);
        assert!((am.t_hat[ix] - (time - a * alpha)).abs() < 1e-3 * a);
    }
}

#[test]
fn beta_zero_makes_t_and_tbeta_equal() {
    let f = gen_chirp(30.0, 120.0, N, RATE).unwrap();
    let params = ExtremalParams::default().with_alpha(0.3);
    let (_, ld) = analyse(&f, params, ScaleAxis::new(0.005, 16, 96).unwrap(), Boundary::ZeroPad);
    let a = map_t(&ld);
    let b = map_tbeta(&ld, &params);
    assert_eq!(a.mask, b.mask);
    for (ix, on) in a.mask.indexed_iter() {
        if *on {
            assert_eq!(a.t_hat[ix], b.t_hat[ix]);
            assert_eq!(a.inv_a_hat[ix], b.inv_a_hat[ix]);
        }
    }
}

#[test]
fn negative_instantaneous_frequency_is_masked() {
    let f = gen_two_tone(40.0, 44.0, N, RATE).unwrap();
    let (_, ld) = analyse(
        &f,
        ExtremalParams::default(),
        ScaleAxis::new(0.005, 16, 96).unwrap(),
        Boundary::ZeroPad,
    );
    let m = map_t(&ld);
    for (ix, on) in m.mask.indexed_iter() {
        if ld.mask[ix] && ld.dlog_dt[ix].im <= 0.0 {
            assert!(!*on);
        }
        if *on {
            assert!(m.inv_a_hat[ix] > 0.0);
        }
    }
}

#[test]
fn amplitude_map_follows_phase_map_on_a_smooth_signal() {
    let f = gen_gaussian_tone(60.0, 4.0, 0.5, N, RATE).unwrap();
    let params = ExtremalParams::default().with_beta(0.05);
    let (w, ld) = analyse(&f, params, ScaleAxis::new(0.004, 16, 100).unwrap(), Boundary::ZeroPad);
    let tb = map_tbeta(&ld, &params);
    let am = map_amplitude(&ld, &params);
    let pts = energetic_points(&w, &tb);
    let d = median(
        pts.iter()
            .map(|&ix| (tb.inv_a_hat[ix] - am.inv_a_hat[ix]).abs() * ld.scales[ix.0]),
    );
    assert!(d < 1e-2, "median a·|Δ(1/ã)| = {d}");
}

#[test]
fn structure_residual_cosine_is_exact() {
    let params = ExtremalParams::default().with_alpha(0.4).with_beta(0.1);
    let (_, w, ld) = cosine_setup(params);
    let r = structure_residual(&w, &ld, &params);
    for (ix, on) in ld.mask.indexed_iter() {
        if *on {
            assert!(r.residual[ix].norm() < 1e-6, "{:?}", r.residual[ix]);
        }
    }
    assert!((r.calibrated - r.constant).norm() < 1e-6);
}

#[test]
fn structure_residual_small_for_c1_and_reported_for_c2() {
    let f = gen_two_tone(40.0, 90.0, N, RATE).unwrap();
    let axis = ScaleAxis::new(0.004, 16, 100).unwrap();
    let c1 = ExtremalParams::default();
    let (w, ld) = analyse(&f, c1, axis, Boundary::ZeroPad);
    let r = structure_residual(&w, &ld, &c1);
    assert!(r.median_abs < 1e-2, "{}", r.median_abs);
    assert!(r.energetic_points > 100);
    let c2 = ExtremalParams::default().with_c(2.0);
    let (w, ld) = analyse(&f, c2, axis, Boundary::ZeroPad);
    let r = structure_residual(&w, &ld, &c2);
    assert!(r.median_abs.is_finite());
}

#[test]
fn cosine_holomorphic_part_is_affine() {
    let params = ExtremalParams::default().with_alpha(0.3).with_beta(0.1);
    let (nu0, w, _) = cosine_setup(params);
    let h = extract_holomorphic(&w, &params, EPS_MAG).unwrap();
    let en = energetic_mask(w.values(), ENERGETIC_FRACTION);
    let pts: Vec<(usize, usize)> = en.indexed_iter().filter(|(_, on)| **on).map(|(ix, _)| ix).collect();
    let xs: Vec<Complex64> = pts.iter().map(|&(r, c)| h.z(r, c)).collect();
    let ys: Vec<Complex64> = pts.iter().map(|&ix| h.f[ix]).collect();
    let (c0, c1) = complex_fit(&xs, &ys);
    assert!((c1 - Complex64::new(0.0, nu0)).norm() < 1e-3 * nu0, "slope {c1}");
    let resid = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - c0 - c1 * x).norm())
        .fold(0.0, f64::max);
    assert!(resid < 1e-3, "max residual {resid}");
    let m = map_holomorphic(&h);
    for &ix in &pts {
        if m.mask[ix] {
            assert!((m.inv_a_hat[ix] - nu0).abs() < 1e-3 * nu0);
        }
    }
}

/// Least squares y ≈ c0 + c1 x over complex numbers.
fn complex_fit(xs: &[Complex64], ys: &[Complex64]) -> (Complex64, Complex64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<Complex64>() / n;
    let my = ys.iter().sum::<Complex64>() / n;
    let sxy: Complex64 = xs.iter().zip(ys).map(|(x, y)| (x - mx).conj() * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).norm_sqr()).sum();
    let c1 = sxy / sxx;
    (my - c1 * mx, c1)
}

fn click_setup(params: ExtremalParams) -> (f64, ComplexGrid) {
    let t0 = 4.0;
    let f = gen_click(t0, N, RATE).unwrap();
    let axis = ScaleAxis::new(4.0 / RATE, 16, 96).unwrap();
    let w = AnalyticWavelet::new(params).unwrap();
    let b = cwt_with_derivatives(&f, &w, &CwtParams::new(axis)).unwrap();
    (t0, b.w)
}

#[test]
fn click_holomorphic_part_is_a_logarithm() {
    let params = ExtremalParams::default().with_alpha(0.4).with_beta(0.05);
    let (t0, w) = click_setup(params);
    let h = extract_holomorphic(&w, &params, EPS_MAG).unwrap();
    let en = energetic_mask(w.values(), ENERGETIC_FRACTION);
    let pts: Vec<(usize, usize)> = en.indexed_iter().filter(|(_, on)| **on).map(|(ix, _)| ix).collect();
    let xs: Vec<Complex64> = pts.iter().map(|&(r, c)| (h.z(r, c) - t0).ln()).collect();
    let ys: Vec<Complex64> = pts.iter().map(|&ix| h.f[ix]).collect();
    let (_, c1) = complex_fit(&xs, &ys);
    // closed form of the transform of an impulse: F = const − (κν + 1/2 − iα) log z
    let expect = -Complex64::new(params.kappa * params.nu + 0.5, -params.alpha);
    assert!((c1 - expect).norm() / expect.norm() < 5e-2, "slope {c1} vs {expect}");
}

#[test]
fn click_ridge_scale_ratio() {
    for kappa in [2.0, 8.0] {
        let params = ExtremalParams::default().with_kappa(kappa).with_beta(0.05);
        let (t0, w) = click_setup(params);
        let wav = AnalyticWavelet::new(params).unwrap();
        let p = CwtParams::new(ScaleAxis::from_values(w.second_axis()).unwrap());
        let b = cwt_with_derivatives(&gen_click(t0, N, RATE).unwrap(), &wav, &p).unwrap();
        let ld = log_derivatives(&b, EPS_MAG);
        let m = map_tbeta(&ld, &params);
        let q = kappa + 0.5;
        let mut checked = 0;
        for (ix, on) in m.mask.indexed_iter() {
            let (a, t) = (ld.scales[ix.0], ld.times[ix.1]);
            if !*on || (t - t0 - a * params.beta).abs() >= 0.5 / RATE {
                continue;
            }
            checked += 1;
            let ratio = m.a_hat(ix.0, ix.1) / a;
            assert!((ratio - kappa / q).abs() < 0.02 * kappa / q, "κ={kappa} a={a}: {ratio}");
            assert!((m.t_hat[ix] - t).abs() < 2.0 / RATE);
        }
        assert!(checked > 20);
    }
}

#[test]
fn cr_residual_and_map_agreement() {
    let f = gen_gaussian_tone(60.0, 4.0, 0.5, N, RATE).unwrap();
    let params = ExtremalParams::default().with_beta(0.05);
    let (w, ld) = analyse(&f, params, ScaleAxis::new(0.004, 16, 100).unwrap(), Boundary::ZeroPad);
    let h = extract_holomorphic(&w, &params, EPS_MAG).unwrap();
    let ratio = h.cr_ratio();
    let en = energetic_mask(w.values(), ENERGETIC_FRACTION);
    let cr = median(en.indexed_iter().filter(|(_, on)| **on).map(|(ix, _)| ratio[ix]));
    assert!(cr < 5e-2, "CR ratio {cr}");
    let hm = map_holomorphic(&h);
    let tb = map_tbeta(&ld, &params);
    let pts: Vec<_> = energetic_points(&w, &tb)
        .into_iter()
        .filter(|ix| hm.mask[*ix])
        .collect();
    let d = median(
        pts.iter()
            .map(|&ix| (hm.inv_a_hat[ix] - tb.inv_a_hat[ix]).abs() / tb.inv_a_hat[ix]),
    );
    assert!(d < 5e-2, "median relative deviation {d}");
}

fn energy(v: &Array2<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[test]
fn zero_scalogram_reassigns_to_zero() {
    let f = Signal::new(vec![0.0; N], RATE).unwrap();
    let params = ExtremalParams::default();
    let (w, ld) = analyse(&f, params, ScaleAxis::new(0.01, 8, 20).unwrap(), Boundary::ZeroPad);
    let wav = AnalyticWavelet::new(params).unwrap();
    let out = reassign_scalogram(&w, &map_t(&ld), &wav, &ScalogramOptions::default(), None).unwrap();
    assert!(out.values().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn cosine_reassignment_concentrates() {
    let params = ExtremalParams::default();
    let (nu0, w, ld) = cosine_setup(params);
    let wav = AnalyticWavelet::new(params).unwrap();
    let scales = w.second_axis();
    // the two bins nearest 1/ν0 in log scale
    let target = -(nu0.ln());
    let mut order: Vec<usize> = (0..scales.len()).collect();
    order.sort_by(|&x, &y| {
        (scales[x].ln() - target)
            .abs()
            .total_cmp(&(scales[y].ln() - target).abs())
    });
    let two = |v: &Array2<Complex64>| -> f64 {
        order[..2]
            .iter()
            .map(|&r| v.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / energy(v)
    };
    let raw = two(w.values());
    assert!(raw < 0.9, "raw scalogram already concentrated: {raw}");
    for mode in [
        ScalogramMode::GridSum,
        ScalogramMode::GridSumUnweighted,
        ScalogramMode::FullKernel,
    ] {
        let opts = ScalogramOptions {
            mode,
            ..Default::default()
        };
        let out = reassign_scalogram(&w, &map_tbeta(&ld, &params), &wav, &opts, None).unwrap();
        let got = two(out.values());
        assert!(got >= 0.9, "{mode:?}: {got}");
    }
}

#[test]
fn click_time_map_matches_closed_form() {
    // impulse at t0, α = β = 0: t̃ − t0 = x(1 − (q/γ)/(1 + (x/aγ)²)), q = κν + 1/2
    let params = ExtremalParams::default();
    let (t0, w) = click_setup(params);
    let wav = AnalyticWavelet::new(params).unwrap();
    let b = cwt_with_derivatives(
        &gen_click(t0, N, RATE).unwrap(),
        &wav,
        &CwtParams::new(ScaleAxis::from_values(w.second_axis()).unwrap()),
    )
    .unwrap();
    let ld = log_derivatives(&b, EPS_MAG);
    let m = map_t(&ld);
    let (g, q) = (params.gamma(), params.kappa * params.nu + 0.5);
    let pts = energetic_points(&w, &m);
    let errs: Vec<f64> = pts
        .iter()
        .map(|&(r, c)| {
            let (a, x) = (ld.scales[r], ld.times[c] - t0);
            let u = x / (a * g);
            let expect = t0 + x * (1.0 - (q / g) / (1.0 + u * u));
            (m.t_hat[[r, c]] - expect).abs() * RATE
        })
        .collect();
    let med = median(errs.iter().copied());
    assert!(med < 0.5, "median error {med} bins");
    // energy mapped near the click by the computed map vs the closed form
    let c0 = (t0 * RATE).round();
    let (mut near, mut near_exact, mut total) = (0.0, 0.0, 0.0);
    for (ix, on) in m.mask.indexed_iter() {
        if !*on {
            continue;
        }
        let e = w.values()[ix].norm_sqr();
        let (a, x) = (ld.scales[ix.0], ld.times[ix.1] - t0);
        let u = x / (a * g);
        let exact = t0 + x * (1.0 - (q / g) / (1.0 + u * u));
        total += e;
        if ((m.t_hat[ix] * RATE).round() - c0).abs() <= 2.0 {
            near += e;
        }
        if ((exact * RATE).round() - c0).abs() <= 2.0 {
            near_exact += e;
        }
    }
    assert!(
        (near - near_exact).abs() / total < 0.02,
        "{} vs {}",
        near / total,
        near_exact / total
    );
}

#[test]
fn renyi_entropy_drops_for_bundled_cases() {
    let params = ExtremalParams::default();
    let wav = AnalyticWavelet::new(params).unwrap();
    let axis = ScaleAxis::new(0.004, 16, 100).unwrap();
    let cases = [
        gen_cosine(bin(64), 1.0, N, RATE).unwrap(),
        gen_chirp(30.0, 150.0, N, RATE).unwrap(),
        gen_two_tone(40.0, 90.0, N, RATE).unwrap(),
        gen_gaussian_tone(60.0, 4.0, 0.5, N, RATE).unwrap(),
        gen_click(4.0, N, RATE).unwrap(),
    ];
    for f in &cases {
        let (w, ld) = analyse(f, params, axis, Boundary::ZeroPad);
        let out = reassign_scalogram(&w, &map_tbeta(&ld, &params), &wav, &ScalogramOptions::default(), None).unwrap();
        let before = renyi_entropy(w.values().iter(), 3.0);
        let after = renyi_entropy(out.values().iter(), 3.0);
        assert!(after < before, "{before} -> {after}");
    }
}

#[test]
fn reassignment_is_deterministic_across_policies() {
    use tfr_core::parallel::Execution;
    let f = gen_chirp(30.0, 150.0, N, RATE).unwrap();
    let params = ExtremalParams::default();
    let wav = AnalyticWavelet::new(params).unwrap();
    let (w, ld) = analyse(&f, params, ScaleAxis::new(0.004, 16, 64).unwrap(), Boundary::ZeroPad);
    let m = map_tbeta(&ld, &params);
    let run = |execution| {
        let opts = ScalogramOptions {
            mode: ScalogramMode::FullKernel,
            execution,
            ..Default::default()
        };
        reassign_scalogram(&w, &m, &wav, &opts, None).unwrap()
    };
    assert_eq!(run(Execution::Sequential).values(), run(Execution::Parallel).values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn maps_ignore_positive_rescaling(scale in 0.01f64..100.0, freq in 40.0f64..120.0) {
        let f = gen_gaussian_tone(freq, 4.0, 0.5, N, RATE).unwrap();
        let g = f.scaled(scale).unwrap();
        let params = ExtremalParams::default().with_beta(0.05);
        let axis = ScaleAxis::new(0.004, 8, 48).unwrap();
        let (_, lf) = analyse(&f, params, axis, Boundary::ZeroPad);
        let (_, lg) = analyse(&g, params, axis, Boundary::ZeroPad);
        let (a, b) = (map_amplitude(&lf, &params), map_amplitude(&lg, &params));
        prop_assert_eq!(&a.mask, &b.mask);
        for (ix, on) in a.mask.indexed_iter() {
            if *on {
                prop_assert!((a.inv_a_hat[ix] - b.inv_a_hat[ix]).abs() <= 1e-8 * a.inv_a_hat[ix]);
                prop_assert!((a.t_hat[ix] - b.t_hat[ix]).abs() <= 1e-8 * (1.0 + a.t_hat[ix].abs()));
            }
        }
    }

    #[test]
    fn masks_are_monotone_in_threshold(lo in 1e-8f64..1e-3, factor in 1.0f64..100.0) {
        let f = gen_two_tone(40.0, 90.0, N, RATE).unwrap();
        let w = AnalyticWavelet::new(ExtremalParams::default()).unwrap();
        let b = cwt_with_derivatives(&f, &w, &CwtParams::new(ScaleAxis::new(0.004, 8, 48).unwrap())).unwrap();
        let loose = log_derivatives(&b, lo);
        let tight = log_derivatives(&b, lo * factor);
        for (ix, on) in tight.mask.indexed_iter() {
            if *on {
                prop_assert!(loose.mask[ix]);
            }
        }
    }
}
