use nvcavity::dressed::{
    eigen_scan, minimum_splitting, quadrature, quadrature_map, quadrature_trace, steady_alpha, DressedParams,
    ScanVariable,
};
use nvcavity::grid::Axis;
use nvcavity::par::Exec;
use nvcavity::sensitivity::{
    analyze_quadrature, default_half_width, dressed_sensitivity, eta_multi, eta_single, max_slope,
    optimal_cavity_detuning, sensitivity_vs_coupling, NoiseModel, PeakModel, SlopeGrid,
};
use nvcavity::units::{khz, mhz, GAMMA_E};
use proptest::prelude::*;

proptest! {
    #[test]
    fn aggregation_never_loses_to_the_best_peak(etas in prop::collection::vec(1e-15..1e-9f64, 1..12)) {
        let best = etas.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(eta_multi(&etas).unwrap() <= best);
    }

    #[test]
    fn slopes_scale_inversely(slopes in prop::collection::vec(1e-6..1e3f64, 1..9), c in 0.1..10.0f64) {
        let noise = NoiseModel::default();
        let etas: Vec<f64> = slopes.iter().map(|&s| eta_single(s, &noise, GAMMA_E).unwrap()).collect();
        let scaled: Vec<f64> = slopes.iter().map(|&s| eta_single(s * c, &noise, GAMMA_E).unwrap()).collect();
        for (a, b) in etas.iter().zip(&scaled) {
            prop_assert!((a / b - c).abs() <= 1e-12 * c);
        }
        let ratio = eta_multi(&etas).unwrap() / eta_multi(&scaled).unwrap();
        prop_assert!((ratio - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn noise_scales_linearly(slope in 1e-6..1e3f64, c in 0.1..10.0f64) {
        let noise = NoiseModel::default();
        let mut louder = noise;
        louder.voltage_noise_density *= c;
        let a = eta_single(slope, &noise, GAMMA_E).unwrap();
        let b = eta_single(slope, &louder, GAMMA_E).unwrap();
        prop_assert!((b / a - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn slope_ignores_offsets(
        ys in prop::collection::vec(-1.0..1.0f64, 8..40),
        offset in -100.0..100.0f64,
    ) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.25 - 2.0).collect();
        let shifted: Vec<f64> = ys.iter().map(|y| y + offset).collect();
        let a = max_slope(&xs, &ys, 5).unwrap();
        let b = max_slope(&xs, &shifted, 5).unwrap();
        prop_assert!((a.slope - b.slope).abs() <= 1e-9 * a.slope.max(1.0));
    }

    #[test]
    fn degenerate_modes_collapse(m in 1usize..12, g in 0.01..3.0f64, w in -5.0..5.0f64, ds in -5.0..5.0f64, dc in -5.0..5.0f64) {
        let mut many = DressedParams::single_mode(w, g, 0.7, 1.3).unwrap();
        many.modes = vec![many.modes[0]; m];
        let one = DressedParams::single_mode(w, g * (m as f64).sqrt(), 0.7, 1.3).unwrap();
        let a = steady_alpha(&many.at(ds, dc)).unwrap();
        let b = steady_alpha(&one.at(ds, dc)).unwrap();
        prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0));
    }
}

#[test]
fn bare_cavity_lorentzian_width() {
    let gamma0 = mhz(1.0);
    let p = DressedParams::nine_peak(mhz(6.5), mhz(2.16), 0.0, khz(250.0), gamma0).unwrap();
    // |α|² against Δ_c; width of the region above half maximum
    let n = 4001;
    let xs: Vec<f64> = (0..n)
        .map(|i| -3.0 * gamma0 + 6.0 * gamma0 * i as f64 / (n - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| steady_alpha(&p.at(0.0, x)).unwrap().norm_sqr())
        .collect();
    let peak = ys.iter().copied().fold(0.0f64, f64::max);
    let above: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .filter(|(_, y)| **y >= peak / 2.0)
        .map(|(x, _)| *x)
        .collect();
    let hwhm = (above[above.len() - 1] - above[0]) / 2.0;
    let step = xs[1] - xs[0];
    assert!((hwhm / (gamma0 / 2.0) - 1.0).abs() < 0.02, "{hwhm}");
    assert!((hwhm - gamma0 / 2.0).abs() <= step);
}

#[test]
fn zero_coupling_map_is_the_bare_cavity() {
    let mut p = DressedParams::experimental_default();
    p.g_eff = 0.0;
    let s = Axis::new(mhz(-10.0), mhz(10.0), 21).unwrap();
    let c = Axis::new(mhz(-2.0), mhz(2.0), 11).unwrap();
    let map = quadrature_map(&p, &s, &c, Exec::Parallel).unwrap();
    for i in 0..21 {
        for j in 0..11 {
            let dc = c.value(j);
            let bare = -p.gamma0.sqrt() / num_complex::Complex64::new(p.gamma0 / 2.0, dc);
            assert!((map.values[[i, j]].unwrap() - quadrature(bare)).abs() < 1e-12);
        }
    }
}

#[test]
fn features_sit_at_negative_peak_frequencies() {
    let p = DressedParams::experimental_default();
    let step = mhz(0.01);
    let xs: Vec<f64> = (-1000..=1000).map(|i| i as f64 * step).collect();
    let q = quadrature_trace(&p, &xs).unwrap();
    let bare = quadrature(steady_alpha(&p.at(mhz(500.0), 0.0)).unwrap());
    // at Δ_c = 0 each feature is a dip or bump away from the bare level
    let dev: Vec<f64> = q.iter().map(|v| (v - bare).abs()).collect();
    let extrema: Vec<f64> = (1..dev.len() - 1)
        .filter(|&i| dev[i] > dev[i - 1] && dev[i] >= dev[i + 1])
        .map(|i| xs[i])
        .collect();
    assert_eq!(extrema.len(), 9, "{extrema:?}");
    let mut expected: Vec<f64> = p.modes.iter().map(|m| -m.omega).collect();
    expected.sort_by(f64::total_cmp);
    for (x, e) in extrema.iter().zip(&expected) {
        assert!((x - e).abs() <= step, "{x} vs {e}");
    }
}

#[test]
fn experimental_window_holds_eight_features() {
    let p = DressedParams::experimental_default();
    let (lo, hi) = (mhz(-7.5), mhz(10.0));
    let inside = p.modes.iter().filter(|m| (lo..=hi).contains(&-m.omega)).count();
    assert_eq!(inside, 8);
}

#[test]
fn dispersive_slope_matches_dense_differentiation() {
    let mut p = DressedParams::single_mode(0.0, khz(20.0), khz(250.0), mhz(1.0)).unwrap();
    p.delta_c = p.gamma0 / 2.0;
    let step = SlopeGrid::default().step_over_linewidth * p.gamma / 2.0;
    let xs: Vec<f64> = (-400..=400).map(|i| i as f64 * step).collect();
    let q = quadrature_trace(&p, &xs).unwrap();
    let fit = max_slope(&xs, &q, 5).unwrap();
    // oracle: central differences on a 10x finer grid
    let fine = step / 10.0;
    let fx: Vec<f64> = (-4000..=4000).map(|i| i as f64 * fine).collect();
    let fq = quadrature_trace(&p, &fx).unwrap();
    let (mut best, mut at) = (0.0f64, 0.0);
    for i in 1..fx.len() - 1 {
        let d = ((fq[i + 1] - fq[i - 1]) / (2.0 * fine)).abs();
        if d > best {
            best = d;
            at = fx[i];
        }
    }
    assert!((fit.slope / best - 1.0).abs() < 0.005, "{} vs {best}", fit.slope);
    assert!((fit.center - at).abs() <= step);
    // purely dispersive at Δ_c = γ₀/2: steepest at the zero crossing
    assert!(fit.center.abs() <= step);
}

#[test]
fn far_detuned_gap_approaches_the_detuning() {
    let g = mhz(0.05);
    let p = DressedParams::single_mode(100.0 * g, g, khz(100.0), khz(100.0)).unwrap();
    // the cavity approaches the spin but never closer than 100 g
    let axis = Axis::new(-20.0 * g, 0.0, 201).unwrap();
    let scan = eigen_scan(&p, ScanVariable::DeltaC, &axis, Exec::Sequential).unwrap();
    let (gap, at) = minimum_splitting(&scan, &axis).unwrap();
    assert_eq!(at, 0.0);
    assert!((gap / (100.0 * g) - 1.0).abs() < 0.01, "{gap}");
}

#[test]
fn splitting_grows_with_coupling() {
    let axis = Axis::new(mhz(-1.0), mhz(1.0), 401).unwrap();
    let mut last = 0.0;
    for g in [0.1, 0.2, 0.3, 0.5, 0.8] {
        let p = DressedParams::single_mode(0.0, mhz(g), khz(300.0), khz(300.0)).unwrap();
        let scan = eigen_scan(&p, ScanVariable::DeltaC, &axis, Exec::Parallel).unwrap();
        let (gap, at) = minimum_splitting(&scan, &axis).unwrap();
        assert!(gap > last);
        assert!((gap / (2.0 * mhz(g)) - 1.0).abs() < 1e-6, "{gap} at {at}");
        last = gap;
    }
}

#[test]
fn nine_equal_synthetic_features() {
    // compact bumps aligned to the grid, one per predicted centre
    let modes = nvcavity::dressed::peak_modes(10.0, 2.0).unwrap();
    let step = 0.01;
    let xs: Vec<f64> = (-1400..=1400).map(|i| i as f64 * step).collect();
    let bump = |x: f64| {
        if x.abs() < 0.5 {
            (std::f64::consts::PI * x).sin().powi(3)
        } else {
            0.0
        }
    };
    let q: Vec<f64> = xs
        .iter()
        .map(|&x| modes.iter().map(|m| bump(x + m.omega)).sum())
        .collect();
    let r = analyze_quadrature(
        &xs,
        &q,
        &modes,
        default_half_width(10.0, 2.0),
        5,
        &NoiseModel::default(),
        GAMMA_E,
    )
    .unwrap();
    assert_eq!(r.peaks.len(), 9);
    assert!((r.enhancement - 3.0).abs() < 1e-9, "{}", r.enhancement);
}

#[test]
fn coupling_sweep_trends() {
    let base = DressedParams::experimental_default();
    let hw = default_half_width(mhz(6.5), mhz(2.16));
    let grid = SlopeGrid::default();
    let noise = NoiseModel::default();
    let gs: Vec<f64> = [0.01, 0.02, 0.04, 0.08, 0.12].iter().map(|&g| mhz(g)).collect();
    let slow = sensitivity_vs_coupling(
        &base,
        &gs,
        khz(250.0),
        PeakModel::Independent,
        &grid,
        hw,
        &noise,
        GAMMA_E,
        Exec::Parallel,
    )
    .unwrap();
    let fast = sensitivity_vs_coupling(
        &base,
        &gs,
        khz(167.0),
        PeakModel::Independent,
        &grid,
        hw,
        &noise,
        GAMMA_E,
        Exec::Parallel,
    )
    .unwrap();
    let slow: Vec<_> = slow.into_iter().map(Option::unwrap).collect();
    let fast: Vec<_> = fast.into_iter().map(Option::unwrap).collect();
    for w in slow.windows(2) {
        assert!(w[1].eta_single_best < w[0].eta_single_best);
    }
    for (a, b) in slow.iter().zip(&fast) {
        assert!(b.eta_single_best < a.eta_single_best);
        assert!((a.eta_multi / a.eta_single_best - 1.0 / 3.0).abs() < 1e-9);
    }
}

#[test]
fn optimal_detuning_beats_resonance() {
    let p = DressedParams::experimental_default();
    let dc = optimal_cavity_detuning(&p).unwrap();
    let hw = default_half_width(mhz(6.5), mhz(2.16));
    let grid = SlopeGrid::default();
    let noise = NoiseModel::default();
    let at_opt = dressed_sensitivity(&p.at(0.0, dc), PeakModel::Independent, &grid, hw, &noise, GAMMA_E).unwrap();
    let at_zero = dressed_sensitivity(&p.at(0.0, 0.0), PeakModel::Independent, &grid, hw, &noise, GAMMA_E).unwrap();
    assert!(at_opt.eta_best_single <= at_zero.eta_best_single);
}
