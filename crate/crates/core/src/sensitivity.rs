//! Magnetic sensitivity from quadrature slopes.
//!
//! Each resolved peak j gives η_j = √3 σ_j √τ / (γ_e S_j), where S_j is the
//! largest slope of the quadrature signal against spin detuning and σ_j √τ
//! is the flat noise density of the readout. Independent peaks combine as
//! η = 1/√(Σ η_j⁻²).

use serde::{Deserialize, Serialize};

use crate::dressed::{quadrature_slope, quadrature_trace, DressedMode, DressedParams};
use crate::error::{Error, Result};
use crate::par::{map_range, Exec};
use crate::units;

/// Default width of the sliding least-squares window, in grid points.
pub const DEFAULT_WINDOW: usize = 5;

/// Relative spacing deviation tolerated before a grid counts as non-uniform.
pub const UNIFORM_GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Flat readout noise, signal units per √Hz.
    pub voltage_noise_density: f64,
    /// Integration time τ in seconds.
    pub integration_time: f64,
    /// Signal units per unit of model quadrature.
    pub calibration: f64,
    /// Apply the √3 factor for a field projected equally on all NV axes.
    pub projection: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            voltage_noise_density: 1.0,
            integration_time: 1.0,
            calibration: 1.0,
            projection: true,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("voltage_noise_density", self.voltage_noise_density),
            ("integration_time", self.integration_time),
            ("calibration", self.calibration),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(field, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Standard deviation of a time trace averaged over τ.
    pub fn sigma(&self) -> f64 {
        self.voltage_noise_density / self.integration_time.sqrt()
    }

    fn projection_factor(&self) -> f64 {
        if self.projection {
            3f64.sqrt()
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    /// Largest absolute fitted slope.
    pub slope: f64,
    /// Signed value of that slope.
    pub signed_slope: f64,
    /// Mean abscissa of the winning window.
    pub center: f64,
    /// Index of the first point of the winning window.
    pub start: usize,
}

fn check_uniform(x: &[f64]) -> Result<f64> {
    let h = x[1] - x[0];
    if !(h > 0.0) {
        return Err(Error::NonUniformGrid { index: 0, deviation: h });
    }
    for (i, w) in x.windows(2).enumerate().skip(1) {
        let dev = (w[1] - w[0] - h).abs();
        if dev > UNIFORM_GRID_TOL * h {
            return Err(Error::NonUniformGrid {
                index: i,
                deviation: dev / h,
            });
        }
    }
    Ok(h)
}

/// Slides a least-squares line of `window` points along the trace and keeps
/// the steepest one. Ties go to the window closest to zero, then to the
/// lowest index.
pub fn max_slope(x: &[f64], y: &[f64], window: usize) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if window < 3 {
        return Err(Error::param("window", format!("must be >= 3, got {window}")));
    }
    if x.len() < window {
        return Err(Error::TooFewPoints {
            needed: window,
            got: x.len(),
        });
    }
    check_uniform(x)?;
    let mut best: Option<SlopeFit> = None;
    for start in 0..=(x.len() - window) {
        let xs = &x[start..start + window];
        let ys = &y[start..start + window];
        let n = window as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (xi, yi) in xs.iter().zip(ys) {
            sxy += (xi - xm) * (yi - ym);
            sxx += (xi - xm) * (xi - xm);
        }
        let s = sxy / sxx;
        let fit = SlopeFit {
            slope: s.abs(),
            signed_slope: s,
            center: xm,
            start,
        };
        best = match best {
            None => Some(fit),
            Some(b) => {
                let tie = (fit.slope - b.slope).abs() <= 1e-12 * b.slope.max(fit.slope);
                if (!tie && fit.slope > b.slope) || (tie && fit.center.abs() < b.center.abs()) {
                    Some(fit)
                } else {
                    Some(b)
                }
            }
        };
    }
    Ok(best.expect("at least one window"))
}

/// η_j for a slope S_j given in signal units per rad/s. Returns +∞ for a
/// vanishing slope.
pub fn eta_single(slope: f64, noise: &NoiseModel, gamma_e: f64) -> Result<f64> {
    noise.validate()?;
    if !(slope >= 0.0) || !slope.is_finite() {
        return Err(Error::param("slope", format!("must be finite and >= 0, got {slope}")));
    }
    if slope == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(noise.projection_factor() * noise.voltage_noise_density / (gamma_e * slope))
}

/// 1/√(Σ η_j⁻²) over the finite, positive entries.
pub fn eta_multi(etas: &[f64]) -> Result<f64> {
    let valid: Vec<f64> = etas.iter().copied().filter(|e| e.is_finite() && *e > 0.0).collect();
    let best = valid.iter().copied().fold(f64::INFINITY, f64::min);
    if valid.is_empty() {
        return Err(Error::NoValidPeaks);
    }
    // scaled by the best entry so a single peak is returned unchanged
    let s: f64 = valid.iter().map(|e| (best / e).powi(2)).sum();
    Ok(best / s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub k: i8,
    pub l: i8,
    /// Location of the steepest window, rad/µs.
    pub center: f64,
    /// Signal units per rad/µs.
    pub slope: f64,
    /// T/√Hz; infinite for a flat peak.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub peaks: Vec<PeakEstimate>,
    pub eta_multi: f64,
    pub eta_best_single: f64,
    pub enhancement: f64,
    pub gamma_e: f64,
    pub jn_floor: f64,
    pub warnings: Vec<String>,
}

impl SensitivityReport {
    pub fn from_peaks(peaks: Vec<PeakEstimate>, gamma_e: f64, warnings: Vec<String>) -> Result<Self> {
        let etas: Vec<f64> = peaks.iter().map(|p| p.eta).collect();
        let eta_multi = eta_multi(&etas)?;
        let eta_best_single = etas.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            peaks,
            eta_multi,
            eta_best_single,
            enhancement: eta_best_single / eta_multi,
            gamma_e,
            jn_floor: units::JOHNSON_NYQUIST_FLOOR,
            warnings,
        })
    }

    pub fn jn_floor_ratio(&self) -> f64 {
        self.eta_multi / self.jn_floor
    }
}

fn peak_estimate(
    mode: &DressedMode,
    center: f64,
    slope_per_us: f64,
    noise: &NoiseModel,
    gamma_e: f64,
) -> Result<PeakEstimate> {
    let per_s = noise.calibration * slope_per_us / units::per_us_to_per_s(1.0);
    Ok(PeakEstimate {
        k: mode.k,
        l: mode.l,
        center,
        slope: noise.calibration * slope_per_us,
        eta: eta_single(per_s, noise, gamma_e)?,
    })
}

/// Default segment half-width around each predicted peak, min(Ω, Δ)/2. With
/// no hyperfine splitting the triplets collapse and Ω/2 is used.
pub fn default_half_width(rabi: f64, hyperfine: f64) -> f64 {
    if hyperfine > 0.0 {
        rabi.min(hyperfine) / 2.0
    } else {
        rabi / 2.0
    }
}

/// Splits a quadrature trace over Δ_s into segments around the predicted
/// feature centres −ω_j and fits the steepest slope in each.
///
/// Segments are `half_width` wide on each side and clipped at the midpoint
/// to a neighbouring centre when they would overlap. Peaks outside the trace
/// or with fewer than `window` points in their segment are skipped; modes
/// sharing a centre are analysed once.
pub fn analyze_quadrature(
    delta_s: &[f64],
    q: &[f64],
    modes: &[DressedMode],
    half_width: f64,
    window: usize,
    noise: &NoiseModel,
    gamma_e: f64,
) -> Result<SensitivityReport> {
    noise.validate()?;
    if delta_s.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: delta_s.len(),
            got: q.len(),
        });
    }
    if delta_s.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: window.max(2),
            got: delta_s.len(),
        });
    }
    check_uniform(delta_s)?;
    if !(half_width > 0.0) {
        return Err(Error::param("half_width", "must be > 0"));
    }
    let (lo, hi) = (delta_s[0], delta_s[delta_s.len() - 1]);
    let mut centres: Vec<(f64, &DressedMode)> = Vec::new();
    for m in modes {
        let c = -m.omega;
        if !centres.iter().any(|(x, _)| (x - c).abs() <= 1e-12 * c.abs().max(1.0)) {
            centres.push((c, m));
        }
    }
    centres.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut warnings = Vec::new();
    let mut peaks = Vec::new();
    for (i, &(c, mode)) in centres.iter().enumerate() {
        if c < lo || c > hi {
            continue;
        }
        let mut left = c - half_width;
        let mut right = c + half_width;
        if i > 0 {
            let mid = 0.5 * (centres[i - 1].0 + c);
            if mid > left {
                left = mid;
                warnings.push(format!("segment of peak ({}, {}) clipped on the left", mode.k, mode.l));
            }
        }
        if i + 1 < centres.len() {
            let mid = 0.5 * (c + centres[i + 1].0);
            if mid < right {
                right = mid;
                warnings.push(format!("segment of peak ({}, {}) clipped on the right", mode.k, mode.l));
            }
        }
        let idx: Vec<usize> = (0..delta_s.len())
            .filter(|&j| delta_s[j] >= left && delta_s[j] <= right)
            .collect();
        if idx.len() < window {
            warnings.push(format!(
                "peak ({}, {}) skipped: {} points in segment",
                mode.k,
                mode.l,
                idx.len()
            ));
            continue;
        }
        let (a, b) = (idx[0], idx[idx.len() - 1] + 1);
        let fit = max_slope(&delta_s[a..b], &q[a..b], window)?;
        peaks.push(peak_estimate(mode, fit.center, fit.slope, noise, gamma_e)?);
    }
    SensitivityReport::from_peaks(peaks, gamma_e, warnings)
}

/// How the per-peak slopes are obtained from the dressed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakModel {
    /// Each mode is evaluated with the others removed, so every peak sees
    /// the same bare-cavity background.
    #[default]
    Independent,
    /// All modes act together on one Δ_s trace.
    Joint,
}

/// Sampling used to resolve one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeGrid {
    /// Grid step in units of Γ/2.
    pub step_over_linewidth: f64,
    /// Segment half-width in units of Γ/2 for the independent model.
    pub span_over_linewidth: f64,
    pub window: usize,
}

impl Default for SlopeGrid {
    fn default() -> Self {
        Self {
            step_over_linewidth: 0.02,
            span_over_linewidth: 8.0,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Per-peak sensitivities of the dressed model at its current Δ_c.
///
/// In the joint model the trace covers all feature centres with a margin
/// of `span` on either side and is segmented with `half_width`.
pub fn dressed_sensitivity(
    params: &DressedParams,
    model: PeakModel,
    grid: &SlopeGrid,
    half_width: f64,
    noise: &NoiseModel,
    gamma_e: f64,
) -> Result<SensitivityReport> {
    params.validate()?;
    let step = grid.step_over_linewidth * params.gamma / 2.0;
    let span = grid.span_over_linewidth * params.gamma / 2.0;
    let half_points = (span / step).round() as i64;
    match model {
        PeakModel::Independent => {
            let offsets: Vec<f64> = (-half_points..=half_points).map(|i| i as f64 * step).collect();
            let mut peaks = Vec::with_capacity(params.modes.len());
            for mode in &params.modes {
                // single-mode response as a function of the mode's own detuning
                let mut single = params.clone();
                single.modes = vec![DressedMode { omega: 0.0, ..*mode }];
                let q = quadrature_trace(&single, &offsets)?;
                let fit = max_slope(&offsets, &q, grid.window)?;
                peaks.push(peak_estimate(mode, fit.center - mode.omega, fit.slope, noise, gamma_e)?);
            }
            SensitivityReport::from_peaks(peaks, gamma_e, Vec::new())
        }
        PeakModel::Joint => {
            let lo = params.modes.iter().map(|m| -m.omega).fold(f64::INFINITY, f64::min) - span;
            let hi = params.modes.iter().map(|m| -m.omega).fold(f64::NEG_INFINITY, f64::max) + span;
            let n = ((hi - lo) / step).ceil() as usize + 1;
            let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
            let q = quadrature_trace(params, &xs)?;
            analyze_quadrature(&xs, &q, &params.modes, half_width, grid.window, noise, gamma_e)
        }
    }
}

/// Largest |d⟨Q⟩/dΔ_s| of a single mode of `params` over its feature, from
/// the analytic derivative on a dense grid.
fn single_mode_peak_slope(params: &DressedParams, delta_c: f64) -> Result<f64> {
    let mut p = params.clone();
    p.modes = vec![DressedMode {
        k: 0,
        l: 0,
        omega: 0.0,
        weight: params.modes.iter().map(|m| m.weight).fold(0.0, f64::max),
    }];
    p.delta_c = delta_c;
    let half = p.gamma / 2.0;
    let mut best = 0.0f64;
    for i in -400..=400 {
        p.delta_s = i as f64 * 0.02 * half;
        best = best.max(quadrature_slope(&p)?.abs());
    }
    Ok(best)
}

/// Cavity detuning in [−2γ₀, 2γ₀] maximizing the single-feature slope.
/// Coarse scan followed by golden-section refinement; ties go to the smaller
/// |Δ_c|, then to positive Δ_c.
pub fn optimal_cavity_detuning(params: &DressedParams) -> Result<f64> {
    params.validate()?;
    let limit = 2.0 * params.gamma0;
    let n = 81;
    let xs: Vec<f64> = (0..n)
        .map(|i| -limit + 2.0 * limit * i as f64 / (n - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| single_mode_peak_slope(params, x))
        .collect::<Result<_>>()?;
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best_i = 0;
    for i in 0..n {
        let better = |a: f64, b: f64| a.abs() < b.abs() || (a.abs() == b.abs() && a > b);
        if (vals[i] - top).abs() <= 1e-9 * top && (vals[best_i] - top).abs() > 1e-9 * top
            || ((vals[i] - top).abs() <= 1e-9 * top && better(xs[i], xs[best_i]))
        {
            best_i = i;
        }
    }
    let h = xs[1] - xs[0];
    let (mut a, mut b) = (xs[best_i] - h, xs[best_i] + h);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| single_mode_peak_slope(params, x).map(|v| -v);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    if f(x)? <= -top {
        Ok(x)
    } else {
        Ok(xs[best_i])
    }
}

/// Scales the readout noise so that the best single peak of `report` reads
/// `target_eta`. Returns the adjusted noise model.
pub fn calibrate_noise(report: &SensitivityReport, noise: &NoiseModel, target_eta: f64) -> Result<NoiseModel> {
    if !(target_eta > 0.0) || !target_eta.is_finite() {
        return Err(Error::param("target_eta", "must be finite and > 0"));
    }
    if !report.eta_best_single.is_finite() {
        return Err(Error::NoValidPeaks);
    }
    let mut out = *noise;
    out.voltage_noise_density *= target_eta / report.eta_best_single;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingPoint {
    pub g_eff: f64,
    pub delta_c: f64,
    pub eta_single_best: f64,
    pub eta_multi: f64,
}

/// Sensitivity against coupling at fixed Γ. Each point uses its own optimal
/// cavity detuning; failed points are `None`.
pub fn sensitivity_vs_coupling(
    base: &DressedParams,
    couplings: &[f64],
    gamma: f64,
    model: PeakModel,
    grid: &SlopeGrid,
    half_width: f64,
    noise: &NoiseModel,
    gamma_e: f64,
    exec: Exec,
) -> Result<Vec<Option<CouplingPoint>>> {
    if couplings.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if couplings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("couplings", "must be strictly ascending"));
    }
    noise.validate()?;
    Ok(map_range(exec, couplings.len(), |i| {
        let mut p = base.clone();
        p.g_eff = couplings[i];
        p.gamma = gamma;
        let mut point = || -> Result<CouplingPoint> {
            p.delta_c = optimal_cavity_detuning(&p)?;
            let report = dressed_sensitivity(&p, model, grid, half_width, noise, gamma_e)?;
            Ok(CouplingPoint {
                g_eff: p.g_eff,
                delta_c: p.delta_c,
                eta_single_best: report.eta_best_single,
                eta_multi: report.eta_multi,
            })
        };
        point().ok()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::GAMMA_E;
    use std::f64::consts::PI;

    #[test]
    fn line_slope_is_exact() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
        for w in [3, 5, 7] {
            let fit = max_slope(&x, &y, w).unwrap();
            assert!((fit.slope - 2.5).abs() < 1e-12);
            assert!(fit.signed_slope < 0.0);
        }
    }

    #[test]
    fn sine_slope_at_origin() {
        let n = (2.0 * PI / 0.01).round() as usize;
        let x: Vec<f64> = (0..=n).map(|i| -PI + i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let fit = max_slope(&x, &y, 5).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-4);
        assert!(fit.center.abs() < 0.01);
    }

    #[test]
    fn slope_errors() {
        let x = [0.0, 1.0, 2.5, 3.0, 4.0];
        assert!(matches!(max_slope(&x, &x, 3), Err(Error::NonUniformGrid { .. })));
        let x = [0.0, 1.0, 2.0];
        assert!(matches!(max_slope(&x, &x, 5), Err(Error::TooFewPoints { .. })));
        assert!(max_slope(&x, &x, 2).is_err());
    }

    #[test]
    fn eta_arithmetic() {
        let noise = NoiseModel::default();
        let eta = eta_single(1.0, &noise, GAMMA_E).unwrap();
        assert!((eta - 9.84e-12).abs() < 0.01e-12, "{eta}");
        let mut matched = noise;
        matched.voltage_noise_density = GAMMA_E * 0.25;
        assert!((eta_single(0.25, &matched, GAMMA_E).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        let a = eta_single(2.0, &noise, GAMMA_E).unwrap();
        let b = eta_single(4.0, &noise, GAMMA_E).unwrap();
        assert_eq!(a, 2.0 * b);
        assert_eq!(eta_single(0.0, &noise, GAMMA_E).unwrap(), f64::INFINITY);
        let mut flat = noise;
        flat.projection = false;
        assert!((eta_single(1.0, &flat, GAMMA_E).unwrap() * 3f64.sqrt() - eta).abs() < 1e-24);
    }

    #[test]
    fn aggregation() {
        assert_eq!(eta_multi(&[7.0]).unwrap(), 7.0);
        assert!((eta_multi(&[3.0, 4.0]).unwrap() - 2.4).abs() < 1e-15);
        let nine = eta_multi(&[5.0; 9]).unwrap();
        assert!((nine - 5.0 / 3.0).abs() < 1e-12 * 5.0);
        assert!(matches!(eta_multi(&[]), Err(Error::NoValidPeaks)));
        assert!(matches!(eta_multi(&[f64::INFINITY]), Err(Error::NoValidPeaks)));
        assert_eq!(eta_multi(&[f64::INFINITY, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn independent_peaks_give_threefold_gain() {
        let mut p = DressedParams::experimental_default();
        p.delta_c = optimal_cavity_detuning(&p).unwrap();
        let report = dressed_sensitivity(
            &p,
            PeakModel::Independent,
            &SlopeGrid::default(),
            default_half_width(units::mhz(6.5), units::mhz(2.16)),
            &NoiseModel::default(),
            GAMMA_E,
        )
        .unwrap();
        assert_eq!(report.peaks.len(), 9);
        assert!((report.enhancement - 3.0).abs() < 1e-9, "{}", report.enhancement);
        assert!(report.eta_multi <= report.eta_best_single);
    }

    #[test]
    fn joint_model_is_close_to_threefold() {
        let mut p = DressedParams::experimental_default();
        p.delta_c = optimal_cavity_detuning(&p).unwrap();
        let hw = default_half_width(units::mhz(6.5), units::mhz(2.16));
        let report = dressed_sensitivity(
            &p,
            PeakModel::Joint,
            &SlopeGrid::default(),
            hw,
            &NoiseModel::default(),
            GAMMA_E,
        )
        .unwrap();
        assert_eq!(report.peaks.len(), 9);
        assert!((report.enhancement - 3.0).abs() < 0.05, "{}", report.enhancement);
    }

    #[test]
    fn optimal_detuning_is_dispersive() {
        let p = DressedParams::experimental_default();
        let dc = optimal_cavity_detuning(&p).unwrap();
        // off resonance, inside the cavity line
        assert!(dc.abs() > 0.05 * p.gamma0 && dc.abs() < p.gamma0, "{dc}");
        let here = single_mode_peak_slope(&p, dc).unwrap();
        for x in [0.0, 0.5 * dc, 1.5 * dc, -dc * 0.9] {
            assert!(single_mode_peak_slope(&p, x).unwrap() <= here * (1.0 + 1e-9));
        }
    }

    #[test]
    fn calibration_hits_target() {
        let mut p = DressedParams::experimental_default();
        p.delta_c = optimal_cavity_detuning(&p).unwrap();
        let grid = SlopeGrid::default();
        let hw = default_half_width(units::mhz(6.5), units::mhz(2.16));
        let r = dressed_sensitivity(&p, PeakModel::Independent, &grid, hw, &NoiseModel::default(), GAMMA_E).unwrap();
        let noise = calibrate_noise(&r, &NoiseModel::default(), 28e-12).unwrap();
        let r2 = dressed_sensitivity(&p, PeakModel::Independent, &grid, hw, &noise, GAMMA_E).unwrap();
        assert!((r2.eta_best_single - 28e-12).abs() < 1e-12 * 28e-12 * 1e3);
    }

    #[test]
    fn windows_are_clipped_when_peaks_crowd() {
        let modes = crate::dressed::peak_modes(1.0, 0.8).unwrap();
        let x: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let q: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let r = analyze_quadrature(&x, &q, &modes, 0.5, 5, &NoiseModel::default(), GAMMA_E).unwrap();
        assert!(!r.warnings.is_empty());
        assert_eq!(r.peaks.len(), 9);
    }

    #[test]
    fn only_peaks_in_range_are_used() {
        let modes = crate::dressed::peak_modes(10.0, 2.0).unwrap();
        let x: Vec<f64> = (0..=100).map(|i| -0.5 + i as f64 * 0.01).collect();
        let q: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let r = analyze_quadrature(&x, &q, &modes, 1.0, 5, &NoiseModel::default(), GAMMA_E).unwrap();
        assert_eq!(r.peaks.len(), 1);
        assert_eq!(r.eta_multi, r.peaks[0].eta);
        assert_eq!((r.peaks[0].k, r.peaks[0].l), (0, 0));
        assert!((r.enhancement - 1.0).abs() < 1e-15);
    }
}
