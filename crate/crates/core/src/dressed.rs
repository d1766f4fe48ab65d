//! Linear response of the cavity to a weak probe when the spins are dressed
//! by the strong drive.
//!
//! Each hyperfine line split by the drive behaves as three effective
//! two-level systems at ω_{kl} = kΩ + lΔ, giving nine modes coupled to the
//! cavity. In steady state the reflected amplitude is
//!
//! ```text
//! α = −√γ₀ a_mw / [ iΔ_c + γ₀/2 − g² P Σ_j w_j² (iΔ_j + Γ/2)⁻¹ ]
//! ```
//!
//! with Δ_j = ω_j + Δ_s, and the homodyne quadrature is ⟨Q⟩ = √2 Re α.

use ndarray::Array2;
use ndarray_linalg::EigVals;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::par::{map_range, Exec};
use crate::units;

/// Smallest denominator magnitude accepted in [`steady_alpha`].
pub const DENOMINATOR_MIN: f64 = 1e-15;

/// One effective two-level system of the doubly dressed ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedMode {
    /// Dressing index k (multiples of Ω).
    pub k: i8,
    /// Hyperfine index l (multiples of Δ).
    pub l: i8,
    /// ω_{kl} = kΩ + lΔ.
    pub omega: f64,
    /// Relative coupling; the mode couples with g·weight.
    pub weight: f64,
}

/// The nine modes {kΩ + lΔ : k, l ∈ {−1, 0, 1}}, sorted ascending by
/// frequency. Coincident frequencies are kept as separate modes.
pub fn peak_modes(rabi: f64, hyperfine: f64) -> Result<Vec<DressedMode>> {
    if !(rabi > 0.0) || !rabi.is_finite() {
        return Err(Error::param("rabi", format!("must be > 0, got {rabi}")));
    }
    if !(hyperfine >= 0.0) || !hyperfine.is_finite() {
        return Err(Error::param(
            "hyperfine_spacing",
            format!("must be >= 0, got {hyperfine}"),
        ));
    }
    let mut modes = Vec::with_capacity(9);
    for k in -1i8..=1 {
        for l in -1i8..=1 {
            modes.push(DressedMode {
                k,
                l,
                omega: k as f64 * rabi + l as f64 * hyperfine,
                weight: 1.0,
            });
        }
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(modes)
}

pub fn peak_frequencies(rabi: f64, hyperfine: f64) -> Result<Vec<f64>> {
    Ok(peak_modes(rabi, hyperfine)?.iter().map(|m| m.omega).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedParams {
    /// Probe-minus-cavity detuning.
    pub delta_c: f64,
    /// Common sweep detuning of the spin transitions.
    pub delta_s: f64,
    pub modes: Vec<DressedMode>,
    pub g_eff: f64,
    /// Spin polarization ⟨σ^z⟩, in [−1, 0].
    pub polarization: f64,
    /// Effective spin loss Γ.
    pub gamma: f64,
    pub gamma0: f64,
    pub a_mw: f64,
}

impl DressedParams {
    /// Nine equally weighted modes, fully polarized spins, unit probe.
    pub fn nine_peak(rabi: f64, hyperfine: f64, g_eff: f64, gamma: f64, gamma0: f64) -> Result<Self> {
        let p = Self {
            delta_c: 0.0,
            delta_s: 0.0,
            modes: peak_modes(rabi, hyperfine)?,
            g_eff,
            polarization: -1.0,
            gamma,
            gamma0,
            a_mw: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Estimated operating point of the experiment: Ω = 2π·6.5 MHz,
    /// Δ = 2π·2.16 MHz, γ₀ = 2π·1 MHz, g = 2π·20 kHz, Γ = 2π·250 kHz.
    pub fn experimental_default() -> Self {
        Self::nine_peak(
            units::mhz(6.5),
            units::mhz(units::NV14_HYPERFINE_MHZ),
            units::khz(20.0),
            units::khz(250.0),
            units::mhz(1.0),
        )
        .expect("default parameters are valid")
    }

    /// A single mode at frequency `omega`.
    pub fn single_mode(omega: f64, g_eff: f64, gamma: f64, gamma0: f64) -> Result<Self> {
        let p = Self {
            delta_c: 0.0,
            delta_s: 0.0,
            modes: vec![DressedMode {
                k: 0,
                l: 0,
                omega,
                weight: 1.0,
            }],
            g_eff,
            polarization: -1.0,
            gamma,
            gamma0,
            a_mw: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::param("gamma0", format!("must be > 0, got {}", self.gamma0)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !(-1.0..=0.0).contains(&self.polarization) {
            return Err(Error::param(
                "polarization",
                format!("must lie in [-1, 0], got {}", self.polarization),
            ));
        }
        if !(self.g_eff >= 0.0) || !self.g_eff.is_finite() {
            return Err(Error::param("g_eff", format!("must be >= 0, got {}", self.g_eff)));
        }
        for (field, v) in [
            ("delta_c", self.delta_c),
            ("delta_s", self.delta_s),
            ("a_mw", self.a_mw),
        ] {
            if !v.is_finite() {
                return Err(Error::param(field, "must be finite"));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::param("modes", "at least one mode is required"));
        }
        for m in &self.modes {
            if !m.omega.is_finite() || !m.weight.is_finite() || m.weight < 0.0 {
                return Err(Error::param("modes", format!("invalid mode {m:?}")));
            }
        }
        Ok(())
    }

    /// Δ_j = ω_j + Δ_s.
    pub fn peak_detunings(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.omega + self.delta_s).collect()
    }

    pub fn at(&self, delta_s: f64, delta_c: f64) -> Self {
        let mut p = self.clone();
        p.delta_s = delta_s;
        p.delta_c = delta_c;
        p
    }

    /// Replaces the per-mode weights; `weights.len()` must match the modes.
    pub fn with_weights(mut self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                got: weights.len(),
            });
        }
        for (m, &w) in self.modes.iter_mut().zip(weights) {
            m.weight = w;
        }
        self.validate()?;
        Ok(self)
    }

    fn denominator(&self) -> C64 {
        let half = C64::new(self.gamma / 2.0, 0.0);
        let sum: C64 = self
            .modes
            .iter()
            .map(|m| m.weight * m.weight / (C64::new(0.0, m.omega + self.delta_s) + half))
            .sum();
        C64::new(self.gamma0 / 2.0, self.delta_c) - self.g_eff * self.g_eff * self.polarization * sum
    }

    fn denominator_derivative(&self) -> C64 {
        // dD/dΔ_s
        let half = C64::new(self.gamma / 2.0, 0.0);
        let sum: C64 = self
            .modes
            .iter()
            .map(|m| {
                let z = C64::new(0.0, m.omega + self.delta_s) + half;
                m.weight * m.weight / (z * z)
            })
            .sum();
        C64::new(0.0, self.g_eff * self.g_eff * self.polarization) * sum
    }
}

pub fn steady_alpha(p: &DressedParams) -> Result<C64> {
    p.validate()?;
    let d = p.denominator();
    if !(d.norm() > DENOMINATOR_MIN) {
        return Err(Error::SingularDenominator { magnitude: d.norm() });
    }
    Ok(-(p.gamma0.sqrt() * p.a_mw) / d)
}

pub fn quadrature(alpha: C64) -> f64 {
    std::f64::consts::SQRT_2 * alpha.re
}

/// d⟨Q⟩/dΔ_s, in quadrature units per rad/µs.
pub fn quadrature_slope(p: &DressedParams) -> Result<f64> {
    p.validate()?;
    let d = p.denominator();
    if !(d.norm() > DENOMINATOR_MIN) {
        return Err(Error::SingularDenominator { magnitude: d.norm() });
    }
    let dalpha = p.gamma0.sqrt() * p.a_mw * p.denominator_derivative() / (d * d);
    Ok(quadrature(dalpha))
}

/// ⟨Q⟩ along Δ_s at the Δ_c of `base`.
pub fn quadrature_trace(base: &DressedParams, delta_s: &[f64]) -> Result<Vec<f64>> {
    delta_s
        .iter()
        .map(|&s| steady_alpha(&base.at(s, base.delta_c)).map(quadrature))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMap {
    pub delta_s_axis: Vec<f64>,
    pub delta_c_axis: Vec<f64>,
    /// Indexed [Δ_s, Δ_c]; `None` marks singular points.
    pub values: Array2<Option<f64>>,
}

impl QuadratureMap {
    pub fn failures(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

pub fn quadrature_map(
    base: &DressedParams,
    delta_s_axis: &Axis,
    delta_c_axis: &Axis,
    exec: Exec,
) -> Result<QuadratureMap> {
    base.validate()?;
    delta_s_axis.validate()?;
    delta_c_axis.validate()?;
    let (ns, nc) = (delta_s_axis.len(), delta_c_axis.len());
    let raw = map_range(exec, ns * nc, |k| {
        let p = base.at(delta_s_axis.value(k / nc), delta_c_axis.value(k % nc));
        steady_alpha(&p).ok().map(quadrature).filter(|q| q.is_finite())
    });
    Ok(QuadratureMap {
        delta_s_axis: delta_s_axis.values(),
        delta_c_axis: delta_c_axis.values(),
        values: Array2::from_shape_vec((ns, nc), raw).expect("grid size matches"),
    })
}

/// Eigenvalues of the single-excitation matrix (cavity first, then the
/// modes), sorted by real part and then imaginary part.
pub fn avoided_crossing_eigenvalues(p: &DressedParams) -> Result<Vec<C64>> {
    p.validate()?;
    let n = p.modes.len() + 1;
    let mut m = Array2::<C64>::zeros((n, n));
    m[[0, 0]] = C64::new(p.delta_c, -p.gamma0 / 2.0);
    for (j, mode) in p.modes.iter().enumerate() {
        m[[j + 1, j + 1]] = C64::new(mode.omega + p.delta_s, -p.gamma / 2.0);
        let g = C64::new(p.g_eff * mode.weight, 0.0);
        m[[0, j + 1]] = g;
        m[[j + 1, 0]] = g;
    }
    let mut evs = m.eigvals()?.to_vec();
    evs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(evs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVariable {
    DeltaS,
    DeltaC,
}

/// Eigenvalues at each point of a Δ_s or Δ_c sweep.
pub fn eigen_scan(base: &DressedParams, variable: ScanVariable, axis: &Axis, exec: Exec) -> Result<Vec<Vec<C64>>> {
    axis.validate()?;
    map_range(exec, axis.len(), |i| {
        let v = axis.value(i);
        let p = match variable {
            ScanVariable::DeltaS => base.at(v, base.delta_c),
            ScanVariable::DeltaC => base.at(base.delta_s, v),
        };
        avoided_crossing_eigenvalues(&p)
    })
    .into_iter()
    .collect()
}

/// Smallest real-part gap between adjacent eigenvalues over a scan, with the
/// sweep value where it occurs.
pub fn minimum_splitting(scan: &[Vec<C64>], axis: &Axis) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (i, evs) in scan.iter().enumerate() {
        for w in evs.windows(2) {
            let gap = w[1].re - w[0].re;
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, axis.value(i)));
            }
        }
    }
    best
}
