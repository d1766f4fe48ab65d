//! Run configuration as stored on disk.
//!
//! Frequencies are in MHz and loss rates in kHz; both are converted to rad/µs
//! when the physics parameters are built. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use nvcavity::dressed::{DressedParams, ScanVariable};
use nvcavity::grid::Axis;
use nvcavity::master::SystemParams;
use nvcavity::ops::HilbertLayout;
use nvcavity::sensitivity::{NoiseModel, PeakModel, SlopeGrid, DEFAULT_WINDOW};
use nvcavity::spectrum::{OdmrReadout, SpectrumSource};
use nvcavity::units::{self, khz, mhz};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Odmr,
    Spectrum,
    Homodyne,
    Eigenscan,
    Sensitivity,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Odmr => "odmr",
            Mode::Spectrum => "spectrum",
            Mode::Homodyne => "homodyne",
            Mode::Eigenscan => "eigenscan",
            Mode::Sensitivity => "sensitivity",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub dressed: DressedSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub grids: GridSection,
    #[serde(default)]
    pub odmr: OdmrSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub eigenscan: EigenscanSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Driven three-spin model. The rates are estimates, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub spins: usize,
    pub fock_dim: usize,
    pub hyperfine_mhz: f64,
    pub g_ens_mhz: f64,
    pub rabi_mhz: f64,
    /// When set, Ω is derived as 2 g_ens √n and `rabi_mhz` is ignored.
    pub drive_photons: Option<f64>,
    pub delta_s_mhz: f64,
    pub delta_d_mhz: f64,
    pub gamma0_khz: f64,
    pub gamma_par_khz: f64,
    pub gamma_perp_khz: f64,
    pub thermal_photons: f64,
    /// Re-evaluate ⟨a†a⟩ with five more Fock levels and warn on drift.
    pub truncation_check: bool,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            spins: 3,
            fock_dim: 3,
            hyperfine_mhz: units::NV14_HYPERFINE_MHZ,
            g_ens_mhz: 0.3,
            rabi_mhz: 6.5,
            drive_photons: None,
            delta_s_mhz: 0.0,
            delta_d_mhz: 0.0,
            gamma0_khz: 1000.0,
            gamma_par_khz: 100.0,
            gamma_perp_khz: 50.0,
            thermal_photons: 0.0,
            truncation_check: false,
        }
    }
}

/// Nine-mode linear-response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DressedSection {
    pub rabi_mhz: f64,
    pub hyperfine_mhz: f64,
    pub g_eff_mhz: f64,
    pub gamma_khz: f64,
    pub gamma0_khz: f64,
    pub polarization: f64,
    pub a_mw: f64,
    /// Fixed cavity detuning for traces; absent means the most sensitive one.
    pub delta_c_mhz: Option<f64>,
    /// Relative coupling of the nine modes in ascending frequency order.
    pub weights: Option<Vec<f64>>,
    pub peak_model: PeakModel,
}

impl Default for DressedSection {
    fn default() -> Self {
        Self {
            rabi_mhz: 6.5,
            hyperfine_mhz: units::NV14_HYPERFINE_MHZ,
            g_eff_mhz: 0.02,
            gamma_khz: 250.0,
            gamma0_khz: 1000.0,
            polarization: -1.0,
            a_mw: 1.0,
            delta_c_mhz: None,
            weights: None,
            peak_model: PeakModel::Independent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub voltage_noise_density: f64,
    pub integration_time_s: f64,
    pub calibration: f64,
    pub projection: bool,
    /// rad/(s·T).
    pub gamma_e: f64,
    /// Rescale the noise so the best single peak at the operating point of
    /// [dressed] reads this value (T/√Hz).
    pub target_single_eta: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::default();
        Self {
            voltage_noise_density: n.voltage_noise_density,
            integration_time_s: n.integration_time,
            calibration: n.calibration,
            projection: n.projection,
            gamma_e: units::GAMMA_E,
            target_single_eta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl AxisSpec {
    /// Converts to rad/µs.
    pub fn to_axis(self) -> Result<Axis> {
        Ok(Axis::new(mhz(self.start), mhz(self.stop), self.steps)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub delta_s: Option<AxisSpec>,
    pub delta_d: Option<AxisSpec>,
    pub delta_c: Option<AxisSpec>,
    pub omega: Option<AxisSpec>,
    pub g_eff: Option<AxisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutSpec {
    SpinExcitation,
    CavityIntegrated,
    CavityEmission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdmrSection {
    pub readout: ReadoutSpec,
    /// Emission frequency for the `cavity_emission` readout, MHz.
    pub emission_mhz: f64,
}

impl Default for OdmrSection {
    fn default() -> Self {
        Self {
            readout: ReadoutSpec::SpinExcitation,
            emission_mhz: 0.0,
        }
    }
}

impl OdmrSection {
    pub fn readout(&self) -> OdmrReadout {
        match self.readout {
            ReadoutSpec::SpinExcitation => OdmrReadout::SpinExcitation,
            ReadoutSpec::CavityIntegrated => OdmrReadout::CavityIntegrated,
            ReadoutSpec::CavityEmission => OdmrReadout::CavityEmission {
                omega: mhz(self.emission_mhz),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Spin index to use as the emitter; the cavity when absent.
    pub spin: Option<usize>,
}

impl SpectrumSection {
    pub fn source(&self) -> SpectrumSource {
        match self.spin {
            Some(j) => SpectrumSource::Spin(j),
            None => SpectrumSource::Cavity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenscanSection {
    pub variable: ScanVariable,
}

impl Default for EigenscanSection {
    fn default() -> Self {
        Self {
            variable: ScanVariable::DeltaC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    /// CSV with columns delta_s_MHz, Q to analyse instead of the model.
    pub trace_file: Option<PathBuf>,
    pub window: usize,
    /// Segment half-width; min(Ω, Δ)/2 when absent.
    pub half_width_mhz: Option<f64>,
    /// Grid step in units of Γ/2 for model traces.
    pub step_over_linewidth: f64,
    /// Trace half-span around each feature in units of Γ/2.
    pub span_over_linewidth: f64,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        let g = SlopeGrid::default();
        Self {
            trace_file: None,
            window: DEFAULT_WINDOW,
            half_width_mhz: None,
            step_over_linewidth: g.step_over_linewidth,
            span_over_linewidth: g.span_over_linewidth,
        }
    }
}

impl SensitivitySection {
    pub fn slope_grid(&self) -> SlopeGrid {
        SlopeGrid {
            step_over_linewidth: self.step_over_linewidth,
            span_over_linewidth: self.span_over_linewidth,
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Effective spin loss rates to sweep, kHz; one curve each.
    pub gammas_khz: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            gammas_khz: vec![250.0, 167.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Both,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn rate(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(field, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn finite(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(invalid(field, format!("must be finite, got {v}")));
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(invalid(field, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.spins < 1 {
            return Err(invalid("system.spins", "must be >= 1"));
        }
        if s.fock_dim < 2 {
            return Err(invalid("system.fock_dim", "must be >= 2"));
        }
        rate("system.hyperfine_mhz", s.hyperfine_mhz)?;
        rate("system.g_ens_mhz", s.g_ens_mhz)?;
        rate("system.rabi_mhz", s.rabi_mhz)?;
        if let Some(n) = s.drive_photons {
            rate("system.drive_photons", n)?;
        }
        finite("system.delta_s_mhz", s.delta_s_mhz)?;
        finite("system.delta_d_mhz", s.delta_d_mhz)?;
        rate("system.gamma0_khz", s.gamma0_khz)?;
        rate("system.gamma_par_khz", s.gamma_par_khz)?;
        rate("system.gamma_perp_khz", s.gamma_perp_khz)?;
        rate("system.thermal_photons", s.thermal_photons)?;

        let d = &self.dressed;
        positive("dressed.rabi_mhz", d.rabi_mhz)?;
        rate("dressed.hyperfine_mhz", d.hyperfine_mhz)?;
        rate("dressed.g_eff_mhz", d.g_eff_mhz)?;
        positive("dressed.gamma_khz", d.gamma_khz)?;
        positive("dressed.gamma0_khz", d.gamma0_khz)?;
        if !(-1.0..=0.0).contains(&d.polarization) {
            return Err(invalid(
                "dressed.polarization",
                format!("must lie in [-1, 0], got {}", d.polarization),
            ));
        }
        finite("dressed.a_mw", d.a_mw)?;
        if let Some(dc) = d.delta_c_mhz {
            finite("dressed.delta_c_mhz", dc)?;
        }
        if let Some(w) = &d.weights {
            if w.len() != 9 {
                return Err(invalid(
                    "dressed.weights",
                    format!("expected 9 entries, got {}", w.len()),
                ));
            }
            for &x in w {
                rate("dressed.weights", x)?;
            }
        }

        let n = &self.noise;
        positive("noise.voltage_noise_density", n.voltage_noise_density)?;
        positive("noise.integration_time_s", n.integration_time_s)?;
        positive("noise.calibration", n.calibration)?;
        positive("noise.gamma_e", n.gamma_e)?;
        if let Some(t) = n.target_single_eta {
            positive("noise.target_single_eta", t)?;
        }

        let g = &self.grids;
        for (name, axis) in [
            ("grids.delta_s", g.delta_s),
            ("grids.delta_d", g.delta_d),
            ("grids.delta_c", g.delta_c),
            ("grids.omega", g.omega),
            ("grids.g_eff", g.g_eff),
        ] {
            if let Some(a) = axis {
                if a.steps < 2 {
                    return Err(invalid(name, format!("steps must be >= 2, got {}", a.steps)));
                }
                if !a.start.is_finite() || !a.stop.is_finite() || a.start >= a.stop {
                    return Err(invalid(name, "start must be finite and below stop"));
                }
            }
        }
        finite("odmr.emission_mhz", self.odmr.emission_mhz)?;
        if let Some(j) = self.spectrum.spin {
            if j >= s.spins {
                return Err(invalid(
                    "spectrum.spin",
                    format!("index {j} out of range for {} spins", s.spins),
                ));
            }
        }
        let sens = &self.sensitivity;
        if sens.window < 3 {
            return Err(invalid("sensitivity.window", "must be >= 3"));
        }
        if let Some(h) = sens.half_width_mhz {
            positive("sensitivity.half_width_mhz", h)?;
        }
        positive("sensitivity.step_over_linewidth", sens.step_over_linewidth)?;
        positive("sensitivity.span_over_linewidth", sens.span_over_linewidth)?;
        for &x in &self.sweep.gammas_khz {
            positive("sweep.gammas_khz", x)?;
        }

        let need = |name: &str, axis: &Option<AxisSpec>| -> Result<()> {
            if axis.is_none() {
                return Err(invalid(name, format!("required for mode {}", self.mode.name())));
            }
            Ok(())
        };
        match self.mode {
            Mode::Odmr => {
                need("grids.delta_s", &g.delta_s)?;
                need("grids.delta_d", &g.delta_d)?;
            }
            Mode::Spectrum => need("grids.omega", &g.omega)?,
            Mode::Homodyne => {
                need("grids.delta_s", &g.delta_s)?;
                need("grids.delta_c", &g.delta_c)?;
            }
            Mode::Eigenscan => match self.eigenscan.variable {
                ScanVariable::DeltaS => need("grids.delta_s", &g.delta_s)?,
                ScanVariable::DeltaC => need("grids.delta_c", &g.delta_c)?,
            },
            Mode::Sensitivity => {}
            Mode::Sweep => {
                need("grids.g_eff", &g.g_eff)?;
                if self.sweep.gammas_khz.is_empty() {
                    return Err(invalid("sweep.gammas_khz", "at least one rate is required"));
                }
            }
        }
        Ok(())
    }

    /// Driven-model parameters in rad/µs.
    pub fn system_params(&self) -> Result<SystemParams> {
        let s = &self.system;
        let layout = HilbertLayout::new(s.spins, s.fock_dim)?;
        let mut p = SystemParams::new(layout);
        p.hyperfine_spacing = mhz(s.hyperfine_mhz);
        p.g_ens = mhz(s.g_ens_mhz);
        p.gamma0 = khz(s.gamma0_khz);
        p.gamma_par = khz(s.gamma_par_khz);
        p.gamma_perp = khz(s.gamma_perp_khz);
        p.thermal_photons = s.thermal_photons;
        match s.drive_photons {
            Some(n) => p.set_drive_photons(n),
            None => p.rabi = mhz(s.rabi_mhz),
        }
        p.set_detunings(mhz(s.delta_s_mhz), mhz(s.delta_d_mhz));
        p.validate()?;
        Ok(p)
    }

    /// Linear-response parameters in rad/µs, at Δ_s = 0 and the configured
    /// (or zero) cavity detuning.
    pub fn dressed_params(&self) -> Result<DressedParams> {
        let d = &self.dressed;
        let mut p = DressedParams::nine_peak(
            mhz(d.rabi_mhz),
            mhz(d.hyperfine_mhz),
            mhz(d.g_eff_mhz),
            khz(d.gamma_khz),
            khz(d.gamma0_khz),
        )?;
        p.polarization = d.polarization;
        p.a_mw = d.a_mw;
        p.delta_c = mhz(d.delta_c_mhz.unwrap_or(0.0));
        if let Some(w) = &d.weights {
            p = p.with_weights(w)?;
        }
        Ok(p)
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            voltage_noise_density: self.noise.voltage_noise_density,
            integration_time: self.noise.integration_time_s,
            calibration: self.noise.calibration,
            projection: self.noise.projection,
        }
    }

    /// Segment half-width in rad/µs.
    pub fn half_width(&self) -> f64 {
        match self.sensitivity.half_width_mhz {
            Some(h) => mhz(h),
            None => {
                nvcavity::sensitivity::default_half_width(mhz(self.dressed.rabi_mhz), mhz(self.dressed.hyperfine_mhz))
            }
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "odmr"

[grids]
delta_s = { start = -5.0, stop = 5.0, steps = 5 }
delta_d = { start = -5.0, stop = 5.0, steps = 5 }
"#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.system, SystemSection::default());
        assert_eq!(cfg.dressed, DressedSection::default());
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[system]\ngamma_0_khz = 3.0\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("gamma_0_khz"), "{err}");
        let text = format!("bogus = 1\n{MINIMAL}");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn syntax_errors_carry_a_line_number() {
        let err = RunConfig::from_toml("mode = \"odmr\"\n[grids\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn negative_rate_names_the_field() {
        let text = format!("{MINIMAL}\n[system]\ngamma0_khz = -1.0\n");
        match RunConfig::from_toml(&text) {
            Err(CliError::Invalid { field, .. }) => assert_eq!(field, "system.gamma0_khz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_invariants() {
        let text = MINIMAL.replace("steps = 5 }\ndelta_d", "steps = 1 }\ndelta_d");
        assert!(RunConfig::from_toml(&text).is_err());
        let text = MINIMAL.replace(
            "start = -5.0, stop = 5.0, steps = 5 }\ndelta_d",
            "start = 5.0, stop = -5.0, steps = 5 }\ndelta_d",
        );
        assert!(RunConfig::from_toml(&text).is_err());
        let text = "mode = \"odmr\"\n";
        match RunConfig::from_toml(text) {
            Err(CliError::Invalid { field, .. }) => assert_eq!(field, "grids.delta_s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn units_are_converted() {
        let text = r#"
mode = "sweep"
[dressed]
g_eff_mhz = 0.26
gamma_khz = 167.0
[grids]
g_eff = { start = 0.01, stop = 0.3, steps = 10 }
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let p = cfg.dressed_params().unwrap();
        assert!((p.g_eff - std::f64::consts::TAU * 0.26).abs() < 1e-12);
        assert!((p.gamma - std::f64::consts::TAU * 0.167).abs() < 1e-12);
        let s = cfg.system_params().unwrap();
        assert!((s.gamma0 - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn drive_photons_set_the_rabi_frequency() {
        let text = format!("{MINIMAL}\n[system]\ng_ens_mhz = 0.5\ndrive_photons = 16.0\n");
        let p = RunConfig::from_toml(&text).unwrap().system_params().unwrap();
        assert!((p.rabi - mhz(4.0)).abs() < 1e-12);
    }
}
