//! Incoherent emission spectra from the quantum regression theorem, and
//! ODMR maps over the (Δ_s, Δ_d) plane.
//!
//! For an emitter operator O the spectrum is
//!
//! ```text
//! S(ω) = 2 Re ∫₀^∞ e^{iωτ} ⟨O†(τ) O(0)⟩_c dτ = −2 Re Tr[O† (L + iω)⁻¹ (Oρ − ⟨O⟩ρ)]
//! ```
//!
//! where ⟨·⟩_c drops the coherent part ⟨O†⟩⟨O⟩. A free cavity with detuning
//! Δ_c therefore peaks at ω = −Δ_c.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::master::{liouvillian_for, steady_state, vec_index, Liouvillian, SystemParams};
use crate::ops::{column_stack, embed, pauli, DensityMatrix, Operator, Pauli, ONE, ZERO};
use crate::par::{map_range, Exec};
use crate::resolvent::{HessenbergResolvent, TracelessResolvent};

/// Negative spectral values above this (relative to the trace maximum) are
/// treated as round-off and clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SpectrumSource {
    /// Cavity output, O = a.
    #[default]
    Cavity,
    /// Direct emission of one spin, O = σ_j^−.
    Spin(usize),
}

impl SpectrumSource {
    pub fn operator(&self, params: &SystemParams) -> Result<Operator> {
        match *self {
            SpectrumSource::Cavity => params.cavity_annihilation(),
            SpectrumSource::Spin(j) => embed(&pauli(Pauli::Minus), j, &params.layout),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTrace {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    /// Frequencies dropped because the resolvent was singular there.
    pub poles: Vec<f64>,
    pub params_hash: String,
}

impl SpectrumTrace {
    /// Indices of strict interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
            .collect()
    }

    pub fn peak_frequencies(&self) -> Vec<f64> {
        self.local_maxima().into_iter().map(|i| self.omegas[i]).collect()
    }
}

/// SHA-256 of the JSON form of the parameters, hex encoded.
pub fn params_hash(params: &SystemParams) -> String {
    let json = serde_json::to_vec(params).expect("parameters serialize");
    hex(&Sha256::digest(&json))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn identity_vec(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        v[vec_index(i, i, d)] = ONE;
    }
    v
}

/// O ρ − Tr(Oρ) ρ, column stacked.
fn fluctuation_seed(op: &Operator, rho: &DensityMatrix) -> Result<Vec<C64>> {
    let mean = rho.expect(op)?;
    let seed = op.matrix().dot(rho.matrix()) - rho.matrix().mapv(|z| z * mean);
    Ok(column_stack(&seed))
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Precomputed state for evaluating S(ω) at many frequencies: the stationary
/// state plus a Hessenberg reduction of the Liouvillian.
#[derive(Debug)]
pub struct SpectrumSolver {
    rho_ss: DensityMatrix,
    resolvent: TracelessResolvent,
    seed: Vec<C64>,
    observable: Vec<C64>,
    params_hash: String,
}

impl SpectrumSolver {
    pub fn new(params: &SystemParams, source: SpectrumSource) -> Result<Self> {
        let l = liouvillian_for(params)?;
        let rho_ss = steady_state(&l)?;
        Self::from_parts(&l, rho_ss, &source.operator(params)?, params_hash(params))
    }

    pub fn from_parts(l: &Liouvillian, rho_ss: DensityMatrix, op: &Operator, params_hash: String) -> Result<Self> {
        let d = l.dim();
        if op.dim() != d || rho_ss.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if op.dim() != d { op.dim() } else { rho_ss.dim() },
            });
        }
        let engine = HessenbergResolvent::new(l)?;
        let seed = engine.to_hessenberg(&fluctuation_seed(op, &rho_ss)?)?;
        let observable = engine.to_hessenberg(&column_stack(op.matrix()))?;
        let resolvent = TracelessResolvent::new(engine, &identity_vec(d), &rho_ss.to_column_stacked())?;
        Ok(Self {
            rho_ss,
            resolvent,
            seed,
            observable,
            params_hash,
        })
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.rho_ss
    }

    /// S(ω) at a single frequency.
    pub fn value(&self, omega: f64) -> Result<f64> {
        let y = self.resolvent.solve(omega, &self.seed)?;
        Ok(-2.0 * inner(&self.observable, &y).re)
    }

    pub fn trace(&self, omegas: &[f64], exec: Exec) -> Result<SpectrumTrace> {
        check_increasing(omegas)?;
        let raw = map_range(exec, omegas.len(), |i| self.value(omegas[i]));
        let mut kept = Vec::with_capacity(omegas.len());
        let mut values = Vec::with_capacity(omegas.len());
        let mut poles = Vec::new();
        for (&w, r) in omegas.iter().zip(raw) {
            match r {
                Ok(v) => {
                    kept.push(w);
                    values.push(v);
                }
                Err(Error::Pole { omega }) => poles.push(omega),
                Err(e) => return Err(e),
            }
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut values {
            if *v < 0.0 && *v >= -NEGATIVE_CLAMP * scale.max(1.0) {
                *v = 0.0;
            }
        }
        Ok(SpectrumTrace {
            omegas: kept,
            values,
            poles,
            params_hash: self.params_hash.clone(),
        })
    }
}

fn check_increasing(omegas: &[f64]) -> Result<()> {
    if omegas.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if omegas.iter().any(|w| !w.is_finite()) {
        return Err(Error::param("omega_grid", "must be finite"));
    }
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("omega_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Incoherent cavity emission spectrum.
pub fn emission_spectrum(params: &SystemParams, omegas: &[f64]) -> Result<SpectrumTrace> {
    emission_spectrum_of(params, SpectrumSource::Cavity, omegas, Exec::default())
}

pub fn emission_spectrum_of(
    params: &SystemParams,
    source: SpectrumSource,
    omegas: &[f64],
    exec: Exec,
) -> Result<SpectrumTrace> {
    check_increasing(omegas)?;
    SpectrumSolver::new(params, source)?.trace(omegas, exec)
}

/// S(ω) at one frequency by a dense LU solve of the deflated system
/// (L + iω + vec(ρ_ss) vec(I)†) y = Oρ − ⟨O⟩ρ, which is regular at ω = 0.
pub fn spectrum_point_dense(l: &Liouvillian, rho_ss: &DensityMatrix, op: &Operator, omega: f64) -> Result<f64> {
    let d = l.dim();
    let n = d * d;
    let mut m = l.superop().clone();
    let rho = rho_ss.to_column_stacked();
    for i in 0..n {
        m[[i, i]] += C64::new(0.0, omega);
    }
    for k in 0..d {
        let col = vec_index(k, k, d);
        for (i, r) in rho.iter().enumerate() {
            m[[i, col]] += r;
        }
    }
    let seed = Array1::from(fluctuation_seed(op, rho_ss)?);
    let y = m.solve_into(seed).map_err(|_| Error::Pole { omega })?;
    let o = column_stack(op.matrix());
    Ok(-2.0 * inner(&o, y.as_slice().expect("contiguous")).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum OdmrReadout {
    /// Σ_j ⟨σ_j^+ σ_j^−⟩ in the steady state.
    #[default]
    SpinExcitation,
    /// Incoherent cavity spectrum S(ω) at a fixed frequency (rad/µs).
    CavityEmission { omega: f64 },
    /// Frequency-integrated incoherent cavity emission, ⟨a†a⟩ − |⟨a⟩|².
    CavityIntegrated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMap {
    pub delta_s_axis: Vec<f64>,
    pub delta_d_axis: Vec<f64>,
    /// Indexed [Δ_s, Δ_d]; `None` marks grid points whose steady state failed.
    pub values: Array2<Option<f64>>,
    /// Largest raw value before normalization.
    pub scale: f64,
}

impl SpectrumMap {
    pub fn failures(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn odmr_point(params: &SystemParams, readout: OdmrReadout) -> Result<f64> {
    let l = liouvillian_for(params)?;
    let rho = steady_state(&l)?;
    match readout {
        OdmrReadout::SpinExcitation => Ok(rho.expect(&params.total_spin_excitation()?)?.re),
        OdmrReadout::CavityIntegrated => {
            let a = params.cavity_annihilation()?;
            let n = rho.expect(&(&a.dagger() * &a))?.re;
            let mean = rho.expect(&a)?;
            Ok(n - mean.norm_sqr())
        }
        OdmrReadout::CavityEmission { omega } => spectrum_point_dense(&l, &rho, &params.cavity_annihilation()?, omega),
    }
}

/// Steady-state ODMR observable over the (Δ_s, Δ_d) grid, normalized so the
/// largest value is 1.
pub fn odmr_map(
    base: &SystemParams,
    delta_s_axis: &Axis,
    delta_d_axis: &Axis,
    readout: OdmrReadout,
    exec: Exec,
) -> Result<SpectrumMap> {
    delta_s_axis.validate()?;
    delta_d_axis.validate()?;
    base.validate()?;
    let (ns, nd) = (delta_s_axis.len(), delta_d_axis.len());
    let raw = map_range(exec, ns * nd, |k| {
        let (i, j) = (k / nd, k % nd);
        let p = base.at_detunings(delta_s_axis.value(i), delta_d_axis.value(j));
        odmr_point(&p, readout).ok().filter(|v| v.is_finite())
    });
    let scale = raw.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let values = Array2::from_shape_vec(
        (ns, nd),
        raw.into_iter()
            .map(|v| v.map(|x| if scale > 0.0 { (x / scale).max(0.0) } else { 0.0 }))
            .collect(),
    )
    .expect("grid size matches");
    Ok(SpectrumMap {
        delta_s_axis: delta_s_axis.values(),
        delta_d_axis: delta_d_axis.values(),
        values,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::HilbertLayout;
    use crate::units::mhz;

    fn seeded_cavity(fock: usize) -> SystemParams {
        let mut p = SystemParams::new(HilbertLayout::new(1, fock).unwrap());
        p.gamma0 = mhz(1.0);
        p.gamma_par = mhz(0.1);
        p.thermal_photons = 0.05;
        p.delta_c = mhz(1.5);
        p
    }

    #[test]
    fn empty_cavity_is_lorentzian() {
        let p = seeded_cavity(6);
        let omegas: Vec<f64> = (0..801).map(|i| mhz(-5.5 + 0.01 * i as f64)).collect();
        let trace = emission_spectrum(&p, &omegas).unwrap();
        let peaks = trace.local_maxima();
        assert_eq!(peaks.len(), 1);
        let ip = peaks[0];
        assert!((trace.omegas[ip] + p.delta_c).abs() <= mhz(0.01) + 1e-12);
        // half width at half maximum from linear interpolation on both flanks
        let half = trace.values[ip] / 2.0;
        let cross = |range: Box<dyn Iterator<Item = usize>>| {
            for i in range {
                let (a, b) = (trace.values[i], trace.values[i + 1]);
                if (a - half) * (b - half) <= 0.0 {
                    return trace.omegas[i] + (half - a) / (b - a) * (trace.omegas[i + 1] - trace.omegas[i]);
                }
            }
            panic!("no crossing");
        };
        let left = cross(Box::new(0..ip));
        let right = cross(Box::new(ip..trace.omegas.len() - 1));
        let hwhm = (right - left) / 2.0;
        assert!((hwhm / (p.gamma0 / 2.0) - 1.0).abs() < 0.02, "hwhm {hwhm}");
    }

    #[test]
    fn hessenberg_and_dense_routes_agree() {
        let mut p = SystemParams::new(HilbertLayout::new(2, 3).unwrap());
        p.gamma0 = mhz(1.0);
        p.gamma_par = mhz(0.2);
        p.gamma_perp = mhz(0.1);
        p.g_ens = mhz(0.4);
        p.rabi = mhz(2.0);
        p.hyperfine_spacing = mhz(1.0);
        p.set_detunings(mhz(0.3), mhz(-0.2));
        let l = liouvillian_for(&p).unwrap();
        let rho = steady_state(&l).unwrap();
        for source in [SpectrumSource::Cavity, SpectrumSource::Spin(1)] {
            let op = source.operator(&p).unwrap();
            let solver = SpectrumSolver::from_parts(&l, rho.clone(), &op, String::new()).unwrap();
            for w in [-7.0, -1.0, 0.0, 1e-9, 0.4, 12.0] {
                let a = solver.value(w).unwrap();
                let b = spectrum_point_dense(&l, &rho, &op, w).unwrap();
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{source:?} {w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mollow_sidebands_of_a_driven_spin() {
        let mut p = SystemParams::new(HilbertLayout::new(1, 2).unwrap());
        p.gamma0 = mhz(1.0);
        p.gamma_par = mhz(0.2);
        p.gamma_perp = mhz(0.05);
        p.rabi = mhz(5.0);
        let step = mhz(0.02);
        let omegas: Vec<f64> = (0..=1000).map(|i| -10.0 * step * 50.0 + step * i as f64).collect();
        let trace = emission_spectrum_of(&p, SpectrumSource::Spin(0), &omegas, Exec::Sequential).unwrap();
        let peaks = trace.peak_frequencies();
        assert_eq!(peaks.len(), 3, "{peaks:?}");
        assert!((peaks[0] + p.rabi).abs() <= step);
        assert!(peaks[1].abs() <= step);
        assert!((peaks[2] - p.rabi).abs() <= step);
    }

    #[test]
    fn spectrum_is_deterministic_and_hashed() {
        let p = seeded_cavity(3);
        let omegas: Vec<f64> = (0..40).map(|i| i as f64 * 0.3 - 6.0).collect();
        let a = emission_spectrum_of(&p, SpectrumSource::Cavity, &omegas, Exec::Parallel).unwrap();
        let b = emission_spectrum_of(&p, SpectrumSource::Cavity, &omegas, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params_hash.len(), 64);
        let mut q = p.clone();
        q.gamma0 *= 1.0 + 1e-12;
        assert_ne!(params_hash(&q), a.params_hash);
    }

    #[test]
    fn rejects_bad_grids() {
        let p = seeded_cavity(2);
        assert!(emission_spectrum(&p, &[]).is_err());
        assert!(emission_spectrum(&p, &[1.0, 1.0]).is_err());
        assert!(emission_spectrum(&p, &[2.0, 1.0]).is_err());
    }

    fn odmr_base(spacing: f64) -> SystemParams {
        let mut p = SystemParams::new(HilbertLayout::new(3, 2).unwrap());
        p.hyperfine_spacing = spacing;
        p.gamma0 = mhz(1.0);
        p.gamma_par = mhz(0.1);
        p.gamma_perp = mhz(0.05);
        p.g_ens = mhz(0.1);
        p.rabi = mhz(0.5);
        p.set_detunings(0.0, 0.0);
        p
    }

    #[test]
    fn odmr_map_symmetry_without_hyperfine_spacing() {
        let p = odmr_base(0.0);
        let axis = Axis::new(mhz(-2.0), mhz(2.0), 5).unwrap();
        let map = odmr_map(&p, &axis, &axis, OdmrReadout::SpinExcitation, Exec::Sequential).unwrap();
        assert_eq!(map.values.dim(), (5, 5));
        assert_eq!(map.failures(), 0);
        let max = map.values.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
        assert!((max - 1.0).abs() < 1e-15);
        for i in 0..5 {
            for j in 0..5 {
                let a = map.values[[i, j]].unwrap();
                let b = map.values[[4 - i, 4 - j]].unwrap();
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn odmr_resonance_follows_the_diagonal() {
        let p = odmr_base(0.0);
        let axis = Axis::new(mhz(-3.0), mhz(3.0), 13).unwrap();
        let map = odmr_map(&p, &axis, &axis, OdmrReadout::SpinExcitation, Exec::Parallel).unwrap();
        for j in 0..13 {
            let col = map.values.column(j);
            let best = (0..13)
                .max_by(|&a, &b| col[a].unwrap().partial_cmp(&col[b].unwrap()).unwrap())
                .unwrap();
            assert_eq!(best, j, "column {j}");
        }
    }

    #[test]
    fn odmr_failed_points_are_missing() {
        // no spin damping and no drive leaves the spin sector undetermined
        let mut p = odmr_base(0.0);
        p.gamma_par = 0.0;
        p.gamma_perp = 0.0;
        p.rabi = 0.0;
        p.g_ens = 0.0;
        let axis = Axis::new(-1.0, 1.0, 2).unwrap();
        let map = odmr_map(&p, &axis, &axis, OdmrReadout::SpinExcitation, Exec::Sequential).unwrap();
        assert_eq!(map.failures(), 4);
    }

    #[test]
    fn cavity_readouts() {
        let p = odmr_base(mhz(2.16));
        let axis = Axis::new(mhz(-1.0), mhz(1.0), 3).unwrap();
        for readout in [
            OdmrReadout::CavityIntegrated,
            OdmrReadout::CavityEmission { omega: 0.0 },
        ] {
            let map = odmr_map(&p, &axis, &axis, readout, Exec::Sequential).unwrap();
            assert_eq!(map.failures(), 0);
            assert!(map.values.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
