//! Driven Tavis-Cummings model and its Lindblad generator.
//!
//! In the frame rotating at the drive frequency,
//!
//! ```text
//! H = Δ_c a†a + Σ_j [ (Δ_j/2) σ_j^z + g_ens (a σ_j^+ + a† σ_j^−) + (Ω/2)(σ_j^+ + σ_j^−) ]
//! ```
//!
//! and every hyperfine spin j receives the drive term. Dissipation uses the
//! collapse set {(a, γ₀)} ∪ {(σ_j^−, γ_∥), (σ_j^z, γ_⊥)}, each entering as
//! γ (CρC† − ½{C†C, ρ}).
//!
//! Density matrices are vectorized by column stacking, vec(AXB) = (Bᵀ⊗A) vec(X),
//! everywhere in the crate.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{FactorizeInto, ReciprocalConditionNum, Solve, SVD};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{annihilation, embed, pauli, DensityMatrix, HilbertLayout, Operator, Pauli, I, ONE, ZERO};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub layout: HilbertLayout,
    /// Δ_c = ω_c − ω_d.
    pub delta_c: f64,
    /// Δ_j = ω_j − ω_d, one per spin, ordered m_I = −1, 0, +1.
    pub delta_spins: Vec<f64>,
    /// Δ, spacing between adjacent hyperfine transitions.
    pub hyperfine_spacing: f64,
    pub g_ens: f64,
    /// Mean intracavity photon number of the classical drive, if known.
    pub drive_photons: Option<f64>,
    /// Ω = 2 g_ens √n.
    pub rabi: f64,
    pub gamma0: f64,
    pub gamma_par: f64,
    pub gamma_perp: f64,
    /// Thermal occupation of the cavity bath; 0 keeps only the decay channel.
    pub thermal_photons: f64,
}

impl SystemParams {
    /// Undriven, uncoupled system at triple resonance with no losses; callers
    /// fill in what they need.
    pub fn new(layout: HilbertLayout) -> Self {
        Self {
            layout,
            delta_c: 0.0,
            delta_spins: vec![0.0; layout.spin_count()],
            hyperfine_spacing: 0.0,
            g_ens: 0.0,
            drive_photons: None,
            rabi: 0.0,
            gamma0: 0.0,
            gamma_par: 0.0,
            gamma_perp: 0.0,
            thermal_photons: 0.0,
        }
    }

    /// Estimated rates for the NV ensemble in a dielectric resonator. None of
    /// the rates below are measured values.
    pub fn nv_default(layout: HilbertLayout) -> Self {
        let mut p = Self::new(layout);
        p.hyperfine_spacing = units::mhz(units::NV14_HYPERFINE_MHZ);
        p.g_ens = units::mhz(0.3);
        p.rabi = units::mhz(6.5);
        p.gamma0 = units::khz(1000.0);
        p.gamma_par = units::khz(100.0);
        p.gamma_perp = units::khz(50.0);
        p.set_detunings(0.0, 0.0);
        p
    }

    /// g_ens = g √N_s.
    pub fn collective_coupling(single_spin_g: f64, spin_number: f64) -> f64 {
        single_spin_g * spin_number.sqrt()
    }

    /// Sets the drive through its photon number, keeping Ω = 2 g_ens √n.
    pub fn set_drive_photons(&mut self, n: f64) {
        self.drive_photons = Some(n);
        self.rabi = 2.0 * self.g_ens * n.sqrt();
    }

    /// Sets Δ_c and Δ_j from the experimental sweep axes (detunings measured
    /// from the cavity).
    pub fn set_detunings(&mut self, delta_s: f64, delta_d: f64) {
        let (dc, spins) =
            map_experimental_detunings(delta_s, delta_d, self.hyperfine_spacing, self.layout.spin_count());
        self.delta_c = dc;
        self.delta_spins = spins;
    }

    pub fn at_detunings(&self, delta_s: f64, delta_d: f64) -> Self {
        let mut p = self.clone();
        p.set_detunings(delta_s, delta_d);
        p
    }

    pub fn with_fock_dim(&self, fock_dim: usize) -> Result<Self> {
        let mut p = self.clone();
        p.layout = self.layout.with_fock_dim(fock_dim)?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layout.spin_count();
        if self.delta_spins.len() != n {
            return Err(Error::param(
                "delta_spins",
                format!("expected {n} entries, got {}", self.delta_spins.len()),
            ));
        }
        let finite = [
            ("delta_c", self.delta_c),
            ("hyperfine_spacing", self.hyperfine_spacing),
            ("rabi", self.rabi),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(field, "must be finite"));
            }
        }
        if self.delta_spins.iter().any(|d| !d.is_finite()) {
            return Err(Error::param("delta_spins", "must be finite"));
        }
        let non_negative = [
            ("g_ens", self.g_ens),
            ("gamma0", self.gamma0),
            ("gamma_par", self.gamma_par),
            ("gamma_perp", self.gamma_perp),
            ("thermal_photons", self.thermal_photons),
        ];
        for (field, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Some(n) = self.drive_photons {
            if !n.is_finite() || n < 0.0 {
                return Err(Error::param("drive_photons", format!("must be >= 0, got {n}")));
            }
            let expected = 2.0 * self.g_ens * n.sqrt();
            let scale = expected.abs().max(self.rabi.abs());
            if scale > 0.0 && (expected - self.rabi).abs() > 1e-12 * scale {
                return Err(Error::param(
                    "rabi",
                    format!("inconsistent with 2 g_ens sqrt(n) = {expected}"),
                ));
            }
        }
        Ok(())
    }

    /// Collapse operators and rates in the order cavity, then per spin
    /// (σ^−, σ^z). Zero-rate channels are dropped.
    pub fn collapse_operators(&self) -> Result<Vec<(Operator, f64)>> {
        let layout = &self.layout;
        let a = embed(&annihilation(layout.fock_dim())?, layout.cavity(), layout)?;
        let mut out = Vec::new();
        let down = self.gamma0 * (1.0 + self.thermal_photons);
        if down > 0.0 {
            out.push((a.clone(), down));
        }
        if self.thermal_photons > 0.0 && self.gamma0 > 0.0 {
            out.push((a.dagger(), self.gamma0 * self.thermal_photons));
        }
        for j in 0..layout.spin_count() {
            if self.gamma_par > 0.0 {
                out.push((embed(&pauli(Pauli::Minus), j, layout)?, self.gamma_par));
            }
            if self.gamma_perp > 0.0 {
                out.push((embed(&pauli(Pauli::Z), j, layout)?, self.gamma_perp));
            }
        }
        Ok(out)
    }

    pub fn cavity_annihilation(&self) -> Result<Operator> {
        embed(
            &annihilation(self.layout.fock_dim())?,
            self.layout.cavity(),
            &self.layout,
        )
    }

    /// Σ_j σ_j^+ σ_j^−.
    pub fn total_spin_excitation(&self) -> Result<Operator> {
        let proj = &pauli(Pauli::Plus) * &pauli(Pauli::Minus);
        let mut total = Operator::zeros(self.layout.total_dim());
        for j in 0..self.layout.spin_count() {
            total = &total + &embed(&proj, j, &self.layout)?;
        }
        Ok(total)
    }
}

/// Maps the plotting axes (Δ_s = ω_s − ω_c, Δ_d = ω_d − ω_c) onto the
/// drive-frame detunings. The centre hyperfine line sits at ω_s; line j is
/// offset by l·Δ with l running symmetrically around zero.
pub fn map_experimental_detunings(
    delta_s: f64,
    delta_d: f64,
    hyperfine_spacing: f64,
    spin_count: usize,
) -> (f64, Vec<f64>) {
    let centre = (spin_count as f64 - 1.0) / 2.0;
    let spins = (0..spin_count)
        .map(|j| delta_s - delta_d + (j as f64 - centre) * hyperfine_spacing)
        .collect();
    (-delta_d, spins)
}

/// Inverse of [`map_experimental_detunings`] given Δ_c and the centre-line
/// detuning Δ_centre = Δ_s − Δ_d.
pub fn unmap_experimental_detunings(delta_c: f64, delta_centre: f64) -> (f64, f64) {
    let delta_d = -delta_c;
    (delta_centre + delta_d, delta_d)
}

pub fn build_hamiltonian(params: &SystemParams) -> Result<Operator> {
    params.validate()?;
    let layout = &params.layout;
    let a = params.cavity_annihilation()?;
    let ad = a.dagger();
    let mut h = (&ad * &a).scale(params.delta_c);
    let sp = pauli(Pauli::Plus);
    let sm = pauli(Pauli::Minus);
    let sz = pauli(Pauli::Z);
    for (j, &dj) in params.delta_spins.iter().enumerate() {
        let spj = embed(&sp, j, layout)?;
        let smj = embed(&sm, j, layout)?;
        let szj = embed(&sz, j, layout)?;
        h = &h + &szj.scale(dj / 2.0);
        if params.g_ens != 0.0 {
            let exchange = &(&a * &spj) + &(&ad * &smj);
            h = &h + &exchange.scale(params.g_ens);
        }
        if params.rabi != 0.0 {
            h = &h + &(&spj + &smj).scale(params.rabi / 2.0);
        }
    }
    Ok(h)
}

/// Vectorized Lindblad generator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    superop: Array2<C64>,
}

impl Liouvillian {
    /// Hilbert-space dimension d (the superoperator is d² × d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superop(&self) -> &Array2<C64> {
        &self.superop
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let x = Array1::from(v.to_vec());
        self.superop.dot(&x).to_vec()
    }

    pub fn apply_to(&self, rho: &DensityMatrix) -> Vec<C64> {
        self.apply(&rho.to_column_stacked())
    }

    /// ‖L vec(ρ)‖₂.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        norm2(&self.apply_to(rho))
    }

    /// |vec(I)† L|_∞.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        (0..n)
            .map(|col| (0..d).map(|i| self.superop[[i * d + i, col]]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    /// Largest real part in the spectrum. Dense eigendecomposition, so only
    /// sensible for small systems.
    pub fn max_real_eigenvalue(&self) -> Result<f64> {
        use ndarray_linalg::EigVals;
        let evs = self.superop.eigvals()?;
        Ok(evs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Frobenius norm of the superoperator.
    pub fn norm(&self) -> f64 {
        self.superop.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Propagates a column-stacked operator: exp(L t) v.
    pub fn propagate(&self, v: &[C64], t: f64) -> Result<Vec<C64>> {
        let mut out = self.propagate_sampled(v, &[t])?;
        Ok(out.pop().expect("one sample requested"))
    }

    /// exp(L t_k) v at each of the ascending sample times.
    pub fn propagate_sampled(&self, v: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
        let n = self.dim * self.dim;
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let mut integrator = DormandPrince::new(self, RTOL, ATOL);
        let mut y = v.to_vec();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if !(target >= t) {
                return Err(Error::param("t", "sample times must be ascending and >= 0"));
            }
            integrator.advance(&mut y, t, target)?;
            t = target;
            out.push(y.clone());
        }
        Ok(out)
    }
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Index of ρ[row, col] in the column-stacked vector.
#[inline]
pub(crate) fn vec_index(row: usize, col: usize, dim: usize) -> usize {
    col * dim + row
}

pub fn build_liouvillian(h: &Operator, collapse: &[(Operator, f64)]) -> Result<Liouvillian> {
    let d = h.dim();
    for (c, rate) in collapse {
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        if !rate.is_finite() || *rate < 0.0 {
            return Err(Error::param("rate", format!("collapse rate must be >= 0, got {rate}")));
        }
    }
    // L = I⊗A + conj(A)⊗I + Σ γ conj(C)⊗C with A = −iH − ½ Σ γ C†C.
    let mut a = h.scale(-I);
    for (c, rate) in collapse {
        let cdc = &c.dagger() * c;
        a = &a - &cdc.scale(0.5 * rate);
    }
    let n = d * d;
    let mut l = Array2::<C64>::zeros((n, n).f());
    for (r, c, z) in a.nonzeros() {
        for k in 0..d {
            l[[k * d + r, k * d + c]] += z;
            l[[r * d + k, c * d + k]] += z.conj();
        }
    }
    for (c, rate) in collapse {
        let nz = c.nonzeros();
        for &(r1, c1, z1) in &nz {
            for &(r2, c2, z2) in &nz {
                l[[r1 * d + r2, c1 * d + c2]] += z1.conj() * z2 * *rate;
            }
        }
    }
    Ok(Liouvillian { dim: d, superop: l })
}

/// Hamiltonian plus the standard collapse set for `params`.
pub fn liouvillian_for(params: &SystemParams) -> Result<Liouvillian> {
    let h = build_hamiltonian(params)?;
    build_liouvillian(&h, &params.collapse_operators()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteadyStateMethod {
    /// Smallest right singular vector of the superoperator.
    Svd,
    /// LU solve of the superoperator with one row replaced by the trace
    /// constraint.
    Bordered,
    /// `Svd` up to [`SVD_MAX_SUPEROP_DIM`], `Bordered` beyond.
    #[default]
    Auto,
}

/// Largest superoperator dimension for which `Auto` uses the SVD.
pub const SVD_MAX_SUPEROP_DIM: usize = 256;

/// Kernel degeneracy threshold on σ_{n−1}/σ_max.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// Reciprocal condition number below which the bordered system is treated as
/// singular.
pub const BORDERED_RCOND_MIN: f64 = 1e-13;

pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    steady_state_with(l, SteadyStateMethod::Auto)
}

pub fn steady_state_with(l: &Liouvillian, method: SteadyStateMethod) -> Result<DensityMatrix> {
    let d = l.dim;
    let n = d * d;
    let method = match method {
        SteadyStateMethod::Auto if n <= SVD_MAX_SUPEROP_DIM => SteadyStateMethod::Svd,
        SteadyStateMethod::Auto => SteadyStateMethod::Bordered,
        m => m,
    };
    let v: Vec<C64> = match method {
        SteadyStateMethod::Svd => {
            let (_, s, vt) = l.superop.svd(false, true)?;
            let vt = vt.expect("vt requested");
            if n > 1 {
                let ratio = s[n - 2] / s[0];
                if !(ratio >= DEGENERACY_RATIO) {
                    return Err(Error::NonUniqueSteadyState { ratio });
                }
            }
            vt.row(n - 1).iter().map(|z| z.conj()).collect()
        }
        SteadyStateMethod::Bordered => {
            let mut m = l.superop.clone();
            for col in 0..n {
                m[[0, col]] = ZERO;
            }
            for i in 0..d {
                m[[0, vec_index(i, i, d)]] = ONE;
            }
            let lu = match m.factorize_into() {
                Ok(lu) => lu,
                Err(_) => return Err(Error::NonUniqueSteadyState { ratio: 0.0 }),
            };
            let rcond = lu.rcond()?;
            if !(rcond >= BORDERED_RCOND_MIN) {
                return Err(Error::NonUniqueSteadyState { ratio: rcond });
            }
            let mut rhs = Array1::<C64>::zeros(n);
            rhs[0] = ONE;
            lu.solve(&rhs)?.to_vec()
        }
        SteadyStateMethod::Auto => unreachable!(),
    };
    DensityMatrix::from_column_stacked(&v, d)
}

pub fn evolve(rho0: &DensityMatrix, l: &Liouvillian, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    if rho0.dim() != l.dim {
        return Err(Error::DimensionMismatch {
            expected: l.dim,
            got: rho0.dim(),
        });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let v = l.propagate(&rho0.to_column_stacked(), t)?;
    let d = l.dim;
    let trace: C64 = (0..d).map(|i| v[vec_index(i, i, d)]).sum();
    if (trace - ONE).norm() > 1e-8 {
        return Err(Error::InvalidDensityMatrix(format!(
            "trace drifted to {trace} during propagation"
        )));
    }
    let m = Array2::from_shape_vec((d, d).f(), v).expect("length matches");
    DensityMatrix::new(m.as_standard_layout().to_owned())
}

const RTOL: f64 = 1e-8;
const ATOL: f64 = 1e-12;

/// Dormand-Prince 5(4) integrator for ẏ = L y.
struct DormandPrince<'a> {
    l: &'a Liouvillian,
    rtol: f64,
    atol: f64,
    h: Option<f64>,
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus embedded fourth-order weights
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl<'a> DormandPrince<'a> {
    fn new(l: &'a Liouvillian, rtol: f64, atol: f64) -> Self {
        Self { l, rtol, atol, h: None }
    }

    fn rhs(&self, y: &[C64]) -> Vec<C64> {
        self.l.apply(y)
    }

    fn initial_step(&self, y: &[C64], f0: &[C64]) -> f64 {
        let sc = |i: usize| self.atol + self.rtol * y[i].norm();
        let n = y.len() as f64;
        let d0 = (y
            .iter()
            .enumerate()
            .map(|(i, z)| (z.norm() / sc(i)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let d1 = (f0
            .iter()
            .enumerate()
            .map(|(i, z)| (z.norm() / sc(i)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
    }

    fn advance(&mut self, y: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let n = y.len();
        let mut t = t0;
        let mut k: Vec<Vec<C64>> = vec![Vec::new(); 7];
        let mut stage = vec![ZERO; n];
        let mut f0 = self.rhs(y);
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y, &f0),
        };
        while t < t1 {
            let last = t + h >= t1;
            let step = if last { t1 - t } else { h };
            if step <= 1e-14 * t1.abs().max(1.0) && !last {
                return Err(Error::Stiffness { t, step });
            }
            k[0] = f0.clone();
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = DP_A[s][j];
                        if a != 0.0 {
                            acc += kj[i] * (a * step);
                        }
                    }
                    stage[i] = acc;
                }
                k[s] = self.rhs(&stage);
            }
            // stage now holds the fifth-order solution (FSAL row)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if DP_E[j] != 0.0 {
                        e += kj[i] * DP_E[j];
                    }
                }
                let sc = self.atol + self.rtol * y[i].norm().max(stage[i].norm());
                err += (e.norm() * step / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if err <= 1.0 {
                t = if last { t1 } else { t + step };
                y.copy_from_slice(&stage);
                f0 = k[6].clone();
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 && last {
                // keep the step size that was usable before clipping to t1
                h = h.max(step * factor);
            } else {
                h = step * factor;
            }
            if h < 1e-14 * t1.abs().max(1.0) {
                return Err(Error::Stiffness { t, step: h });
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

/// Outcome of re-evaluating an observable at a larger photon truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationCheck {
    pub fock_dim: usize,
    pub extended_fock_dim: usize,
    pub value: f64,
    pub extended_value: f64,
    pub relative_change: f64,
}

/// Relative-change threshold for [`check_truncation`].
pub const TRUNCATION_TOL: f64 = 1e-6;

impl TruncationCheck {
    pub fn converged(&self) -> bool {
        self.relative_change < TRUNCATION_TOL
    }
}

/// Evaluates `observable` at the configured truncation and at `extra` more
/// Fock levels.
pub fn check_truncation<F>(params: &SystemParams, extra: usize, observable: F) -> Result<TruncationCheck>
where
    F: Fn(&SystemParams) -> Result<f64>,
{
    let n = params.layout.fock_dim();
    let value = observable(params)?;
    let extended = params.with_fock_dim(n + extra)?;
    let extended_value = observable(&extended)?;
    let scale = value.abs().max(extended_value.abs());
    let relative_change = if scale == 0.0 {
        0.0
    } else {
        (extended_value - value).abs() / scale
    };
    Ok(TruncationCheck {
        fock_dim: n,
        extended_fock_dim: n + extra,
        value,
        extended_value,
        relative_change,
    })
}
