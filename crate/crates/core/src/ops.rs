//! Dense operator algebra on the truncated spins ⊗ cavity Hilbert space.
//!
//! Subsystems are ordered `(spin_0, …, spin_{n-1}, cavity)` and tensor
//! products are taken left to right, so the cavity index runs fastest. For the
//! three-spin NV model the spins are the hyperfine lines m_I = −1, 0, +1 in
//! that order.
//!
//! Two-level basis: index 0 is the ground state, index 1 the excited state,
//! and σ^z = diag(−1, +1). An optically polarized ensemble therefore has
//! ⟨σ^z⟩ ≈ −1.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    spin_count: usize,
    fock_dim: usize,
}

impl HilbertLayout {
    pub fn new(spin_count: usize, fock_dim: usize) -> Result<Self> {
        if spin_count < 1 {
            return Err(Error::InvalidDimension(format!(
                "spin_count must be at least 1, got {spin_count}"
            )));
        }
        if fock_dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "fock_dim must be at least 2, got {fock_dim}"
            )));
        }
        Ok(Self { spin_count, fock_dim })
    }

    pub fn spin_count(&self) -> usize {
        self.spin_count
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn total_dim(&self) -> usize {
        (1usize << self.spin_count) * self.fock_dim
    }

    pub fn subsystem_count(&self) -> usize {
        self.spin_count + 1
    }

    /// Index of the cavity subsystem.
    pub fn cavity(&self) -> usize {
        self.spin_count
    }

    pub fn subsystem_dim(&self, index: usize) -> Result<usize> {
        match index {
            i if i < self.spin_count => Ok(2),
            i if i == self.spin_count => Ok(self.fock_dim),
            _ => Err(Error::IndexOutOfRange {
                index,
                count: self.subsystem_count(),
            }),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![2; self.spin_count];
        d.push(self.fock_dim);
        d
    }

    /// Same spins, different photon truncation.
    pub fn with_fock_dim(&self, fock_dim: usize) -> Result<Self> {
        Self::new(self.spin_count, fock_dim)
    }
}

impl Default for HilbertLayout {
    fn default() -> Self {
        Self {
            spin_count: 3,
            fock_dim: 10,
        }
    }
}

/// A square complex matrix acting on some Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: Array2<C64>,
}

impl Operator {
    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: Array2::eye(dim) }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Array2::zeros((entries.len(), entries.len()));
        for (i, &e) in entries.iter().enumerate() {
            m[[i, i]] = C64::new(e, 0.0);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[[row, col]]
    }

    pub fn dagger(&self) -> Self {
        Self {
            m: self.m.t().mapv(|z| z.conj()),
        }
    }

    pub fn scale(&self, s: impl Into<C64>) -> Self {
        let s = s.into();
        Self {
            m: self.m.mapv(|z| z * s),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.diag().sum()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// max |A − A†| entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.m[[i, j]] - self.m[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        check_same_dim(self, other)?;
        Ok(Operator {
            m: self.m.dot(&other.m) - other.m.dot(&self.m),
        })
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        check_same_dim(self, other)?;
        Ok(self * other)
    }

    /// Iterator over the structurally nonzero entries `(row, col, value)`.
    pub(crate) fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        self.m
            .indexed_iter()
            .filter(|(_, z)| **z != ZERO)
            .map(|((r, c), z)| (r, c, *z))
            .collect()
    }
}

fn check_same_dim(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m - &rhs.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { m: self.m.dot(&rhs.m) }
    }
}

/// Truncated bosonic annihilation operator, a[m, m+1] = √(m+1).
pub fn annihilation(fock_dim: usize) -> Result<Operator> {
    if fock_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "fock_dim must be at least 2, got {fock_dim}"
        )));
    }
    let mut m = Array2::zeros((fock_dim, fock_dim));
    for k in 0..fock_dim - 1 {
        m[[k, k + 1]] = C64::new(((k + 1) as f64).sqrt(), 0.0);
    }
    Ok(Operator { m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    Plus,
    Minus,
    Z,
}

pub fn pauli(which: Pauli) -> Operator {
    let mut m = Array2::zeros((2, 2));
    match which {
        Pauli::Minus => m[[0, 1]] = ONE,
        Pauli::Plus => m[[1, 0]] = ONE,
        Pauli::Z => {
            m[[0, 0]] = -ONE;
            m[[1, 1]] = ONE;
        }
    }
    Operator { m }
}

/// Lifts a local operator onto `layout`, acting as identity on every other
/// subsystem.
pub fn embed(op: &Operator, subsystem_index: usize, layout: &HilbertLayout) -> Result<Operator> {
    let local = layout.subsystem_dim(subsystem_index)?;
    if op.dim() != local {
        return Err(Error::DimensionMismatch {
            expected: local,
            got: op.dim(),
        });
    }
    let dims = layout.dims();
    let left: usize = dims[..subsystem_index].iter().product();
    let right: usize = dims[subsystem_index + 1..].iter().product();
    let total = layout.total_dim();
    let mut m = Array2::zeros((total, total));
    for (r, c, z) in op.nonzeros() {
        for l in 0..left {
            for k in 0..right {
                m[[(l * local + r) * right + k, (l * local + c) * right + k]] = z;
            }
        }
    }
    Ok(Operator { m })
}

/// Column-stacked vec(M) of any square matrix.
pub fn column_stack(m: &Array2<C64>) -> Vec<C64> {
    m.t().iter().copied().collect()
}

/// Density matrix with trace, Hermiticity and positivity checked on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(m: Array2<C64>) -> Result<Self> {
        let rho = Self { m };
        rho.validate()?;
        Ok(rho)
    }

    /// Pure state |ψ⟩⟨ψ| (normalized here).
    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let n = psi.len();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Self::new(m)
    }

    /// |index⟩⟨index| in the computational basis.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, count: dim });
        }
        let mut m = Array2::zeros((dim, dim));
        m[[index, index]] = ONE;
        Ok(Self { m })
    }

    /// Rebuilds from a column-stacked vector, Hermitizing and normalizing the
    /// trace before validation.
    pub fn from_column_stacked(v: &[C64], dim: usize) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: v.len(),
            });
        }
        let raw = Array2::from_shape_vec((dim, dim).f(), v.to_vec()).expect("length checked above");
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[[i, j]] = 0.5 * (raw[[i, j]] + raw[[j, i]].conj());
            }
        }
        let tr = m.diag().sum();
        if tr.norm() < 1e-300 {
            return Err(Error::InvalidDensityMatrix("vanishing trace".into()));
        }
        m.mapv_inplace(|z| z / tr);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn as_operator(&self) -> Operator {
        Operator { m: self.m.clone() }
    }

    /// Column-stacked vec(ρ).
    pub fn to_column_stacked(&self) -> Vec<C64> {
        column_stack(&self.m)
    }

    pub fn trace(&self) -> C64 {
        self.m.diag().sum()
    }

    /// Tr(A ρ).
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.dim(),
            });
        }
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += op.m[[i, k]] * self.m[[k, i]];
            }
        }
        Ok(acc)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.m.eigvalsh(UPLO::Lower)?.to_vec())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    fn validate(&self) -> Result<()> {
        if self.m.nrows() != self.m.ncols() {
            return Err(Error::InvalidDimension("density matrix must be square".into()));
        }
        if self.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = Operator { m: self.m.clone() }.hermiticity_defect();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation { min_eigenvalue: min });
        }
        Ok(())
    }
}
