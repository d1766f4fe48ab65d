//! Shifted solves (L + sI) y = b for many shifts s.
//!
//! L is reduced once to upper Hessenberg form L = Q H Q†. Each shift then
//! costs O(n²): the shifted Hessenberg matrix is factored as R·G† with R upper
//! triangular and G a product of n − 1 Givens rotations, generated column by
//! column from the right so that only O(n) extra storage is needed.

use std::os::raw::{c_char, c_int};

use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::master::Liouvillian;
use crate::ops::ZERO;

/// Pivots below this multiple of ε‖H‖_F are treated as exact zeros.
const PIVOT_EPS_FACTOR: f64 = 64.0;

/// Relative residual accepted after a zero pivot was skipped.
const SINGULAR_RESIDUAL_TOL: f64 = 1e-6;

pub struct HessenbergResolvent {
    n: usize,
    // Column-major. H on and above the first subdiagonal, Householder
    // vectors below it.
    packed: Array2<C64>,
    tau: Vec<C64>,
    frobenius: f64,
}

impl std::fmt::Debug for HessenbergResolvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HessenbergResolvent")
            .field("n", &self.n)
            .field("frobenius", &self.frobenius)
            .finish()
    }
}

fn lapack_info(routine: &str, info: c_int) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::InvalidDimension(format!("{routine} failed with info = {info}")))
    }
}

impl HessenbergResolvent {
    pub fn new(l: &Liouvillian) -> Result<Self> {
        Self::from_matrix(l.superop())
    }

    pub fn from_matrix(m: &Array2<C64>) -> Result<Self> {
        let (rows, cols) = m.dim();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidDimension(format!(
                "resolvent needs a non-empty square matrix, got {rows}x{cols}"
            )));
        }
        let n = rows;
        let mut packed = Array2::<C64>::zeros((n, n).f());
        packed.assign(m);
        let mut tau = vec![ZERO; n.saturating_sub(1).max(1)];
        let ni = n as c_int;
        let one: c_int = 1;
        let mut info: c_int = 0;
        let mut query = ZERO;
        let a = packed.as_slice_memory_order_mut().expect("column-major buffer");
        unsafe {
            lapack_sys::zgehrd_(
                &ni,
                &one,
                &ni,
                a.as_mut_ptr().cast(),
                &ni,
                tau.as_mut_ptr().cast(),
                (&mut query as *mut C64).cast(),
                &-1,
                &mut info,
            );
        }
        lapack_info("zgehrd", info)?;
        let lwork = (query.re as usize).max(1);
        let mut work = vec![ZERO; lwork];
        let lw = lwork as c_int;
        unsafe {
            lapack_sys::zgehrd_(
                &ni,
                &one,
                &ni,
                a.as_mut_ptr().cast(),
                &ni,
                tau.as_mut_ptr().cast(),
                work.as_mut_ptr().cast(),
                &lw,
                &mut info,
            );
        }
        lapack_info("zgehrd", info)?;
        let mut res = Self {
            n,
            packed,
            tau,
            frobenius: 0.0,
        };
        let mut f = 0.0;
        for j in 0..n {
            for i in 0..=(j + 1).min(n - 1) {
                f += res.h(i, j).norm_sqr();
            }
        }
        res.frobenius = f.sqrt();
        Ok(res)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn h(&self, i: usize, j: usize) -> C64 {
        self.packed[[i, j]]
    }

    /// The Hessenberg factor as a dense matrix.
    pub fn hessenberg(&self) -> Array2<C64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(i, j)| if i <= j + 1 { self.h(i, j) } else { ZERO })
    }

    fn apply_q(&self, v: &[C64], trans: u8) -> Result<Vec<C64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut c = v.to_vec();
        if self.n == 1 {
            return Ok(c);
        }
        let ni = self.n as c_int;
        let one: c_int = 1;
        let side = b'L' as c_char;
        let trans = trans as c_char;
        let mut info: c_int = 0;
        let mut work = vec![ZERO; 1];
        let a = self.packed.as_slice_memory_order().expect("column-major buffer");
        unsafe {
            lapack_sys::zunmhr_(
                &side,
                &trans,
                &ni,
                &one,
                &one,
                &ni,
                a.as_ptr().cast(),
                &ni,
                self.tau.as_ptr().cast(),
                c.as_mut_ptr().cast(),
                &ni,
                work.as_mut_ptr().cast(),
                &one,
                &mut info,
            );
        }
        lapack_info("zunmhr", info)?;
        Ok(c)
    }

    /// Q† v.
    pub fn to_hessenberg(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.apply_q(v, b'C')
    }

    /// Q v.
    pub fn from_hessenberg(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.apply_q(v, b'N')
    }

    /// Solves (H + shift·I) y = rhs in Hessenberg coordinates. Pivots that
    /// vanish to working precision are skipped, leaving the corresponding
    /// component zero; `ShiftedSolve::skipped` records how many.
    pub fn solve_shifted(&self, shift: C64, rhs: &[C64]) -> Result<ShiftedSolve> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let tiny = PIVOT_EPS_FACTOR * f64::EPSILON * self.frobenius.max(shift.norm()).max(f64::MIN_POSITIVE);
        let mut b = rhs.to_vec();
        let mut z = vec![ZERO; n];
        let mut rot_c = vec![ZERO; n];
        let mut rot_s = vec![ZERO; n];
        let mut skipped = 0;
        // carried column, rows 0..=k
        let mut w: Vec<C64> = (0..n).map(|i| self.h(i, n - 1)).collect();
        w[n - 1] += shift;
        let mut rcol = vec![ZERO; n];
        for k in (1..n).rev() {
            let x = w[k];
            let y = self.h(k, k - 1);
            let r = x.norm().hypot(y.norm());
            let (cx, cy) = if r == 0.0 {
                (C64::new(1.0, 0.0), ZERO)
            } else {
                (x / r, y / r)
            };
            rot_c[k] = cx;
            rot_s[k] = cy;
            // column k − 1 of H + shift·I, rows 0..=k
            for i in 0..=k {
                let mut c1 = self.h(i, k - 1);
                if i == k - 1 {
                    c1 += shift;
                }
                rcol[i] = cx.conj() * w[i] + cy.conj() * c1;
                w[i] = -cy * w[i] + cx * c1;
            }
            let zk = if r <= tiny {
                skipped += 1;
                ZERO
            } else {
                b[k] / r
            };
            z[k] = zk;
            if zk != ZERO {
                for i in 0..k {
                    b[i] -= zk * rcol[i];
                }
            }
        }
        z[0] = if w[0].norm() <= tiny {
            skipped += 1;
            ZERO
        } else {
            b[0] / w[0]
        };
        for k in 1..n {
            let (cx, cy) = (rot_c[k], rot_s[k]);
            let (zk, zk1) = (z[k], z[k - 1]);
            z[k] = cx.conj() * zk - cy * zk1;
            z[k - 1] = cy.conj() * zk + cx * zk1;
        }
        Ok(ShiftedSolve { y: z, skipped })
    }

    /// ‖(H + shift·I) y − rhs‖ / ‖rhs‖, in Hessenberg coordinates.
    pub fn relative_residual(&self, shift: C64, y: &[C64], rhs: &[C64]) -> f64 {
        let n = self.n;
        let mut r: Vec<C64> = rhs.iter().map(|v| -v).collect();
        for j in 0..n {
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for (i, ri) in r.iter_mut().enumerate().take((j + 2).min(n)) {
                *ri += self.h(i, j) * yj;
            }
            r[j] += shift * yj;
        }
        let num = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let den = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedSolve {
    pub y: Vec<C64>,
    pub skipped: usize,
}

/// Solves (L + iω) y = b for traceless b, fixing the kernel component by
/// Tr y = 0. Both the trace functional and the stationary state are passed
/// in Hessenberg coordinates.
#[derive(Debug)]
pub struct TracelessResolvent {
    engine: HessenbergResolvent,
    // Q† vec(I)
    trace_functional: Vec<C64>,
    // Q† vec(ρ_ss)
    stationary: Vec<C64>,
}

impl TracelessResolvent {
    pub fn new(engine: HessenbergResolvent, identity: &[C64], stationary: &[C64]) -> Result<Self> {
        let trace_functional = engine.to_hessenberg(identity)?;
        let stationary = engine.to_hessenberg(stationary)?;
        Ok(Self {
            engine,
            trace_functional,
            stationary,
        })
    }

    pub fn engine(&self) -> &HessenbergResolvent {
        &self.engine
    }

    /// `rhs` is in Hessenberg coordinates; so is the result.
    pub fn solve(&self, omega: f64, rhs: &[C64]) -> Result<Vec<C64>> {
        let shift = C64::new(0.0, omega);
        let ShiftedSolve { mut y, skipped } = self.engine.solve_shifted(shift, rhs)?;
        // Tr y = vec(I)† Q y = (Q† vec(I))† y
        let tr: C64 = self.trace_functional.iter().zip(&y).map(|(t, v)| t.conj() * v).sum();
        for (yi, ki) in y.iter_mut().zip(&self.stationary) {
            *yi -= tr * ki;
        }
        if skipped > 0 && self.engine.relative_residual(shift, &y, rhs) > SINGULAR_RESIDUAL_TOL {
            return Err(Error::Pole { omega });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Pole { omega });
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use ndarray_linalg::Solve;

    fn test_matrix(n: usize, seed: u64) -> Array2<C64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        Array2::from_shape_fn((n, n), |_| C64::new(next(), next()))
    }

    #[test]
    fn similarity_is_exact() {
        let m = test_matrix(12, 3);
        let r = HessenbergResolvent::from_matrix(&m).unwrap();
        let h = r.hessenberg();
        // Q H Q† e_j should equal column j of m
        for j in 0..12 {
            let mut e = vec![ZERO; 12];
            e[j] = C64::new(1.0, 0.0);
            let qe = r.to_hessenberg(&e).unwrap();
            let hq = h.dot(&Array1::from(qe)).to_vec();
            let col = r.from_hessenberg(&hq).unwrap();
            for i in 0..12 {
                assert!((col[i] - m[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_solve_matches_dense_lu() {
        for seed in 0..5 {
            let n = 17;
            let m = test_matrix(n, seed);
            let r = HessenbergResolvent::from_matrix(&m).unwrap();
            let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64 * 0.3)).collect();
            for omega in [-3.0, 0.1, 2.5] {
                let shift = C64::new(0.0, omega);
                let bh = r.to_hessenberg(&b).unwrap();
                let sol = r.solve_shifted(shift, &bh).unwrap();
                assert_eq!(sol.skipped, 0);
                let y = r.from_hessenberg(&sol.y).unwrap();
                let mut shifted = m.clone();
                for i in 0..n {
                    shifted[[i, i]] += shift;
                }
                let reference = shifted.solve(&Array1::from(b.clone())).unwrap();
                for i in 0..n {
                    assert!((y[i] - reference[i]).norm() < 1e-10 * (1.0 + reference[i].norm()));
                }
            }
        }
    }

    #[test]
    fn one_by_one() {
        let m = Array2::from_elem((1, 1), C64::new(2.0, 0.0));
        let r = HessenbergResolvent::from_matrix(&m).unwrap();
        let s = r.solve_shifted(C64::new(0.0, 1.0), &[C64::new(2.0, 1.0)]).unwrap();
        assert!((s.y[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
