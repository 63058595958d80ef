//! Isometry between symmetric `d × d` matrices and vectors of length
//! `D = d(d+1)/2`.
//!
//! Slot `(a, b)` with `a ≤ b` holds `sqrt(2 - δ_ab) A_ab`, so the Frobenius
//! product of two symmetric matrices equals the dot product of their images.
//! Slots are laid out row by row over the upper triangle.

use nalgebra::{DMatrix, DVector};

use crate::error::SimError;

/// Relative tolerance used when checking symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VecIndex {
    dim: usize,
}

impl VecIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// Side `d` of the matrices.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length `D` of the vectors.
    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    /// Slot of the pair `(a, b)`, in either order.
    pub fn slot(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * self.dim - a * (a + 1) / 2 + b
    }

    pub fn vec(&self, m: &DMatrix<f64>) -> Result<DVector<f64>, SimError> {
        check_symmetric(m, self.dim)?;
        Ok(self.vec_unchecked(m))
    }

    /// `vec` reading only the upper triangle.
    pub fn vec_unchecked(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        self.pack_into(m, out.as_mut_slice());
        out
    }

    pub(crate) fn pack_into(&self, m: &DMatrix<f64>, out: &mut [f64]) {
        let mut k = 0;
        for a in 0..self.dim {
            out[k] = m[(a, a)];
            k += 1;
            for b in a + 1..self.dim {
                out[k] = core::f64::consts::SQRT_2 * m[(a, b)];
                k += 1;
            }
        }
    }

    pub fn mat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>, SimError> {
        if v.len() != self.len() {
            return Err(SimError::Shape {
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(self.unpack(v.as_slice()))
    }

    pub(crate) fn unpack(&self, v: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        let mut k = 0;
        for a in 0..d {
            m[(a, a)] = v[k];
            k += 1;
            for b in a + 1..d {
                let x = v[k] / core::f64::consts::SQRT_2;
                m[(a, b)] = x;
                m[(b, a)] = x;
                k += 1;
            }
        }
        m
    }
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>, dim: usize) -> Result<(), SimError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(SimError::Shape {
            expected: dim * dim,
            found: m.len(),
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for a in 0..dim {
        for b in a + 1..dim {
            if (m[(a, b)] - m[(b, a)]).abs() > SYMMETRY_TOL * scale {
                return Err(SimError::NotSymmetric { row: a, col: b });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_diagonal_slots() {
        let idx = VecIndex::new(3);
        let v = idx.vec(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(v.len(), 6);
        let ones: Vec<usize> = (0..3).map(|a| idx.slot(a, a)).collect();
        for (k, x) in v.iter().enumerate() {
            assert_eq!(*x, if ones.contains(&k) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn slots_follow_the_upper_triangle() {
        let idx = VecIndex::new(4);
        let mut k = 0;
        for a in 0..4 {
            for b in a..4 {
                assert_eq!(idx.slot(a, b), k);
                assert_eq!(idx.slot(b, a), k);
                k += 1;
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 2)] = 1.0;
        assert!(matches!(
            VecIndex::new(3).vec(&m),
            Err(SimError::NotSymmetric { row: 0, col: 2 })
        ));
    }
}
