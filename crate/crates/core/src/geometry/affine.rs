//! Exact affine-map oracle for operator pipelines.
//!
//! Test-only in spirit (matrices are d x d, so small d only), but shipped in
//! the library so the equivalence checks and the symbolic variant-lowering
//! tests can share it.

use crate::error::{Error, Result};

use super::atom::{AtomKind, OpAtom};

/// `y = M x + b` over f64, with `M` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    d: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn identity(d: usize) -> Self {
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        AffineMap {
            d,
            matrix,
            offset: vec![0.0; d],
        }
    }

    /// Materialize a single atom as an affine map.
    pub fn from_atom(kind: AtomKind, params: &[f64], d: usize) -> Result<Self> {
        if kind == AtomKind::Rotate && d % 2 != 0 {
            return Err(Error::OddRotationDim { d });
        }
        let expected = kind.param_len(d);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "affine atom parameter row",
                expected,
                got: params.len(),
            });
        }
        let mut map = AffineMap::identity(d);
        match kind {
            AtomKind::Translate => map.offset.copy_from_slice(params),
            AtomKind::Scale => {
                for i in 0..d {
                    map.matrix[i * d + i] = params[i];
                }
            }
            AtomKind::Rotate => {
                for (i, theta) in params.iter().enumerate() {
                    let (sin, cos) = theta.sin_cos();
                    let r = 2 * i;
                    map.matrix[r * d + r] = cos;
                    map.matrix[r * d + r + 1] = -sin;
                    map.matrix[(r + 1) * d + r] = sin;
                    map.matrix[(r + 1) * d + r + 1] = cos;
                }
            }
        }
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// The map applying `self` first and `next` second:
    /// `x ↦ M_next (M_self x + b_self) + b_next`.
    pub fn then(&self, next: &AffineMap) -> AffineMap {
        assert_eq!(self.d, next.d, "composing maps of different dimension");
        let d = self.d;
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = next.matrix[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    matrix[i * d + j] += a * self.matrix[k * d + j];
                }
            }
        }
        let mut offset = next.offset.clone();
        for i in 0..d {
            for k in 0..d {
                offset[i] += next.matrix[i * d + k] * self.offset[k];
            }
        }
        AffineMap { d, matrix, offset }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d);
        let d = self.d;
        let mut y = self.offset.clone();
        for i in 0..d {
            let row = &self.matrix[i * d..(i + 1) * d];
            let mut acc = 0.0;
            for j in 0..d {
                acc += row[j] * x[j];
            }
            y[i] += acc;
        }
        y
    }

    /// Max absolute entrywise difference over matrix and offset.
    pub fn max_abs_diff(&self, other: &AffineMap) -> f64 {
        let m = self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let o = self
            .offset
            .iter()
            .zip(&other.offset)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        m.max(o)
    }
}

/// Compose a bound atom sequence (application order) into one exact affine
/// map. Applying the result to any x must agree with the vectorized
/// pipeline application of the same rows.
pub fn affine_oracle(atoms: &[OpAtom], fused_rows: &[Vec<f64>], d: usize) -> Result<AffineMap> {
    if atoms.len() != fused_rows.len() {
        return Err(Error::DimensionMismatch {
            context: "oracle rows vs atoms",
            expected: atoms.len(),
            got: fused_rows.len(),
        });
    }
    let mut acc = AffineMap::identity(d);
    for (atom, row) in atoms.iter().zip(fused_rows) {
        let m = AffineMap::from_atom(atom.kind, row, d)?;
        acc = acc.then(&m);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::atom::OpAtom;

    #[test]
    fn identity_oracle() {
        let m = affine_oracle(&[], &[], 3).unwrap();
        assert_eq!(m, AffineMap::identity(3));
    }

    #[test]
    fn single_scale_is_diagonal() {
        let m = affine_oracle(
            &[OpAtom::relation(AtomKind::Scale)],
            &[vec![2.0, 3.0]],
            2,
        )
        .unwrap();
        assert_eq!(m.matrix(), &[2.0, 0.0, 0.0, 3.0]);
        assert_eq!(m.offset(), &[0.0, 0.0]);
    }

    #[test]
    fn scale_atom_agrees_with_matrix_product() {
        // diag(2,3) * (1,1) = (2,3)
        let m = AffineMap::from_atom(AtomKind::Scale, &[2.0, 3.0], 2).unwrap();
        assert_eq!(m.apply(&[1.0, 1.0]), vec![2.0, 3.0]);
    }

    #[test]
    fn translate_then_scale_composition() {
        // x=0 -> translate by 1 -> scale by 2 => 2
        let t = AffineMap::from_atom(AtomKind::Translate, &[1.0, 1.0], 2).unwrap();
        let s = AffineMap::from_atom(AtomKind::Scale, &[2.0, 2.0], 2).unwrap();
        let both = t.then(&s);
        assert_eq!(both.apply(&[0.0, 0.0]), vec![2.0, 2.0]);
        // reversed order gives 1
        let rev = s.then(&t);
        assert_eq!(rev.apply(&[0.0, 0.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn rotation_block_structure() {
        // first pair turned a quarter, second pair a half turn
        let m = AffineMap::from_atom(
            AtomKind::Rotate,
            &[std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
            4,
        )
        .unwrap();
        let y = m.apply(&[1.0, 0.0, 1.0, 2.0]);
        let expect = [0.0, 1.0, -1.0, -2.0];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn rotation_needs_angle_per_pair() {
        let err = AffineMap::from_atom(AtomKind::Rotate, &[0.5], 4).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
