//! Operator atoms and their vectorized actions.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The three supported geometric operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomKind {
    /// `y = x + t`, parameter row of length d.
    Translate,
    /// `y = s ⊙ x`, parameter row of length d.
    Scale,
    /// Rotates each coordinate pair `(x[2i], x[2i+1])` by angle `θ[i]`;
    /// parameter row of length d/2 (radians). Requires even d.
    Rotate,
}

impl AtomKind {
    /// Length of this atom's parameter row at embedding dimension `d`.
    pub fn param_len(self, d: usize) -> usize {
        match self {
            AtomKind::Rotate => d / 2,
            _ => d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AtomKind::Translate => "translate",
            AtomKind::Scale => "scale",
            AtomKind::Rotate => "rotate",
        }
    }
}

/// Which parameter family an atom's row is looked up from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSource {
    Relation,
    Time,
}

/// One operator atom: an operation kind bound to a parameter family.
/// The actual row is looked up from the table identified by (kind, source).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpAtom {
    pub kind: AtomKind,
    pub source: ParamSource,
}

impl OpAtom {
    pub const fn new(kind: AtomKind, source: ParamSource) -> Self {
        OpAtom { kind, source }
    }

    pub const fn relation(kind: AtomKind) -> Self {
        OpAtom::new(kind, ParamSource::Relation)
    }

    pub const fn time(kind: AtomKind) -> Self {
        OpAtom::new(kind, ParamSource::Time)
    }
}

fn check_dims(kind: AtomKind, params: usize, x: usize) -> Result<()> {
    if kind == AtomKind::Rotate && x % 2 != 0 {
        return Err(Error::OddRotationDim { d: x });
    }
    let expected = kind.param_len(x);
    if params != expected {
        return Err(Error::DimensionMismatch {
            context: "atom parameter row",
            expected,
            got: params,
        });
    }
    Ok(())
}

/// Apply one atom to `x` in place.
pub fn apply_atom_inplace<S: Real>(kind: AtomKind, params: &[S], x: &mut [S]) -> Result<()> {
    check_dims(kind, params.len(), x.len())?;
    match kind {
        AtomKind::Translate => {
            for (xi, t) in x.iter_mut().zip(params) {
                *xi = xi.add(*t);
            }
        }
        AtomKind::Scale => {
            for (xi, s) in x.iter_mut().zip(params) {
                *xi = xi.mul(*s);
            }
        }
        AtomKind::Rotate => {
            for (i, theta) in params.iter().enumerate() {
                let (sin, cos) = theta.sin_cos();
                let a = x[2 * i];
                let b = x[2 * i + 1];
                x[2 * i] = a.mul(cos).sub(b.mul(sin));
                x[2 * i + 1] = a.mul(sin).add(b.mul(cos));
            }
        }
    }
    Ok(())
}

/// Apply one atom to `x`, returning the transformed vector.
pub fn apply_atom<S: Real>(kind: AtomKind, params: &[S], x: &[S]) -> Result<Vec<S>> {
    let mut y = x.to_vec();
    apply_atom_inplace(kind, params, &mut y)?;
    Ok(y)
}

/// Reverse-mode step for one atom: given the cotangent `dy` of the atom's
/// output, accumulate the cotangents of its input (`dx`) and of its
/// parameter row (`dparams`). `x` is the value the atom was applied to.
///
/// Cotangents are `f64` regardless of storage precision.
pub fn atom_backward<S: Real>(
    kind: AtomKind,
    params: &[S],
    x: &[S],
    dy: &[f64],
    dx: &mut [f64],
    dparams: &mut [f64],
) {
    debug_assert_eq!(x.len(), dy.len());
    debug_assert_eq!(x.len(), dx.len());
    debug_assert_eq!(params.len(), dparams.len());
    match kind {
        AtomKind::Translate => {
            for i in 0..x.len() {
                dx[i] += dy[i];
                dparams[i] += dy[i];
            }
        }
        AtomKind::Scale => {
            for i in 0..x.len() {
                dx[i] += params[i].to_f64() * dy[i];
                dparams[i] += x[i].to_f64() * dy[i];
            }
        }
        AtomKind::Rotate => {
            for (i, theta) in params.iter().enumerate() {
                let (sin, cos) = theta.to_f64().sin_cos();
                let a = x[2 * i].to_f64();
                let b = x[2 * i + 1].to_f64();
                let dy0 = dy[2 * i];
                let dy1 = dy[2 * i + 1];
                // transpose rotation carries dy back to dx
                dx[2 * i] += cos * dy0 + sin * dy1;
                dx[2 * i + 1] += -sin * dy0 + cos * dy1;
                // d/dθ rotates the input by θ + π/2
                dparams[i] += dy0 * (-sin * a - cos * b) + dy1 * (cos * a - sin * b);
            }
        }
    }
}
