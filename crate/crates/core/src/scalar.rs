//! Scalar abstraction over the two supported parameter precisions.
//!
//! Parameter tables may be stored in single or double precision, but every
//! reduction (dot products, log-sum-exp, norm sums) accumulates in `f64`
//! regardless of the storage type. The `Real` trait is the small surface the
//! numeric kernels need to stay generic over both.

use std::fmt::{Debug, Display};

/// Storage precision of parameter tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected single|double)")),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::Single => write!(f, "single"),
            Precision::Double => write!(f, "double"),
        }
    }
}

/// Floating-point scalar usable as table storage.
pub trait Real:
    Copy + PartialOrd + Debug + Display + Send + Sync + Default + 'static
{
    const PRECISION: Precision;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;

    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    fn is_finite(self) -> bool;
    fn sin_cos(self) -> (Self, Self);
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v
    }
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self
    }
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    #[inline(always)]
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self as f32
    }
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline(always)]
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
}

/// Dot product accumulated in `f64` with a fixed four-lane summation order.
///
/// The lane structure is part of the determinism contract: the reduction
/// order depends only on the slice length, never on thread count.
#[inline]
pub fn dot_f64<S: Real>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j].to_f64() * b[j].to_f64();
        acc[1] += a[j + 1].to_f64() * b[j + 1].to_f64();
        acc[2] += a[j + 2].to_f64() * b[j + 2].to_f64();
        acc[3] += a[j + 3].to_f64() * b[j + 3].to_f64();
    }
    for j in chunks * 4..a.len() {
        acc[0] += a[j].to_f64() * b[j].to_f64();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Squared Euclidean distance accumulated in `f64`.
#[inline]
pub fn sq_dist_f64<S: Real>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        for k in 0..4 {
            let d = a[j + k].to_f64() - b[j + k].to_f64();
            acc[k] += d * d;
        }
    }
    for j in chunks * 4..a.len() {
        let d = a[j].to_f64() - b[j].to_f64();
        acc[0] += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Cube of the 3-norm: sum of |x_i|^3, accumulated in `f64`.
#[inline]
pub fn norm3_cubed<S: Real>(a: &[S]) -> f64 {
    let mut acc = 0.0f64;
    for v in a {
        let x = v.to_f64().abs();
        acc += x * x * x;
    }
    acc
}
