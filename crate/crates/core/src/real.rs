use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type used by the network kernel.
///
/// `f32` is the training precision; `f64` backs the gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Tag stored in checkpoint headers.
    const DTYPE: u8;
    const BYTES: usize;

    fn from_single(v: f32) -> Self;
    fn from_f64_lossy(v: f64) -> Self;
    fn to_le_vec(v: Self, out: &mut Vec<u8>);
    fn from_le_slice(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const DTYPE: u8 = 1;
    const BYTES: usize = 4;

    fn from_single(v: f32) -> Self {
        v
    }
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn to_le_vec(v: Self, out: &mut Vec<u8>) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte slice"))
    }
}

impl Real for f64 {
    const DTYPE: u8 = 2;
    const BYTES: usize = 8;

    fn from_single(v: f32) -> Self {
        v as f64
    }
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn to_le_vec(v: Self, out: &mut Vec<u8>) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
    }
}
