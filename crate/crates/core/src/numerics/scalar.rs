use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Real scalar the network math is written against.
///
/// Training runs in `f32`; gradient checking runs the same code in `f64`.
/// The only thing a scalar has to bring beyond `num_traits::Float` is a
/// dense GEMM kernel.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Bit width of the type, recorded in logs.
    const BITS: u32;

    /// `c = alpha * a·b + beta * c` on row-major buffers.
    ///
    /// `a` is `m×k` with row stride `rsa`, `b` is `k×n` with row stride
    /// `rsb`; column strides are passed separately so transposed views need
    /// no copies.
    ///
    /// # Safety
    ///
    /// Every pointer must be valid for every element the shapes and strides
    /// address, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64_lossy(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    const BITS: u32 = 32;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn from_f64_lossy(x: f64) -> f32 {
        x as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BITS: u32 = 64;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn from_f64_lossy(x: f64) -> f64 {
        x
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for literal constants inside generic code.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x)
}
