//! Scalar abstraction over the floating-point element types.
//!
//! All numeric code in this crate is generic over [`Scalar`]. Training and
//! inference run in `f32`; gradient checking runs in `f64`, where central
//! finite differences are reliable.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Element type of tensors: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self;
    fn from_usize_lossy(v: usize) -> Self;
    fn to_f64_lossy(self) -> f64;
    fn to_f32_lossy(self) -> f32;

    /// Row-major GEMM: `c = alpha * a(m x k) * b(k x n) + beta * c(m x n)`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );

    /// `c(a_cols x n) = a^T * b` for row-major `a(a_rows x a_cols)` and
    /// `b(a_rows x n)`; overwrites `c`.
    fn gemm_tn(a_rows: usize, a_cols: usize, n: usize, a: &[Self], b: &[Self], c: &mut [Self]);

    /// `c(m x n) = a * b^T` for row-major `a(m x k)` and `b(n x k)`;
    /// overwrites `c`.
    fn gemm_nt(m: usize, k: usize, n: usize, a: &[Self], b: &[Self], c: &mut [Self]);
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64_lossy(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn from_usize_lossy(v: usize) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
            #[inline]
            fn to_f32_lossy(self) -> f32 {
                self as f32
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert_eq!(a.len(), m * k, "gemm: lhs length mismatch");
                assert_eq!(b.len(), k * n, "gemm: rhs length mismatch");
                assert_eq!(c.len(), m * n, "gemm: out length mismatch");
                if m == 0 || k == 0 || n == 0 {
                    return;
                }
                // Row-major strides throughout.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        k as isize,
                        1,
                        b.as_ptr(),
                        n as isize,
                        1,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }

            fn gemm_tn(
                a_rows: usize,
                a_cols: usize,
                n: usize,
                a: &[Self],
                b: &[Self],
                c: &mut [Self],
            ) {
                assert_eq!(a.len(), a_rows * a_cols, "gemm_tn: lhs length mismatch");
                assert_eq!(b.len(), a_rows * n, "gemm_tn: rhs length mismatch");
                assert_eq!(c.len(), a_cols * n, "gemm_tn: out length mismatch");
                if a_rows == 0 || a_cols == 0 || n == 0 {
                    return;
                }
                unsafe {
                    $gemm(
                        a_cols,
                        a_rows,
                        n,
                        1.0,
                        a.as_ptr(),
                        1,
                        a_cols as isize,
                        b.as_ptr(),
                        n as isize,
                        1,
                        0.0,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }

            fn gemm_nt(m: usize, k: usize, n: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
                assert_eq!(a.len(), m * k, "gemm_nt: lhs length mismatch");
                assert_eq!(b.len(), n * k, "gemm_nt: rhs length mismatch");
                assert_eq!(c.len(), m * n, "gemm_nt: out length mismatch");
                if m == 0 || k == 0 || n == 0 {
                    return;
                }
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        k as isize,
                        1,
                        b.as_ptr(),
                        1,
                        k as isize,
                        0.0,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_hand_multiply() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 2, 2, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn gemm_accumulates_with_beta_one() {
        let a = [1.0f32, 0.0, 0.0, 1.0];
        let b = [2.0f32, 0.0, 0.0, 2.0];
        let mut c = [1.0f32; 4];
        f32::gemm(2, 2, 2, 1.0, &a, &b, 1.0, &mut c);
        assert_eq!(c, [3.0, 1.0, 1.0, 3.0]);
    }
}
