//! Dense row-major 2D tensors over f32 (training) or f64 (finite-difference
//! checks), with GEMM dispatched to matrixmultiply.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Element type for tapes and tensors.
pub trait Scalar:
    Copy
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maxv(self, o: Self) -> Self;
    fn is_finite(self) -> bool;

    /// C = alpha * A * B + beta * C with explicit strides (row, col).
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
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
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn abs(self) -> Self {
                self.abs()
            }
            fn maxv(self, o: Self) -> Self {
                self.max(o)
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            unsafe fn gemm(
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
            ) {
                $gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Tensor<S> {
        Tensor {
            rows,
            cols,
            data: vec![S::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Tensor<S> {
        assert_eq!(data.len(), rows * cols);
        Tensor { rows, cols, data }
    }

    pub fn from_rows2(rows: &[[f64; 2]]) -> Tensor<S> {
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| S::from_f64(v)))
            .collect();
        Tensor {
            rows: rows.len(),
            cols: 2,
            data,
        }
    }

    pub fn from_rows3(rows: &[[f64; 3]]) -> Tensor<S> {
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| S::from_f64(v)))
            .collect();
        Tensor {
            rows: rows.len(),
            cols: 3,
            data,
        }
    }

    pub fn from_f64_slice(rows: usize, cols: usize, data: &[f64]) -> Tensor<S> {
        assert_eq!(data.len(), rows * cols);
        Tensor {
            rows,
            cols,
            data: data.iter().map(|&v| S::from_f64(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scalar(&self) -> S {
        debug_assert_eq!(self.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }

    /// C = A * B (optionally transposing either side), accumulating when
    /// `beta` is one.
    pub fn matmul_into(a: &Tensor<S>, ta: bool, b: &Tensor<S>, tb: bool, beta: S, out: &mut Tensor<S>) {
        let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
        let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
        assert_eq!(k, kb, "inner dims");
        assert_eq!(out.rows, m);
        assert_eq!(out.cols, n);
        let (rsa, csa) = if ta {
            (1isize, a.cols as isize)
        } else {
            (a.cols as isize, 1isize)
        };
        let (rsb, csb) = if tb {
            (1isize, b.cols as isize)
        } else {
            (b.cols as isize, 1isize)
        };
        unsafe {
            S::gemm(
                m,
                k,
                n,
                S::ONE,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                beta,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::<f64>::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::<f64>::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut c = Tensor::<f64>::zeros(2, 2);
        Tensor::matmul_into(&a, false, &b, false, 0.0, &mut c);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transposed_views() {
        let a = Tensor::<f64>::from_vec(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]); // A^T of above
        let b = Tensor::<f64>::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut c = Tensor::<f64>::zeros(2, 2);
        Tensor::matmul_into(&a, true, &b, false, 0.0, &mut c);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }
}
