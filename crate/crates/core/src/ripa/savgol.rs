//! Savitzky-Golay least-squares convolution kernels.
//!
//! Fitting a degree-`n` polynomial to `2m + 1` samples at offsets
//! `tau = -m..=m` and evaluating it (or its `r`-th derivative) at the centre is
//! linear in the samples. The weights follow from the normal equations
//! `G c = e_r`, `G[i][j] = sum_tau tau^(i+j)`, as
//! `w_tau = r! * sum_k c_k tau^k / dt^r`.
//!
//! Construction only needs field arithmetic, so kernels can be built exactly
//! over rationals and cast to floats afterwards.

use thiserror::Error;

use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("polynomial order {order} exceeds 2m = {}", 2 * half_width)]
    OrderTooHigh { order: usize, half_width: usize },
    #[error("derivative order {derivative} exceeds polynomial order {order}")]
    DerivativeTooHigh { derivative: usize, order: usize },
    #[error("sample spacing must be positive")]
    NonPositiveSpacing,
    #[error("normal equations are singular")]
    Singular,
    #[error("signal of length {len} is shorter than the kernel ({needed})")]
    SignalTooShort { len: usize, needed: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgKernel<T> {
    half_width: usize,
    order: usize,
    derivative: usize,
    dt: T,
    weights: Vec<T>,
}

impl<T: Field> SgKernel<T> {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn derivative(&self) -> usize {
        self.derivative
    }

    pub fn dt(&self) -> &T {
        &self.dt
    }

    /// Weights for offsets `-m..=m`, in order.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Valid-region convolution. Output `j` is centred on input `j + m`; no
    /// padding, so the output has `len - 2m` samples.
    pub fn apply(&self, signal: &[T]) -> Result<Vec<T>, KernelError> {
        if signal.len() < self.weights.len() {
            return Err(KernelError::SignalTooShort { len: signal.len(), needed: self.weights.len() });
        }
        Ok(signal
            .windows(self.weights.len())
            .map(|win| {
                win.iter()
                    .zip(&self.weights)
                    .fold(T::zero(), |acc, (x, w)| acc + x.clone() * w.clone())
            })
            .collect())
    }

    /// Converts weights into another numeric type, e.g. exact rationals to `f64`.
    pub fn map<U: Field>(&self, f: impl Fn(&T) -> U) -> SgKernel<U> {
        SgKernel {
            half_width: self.half_width,
            order: self.order,
            derivative: self.derivative,
            dt: f(&self.dt),
            weights: self.weights.iter().map(f).collect(),
        }
    }
}

fn power<T: Field>(base: &T, exp: usize) -> T {
    (0..exp).fold(T::one(), |acc, _| acc * base.clone())
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve<T: Field>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>, KernelError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("ordered"))
            .expect("non-empty");
        if a[pivot][col].is_zero() {
            return Err(KernelError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].clone() / a[col][col].clone();
            if factor.is_zero() {
                continue;
            }
            #[allow(clippy::needless_range_loop)]
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[row] = b[row].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let tail = (row + 1..n).fold(T::zero(), |acc, k| acc + a[row][k].clone() * x[k].clone());
        x[row] = (b[row].clone() - tail) / a[row][row].clone();
    }
    Ok(x)
}

/// Builds the kernel for half-width `m`, polynomial order `n`, derivative
/// order `r` and sample spacing `dt`.
pub fn sg_kernel<T: Field>(m: usize, n: usize, r: usize, dt: T) -> Result<SgKernel<T>, KernelError> {
    if n > 2 * m {
        return Err(KernelError::OrderTooHigh { order: n, half_width: m });
    }
    if r > n {
        return Err(KernelError::DerivativeTooHigh { derivative: r, order: n });
    }
    if dt <= T::zero() {
        return Err(KernelError::NonPositiveSpacing);
    }
    let offsets: Vec<T> = (-(m as i64)..=m as i64).map(T::from_int).collect();
    let moment: Vec<T> = (0..=2 * n)
        .map(|p| offsets.iter().fold(T::zero(), |acc, tau| acc + power(tau, p)))
        .collect();
    let gram: Vec<Vec<T>> = (0..=n).map(|i| (0..=n).map(|j| moment[i + j].clone()).collect()).collect();
    let mut rhs = vec![T::zero(); n + 1];
    rhs[r] = T::one();
    let coeffs = solve(gram, rhs)?;

    let factorial = (1..=r as i64).fold(T::one(), |acc, k| acc * T::from_int(k));
    let scale = factorial / power(&dt, r);
    let weights = offsets
        .iter()
        .map(|tau| {
            let poly = coeffs
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (k, c)| acc + c.clone() * power(tau, k));
            poly * scale.clone()
        })
        .collect();
    Ok(SgKernel { half_width: m, order: n, derivative: r, dt, weights })
}
