//! Gaussian (RBF) kernel with an evaluation counter.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!("kernel gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Count of scalar kernel evaluations. Only ever increases.
#[derive(Debug, Default)]
pub struct KernelCounter(AtomicU64);

impl KernelCounter {
    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }
}

/// `exp(-gamma * |a - b|^2)`, squared distance accumulated in index order.
///
/// `(a_i - b_i)^2 == (b_i - a_i)^2` exactly, so the result is symmetric bit for bit.
#[inline]
pub fn gaussian(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

#[derive(Debug)]
pub struct Kernel {
    params: KernelParams,
    counter: KernelCounter,
}

impl Kernel {
    pub fn new(params: KernelParams) -> Self {
        Self { params, counter: KernelCounter::default() }
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn counter(&self) -> &KernelCounter {
        &self.counter
    }

    /// Evaluations performed so far through this kernel.
    pub fn evals(&self) -> u64 {
        self.counter.get()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!("kernel inputs of dimension {} and {}", a.len(), b.len())));
        }
        self.counter.add(1);
        Ok(gaussian(a, b, self.params.gamma))
    }

    /// Fills `out[j] = kernel(x, b_j)`; costs `b.rows()` evaluations.
    pub fn row_into(&self, x: &[f64], b: &Matrix, out: &mut [f64]) -> Result<()> {
        if x.len() != b.cols() || out.len() != b.rows() {
            return Err(Error::Shape(format!(
                "kernel row of {} features against {}x{} into {} slots",
                x.len(),
                b.rows(),
                b.cols(),
                out.len()
            )));
        }
        for (j, v) in out.iter_mut().enumerate() {
            *v = gaussian(x, b.row(j), self.params.gamma);
        }
        self.counter.add(b.rows() as u64);
        Ok(())
    }

    /// Entry `(i, j)` is `kernel(a_i, b_j)`; costs `a.rows() * b.rows()` evaluations.
    pub fn matrix(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.cols() != b.cols() {
            return Err(Error::Shape(format!("kernel matrix inputs with {} and {} features", a.cols(), b.cols())));
        }
        let mut out = Matrix::zeros(a.rows(), b.rows());
        for i in 0..a.rows() {
            let ai = a.row(i);
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = gaussian(ai, b.row(j), self.params.gamma);
            }
        }
        self.counter.add((a.rows() * b.rows()) as u64);
        Ok(out)
    }
}
