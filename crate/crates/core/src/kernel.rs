//! Mixture kernels `k(x, ϑ)`: for each `ϑ`, a density in `x`.

use std::fmt::Debug;

use crate::error::{param, Result};
use crate::scalar::Real;

pub trait Kernel<T: Real>: Send + Sync + Debug {
    /// `k(x, ϑ) ≥ 0`.
    fn density(&self, x: T, theta: T) -> T;

    /// Dominating measure of `x ↦ k(x, ϑ)`.
    fn dominating_measure(&self) -> &'static str {
        "lebesgue"
    }

    /// Whether `sup k` is finite.
    fn is_bounded(&self) -> bool {
        true
    }

    /// Scale of `x ↦ k(x, ϑ)`, used to size evaluation grids.
    fn spread(&self) -> T;
}

/// `N(x; ϑ, sd²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel<T> {
    sd: T,
    norm: T,
}

impl<T: Real> GaussianKernel<T> {
    pub fn new(sd: T) -> Result<Self> {
        if !(sd > T::zero()) || !sd.is_finite() {
            return param(format!("kernel sd must be positive, got {sd}"));
        }
        let norm = (sd * (T::lit(2.0) * T::PI()).sqrt()).recip();
        Ok(Self { sd, norm })
    }

    pub fn sd(&self) -> T {
        self.sd
    }
}

impl<T: Real> Kernel<T> for GaussianKernel<T> {
    #[inline]
    fn density(&self, x: T, theta: T) -> T {
        let z = (x - theta) / self.sd;
        self.norm * (-T::lit(0.5) * z * z).exp()
    }

    fn spread(&self) -> T {
        self.sd
    }
}

/// Laplace location kernel `exp(−|x − ϑ|/b) / 2b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceKernel<T> {
    scale: T,
}

impl<T: Real> LaplaceKernel<T> {
    pub fn new(scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return param(format!("kernel scale must be positive, got {scale}"));
        }
        Ok(Self { scale })
    }
}

impl<T: Real> Kernel<T> for LaplaceKernel<T> {
    #[inline]
    fn density(&self, x: T, theta: T) -> T {
        (-(x - theta).abs() / self.scale).exp() / (T::lit(2.0) * self.scale)
    }

    fn spread(&self) -> T {
        // sd of the Laplace law
        self.scale * T::SQRT_2()
    }
}

/// Uniform density on `[lo, hi]` whatever `ϑ` is. Handy as a trivial kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatKernel<T> {
    lo: T,
    hi: T,
}

impl<T: Real> FlatKernel<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) {
            return param("flat kernel needs lo < hi");
        }
        Ok(Self { lo, hi })
    }
}

impl<T: Real> Kernel<T> for FlatKernel<T> {
    fn density(&self, x: T, _theta: T) -> T {
        if x >= self.lo && x <= self.hi {
            (self.hi - self.lo).recip()
        } else {
            T::zero()
        }
    }

    fn spread(&self) -> T {
        self.hi - self.lo
    }
}

/// Trapezoid rule on an ordered grid.
pub(crate) fn trapezoid<T: Real>(xs: &[T], ys: &[T]) -> T {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| T::lit(0.5) * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Trapezoid quadrature weights, so `∫ f ≈ Σ w_i f(x_i)`.
pub(crate) fn trapezoid_weights<T: Real>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    let mut w = vec![T::zero(); n];
    for i in 1..n {
        let h = T::lit(0.5) * (xs[i] - xs[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n < 2 || !(hi > lo) {
        return param("grid needs at least two points and lo < hi");
    }
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * T::from_usize_lossy(i) })
        .collect())
}
