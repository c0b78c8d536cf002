//! Dense linear algebra and optimization primitives.

mod adam;
mod gradcheck;
mod linalg;
mod matrix;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use linalg::{inv_sqrt_sym, sym_eig, svd, Svd, SymEig};
pub use matrix::Matrix;

use core::fmt::Debug;
use core::iter::Sum;

/// Floating-point scalar used by the trainable models.
///
/// Models run in `f32`; gradient checks instantiate the same code with `f64`.
pub trait Real:
    num_traits::Float + Debug + Default + Sum + Send + Sync + 'static
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (libm::sqrt(aa) * libm::sqrt(bb))
    }
}
