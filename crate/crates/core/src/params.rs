//! Named-tensor view over trainable parameters, plus initialisation helpers.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// A fixed collection of named tensors. Gradients use the same type, so the
/// visiting order doubles as the layout for optimiser state and checkpoints.
pub trait Parameters<T: Scalar>: Clone {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)>;

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)>;

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, mut t) in out.tensors_mut() {
            t.fill(T::zero());
        }
        out
    }

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn scale(&mut self, k: T) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * k);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    fn l2_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter().map(|v| *v * *v).collect::<Vec<_>>())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Exact equality of every scalar.
    fn bitwise_eq(&self, other: &Self) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter().zip(&b).all(|((na, ta), (nb, tb))| {
                na == nb && ta.shape() == tb.shape() && ta.iter().zip(tb.iter()).all(|(x, y)| same_bits(*x, *y))
            })
    }
}

fn same_bits<T: Scalar>(a: T, b: T) -> bool {
    // f32 -> f64 widening is exact, so comparing f64 bit patterns is exact.
    a.to_f64().map(f64::to_bits) == b.to_f64().map(f64::to_bits)
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<T> {
    let bound = glorot_bound(rows, cols);
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.random_range(-bound..=bound)))
}

/// Context vectors are treated as `len x 1` matrices for the bound.
pub fn glorot_vector<T: Scalar>(rng: &mut ChaCha8Rng, len: usize) -> Array1<T> {
    let bound = glorot_bound(len, 1);
    Array1::from_shape_simple_fn(len, || T::of(rng.random_range(-bound..=bound)))
}
