//! Compressed sparse row operator and the mean-aggregation message-passing
//! layer shared by the tree encoder and the clique-expansion baseline.

use ndarray::{Array2, ArrayView2, Axis};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Row `i` averages the rows listed in `neighbors[i]`; empty lists give a
    /// zero row.
    pub fn mean_of_neighbors(neighbors: &[Vec<usize>]) -> Csr {
        let mut indptr = Vec::with_capacity(neighbors.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for list in neighbors {
            let w = if list.is_empty() { 0.0 } else { 1.0 / list.len() as f64 };
            indices.extend_from_slice(list);
            values.extend(std::iter::repeat_n(w, list.len()));
            indptr.push(indices.len());
        }
        Csr {
            n_rows: neighbors.len(),
            n_cols: neighbors.len(),
            indptr,
            indices,
            values,
        }
    }

    /// Block-diagonal stacking.
    pub fn block_diag(blocks: &[&Csr]) -> Csr {
        let mut out = Csr {
            n_rows: 0,
            n_cols: 0,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        };
        for block in blocks {
            for r in 0..block.n_rows {
                for p in block.indptr[r]..block.indptr[r + 1] {
                    out.indices.push(block.indices[p] + out.n_cols);
                    out.values.push(block.values[p]);
                }
                out.indptr.push(out.indices.len());
            }
            out.n_rows += block.n_rows;
            out.n_cols += block.n_cols;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `A x`.
    pub fn spmm<T: Scalar>(&self, x: ArrayView2<T>) -> Array2<T> {
        assert_eq!(x.nrows(), self.n_cols, "spmm shape mismatch");
        let mut out = Array2::zeros((self.n_rows, x.ncols()));
        for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let w = T::of(self.values[p]);
                row.scaled_add(w, &x.row(self.indices[p]));
            }
        }
        out
    }

    /// `A^T g`.
    pub fn spmm_transposed<T: Scalar>(&self, g: ArrayView2<T>) -> Array2<T> {
        assert_eq!(g.nrows(), self.n_rows, "spmm_transposed shape mismatch");
        let mut out = Array2::zeros((self.n_cols, g.ncols()));
        for r in 0..self.n_rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let w = T::of(self.values[p]);
                out.row_mut(self.indices[p]).scaled_add(w, &g.row(r));
            }
        }
        out
    }
}

pub fn relu<T: Scalar>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// `grad * 1[pre > 0]`.
pub fn relu_backward<T: Scalar>(pre: &Array2<T>, grad: &Array2<T>) -> Array2<T> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= T::zero() {
            *g = T::zero();
        }
    });
    out
}

/// Cached activations of one mean-aggregation layer.
#[derive(Debug, Clone)]
pub struct SageCache<T> {
    pub input: Array2<T>,
    pub aggregated: Array2<T>,
    pub pre: Array2<T>,
}

/// `ReLU(x W_self + (A x) W_nbr)`. `aggregated`, when given, must equal
/// `A x` (inputs that never change can be aggregated once).
pub fn sage_forward<T: Scalar>(
    w_self: &Array2<T>,
    w_nbr: &Array2<T>,
    adj: &Csr,
    input: Array2<T>,
    aggregated: Option<Array2<T>>,
) -> (Array2<T>, SageCache<T>) {
    let aggregated = aggregated.unwrap_or_else(|| adj.spmm(input.view()));
    let pre = input.dot(w_self) + aggregated.dot(w_nbr);
    let out = relu(&pre);
    (out, SageCache { input, aggregated, pre })
}

/// Returns `(dW_self, dW_nbr, d_input)`; the input gradient is skipped when
/// not requested.
pub fn sage_backward<T: Scalar>(
    w_self: &Array2<T>,
    w_nbr: &Array2<T>,
    adj: &Csr,
    cache: &SageCache<T>,
    d_out: &Array2<T>,
    want_input_grad: bool,
) -> (Array2<T>, Array2<T>, Option<Array2<T>>) {
    let d_pre = relu_backward(&cache.pre, d_out);
    let d_self = cache.input.t().dot(&d_pre);
    let d_nbr = cache.aggregated.t().dot(&d_pre);
    let d_input = want_input_grad.then(|| {
        let through_nbr = d_pre.dot(&w_nbr.t());
        d_pre.dot(&w_self.t()) + adj.spmm_transposed(through_nbr.view())
    });
    (d_self, d_nbr, d_input)
}
