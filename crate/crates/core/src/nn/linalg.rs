//! Deterministic chunk-parallel matrix products over the batch dimension.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;

/// Fixed chunk size; results are combined in chunk order, so the output is
/// bit-identical for any thread count.
const CHUNK_ROWS: usize = 1024;

/// `a · b`, row-chunked across threads.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    if a.nrows() <= CHUNK_ROWS {
        return a.dot(&b);
    }
    let parts: Vec<Array2<f64>> = a
        .axis_chunks_iter(Axis(0), CHUNK_ROWS)
        .into_par_iter()
        .map(|chunk| chunk.dot(&b))
        .collect();
    let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).expect("chunk shapes agree")
}

/// `a^T · b` where `a` and `b` share their row (batch) dimension; partial
/// products are summed in chunk order.
pub fn matmul_tn(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows());
    if a.nrows() <= CHUNK_ROWS {
        return a.t().dot(&b);
    }
    let parts: Vec<Array2<f64>> = a
        .axis_chunks_iter(Axis(0), CHUNK_ROWS)
        .into_par_iter()
        .zip(b.axis_chunks_iter(Axis(0), CHUNK_ROWS).into_par_iter())
        .map(|(ca, cb)| ca.t().dot(&cb))
        .collect();
    let mut sum = parts[0].clone();
    for p in &parts[1..] {
        sum += p;
    }
    sum
}
