//! Minimal network kernels: dense and convolutional layers with exact
//! reverse-mode gradients, Xavier initialization, Adam, L-BFGS with a strong
//! Wolfe line search, and a central-difference gradient oracle.
//!
//! All parameters of a network live in one flat `Vec<f64>`; layers address
//! their slice through a fixed layout, which keeps the optimizers and the
//! checkpoint format trivial. Everything is f64 and deterministic: batch
//! parallelism uses fixed-size row chunks whose partial results are
//! combined in index order, independent of thread scheduling.

mod adam;
mod fd;
mod layers;
mod lbfgs;
mod linalg;

pub use adam::Adam;
pub use fd::finite_diff_grad;
pub use layers::{Activation, Batch, ForwardCache, LayerSpec, Network, Shape};
pub use lbfgs::{lbfgs_minimize, LbfgsReport};
pub use linalg::{matmul, matmul_tn};

use rand::Rng;

/// Xavier/Glorot uniform initialization bound for a weight tensor.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    assert!(fan_in >= 1 && fan_out >= 1, "fan counts must be positive");
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Fill a weight slice uniformly on the Xavier interval, in index order.
pub fn xavier_fill(weights: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let bound = xavier_bound(fan_in, fan_out);
    for w in weights.iter_mut() {
        *w = rng.random_range(-bound..bound);
    }
}
