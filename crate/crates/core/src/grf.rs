//! Gaussian random fields on the cylindrical grid: periodic squared
//! exponential covariance, conditioning on boundary values, and seeded
//! sampling through a jittered Cholesky factor.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::grid::{wrap_angle_distance, CylindricalGrid};

/// Squared-exponential covariance between grid nodes. Circumferential
/// distance is chordal, `2 r sin(|dtheta| / 2)`, which makes the kernel
/// exactly periodic; axial distance is Euclidean.
pub fn covariance_matrix(
    grid: &CylindricalGrid,
    length_theta: f64,
    length_z: f64,
    variance: f64,
) -> Result<DMatrix<f64>> {
    if !(length_theta > 0.0 && length_z > 0.0 && variance > 0.0) {
        return Err(CoreError::parameter(format!(
            "covariance scales must be positive: L_theta={length_theta}, L_z={length_z}, var={variance}"
        )));
    }
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for p in 0..n {
        let (ip, jp) = grid.coords(p);
        let (zp, tp) = (grid.z(ip), grid.theta(jp));
        for q in p..n {
            let (iq, jq) = grid.coords(q);
            let (zq, tq) = (grid.z(iq), grid.theta(jq));
            let d_theta = 2.0 * grid.radius * (0.5 * wrap_angle_distance(tp, tq)).sin();
            let d_z = zp - zq;
            let v = variance
                * (-0.5 * ((d_theta / length_theta).powi(2) + (d_z / length_z).powi(2))).exp();
            k[(p, q)] = v;
            k[(q, p)] = v;
        }
    }
    Ok(k)
}

/// Condition the field on a fixed value at all boundary nodes.
///
/// Returns the full-size conditioned mean and covariance: boundary entries of
/// the mean are pinned to `boundary_value`, boundary rows/columns of the
/// covariance are exactly zero, and the interior block becomes the Schur
/// complement `K_aa - K_ab K_bb^-1 K_ba`.
pub fn condition_on_boundary(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    boundary: &[usize],
    boundary_value: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mean.len();
    if boundary.is_empty() || boundary.len() >= n {
        return Err(CoreError::parameter(
            "boundary set must be nonempty and strictly contained in the node set",
        ));
    }
    let mut is_boundary = vec![false; n];
    for &b in boundary {
        if b >= n {
            return Err(CoreError::parameter(format!("boundary index {b} out of range")));
        }
        is_boundary[b] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();

    let k_bb = cov.select_rows(boundary.iter()).select_columns(boundary.iter());
    let k_ab = cov.select_rows(interior.iter()).select_columns(boundary.iter());

    let max_diag = k_bb.diagonal().max();
    let chol = cholesky_with_jitter(&k_bb, max_diag).ok_or_else(|| {
        CoreError::numerical(format!(
            "boundary covariance block ({}x{}) is singular even after jitter",
            boundary.len(),
            boundary.len()
        ))
    })?;

    // K_bb^-1 (v - mu_b) and K_bb^-1 K_ba
    let resid = DVector::from_iterator(
        boundary.len(),
        boundary.iter().map(|&b| boundary_value - mean[b]),
    );
    let w = chol.solve(&resid);
    let k_bb_inv_k_ba = chol.solve(&k_ab.transpose());

    let mut new_mean = mean.clone();
    let mut new_cov = DMatrix::zeros(n, n);
    for (ai, &a) in interior.iter().enumerate() {
        new_mean[a] = mean[a] + (k_ab.row(ai) * &w)[(0, 0)];
    }
    for &b in boundary {
        new_mean[b] = boundary_value;
    }
    let schur = k_ab * &k_bb_inv_k_ba;
    for (ai, &a) in interior.iter().enumerate() {
        for (aj, &a2) in interior.iter().enumerate() {
            new_cov[(a, a2)] = cov[(a, a2)] - schur[(ai, aj)];
        }
    }
    // enforce exact symmetry against rounding in the Schur product
    for p in 0..n {
        for q in (p + 1)..n {
            let s = 0.5 * (new_cov[(p, q)] + new_cov[(q, p)]);
            new_cov[(p, q)] = s;
            new_cov[(q, p)] = s;
        }
    }
    Ok((new_mean, new_cov))
}

/// Cholesky with escalating diagonal jitter `1e-10 * scale * {1, 10, 100, 1000}`.
pub fn cholesky_with_jitter(
    mat: &DMatrix<f64>,
    scale: f64,
) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = mat.clone().cholesky() {
        return Some(c);
    }
    let mut jitter = 1e-10 * scale;
    for _ in 0..4 {
        let mut m = mat.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Some(c);
        }
        jitter *= 10.0;
    }
    None
}

/// Seeded sampler for a (possibly degenerate) multivariate Gaussian.
///
/// Rows whose diagonal is exactly zero (conditioned boundary nodes) carry no
/// noise: they are pinned at the mean, and the factor is built from the
/// remaining active block only, so `L L^T` still reproduces the covariance.
pub struct GaussianSampler {
    mean: DVector<f64>,
    active: Vec<usize>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        assert_eq!(cov.nrows(), n);
        let active: Vec<usize> = (0..n).filter(|&i| cov[(i, i)] > 0.0).collect();
        if active.is_empty() {
            return Ok(GaussianSampler {
                mean,
                active,
                factor: DMatrix::zeros(0, 0),
            });
        }
        let block = cov.select_rows(active.iter()).select_columns(active.iter());
        let scale = block.diagonal().max();
        let chol = cholesky_with_jitter(&block, scale).ok_or_else(|| {
            CoreError::numerical(
                "covariance factorization failed after maximum jitter escalation",
            )
        })?;
        Ok(GaussianSampler {
            mean,
            active,
            factor: chol.unpack(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draw one field: `mean + L w`, with `w` standard normal in index order.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut out: Vec<f64> = self.mean.iter().copied().collect();
        if self.active.is_empty() {
            return out;
        }
        let w = DVector::from_iterator(
            self.active.len(),
            (0..self.active.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        let noise = &self.factor * w;
        for (k, &i) in self.active.iter().enumerate() {
            out[i] += noise[k];
        }
        out
    }
}
