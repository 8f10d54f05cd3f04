//! Mechanobiological insult profiles on the vessel grid.
//!
//! Profiles are dimensionless fields in [0, 1]; the physical defect applied
//! at a node is `severity_max * value`, interpreted per [`InsultKind`].
//! Two generators are provided: a double-exponential analytic bump, and a
//! censored periodic Gaussian random field whose propensity (area fraction
//! above 0.5) and boundary softness (CDF slope at 0.5) are prescribed
//! exactly through the latent mean and variance.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grf::{condition_on_boundary, covariance_matrix, GaussianSampler};
use crate::grid::{wrap_angle_distance, CylindricalGrid};
use crate::kde::GaussianKde;
use crate::special::{inverse_erf, normal_quantile};

/// Which wall process the insult degrades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InsultKind {
    /// Loss of elastic fiber integrity: the elastin modulus is reduced by
    /// `severity_max * value`.
    ElasticFiber,
    /// Dysfunctional mechanosensing: cells sense `(1 - delta) * stress` with
    /// `delta = severity_max * value`.
    Mechanosensing,
}

impl InsultKind {
    pub fn label(self) -> &'static str {
        match self {
            InsultKind::ElasticFiber => "elastic_fiber",
            InsultKind::Mechanosensing => "mechanosensing",
        }
    }
}

/// Double-exponential bump parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticInsultParams {
    /// Value at the vessel ends, in [0, 1].
    pub end_value: f64,
    /// Value at the bump apex, in [0, 1]; must dominate `end_value`.
    pub apex_value: f64,
    /// Axial apex position, mm.
    pub z_apex: f64,
    /// Circumferential apex position, radians.
    pub theta_apex: f64,
    /// Axial characteristic width, mm.
    pub z_width: f64,
    /// Circumferential characteristic width, radians.
    pub theta_width: f64,
    /// Axial boundary-softness exponent (2 gives a Gaussian-like bump).
    pub z_exponent: f64,
    /// Circumferential boundary-softness exponent.
    pub theta_exponent: f64,
}

impl Default for AnalyticInsultParams {
    fn default() -> Self {
        AnalyticInsultParams {
            end_value: 0.0,
            apex_value: 1.0,
            z_apex: 7.5,
            theta_apex: 0.0,
            z_width: 3.0,
            theta_width: 100.0_f64.to_radians(),
            z_exponent: 2.0,
            theta_exponent: 2.0,
        }
    }
}

impl AnalyticInsultParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.end_value && self.end_value <= self.apex_value && self.apex_value <= 1.0) {
            return Err(CoreError::parameter(format!(
                "need 0 <= end_value <= apex_value <= 1, got {} and {}",
                self.end_value, self.apex_value
            )));
        }
        if !(self.z_width > 0.0 && self.theta_width > 0.0) {
            return Err(CoreError::parameter("insult widths must be positive"));
        }
        if !(self.z_exponent > 0.0 && self.theta_exponent > 0.0) {
            return Err(CoreError::parameter("softness exponents must be positive"));
        }
        Ok(())
    }
}

/// Parameters of the censored-GRF generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInsultParams {
    /// Prescribed fraction of latent values above 0.5, in (0, 1).
    pub propensity: f64,
    /// Slope of the latent CDF at 0.5; larger is softer.
    pub boundary_softness: f64,
    /// Circumferential correlation length, mm (chordal metric).
    pub length_theta: f64,
    /// Axial correlation length, mm.
    pub length_z: f64,
    /// Boundary latent value offset below the mean, in standard deviations.
    pub boundary_sigmas: f64,
}

impl Default for RandomInsultParams {
    fn default() -> Self {
        RandomInsultParams {
            propensity: 0.35,
            boundary_softness: 0.2,
            length_theta: 2.0,
            length_z: 2.0,
            boundary_sigmas: 2.0,
        }
    }
}

impl RandomInsultParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.propensity > 0.0 && self.propensity < 1.0) {
            return Err(CoreError::parameter(format!(
                "propensity must lie in (0, 1), got {}",
                self.propensity
            )));
        }
        if !(self.boundary_softness > 0.0) {
            return Err(CoreError::parameter("boundary softness must be positive"));
        }
        if !(self.length_theta > 0.0 && self.length_z > 0.0) {
            return Err(CoreError::parameter("correlation lengths must be positive"));
        }
        if !(self.boundary_sigmas > 0.0) {
            return Err(CoreError::parameter("boundary_sigmas must be positive"));
        }
        Ok(())
    }
}

/// Generator parameter record kept with each profile for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InsultParams {
    Analytic(AnalyticInsultParams),
    Random(RandomInsultParams),
}

/// A scalar insult field on the grid, row-major (z outer, theta inner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsultProfile {
    pub grid: CylindricalGrid,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub kind: InsultKind,
    /// Maximum applied loss where the profile reaches 1.
    pub severity_max: f64,
    pub params: InsultParams,
    /// RNG seed for random profiles; absent for analytic ones.
    pub seed: Option<u64>,
}

impl InsultProfile {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(CoreError::format(format!(
                "profile has {} values for a {}-node grid",
                self.values.len(),
                self.grid.len()
            )));
        }
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CoreError::format("profile values must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.severity_max) {
            return Err(CoreError::parameter(format!(
                "severity_max must lie in [0, 1], got {}",
                self.severity_max
            )));
        }
        Ok(())
    }
}

/// Evaluate the analytic double-exponential bump at every node.
///
/// The circumferential offset uses the wrapped distance
/// `min(|dtheta|, 2 pi - |dtheta|)`, so the bump is periodic for any apex.
pub fn evaluate_analytic(
    grid: &CylindricalGrid,
    params: &AnalyticInsultParams,
    kind: InsultKind,
    severity_max: f64,
) -> Result<InsultProfile> {
    params.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_z {
        let dz = ((grid.z(i) - params.z_apex) / params.z_width).abs();
        let az = (-dz.powf(params.z_exponent)).exp();
        for j in 0..grid.n_theta {
            let dt = wrap_angle_distance(grid.theta(j), params.theta_apex) / params.theta_width;
            let at = (-dt.powf(params.theta_exponent)).exp();
            let v = params.end_value + (params.apex_value - params.end_value) * az * at;
            if !v.is_finite() {
                return Err(CoreError::numerical(format!(
                    "analytic insult produced a non-finite value at node ({i}, {j})"
                )));
            }
            values.push(v);
        }
    }
    let profile = InsultProfile {
        grid: grid.clone(),
        values,
        kind,
        severity_max,
        params: InsultParams::Analytic(params.clone()),
        seed: None,
    };
    profile.validate()?;
    Ok(profile)
}

/// Latent mean and variance that realize a prescribed propensity and
/// boundary softness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentMoments {
    pub mean: f64,
    pub variance: f64,
}

impl LatentMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Closed-form latent moments:
/// `mu = 1/2 - t exp(-t^2) / (eps sqrt(pi))` and
/// `var = exp(-2 t^2) / (2 pi eps^2)` with `t = erfinv(1 - 2 phi)`.
pub fn latent_moments(propensity: f64, boundary_softness: f64) -> Result<LatentMoments> {
    if !(propensity > 0.0 && propensity < 1.0) {
        return Err(CoreError::parameter(format!(
            "propensity must lie strictly inside (0, 1), got {propensity}"
        )));
    }
    if !(boundary_softness > 0.0) {
        return Err(CoreError::parameter("boundary softness must be positive"));
    }
    let t = inverse_erf(1.0 - 2.0 * propensity)?;
    let mean = 0.5 - t * (-t * t).exp() / (boundary_softness * std::f64::consts::PI.sqrt());
    let variance =
        (-2.0 * t * t).exp() / (2.0 * std::f64::consts::PI * boundary_softness.powi(2));
    Ok(LatentMoments { mean, variance })
}

/// Quantile-match a sampled field to N(mean, variance): ranks are preserved,
/// and the empirical (KDE-smoothed) distribution is mapped onto the target
/// Gaussian. A field with zero spread is passed through unchanged.
pub fn cdf_match(values: &[f64], moments: LatentMoments) -> Result<Vec<f64>> {
    if values.len() < 30 {
        return Err(CoreError::parameter(format!(
            "cdf_match needs at least 30 values, got {}",
            values.len()
        )));
    }
    let Some(kde) = GaussianKde::new(values) else {
        log::warn!("cdf_match: zero-variance field, passing through unchanged");
        return Ok(values.to_vec());
    };
    values
        .iter()
        .map(|&v| {
            // the Gaussian-kernel CDF is strictly inside (0, 1) but can
            // round to the endpoints in f64 for far-out values
            let p = kde.cdf(v).clamp(1e-300, 1.0 - 1e-16);
            normal_quantile(p, moments.mean, moments.variance)
        })
        .collect()
}

/// Clamp a field to the admissible insult interval [0, 1].
pub fn censor(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Intermediate fields of the random-insult pipeline, exposed for
/// statistical verification.
pub struct RandomInsultStages {
    /// Raw draw from the conditioned Gaussian.
    pub latent: Vec<f64>,
    /// After quantile matching to N(mean, variance).
    pub matched: Vec<f64>,
    /// After censoring to [0, 1].
    pub censored: Vec<f64>,
}

/// Prefactored sampler for random insult profiles. Building one factors the
/// conditioned covariance once; each call to [`RandomInsultSampler::generate`]
/// then costs a single matrix-vector product plus the KDE transform.
pub struct RandomInsultSampler {
    grid: CylindricalGrid,
    params: RandomInsultParams,
    kind: InsultKind,
    severity_max: f64,
    moments: LatentMoments,
    sampler: GaussianSampler,
    boundary: Vec<usize>,
}

impl RandomInsultSampler {
    pub fn new(
        grid: &CylindricalGrid,
        params: &RandomInsultParams,
        kind: InsultKind,
        severity_max: f64,
    ) -> Result<Self> {
        params.validate()?;
        let moments = latent_moments(params.propensity, params.boundary_softness)?;
        let cov = covariance_matrix(grid, params.length_theta, params.length_z, moments.variance)?;
        let mean = DVector::from_element(grid.len(), moments.mean);
        let boundary = grid.boundary_indices();
        let pinned = moments.mean - params.boundary_sigmas * moments.std_dev();
        let (mean_c, cov_c) = condition_on_boundary(&mean, &cov, &boundary, pinned)?;
        let sampler = GaussianSampler::new(mean_c, &cov_c)?;
        Ok(RandomInsultSampler {
            grid: grid.clone(),
            params: params.clone(),
            kind,
            severity_max,
            moments,
            sampler,
            boundary,
        })
    }

    pub fn moments(&self) -> LatentMoments {
        self.moments
    }

    /// Run the sampling pipeline for one seed, returning all stages.
    pub fn sample_stages(&self, seed: u64) -> Result<RandomInsultStages> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = self.sampler.sample(&mut rng);
        let matched = cdf_match(&latent, self.moments)?;
        let censored = censor(&matched);
        Ok(RandomInsultStages {
            latent,
            matched,
            censored,
        })
    }

    /// Generate a finished profile for one seed.
    pub fn generate(&self, seed: u64) -> Result<InsultProfile> {
        let stages = self.sample_stages(seed)?;
        for &b in &self.boundary {
            if stages.censored[b] != 0.0 {
                return Err(CoreError::numerical(format!(
                    "boundary node {b} censored to {} instead of 0; the \
                     (propensity, softness) pair leaves the pinned boundary \
                     value above zero",
                    stages.censored[b]
                )));
            }
        }
        let profile = InsultProfile {
            grid: self.grid.clone(),
            values: stages.censored,
            kind: self.kind,
            severity_max: self.severity_max,
            params: InsultParams::Random(self.params.clone()),
            seed: Some(seed),
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// One-shot convenience wrapper over [`RandomInsultSampler`].
pub fn generate_random_insult(
    grid: &CylindricalGrid,
    params: &RandomInsultParams,
    kind: InsultKind,
    severity_max: f64,
    seed: u64,
) -> Result<InsultProfile> {
    RandomInsultSampler::new(grid, params, kind, severity_max)?.generate(seed)
}
