//! Constitutive wall stress of the constrained mixture in its equilibrated
//! limit: neo-Hookean elastin plus four exponential fiber families (smooth
//! muscle circumferential, collagen circumferential/axial/two diagonals).
//!
//! Because constituents turn over, elastin and fibers feel different
//! deformations: elastin carries the total stretch from the original
//! homeostatic state, while fibers sit at their deposition stretch times the
//! elastic increment applied after the last remodeling. The radial direction
//! is eliminated by plane stress (`sigma_rr = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::material::MaterialParams;

/// In-plane biaxial stretch pair (circumferential, axial). The radial
/// component is implied by isochoric motion, `1 / (theta * z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiaxialStretch {
    pub theta: f64,
    pub z: f64,
}

impl BiaxialStretch {
    pub const UNIT: BiaxialStretch = BiaxialStretch { theta: 1.0, z: 1.0 };

    pub fn new(theta: f64, z: f64) -> Self {
        BiaxialStretch { theta, z }
    }

    pub fn radial(&self) -> f64 {
        1.0 / (self.theta * self.z)
    }
}

/// Current mass fractions of (elastin, muscle, collagen).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub elastin: f64,
    pub muscle: f64,
    pub collagen: f64,
}

impl Composition {
    pub fn sum(&self) -> f64 {
        self.elastin + self.muscle + self.collagen
    }
}

/// In-plane Cauchy stress pair after plane-stress elimination, kPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneStress {
    pub theta: f64,
    pub z: f64,
    /// Lagrange multiplier removed by the elimination (the radial extra
    /// stress), kPa.
    pub multiplier: f64,
}

impl PlaneStress {
    /// One third of the in-plane trace (the radial component is zero).
    pub fn mean(&self) -> f64 {
        (self.theta + self.z) / 3.0
    }
}

/// Fiber stored-energy derivative `dW/dlambda` of the exponential family
/// `W(l) = c1/(4 c2) * (exp(c2 (l^2 - 1)^2) - 1)`.
pub fn fiber_energy_derivative(lambda: f64, c1: f64, c2: f64) -> f64 {
    let x = lambda * lambda - 1.0;
    c1 * lambda * x * (c2 * x * x).exp()
}

/// Fiber stored energy (used by the finite-difference checks).
pub fn fiber_energy(lambda: f64, c1: f64, c2: f64) -> f64 {
    let x = lambda * lambda - 1.0;
    if c2 == 0.0 {
        // limit of (exp(c2 x^2) - 1) / (4 c2) as c2 -> 0
        c1 * x * x / 4.0
    } else {
        c1 / (4.0 * c2) * ((c2 * x * x).exp() - 1.0)
    }
}

/// Uniaxial Cauchy stress of an incompressible fiber at stretch `lambda`.
fn fiber_cauchy(lambda: f64, c1: f64, c2: f64) -> f64 {
    lambda * fiber_energy_derivative(lambda, c1, c2)
}

/// Mixture Cauchy stress at a wall point.
///
/// * `total` — mixture stretch relative to the original homeostatic state
///   (felt by elastin through its deposition prestretch).
/// * `fiber_increment` — elastic stretch applied after the last turnover
///   (1 at a mechanobiologically equilibrated state).
/// * `composition` — current mass fractions.
/// * `c_elastin_eff` — possibly insult-reduced elastin modulus, kPa.
pub fn mixture_stress(
    total: BiaxialStretch,
    fiber_increment: BiaxialStretch,
    composition: Composition,
    c_elastin_eff: f64,
    params: &MaterialParams,
) -> Result<PlaneStress> {
    debug_assert!((composition.sum() - 1.0).abs() < 1e-9);
    if !(total.theta > 0.0 && total.z > 0.0 && fiber_increment.theta > 0.0 && fiber_increment.z > 0.0) {
        return Err(CoreError::numerical(format!(
            "non-positive stretch: total=({}, {}), increment=({}, {})",
            total.theta, total.z, fiber_increment.theta, fiber_increment.z
        )));
    }

    // elastin: intrinsic neo-Hookean Cauchy stress c * (G_i * lambda_i)^2
    let er = c_elastin_eff * (params.g_elastin_r() * total.radial()).powi(2);
    let et = c_elastin_eff * (params.g_elastin_theta * total.theta).powi(2);
    let ez = c_elastin_eff * (params.g_elastin_z * total.z).powi(2);

    // smooth muscle: single circumferential family
    let sm = fiber_cauchy(
        params.g_muscle * fiber_increment.theta,
        params.c1_muscle,
        params.c2_muscle,
    );

    // collagen: circumferential, axial, two symmetric diagonals at
    // `diagonal_angle` from the axial direction. The diagonal families are
    // mirror images, so under biaxial stretch they contribute equally.
    let ct = fiber_cauchy(
        params.g_collagen * fiber_increment.theta,
        params.c1_collagen,
        params.c2_collagen,
    );
    let cz = fiber_cauchy(
        params.g_collagen * fiber_increment.z,
        params.c1_collagen,
        params.c2_collagen,
    );
    let sin_a = params.diagonal_angle.sin();
    let cos_a = params.diagonal_angle.cos();
    let inc_d =
        ((fiber_increment.theta * sin_a).powi(2) + (fiber_increment.z * cos_a).powi(2)).sqrt();
    let cd = fiber_cauchy(params.g_collagen * inc_d, params.c1_collagen, params.c2_collagen);
    // current-direction projections of the diagonal family
    let proj_t = (fiber_increment.theta * sin_a).powi(2) / (inc_d * inc_d);
    let proj_z = (fiber_increment.z * cos_a).powi(2) / (inc_d * inc_d);

    let collagen_t = params.beta_theta * ct + params.beta_diagonal * cd * proj_t;
    let collagen_z = params.beta_z * cz + params.beta_diagonal * cd * proj_z;

    let bar_r = composition.elastin * er;
    let bar_t = composition.elastin * et + composition.muscle * sm + composition.collagen * collagen_t;
    let bar_z = composition.elastin * ez + composition.collagen * collagen_z;

    let stress = PlaneStress {
        theta: bar_t - bar_r,
        z: bar_z - bar_r,
        multiplier: bar_r,
    };
    if !(stress.theta.is_finite() && stress.z.is_finite()) {
        return Err(CoreError::numerical(format!(
            "non-finite wall stress at stretches total=({}, {}), increment=({}, {})",
            total.theta, total.z, fiber_increment.theta, fiber_increment.z
        )));
    }
    Ok(stress)
}

/// Original homeostatic state: in-plane stresses at unit stretch and the
/// baseline pressure consistent with the thin-wall (mid-radius) closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeostaticState {
    /// Circumferential stress, kPa.
    pub stress_theta: f64,
    /// Axial stress, kPa.
    pub stress_z: f64,
    /// Mean intramural stress sigma_o = tr/3, kPa.
    pub stress_mean: f64,
    /// Baseline pressure implied by Laplace equilibrium, kPa.
    pub pressure: f64,
    /// Mid-wall radius, mm.
    pub mid_radius: f64,
}

/// Evaluate the homeostatic state from the material set.
pub fn homeostatic_state(params: &MaterialParams) -> Result<HomeostaticState> {
    params.validate()?;
    let comp = Composition {
        elastin: params.frac_elastin,
        muscle: params.frac_muscle,
        collagen: params.frac_collagen,
    };
    let s = mixture_stress(
        BiaxialStretch::UNIT,
        BiaxialStretch::UNIT,
        comp,
        params.c_elastin,
        params,
    )?;
    if s.theta <= 0.0 {
        return Err(CoreError::parameter(format!(
            "non-physical material set: homeostatic circumferential stress {} kPa",
            s.theta
        )));
    }
    let a = params.mid_radius();
    Ok(HomeostaticState {
        stress_theta: s.theta,
        stress_z: s.z,
        stress_mean: s.mean(),
        pressure: s.theta * params.thickness / a,
        mid_radius: a,
    })
}
