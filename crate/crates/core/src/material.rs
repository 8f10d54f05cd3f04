//! Wall constituent material parameters and pressure scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Constitutive and geometric parameters of the three-constituent wall
/// (elastin-dominated matrix, passive smooth muscle, collagen-dominated
/// matrix). Defaults are the mouse thoracic aorta set used throughout.
///
/// Deposition prestretches `G` are the stretches at which constituents are
/// incorporated; elastin deposition is isochoric, so the radial prestretch is
/// `1 / (g_elastin_theta * g_elastin_z)`. The diagonal collagen angle is
/// measured from the axial direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Elastin shear modulus, kPa.
    pub c_elastin: f64,
    /// Smooth muscle fiber stiffness c1, kPa.
    pub c1_muscle: f64,
    /// Smooth muscle fiber exponent c2, dimensionless.
    pub c2_muscle: f64,
    /// Collagen fiber stiffness c1, kPa.
    pub c1_collagen: f64,
    /// Collagen fiber exponent c2, dimensionless.
    pub c2_collagen: f64,
    /// Elastin circumferential deposition stretch.
    pub g_elastin_theta: f64,
    /// Elastin axial deposition stretch.
    pub g_elastin_z: f64,
    /// Smooth muscle deposition stretch.
    pub g_muscle: f64,
    /// Collagen deposition stretch.
    pub g_collagen: f64,
    /// Homeostatic mass fractions (elastin, muscle, collagen); must sum to 1.
    pub frac_elastin: f64,
    pub frac_muscle: f64,
    pub frac_collagen: f64,
    /// Collagen orientation fractions (circumferential, axial, diagonal);
    /// must sum to 1. The diagonal share is split equally between the two
    /// symmetric families.
    pub beta_theta: f64,
    pub beta_z: f64,
    pub beta_diagonal: f64,
    /// Diagonal collagen angle from the axial direction, radians.
    pub diagonal_angle: f64,
    /// Smooth-muscle-to-collagen turnover ratio (fixed at 1).
    pub turnover_ratio: f64,
    /// Wall-shear to intramural gain ratio (fixed at 0, so the flow stimulus
    /// drops out of the equilibrated balance).
    pub shear_gain_ratio: f64,
    /// Inner radius, mm.
    pub radius: f64,
    /// Wall thickness, mm.
    pub thickness: f64,
    /// Vessel length, mm.
    pub length: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            c_elastin: 89.71,
            c1_muscle: 261.4,
            c2_muscle: 0.24,
            c1_collagen: 234.9,
            c2_collagen: 4.08,
            g_elastin_theta: 1.90,
            g_elastin_z: 1.62,
            g_muscle: 1.20,
            g_collagen: 1.25,
            frac_elastin: 0.34,
            frac_muscle: 0.33,
            frac_collagen: 0.33,
            beta_theta: 0.056,
            beta_z: 0.067,
            beta_diagonal: 0.877,
            diagonal_angle: 29.9_f64.to_radians(),
            turnover_ratio: 1.0,
            shear_gain_ratio: 0.0,
            radius: 0.647,
            thickness: 0.040,
            length: 15.0,
        }
    }
}

impl MaterialParams {
    /// Radial elastin deposition stretch implied by isochoric deposition.
    pub fn g_elastin_r(&self) -> f64 {
        1.0 / (self.g_elastin_theta * self.g_elastin_z)
    }

    /// Mid-wall radius of the original homeostatic state, mm.
    pub fn mid_radius(&self) -> f64 {
        self.radius + 0.5 * self.thickness
    }

    pub fn validate(&self) -> Result<()> {
        let mass = self.frac_elastin + self.frac_muscle + self.frac_collagen;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(CoreError::parameter(format!(
                "constituent mass fractions must sum to 1, got {mass}"
            )));
        }
        let beta = self.beta_theta + self.beta_z + self.beta_diagonal;
        if (beta - 1.0).abs() > 1e-10 {
            return Err(CoreError::parameter(format!(
                "collagen orientation fractions must sum to 1, got {beta}"
            )));
        }
        for (name, v) in [
            ("c_elastin", self.c_elastin),
            ("c1_muscle", self.c1_muscle),
            ("c1_collagen", self.c1_collagen),
            ("g_elastin_theta", self.g_elastin_theta),
            ("g_elastin_z", self.g_elastin_z),
            ("g_muscle", self.g_muscle),
            ("g_collagen", self.g_collagen),
            ("radius", self.radius),
            ("thickness", self.thickness),
            ("length", self.length),
        ] {
            if !(v > 0.0) {
                return Err(CoreError::parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pressure condition under which growth and the diastolic/systolic
/// distensions are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Normotensive,
    Hypertensive,
}

impl Scenario {
    /// (growth, diastolic, systolic) pressures as multiples of the baseline
    /// homeostatic pressure, i.e. the mmHg ratios 105:99:121 (normotensive)
    /// and 140:129:172 (hypertensive) over the 105 mmHg baseline.
    pub fn pressure_ratios(self) -> (f64, f64, f64) {
        match self {
            Scenario::Normotensive => (1.0, 99.0 / 105.0, 121.0 / 105.0),
            Scenario::Hypertensive => (140.0 / 105.0, 129.0 / 105.0, 172.0 / 105.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Normotensive => "normotensive",
            Scenario::Hypertensive => "hypertensive",
        }
    }

    /// Binary flag fed to the surrogate model (0 normotensive, 1 hypertensive).
    pub fn flag(self) -> f64 {
        match self {
            Scenario::Normotensive => 0.0,
            Scenario::Hypertensive => 1.0,
        }
    }
}

/// Absolute pressures of a scenario, kPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPressures {
    pub growth: f64,
    pub diastolic: f64,
    pub systolic: f64,
}
