//! The six benchmark experiment cases and the parameter sweeps that
//! generate their insult profiles.

use serde::{Deserialize, Serialize};

use crate::dataset::LocationEncoding;
use crate::error::{CoreError, Result};
use crate::grid::CylindricalGrid;
use crate::insult::{AnalyticInsultParams, InsultKind, RandomInsultParams};
use crate::material::{MaterialParams, Scenario};

/// How a case's insult profiles are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Analytic,
    Random,
}

/// One benchmark case: which insult kinds, generation mode and pressure
/// scenarios enter its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: u8,
    pub kinds: Vec<InsultKind>,
    pub mode: ProfileMode,
    pub scenarios: Vec<Scenario>,
    pub description: &'static str,
}

/// The benchmark case table.
pub fn case_spec(id: u8) -> Result<CaseSpec> {
    use InsultKind::*;
    use Scenario::*;
    let spec = match id {
        1 => CaseSpec {
            id,
            kinds: vec![ElasticFiber],
            mode: ProfileMode::Analytic,
            scenarios: vec![Normotensive],
            description: "analytic elastic fiber integrity (normotensive)",
        },
        2 => CaseSpec {
            id,
            kinds: vec![Mechanosensing],
            mode: ProfileMode::Analytic,
            scenarios: vec![Normotensive],
            description: "analytic mechanosensing (normotensive)",
        },
        3 => CaseSpec {
            id,
            kinds: vec![ElasticFiber, Mechanosensing],
            mode: ProfileMode::Analytic,
            scenarios: vec![Normotensive],
            description: "analytic elastic fiber or mechanosensing (normotensive)",
        },
        4 => CaseSpec {
            id,
            kinds: vec![Mechanosensing],
            mode: ProfileMode::Analytic,
            scenarios: vec![Normotensive, Hypertensive],
            description: "analytic mechanosensing (normotensive and hypertensive)",
        },
        5 => CaseSpec {
            id,
            kinds: vec![ElasticFiber, Mechanosensing],
            mode: ProfileMode::Analytic,
            scenarios: vec![Normotensive, Hypertensive],
            description: "analytic elastic fiber or mechanosensing (both pressures)",
        },
        6 => CaseSpec {
            id,
            kinds: vec![ElasticFiber, Mechanosensing],
            mode: ProfileMode::Random,
            scenarios: vec![Normotensive],
            description: "randomly generated elastic fiber or mechanosensing (normotensive)",
        },
        _ => return Err(CoreError::parameter(format!("no case {id}; valid ids are 1-6"))),
    };
    Ok(spec)
}

/// sensor25 / sensor9 / image architecture selector for the CLI.
pub const ARCHITECTURES: [&str; 3] = ["sensor25", "sensor9", "image"];

/// Full pipeline configuration with embedded defaults; every field can be
/// overridden from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid: CylindricalGrid,
    pub material: MaterialParams,

    /// Axial characteristic widths of the analytic sweep, mm.
    pub z_widths: Vec<f64>,
    /// Circumferential characteristic widths, degrees.
    pub theta_widths_deg: Vec<f64>,
    /// Axial apex placements, mm. The centered placement is the only one
    /// used for the widest insult (boundary effects); the widest width is
    /// the maximum of `z_widths`.
    pub z_apexes: Vec<f64>,
    /// Circumferential apex placements, degrees.
    pub theta_apexes_deg: Vec<f64>,
    /// Boundary-softness exponents of the analytic bump.
    pub z_exponent: f64,
    pub theta_exponent: f64,

    /// Number of evenly spaced severity levels per analytic sweep.
    pub severity_levels: usize,
    /// (min, max) maximum-loss fractions per kind and scenario.
    pub elastin_severity_normotensive: (f64, f64),
    pub elastin_severity_hypertensive: (f64, f64),
    pub mechanosensing_severity_normotensive: (f64, f64),
    pub mechanosensing_severity_hypertensive: (f64, f64),

    /// Random-case composition: `random_profiles` unique shapes, each swept
    /// over `random_severity_levels` severities; shapes alternate between
    /// the two insult kinds.
    pub random_profiles: usize,
    pub random_severity_levels: usize,
    pub random_elastin_severity: (f64, f64),
    pub random_mechanosensing_severity: (f64, f64),
    pub random_insult: RandomInsultParams,

    pub location_encoding: LocationEncoding,
    pub test_fraction: f64,
    pub noise_level: f64,

    /// Network hyperparameters shared by all architectures.
    pub latent_width: usize,
    pub fnn_width: usize,
    pub trunk_width: usize,
    pub fnn_depth: usize,
    pub conv_filters: (usize, usize),

    /// Training protocol.
    pub adam_iters: usize,
    pub learning_rate: f64,
    pub learning_rate_final: Option<f64>,
    pub lbfgs_iters: usize,
    pub trials: usize,

    pub master_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: CylindricalGrid::standard(),
            material: MaterialParams::default(),
            z_widths: vec![2.0, 3.0, 4.0],
            theta_widths_deg: vec![20.0, 100.0, 180.0, 260.0, 360.0],
            z_apexes: vec![6.0, 7.5, 9.0],
            theta_apexes_deg: vec![0.0, 90.0, 180.0, 270.0],
            z_exponent: 2.0,
            theta_exponent: 2.0,
            severity_levels: 5,
            elastin_severity_normotensive: (0.0595, 0.595),
            elastin_severity_hypertensive: (0.0475, 0.475),
            mechanosensing_severity_normotensive: (0.0184, 0.184),
            mechanosensing_severity_hypertensive: (0.0108, 0.108),
            random_profiles: 10,
            random_severity_levels: 10,
            random_elastin_severity: (0.06, 0.60),
            // capped at 20%: beyond that the equilibrated wall has no
            // admissible root under the thin-wall closure
            random_mechanosensing_severity: (0.025, 0.20),
            random_insult: RandomInsultParams::default(),
            location_encoding: LocationEncoding::Trig,
            test_fraction: 0.1,
            noise_level: 0.05,
            latent_width: 128,
            fnn_width: 128,
            trunk_width: 128,
            fnn_depth: 4,
            conv_filters: (16, 32),
            adam_iters: 20_000,
            learning_rate: 1e-3,
            learning_rate_final: None,
            lbfgs_iters: 2_000,
            trials: 5,
            master_seed: 7,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if self.severity_levels < 2 || self.random_severity_levels < 2 {
            return Err(CoreError::parameter("severity sweeps need at least two levels"));
        }
        for (name, (lo, hi)) in [
            ("elastin normotensive", self.elastin_severity_normotensive),
            ("elastin hypertensive", self.elastin_severity_hypertensive),
            (
                "mechanosensing normotensive",
                self.mechanosensing_severity_normotensive,
            ),
            (
                "mechanosensing hypertensive",
                self.mechanosensing_severity_hypertensive,
            ),
            ("random elastin", self.random_elastin_severity),
            ("random mechanosensing", self.random_mechanosensing_severity),
        ] {
            if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                return Err(CoreError::parameter(format!(
                    "severity range {name} must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(CoreError::parameter("test fraction must lie in [0, 1)"));
        }
        self.random_insult.validate()?;
        Ok(())
    }

    /// Severity range of a kind under a scenario.
    pub fn severity_range(&self, kind: InsultKind, scenario: Scenario) -> (f64, f64) {
        match (kind, scenario) {
            (InsultKind::ElasticFiber, Scenario::Normotensive) => {
                self.elastin_severity_normotensive
            }
            (InsultKind::ElasticFiber, Scenario::Hypertensive) => {
                self.elastin_severity_hypertensive
            }
            (InsultKind::Mechanosensing, Scenario::Normotensive) => {
                self.mechanosensing_severity_normotensive
            }
            (InsultKind::Mechanosensing, Scenario::Hypertensive) => {
                self.mechanosensing_severity_hypertensive
            }
        }
    }
}

/// `count` evenly spaced values spanning `[lo, hi]` inclusive.
pub fn severity_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Geometric parameter combinations of the analytic sweep.
///
/// The apex placement grid is pruned twice: the centered axial placement is
/// reserved for the widest insult (which would otherwise reach the vessel
/// ends), and a full-circumference width keeps a single apex angle since the
/// others are its rotations.
pub fn analytic_geometry(config: &RunConfig) -> Vec<AnalyticInsultParams> {
    let widest = config
        .z_widths
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let center = config.grid.length / 2.0;
    let mut out = Vec::new();
    for &z_od in &config.z_widths {
        let apexes: Vec<f64> = if (z_od - widest).abs() < 1e-12 {
            config
                .z_apexes
                .iter()
                .cloned()
                .filter(|a| (a - center).abs() < 1e-9)
                .collect()
        } else {
            config.z_apexes.clone()
        };
        for &z_apex in &apexes {
            for &t_od_deg in &config.theta_widths_deg {
                let full_circle = (t_od_deg - 360.0).abs() < 1e-9;
                let t_apexes: &[f64] = if full_circle {
                    &config.theta_apexes_deg[..1]
                } else {
                    &config.theta_apexes_deg
                };
                for &t_apex_deg in t_apexes {
                    out.push(AnalyticInsultParams {
                        end_value: 0.0,
                        apex_value: 1.0,
                        z_apex,
                        theta_apex: t_apex_deg.to_radians(),
                        z_width: z_od,
                        theta_width: t_od_deg.to_radians(),
                        z_exponent: config.z_exponent,
                        theta_exponent: config.theta_exponent,
                    });
                }
            }
        }
    }
    out
}

/// One profile to generate: parameters, kind, severity and a stable id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileJob {
    pub id: String,
    pub kind: InsultKind,
    pub scenario: Scenario,
    pub severity: f64,
    pub geometry: GeometrySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GeometrySpec {
    Analytic(AnalyticInsultParams),
    /// Random shape index; the sampling seed derives from the master seed
    /// and this index, so the same shape recurs across severities.
    Random { shape: usize },
}

/// Enumerate the analytic jobs of one (kind, scenario) sweep.
pub fn analytic_jobs(config: &RunConfig, kind: InsultKind, scenario: Scenario) -> Vec<ProfileJob> {
    let (lo, hi) = config.severity_range(kind, scenario);
    let severities = severity_levels(lo, hi, config.severity_levels);
    let mut jobs = Vec::new();
    for geom in analytic_geometry(config) {
        for (si, &severity) in severities.iter().enumerate() {
            let id = format!(
                "{}_{}_z{:.1}w{:.1}_t{:.0}w{:.0}_s{}",
                kind.label(),
                scenario.label(),
                geom.z_apex,
                geom.z_width,
                geom.theta_apex.to_degrees().round(),
                geom.theta_width.to_degrees().round(),
                si
            );
            jobs.push(ProfileJob {
                id,
                kind,
                scenario,
                severity,
                geometry: GeometrySpec::Analytic(geom.clone()),
            });
        }
    }
    jobs
}

/// Enumerate the random-case jobs: shapes alternate between insult kinds,
/// each swept over its severity ladder (normotensive only).
pub fn random_jobs(config: &RunConfig) -> Vec<ProfileJob> {
    let mut jobs = Vec::new();
    for shape in 0..config.random_profiles {
        let kind = if shape % 2 == 0 {
            InsultKind::ElasticFiber
        } else {
            InsultKind::Mechanosensing
        };
        let (lo, hi) = match kind {
            InsultKind::ElasticFiber => config.random_elastin_severity,
            InsultKind::Mechanosensing => config.random_mechanosensing_severity,
        };
        for (si, severity) in severity_levels(lo, hi, config.random_severity_levels)
            .into_iter()
            .enumerate()
        {
            jobs.push(ProfileJob {
                id: format!("{}_random_shape{shape}_s{si}", kind.label()),
                kind,
                scenario: Scenario::Normotensive,
                severity,
                geometry: GeometrySpec::Random { shape },
            });
        }
    }
    jobs
}

/// All generation jobs of a case.
pub fn case_jobs(config: &RunConfig, case: &CaseSpec) -> Vec<ProfileJob> {
    match case.mode {
        ProfileMode::Analytic => {
            let mut jobs = Vec::new();
            for &scenario in &case.scenarios {
                for &kind in &case.kinds {
                    jobs.extend(analytic_jobs(config, kind, scenario));
                }
            }
            jobs
        }
        ProfileMode::Random => random_jobs(config),
    }
}

/// Deterministic per-shape sampling seed for random profiles.
pub fn shape_seed(master_seed: u64, shape: usize) -> u64 {
    master_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(shape as u64)
}
