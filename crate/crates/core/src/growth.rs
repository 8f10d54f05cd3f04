//! Mechanobiologically equilibrated growth state of the wall and the elastic
//! diastolic/systolic distensions, evaluated pointwise under a thin-wall
//! (mid-radius Laplace) closure with the vessel ends held axially fixed.
//!
//! Per node the evolved state solves a 2x2 system in the circumferential
//! stretch `lambda` and the collagen/muscle mass growth factor `g`:
//!
//! * mechanical equilibrium   `sigma_tt = P_gr * a / h` with `a = a_o lambda`,
//!   `h = J h_o / lambda`, `J = phi_e + g (phi_m + phi_c)`;
//! * mechanobiological equilibrium `(1 - delta) * sigma_mean = sigma_o`.
//!
//! An elastic-fiber insult reduces the elastin modulus
//! (`c_eff = c (1 - severity * value)`, `delta = 0`); a mechanosensing insult
//! attenuates the sensed stress (`delta = severity * value`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::CylindricalGrid;
use crate::insult::{InsultKind, InsultProfile};
use crate::material::{MaterialParams, Scenario, ScenarioPressures};
use crate::wall::{homeostatic_state, mixture_stress, BiaxialStretch, Composition, HomeostaticState, PlaneStress};

/// Residual tolerance relative to the homeostatic mean stress.
const RESIDUAL_TOL: f64 = 1e-10;
/// Search box for the equilibrium unknowns.
const LAMBDA_RANGE: (f64, f64) = (0.8, 4.0);
const GROWTH_RANGE: (f64, f64) = (0.2, 20.0);

/// Converged per-node equilibrated state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEquilibriumState {
    /// Evolved mid-wall circumferential stretch relative to the original
    /// in vivo state.
    pub circ_stretch: f64,
    /// Collagen/smooth-muscle referential mass growth factor.
    pub growth: f64,
    /// Referential volume ratio `J`.
    pub volume_ratio: f64,
    /// Evolved thickness, mm.
    pub thickness: f64,
    /// Evolved mass fractions.
    pub composition: Composition,
    /// Evolved in-plane stresses, kPa (radial eliminated to zero).
    pub stress: PlaneStress,
}

/// Insult semantics resolved to effective constitutive inputs.
#[derive(Debug, Clone, Copy)]
struct EffectiveInsult {
    c_elastin_eff: f64,
    delta: f64,
}

fn effective_insult(
    value: f64,
    kind: InsultKind,
    severity_max: f64,
    params: &MaterialParams,
) -> EffectiveInsult {
    match kind {
        InsultKind::ElasticFiber => EffectiveInsult {
            c_elastin_eff: params.c_elastin * (1.0 - severity_max * value),
            delta: 0.0,
        },
        InsultKind::Mechanosensing => EffectiveInsult {
            c_elastin_eff: params.c_elastin,
            delta: severity_max * value,
        },
    }
}

fn volume_ratio(growth: f64, params: &MaterialParams) -> f64 {
    params.frac_elastin + growth * (params.frac_muscle + params.frac_collagen)
}

fn evolved_composition(growth: f64, params: &MaterialParams) -> Composition {
    let j = volume_ratio(growth, params);
    Composition {
        elastin: params.frac_elastin / j,
        muscle: growth * params.frac_muscle / j,
        collagen: growth * params.frac_collagen / j,
    }
}

/// Scaled residual pair of the equilibrium system.
fn residuals(
    lambda: f64,
    growth: f64,
    insult: EffectiveInsult,
    pressure_gr: f64,
    params: &MaterialParams,
    home: &HomeostaticState,
) -> Result<[f64; 2]> {
    let comp = evolved_composition(growth, params);
    let stress = mixture_stress(
        BiaxialStretch::new(lambda, 1.0),
        BiaxialStretch::UNIT,
        comp,
        insult.c_elastin_eff,
        params,
    )?;
    let j = volume_ratio(growth, params);
    let radius = home.mid_radius * lambda;
    let thickness = j * params.thickness / lambda;
    let mech = stress.theta - pressure_gr * radius / thickness;
    let bio = (1.0 - insult.delta) * stress.mean() - home.stress_mean;
    Ok([mech / home.stress_mean, bio / home.stress_mean])
}

fn in_box(lambda: f64, growth: f64) -> bool {
    (LAMBDA_RANGE.0..=LAMBDA_RANGE.1).contains(&lambda)
        && (GROWTH_RANGE.0..=GROWTH_RANGE.1).contains(&growth)
}

fn residual_norm(r: &[f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// Damped Newton on the 2x2 system with a numerically differenced Jacobian.
/// Returns the converged `(lambda, growth)` or None.
fn newton(
    mut lambda: f64,
    mut growth: f64,
    insult: EffectiveInsult,
    pressure_gr: f64,
    params: &MaterialParams,
    home: &HomeostaticState,
) -> Option<(f64, f64)> {
    let eval = |l: f64, g: f64| residuals(l, g, insult, pressure_gr, params, home).ok();
    let mut r = eval(lambda, growth)?;
    for _ in 0..100 {
        if residual_norm(&r) <= RESIDUAL_TOL {
            return Some((lambda, growth));
        }
        // forward-difference Jacobian, relative step 1e-7
        let hl = 1e-7 * (1.0 + lambda.abs());
        let hg = 1e-7 * (1.0 + growth.abs());
        let rl = eval(lambda + hl, growth)?;
        let rg = eval(lambda, growth + hg)?;
        let j = [
            [(rl[0] - r[0]) / hl, (rg[0] - r[0]) / hg],
            [(rl[1] - r[1]) / hl, (rg[1] - r[1]) / hg],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dl = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dg = (r[1] * j[0][0] - r[0] * j[1][0]) / det;

        // damped update: halve until the residual norm decreases and the
        // iterate stays positive
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (nl, ng) = (lambda - step * dl, growth - step * dg);
            if nl > 0.05 && ng > 0.01 {
                if let Some(rn) = eval(nl, ng) {
                    if residual_norm(&rn) < residual_norm(&r) {
                        lambda = nl;
                        growth = ng;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if residual_norm(&r) <= RESIDUAL_TOL {
        Some((lambda, growth))
    } else {
        None
    }
}

/// Coarse scan of the box for the best Newton restart point.
fn box_scan(
    insult: EffectiveInsult,
    pressure_gr: f64,
    params: &MaterialParams,
    home: &HomeostaticState,
) -> Option<(f64, f64)> {
    let nl = 64;
    let ng = 64;
    let mut best = (f64::INFINITY, LAMBDA_RANGE.0, GROWTH_RANGE.0);
    for i in 0..=nl {
        let l = LAMBDA_RANGE.0 + (LAMBDA_RANGE.1 - LAMBDA_RANGE.0) * i as f64 / nl as f64;
        for k in 0..=ng {
            // growth spans two decades; scan it geometrically
            let g = GROWTH_RANGE.0 * (GROWTH_RANGE.1 / GROWTH_RANGE.0).powf(k as f64 / ng as f64);
            if let Ok(r) = residuals(l, g, insult, pressure_gr, params, home) {
                let n = residual_norm(&r);
                if n < best.0 {
                    best = (n, l, g);
                }
            }
        }
    }
    best.0.is_finite().then_some((best.1, best.2))
}

/// Solve the equilibrated state at one node.
pub fn solve_equilibrium(
    insult_value: f64,
    kind: InsultKind,
    severity_max: f64,
    scenario: Scenario,
    params: &MaterialParams,
    home: &HomeostaticState,
) -> Result<NodeEquilibriumState> {
    if !(0.0..=1.0).contains(&insult_value) {
        return Err(CoreError::parameter(format!(
            "insult value must lie in [0, 1], got {insult_value}"
        )));
    }
    let insult = effective_insult(insult_value, kind, severity_max, params);
    let (gr_ratio, _, _) = scenario.pressure_ratios();
    let pressure_gr = gr_ratio * home.pressure;

    let solution = newton(1.0, 1.0, insult, pressure_gr, params, home).or_else(|| {
        box_scan(insult, pressure_gr, params, home)
            .and_then(|(l, g)| newton(l, g, insult, pressure_gr, params, home))
    });
    let Some((lambda, growth)) = solution else {
        return Err(CoreError::numerical(format!(
            "equilibrium solve failed: insult={insult_value}, kind={}, severity={severity_max}, \
             scenario={}; no root in lambda [{}, {}] x growth [{}, {}]",
            kind.label(),
            scenario.label(),
            LAMBDA_RANGE.0,
            LAMBDA_RANGE.1,
            GROWTH_RANGE.0,
            GROWTH_RANGE.1
        )));
    };
    if !in_box(lambda, growth) {
        return Err(CoreError::numerical(format!(
            "equilibrium root ({lambda}, {growth}) escaped the admissible box; \
             insult={insult_value}, kind={}, severity={severity_max}",
            kind.label()
        )));
    }

    let comp = evolved_composition(growth, params);
    let stress = mixture_stress(
        BiaxialStretch::new(lambda, 1.0),
        BiaxialStretch::UNIT,
        comp,
        insult.c_elastin_eff,
        params,
    )?;
    let j = volume_ratio(growth, params);
    Ok(NodeEquilibriumState {
        circ_stretch: lambda,
        growth,
        volume_ratio: j,
        thickness: j * params.thickness / lambda,
        composition: comp,
        stress,
    })
}

/// Elastic distension of an evolved state to pressure `pressure`, with
/// composition and natural configurations frozen. Returns the normalized
/// radius `Lambda = lambda_evolved * lambda_elastic`.
pub fn distension(
    state: &NodeEquilibriumState,
    pressure: f64,
    insult_value: f64,
    kind: InsultKind,
    severity_max: f64,
    params: &MaterialParams,
    home: &HomeostaticState,
) -> Result<f64> {
    let insult = effective_insult(insult_value, kind, severity_max, params);
    let radius_h = home.mid_radius * state.circ_stretch;

    let f = |inc: f64| -> Result<f64> {
        let stress = mixture_stress(
            BiaxialStretch::new(state.circ_stretch * inc, 1.0),
            BiaxialStretch::new(inc, 1.0),
            state.composition,
            insult.c_elastin_eff,
            params,
        )?;
        // current radius = a_h * inc, current thickness = h_h / inc
        Ok(stress.theta - pressure * radius_h * inc * inc / state.thickness)
    };

    let (mut lo, mut hi) = (0.5, 3.0);
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo * fhi > 0.0 {
        // scan for a sign change before giving up
        let mut found = None;
        let mut prev = (lo, flo);
        for k in 1..=64 {
            let x = 0.5 + 2.5 * k as f64 / 64.0;
            let fx = f(x)?;
            if prev.1 * fx <= 0.0 {
                found = Some((prev.0, x, prev.1));
                break;
            }
            prev = (x, fx);
        }
        let Some((l, h, fl)) = found else {
            return Err(CoreError::numerical(format!(
                "no distension bracket in [0.5, 3] at pressure {pressure} kPa"
            )));
        };
        lo = l;
        hi = h;
        flo = fl;
    }
    // bisection to 1e-12 on the stretch
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let inc = 0.5 * (lo + hi);
    Ok(state.circ_stretch * inc)
}

/// Axial-azimuthal maps of diastolic/systolic dilatation and distensibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMaps {
    pub grid: CylindricalGrid,
    #[serde(skip)]
    pub dilatation_dia: Vec<f64>,
    #[serde(skip)]
    pub dilatation_sys: Vec<f64>,
    #[serde(skip)]
    pub distensibility: Vec<f64>,
    pub scenario: Scenario,
    /// Identifier of the insult profile this map was simulated from.
    pub source: String,
}

impl FieldMaps {
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.dilatation_dia.len() != n
            || self.dilatation_sys.len() != n
            || self.distensibility.len() != n
        {
            return Err(CoreError::format("field map length mismatch"));
        }
        for i in 0..n {
            let (d, s, dist) = (
                self.dilatation_dia[i],
                self.dilatation_sys[i],
                self.distensibility[i],
            );
            if !(s > d && d > 0.0 && dist > 0.0) {
                return Err(CoreError::numerical(format!(
                    "map invariant violated at node {i}: dia={d}, sys={s}, distensibility={dist}"
                )));
            }
        }
        Ok(())
    }
}

/// Scenario pressures scaled from the computed baseline.
pub fn scenario_pressures(scenario: Scenario, home: &HomeostaticState) -> ScenarioPressures {
    let (g, d, s) = scenario.pressure_ratios();
    ScenarioPressures {
        growth: g * home.pressure,
        diastolic: d * home.pressure,
        systolic: s * home.pressure,
    }
}

/// Run the nodewise pipeline over a whole profile.
pub fn simulate(
    profile: &InsultProfile,
    scenario: Scenario,
    params: &MaterialParams,
) -> Result<FieldMaps> {
    profile.validate()?;
    let home = homeostatic_state(params)?;
    let pressures = scenario_pressures(scenario, &home);

    let results: Vec<Result<(f64, f64)>> = profile
        .values
        .par_iter()
        .map(|&value| {
            let state = solve_equilibrium(
                value,
                profile.kind,
                profile.severity_max,
                scenario,
                params,
                &home,
            )?;
            let dia = distension(
                &state,
                pressures.diastolic,
                value,
                profile.kind,
                profile.severity_max,
                params,
                &home,
            )?;
            let sys = distension(
                &state,
                pressures.systolic,
                value,
                profile.kind,
                profile.severity_max,
                params,
                &home,
            )?;
            Ok((dia, sys))
        })
        .collect();

    let n = profile.values.len();
    let mut dia = Vec::with_capacity(n);
    let mut sys = Vec::with_capacity(n);
    let mut dist = Vec::with_capacity(n);
    for (idx, r) in results.into_iter().enumerate() {
        let (i, j) = profile.grid.coords(idx);
        let (d, s) = r.map_err(|e| {
            CoreError::numerical(format!("node (z={i}, theta={j}): {e}"))
        })?;
        dia.push(d);
        sys.push(s);
        dist.push((s - d) / d);
    }

    let maps = FieldMaps {
        grid: profile.grid.clone(),
        dilatation_dia: dia,
        dilatation_sys: sys,
        distensibility: dist,
        scenario,
        source: profile_id(profile),
    };
    maps.validate()?;
    Ok(maps)
}

/// Stable identifier for a profile, used to pair maps with their source.
pub fn profile_id(profile: &InsultProfile) -> String {
    let seed = profile
        .seed
        .map(|s| format!("s{s}"))
        .unwrap_or_else(|| "analytic".to_string());
    format!(
        "{}_{}_sev{:.6}",
        profile.kind.label(),
        seed,
        profile.severity_max
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insult::{evaluate_analytic, AnalyticInsultParams};
    use approx::assert_relative_eq;

    fn setup() -> (MaterialParams, HomeostaticState) {
        let p = MaterialParams::default();
        let h = homeostatic_state(&p).unwrap();
        (p, h)
    }

    #[test]
    fn zero_insult_is_the_homeostatic_root() {
        let (p, h) = setup();
        let s = solve_equilibrium(
            0.0,
            InsultKind::ElasticFiber,
            0.595,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        assert_relative_eq!(s.circ_stretch, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.growth, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.composition.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn max_elastin_severity_matches_grid_scan_oracle() {
        // frozen from an independent scipy root solve of the same system
        let (p, h) = setup();
        let s = solve_equilibrium(
            1.0,
            InsultKind::ElasticFiber,
            0.595,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        assert_relative_eq!(s.circ_stretch, 2.707_657_706_047_631, max_relative = 1e-8);
        assert_relative_eq!(s.growth, 10.983_188_561_567_289, max_relative = 1e-8);
    }

    #[test]
    fn severity_monotonicity_spot_check() {
        let (p, h) = setup();
        let s03 = solve_equilibrium(
            1.0,
            InsultKind::ElasticFiber,
            0.3,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        assert_relative_eq!(s03.circ_stretch, 1.425_856_786_264_383, max_relative = 1e-8);
        let s0595 = solve_equilibrium(
            1.0,
            InsultKind::ElasticFiber,
            0.595,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        assert!(s03.circ_stretch < s0595.circ_stretch);
    }

    #[test]
    fn hypertensive_zero_insult_state_matches_oracle() {
        let (p, h) = setup();
        let s = solve_equilibrium(
            0.0,
            InsultKind::ElasticFiber,
            0.475,
            Scenario::Hypertensive,
            &p,
            &h,
        )
        .unwrap();
        assert_relative_eq!(s.circ_stretch, 1.059_682_267_617_617, max_relative = 1e-8);
        assert_relative_eq!(s.growth, 1.811_039_601_122_074, max_relative = 1e-8);
    }

    #[test]
    fn growth_pressure_distension_is_identity() {
        let (p, h) = setup();
        let s = solve_equilibrium(
            0.6,
            InsultKind::ElasticFiber,
            0.4,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        let pressures = scenario_pressures(Scenario::Normotensive, &h);
        let lam = distension(
            &s,
            pressures.growth,
            0.6,
            InsultKind::ElasticFiber,
            0.4,
            &p,
            &h,
        )
        .unwrap();
        assert_relative_eq!(lam, s.circ_stretch, max_relative = 1e-10);
    }

    #[test]
    fn zero_insult_distensions_match_bisection_oracle() {
        let (p, h) = setup();
        let s = solve_equilibrium(
            0.0,
            InsultKind::ElasticFiber,
            0.595,
            Scenario::Normotensive,
            &p,
            &h,
        )
        .unwrap();
        let pr = scenario_pressures(Scenario::Normotensive, &h);
        let dia = distension(&s, pr.diastolic, 0.0, InsultKind::ElasticFiber, 0.595, &p, &h)
            .unwrap();
        let sys = distension(&s, pr.systolic, 0.0, InsultKind::ElasticFiber, 0.595, &p, &h)
            .unwrap();
        // frozen from the independent scipy bisection oracle
        assert_relative_eq!(dia, 0.985_334_923_083_678, max_relative = 1e-9);
        assert_relative_eq!(sys, 1.030_827_418_493_546, max_relative = 1e-9);
        assert!(sys > dia);
    }

    #[test]
    fn simulate_zero_insult_is_uniform() {
        let p = MaterialParams::default();
        let grid = CylindricalGrid::standard();
        let params = AnalyticInsultParams {
            end_value: 0.0,
            apex_value: 0.0,
            ..AnalyticInsultParams::default()
        };
        let prof = evaluate_analytic(&grid, &params, InsultKind::ElasticFiber, 0.595).unwrap();
        let maps = simulate(&prof, Scenario::Normotensive, &p).unwrap();
        let min = maps
            .dilatation_dia
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let max = maps
            .dilatation_dia
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max - min <= 1e-10, "spread {}", max - min);
        maps.validate().unwrap();
    }

    #[test]
    fn elastin_bump_colocates_max_dilatation_and_min_distensibility() {
        let p = MaterialParams::default();
        let grid = CylindricalGrid::standard();
        let prof = evaluate_analytic(
            &grid,
            &AnalyticInsultParams::default(),
            InsultKind::ElasticFiber,
            0.595,
        )
        .unwrap();
        let maps = simulate(&prof, Scenario::Normotensive, &p).unwrap();
        let argmax_dia = maps
            .dilatation_dia
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let argmin_dist = maps
            .distensibility
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_dia, argmin_dist);
        // and the apex node of the insult is that location
        let apex = prof
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(apex, argmax_dia);
    }

    #[test]
    fn out_of_range_insult_value_is_rejected() {
        let (p, h) = setup();
        assert!(solve_equilibrium(
            1.5,
            InsultKind::ElasticFiber,
            0.5,
            Scenario::Normotensive,
            &p,
            &h
        )
        .is_err());
    }

    #[test]
    fn runaway_mechanosensing_severity_reports_no_root() {
        // beyond delta ~ 0.22 the equilibrated root leaves the box
        let (p, h) = setup();
        let r = solve_equilibrium(
            1.0,
            InsultKind::Mechanosensing,
            0.25,
            Scenario::Normotensive,
            &p,
            &h,
        );
        assert!(r.is_err());
    }
}
