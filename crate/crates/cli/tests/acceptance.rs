//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them). The expensive
//! artifacts — simulated case datasets and the multi-trial trained
//! evaluations — are computed once and shared across criteria.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use taa_core::cases::{case_jobs, case_spec, GeometrySpec, RunConfig};
use taa_core::dataset::{
    build_sample, grid_query_points, read_dataset, read_pgm, split, write_dataset, write_pgm,
    Dataset, InputMode, LocationEncoding,
};
use taa_core::deeponet::{
    evaluate, load_checkpoint, save_checkpoint, DeepOnetModel, DeepOnetSpec, EvalReport,
    TrainConfig,
};
use taa_core::grf::covariance_matrix;
use taa_core::insult::{
    evaluate_analytic, latent_moments, AnalyticInsultParams, InsultKind, InsultProfile,
    RandomInsultSampler,
};
use taa_core::material::Scenario;
use taa_core::nn::{finite_diff_grad, lbfgs_minimize, Activation, Batch, LayerSpec, Network, Shape};
use taa_core::special::{ks_statistic, normal_cdf};
use taa_core::wall::{homeostatic_state, mixture_stress, BiaxialStretch};
use taa_core::{growth, CylindricalGrid, FieldMaps, MaterialParams};

/// Training protocol used for every trained evaluation in this suite: a
/// compact architecture (the default-width models are exercised separately
/// by the parameter-count criterion) with a cosine Adam phase and a long
/// L-BFGS polish.
fn suite_spec(mode: InputMode) -> DeepOnetSpec {
    DeepOnetSpec {
        latent: 64,
        width: 64,
        trunk_width: 128,
        conv_filters: (8, 16),
        ..DeepOnetSpec::with_mode(mode)
    }
}

fn suite_train_config() -> TrainConfig {
    TrainConfig {
        adam_iters: 1200,
        learning_rate: 3e-3,
        learning_rate_final: Some(2e-4),
        lbfgs_iters: 800,
        seed: 1000,
        trials: 5,
    }
}

const NOISE_LEVEL: f64 = 0.05;

// ---------------------------------------------------------------------------
// shared artifacts
// ---------------------------------------------------------------------------

struct CaseArtifacts {
    pairs: Vec<(InsultProfile, FieldMaps)>,
    /// Wall-clock cost of enumeration + simulation.
    sim_elapsed: Duration,
}

fn simulate_case(case_id: u8) -> CaseArtifacts {
    let config = RunConfig::default();
    let case = case_spec(case_id).unwrap();
    let jobs = case_jobs(&config, &case);
    let params = MaterialParams::default();
    let t0 = Instant::now();
    let pairs: Vec<(InsultProfile, FieldMaps)> = jobs
        .par_iter()
        .map(|job| {
            let GeometrySpec::Analytic(geom) = &job.geometry else {
                unreachable!("cases 1-5 are analytic")
            };
            let profile =
                evaluate_analytic(&config.grid, geom, job.kind, job.severity).unwrap();
            let mut maps = growth::simulate(&profile, job.scenario, &params).unwrap();
            maps.source = job.id.clone();
            (profile, maps)
        })
        .collect();
    CaseArtifacts {
        pairs,
        sim_elapsed: t0.elapsed(),
    }
}

fn case1_artifacts() -> &'static CaseArtifacts {
    static CELL: OnceLock<CaseArtifacts> = OnceLock::new();
    CELL.get_or_init(|| simulate_case(1))
}

fn case2_artifacts() -> &'static CaseArtifacts {
    static CELL: OnceLock<CaseArtifacts> = OnceLock::new();
    CELL.get_or_init(|| simulate_case(2))
}

fn build_case_dataset(arts: &CaseArtifacts, mode: InputMode) -> Dataset {
    let config = RunConfig::default();
    let samples: Vec<_> = arts
        .pairs
        .iter()
        .map(|(profile, maps)| {
            build_sample(
                maps,
                profile,
                mode,
                LocationEncoding::Trig,
                maps.source.clone(),
            )
            .unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let (train_ids, test_ids) = split(&samples, config.test_fraction, &mut rng).unwrap();
    Dataset {
        grid: config.grid.clone(),
        mode,
        query_points: grid_query_points(&config.grid),
        samples,
        train_ids,
        test_ids,
        seed: config.master_seed,
    }
}

struct TrainedEvals {
    /// (case, arch label) -> evaluation over 5 trials with 5% test noise.
    reports: BTreeMap<(u8, &'static str), EvalReport>,
    /// Wall-clock of the full case-1 image segment (simulate + build +
    /// 5-trial train/eval), for the runtime criterion.
    case1_image_elapsed: Duration,
}

const ARCHS: [(&str, InputMode); 3] = [
    ("sensor25", InputMode::Sensor { spacing: 1 }),
    ("sensor9", InputMode::Sensor { spacing: 2 }),
    ("image", InputMode::Image),
];

fn trained_evals() -> &'static TrainedEvals {
    static CELL: OnceLock<TrainedEvals> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = suite_train_config();
        let mut reports = BTreeMap::new();

        // case-1 image first (criterion 9). The end-to-end cost is the
        // simulation sweep plus dataset build plus the 5-trial protocol,
        // regardless of which test happened to initialize the shared
        // artifacts first.
        let arts1 = case1_artifacts();
        let t0 = Instant::now();
        let ds = build_case_dataset(arts1, InputMode::Image);
        let report = evaluate(&ds, &suite_spec(ds.mode), &cfg, NOISE_LEVEL).unwrap();
        let case1_image_elapsed = arts1.sim_elapsed + t0.elapsed();
        eprintln!(
            "case 1 image: clean {:.4} +/- {:.4}, noisy {:.4} ({:.0}s incl. simulation)",
            report.clean_mean,
            report.clean_std,
            report.noisy_mean,
            case1_image_elapsed.as_secs_f64()
        );
        reports.insert((1u8, "image"), report);

        for (case_id, arts) in [(1u8, case1_artifacts()), (2u8, case2_artifacts())] {
            for (label, mode) in ARCHS {
                if reports.contains_key(&(case_id, label)) {
                    continue;
                }
                let t = Instant::now();
                let ds = build_case_dataset(arts, mode);
                let report = evaluate(&ds, &suite_spec(mode), &cfg, NOISE_LEVEL).unwrap();
                eprintln!(
                    "case {case_id} {label}: clean {:.4} +/- {:.4}, noisy {:.4} ({:.0}s)",
                    report.clean_mean,
                    report.clean_std,
                    report.noisy_mean,
                    t.elapsed().as_secs_f64()
                );
                reports.insert((case_id, label), report);
            }
        }
        TrainedEvals {
            reports,
            case1_image_elapsed,
        }
    })
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_grf_propensity() {
    let t0 = Instant::now();
    let grid = CylindricalGrid::standard();
    let fields_per_combo = 2000usize;
    for &propensity in &[0.15, 0.35, 0.5] {
        for &softness in &[0.2, 0.6] {
            let params = taa_core::insult::RandomInsultParams {
                propensity,
                boundary_softness: softness,
                ..Default::default()
            };
            let sampler =
                RandomInsultSampler::new(&grid, &params, InsultKind::ElasticFiber, 0.6).unwrap();
            let above: usize = (0..fields_per_combo)
                .into_par_iter()
                .map(|seed| {
                    let stages = sampler.sample_stages(seed as u64).unwrap();
                    stages.matched.iter().filter(|&&v| v > 0.5).count()
                })
                .sum();
            let total = fields_per_combo * grid.len();
            let fraction = above as f64 / total as f64;
            assert!(
                (fraction - propensity).abs() <= 0.02,
                "criterion 1: FAIL at phi={propensity}, eps={softness}: pooled fraction {fraction}"
            );
            println!(
                "criterion 1: phi={propensity} eps={softness}: pooled fraction {fraction:.4} within 0.02"
            );
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_secs(180),
        "criterion 1: FAIL runtime {elapsed:?} >= 3 min"
    );
    println!("criterion 1: PASS (runtime {:.0}s < 180s)", elapsed.as_secs_f64());
}

#[test]
fn criterion_02_grf_marginal_ks() {
    let grid = CylindricalGrid::standard();
    let params = taa_core::insult::RandomInsultParams::default();
    let sampler = RandomInsultSampler::new(&grid, &params, InsultKind::ElasticFiber, 0.6).unwrap();
    let moments = sampler.moments();
    let pooled: Vec<f64> = (0..100u64)
        .into_par_iter()
        .flat_map_iter(|seed| sampler.sample_stages(seed).unwrap().matched)
        .collect();
    let sd = moments.std_dev();
    let ks = ks_statistic(&pooled, |x| normal_cdf((x - moments.mean) / sd));
    assert!(ks < 0.05, "criterion 2: FAIL KS statistic {ks}");
    println!("criterion 2: PASS (KS {ks:.4} < 0.05 over {} values)", pooled.len());
}

#[test]
fn criterion_03_closed_form_moments() {
    for &eps in &[0.2, 0.6, 1.0] {
        let m = latent_moments(0.5, eps).unwrap();
        assert!(
            (m.mean - 0.5).abs() < 1e-12,
            "criterion 3: FAIL mean {} at eps={eps}",
            m.mean
        );
        let target = 1.0 / (2.0 * std::f64::consts::PI * eps * eps);
        assert!(
            (m.variance - target).abs() < 1e-12 * target.max(1.0),
            "criterion 3: FAIL variance {} vs {target}",
            m.variance
        );
    }
    // derived values frozen from the independent erf-inverse oracle
    let m = latent_moments(0.35, 0.2).unwrap();
    assert!(
        (m.mean - (-0.213_611_585_659_925_90)).abs() < 1e-10,
        "criterion 3: FAIL derived mean {}",
        m.mean
    );
    assert!(
        (m.variance - 3.429_885_561_497_327_4).abs() < 1e-10 * 3.43,
        "criterion 3: FAIL derived variance {}",
        m.variance
    );
    println!("criterion 3: PASS (trivial moments to 1e-12, derived to 1e-10)");
}

#[test]
fn criterion_04_covariance_periodicity_and_spectrum() {
    let grid = CylindricalGrid::standard();
    let variance = 1.7;
    let k = covariance_matrix(&grid, 1.5, 2.0, variance).unwrap();

    // exact symmetry
    for p in 0..grid.len() {
        for q in (p + 1)..grid.len() {
            assert_eq!(k[(p, q)], k[(q, p)], "criterion 4: FAIL symmetry at ({p},{q})");
        }
    }
    // exact invariance under rotation of the circumferential index
    for shift in [1usize, 7] {
        for zi in 0..grid.n_z {
            for zj in 0..grid.n_z {
                for t1 in 0..grid.n_theta {
                    for t2 in 0..grid.n_theta {
                        let a = k[(grid.index(zi, t1), grid.index(zj, t2))];
                        let b = k[(
                            grid.index(zi, (t1 + shift) % grid.n_theta),
                            grid.index(zj, (t2 + shift) % grid.n_theta),
                        )];
                        assert_eq!(a, b, "criterion 4: FAIL rotation {shift}");
                    }
                }
            }
        }
    }
    // spectrum before jitter
    let eigen = nalgebra::SymmetricEigen::new(k);
    let min_eig = eigen.eigenvalues.min();
    assert!(
        min_eig > -1e-8 * variance,
        "criterion 4: FAIL min eigenvalue {min_eig}"
    );
    println!(
        "criterion 4: PASS (exact symmetry/rotation, min eigenvalue {min_eig:.3e} > {:.1e})",
        -1e-8 * variance
    );
}

#[test]
fn criterion_05_equilibrium_solver() {
    let params = MaterialParams::default();
    let home = homeostatic_state(&params).unwrap();
    let grid = CylindricalGrid::standard();

    // zero-insult residuals, recomputed independently of the solver
    let state = growth::solve_equilibrium(
        0.0,
        InsultKind::ElasticFiber,
        0.595,
        Scenario::Normotensive,
        &params,
        &home,
    )
    .unwrap();
    let comp = state.composition;
    let stress = mixture_stress(
        BiaxialStretch::new(state.circ_stretch, 1.0),
        BiaxialStretch::UNIT,
        comp,
        params.c_elastin,
        &params,
    )
    .unwrap();
    let radius = home.mid_radius * state.circ_stretch;
    let r1 = stress.theta - home.pressure * radius / state.thickness;
    let r2 = stress.mean() - home.stress_mean;
    assert!(
        r1.abs() <= 1e-10 * home.stress_mean && r2.abs() <= 1e-10 * home.stress_mean,
        "criterion 5: FAIL residuals ({r1:.3e}, {r2:.3e})"
    );

    // zero-insult uniformity
    let flat = evaluate_analytic(
        &grid,
        &AnalyticInsultParams {
            apex_value: 0.0,
            end_value: 0.0,
            ..Default::default()
        },
        InsultKind::ElasticFiber,
        0.595,
    )
    .unwrap();
    let maps = growth::simulate(&flat, Scenario::Normotensive, &params).unwrap();
    let min = maps.dilatation_dia.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = maps
        .dilatation_dia
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max - min <= 1e-10, "criterion 5: FAIL uniformity {}", max - min);

    // severity monotonicity over the five elastin levels
    let levels = taa_core::cases::severity_levels(0.0595, 0.595, 5);
    let mut last = 0.0;
    for &sev in &levels {
        let s = growth::solve_equilibrium(
            1.0,
            InsultKind::ElasticFiber,
            sev,
            Scenario::Normotensive,
            &params,
            &home,
        )
        .unwrap();
        let pr = growth::scenario_pressures(Scenario::Normotensive, &home);
        let dia = growth::distension(
            &s,
            pr.diastolic,
            1.0,
            InsultKind::ElasticFiber,
            sev,
            &params,
            &home,
        )
        .unwrap();
        assert!(
            dia >= last,
            "criterion 5: FAIL monotonicity at severity {sev}: {dia} < {last}"
        );
        last = dia;
    }

    // systolic strictly exceeds diastolic on a full simulated profile
    let bump = evaluate_analytic(
        &grid,
        &AnalyticInsultParams::default(),
        InsultKind::ElasticFiber,
        0.595,
    )
    .unwrap();
    let maps = growth::simulate(&bump, Scenario::Normotensive, &params).unwrap();
    for i in 0..grid.len() {
        assert!(
            maps.dilatation_sys[i] > maps.dilatation_dia[i],
            "criterion 5: FAIL ordering at node {i}"
        );
    }

    // full sweep timing (all case-1 profiles at production scale)
    let arts = case1_artifacts();
    assert!(
        arts.sim_elapsed < Duration::from_secs(300),
        "criterion 5: FAIL sweep took {:?}",
        arts.sim_elapsed
    );
    println!(
        "criterion 5: PASS (residuals < 1e-10 sigma, uniform to {:.1e}, monotone, {}-sample sweep {:.1}s < 300s)",
        max - min,
        arts.pairs.len(),
        arts.sim_elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_06_hypertension_dilatation() {
    let params = MaterialParams::default();
    let grid = CylindricalGrid::standard();
    let flat = evaluate_analytic(
        &grid,
        &AnalyticInsultParams {
            apex_value: 0.0,
            end_value: 0.0,
            ..Default::default()
        },
        InsultKind::ElasticFiber,
        0.475,
    )
    .unwrap();
    let normo = growth::simulate(&flat, Scenario::Normotensive, &params).unwrap();
    let hyper = growth::simulate(&flat, Scenario::Hypertensive, &params).unwrap();
    for i in 0..grid.len() {
        assert!(
            hyper.dilatation_dia[i] > normo.dilatation_dia[i],
            "criterion 6: FAIL at node {i}: {} <= {}",
            hyper.dilatation_dia[i],
            normo.dilatation_dia[i]
        );
    }
    println!(
        "criterion 6: PASS (hypertensive {:.6} > normotensive {:.6} at every node)",
        hyper.dilatation_dia[0], normo.dilatation_dia[0]
    );
}

#[test]
fn criterion_07_gradient_fidelity() {
    let mut worst_err = 0.0f64;
    for seed in 0..20u64 {
        // layered stack covering every layer type
        let net = Network::new(
            Shape::Image {
                channels: 1,
                height: 6,
                width: 6,
            },
            vec![
                LayerSpec::Conv2D {
                    in_channels: 1,
                    filters: 2,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    activation: Activation::Tanh,
                },
                LayerSpec::MaxPool { window: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    input: 2 * 3 * 3,
                    output: 4,
                    activation: Activation::Tanh,
                },
                LayerSpec::Dense {
                    input: 4,
                    output: 2,
                    activation: Activation::Identity,
                },
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let mut p = vec![0.0; net.param_count()];
        net.init_params(&mut p, &mut rng);
        let x = ndarray::Array4::from_shape_fn((2, 1, 6, 6), |_| {
            use rand::Rng;
            rng.random_range(-1.0..1.0)
        });

        let loss_of = |params: &[f64]| -> f64 {
            let (out, _) = net.forward(params, Batch::Img(x.clone())).unwrap();
            out.as_mat().iter().map(|v| v * v).sum()
        };
        let (out, cache) = net.forward(&p, Batch::Img(x.clone())).unwrap();
        let dy = 2.0 * out.as_mat();
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&p, &cache, Batch::Mat(dy), &mut grads);
        let mut f = loss_of;
        let fd = finite_diff_grad(&mut f, &p, 1e-6);
        for (a, b) in grads.iter().zip(&fd) {
            let err = (a - b).abs() / f64::max(1.0, a.abs().max(b.abs()));
            worst_err = worst_err.max(err);
            assert!(err < 1e-6, "criterion 7: FAIL layer stack seed {seed}: {err}");
        }
    }

    // full operator-network losses, both modes
    for seed in 0..20u64 {
        for mode in [InputMode::Sensor { spacing: 2 }, InputMode::Image] {
            let spec = DeepOnetSpec {
                latent: 3,
                width: 5,
                trunk_width: 5,
                depth: 3,
                conv_filters: (2, 2),
                location_dim: 3,
                image_height: 9,
                image_width: 8,
                mode,
            };
            let mut model = DeepOnetModel::new(spec.clone()).unwrap();
            model.init(777 + seed);
            let sample = synthetic_sample(&spec, seed);
            let inputs = model.branch_batches(&[&sample]).unwrap();
            let pts: Vec<[f32; 3]> = (0..4)
                .map(|k| {
                    let th = k as f64 + seed as f64 * 0.1;
                    [th.cos() as f32, th.sin() as f32, 0.2 * k as f32]
                })
                .collect();
            let points = DeepOnetModel::trunk_input(&pts);
            let targets = ndarray::Array2::from_shape_fn((1, 4), |(_, j)| 0.1 * j as f64);
            let (_, grads) = model
                .loss_and_grad(&model.params, &inputs, &points, &targets)
                .unwrap();
            let mut f = |p: &[f64]| model.loss(p, &inputs, &points, &targets).unwrap();
            let fd = finite_diff_grad(&mut f, &model.params, 1e-6);
            for (a, b) in grads.iter().zip(&fd) {
                let err = (a - b).abs() / f64::max(1.0, a.abs().max(b.abs()));
                worst_err = worst_err.max(err);
                assert!(err < 1e-6, "criterion 7: FAIL operator net seed {seed}: {err}");
            }
        }
    }
    println!("criterion 7: PASS (worst relative gradient error {worst_err:.2e} over 20 seeds)");
}

fn synthetic_sample(spec: &DeepOnetSpec, seed: u64) -> taa_core::dataset::SampleRecord {
    use taa_core::dataset::{BranchInputs, GrayscaleImage, ImageInputs, SensorInputs};
    let f = |k: u64| (((seed * 31 + k) % 17) as f32) / 17.0 - 0.4;
    let inputs = match spec.mode {
        InputMode::Sensor { .. } => BranchInputs::Sensor(SensorInputs {
            dilatation: (0..9).map(f).collect(),
            dilatation_loc: vec![f(10), f(11), f(12)],
            distensibility: (13..22).map(f).collect(),
            distensibility_loc: vec![f(23), f(24), f(25)],
            pressure_flag: (seed % 2) as f32,
        }),
        InputMode::Image => {
            let n = (spec.image_height * spec.image_width) as u64;
            BranchInputs::Image(ImageInputs {
                dilatation: GrayscaleImage {
                    width: spec.image_width,
                    height: spec.image_height,
                    pixels: (0..n).map(|k| f(k).abs()).collect(),
                },
                distensibility: GrayscaleImage {
                    width: spec.image_width,
                    height: spec.image_height,
                    pixels: (0..n).map(|k| f(k + 3).abs()).collect(),
                },
                pressure_flag: 0.0,
            })
        }
    };
    taa_core::dataset::SampleRecord {
        case_id: format!("syn{seed}"),
        kind: InsultKind::ElasticFiber,
        scenario: Scenario::Normotensive,
        severity_max: 0.5,
        inputs,
        targets: vec![0.3; 4],
    }
}

#[test]
fn criterion_08_lbfgs_quadratic() {
    let a = nalgebra::DMatrix::from_row_slice(
        5,
        5,
        &[
            4.0, 1.0, 0.0, 0.5, 0.0, //
            1.0, 3.0, 0.5, 0.0, 0.0, //
            0.0, 0.5, 5.0, 1.0, 0.5, //
            0.5, 0.0, 1.0, 2.5, 0.0, //
            0.0, 0.0, 0.5, 0.0, 1.5,
        ],
    );
    let b = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -1.0]);
    let mut f = |x: &[f64]| {
        let xv = nalgebra::DVector::from_column_slice(x);
        let ax = &a * &xv;
        let loss = 0.5 * xv.dot(&ax) - b.dot(&xv);
        let grad: Vec<f64> = (&ax - &b).iter().copied().collect();
        (loss, grad)
    };
    let mut x = vec![0.0; 5];
    let report = lbfgs_minimize(&mut f, &mut x, 25, 1e-10);
    assert!(
        report.converged && report.iterations <= 25,
        "criterion 8: FAIL converged={} in {} iterations",
        report.converged,
        report.iterations
    );
    let (_, g) = f(&x);
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(gnorm < 1e-10, "criterion 8: FAIL gradient norm {gnorm}");
    // accepted steps strictly decrease the loss (up to the f64 resolution
    // of the minimum value)
    for w in report.loss_trace.windows(2) {
        assert!(
            w[1] < w[0] || (w[0] - w[1]).abs() <= 16.0 * f64::EPSILON * w[0].abs(),
            "criterion 8: FAIL non-decreasing step {} -> {}",
            w[0],
            w[1]
        );
    }
    // cross-check against the direct linear solve
    let solution = a.clone().lu().solve(&b).unwrap();
    for (xi, si) in x.iter().zip(solution.iter()) {
        assert!((xi - si).abs() < 1e-8, "criterion 8: FAIL {xi} vs {si}");
    }
    println!(
        "criterion 8: PASS (gradient norm {gnorm:.2e} in {} iterations)",
        report.iterations
    );
}

#[test]
fn criterion_09_case1_image_end_to_end() {
    let evals = trained_evals();
    let report = &evals.reports[&(1u8, "image")];
    let ds_train = build_case_dataset(case1_artifacts(), InputMode::Image)
        .train_ids
        .len();
    assert!(
        ds_train >= 500,
        "criterion 9: FAIL training split {ds_train} < 500"
    );
    assert!(
        report.clean_mean < 0.10,
        "criterion 9: FAIL mean clean error {:.4} >= 0.10",
        report.clean_mean
    );
    assert!(
        evals.case1_image_elapsed < Duration::from_secs(3600),
        "criterion 9: FAIL runtime {:?}",
        evals.case1_image_elapsed
    );
    println!(
        "criterion 9: PASS (clean {:.4} +/- {:.4} over 5 trials, {} train samples, {:.0}s < 3600s)",
        report.clean_mean,
        report.clean_std,
        ds_train,
        evals.case1_image_elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_10_architecture_ordering() {
    let evals = trained_evals();
    for case in [1u8, 2u8] {
        let image = evals.reports[&(case, "image")].clean_mean;
        let s9 = evals.reports[&(case, "sensor9")].clean_mean;
        let s25 = evals.reports[&(case, "sensor25")].clean_mean;
        assert!(
            image < s9 && s9 < s25,
            "criterion 10: FAIL case {case}: image {image:.4}, sensor9 {s9:.4}, sensor25 {s25:.4}"
        );
        println!(
            "criterion 10: case {case}: image {image:.4} < sensor9 {s9:.4} < sensor25 {s25:.4}"
        );
    }
    println!("criterion 10: PASS");
}

#[test]
fn criterion_11_noise_robustness_ordering() {
    let evals = trained_evals();
    let inflation = |label: &'static str| {
        let r = &evals.reports[&(2u8, label)];
        r.noisy_mean / r.clean_mean
    };
    let image = inflation("image");
    let s9 = inflation("sensor9");
    let s25 = inflation("sensor25");
    assert!(
        image < s9 && image < s25,
        "criterion 11: FAIL inflation image {image:.2}, sensor9 {s9:.2}, sensor25 {s25:.2}"
    );
    println!(
        "criterion 11: PASS (inflation factors: image {image:.2} < sensor9 {s9:.2}, sensor25 {s25:.2})"
    );
}

#[test]
fn criterion_12_parameter_count_ordering() {
    let image = DeepOnetModel::new(DeepOnetSpec::with_mode(InputMode::Image)).unwrap();
    let sensor25 =
        DeepOnetModel::new(DeepOnetSpec::with_mode(InputMode::Sensor { spacing: 1 })).unwrap();
    assert!(
        image.param_count() < sensor25.param_count(),
        "criterion 12: FAIL {} >= {}",
        image.param_count(),
        sensor25.param_count()
    );

    // hand count on a reduced config: dense (in+1)*out, conv (9*c_in+1)*f
    let spec = DeepOnetSpec {
        latent: 4,
        width: 6,
        trunk_width: 6,
        depth: 3,
        conv_filters: (2, 3),
        location_dim: 3,
        image_height: 9,
        image_width: 8,
        mode: InputMode::Image,
    };
    let model = DeepOnetModel::new(spec).unwrap();
    let dense = |i: usize, o: usize| (i + 1) * o;
    let cnn = (9 + 1) * 2 + (9 * 2 + 1) * 3 + dense(3, 4);
    let flag = dense(1, 6) + dense(6, 6) + dense(6, 4);
    let trunk = dense(3, 6) + dense(6, 6) + dense(6, 4);
    let expected = 2 * cnn + flag + trunk;
    assert_eq!(
        model.param_count(),
        expected,
        "criterion 12: FAIL hand count mismatch"
    );
    println!(
        "criterion 12: PASS (image {} < sensor25 {}; reduced-config hand count {})",
        image.param_count(),
        sensor25.param_count(),
        expected
    );
}

#[test]
fn criterion_13_serialization_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let grid = CylindricalGrid::standard();
    let params = MaterialParams::default();

    // dataset roundtrip, bitwise
    let profile = evaluate_analytic(
        &grid,
        &AnalyticInsultParams::default(),
        InsultKind::ElasticFiber,
        0.3,
    )
    .unwrap();
    let maps = growth::simulate(&profile, Scenario::Normotensive, &params).unwrap();
    let samples: Vec<_> = (0..12)
        .map(|k| {
            build_sample(
                &maps,
                &profile,
                InputMode::Image,
                LocationEncoding::Trig,
                format!("s{k}"),
            )
            .unwrap()
        })
        .collect();
    let dataset = Dataset {
        grid: grid.clone(),
        mode: InputMode::Image,
        query_points: grid_query_points(&grid),
        train_ids: (0..10).collect(),
        test_ids: vec![10, 11],
        samples,
        seed: 5,
    };
    let ds_dir = dir.path().join("ds");
    write_dataset(&ds_dir, &dataset, None).unwrap();
    let back = read_dataset(&ds_dir).unwrap();
    assert_eq!(back, dataset, "criterion 13: FAIL dataset roundtrip");
    // payload bytes stable across rewrites
    let ds_dir2 = dir.path().join("ds2");
    write_dataset(&ds_dir2, &back, None).unwrap();
    assert_eq!(
        std::fs::read(ds_dir.join("payload.bin")).unwrap(),
        std::fs::read(ds_dir2.join("payload.bin")).unwrap(),
        "criterion 13: FAIL payload bytes differ"
    );

    // checkpoint roundtrip, bitwise
    let mut model = DeepOnetModel::new(suite_spec(InputMode::Image)).unwrap();
    model.init(1);
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&ckpt, &model).unwrap();
    let loaded = load_checkpoint(&ckpt).unwrap();
    assert_eq!(loaded.params, model.params, "criterion 13: FAIL checkpoint");

    // PGM export re-reads to the quantized values exactly
    let image = taa_core::dataset::to_grayscale(&grid, &maps.dilatation_dia).unwrap();
    let pgm = dir.path().join("img.pgm");
    write_pgm(&pgm, &image).unwrap();
    let re = read_pgm(&pgm).unwrap();
    for (a, b) in image.pixels.iter().zip(&re.pixels) {
        let quantized = ((*a as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0)) / 255.0;
        assert!(
            (quantized - *b as f64).abs() < 1e-9,
            "criterion 13: FAIL PGM {quantized} vs {b}"
        );
    }
    println!("criterion 13: PASS (dataset, checkpoint and PGM roundtrips exact)");
}

#[test]
fn criterion_14_run_case_determinism() {
    // full run-case pipeline twice at reduced scale, byte-compared
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("small.toml");
    std::fs::write(
        &config_path,
        r#"
z_widths = [2.0, 4.0]
theta_widths_deg = [100.0, 360.0]
z_apexes = [6.0, 7.5, 9.0]
theta_apexes_deg = [0.0, 180.0]
severity_levels = 2
latent_width = 8
fnn_width = 8
fnn_depth = 3
conv_filters = [2, 3]
adam_iters = 25
lbfgs_iters = 5
trials = 2
master_seed = 77
"#,
    )
    .unwrap();

    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_taa"))
            .args([
                "--config",
                config_path.to_str().unwrap(),
                "run-case",
                "--case",
                "1",
                "--arch",
                "image",
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "criterion 14: FAIL run-case exited {status}");
    };
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    run(&out1);
    run(&out2);

    let mut files1 = collect_files(&out1);
    let mut files2 = collect_files(&out2);
    files1.sort();
    files2.sort();
    let rel = |base: &std::path::Path, files: &[std::path::PathBuf]| -> Vec<String> {
        files
            .iter()
            .map(|f| f.strip_prefix(base).unwrap().to_string_lossy().into_owned())
            .collect()
    };
    assert_eq!(
        rel(&out1, &files1),
        rel(&out2, &files2),
        "criterion 14: FAIL different file sets"
    );
    let mut checked = 0;
    for (a, b) in files1.iter().zip(&files2) {
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "criterion 14: FAIL bytes differ in {}",
            a.display()
        );
        checked += 1;
    }
    assert!(checked > 10, "criterion 14: FAIL too few artifacts ({checked})");
    println!("criterion 14: PASS ({checked} artifacts byte-identical across reruns)");
}

fn collect_files(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out
}
