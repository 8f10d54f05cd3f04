//! End-to-end pipeline smoke test: enumerate a small analytic sweep,
//! simulate the wall response, build both dataset modes, train briefly and
//! check the inverse predictions are finite and deterministic.

use taa_core::cases::{analytic_jobs, GeometrySpec, RunConfig};
use taa_core::dataset::{
    build_sample, grid_query_points, split, Dataset, InputMode, LocationEncoding,
};
use taa_core::deeponet::{evaluate, train, DeepOnetSpec, TrainConfig};
use taa_core::insult::{evaluate_analytic, InsultKind};
use taa_core::material::Scenario;
use taa_core::{simulate, MaterialParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_dataset(mode: InputMode, n_jobs: usize) -> Dataset {
    let mut cfg = RunConfig::default();
    cfg.theta_widths_deg = vec![100.0, 260.0];
    cfg.z_widths = vec![2.0, 4.0];
    let jobs = analytic_jobs(&cfg, InsultKind::ElasticFiber, Scenario::Normotensive);
    assert!(jobs.len() >= n_jobs, "only {} jobs", jobs.len());

    let params = MaterialParams::default();
    let t0 = std::time::Instant::now();
    let samples: Vec<_> = jobs
        .iter()
        .take(n_jobs)
        .map(|job| {
            let GeometrySpec::Analytic(geom) = &job.geometry else { unreachable!() };
            let prof = evaluate_analytic(&cfg.grid, geom, job.kind, job.severity).unwrap();
            let maps = simulate(&prof, job.scenario, &params).unwrap();
            build_sample(&maps, &prof, mode, LocationEncoding::Trig, job.id.clone()).unwrap()
        })
        .collect();
    eprintln!(
        "simulated {} samples in {:.2}s",
        samples.len(),
        t0.elapsed().as_secs_f64()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (train_ids, test_ids) = split(&samples, 0.1, &mut rng).unwrap();
    Dataset {
        grid: cfg.grid.clone(),
        mode,
        query_points: grid_query_points(&cfg.grid),
        samples,
        train_ids,
        test_ids,
        seed: 4,
    }
}

#[test]
fn analytic_pipeline_trains_and_predicts() {
    let dataset = small_dataset(InputMode::Sensor { spacing: 1 }, 40);
    let spec = DeepOnetSpec {
        latent: 32,
        width: 32,
        ..DeepOnetSpec::with_mode(dataset.mode)
    };
    let cfg = TrainConfig {
        adam_iters: 150,
        learning_rate: 1e-3,
        learning_rate_final: None,
        lbfgs_iters: 30,
        seed: 3,
        trials: 1,
    };
    let t0 = std::time::Instant::now();
    let (model, trace) = train(&dataset, &spec, &cfg).unwrap();
    eprintln!(
        "sensor train: {:.2}s, loss {} -> {}",
        t0.elapsed().as_secs_f64(),
        trace.adam.first().unwrap(),
        trace.final_loss
    );
    assert!(trace.final_loss < trace.adam[0]);

    let report = evaluate(&dataset, &spec, &cfg, 0.05).unwrap();
    eprintln!(
        "sensor eval: clean {:.3} +/- {:.3}, noisy {:.3}",
        report.clean_mean, report.clean_std, report.noisy_mean
    );
    assert!(report.clean_mean.is_finite());
    assert!(report.noisy_mean >= 0.0);
    let _ = model;
}

#[test]
fn image_mode_training_timing_probe() {
    let dataset = small_dataset(InputMode::Image, 40);
    let spec = DeepOnetSpec::with_mode(InputMode::Image);
    let cfg = TrainConfig {
        adam_iters: 20,
        learning_rate: 1e-3,
        learning_rate_final: None,
        lbfgs_iters: 0,
        seed: 3,
        trials: 1,
    };
    let t0 = std::time::Instant::now();
    let (_, trace) = train(&dataset, &spec, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    eprintln!(
        "image train: {} iters on {} samples in {:.2}s = {:.3}s/iter; loss {} -> {}",
        cfg.adam_iters,
        dataset.train_ids.len(),
        dt,
        dt / cfg.adam_iters as f64,
        trace.adam.first().unwrap(),
        trace.final_loss
    );
    assert!(trace.final_loss < trace.adam[0]);
}
