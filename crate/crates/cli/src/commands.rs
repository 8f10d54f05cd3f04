//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use taa_core::cases::{case_jobs, case_spec, shape_seed, GeometrySpec, RunConfig};
use taa_core::dataset::{
    build_sample, grid_query_points, split, Dataset, InputMode, SampleRecord,
};
use taa_core::deeponet::{self, DeepOnetSpec, TrainConfig};
use taa_core::error::{CoreError, Result};
use taa_core::insult::{
    evaluate_analytic, InsultKind, InsultProfile, RandomInsultSampler,
};
use taa_core::io::{self, Provenance};
use taa_core::material::Scenario;
use taa_core::{growth, CylindricalGrid, FieldMaps};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::report::{merge_row, read_rows, write_report, ReportRow};
use crate::{ArchArg, KindArg, ScenarioArg};

/// Load the configuration, applying the optional TOML file and seed flag.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| CoreError::parameter(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.master_seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn kinds_of(arg: KindArg) -> Vec<InsultKind> {
    match arg {
        KindArg::ElasticFiber => vec![InsultKind::ElasticFiber],
        KindArg::Mechanosensing => vec![InsultKind::Mechanosensing],
        KindArg::Both => vec![InsultKind::ElasticFiber, InsultKind::Mechanosensing],
    }
}

fn scenarios_of(arg: ScenarioArg) -> Vec<Scenario> {
    match arg {
        ScenarioArg::Normotensive => vec![Scenario::Normotensive],
        ScenarioArg::Hypertensive => vec![Scenario::Hypertensive],
        ScenarioArg::Both => vec![Scenario::Normotensive, Scenario::Hypertensive],
    }
}

pub fn input_mode(arch: ArchArg) -> InputMode {
    match arch {
        ArchArg::Sensor25 => InputMode::Sensor { spacing: 1 },
        ArchArg::Sensor9 => InputMode::Sensor { spacing: 2 },
        ArchArg::Image => InputMode::Image,
    }
}

pub fn model_spec(config: &RunConfig, mode: InputMode) -> DeepOnetSpec {
    DeepOnetSpec {
        mode,
        latent: config.latent_width,
        width: config.fnn_width,
        trunk_width: config.trunk_width,
        depth: config.fnn_depth,
        conv_filters: config.conv_filters,
        location_dim: match config.location_encoding {
            taa_core::dataset::LocationEncoding::Trig => 3,
            taa_core::dataset::LocationEncoding::Scalar => 1,
        },
        image_height: config.grid.n_z,
        image_width: config.grid.n_theta,
    }
}

pub fn train_config(config: &RunConfig) -> TrainConfig {
    TrainConfig {
        adam_iters: config.adam_iters,
        learning_rate: config.learning_rate,
        learning_rate_final: config.learning_rate_final,
        lbfgs_iters: config.lbfgs_iters,
        seed: config.master_seed,
        trials: config.trials,
    }
}

/// Generate one profile from its job description.
fn generate_profile(config: &RunConfig, job: &taa_core::cases::ProfileJob) -> Result<InsultProfile> {
    match &job.geometry {
        GeometrySpec::Analytic(geom) => {
            evaluate_analytic(&config.grid, geom, job.kind, job.severity)
        }
        GeometrySpec::Random { shape } => {
            let sampler = RandomInsultSampler::new(
                &config.grid,
                &config.random_insult,
                job.kind,
                job.severity,
            )?;
            sampler.generate(shape_seed(config.master_seed, *shape))
        }
    }
}

fn write_profiles(
    config: &RunConfig,
    jobs: &[taa_core::cases::ProfileJob],
    out: &Path,
    stage: &str,
) -> Result<()> {
    // random shapes share a factored sampler across severities; group jobs
    // by (kind, severity) only for analytic, which are cheap anyway
    let results: Vec<Result<()>> = jobs
        .par_iter()
        .map(|job| {
            let profile = generate_profile(config, job)?;
            let dir = out.join(job.scenario.label());
            fs::create_dir_all(&dir)?;
            let prov = Provenance::new(stage, config.master_seed, config);
            io::write_profile(&dir.join(format!("{}.insult", job.id)), &profile, Some(prov))
        })
        .collect();
    let failures: Vec<String> = results
        .into_iter()
        .zip(jobs)
        .filter_map(|(r, j)| r.err().map(|e| format!("{}: {e}", j.id)))
        .collect();
    if failures.is_empty() {
        log::info!("wrote {} profiles to {}", jobs.len(), out.display());
        Ok(())
    } else {
        Err(CoreError::numerical(format!(
            "{} of {} profiles failed:\n{}",
            failures.len(),
            jobs.len(),
            failures.join("\n")
        )))
    }
}

pub fn gen_analytic(
    config: &RunConfig,
    kind: KindArg,
    scenario: ScenarioArg,
    out: &Path,
) -> Result<()> {
    let mut jobs = Vec::new();
    for scenario in scenarios_of(scenario) {
        for kind in kinds_of(kind) {
            jobs.extend(taa_core::cases::analytic_jobs(config, kind, scenario));
        }
    }
    log::info!("enumerated {} analytic profiles", jobs.len());
    write_profiles(config, &jobs, out, "gen-analytic")
}

pub fn gen_random(config: &RunConfig, out: &Path) -> Result<()> {
    let jobs = taa_core::cases::random_jobs(config);
    log::info!("enumerated {} random profiles", jobs.len());
    write_profiles(config, &jobs, out, "gen-random")
}

fn scenario_from_dirname(name: &str) -> Result<Scenario> {
    match name {
        "normotensive" => Ok(Scenario::Normotensive),
        "hypertensive" => Ok(Scenario::Hypertensive),
        other => Err(CoreError::format(format!(
            "profile directory {other} is not a scenario (expected normotensive/hypertensive)"
        ))),
    }
}

/// Sorted (scenario, stem, path) triples under a profile/maps tree.
fn scan_tree(root: &Path, extension: &str) -> Result<Vec<(Scenario, String, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let scenario = scenario_from_dirname(&entry.file_name().to_string_lossy())?;
        for file in fs::read_dir(entry.path())? {
            let path = file?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(extension) {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                out.push((scenario, stem, path));
            }
        }
    }
    out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(out)
}

pub fn simulate_dir(config: &RunConfig, profiles: &Path, out: &Path) -> Result<()> {
    let entries = scan_tree(profiles, "insult")?;
    if entries.is_empty() {
        log::info!("no profiles under {}; nothing to do", profiles.display());
        return Ok(());
    }
    let results: Vec<Result<()>> = entries
        .par_iter()
        .map(|(scenario, stem, path)| {
            let profile = io::read_profile(path)?;
            let mut maps = growth::simulate(&profile, *scenario, &config.material)?;
            maps.source = stem.clone();
            let dir = out.join(scenario.label());
            fs::create_dir_all(&dir)?;
            let prov = Provenance::new("simulate", config.master_seed, config);
            io::write_maps(&dir.join(format!("{stem}.maps")), &maps, Some(prov))
        })
        .collect();
    let failures: Vec<String> = results
        .into_iter()
        .zip(&entries)
        .filter_map(|(r, (_, stem, _))| r.err().map(|e| format!("{stem}: {e}")))
        .collect();
    if failures.is_empty() {
        log::info!("simulated {} profiles into {}", entries.len(), out.display());
        Ok(())
    } else {
        for f in &failures {
            log::error!("simulation failed: {f}");
        }
        Err(CoreError::numerical(format!(
            "{} of {} simulations failed (first: {})",
            failures.len(),
            entries.len(),
            failures[0]
        )))
    }
}

pub fn build_dataset(
    config: &RunConfig,
    profiles: &Path,
    maps: &Path,
    arch: ArchArg,
    out: &Path,
) -> Result<()> {
    let dataset = assemble_dataset(config, profiles, maps, input_mode(arch))?;
    let prov = Provenance::new("build-dataset", config.master_seed, config);
    taa_core::dataset::write_dataset(out, &dataset, Some(prov))?;
    log::info!(
        "dataset: {} samples ({} train / {} test) at {}",
        dataset.samples.len(),
        dataset.train_ids.len(),
        dataset.test_ids.len(),
        out.display()
    );
    Ok(())
}

/// Pair maps with their source profiles and assemble the dataset in
/// deterministic (scenario, id) order.
pub fn assemble_dataset(
    config: &RunConfig,
    profiles: &Path,
    maps: &Path,
    mode: InputMode,
) -> Result<Dataset> {
    let profile_entries = scan_tree(profiles, "insult")?;
    let map_entries = scan_tree(maps, "maps")?;
    let profile_index: BTreeMap<(Scenario, &str), &std::path::PathBuf> = profile_entries
        .iter()
        .map(|(s, stem, p)| ((*s, stem.as_str()), p))
        .collect();

    let pairs: Vec<(&(Scenario, String, std::path::PathBuf), &std::path::PathBuf)> = map_entries
        .iter()
        .map(|entry| {
            profile_index
                .get(&(entry.0, entry.1.as_str()))
                .map(|p| (entry, *p))
                .ok_or_else(|| {
                    CoreError::format(format!(
                        "maps {} have no matching profile under {}",
                        entry.1,
                        profiles.display()
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let samples: Vec<SampleRecord> = pairs
        .par_iter()
        .map(|((scenario, stem, map_path), profile_path)| {
            let maps: FieldMaps = io::read_maps(map_path)?;
            let profile = io::read_profile(profile_path)?;
            build_sample(
                &maps,
                &profile,
                mode,
                config.location_encoding,
                format!("{}/{stem}", scenario.label()),
            )
        })
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(CoreError::parameter(format!(
            "no (profile, maps) pairs found under {} and {}",
            profiles.display(),
            maps.display()
        )));
    }

    let grid: CylindricalGrid = config.grid.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let (train_ids, test_ids) = split(&samples, config.test_fraction, &mut rng)?;
    Ok(Dataset {
        query_points: grid_query_points(&grid),
        grid,
        mode,
        samples,
        train_ids,
        test_ids,
        seed: config.master_seed,
    })
}

pub fn train_once(config: &RunConfig, dataset_dir: &Path, out: &Path) -> Result<()> {
    let dataset = taa_core::dataset::read_dataset(dataset_dir)?;
    let spec = model_spec(config, dataset.mode);
    let cfg = train_config(config);
    let t0 = std::time::Instant::now();
    let (model, trace) = deeponet::train(&dataset, &spec, &cfg)?;
    log::info!(
        "trained {} parameters in {:.1}s, final loss {:.6}",
        model.param_count(),
        t0.elapsed().as_secs_f64(),
        trace.final_loss
    );
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    deeponet::save_checkpoint(out, &model)?;
    let trace_path = out.with_extension("trace.json");
    fs::write(&trace_path, serde_json::to_vec_pretty(&trace)?)?;
    Ok(())
}

pub fn evaluate_protocol(
    config: &RunConfig,
    dataset_dir: &Path,
    case: u8,
    trials: Option<usize>,
    noise: Option<f64>,
    out: &Path,
) -> Result<()> {
    let dataset = taa_core::dataset::read_dataset(dataset_dir)?;
    let row = evaluate_into_row(config, &dataset, case, trials, noise)?;
    fs::create_dir_all(out)?;
    merge_row(&out.join("report_rows.json"), row.clone())?;
    println!("{}", row.render_line());
    Ok(())
}

pub fn evaluate_into_row(
    config: &RunConfig,
    dataset: &Dataset,
    case: u8,
    trials: Option<usize>,
    noise: Option<f64>,
) -> Result<ReportRow> {
    let spec = model_spec(config, dataset.mode);
    let mut cfg = train_config(config);
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let noise_level = noise.unwrap_or(config.noise_level);
    let report = deeponet::evaluate(dataset, &spec, &cfg, noise_level)?;
    Ok(ReportRow {
        case,
        arch: dataset.mode.label().to_string(),
        n_train: dataset.train_ids.len(),
        n_test: dataset.test_ids.len(),
        params: report.param_count,
        err_clean_mean: report.clean_mean,
        err_clean_std: report.clean_std,
        err_noisy_mean: report.noisy_mean,
        err_noisy_std: report.noisy_std,
        noise_level,
        trials: cfg.trials,
    })
}

pub fn run_case(
    config: &RunConfig,
    case_id: u8,
    arch: ArchArg,
    trials: Option<usize>,
    noise: Option<f64>,
    out: &Path,
) -> Result<()> {
    let case = case_spec(case_id)?;
    log::info!("case {case_id}: {}", case.description);
    let jobs = case_jobs(config, &case);
    log::info!("enumerated {} profiles", jobs.len());

    let profiles_dir = out.join(format!("case{case_id}")).join("profiles");
    let maps_dir = out.join(format!("case{case_id}")).join("maps");
    write_profiles(config, &jobs, &profiles_dir, "run-case/gen")?;
    simulate_dir(config, &profiles_dir, &maps_dir)?;

    let mode = input_mode(arch);
    let dataset_dir = out
        .join(format!("case{case_id}"))
        .join(format!("dataset_{}", arch.label()));
    let dataset = assemble_dataset(config, &profiles_dir, &maps_dir, mode)?;
    let prov = Provenance::new("run-case/dataset", config.master_seed, config);
    taa_core::dataset::write_dataset(&dataset_dir, &dataset, Some(prov))?;

    let row = evaluate_into_row(config, &dataset, case_id, trials, noise)?;
    merge_row(&out.join("report_rows.json"), row.clone())?;
    println!("{}", row.render_line());
    render_report(out, out)
}

pub fn render_report(rows_dir: &Path, out: &Path) -> Result<()> {
    let rows = read_rows(&rows_dir.join("report_rows.json"))?;
    write_report(&rows, out)
}
