//! Multi-branch operator networks mapping dilatation/distensibility inputs
//! back to the insult field.
//!
//! Sensor mode carries five branch nets (dilatation values, dilatation-max
//! location, distensibility values, distensibility-min location, pressure
//! flag); image mode carries two CNN branches over the grayscale maps plus
//! the flag net. Branch embeddings are merged by an elementwise product into
//! one latent vector `b`, and the prediction at a query point `y` is
//! `sum_k b_k * t_k(y)` with `t` the trunk embedding of
//! `(cos theta, sin theta, z_norm)`. Training minimizes the summed squared
//! error over all samples and query points with full-batch Adam followed by
//! L-BFGS.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{BranchInputs, Dataset, InputMode, SampleRecord};
use crate::error::{CoreError, Result};
use crate::io;
use crate::nn::{lbfgs_minimize, Activation, Adam, Batch, LayerSpec, Network, Shape};

/// Architecture hyperparameters; defaults follow the draft table (depth 4,
/// width 128, tanh) with a compact two-stage CNN head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepOnetSpec {
    pub mode: InputMode,
    /// Latent embedding width shared by every branch and the trunk.
    pub latent: usize,
    /// Hidden width of the fully connected branch nets.
    pub width: usize,
    /// Hidden width of the trunk; the trunk is cheap (it runs once over the
    /// query points), so it can afford more capacity than the branches.
    pub trunk_width: usize,
    /// Number of weight layers in each fully connected net.
    pub depth: usize,
    /// Filter counts of the two convolution stages (image mode).
    pub conv_filters: (usize, usize),
    /// Dimension of the location encoding (3 trig, 1 scalar).
    pub location_dim: usize,
    /// Image dimensions (height = axial nodes, width = circumferential).
    pub image_height: usize,
    pub image_width: usize,
}

impl DeepOnetSpec {
    pub fn with_mode(mode: InputMode) -> Self {
        DeepOnetSpec {
            mode,
            latent: 128,
            width: 128,
            trunk_width: 128,
            depth: 4,
            conv_filters: (16, 32),
            location_dim: 3,
            image_height: 21,
            image_width: 20,
        }
    }
}

/// Assembled model: branch networks, trunk, and one flat parameter vector.
#[derive(Debug, Clone)]
pub struct DeepOnetModel {
    pub spec: DeepOnetSpec,
    branches: Vec<Network>,
    trunk: Network,
    /// (offset, len) of each branch in the flat vector; trunk follows.
    branch_segments: Vec<(usize, usize)>,
    trunk_segment: (usize, usize),
    pub params: Vec<f64>,
}

fn fnn(input: usize, width: usize, depth: usize, output: usize) -> Result<Network> {
    assert!(depth >= 2, "fully connected nets need at least two layers");
    let mut layers = Vec::with_capacity(depth);
    layers.push(LayerSpec::Dense {
        input,
        output: width,
        activation: Activation::Tanh,
    });
    for _ in 0..depth - 2 {
        layers.push(LayerSpec::Dense {
            input: width,
            output: width,
            activation: Activation::Tanh,
        });
    }
    layers.push(LayerSpec::Dense {
        input: width,
        output,
        activation: Activation::Tanh,
    });
    Network::new(Shape::Vector(input), layers)
}

fn cnn(spec: &DeepOnetSpec) -> Result<Network> {
    let (f1, f2) = spec.conv_filters;
    let (h, w) = (spec.image_height, spec.image_width);
    let (h1, w1) = (h / 2, w / 2);
    let (h2, w2) = ((h1 - 2) / 2, (w1 - 2) / 2);
    Network::new(
        Shape::Image {
            channels: 1,
            height: h,
            width: w,
        },
        vec![
            LayerSpec::Conv2D {
                in_channels: 1,
                filters: f1,
                kernel: 3,
                stride: 1,
                padding: 1,
                activation: Activation::Tanh,
            },
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Conv2D {
                in_channels: f1,
                filters: f2,
                kernel: 3,
                stride: 1,
                padding: 0,
                activation: Activation::Tanh,
            },
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                input: f2 * h2 * w2,
                output: spec.latent,
                activation: Activation::Tanh,
            },
        ],
    )
}

impl DeepOnetModel {
    /// Build an uninitialized (zero-parameter) model from the spec.
    pub fn new(spec: DeepOnetSpec) -> Result<Self> {
        if spec.latent == 0 {
            return Err(CoreError::parameter("latent width must be positive"));
        }
        let branches: Vec<Network> = match spec.mode {
            InputMode::Sensor { spacing } => {
                let n_sen = InputMode::Sensor { spacing }
                    .sensor_count()
                    .ok_or_else(|| CoreError::parameter("sensor spacing must be 1 or 2"))?;
                vec![
                    fnn(n_sen, spec.width, spec.depth, spec.latent)?,
                    fnn(spec.location_dim, spec.width, spec.depth, spec.latent)?,
                    fnn(n_sen, spec.width, spec.depth, spec.latent)?,
                    fnn(spec.location_dim, spec.width, spec.depth, spec.latent)?,
                    fnn(1, spec.width, spec.depth, spec.latent)?,
                ]
            }
            InputMode::Image => vec![
                cnn(&spec)?,
                cnn(&spec)?,
                fnn(1, spec.width, spec.depth, spec.latent)?,
            ],
        };
        let trunk = fnn(3, spec.trunk_width, spec.depth, spec.latent)?;

        let mut offset = 0usize;
        let mut branch_segments = Vec::with_capacity(branches.len());
        for b in &branches {
            branch_segments.push((offset, b.param_count()));
            offset += b.param_count();
        }
        let trunk_segment = (offset, trunk.param_count());
        offset += trunk.param_count();

        Ok(DeepOnetModel {
            spec,
            branches,
            trunk,
            branch_segments,
            trunk_segment,
            params: vec![0.0; offset],
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Per-network parameter counts (branches in order, then the trunk).
    pub fn component_param_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.branches.iter().map(|b| b.param_count()).collect();
        v.push(self.trunk.param_count());
        v
    }

    /// Xavier-initialize every network from one seed.
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (b, &(off, len)) in self.branches.iter().zip(&self.branch_segments) {
            b.init_params(&mut self.params[off..off + len], &mut rng);
        }
        let (off, len) = self.trunk_segment;
        self.trunk
            .init_params(&mut self.params[off..off + len], &mut rng);
    }

    /// Assemble per-branch input batches from samples.
    pub fn branch_batches(&self, samples: &[&SampleRecord]) -> Result<Vec<Batch>> {
        if samples.is_empty() {
            return Err(CoreError::parameter("empty batch"));
        }
        let n = samples.len();
        match self.spec.mode {
            InputMode::Sensor { .. } => {
                let first = match &samples[0].inputs {
                    BranchInputs::Sensor(si) => si,
                    _ => return Err(CoreError::format("dataset mode does not match model mode")),
                };
                let dims = [
                    first.dilatation.len(),
                    first.dilatation_loc.len(),
                    first.distensibility.len(),
                    first.distensibility_loc.len(),
                    1,
                ];
                let mut mats: Vec<Array2<f64>> =
                    dims.iter().map(|&d| Array2::zeros((n, d))).collect();
                for (i, s) in samples.iter().enumerate() {
                    let BranchInputs::Sensor(si) = &s.inputs else {
                        return Err(CoreError::format("mixed input modes in batch"));
                    };
                    for (k, vec) in [
                        &si.dilatation,
                        &si.dilatation_loc,
                        &si.distensibility,
                        &si.distensibility_loc,
                    ]
                    .into_iter()
                    .enumerate()
                    {
                        if vec.len() != dims[k] {
                            return Err(CoreError::format("inconsistent sensor dimensions"));
                        }
                        for (j, &v) in vec.iter().enumerate() {
                            mats[k][(i, j)] = v as f64;
                        }
                    }
                    mats[4][(i, 0)] = si.pressure_flag as f64;
                }
                Ok(mats.into_iter().map(Batch::Mat).collect())
            }
            InputMode::Image => {
                let (h, w) = (self.spec.image_height, self.spec.image_width);
                let mut dia = Array4::zeros((n, 1, h, w));
                let mut dist = Array4::zeros((n, 1, h, w));
                let mut flag = Array2::zeros((n, 1));
                for (i, s) in samples.iter().enumerate() {
                    let BranchInputs::Image(ii) = &s.inputs else {
                        return Err(CoreError::format("dataset mode does not match model mode"));
                    };
                    if ii.dilatation.height != h || ii.dilatation.width != w {
                        return Err(CoreError::format("image dimensions do not match model"));
                    }
                    for y in 0..h {
                        for x in 0..w {
                            dia[(i, 0, y, x)] = ii.dilatation.pixels[y * w + x] as f64;
                            dist[(i, 0, y, x)] = ii.distensibility.pixels[y * w + x] as f64;
                        }
                    }
                    flag[(i, 0)] = ii.pressure_flag as f64;
                }
                Ok(vec![Batch::Img(dia), Batch::Img(dist), Batch::Mat(flag)])
            }
        }
    }

    /// Trunk input matrix from query points.
    pub fn trunk_input(points: &[[f32; 3]]) -> Array2<f64> {
        let mut m = Array2::zeros((points.len(), 3));
        for (i, p) in points.iter().enumerate() {
            for j in 0..3 {
                m[(i, j)] = p[j] as f64;
            }
        }
        m
    }

    /// Forward pass: merged branch embedding times trunk embedding.
    /// Returns predictions of shape `(n_samples, n_points)`.
    pub fn forward(&self, branch_inputs: &[Batch], points: &Array2<f64>) -> Result<Array2<f64>> {
        let (pred, _) = self.forward_cached(&self.params, branch_inputs, points)?;
        Ok(pred)
    }

    #[allow(clippy::type_complexity)]
    fn forward_cached(
        &self,
        params: &[f64],
        branch_inputs: &[Batch],
        points: &Array2<f64>,
    ) -> Result<(
        Array2<f64>,
        (Vec<Array2<f64>>, Array2<f64>, Vec<crate::nn::ForwardCache>),
    )> {
        if branch_inputs.len() != self.branches.len() {
            return Err(CoreError::parameter(format!(
                "model expects {} branch inputs, got {}",
                self.branches.len(),
                branch_inputs.len()
            )));
        }
        let mut embeddings = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len() + 1);
        for ((net, input), &(off, len)) in self
            .branches
            .iter()
            .zip(branch_inputs)
            .zip(&self.branch_segments)
        {
            let (out, cache) = net.forward(&params[off..off + len], input.clone())?;
            let Batch::Mat(m) = out else { unreachable!("nets end in dense layers") };
            embeddings.push(m);
            caches.push(cache);
        }
        let (t_off, t_len) = self.trunk_segment;
        let (t_out, t_cache) = self
            .trunk
            .forward(&params[t_off..t_off + t_len], Batch::Mat(points.clone()))?;
        let Batch::Mat(trunk_emb) = t_out else { unreachable!() };
        caches.push(t_cache);

        // Hadamard merge across branches, then inner product with the trunk
        let mut merged = embeddings[0].clone();
        for e in &embeddings[1..] {
            merged *= e;
        }
        let pred = crate::nn::matmul(merged.view(), trunk_emb.t());
        Ok((pred, (embeddings, trunk_emb, caches)))
    }

    /// Summed squared error over every sample and query point.
    pub fn loss(
        &self,
        params: &[f64],
        branch_inputs: &[Batch],
        points: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<f64> {
        let (pred, _) = self.forward_cached(params, branch_inputs, points)?;
        Ok((&pred - targets).mapv(|v| v * v).sum())
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        branch_inputs: &[Batch],
        points: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        let (pred, (embeddings, trunk_emb, caches)) =
            self.forward_cached(params, branch_inputs, points)?;
        let diff = &pred - targets;
        let loss = diff.mapv(|v| v * v).sum();
        let dpred = 2.0 * diff;

        let mut grads = vec![0.0; params.len()];

        // d(merged) and d(trunk)
        let dmerged = crate::nn::matmul(dpred.view(), trunk_emb.view());
        let mut merged = embeddings[0].clone();
        for e in &embeddings[1..] {
            merged *= e;
        }
        let dtrunk = crate::nn::matmul_tn(dpred.view(), merged.view());

        // branch gradients: dB_k = dmerged ⊙ prod_{j != k} B_j via
        // prefix/suffix products
        let k = embeddings.len();
        let mut prefix: Vec<Array2<f64>> = Vec::with_capacity(k);
        let mut suffix: Vec<Array2<f64>> = vec![Array2::zeros(embeddings[0].dim()); k];
        for i in 0..k {
            let p = if i == 0 {
                Array2::ones(embeddings[0].dim())
            } else {
                &prefix[i - 1] * &embeddings[i - 1]
            };
            prefix.push(p);
        }
        let mut running = Array2::ones(embeddings[0].dim());
        for i in (0..k).rev() {
            suffix[i] = running.clone();
            running *= &embeddings[i];
        }

        for (i, ((net, &(off, len)), cache)) in self
            .branches
            .iter()
            .zip(&self.branch_segments)
            .zip(&caches)
            .enumerate()
        {
            let db = &dmerged * &prefix[i] * &suffix[i];
            net.backward(
                &params[off..off + len],
                cache,
                Batch::Mat(db),
                &mut grads[off..off + len],
            );
        }
        let (t_off, t_len) = self.trunk_segment;
        self.trunk.backward(
            &params[t_off..t_off + t_len],
            &caches[k],
            Batch::Mat(dtrunk),
            &mut grads[t_off..t_off + t_len],
        );
        Ok((loss, grads))
    }

    /// Evaluate the operator at arbitrary query points for given inputs.
    /// Raw values; clamp to [0, 1] for field reporting.
    pub fn predict(&self, samples: &[&SampleRecord], points: &[[f32; 3]]) -> Result<Array2<f64>> {
        let inputs = self.branch_batches(samples)?;
        let trunk_in = Self::trunk_input(points);
        self.forward(&inputs, &trunk_in)
    }

    /// Prediction clamped to the admissible insult interval.
    pub fn predict_field(
        &self,
        samples: &[&SampleRecord],
        points: &[[f32; 3]],
    ) -> Result<Array2<f64>> {
        Ok(self.predict(samples, points)?.mapv(|v| v.clamp(0.0, 1.0)))
    }
}

/// Training protocol configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam_iters: usize,
    pub learning_rate: f64,
    /// Optional cosine decay target for the Adam phase; `None` keeps the
    /// learning rate constant.
    pub learning_rate_final: Option<f64>,
    pub lbfgs_iters: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam_iters: 20_000,
            learning_rate: 1e-3,
            learning_rate_final: None,
            lbfgs_iters: 2_000,
            seed: 0,
            trials: 5,
        }
    }
}

/// Loss history of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Adam loss once every 100 iterations plus the final one.
    pub adam: Vec<f64>,
    /// Loss after every accepted L-BFGS step.
    pub lbfgs: Vec<f64>,
    pub final_loss: f64,
}

fn targets_matrix(samples: &[&SampleRecord]) -> Result<Array2<f64>> {
    let p = samples[0].targets.len();
    let mut t = Array2::zeros((samples.len(), p));
    for (i, s) in samples.iter().enumerate() {
        if s.targets.len() != p {
            return Err(CoreError::format("inconsistent target lengths"));
        }
        for (j, &v) in s.targets.iter().enumerate() {
            t[(i, j)] = v as f64;
        }
    }
    Ok(t)
}

/// Train a fresh model on the training split of `dataset`.
pub fn train(dataset: &Dataset, spec: &DeepOnetSpec, cfg: &TrainConfig) -> Result<(DeepOnetModel, TrainTrace)> {
    let train_samples = dataset.train_samples();
    if train_samples.is_empty() {
        return Err(CoreError::parameter("dataset has no training samples"));
    }
    let mut model = DeepOnetModel::new(spec.clone())?;
    model.init(cfg.seed);
    let inputs = model.branch_batches(&train_samples)?;
    let points = DeepOnetModel::trunk_input(&dataset.query_points);
    let targets = targets_matrix(&train_samples)?;

    let mut trace = TrainTrace {
        adam: Vec::new(),
        lbfgs: Vec::new(),
        final_loss: f64::NAN,
    };

    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut params = std::mem::take(&mut model.params);
    let mut last_loss = f64::NAN;
    for it in 0..cfg.adam_iters {
        if let Some(lr_final) = cfg.learning_rate_final {
            // cosine decay from the base rate to the floor
            let t = it as f64 / cfg.adam_iters.max(1) as f64;
            let w = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
            adam.learning_rate = lr_final + (cfg.learning_rate - lr_final) * w;
        }
        let (loss, grads) = model.loss_and_grad(&params, &inputs, &points, &targets)?;
        if !loss.is_finite() {
            return Err(CoreError::numerical(format!(
                "non-finite loss at Adam iteration {it}; trace: {:?}",
                trace.adam
            )));
        }
        adam.step(&mut params, &grads);
        last_loss = loss;
        if it % 100 == 0 {
            trace.adam.push(loss);
        }
    }
    if cfg.adam_iters > 0 {
        trace.adam.push(last_loss);
    }

    if cfg.lbfgs_iters > 0 {
        let mut objective = |p: &[f64]| {
            model
                .loss_and_grad(p, &inputs, &points, &targets)
                .unwrap_or_else(|_| (f64::INFINITY, vec![0.0; p.len()]))
        };
        let report = lbfgs_minimize(&mut objective, &mut params, cfg.lbfgs_iters, 1e-12);
        trace.lbfgs = report.loss_trace;
        trace.final_loss = report.final_loss;
    } else {
        trace.final_loss = last_loss;
    }
    model.params = params;
    Ok((model, trace))
}

/// Per-sample relative L2 errors over all query points of the dataset grid.
pub fn relative_l2_errors(
    model: &DeepOnetModel,
    samples: &[&SampleRecord],
    points: &[[f32; 3]],
) -> Result<Vec<f64>> {
    let pred = model.predict(samples, points)?;
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, &t) in s.targets.iter().enumerate() {
            let d = pred[(i, j)] - t as f64;
            num += d * d;
            den += (t as f64) * (t as f64);
        }
        if den == 0.0 {
            log::warn!("sample {} has a zero-norm target; excluded", s.case_id);
            continue;
        }
        out.push((num / den).sqrt());
    }
    Ok(out)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Multi-trial evaluation results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean relative L2 error of each trial on the clean test inputs.
    pub clean_trial_means: Vec<f64>,
    /// Same under noisy test inputs (empty when no noise was requested).
    pub noisy_trial_means: Vec<f64>,
    pub param_count: usize,
    pub clean_mean: f64,
    pub clean_std: f64,
    pub noisy_mean: f64,
    pub noisy_std: f64,
}

/// Retrain `trials` times with per-trial seeds `base + t` and average the
/// test error; noise (if any) is applied to the test inputs only, freshly
/// drawn per trial.
pub fn evaluate(
    dataset: &Dataset,
    spec: &DeepOnetSpec,
    cfg: &TrainConfig,
    noise_level: f64,
) -> Result<EvalReport> {
    if cfg.trials == 0 {
        return Err(CoreError::parameter("evaluation needs at least one trial"));
    }
    let test = dataset.test_samples();
    if test.is_empty() {
        return Err(CoreError::parameter("dataset has no test samples"));
    }
    let scale = if noise_level > 0.0 {
        Some(crate::dataset::noise_scale(
            &test.iter().map(|s| (*s).clone()).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };

    let mut clean_means = Vec::with_capacity(cfg.trials);
    let mut noisy_means = Vec::with_capacity(cfg.trials);
    let mut param_count = 0;
    for t in 0..cfg.trials {
        let trial_cfg = TrainConfig {
            seed: cfg.seed + t as u64,
            ..cfg.clone()
        };
        let (model, _) = train(dataset, spec, &trial_cfg)?;
        param_count = model.param_count();
        let clean = relative_l2_errors(&model, &test, &dataset.query_points)?;
        clean_means.push(mean_std(&clean).0);

        if let Some(scale) = &scale {
            let owned: Vec<SampleRecord> = test.iter().map(|s| (*s).clone()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(trial_cfg.seed ^ 0x6e6f_6973_655f_7365);
            let noisy = crate::dataset::add_noise(&owned, scale, noise_level, &mut rng)?;
            let noisy_refs: Vec<&SampleRecord> = noisy.iter().collect();
            let errs = relative_l2_errors(&model, &noisy_refs, &dataset.query_points)?;
            noisy_means.push(mean_std(&errs).0);
        }
    }
    let (cm, cs) = mean_std(&clean_means);
    let (nm, ns) = if noisy_means.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_std(&noisy_means)
    };
    Ok(EvalReport {
        clean_trial_means: clean_means,
        noisy_trial_means: noisy_means,
        param_count,
        clean_mean: cm,
        clean_std: cs,
        noisy_mean: nm,
        noisy_std: ns,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    spec: DeepOnetSpec,
    branches: Vec<Network>,
    trunk: Network,
    param_count: usize,
}

/// Persist a model: JSON topology header + raw little-endian f64 parameters.
pub fn save_checkpoint(path: &std::path::Path, model: &DeepOnetModel) -> Result<()> {
    let header = CheckpointHeader {
        spec: model.spec.clone(),
        branches: model.branches.clone(),
        trunk: model.trunk.clone(),
        param_count: model.params.len(),
    };
    io::write_framed(path, &header, &io::f64_to_bytes(&model.params))
}

/// Load a model saved by [`save_checkpoint`].
pub fn load_checkpoint(path: &std::path::Path) -> Result<DeepOnetModel> {
    let (header, payload): (CheckpointHeader, Vec<u8>) = io::read_framed(path)?;
    let params = io::bytes_to_f64(&payload)?;
    if params.len() != header.param_count {
        return Err(CoreError::format(format!(
            "checkpoint holds {} parameters, header says {}",
            params.len(),
            header.param_count
        )));
    }
    let mut model = DeepOnetModel::new(header.spec)?;
    if model.params.len() != params.len() {
        return Err(CoreError::format(
            "checkpoint topology does not reproduce the parameter count",
        ));
    }
    model.params = params;
    Ok(model)
}
