//! Task runners and result files.
//!
//! Every task writes `metrics.csv`, `weights.csv` and `manifest.toml` into the
//! output directory. Nothing time- or host-dependent is written, so a fixed
//! seed reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use minmax_core::attack::{
    apgd_solve, ensemble_oracles, transform_oracles, universal_constraint, universal_oracles, DeltaInit, WeightMode,
};
use minmax_core::defense::{ampgd_train, robustness_matrix};
use minmax_core::models::{accuracy, load_checkpoint, save_checkpoint, train_natural, TrainConfig};
use minmax_core::{
    ApgdConfig, AtConfig, AttackType, ConstraintSet, Dataset, ImageTensor, LossKind, Mlp, Norm, SeededRng, Trace,
    TransformSpec,
};

use crate::config::{parse_loss, parse_methods, parse_norm, parse_weights, ExperimentConfig, Task};
use crate::idx::load_idx_with_shape;
use crate::metrics::{acc_adv, asr_all, asr_group};
use crate::synthetic::{make_synthetic, SyntheticKind};
use crate::{HarnessError, Result};

pub const METRICS_HEADER: [&str; 7] = ["metric", "value", "norm", "eps", "k", "seed", "iter"];
pub const WEIGHTS_HEADER: [&str; 3] = ["iter", "domain", "weight"];

// Substream ids off the run seed.
const STREAM_IMAGES: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_INIT: u64 = 100;
const STREAM_TRAIN: u64 = 200;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub name: String,
    pub value: f64,
    pub norm: Option<Norm>,
    pub eps: Option<f64>,
    pub k: Option<usize>,
    pub seed: u64,
    pub iter: Option<usize>,
}

impl MetricRecord {
    pub fn new(name: impl Into<String>, value: f64, seed: u64) -> Self {
        Self { name: name.into(), value, norm: None, eps: None, k: None, seed, iter: None }
    }

    pub fn ball(mut self, norm: Norm, eps: f64) -> Self {
        self.norm = Some(norm);
        self.eps = Some(eps);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn iter(mut self, iter: usize) -> Self {
        self.iter = Some(iter);
        self
    }
}

/// Ten significant digits.
pub fn fmt_value(x: f64) -> String {
    // Fold −0 into 0 so equal values always print alike.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.9e}")
}

/// Everything a task produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub metrics: Vec<MetricRecord>,
    /// `(iter, domain, weight)`.
    pub weights: Vec<(usize, usize, f64)>,
}

pub fn write_metrics(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        if !r.value.is_finite() {
            return Err(HarnessError::Metric(format!("{} is not finite ({})", r.name, r.value)));
        }
        let opt = |o: Option<String>| o.unwrap_or_default();
        w.write_record([
            r.name.clone(),
            fmt_value(r.value),
            opt(r.norm.map(|n| n.to_string())),
            opt(r.eps.map(fmt_value)),
            opt(r.k.map(|k| k.to_string())),
            r.seed.to_string(),
            opt(r.iter.map(|i| i.to_string())),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.into(), source })
}

pub fn write_weights(path: &Path, rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(WEIGHTS_HEADER).map_err(|e| csv_err(path, e))?;
    for &(t, d, v) in rows {
        if !v.is_finite() {
            return Err(HarnessError::Metric(format!("weight at iter {t}, domain {d} is not finite")));
        }
        w.write_record([t.to_string(), d.to_string(), fmt_value(v)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io { path: path.into(), source: std::io::Error::other(e.to_string()) }
}

/// Train and test splits plus the image shape `(rows, cols)`; synthetic data
/// reports `(1, dim)`.
#[derive(Debug, Clone)]
pub struct Data {
    pub train: Dataset,
    pub test: Dataset,
    pub shape: (usize, usize),
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Data> {
    let d = &cfg.data;
    if d.source == "mnist" {
        let (train, shape) = load_idx_with_shape(
            &d.dir.join("train-images-idx3-ubyte"),
            &d.dir.join("train-labels-idx1-ubyte"),
            d.train_limit,
        )?;
        let (test, _) =
            load_idx_with_shape(&d.dir.join("t10k-images-idx3-ubyte"), &d.dir.join("t10k-labels-idx1-ubyte"), d.test_limit)?;
        return Ok(Data { train, test, shape });
    }
    let kind = SyntheticKind::from_str(&d.source)?;
    // One draw split in half keeps both parts on the same cluster centres.
    let all = make_synthetic(kind, 2 * d.n, d.dim, d.classes, &mut SeededRng::new(cfg.seed))?;
    let idx: Vec<usize> = (0..all.len()).collect();
    let (a, b) = idx.split_at(d.n);
    Ok(Data { train: all.subset(a)?, test: all.subset(b)?, shape: (1, d.dim) })
}

/// Naturally trained model of the configured width.
pub fn train_natural_model(cfg: &ExperimentConfig, train: &Dataset, stream: u64) -> Result<(Mlp, Vec<f64>, Vec<f64>)> {
    let m = &cfg.models;
    let root = SeededRng::new(cfg.seed);
    let dims = Mlp::model_a_dims(train.dim(), train.classes(), m.width);
    let mut model = Mlp::init(&dims, &mut root.substream(STREAM_INIT + stream))?;
    let tc = TrainConfig { epochs: m.epochs, lr: m.lr, batch: m.batch };
    let report = train_natural(&mut model, train, &tc, &mut root.substream(STREAM_TRAIN + stream))?;
    Ok((model, report.epoch_accuracy, report.epoch_loss))
}

/// Model trained with single-type ℓ∞ adversarial training.
pub fn train_robust_model(cfg: &ExperimentConfig, train: &Dataset, stream: u64) -> Result<Mlp> {
    let m = &cfg.models;
    let root = SeededRng::new(cfg.seed);
    let dims = Mlp::model_a_dims(train.dim(), train.classes(), m.width);
    let mut model = Mlp::init(&dims, &mut root.substream(STREAM_INIT + stream))?;
    let at = AtConfig {
        epochs: m.robust_epochs,
        lr: m.lr,
        batch: m.batch,
        seed: root.substream(STREAM_TRAIN + stream).seed(),
        ..AtConfig::new(vec![AttackType::new(Norm::Linf, m.robust_eps)])
    };
    ampgd_train(&mut model, train, &at)?;
    Ok(model)
}

fn checked_checkpoint(path: &Path, dim: usize) -> Result<Mlp> {
    let m: Mlp = load_checkpoint(path)?;
    if m.input_dim() != dim {
        return Err(HarnessError::Config(format!("{} expects {} inputs, data has {dim}", path.display(), m.input_dim())));
    }
    Ok(m)
}

/// Checkpoints first, then natural models, then robust ones.
pub fn build_models(cfg: &ExperimentConfig, train: &Dataset) -> Result<Vec<Mlp>> {
    let mut models = Vec::new();
    for p in &cfg.models.paths {
        models.push(checked_checkpoint(p, train.dim())?);
    }
    let mut stream = 0;
    for _ in 0..cfg.models.natural {
        models.push(train_natural_model(cfg, train, stream)?.0);
        stream += 1;
    }
    for _ in 0..cfg.models.robust {
        models.push(train_robust_model(cfg, train, stream)?);
        stream += 1;
    }
    Ok(models)
}

/// `count` distinct test indices drawn by the seed.
pub fn sample_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    SeededRng::new(seed).substream(STREAM_IMAGES).shuffle(&mut idx);
    idx.truncate(count.min(len));
    idx
}

/// Resolved attack settings shared by the three attack tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    pub norm: Norm,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub iters: usize,
    pub loss: LossKind<f64>,
    pub init: DeltaInit,
    pub seed: u64,
}

impl AttackSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let a = &cfg.attack;
        Ok(Self {
            norm: parse_norm(&a.norm)?,
            eps: a.eps,
            alpha: a.alpha,
            beta: a.beta,
            gamma: a.gamma,
            iters: a.iters,
            loss: parse_loss(&a.loss, a.kappa)?,
            init: if a.random_init { DeltaInit::RandomInBall } else { DeltaInit::Zeros },
            seed: cfg.seed,
        })
    }

    fn apgd(&self, constraint: ConstraintSet<f64>, mode: WeightMode) -> ApgdConfig<f64> {
        ApgdConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            iters: self.iters,
            constraint,
            init: self.init,
            seed: self.seed,
            weights: mode,
        }
    }
}

/// Result of one weighting strategy over a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub mode: WeightMode,
    /// `[run][domain]`: attack succeeded on that domain.
    pub success: Vec<Vec<bool>>,
    pub traces: Vec<Trace>,
}

impl AttackOutcome {
    /// Weight of each domain at each iteration, averaged over runs.
    pub fn mean_weights(&self) -> Vec<Vec<f64>> {
        let Some(first) = self.traces.first() else { return Vec::new() };
        let n = self.traces.len() as f64;
        (0..first.weights.len())
            .map(|t| {
                (0..first.weights[t].len())
                    .map(|i| self.traces.iter().map(|tr| tr.weights[t][i]).sum::<f64>() / n)
                    .collect()
            })
            .collect()
    }
}

fn mode_name(mode: WeightMode) -> &'static str {
    match mode {
        WeightMode::Learned => "minmax",
        WeightMode::Uniform => "average",
    }
}

fn solve<O: minmax_core::DomainLossOracle<f64>>(oracles: &mut [O], cfg: &ApgdConfig<f64>) -> Result<Trace> {
    apgd_solve(oracles, cfg).map_err(|f| HarnessError::Core(f.error))
}

fn perturbed(x: &[f64], delta: &[f64]) -> Vec<f64> {
    x.iter().zip(delta).map(|(a, b)| a + b).collect()
}

fn final_delta(trace: &Trace) -> &[f64] {
    trace.final_delta().expect("solver records at least one iterate")
}

/// Attacks every model at once, one image at a time.
pub fn ensemble_attack(
    models: &[Mlp],
    data: &Dataset,
    indices: &[usize],
    settings: &AttackSettings,
    mode: WeightMode,
) -> Result<AttackOutcome> {
    let mut out = AttackOutcome { mode, success: Vec::new(), traces: Vec::new() };
    for &n in indices {
        let (x, y) = (data.input(n), data.label(n));
        let set = ConstraintSet::around_input(settings.norm, settings.eps, x)?;
        let mut oracles = ensemble_oracles(models, x, y, settings.loss)?;
        let trace = solve(&mut oracles, &settings.apgd(set, mode))?;
        let xp = perturbed(x, final_delta(&trace));
        out.success.push(models.iter().map(|m| Ok(m.predict(&xp)? != y)).collect::<Result<_>>()?);
        out.traces.push(trace);
    }
    Ok(out)
}

/// One shared perturbation per group of consecutive indices.
pub fn universal_attack(
    model: &Mlp,
    data: &Dataset,
    indices: &[usize],
    group_size: usize,
    settings: &AttackSettings,
    mode: WeightMode,
) -> Result<AttackOutcome> {
    if group_size == 0 {
        return Err(HarnessError::Config("group_size must be positive".into()));
    }
    let mut out = AttackOutcome { mode, success: Vec::new(), traces: Vec::new() };
    for group in indices.chunks_exact(group_size) {
        let examples: Vec<(&[f64], usize)> = group.iter().map(|&n| (data.input(n), data.label(n))).collect();
        let set = universal_constraint(settings.norm, settings.eps, &examples)?;
        let mut oracles = universal_oracles(model, &examples, settings.loss)?;
        let trace = solve(&mut oracles, &settings.apgd(set, mode))?;
        let delta = final_delta(&trace);
        out.success.push(examples.iter().map(|&(x, y)| Ok(model.predict(&perturbed(x, delta))? != y)).collect::<Result<_>>()?);
        out.traces.push(trace);
    }
    Ok(out)
}

/// One perturbation per image that must survive every transform.
///
/// A deterministic transform domain counts as fooled when the transformed
/// perturbed image is misclassified. A stochastic one is scored on
/// `mc_samples` fresh draws from an evaluation stream and counts as fooled
/// when at least half of them are misclassified.
#[allow(clippy::too_many_arguments)]
pub fn transform_attack(
    model: &Mlp,
    data: &Dataset,
    shape: (usize, usize),
    indices: &[usize],
    specs: &[TransformSpec<f64>],
    mc_samples: usize,
    settings: &AttackSettings,
    mode: WeightMode,
) -> Result<AttackOutcome> {
    let (h, w) = shape;
    let root = SeededRng::new(settings.seed);
    let mut out = AttackOutcome { mode, success: Vec::new(), traces: Vec::new() };
    for &n in indices {
        let (x, y) = (data.input(n), data.label(n));
        let img = ImageTensor::new(h, w, 1, x.to_vec())?;
        let set = ConstraintSet::around_input(settings.norm, settings.eps, x)?;
        let stream = root.substream(n as u64);
        let mut oracles = transform_oracles(model, &img, y, settings.loss, specs, mc_samples, &stream)?;
        let trace = solve(&mut oracles, &settings.apgd(set, mode))?;
        let adv = ImageTensor::new(h, w, 1, perturbed(x, final_delta(&trace)))?;
        let mut eval = root.substream(STREAM_EVAL).substream(n as u64);
        let mut row = Vec::with_capacity(specs.len());
        for spec in specs {
            let fooled = if spec.stochastic {
                let mut hits = 0;
                for _ in 0..mc_samples {
                    let t = spec.sample(&mut eval)?;
                    if model.predict(t.apply(&adv)?.as_slice())? != y {
                        hits += 1;
                    }
                }
                2 * hits >= mc_samples
            } else {
                model.predict(spec.apply(&adv)?.as_slice())? != y
            };
            row.push(fooled);
        }
        out.success.push(row);
        out.traces.push(trace);
    }
    Ok(out)
}

fn weight_rows(mean: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    mean.iter().enumerate().flat_map(|(t, w)| w.iter().enumerate().map(move |(i, &v)| (t, i, v))).collect()
}

/// Runs `task` and writes its result files into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, task: Task) -> Result<RunOutput> {
    cfg.validate(task)?;
    let out = execute(cfg, task)?;
    write_outputs(&cfg.out, cfg, task, &out)?;
    Ok(out)
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, task: Task, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
    write_metrics(&dir.join("metrics.csv"), &out.metrics)?;
    write_weights(&dir.join("weights.csv"), &out.weights)?;
    let resolved = ExperimentConfig { task: Some(task), ..cfg.clone() };
    let path = dir.join("manifest.toml");
    fs::write(&path, resolved.to_toml()).map_err(|source| HarnessError::Io { path, source })
}

/// Runs `task` without writing anything.
pub fn execute(cfg: &ExperimentConfig, task: Task) -> Result<RunOutput> {
    match task {
        Task::Project => run_project(cfg),
        Task::TrainNatural => run_train_natural(cfg),
        Task::TrainAt => run_train_at(cfg),
        Task::AttackEnsemble | Task::AttackUniversal | Task::AttackTransform => run_attack(cfg, task),
    }
}

/// Projection of the `[project]` vector.
pub fn project_from_config(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let p = cfg.project.as_ref().ok_or_else(|| HarnessError::Config("missing [project] section".into()))?;
    let set = ConstraintSet::new(parse_norm(&p.norm)?, p.eps, p.lower.clone(), p.upper.clone())?;
    Ok(set.project(&p.vector)?)
}

fn run_project(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = cfg.project.as_ref().expect("validated");
    let norm = parse_norm(&p.norm)?;
    let x = project_from_config(cfg)?;
    let metrics = x
        .iter()
        .enumerate()
        .map(|(i, &v)| MetricRecord::new("projection", v, cfg.seed).ball(norm, p.eps).k(x.len()).iter(i))
        .collect();
    Ok(RunOutput { metrics, weights: Vec::new() })
}

fn run_train_natural(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let data = load_data(cfg)?;
    let (model, acc, loss) = train_natural_model(cfg, &data.train, 0)?;
    let mut metrics = Vec::new();
    for (e, (a, l)) in acc.iter().zip(&loss).enumerate() {
        metrics.push(MetricRecord::new("train_accuracy", 100.0 * a, cfg.seed).iter(e));
        metrics.push(MetricRecord::new("train_loss", *l, cfg.seed).iter(e));
    }
    metrics.push(MetricRecord::new("test_accuracy", 100.0 * accuracy(&model, &data.test)?, cfg.seed));
    save_model(cfg, &model)?;
    Ok(RunOutput { metrics, weights: Vec::new() })
}

fn save_model(cfg: &ExperimentConfig, model: &Mlp) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).map_err(|source| HarnessError::Io { path: cfg.out.clone(), source })?;
    let path = cfg.out.join("model.ckpt");
    save_checkpoint(model, &path)?;
    Ok(path)
}

/// AMPGD settings resolved from `[train]`.
pub fn at_config(cfg: &ExperimentConfig) -> Result<AtConfig<f64>> {
    let t = &cfg.train;
    Ok(AtConfig {
        inner_steps: t.inner_steps,
        delta_lr: t.delta_lr,
        weight_lr: t.weight_lr,
        gamma: t.gamma,
        lr: t.lr,
        epochs: t.epochs,
        batch: t.batch,
        adv_ratio: t.adv_ratio,
        lambda: t.lambda,
        loss: parse_loss(&t.loss, minmax_core::models::DEFAULT_KAPPA)?,
        weights: parse_weights(&t.weights)?,
        seed: cfg.seed,
        ..AtConfig::new(cfg.attack_types()?)
    })
}

fn run_train_at(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let data = load_data(cfg)?;
    let at = at_config(cfg)?;
    let k = at.attack_types.len();
    let mut model = match &cfg.train.init {
        Some(p) => checked_checkpoint(p, data.train.dim())?,
        None => {
            let dims = Mlp::model_a_dims(data.train.dim(), data.train.classes(), cfg.train.width);
            Mlp::init(&dims, &mut SeededRng::new(cfg.seed).substream(STREAM_INIT))?
        }
    };
    let trace = ampgd_train(&mut model, &data.train, &at)?;
    let seed = cfg.seed;
    let mut metrics = Vec::new();
    let mut weights = Vec::new();
    for e in 0..trace.epoch_loss.len() {
        metrics.push(MetricRecord::new("train_loss", trace.epoch_loss[e], seed).k(k).iter(e));
        metrics.push(MetricRecord::new("train_accuracy", 100.0 * trace.clean_accuracy[e], seed).k(k).iter(e));
        for (i, a) in at.attack_types.iter().enumerate() {
            let acc = 100.0 * trace.adv_accuracy[e][i];
            metrics.push(MetricRecord::new("train_adv_accuracy", acc, seed).ball(a.norm, a.eps).k(k).iter(e));
        }
        for (i, w) in trace.mean_weights(e).into_iter().enumerate() {
            weights.push((e, i, w));
        }
    }
    metrics.push(MetricRecord::new("test_accuracy", 100.0 * accuracy(&model, &data.test)?, seed).k(k));
    let eval_idx = sample_indices(data.test.len(), cfg.train.eval_images, seed);
    let eval = data.test.subset(&eval_idx)?;
    let correct = robustness_matrix(&model, &eval, &AtConfig { lambda: 0.0, ..at.clone() })?;
    for (i, a) in at.attack_types.iter().enumerate() {
        let acc = correct.iter().filter(|row| row[i]).count() as f64 / correct.len() as f64;
        metrics.push(MetricRecord::new("test_adv_accuracy", 100.0 * acc, seed).ball(a.norm, a.eps).k(k));
    }
    let (max, avg) = acc_adv(&correct)?;
    metrics.push(MetricRecord::new("acc_adv_max", max, seed).k(k));
    metrics.push(MetricRecord::new("acc_adv_avg", avg, seed).k(k));
    save_model(cfg, &model)?;
    Ok(RunOutput { metrics, weights })
}

fn run_attack(cfg: &ExperimentConfig, task: Task) -> Result<RunOutput> {
    let settings = AttackSettings::from_config(cfg)?;
    let modes = parse_methods(&cfg.attack.methods)?.modes();
    let data = load_data(cfg)?;
    let models = build_models(cfg, &data.train)?;
    let a = &cfg.attack;
    let indices = sample_indices(data.test.len(), a.images, cfg.seed);
    let mut metrics = Vec::new();
    let mut weights = Vec::new();
    for (j, mode) in modes.into_iter().enumerate() {
        let name = mode_name(mode);
        let outcome = match task {
            Task::AttackEnsemble => ensemble_attack(&models, &data.test, &indices, &settings, mode)?,
            Task::AttackUniversal => universal_attack(&models[0], &data.test, &indices, a.group_size, &settings, mode)?,
            _ => {
                let specs: Vec<TransformSpec<f64>> =
                    a.transforms.iter().map(|t| TransformSpec::named(t, a.stochastic)).collect::<std::result::Result<_, _>>()?;
                transform_attack(&models[0], &data.test, data.shape, &indices, &specs, a.mc_samples, &settings, mode)?
            }
        };
        let k = outcome.success.first().map_or(0, Vec::len);
        let rec = |metric: &str, v: f64| MetricRecord::new(format!("{metric}.{name}"), v, cfg.seed).ball(settings.norm, settings.eps).k(k);
        if task == Task::AttackUniversal {
            let (avg, gp) = asr_group(&outcome.success)?;
            metrics.push(rec("asr_avg", avg));
            metrics.push(rec("asr_gp", gp));
        } else {
            metrics.push(rec("asr_all", asr_all(&outcome.success)?));
            for i in 0..k {
                let asr = outcome.success.iter().filter(|row| row[i]).count() as f64 / outcome.success.len() as f64;
                metrics.push(rec(&format!("asr_domain{i}"), 100.0 * asr));
            }
        }
        let mean_obj = |t: usize| outcome.traces.iter().map(|tr| tr.objective[t]).sum::<f64>() / outcome.traces.len() as f64;
        metrics.push(rec("objective", mean_obj(settings.iters)).iter(settings.iters));
        // weights.csv follows the first strategy run (min-max when both run).
        if j == 0 {
            weights = weight_rows(&outcome.mean_weights());
        }
    }
    Ok(RunOutput { metrics, weights })
}
