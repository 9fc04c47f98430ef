//! Experiment configuration, read from TOML.
//!
//! ```toml
//! task = "attack-ensemble"   # optional; the CLI subcommand decides
//! seed = 0
//! out = "runs/ensemble"
//!
//! [data]
//! source = "mnist"           # mnist | blobs | moons
//! dir = "data/mnist"
//! train_limit = 1000
//! test_limit = 500
//!
//! [models]
//! paths = []                 # checkpoints; when empty, models are trained
//! natural = 1                # naturally trained models to build
//! robust = 1                 # l-inf adversarially trained models to build
//!
//! [attack]
//! norm = "inf"
//! eps = 0.2
//! alpha = 0.25
//! beta = 0.02
//! gamma = 3.0
//! iters = 50
//! loss = "cw"
//! methods = "both"           # both | minmax | average
//! images = 100
//!
//! [train]
//! attack_types = [{ norm = "inf", eps = 0.2 }, { norm = "2", eps = 1.0 }]
//!
//! [project]
//! norm = "1"
//! eps = 1.0
//! vector = [2.0, -0.5, 0.2]
//! lower = [-1.0, -1.0, -1.0]
//! upper = [1.0, 1.0, 1.0]
//! ```
//!
//! Every section has defaults; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use minmax_core::attack::WeightMode;
use minmax_core::defense::AttackType;
use minmax_core::models::DEFAULT_KAPPA;
use minmax_core::{ConstraintSet, LossKind, Norm, TransformSpec};
use serde::{Deserialize, Serialize};

use crate::synthetic::SyntheticKind;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    AttackEnsemble,
    AttackUniversal,
    AttackTransform,
    TrainAt,
    TrainNatural,
    Project,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::AttackEnsemble => "attack-ensemble",
            Task::AttackUniversal => "attack-universal",
            Task::AttackTransform => "attack-transform",
            Task::TrainAt => "train-at",
            Task::TrainNatural => "train-natural",
            Task::Project => "project",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub train: TrainSection,
    pub project: Option<ProjectConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: String,
    pub dir: PathBuf,
    pub train_limit: usize,
    pub test_limit: usize,
    /// Synthetic sources only.
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: "mnist".into(),
            dir: PathBuf::from("data/mnist"),
            train_limit: 1000,
            test_limit: 500,
            n: 600,
            dim: 16,
            classes: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub paths: Vec<PathBuf>,
    pub natural: usize,
    pub robust: usize,
    /// Hidden-width multiplier of the 128-128-64 MLP.
    pub width: f64,
    pub epochs: usize,
    pub robust_epochs: usize,
    pub robust_eps: f64,
    pub lr: f64,
    pub batch: usize,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            paths: Vec::new(),
            natural: 1,
            robust: 1,
            width: 0.25,
            epochs: 20,
            robust_epochs: 5,
            robust_eps: 0.2,
            lr: 0.1,
            batch: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub norm: String,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub iters: usize,
    pub loss: String,
    pub kappa: f64,
    pub methods: String,
    /// Test images attacked (ensemble, transform) or grouped (universal).
    pub images: usize,
    pub group_size: usize,
    pub transforms: Vec<String>,
    pub stochastic: bool,
    pub mc_samples: usize,
    pub random_init: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            norm: "inf".into(),
            eps: 0.2,
            alpha: 0.25,
            beta: 0.02,
            gamma: 3.0,
            iters: 50,
            loss: "cw".into(),
            kappa: DEFAULT_KAPPA,
            methods: "both".into(),
            images: 100,
            group_size: 4,
            transforms: ["flh", "flv", "bri", "gam", "crop"].map(String::from).to_vec(),
            stochastic: false,
            mc_samples: minmax_core::transforms::DEFAULT_MC_SAMPLES,
            random_init: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackTypeConfig {
    pub norm: String,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub attack_types: Vec<AttackTypeConfig>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub inner_steps: usize,
    pub delta_lr: f64,
    pub weight_lr: f64,
    pub gamma: f64,
    pub adv_ratio: f64,
    pub lambda: f64,
    pub loss: String,
    pub weights: String,
    pub width: f64,
    /// Test examples used for the adversarial accuracy summary.
    pub eval_images: usize,
    /// Checkpoint to start from instead of a fresh initialisation.
    pub init: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            attack_types: vec![
                AttackTypeConfig { norm: "inf".into(), eps: 0.2 },
                AttackTypeConfig { norm: "2".into(), eps: 1.0 },
            ],
            epochs: 5,
            batch: 32,
            lr: 0.05,
            inner_steps: 20,
            delta_lr: 1.0 / 6.0,
            weight_lr: 0.02,
            gamma: 4.0,
            adv_ratio: 0.5,
            lambda: 0.0,
            loss: "ce".into(),
            weights: "learned".into(),
            width: 0.25,
            eval_images: 100,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub norm: String,
    pub eps: f64,
    pub vector: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Which weight strategies an attack task runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Methods {
    Both,
    MinMax,
    Average,
}

impl Methods {
    pub fn modes(self) -> Vec<WeightMode> {
        match self {
            Methods::Both => vec![WeightMode::Learned, WeightMode::Uniform],
            Methods::MinMax => vec![WeightMode::Learned],
            Methods::Average => vec![WeightMode::Uniform],
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub fn parse_norm(s: &str) -> Result<Norm> {
    Norm::from_str(s).map_err(|e| cfg_err(e.to_string()))
}

pub fn parse_loss(s: &str, kappa: f64) -> Result<LossKind<f64>> {
    match s {
        "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
        "cw" => {
            if !(kappa >= 0.0 && kappa.is_finite()) {
                return Err(cfg_err(format!("kappa must be non-negative, got {kappa}")));
            }
            Ok(LossKind::CwMargin { kappa })
        }
        other => Err(cfg_err(format!("unknown loss '{other}' (expected ce or cw)"))),
    }
}

pub fn parse_weights(s: &str) -> Result<WeightMode> {
    match s {
        "learned" | "minmax" => Ok(WeightMode::Learned),
        "uniform" | "average" => Ok(WeightMode::Uniform),
        other => Err(cfg_err(format!("unknown weight mode '{other}'"))),
    }
}

pub fn parse_methods(s: &str) -> Result<Methods> {
    match s {
        "both" => Ok(Methods::Both),
        "minmax" => Ok(Methods::MinMax),
        "average" => Ok(Methods::Average),
        other => Err(cfg_err(format!("unknown methods '{other}' (expected both, minmax or average)"))),
    }
}

/// Checks `norm`/`eps` with the constraint-set rules on a neutral input.
fn check_ball(norm: &str, eps: f64, what: &str) -> Result<Norm> {
    let n = parse_norm(norm)?;
    ConstraintSet::around_input(n, eps, &[0.5; 4]).map_err(|e| cfg_err(format!("{what}: {e}")))?;
    Ok(n)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn attack_types(&self) -> Result<Vec<AttackType<f64>>> {
        self.train.attack_types.iter().map(|a| Ok(AttackType::new(parse_norm(&a.norm)?, a.eps))).collect()
    }

    /// Checks everything that can be checked without loading data or models.
    pub fn validate(&self, task: Task) -> Result<()> {
        if let Some(t) = self.task {
            if t != task {
                return Err(cfg_err(format!("config is for task '{t}', not '{task}'")));
            }
        }
        match task {
            Task::Project => {
                let p = self.project.as_ref().ok_or_else(|| cfg_err("project task needs a [project] section"))?;
                let norm = parse_norm(&p.norm)?;
                if p.vector.len() != p.lower.len() || p.vector.len() != p.upper.len() {
                    return Err(cfg_err("project vector, lower and upper must have equal length"));
                }
                ConstraintSet::new(norm, p.eps, p.lower.clone(), p.upper.clone())
                    .map_err(|e| cfg_err(format!("project: {e}")))?;
                return Ok(());
            }
            Task::AttackEnsemble | Task::AttackUniversal | Task::AttackTransform => self.validate_attack(task)?,
            Task::TrainAt => self.validate_train()?,
            Task::TrainNatural => {}
        }
        self.validate_data()?;
        self.validate_models(task)
    }

    fn validate_attack(&self, task: Task) -> Result<()> {
        let a = &self.attack;
        check_ball(&a.norm, a.eps, "attack")?;
        parse_loss(&a.loss, a.kappa)?;
        parse_methods(&a.methods)?;
        if !(a.alpha > 0.0 && a.beta > 0.0 && a.gamma >= 0.0) || !(a.alpha * a.beta * a.gamma).is_finite() {
            return Err(cfg_err("attack needs alpha > 0, beta > 0 and gamma >= 0"));
        }
        if a.iters == 0 || a.images == 0 {
            return Err(cfg_err("attack iters and images must be positive"));
        }
        if task == Task::AttackUniversal && (a.group_size == 0 || a.images < a.group_size) {
            return Err(cfg_err("universal attack needs 0 < group_size <= images"));
        }
        if task == Task::AttackTransform {
            if a.transforms.is_empty() {
                return Err(cfg_err("transform attack needs at least one transform"));
            }
            for t in &a.transforms {
                TransformSpec::<f64>::named(t, a.stochastic).map_err(|e| cfg_err(e.to_string()))?;
            }
            if a.stochastic && a.mc_samples == 0 {
                return Err(cfg_err("stochastic transforms need mc_samples >= 1"));
            }
        }
        Ok(())
    }

    fn validate_train(&self) -> Result<()> {
        let t = &self.train;
        if t.attack_types.is_empty() {
            return Err(cfg_err("train needs at least one attack type"));
        }
        for a in &t.attack_types {
            check_ball(&a.norm, a.eps, "train attack type")?;
        }
        parse_loss(&t.loss, DEFAULT_KAPPA)?;
        parse_weights(&t.weights)?;
        if t.epochs == 0 || t.batch == 0 || t.inner_steps == 0 || !(t.width > 0.0) {
            return Err(cfg_err("train epochs, batch, inner_steps and width must be positive"));
        }
        if !(0.0..=1.0).contains(&t.adv_ratio) || !(t.lambda >= 0.0) {
            return Err(cfg_err("train needs adv_ratio in [0, 1] and lambda >= 0"));
        }
        if let Some(p) = &t.init {
            if !p.is_file() {
                return Err(cfg_err(format!("initial checkpoint {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let d = &self.data;
        match d.source.as_str() {
            "mnist" => {
                if d.train_limit == 0 || d.test_limit == 0 {
                    return Err(cfg_err("train_limit and test_limit must be positive"));
                }
            }
            other => {
                let kind = SyntheticKind::from_str(other)?;
                if d.n < 2 * d.classes || d.dim == 0 || d.classes < 2 {
                    return Err(cfg_err("synthetic data needs classes >= 2, dim >= 1 and n >= 2*classes"));
                }
                if kind == SyntheticKind::Moons && (d.classes != 2 || d.dim < 2) {
                    return Err(cfg_err("moons needs classes = 2 and dim >= 2"));
                }
            }
        }
        Ok(())
    }

    fn validate_models(&self, task: Task) -> Result<()> {
        let m = &self.models;
        for p in &m.paths {
            if !p.is_file() {
                return Err(cfg_err(format!("model checkpoint {} does not exist", p.display())));
            }
        }
        let built = m.natural + m.robust;
        let needed = match task {
            Task::AttackEnsemble => 1,
            Task::AttackUniversal | Task::AttackTransform => 1,
            _ => 0,
        };
        if m.paths.len() + built < needed {
            return Err(cfg_err(format!("{task} needs at least {needed} model(s)")));
        }
        if built > 0 && needed > 0 && (m.width <= 0.0 || m.batch == 0 || m.epochs == 0) {
            return Err(cfg_err("model building needs positive width, batch and epochs"));
        }
        if m.robust > 0 && needed > 0 {
            check_ball("inf", m.robust_eps, "robust model training")?;
        }
        Ok(())
    }
}
