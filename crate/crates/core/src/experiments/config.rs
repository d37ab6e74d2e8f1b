//! TOML experiment configuration. Every section is optional and unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::AttackConfig;
use crate::baselines::{BaselineKind, BaselineParams};
use crate::dataset::{self, ClipConfig, RawDataset};
use crate::error::{Error, Result};
use crate::learners::FitConfig;
use crate::mechanism::BudgetConfig;
use crate::metrics::StructureConfig;

pub const CONFIG_VERSION: u32 = 1;

/// The trust grid evaluated by default.
pub const DEFAULT_TAUS: [f64; 8] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.85, 0.95, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Directory holding an IDX image/label pair.
    Mnist,
    /// Explicit IDX image and label files.
    Idx,
    /// CIFAR-10 binary batches.
    Cifar,
    /// CSV with a `label` column.
    Csv,
    /// Gaussian blobs generated in memory.
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Display name; defaults to the kind.
    pub name: Option<String>,
    /// `mnist` directory or `csv` file.
    pub path: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub files: Vec<PathBuf>,
    /// Min-max scale CSV columns into `[0, 1]`.
    pub normalize: bool,
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub spread: f64,
    pub seed: u64,
    /// Uniform subsample size applied after loading.
    pub subsample: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Mnist,
            name: None,
            path: Some(PathBuf::from("data/mnist")),
            images: None,
            labels: None,
            files: Vec::new(),
            normalize: false,
            n: 500,
            d: 10,
            classes: 4,
            spread: 0.1,
            seed: 0,
            subsample: None,
        }
    }
}

const IDX_IMAGE_NAMES: [&str; 3] = ["images-idx3-ubyte", "train-images-idx3-ubyte", "train-images.idx3-ubyte"];
const IDX_LABEL_NAMES: [&str; 3] = ["labels-idx1-ubyte", "train-labels-idx1-ubyte", "train-labels.idx1-ubyte"];

fn find_in(dir: &Path, names: &[&str]) -> Result<PathBuf> {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::InvalidDataset(format!("no {} in {}", names[0], dir.display())))
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            match self.kind {
                DatasetKind::Mnist => "mnist",
                DatasetKind::Idx => "idx",
                DatasetKind::Cifar => "cifar10",
                DatasetKind::Csv => "csv",
                DatasetKind::Blobs => "blobs",
            }
            .to_string()
        })
    }

    /// Interprets a CLI `--dataset` value: `mnist` or `blobs`, a directory
    /// holding IDX files, a `.csv` file, or a CIFAR `.bin` batch.
    pub fn from_cli(value: &str) -> Result<Self> {
        let mut cfg = Self::default();
        match value {
            "mnist" => return Ok(cfg),
            "blobs" => {
                cfg.kind = DatasetKind::Blobs;
                cfg.path = None;
                return Ok(cfg);
            }
            _ => {}
        }
        let path = PathBuf::from(value);
        if path.is_dir() {
            cfg.path = Some(path);
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            cfg.kind = DatasetKind::Csv;
            cfg.path = Some(path);
            cfg.normalize = true;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin")) {
            cfg.kind = DatasetKind::Cifar;
            cfg.path = None;
            cfg.files = vec![path];
        } else {
            return Err(Error::Config(format!(
                "dataset {value:?} is neither a known name, a directory, a .csv nor a .bin file"
            )));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let need = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!("dataset kind {:?} requires `{field}`", self.kind)))
            }
        };
        match self.kind {
            DatasetKind::Mnist | DatasetKind::Csv => need("path", self.path.is_some())?,
            DatasetKind::Idx => {
                need("images", self.images.is_some())?;
                need("labels", self.labels.is_some())?;
            }
            DatasetKind::Cifar => need("files", !self.files.is_empty())?,
            DatasetKind::Blobs => {
                if self.n == 0 || self.d == 0 || self.classes < 2 {
                    return Err(Error::Config(format!(
                        "blobs need n, d >= 1 and classes >= 2, got ({}, {}, {})",
                        self.n, self.d, self.classes
                    )));
                }
                if !(self.spread >= 0.0) {
                    return Err(Error::Config(format!("blob spread must be non-negative, got {}", self.spread)));
                }
            }
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("subsample must be positive".into()));
        }
        Ok(())
    }

    /// Loads, names and optionally subsamples the dataset.
    pub fn load(&self) -> Result<RawDataset<f64>> {
        self.validate()?;
        let mut ds = match self.kind {
            DatasetKind::Mnist => {
                let dir = self.path.as_deref().expect("validated");
                dataset::load_idx(find_in(dir, &IDX_IMAGE_NAMES)?, find_in(dir, &IDX_LABEL_NAMES)?)?
            }
            DatasetKind::Idx => dataset::load_idx(
                self.images.as_deref().expect("validated"),
                self.labels.as_deref().expect("validated"),
            )?,
            DatasetKind::Cifar => dataset::load_cifar_batches(&self.files)?,
            DatasetKind::Csv => dataset::load_csv(self.path.as_deref().expect("validated"), self.normalize)?,
            DatasetKind::Blobs => dataset::synthesize_blobs(self.n, self.d, self.classes, self.spread, self.seed)?,
        };
        if let Some(m) = self.subsample {
            if m < ds.len() {
                ds = dataset::subsample(&ds, m, self.seed)?;
            }
        }
        ds.name = self.display_name();
        Ok(ds)
    }
}

/// Parameters for the baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub methods: Vec<BaselineKind>,
    /// Budgets for the DP baselines; the mechanism runs at the matching trust levels.
    pub epsilons: Vec<f64>,
    pub params: BaselineParams<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            methods: BaselineKind::ALL.to_vec(),
            epsilons: vec![15.0, 47.5, 80.0],
            params: BaselineParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub tau: f64,
    /// Half-width of the per-record trust interval of the adaptive variant.
    pub spread: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { tau: 0.5, spread: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub tau: f64,
    pub eps_min: Vec<f64>,
    pub eps_max: Vec<f64>,
    pub clip: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            eps_min: vec![10.0, 15.0, 20.0, 30.0],
            eps_max: vec![40.0, 60.0, 80.0, 100.0],
            clip: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    pub max_d: u32,
    pub fractions: Vec<f64>,
    pub r: u32,
    pub kl_dims: Vec<u32>,
    pub kl_points: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            max_d: 20,
            fractions: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            r: 2,
            kl_dims: vec![1, 10, 100],
            kl_points: 100,
        }
    }
}

/// Settings for the shared evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct EvalConfig {
    pub probe: FitConfig,
    pub attack: AttackConfig,
    pub structure: StructureConfig,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub budget: BudgetConfig<f64>,
    pub taus: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub eval: EvalConfig,
    pub compare: CompareConfig,
    pub ablation: AblationConfig,
    pub sensitivity: SensitivityConfig,
    pub theory: TheoryConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            dataset: DatasetConfig::default(),
            budget: BudgetConfig::default(),
            taus: DEFAULT_TAUS.to_vec(),
            trials: 5,
            base_seed: 0,
            eval: EvalConfig::default(),
            compare: CompareConfig::default(),
            ablation: AblationConfig::default(),
            sensitivity: SensitivityConfig::default(),
            theory: TheoryConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

fn check_tau(what: &str, tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {tau} outside [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.taus.is_empty() {
            return Err(Error::Config("tau grid is empty".into()));
        }
        for &t in &self.taus {
            check_tau("tau", t)?;
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.dataset.validate()?;
        self.budget.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.eval.probe.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.eval.attack.fit.validate().map_err(|e| Error::Config(e.to_string()))?;
        ClipConfig::new(self.budget.delta2).map_err(|e| Error::Config(e.to_string()))?;
        if self.eval.structure.pair_budget < 10 || self.eval.structure.k.is_empty() {
            return Err(Error::Config("structure metrics need k values and a pair budget >= 10".into()));
        }
        check_tau("ablation tau", self.ablation.tau)?;
        check_tau("sensitivity tau", self.sensitivity.tau)?;
        if !(self.ablation.spread >= 0.0) {
            return Err(Error::Config("ablation spread must be non-negative".into()));
        }
        if self.compare.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("comparison budgets must be positive".into()));
        }
        if self.sensitivity.clip.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("clip norms must be positive".into()));
        }
        // Each varied bound must still form a valid budget with the other fixed bound.
        let b = &self.budget;
        for &lo in &self.sensitivity.eps_min {
            BudgetConfig::new(lo, b.eps_max, b.delta, b.delta2, b.alpha)
                .map_err(|e| Error::Config(format!("sensitivity eps_min {lo}: {e}")))?;
        }
        for &hi in &self.sensitivity.eps_max {
            BudgetConfig::new(b.eps_min, hi, b.delta, b.delta2, b.alpha)
                .map_err(|e| Error::Config(format!("sensitivity eps_max {hi}: {e}")))?;
        }
        Ok(())
    }

    /// Seeds `base_seed + trial` for every trial.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.trials as u64).map(move |t| self.base_seed + t)
    }
}
