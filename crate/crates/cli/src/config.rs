use std::path::{Path, PathBuf};

use poincare_persistence::data::{DatasetSource, FiltrationSpec};
use poincare_persistence::learn::TrainConfig;
use poincare_persistence::representation::{EssentialPolicy, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A run config: one TOML file shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    /// Held-out evaluation set. When present, `train` fits on `dataset` and
    /// reports accuracy on this set instead of cross-validating.
    #[serde(default)]
    pub test_dataset: Option<DatasetSource>,
    pub filtrations: Vec<FiltrationSpec>,
    /// Diagram cache directory.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Representation variants; `train` produces one metric row per entry.
    pub variants: Vec<Variant>,
    /// Ball dimension.
    pub m: usize,
    /// Projection bases per homology dimension.
    pub bases: usize,
    pub essential_policy: EssentialPolicy,
    /// Death value of essential points. Defaults to the largest finite
    /// filtration value of the training set.
    pub max_scale: Option<f64>,
    /// Channels fed to the model (all when absent).
    pub channels: Option<Vec<String>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Poinc],
            m: 3,
            bases: 10,
            essential_policy: EssentialPolicy::MaxScale,
            max_scale: None,
            channels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub bins: usize,
    /// Histogram range; defaults like `model.max_scale`.
    pub max_scale: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            bins: 10,
            max_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Number of leading dataset samples in the checked batch.
    pub samples: usize,
    /// Parameters checked per group.
    pub per_group: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            samples: 8,
            per_group: 64,
            step: 1e-5,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    /// Number of base diagrams (leading samples of the dataset).
    pub diagrams: usize,
    /// Perturbation sizes; the largest calibrates the constant.
    pub deltas: Vec<f64>,
    /// Channel the base diagrams come from (the first when absent).
    pub channel: Option<String>,
    /// Allowed slack over the calibrated linear bound.
    pub slack: f64,
    /// Representation parameters from a checkpoint instead of random ones.
    pub checkpoint: Option<PathBuf>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            diagrams: 50,
            deltas: vec![1e-2, 1e-3, 1e-4],
            channel: None,
            slack: 2.0,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(vec![e.to_string()]))
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for src in std::iter::once(&mut self.dataset).chain(self.test_dataset.as_mut()) {
            match src {
                DatasetSource::GraphDir { path }
                | DatasetSource::Tu { path, .. }
                | DatasetSource::PgmDir { path } => fix(path),
                DatasetSource::Idx { images, labels, .. } => {
                    fix(images);
                    fix(labels);
                }
                DatasetSource::Synth { .. } => {}
            }
        }
        for p in [
            self.cache_dir.as_mut(),
            self.eval.checkpoint.as_mut(),
            self.stability.checkpoint.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Applies the global seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut p = Vec::new();
        if let Err(poincare_persistence::learn::LearnError::Config(list)) = self.train.validate() {
            p.extend(list);
        }
        if self.filtrations.is_empty() {
            p.push("at least one filtration is required".into());
        }
        if self.model.variants.is_empty() {
            p.push("model.variants must not be empty".into());
        }
        if self.model.m < 2 {
            p.push(format!("model.m must be at least 2, got {}", self.model.m));
        }
        if self.model.bases == 0 {
            p.push("model.bases must be positive".into());
        }
        for (name, v) in [
            ("model.max_scale", self.model.max_scale),
            ("baseline.max_scale", self.baseline.max_scale),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    p.push(format!("{name} must be positive and finite, got {v}"));
                }
            }
        }
        if self.baseline.bins == 0 {
            p.push("baseline.bins must be positive".into());
        }
        if self.gradcheck.samples == 0 || self.gradcheck.per_group == 0 {
            p.push("gradcheck.samples and gradcheck.per_group must be positive".into());
        }
        if !(self.gradcheck.step > 0.0) || !(self.gradcheck.tolerance > 0.0) {
            p.push("gradcheck.step and gradcheck.tolerance must be positive".into());
        }
        if self.stability.diagrams == 0 {
            p.push("stability.diagrams must be positive".into());
        }
        if self.stability.deltas.is_empty() || self.stability.deltas.iter().any(|d| !(*d > 0.0)) {
            p.push("stability.deltas must be a non-empty list of positive values".into());
        }
        if !(self.stability.slack >= 1.0) {
            p.push("stability.slack must be at least 1".into());
        }
        if let DatasetSource::Synth { n_per_class, .. } = &self.dataset {
            if *n_per_class == 0 {
                p.push("dataset.n_per_class must be positive".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(p))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}
