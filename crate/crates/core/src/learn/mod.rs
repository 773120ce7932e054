//! Training stack: a scalar reverse-mode tape, the dense classification
//! head, Adam and the training loops.
//!
//! Representation layers are not recorded on the tape. Their features enter
//! as leaves and the feature adjoints are pulled back through the per-slot
//! Jacobians computed by [`crate::representation`].

mod adam;
mod gradcheck;
mod model;
mod tape;
mod train;

pub use adam::Adam;
pub use gradcheck::{gradcheck, GradcheckOptions, GroupCheck};
pub use model::{
    argmax, log_sum_exp, softmax, BatchGradient, BatchNormState, BnMode, HeadConfig, InputLayer,
    Model, SampleFeatures,
};
pub use tape::{Gradients, Tape, Var};
pub use train::{
    accuracy, mean_std, stratified_folds, train, train_cv, CvReport, EpochLog, FoldSummary,
    TrainConfig, TrainOutcome,
};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persistence::PersistenceDiagram;
use crate::representation::ReprError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("non-finite value or adjoint at tape node {node}")]
    NonFinite { node: usize },
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("expected {expected} inputs, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("class {class} has {count} samples, fewer than the {folds} folds")]
    ClassMissing {
        class: usize,
        count: usize,
        folds: usize,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl LearnError {
    /// Whether the error is a numerical failure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::NonFinite { .. } | Self::NonFiniteGradient { .. }
        ) || matches!(self, Self::Repr(ReprError::Hyperbolic(_)))
    }
}

/// One labelled sample: a diagram per input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub diagrams: Vec<PersistenceDiagram>,
    pub label: usize,
}

pub const CHECKPOINT_FORMAT: &str = "ppoinc-checkpoint/1";

/// Versioned JSON checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: Model,
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<(), LearnError> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        model: model.clone(),
    };
    let text =
        serde_json::to_string_pretty(&ck).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
    std::fs::write(path, text)
        .map_err(|e| LearnError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Model, LearnError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LearnError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(LearnError::Checkpoint(format!(
            "unsupported format {:?}, expected {CHECKPOINT_FORMAT:?}",
            ck.format
        )));
    }
    Ok(ck.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::RhoConfig;
    use crate::representation::{EssentialPolicy, ReprParams, Variant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rho = RhoConfig::diagonal_lattice(3, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let p = ReprParams::init(
            Variant::Poinc,
            2,
            EssentialPolicy::SeparateBase,
            rho,
            2.0,
            &mut rng,
        )
        .unwrap();
        let cfg = HeadConfig {
            hidden: vec![4, 3],
            ..HeadConfig::default()
        };
        let model = Model::new(vec![InputLayer::Representation(p)], 2, &cfg, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&path, &model).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), model);
        std::fs::write(&path, "{\"format\":\"other\",\"model\":null}").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
