//! TOML run configuration.
//!
//! Every section and key is optional; missing values take the defaults
//! below, unknown keys are rejected. Relative paths resolve against the
//! directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use cascade_core::numerics::AdamConfig;
use cascade_core::pipeline::{Ablation, ClassifierConfig, ContextConfig, EncoderShape, Fusion};
use cascade_core::pvdm::PvdmConfig;
use cascade_core::textcnn::{Loss, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub paths: Paths,
    pub corpus: CorpusSection,
    pub stylometric: PvdmSection,
    pub discourse: PvdmSection,
    pub personality: EncoderSection,
    pub fusion: FusionSection,
    pub classifier: ClassifierSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 1,
            paths: Paths::default(),
            corpus: CorpusSection::default(),
            stylometric: PvdmSection::default(),
            discourse: PvdmSection::default(),
            personality: EncoderSection::default(),
            fusion: FusionSection::default(),
            classifier: ClassifierSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub essays: Option<PathBuf>,
    pub output: PathBuf,
    /// Optional word vectors in embedding-table format.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            essays: None,
            output: PathBuf::from("cascade-out"),
            word_vectors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub min_count: u64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { min_count: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvdmSection {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub edge_windows: bool,
}

impl Default for PvdmSection {
    fn default() -> Self {
        let d = PvdmConfig::default();
        Self {
            dim: d.dim,
            window: d.window,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            edge_windows: d.edge_windows,
        }
    }
}

impl PvdmSection {
    fn to_core(&self) -> PvdmConfig {
        PvdmConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: 0,
            edge_windows: self.edge_windows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub embedding_dim: usize,
    pub heights: [usize; 3],
    pub feature_maps: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub holdout_fraction: f64,
    pub learning_rate: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let shape = EncoderShape::default();
        let t = TrainConfig::new(Loss::BinaryCrossEntropy);
        Self {
            embedding_dim: shape.embedding_dim,
            heights: shape.heights,
            feature_maps: shape.feature_maps,
            hidden: shape.hidden,
            max_len: shape.max_len,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            holdout_fraction: t.holdout_fraction,
            learning_rate: t.adam.learning_rate,
        }
    }
}

impl EncoderSection {
    fn shape(&self) -> EncoderShape {
        EncoderShape {
            embedding_dim: self.embedding_dim,
            heights: self.heights,
            feature_maps: self.feature_maps,
            hidden: self.hidden,
            max_len: self.max_len,
        }
    }

    fn training(&self, loss: Loss) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            holdout_fraction: self.holdout_fraction,
            adam: AdamConfig::with_learning_rate(self.learning_rate),
            ..TrainConfig::new(loss)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Cca,
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSection {
    pub mode: FusionMode,
    pub user_dim: usize,
    pub ridge: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        let c = ContextConfig::default();
        Self {
            mode: FusionMode::Cca,
            user_dim: c.user_dim,
            ridge: c.ridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub embedding_dim: usize,
    pub heights: [usize; 3],
    pub feature_maps: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub holdout_fraction: f64,
    pub learning_rate: f64,
    pub use_user: bool,
    pub use_discourse: bool,
    /// Loss weights for (non-sarcastic, sarcastic); off unless set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<[f64; 2]>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let e = EncoderSection::default();
        Self {
            embedding_dim: e.embedding_dim,
            heights: e.heights,
            feature_maps: e.feature_maps,
            hidden: e.hidden,
            max_len: e.max_len,
            batch_size: e.batch_size,
            max_epochs: e.max_epochs,
            patience: e.patience,
            holdout_fraction: e.holdout_fraction,
            learning_rate: e.learning_rate,
            use_user: true,
            use_discourse: true,
            class_weights: None,
        }
    }
}

impl ClassifierSection {
    fn encoder(&self) -> EncoderSection {
        EncoderSection {
            embedding_dim: self.embedding_dim,
            heights: self.heights,
            feature_maps: self.feature_maps,
            hidden: self.hidden,
            max_len: self.max_len,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            holdout_fraction: self.holdout_fraction,
            learning_rate: self.learning_rate,
        }
    }
}

fn check_dims(section: &str, dims: &[(&str, usize)]) -> Result<()> {
    match dims.iter().find(|(_, v)| *v == 0) {
        Some((key, _)) => Err(CliError::Config(format!("{section}.{key} must be at least 1"))),
        None => Ok(()),
    }
}

fn check_encoder(section: &str, e: &EncoderSection) -> Result<()> {
    check_dims(
        section,
        &[
            ("embedding_dim", e.embedding_dim),
            ("feature_maps", e.feature_maps),
            ("hidden", e.hidden),
            ("max_len", e.max_len),
            ("batch_size", e.batch_size),
            ("max_epochs", e.max_epochs),
        ],
    )?;
    if e.heights.contains(&0) {
        return Err(CliError::Config(format!("{section}.heights must be at least 1")));
    }
    if !(0.0..1.0).contains(&e.holdout_fraction) {
        return Err(CliError::Config(format!("{section}.holdout_fraction must lie in [0, 1)")));
    }
    if !(e.learning_rate > 0.0 && e.learning_rate.is_finite()) {
        return Err(CliError::Config(format!("{section}.learning_rate must be positive")));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [&mut paths.train, &mut paths.test, &mut paths.essays, &mut paths.word_vectors]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut paths.output);
    }

    pub fn validate(&self) -> Result<()> {
        check_dims("", &[("threads", self.threads)])?;
        for (name, s) in [("stylometric", &self.stylometric), ("discourse", &self.discourse)] {
            check_dims(name, &[("dim", s.dim), ("window", s.window), ("epochs", s.epochs)])?;
            if !(s.learning_rate > 0.0 && s.learning_rate.is_finite()) {
                return Err(CliError::Config(format!("{name}.learning_rate must be positive")));
            }
        }
        check_encoder("personality", &self.personality)?;
        check_encoder("classifier", &self.classifier.encoder())?;
        check_dims("fusion", &[("user_dim", self.fusion.user_dim)])?;
        if !(self.fusion.ridge >= 0.0 && self.fusion.ridge.is_finite()) {
            return Err(CliError::Config("fusion.ridge must be a non-negative number".into()));
        }
        if let Some(w) = self.classifier.class_weights {
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(CliError::Config("classifier.class_weights must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn context_config(&self) -> ContextConfig {
        ContextConfig {
            min_count: self.corpus.min_count,
            stylometric: self.stylometric.to_core(),
            discourse: self.discourse.to_core(),
            personality: self.personality.shape(),
            personality_training: self.personality.training(Loss::BinaryCrossEntropy),
            user_dim: self.fusion.user_dim,
            ridge: self.fusion.ridge,
            fusion: match self.fusion.mode {
                FusionMode::Cca => Fusion::Cca,
                FusionMode::Concat => Fusion::Concat,
            },
            threads: self.threads,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let e = self.classifier.encoder();
        let mut training = e.training(Loss::CategoricalCrossEntropyBase2);
        training.class_weights = self.classifier.class_weights.map(|w| w.to_vec());
        ClassifierConfig {
            shape: e.shape(),
            training,
        }
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            use_user: self.classifier.use_user,
            use_discourse: self.classifier.use_discourse,
        }
    }
}
