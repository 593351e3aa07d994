//! Experiment configuration files.
//!
//! One TOML file fully determines an experiment. Unknown keys are rejected
//! so typos surface as field-level errors. The config hash is the SHA-256 of
//! the canonical re-serialization, so formatting and comments in the source
//! file do not change it.
//!
//! ```toml
//! seed = 1
//!
//! [system]
//! design = "mu"          # "mu" or "su"
//! users = 6
//! resources = 4
//! order = 4
//! power = 1.0
//! pnl_level = 3
//! mapping = "dense"      # "dense", "sparse" or a path to a 0/1 matrix file
//!
//! [architecture]
//! encoder_width = 32
//! encoder_layers = 6
//! decoder_width = 512
//! decoder_layers = 4
//!
//! [training]
//! eta1 = 0.001
//! eta2 = 0.0001
//! t1 = 8000
//! t2 = 2000
//! t3 = 1000
//! batch_size = 400
//! corruption_db = -6.0
//!
//! [loss]
//! kind = "proposed"
//! mu = 1.0
//! delta = 0.05
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::StoppingRule;
use crate::loss::{LossKind, LossSpec};
use crate::modem::ArchitectureSpec;
use crate::system::{MappingMatrix, PnlLevel, SystemConfig};
use crate::train::{
    run_two_step, Autoencoder, BatchReduction, EpochRecord, PlateauRule, TrainingReport,
    TrainingSchedule, DEFAULT_MAX_CLASSES,
};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// One encoder per user on split inputs.
    Mu,
    /// One joint encoder on the concatenated inputs.
    Su,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub design: Design,
    pub users: usize,
    pub resources: usize,
    pub order: usize,
    pub power: f64,
    pub pnl_level: PnlLevel,
    pub mapping: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub eta1: f64,
    pub eta2: f64,
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub batch_size: usize,
    pub corruption_db: f64,
    #[serde(default = "default_reduction")]
    pub reduction: BatchReduction,
    #[serde(default = "default_validate_every")]
    pub validate_every: usize,
    #[serde(default)]
    pub plateau_window: Option<usize>,
    #[serde(default)]
    pub plateau_threshold: Option<f64>,
    #[serde(default = "default_max_classes")]
    pub max_classes: usize,
}

fn default_reduction() -> BatchReduction {
    BatchReduction::Mean
}

fn default_validate_every() -> usize {
    1
}

fn default_max_classes() -> usize {
    DEFAULT_MAX_CLASSES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub ebn0_db: Vec<f64>,
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let s = StoppingRule::default();
        Self {
            ebn0_db: (0..=12).map(f64::from).collect(),
            min_errors: s.min_errors,
            max_bits: s.max_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemSection,
    pub architecture: ArchitectureSpec,
    /// Architecture used when `system.design = "su"`; falls back to
    /// `architecture` when absent.
    #[serde(default)]
    pub su_architecture: Option<ArchitectureSpec>,
    pub training: TrainingSection,
    pub loss: LossSpec,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    /// Directory that relative mapping paths resolve against. Not part of
    /// the file or the hash.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// Published settings: six users on four dense resources, QPSK-sized
    /// codebooks, sum-power normalization and the bit-weighted loss.
    pub fn published_dense() -> Self {
        let s = TrainingSchedule::published(-6.0);
        Self {
            seed: 1,
            system: SystemSection {
                design: Design::Mu,
                users: 6,
                resources: 4,
                order: 4,
                power: 1.0,
                pnl_level: PnlLevel::SumPower,
                mapping: "dense".into(),
            },
            architecture: ArchitectureSpec {
                encoder_width: 32,
                encoder_layers: 6,
                decoder_width: 512,
                decoder_layers: 4,
            },
            su_architecture: Some(ArchitectureSpec {
                encoder_width: 256,
                encoder_layers: 6,
                decoder_width: 512,
                decoder_layers: 4,
            }),
            training: TrainingSection {
                eta1: s.eta1,
                eta2: s.eta2,
                t1: s.t1,
                t2: s.t2,
                t3: s.t3,
                batch_size: s.batch_size,
                corruption_db: s.corruption_db,
                reduction: s.reduction,
                validate_every: s.validate_every,
                plateau_window: None,
                plateau_threshold: None,
                max_classes: DEFAULT_MAX_CLASSES,
            },
            loss: LossSpec::proposed(1.0, 0.05),
            evaluation: EvaluationSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::parse(line, "config", e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        // resolve the mapping now so a bad path is a config error
        cfg.system_config()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule().validate()?;
        self.loss.validate()?;
        if self.loss.kind == LossKind::L2 && self.loss.delta != 0.0 {
            return Err(Error::config("loss.delta must be 0 when loss.kind = \"l2\""));
        }
        for a in std::iter::once(&self.architecture).chain(&self.su_architecture) {
            if a.encoder_width == 0 || a.decoder_width == 0 {
                return Err(Error::config("architecture widths must be positive"));
            }
        }
        if self.evaluation.ebn0_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("evaluation.ebn0_db must be finite"));
        }
        if self.evaluation.max_bits == 0 {
            return Err(Error::config("evaluation.max_bits must be positive"));
        }
        match (self.training.plateau_window, self.training.plateau_threshold) {
            (Some(_), Some(_)) | (None, None) => Ok(()),
            _ => Err(Error::config(
                "training.plateau_window and training.plateau_threshold must be given together",
            )),
        }
    }

    pub fn mapping(&self) -> Result<MappingMatrix> {
        let s = &self.system;
        match s.mapping.as_str() {
            "dense" => Ok(MappingMatrix::dense(s.resources, s.users)),
            "sparse" => Ok(MappingMatrix::sparse_4x6()),
            path => {
                let full = self.base_dir.join(path);
                let text = fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let rows = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .enumerate()
                    .map(|(i, l)| {
                        l.split_whitespace()
                            .map(|t| {
                                t.parse::<u8>().map_err(|e| {
                                    Error::parse(i + 1, "mapping", format!("{t:?}: {e}"))
                                })
                            })
                            .collect::<Result<Vec<u8>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                MappingMatrix::from_rows(&rows)
            }
        }
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let mapping = self.mapping()?;
        let s = &self.system;
        if mapping.users() != s.users || mapping.resources() != s.resources {
            return Err(Error::config(format!(
                "mapping is {}x{} but system declares {} resources and {} users",
                mapping.resources(),
                mapping.users(),
                s.resources,
                s.users
            )));
        }
        SystemConfig::new(s.order, mapping, s.pnl_level, s.power)
    }

    pub fn schedule(&self) -> TrainingSchedule {
        let t = &self.training;
        TrainingSchedule {
            eta1: t.eta1,
            eta2: t.eta2,
            t1: t.t1,
            t2: t.t2,
            t3: t.t3,
            batch_size: t.batch_size,
            corruption_db: t.corruption_db,
            reduction: t.reduction,
            validate_every: t.validate_every,
            plateau: match (t.plateau_window, t.plateau_threshold) {
                (Some(window), Some(threshold)) => Some(PlateauRule { window, threshold }),
                _ => None,
            },
        }
    }

    pub fn stopping(&self) -> StoppingRule {
        StoppingRule {
            min_errors: self.evaluation.min_errors,
            max_bits: self.evaluation.max_bits,
        }
    }

    pub fn architecture_for(&self, design: Design) -> &ArchitectureSpec {
        match (design, &self.su_architecture) {
            (Design::Su, Some(a)) => a,
            _ => &self.architecture,
        }
    }

    /// Freshly initialized autoencoder for this experiment.
    pub fn build_autoencoder(&self) -> Result<Autoencoder> {
        let sys = self.system_config()?;
        let arch = self.architecture_for(self.system.design);
        match self.system.design {
            Design::Mu => Autoencoder::new_multi_user(&sys, arch, self.seed),
            Design::Su => Autoencoder::new_single_user(&sys, arch, self.seed),
        }
    }

    /// Builds and trains the autoencoder. `observer` sees every epoch.
    pub fn train(&self, observer: &mut dyn FnMut(&EpochRecord)) -> Result<(Autoencoder, TrainingReport)> {
        let mut ae = self.build_autoencoder()?;
        let report = run_two_step(
            &mut ae,
            &self.schedule(),
            &self.loss,
            self.seed,
            self.training.max_classes,
            observer,
        )?;
        Ok((ae, report))
    }

    /// Comment block identifying this experiment in output files.
    pub fn provenance(&self) -> String {
        format!("config_hash = {}\nseed = {}", self.hash(), self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_config_round_trips_and_validates() {
        let cfg = ExperimentConfig::published_dense();
        cfg.validate().unwrap();
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let sys = cfg.system_config().unwrap();
        assert_eq!(sys.num_labels(), 4096);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let cfg = ExperimentConfig::published_dense();
        let text = format!("# comment\n\n{}", cfg.to_toml());
        assert_eq!(ExperimentConfig::parse(&text).unwrap().hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = ExperimentConfig::published_dense()
            .to_toml()
            .replace("eta1 =", "eta_one =");
        match ExperimentConfig::parse(&text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert!(line > 0);
                assert!(message.contains("eta_one") || message.contains("eta1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ExperimentConfig::published_dense();
        cfg.training.eta2 = 0.01;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::published_dense();
        cfg.system.order = 3;
        assert!(cfg.system_config().is_err());
        let mut cfg = ExperimentConfig::published_dense();
        cfg.system.mapping = "sparse".into();
        cfg.system.users = 5;
        assert!(cfg.system_config().is_err());
        let text = ExperimentConfig::published_dense().to_toml().replace("pnl_level = 3", "pnl_level = 7");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn mapping_from_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("f.txt"), "# sparse\n0 1 1 0 0 1\n1 0 1 0 1 0\n1 0 0 1 0 1\n0 1 0 1 1 0\n").unwrap();
        let mut cfg = ExperimentConfig::published_dense();
        cfg.system.mapping = "f.txt".into();
        cfg.base_dir = dir.path().to_path_buf();
        assert_eq!(cfg.mapping().unwrap(), MappingMatrix::sparse_4x6());
    }
}
