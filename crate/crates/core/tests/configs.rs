//! The configuration files shipped in `configs/` load and mean what their
//! names say.

use std::path::PathBuf;

use noma_ae::config::{Design, ExperimentConfig};
use noma_ae::loss::LossKind;
use noma_ae::train::TrainingSchedule;
use noma_ae::*;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn published_file_matches_published_constructor() {
    let mut from_file = load("published_dense.toml");
    from_file.base_dir = Default::default();
    assert_eq!(from_file, ExperimentConfig::published_dense());
    let s = from_file.schedule();
    let p = TrainingSchedule::published(-6.0);
    assert_eq!((s.eta1, s.eta2, s.t1, s.t2, s.t3, s.batch_size), (p.eta1, p.eta2, p.t1, p.t2, p.t3, p.batch_size));
}

#[test]
fn desk_files_differ_only_where_intended() {
    let dense = load("desk_dense.toml");
    let sparse = load("desk_sparse.toml");
    assert_eq!(dense.system.design, Design::Mu);
    assert_eq!(dense.system.pnl_level, PnlLevel::SumPower);
    assert_eq!(sparse.system.pnl_level, PnlLevel::Element);
    assert!(dense.system_config().unwrap().mapping().is_dense());
    assert_eq!(sparse.system_config().unwrap().mapping(), &MappingMatrix::sparse_4x6());
    assert_eq!(sparse.training.corruption_db, dense.training.corruption_db - 2.0);
    assert_eq!(dense.loss.kind, LossKind::Proposed);
    assert_eq!(dense.architecture, sparse.architecture);
    assert_eq!(dense.schedule().total_epochs(), 2750);
}

#[test]
fn mapping_file_spells_out_the_sparse_pattern() {
    let mut cfg = load("desk_sparse.toml");
    cfg.system.mapping = "sparse_mapping.txt".into();
    let m = cfg.system_config().unwrap();
    assert_eq!(m.mapping(), &MappingMatrix::sparse_4x6());
    for k in 0..4 {
        assert_eq!(m.mapping().row_weight(k), 3);
    }
}
