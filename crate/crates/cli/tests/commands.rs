use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use noma_ae::codebook_io::CodebookFile;
use noma_ae::config::ExperimentConfig;
use noma_ae::eval::StoppingRule;
use noma_ae::loss::LossSpec;
use noma_ae::modem::{ArchitectureSpec, Codeword};
use noma_ae::{Codebook, MappingMatrix, PnlLevel, SystemConfig};
use noma_ae_cli::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noma-ae"))
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::published_dense();
    cfg.system.users = 2;
    cfg.system.resources = 2;
    cfg.system.order = 2;
    cfg.architecture = ArchitectureSpec {
        encoder_width: 8,
        encoder_layers: 2,
        decoder_width: 16,
        decoder_layers: 2,
    };
    cfg.su_architecture = None;
    cfg.training.t1 = 200;
    cfg.training.t2 = 50;
    cfg.training.t3 = 50;
    cfg.training.batch_size = 4;
    cfg.evaluation.ebn0_db = vec![0.0, 4.0];
    cfg.evaluation.min_errors = 50;
    cfg.evaluation.max_bits = 100_000;
    let path = dir.join("tiny.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn tiny_training_is_fast_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let start = Instant::now();
    let status = bin()
        .args(["train", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("a"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(start.elapsed().as_secs() < 60);
    let status = bin()
        .args(["train", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("b"))
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read(dir.path().join("a/codebook.txt")).unwrap();
    let b = fs::read(dir.path().join("b/codebook.txt")).unwrap();
    assert_eq!(a, b);
    let report = fs::read_to_string(dir.path().join("a/report.csv")).unwrap();
    assert!(report.starts_with("# config_hash = "));
    assert!(report.contains("epoch,phase,train_loss,val_loss\n"));
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 301);
    for f in ["decoder.net", "config.toml", "manifest.txt", "generator-0-0.net", "generator-1-1.net"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn different_seed_changes_the_codebook() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    for (seed, out) in [("1", "s1"), ("2", "s2")] {
        let st = bin()
            .args(["train", "--quiet", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(st.success());
    }
    let a = fs::read_to_string(dir.path().join("s1/codebook.txt")).unwrap();
    let b = fs::read_to_string(dir.path().join("s2/codebook.txt")).unwrap();
    assert_ne!(a, b);
    assert!(a.contains("# seed = 1") && b.contains("# seed = 2"));
}

#[test]
fn evaluate_both_detectors_on_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let model = dir.path().join("m");
    cmd_train(&cfg, None, &model, true).unwrap();
    let before = fs::read(model.join("codebook.txt")).unwrap();
    for det in ["mld", "nn"] {
        let out = bin()
            .args(["evaluate", "--detector", det, "--ebn0", "0,6", "--max-bits", "40000", "--model"])
            .arg(&model)
            .arg("--out")
            .arg(dir.path().join("eval"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(dir.path().join(format!("eval/ber_{det}.csv"))).unwrap();
        let header: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).take(1).collect();
        assert_eq!(header, vec!["ebn0_db,bits,errors,ber,ci95"]);
        assert!(csv.contains("# config_hash = ") && csv.contains("# seed = 1"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }
    assert!(dir.path().join("eval/metrics.txt").exists());
    assert_eq!(fs::read(model.join("codebook.txt")).unwrap(), before);
}

#[test]
fn evaluate_is_repeatable_and_worker_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let model = dir.path().join("m");
    cmd_train(&cfg, None, &model, true).unwrap();
    let run = |workers: usize, out: &str| {
        let opts = EvalOptions {
            detector: DetectorKind::Mld,
            ebn0_db: vec![0.0, 3.0],
            stopping: StoppingRule {
                min_errors: 100,
                max_bits: 200_000,
            },
            workers,
            seed: 4,
        };
        cmd_evaluate(&EvalSource::Model(model.clone()), &opts, &dir.path().join(out)).unwrap();
        fs::read_to_string(dir.path().join(out).join("ber_mld.csv")).unwrap()
    };
    let one = run(1, "w1");
    assert_eq!(one, run(3, "w3"));
    assert_eq!(one, run(1, "again"));
}

fn conventional_codebook(path: &Path) {
    // two users, one resource each, QPSK
    let cfg = SystemConfig::new(
        4,
        MappingMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap(),
        PnlLevel::Codeword,
        1.0,
    )
    .unwrap();
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let cbs = (0..2)
        .map(|j| {
            let cws = [(a, a), (a, -a), (-a, a), (-a, -a)]
                .iter()
                .map(|&(x, y)| {
                    let mut v = vec![0.0; 4];
                    v[2 * j] = x;
                    v[2 * j + 1] = y;
                    Codeword::from_packed(v).unwrap()
                })
                .collect();
            Codebook::natural(j, cws)
        })
        .collect();
    CodebookFile::per_user(cfg, cbs).unwrap().write(path, "imported").unwrap();
}

#[test]
fn imported_codebook_evaluates_and_inspects() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("qpsk.txt");
    conventional_codebook(&cb);
    let out = bin()
        .args(["evaluate", "--detector", "mld", "--ebn0", "4", "--codebook"])
        .arg(&cb)
        .arg("--out")
        .arg(dir.path().join("e"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin().arg("inspect").arg(&cb).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("distinct_points = 16"));
    assert!(text.contains("users_per_resource = 1 1"));
}

#[test]
fn nn_detector_needs_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("qpsk.txt");
    conventional_codebook(&cb);
    let out = bin()
        .args(["evaluate", "--detector", "nn", "--codebook"])
        .arg(&cb)
        .arg("--out")
        .arg(dir.path().join("e"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_codebook_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cb = dir.path().join("qpsk.txt");
    conventional_codebook(&cb);
    let text = fs::read_to_string(&cb).unwrap().replacen("codeword 2 = ", "codeword 2 = zz ", 1);
    fs::write(&cb, text).unwrap();
    let out = bin().arg("inspect").arg(&cb).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line") && err.contains("codeword 2"), "{err}");
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap().replace("batch_size = 4", "batch_sise = 4");
    fs::write(&cfg, text).unwrap();
    let out = bin()
        .args(["train", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_sise"));
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("eta1 = 0.001", "eta1 = 1e300")
        .replace("eta2 = 0.0001", "eta2 = 1e299");
    fs::write(&cfg, text).unwrap();
    let out = bin()
        .args(["train", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_cells_cover_the_grids() {
    let base = ExperimentConfig::published_dense();
    let delta = sweep_cells(SweepKind::Delta, &base);
    assert!(delta.iter().any(|(_, c)| c.loss == LossSpec::l2()));
    assert!(delta.iter().any(|(_, c)| c.loss == LossSpec::proposed(1.0, 0.05)));
    let pnl = sweep_cells(SweepKind::Pnl, &base);
    assert_eq!(pnl.len(), 3);
    assert!(pnl.iter().all(|(_, c)| c.seed == base.seed && c.schedule() == base.schedule()));
    let pair = sweep_cells(SweepKind::MuVsSu, &base);
    let rates: Vec<f64> = pair
        .iter()
        .map(|(_, c)| c.system_config().unwrap().bits_per_resource())
        .collect();
    assert_eq!(rates, vec![3.0, 3.0]);
}

#[test]
fn pnl_sweep_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = bin()
        .args(["sweep", "--kind", "pnl", "--quiet", "--workers", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("sw"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sw/sweep_pnl.csv")).unwrap();
    assert!(csv.contains("cell,ebn0_db,bits,errors,ber,ci95\n"));
    for cell in ["pnl-1", "pnl-2", "pnl-3"] {
        assert_eq!(csv.lines().filter(|l| l.starts_with(cell)).count(), 2, "{cell}");
    }
}
