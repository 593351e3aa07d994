//! Command implementations behind the `noma-ae` binary.
//!
//! A trained model directory holds everything needed to evaluate it
//! without retraining:
//!
//! - `config.toml`: canonical copy of the experiment config
//! - `codebook.txt`: extracted codebooks (or the joint constellation)
//! - `decoder.net`, and `encoder.net` or `generator-<j>-<k>.net`
//! - `report.csv`: per-epoch losses and phases
//! - `manifest.txt`: one appended record per command run

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use noma_ae::codebook_io::CodebookFile;
use noma_ae::config::{sha256_hex, Design, ExperimentConfig};
use noma_ae::eval::{
    codebook_metrics, monte_carlo_ber, BerCurve, CodebookMetrics, Detector, StoppingRule,
    EBN0_CONVENTION,
};
use noma_ae::loss::LossSpec;
use noma_ae::modem::EncoderStack;
use noma_ae::train::Autoencoder;
use noma_ae::{DenseNetwork, Error, PnlLevel, Result};

/// Exit status for a failed command: 3 for numeric failures, 2 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        3
    } else {
        2
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

/// One command invocation, appended to `manifest.txt` in its output
/// directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub id: String,
    pub config: PathBuf,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub command: String,
}

impl ExperimentManifest {
    pub fn append(&self) -> Result<()> {
        let path = self.out_dir.join("manifest.txt");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        writeln!(
            f,
            "id = {} | command = {} | config = {} | seed = {} | out = {}",
            self.id,
            self.command,
            self.config.display(),
            self.seed,
            self.out_dir.display()
        )
        .map_err(io_err(&path))
    }
}

/// Saves a trained autoencoder and its codebook under `dir`.
pub fn save_model(ae: &Autoencoder, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let provenance = cfg.provenance();
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    write_file(&dir.join("decoder.net"), &ae.decoder.to_text())?;
    let codebook = match &ae.encoder {
        EncoderStack::MultiUser(enc) => {
            let k_total = enc.config().resources();
            for (idx, g) in enc.generators().iter().enumerate() {
                if let Some(net) = g {
                    let name = format!("generator-{}-{}.net", idx / k_total, idx % k_total);
                    write_file(&dir.join(name), &net.to_text())?;
                }
            }
            CodebookFile::from_encoder(enc)?
        }
        EncoderStack::SingleUser(enc) => {
            write_file(&dir.join("encoder.net"), &enc.network().to_text())?;
            CodebookFile::joint(enc.config().clone(), ae.constellation()?)?
        }
    };
    codebook.write(&dir.join("codebook.txt"), &provenance)
}

/// Trains the experiment in `config_path` and writes a model directory.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path, quiet: bool) -> Result<Autoencoder> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (ae, _) = train_config(&cfg, out, quiet)?;
    ExperimentManifest {
        id: cfg.short_hash(),
        config: config_path.to_path_buf(),
        seed: cfg.seed,
        out_dir: out.to_path_buf(),
        command: "train".into(),
    }
    .append()?;
    Ok(ae)
}

fn train_config(
    cfg: &ExperimentConfig,
    out: &Path,
    quiet: bool,
) -> Result<(Autoencoder, noma_ae::train::TrainingReport)> {
    let total = cfg.schedule().total_epochs();
    let every = (total / 20).max(1);
    let (ae, mut report) = cfg.train(&mut |r| {
        if !quiet && (r.epoch % every == 0 || r.epoch + 1 == total) {
            eprintln!(
                "epoch {:>6}  phase {:<2}  train {:.6}  val {}",
                r.epoch,
                r.phase,
                r.train_loss,
                r.val_loss.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
            );
        }
    })?;
    save_model(&ae, cfg, out)?;
    report.final_snapshot = Some(out.join("codebook.txt").display().to_string());
    write_file(&out.join("report.csv"), &report.to_csv(&cfg.provenance()))?;
    Ok((ae, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Nn,
    Mld,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Nn => "nn",
            DetectorKind::Mld => "mld",
        }
    }
}

/// What to evaluate: a bare codebook file or a trained model directory.
#[derive(Debug, Clone)]
pub enum EvalSource {
    Codebook(PathBuf),
    Model(PathBuf),
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub detector: DetectorKind,
    pub ebn0_db: Vec<f64>,
    pub stopping: StoppingRule,
    pub workers: usize,
    pub seed: u64,
}

fn config_hash_from_comments(text: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# config_hash = "))
        .map(str::to_string)
        .next()
}

/// Metrics for a codebook file's contents.
pub fn metrics_of(file: &CodebookFile) -> Result<CodebookMetrics> {
    let constellation = file.constellation()?;
    codebook_metrics(file.codebooks().unwrap_or(&[]), &constellation)
}

/// Simulates BER and writes `ber_<detector>.csv` and `metrics.txt` to `out`.
/// Never modifies the source.
pub fn cmd_evaluate(source: &EvalSource, opts: &EvalOptions, out: &Path) -> Result<BerCurve> {
    let (codebook_path, decoder_path) = match source {
        EvalSource::Codebook(p) => (p.clone(), None),
        EvalSource::Model(dir) => (dir.join("codebook.txt"), Some(dir.join("decoder.net"))),
    };
    let text = fs::read_to_string(&codebook_path).map_err(io_err(&codebook_path))?;
    let file = CodebookFile::parse(&text)?;
    let constellation = file.constellation()?;
    let decoder: Option<DenseNetwork> = match (opts.detector, &decoder_path) {
        (DetectorKind::Mld, _) => None,
        (DetectorKind::Nn, None) => {
            return Err(Error::InvalidConfig(
                "the nn detector needs a model directory (--model), not a bare codebook".into(),
            ))
        }
        (DetectorKind::Nn, Some(p)) => {
            let t = fs::read_to_string(p).map_err(io_err(p))?;
            Some(DenseNetwork::from_text(&t)?)
        }
    };
    let detector = match &decoder {
        Some(net) => Detector::Neural(net),
        None => Detector::Mld,
    };
    let curve = monte_carlo_ber(&constellation, detector, &opts.ebn0_db, opts.stopping, opts.seed, opts.workers)?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut provenance = String::new();
    if let Some(h) = config_hash_from_comments(&text) {
        provenance.push_str(&format!("config_hash = {h}\n"));
    }
    provenance.push_str(&format!(
        "codebook_sha256 = {}\nseed = {}\ndetector = {}\nmin_errors = {}\nmax_bits = {}\n{}",
        sha256_hex(text.as_bytes()),
        opts.seed,
        opts.detector.name(),
        opts.stopping.min_errors,
        opts.stopping.max_bits,
        EBN0_CONVENTION
    ));
    write_file(
        &out.join(format!("ber_{}.csv", opts.detector.name())),
        &curve.to_csv(&provenance),
    )?;
    write_file(&out.join("metrics.txt"), &metrics_of(&file)?.to_text(&provenance))?;
    Ok(curve)
}

/// Metrics of a codebook file as text.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file = CodebookFile::parse(&text)?;
    let m = metrics_of(&file)?;
    let mut provenance = format!("codebook_sha256 = {}", sha256_hex(text.as_bytes()));
    if let Some(h) = config_hash_from_comments(&text) {
        provenance = format!("config_hash = {h}\n{provenance}");
    }
    Ok(m.to_text(&provenance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Delta,
    Pnl,
    MuVsSu,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Delta => "delta",
            SweepKind::Pnl => "pnl",
            SweepKind::MuVsSu => "mu_vs_su",
        }
    }
}

/// Values of δ visited by the delta sweep. δ = 0 runs the plain loss.
pub const DELTA_GRID: [f64; 5] = [0.0, 0.01, 0.03, 0.05, 0.1];

/// The named experiment cells of a sweep, derived from `base`.
pub fn sweep_cells(kind: SweepKind, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    match kind {
        SweepKind::Delta => DELTA_GRID
            .iter()
            .map(|&d| {
                let mut c = base.clone();
                c.loss = if d == 0.0 {
                    LossSpec::l2()
                } else {
                    LossSpec::proposed(base.loss.mu, d)
                };
                (format!("delta-{d}"), c)
            })
            .collect(),
        SweepKind::Pnl => [PnlLevel::Element, PnlLevel::Codeword, PnlLevel::SumPower]
            .into_iter()
            .map(|level| {
                let mut c = base.clone();
                c.system.pnl_level = level;
                (format!("pnl-{level}"), c)
            })
            .collect(),
        SweepKind::MuVsSu => [Design::Mu, Design::Su]
            .into_iter()
            .map(|design| {
                let mut c = base.clone();
                c.system.design = design;
                let name = match design {
                    Design::Mu => "mu",
                    Design::Su => "su",
                };
                (name.to_string(), c)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub curves: Vec<(String, BerCurve)>,
    pub failures: Vec<(String, String)>,
}

/// Trains and evaluates every cell (MLD detection, grid and stopping rule
/// from the config), writing one model directory per cell and the
/// aggregated `sweep_<kind>.csv`. Failed cells are recorded in
/// `failures.csv`; the others still run.
pub fn cmd_sweep(
    kind: SweepKind,
    config_path: &Path,
    seed: Option<u64>,
    out: &Path,
    workers: usize,
    quiet: bool,
) -> Result<SweepOutcome> {
    let mut base = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        base.seed = s;
    }
    let cells = sweep_cells(kind, &base);
    for (_, c) in &cells {
        c.validate()?;
        c.system_config()?;
    }
    fs::create_dir_all(out).map_err(io_err(out))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<std::result::Result<BerCurve, String>>>> =
        Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((name, cfg)) = cells.get(i) else {
                    break;
                };
                let dir = out.join(name);
                let outcome = train_config(cfg, &dir, quiet).and_then(|(ae, _)| {
                    let c = ae.constellation()?;
                    monte_carlo_ber(&c, Detector::Mld, &cfg.evaluation.ebn0_db, cfg.stopping(), cfg.seed, 1)
                });
                if !quiet {
                    eprintln!("cell {name}: {}", if outcome.is_ok() { "done" } else { "failed" });
                }
                results.lock().expect("no worker panics while holding the lock")[i] =
                    Some(outcome.map_err(|e| e.to_string()));
            });
        }
    });

    let mut outcome = SweepOutcome::default();
    let mut csv = format!(
        "# config_hash = {}\n# seed = {}\n# sweep = {}\n# detector = mld\n# bits_per_resource = {}\n# {}\n",
        base.hash(),
        base.seed,
        kind.name(),
        base.system_config()?.bits_per_resource(),
        EBN0_CONVENTION
    );
    csv.push_str("cell,ebn0_db,bits,errors,ber,ci95\n");
    let results = results.into_inner().expect("workers have finished");
    for ((name, _), r) in cells.iter().zip(results) {
        match r.expect("every cell ran") {
            Ok(curve) => {
                for p in &curve.points {
                    csv.push_str(&format!(
                        "{name},{},{},{},{:.17e},{:.17e}\n",
                        p.ebn0_db, p.bits, p.errors, p.ber, p.ci95
                    ));
                }
                outcome.curves.push((name.clone(), curve));
            }
            Err(msg) => outcome.failures.push((name.clone(), msg)),
        }
    }
    write_file(&out.join(format!("sweep_{}.csv", kind.name())), &csv)?;
    let mut failures = String::from("cell,error\n");
    for (name, msg) in &outcome.failures {
        failures.push_str(&format!("{name},\"{}\"\n", msg.replace('"', "'")));
    }
    write_file(&out.join("failures.csv"), &failures)?;
    ExperimentManifest {
        id: base.short_hash(),
        config: config_path.to_path_buf(),
        seed: base.seed,
        out_dir: out.to_path_buf(),
        command: format!("sweep {}", kind.name()),
    }
    .append()?;
    Ok(outcome)
}
