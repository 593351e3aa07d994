//! Dataset generation, the per-epoch training pass and the two-step
//! schedule.
//!
//! One epoch is one pass over all `M^J` classes in shuffled order. Every
//! presentation draws fresh channel noise from a stream indexed by
//! `(epoch, position)`, so results do not depend on how samples are grouped
//! for computation.
//!
//! The schedule runs three phases:
//!
//! | phase   | loss                 | learning rate | epochs |
//! |---------|----------------------|---------------|--------|
//! | Step 1-A| bit-weighted         | η₁            | T₁     |
//! | Step 1-B| bit-weighted         | η₂            | T₂     |
//! | Step 2  | mean per-user L2     | η₂            | T₃     |

use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{sample_loss, LossKind, LossSpec};
use crate::modem::{
    add_awgn, apply_pnl, common_scale_backward, new_decoder, pnl_backward, ArchitectureSpec,
    CodewordTable, EncoderStack, MuEncoder, SuEncoder, SuperposedConstellation, MIN_RAW_POWER,
};
use crate::nn::{DenseNetwork, GradientSet};
use crate::rng::{Domain, RngStream};
use crate::system::SystemConfig;

/// Upper bound on `M^J` for exhaustive datasets unless raised explicitly.
pub const DEFAULT_MAX_CLASSES: usize = 1 << 16;

/// How per-sample losses of a batch are combined before backpropagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchReduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauRule {
    /// Number of validated epochs to look back.
    pub window: usize,
    /// Relative validation-loss change below which the phase ends early.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub eta1: f64,
    pub eta2: f64,
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub batch_size: usize,
    /// `σ² / E[P^(j)]` in dB.
    pub corruption_db: f64,
    pub reduction: BatchReduction,
    /// Compute the validation loss every this many epochs (0 disables it).
    pub validate_every: usize,
    pub plateau: Option<PlateauRule>,
}

impl TrainingSchedule {
    /// Published hyperparameters: batch 400, η = (1e-3, 1e-4),
    /// T = (8000, 2000, 1000).
    pub fn published(corruption_db: f64) -> Self {
        Self {
            eta1: 0.001,
            eta2: 0.0001,
            t1: 8000,
            t2: 2000,
            t3: 1000,
            batch_size: 400,
            corruption_db,
            reduction: BatchReduction::Mean,
            validate_every: 1,
            plateau: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {eta}")));
            }
        }
        if self.eta2 >= self.eta1 {
            return Err(Error::config(format!(
                "eta2 ({}) must be smaller than eta1 ({})",
                self.eta2, self.eta1
            )));
        }
        if self.t1 == 0 {
            return Err(Error::config("t1 must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !self.corruption_db.is_finite() {
            return Err(Error::config("corruption_db must be finite"));
        }
        if let Some(p) = &self.plateau {
            if p.window == 0 || !(p.threshold > 0.0) {
                return Err(Error::config("plateau window and threshold must be positive"));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.t1 + self.t2 + self.t3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Step1A,
    Step1B,
    Step2,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Step1A => "1A",
            Phase::Step1B => "1B",
            Phase::Step2 => "2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Channel noise power used for this epoch.
    pub noise_power: f64,
    /// Mean user codebook power the noise power was derived from.
    pub mean_user_power: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub records: Vec<EpochRecord>,
    /// Epoch index at which each executed phase began.
    pub phase_starts: Vec<(Phase, usize)>,
    /// Free-form reference to the codebook written after training.
    pub final_snapshot: Option<String>,
}

impl TrainingReport {
    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = String::new();
        for line in provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("epoch,phase,train_loss,val_loss\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| format!("{v:.17e}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:.17e},{}\n", r.epoch, r.phase, r.train_loss, val));
        }
        out
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_loss)
    }
}

/// An encoder stack and its neural multi-user decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: EncoderStack,
    pub decoder: DenseNetwork,
}

impl Autoencoder {
    pub fn new_multi_user(config: &SystemConfig, arch: &ArchitectureSpec, seed: u64) -> Result<Self> {
        Ok(Self {
            encoder: EncoderStack::MultiUser(MuEncoder::new(
                config,
                arch.encoder_width,
                arch.encoder_layers,
                seed,
            )?),
            decoder: new_decoder(config, arch.decoder_width, arch.decoder_layers, seed)?,
        })
    }

    pub fn new_single_user(config: &SystemConfig, arch: &ArchitectureSpec, seed: u64) -> Result<Self> {
        Ok(Self {
            encoder: EncoderStack::SingleUser(SuEncoder::new(
                config,
                arch.encoder_width,
                arch.encoder_layers,
                seed,
            )?),
            decoder: new_decoder(config, arch.decoder_width, arch.decoder_layers, seed)?,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        self.encoder.config()
    }

    pub fn constellation(&self) -> Result<SuperposedConstellation> {
        self.encoder.constellation()
    }

    pub fn is_finite(&self) -> bool {
        let encoder = match &self.encoder {
            EncoderStack::MultiUser(e) => e.generators().iter().flatten().all(DenseNetwork::is_finite),
            EncoderStack::SingleUser(e) => e.network().is_finite(),
        };
        encoder && self.decoder.is_finite()
    }

    /// Mean per-user codebook power `E[P^(j)]` of the current encoder.
    pub fn mean_user_power(&self) -> Result<f64> {
        match &self.encoder {
            EncoderStack::MultiUser(e) => {
                let table = e.codeword_table()?;
                let powers = table.user_powers();
                Ok(powers.iter().sum::<f64>() / powers.len() as f64)
            }
            // outputs are normalized to J·P in total
            EncoderStack::SingleUser(e) => Ok(e.config().power()),
        }
    }
}

/// Every class label `0..M^J`, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<usize>,
}

impl Dataset {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn generate_dataset(config: &SystemConfig, max_classes: usize) -> Result<Dataset> {
    let n = config.num_labels();
    if n > max_classes {
        return Err(Error::config(format!(
            "M^J = {n} classes exceeds the cap of {max_classes}; \
             raise the cap or train on a subsample of labels"
        )));
    }
    Ok(Dataset {
        labels: (0..n).collect(),
    })
}

/// `σ²` such that `10·log10(σ² / mean_power) = corruption_db`.
pub fn noise_power_for(corruption_db: f64, mean_power: f64) -> f64 {
    mean_power * 10f64.powf(corruption_db / 10.0)
}

/// Per-epoch knobs for [`train_epoch`].
#[derive(Debug, Clone, Copy)]
pub struct EpochContext {
    pub seed: u64,
    pub epoch: usize,
    pub batch_size: usize,
    pub reduction: BatchReduction,
}

/// One shuffled pass over `dataset` with SGD updates after every batch.
/// Returns the mean per-sample training loss.
pub fn train_epoch(
    ae: &mut Autoencoder,
    dataset: &Dataset,
    loss: &LossSpec,
    learning_rate: f64,
    noise_power: f64,
    ctx: EpochContext,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::config("empty dataset"));
    }
    let mut order = dataset.labels.clone();
    let mut shuffle_rng = RngStream::for_domain(ctx.seed, Domain::Shuffle, ctx.epoch as u64, 0);
    order.shuffle(&mut shuffle_rng);

    let mut total = 0.0;
    for (batch_idx, batch) in order.chunks(ctx.batch_size).enumerate() {
        let offset = batch_idx * ctx.batch_size;
        let batch_loss = train_batch(ae, batch, offset, loss, learning_rate, noise_power, &ctx)?;
        total += batch_loss;
    }
    let mean = total / dataset.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("training loss at epoch {}", ctx.epoch)));
    }
    Ok(mean)
}

fn noisy_rows(
    rows: &mut Array2<f64>,
    noise_power: f64,
    seed: u64,
    domain: Domain,
    epoch: usize,
    offset: usize,
) {
    for (i, mut row) in rows.rows_mut().into_iter().enumerate() {
        let mut rng = RngStream::for_domain(seed, domain, epoch as u64, (offset + i) as u64);
        add_awgn(row.as_slice_mut().expect("rows are contiguous"), noise_power, &mut rng);
    }
}

/// Loss and `∂loss/∂r̂` for a batch of decoder outputs. The returned value
/// is the sum of per-sample losses; the gradient is already reduced.
fn batch_loss_and_grad(
    config: &SystemConfig,
    loss: &LossSpec,
    labels: &[usize],
    outputs: &Array2<f64>,
    reduction: BatchReduction,
) -> (f64, Array2<f64>) {
    let mut grad = Array2::<f64>::zeros(outputs.raw_dim());
    let mut total = 0.0;
    let mut symbols = vec![0usize; config.users()];
    for ((&label, out), mut g) in labels
        .iter()
        .zip(outputs.rows())
        .zip(grad.rows_mut())
    {
        for (j, s) in symbols.iter_mut().enumerate() {
            *s = config.symbol_of(label, j);
        }
        total += sample_loss(
            loss,
            config.order(),
            &symbols,
            out.as_slice().expect("contiguous"),
            g.as_slice_mut().expect("contiguous"),
        );
    }
    if reduction == BatchReduction::Mean {
        grad /= labels.len() as f64;
    }
    (total, grad)
}

fn train_batch(
    ae: &mut Autoencoder,
    labels: &[usize],
    offset: usize,
    loss: &LossSpec,
    learning_rate: f64,
    noise_power: f64,
    ctx: &EpochContext,
) -> Result<f64> {
    let config = ae.config().clone();
    let dim = 2 * config.resources();
    match &mut ae.encoder {
        EncoderStack::MultiUser(enc) => {
            let (raw, traces) = enc.raw_table_traced()?;
            let normalized = apply_pnl(&raw, &config)?;
            let mut y = Array2::<f64>::zeros((labels.len(), dim));
            for (&label, mut row) in labels.iter().zip(y.rows_mut()) {
                normalized.superpose_label(&config, label, row.as_slice_mut().unwrap());
            }
            noisy_rows(&mut y, noise_power, ctx.seed, Domain::TrainNoise, ctx.epoch, offset);

            let trace = ae.decoder.forward_batch(y.view())?;
            let (total, grad) =
                batch_loss_and_grad(&config, loss, labels, trace.output(), ctx.reduction);
            let (dec_grads, dy) = ae.decoder.backward_batch(&trace, grad.view())?;

            let mut d_norm = CodewordTable::zeros(config.users(), config.order(), config.resources());
            for (&label, row) in labels.iter().zip(dy.rows()) {
                for j in 0..config.users() {
                    let slot = d_norm.get_mut(j, config.symbol_of(label, j));
                    for (s, v) in slot.iter_mut().zip(row.iter()) {
                        *s += v;
                    }
                }
            }
            let d_raw = pnl_backward(&raw, &d_norm, &config)?;

            let k_total = config.resources();
            let mut updates: Vec<(usize, GradientSet)> = Vec::new();
            for (idx, (g, trace)) in enc.generators().iter().zip(&traces).enumerate() {
                let (Some(net), Some(trace)) = (g, trace) else {
                    continue;
                };
                let (j, k) = (idx / k_total, idx % k_total);
                let mut upstream = Array2::<f64>::zeros((config.order(), 2));
                for m in 0..config.order() {
                    let d = d_raw.get(j, m);
                    upstream[[m, 0]] = d[2 * k];
                    upstream[[m, 1]] = d[2 * k + 1];
                }
                let (grads, _) = net.backward_batch(trace, upstream.view())?;
                updates.push((idx, grads));
            }
            check_finite_update(&dec_grads, updates.iter().map(|(_, g)| g))?;
            ae.decoder.sgd_step(&dec_grads, learning_rate)?;
            let gens = enc.generators_mut();
            for (idx, grads) in &updates {
                gens[*idx]
                    .as_mut()
                    .expect("gradient only for present generators")
                    .sgd_step(grads, learning_rate)?;
            }
            Ok(total)
        }
        EncoderStack::SingleUser(enc) => {
            let m = config.order();
            let mut inputs = Array2::<f64>::zeros((labels.len(), m * config.users()));
            for (&label, mut row) in labels.iter().zip(inputs.rows_mut()) {
                for j in 0..config.users() {
                    row[j * m + config.symbol_of(label, j)] = 1.0;
                }
            }
            let enc_trace = enc.network().forward_batch(inputs.view())?;
            let z = enc_trace.output();
            let mean_power = z.iter().map(|v| v * v).sum::<f64>() / labels.len() as f64;
            if !(mean_power >= MIN_RAW_POWER) {
                return Err(Error::DegeneratePower(format!("batch output power {mean_power:e}")));
            }
            let scale = (config.users() as f64 * config.power() / mean_power).sqrt();
            let mut y = z * scale;
            noisy_rows(&mut y, noise_power, ctx.seed, Domain::TrainNoise, ctx.epoch, offset);

            let trace = ae.decoder.forward_batch(y.view())?;
            let (total, grad) =
                batch_loss_and_grad(&config, loss, labels, trace.output(), ctx.reduction);
            let (dec_grads, dy) = ae.decoder.backward_batch(&trace, grad.view())?;

            let mut dz = Array2::<f64>::zeros(z.raw_dim());
            common_scale_backward(
                z.as_slice().unwrap(),
                dy.as_slice().unwrap(),
                scale,
                dz.as_slice_mut().unwrap(),
            );
            let (enc_grads, _) = enc.network().backward_batch(&enc_trace, dz.view())?;
            check_finite_update(&dec_grads, std::iter::once(&enc_grads))?;
            ae.decoder.sgd_step(&dec_grads, learning_rate)?;
            enc.network_mut().sgd_step(&enc_grads, learning_rate)?;
            Ok(total)
        }
    }
}

fn check_finite_update<'a>(
    decoder: &GradientSet,
    encoders: impl Iterator<Item = &'a GradientSet>,
) -> Result<()> {
    if !decoder.is_finite() {
        return Err(Error::NonFinite("decoder gradient".into()));
    }
    for g in encoders {
        if !g.is_finite() {
            return Err(Error::NonFinite("encoder gradient".into()));
        }
    }
    Ok(())
}

/// Mean per-sample loss over every class with an independent noise stream
/// and no parameter updates.
pub fn validation_loss(
    ae: &Autoencoder,
    dataset: &Dataset,
    loss: &LossSpec,
    noise_power: f64,
    seed: u64,
    epoch: usize,
    chunk: usize,
) -> Result<f64> {
    let config = ae.config();
    let constellation = ae.constellation()?;
    let mut total = 0.0;
    for (ci, labels) in dataset.labels.chunks(chunk.max(1)).enumerate() {
        let mut y = Array2::<f64>::zeros((labels.len(), constellation.dim()));
        for (&label, mut row) in labels.iter().zip(y.rows_mut()) {
            row.as_slice_mut()
                .unwrap()
                .copy_from_slice(constellation.point(label));
        }
        noisy_rows(&mut y, noise_power, seed, Domain::ValidationNoise, epoch, ci * chunk);
        let out = ae.decoder.forward_batch(y.view())?;
        let (sum, _) = batch_loss_and_grad(config, loss, labels, out.output(), BatchReduction::Sum);
        total += sum;
    }
    Ok(total / dataset.len() as f64)
}

/// Runs the full schedule. With `loss.kind == L2` every phase uses the
/// plain loss (ablation). `observer` sees every epoch record as it is
/// produced.
pub fn run_two_step(
    ae: &mut Autoencoder,
    schedule: &TrainingSchedule,
    loss: &LossSpec,
    seed: u64,
    max_classes: usize,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainingReport> {
    schedule.validate()?;
    loss.validate()?;
    let dataset = generate_dataset(ae.config(), max_classes)?;
    let step2_loss = LossSpec::l2();
    let step1_loss = match loss.kind {
        LossKind::Proposed => *loss,
        LossKind::L2 => step2_loss,
    };
    let phases = [
        (Phase::Step1A, schedule.t1, schedule.eta1, step1_loss),
        (Phase::Step1B, schedule.t2, schedule.eta2, step1_loss),
        (Phase::Step2, schedule.t3, schedule.eta2, step2_loss),
    ];

    let mut report = TrainingReport::default();
    let mut epoch = 0usize;
    for (phase, budget, eta, phase_loss) in phases {
        if budget == 0 {
            continue;
        }
        report.phase_starts.push((phase, epoch));
        let mut val_history: Vec<f64> = Vec::new();
        for _ in 0..budget {
            let mean_power = ae.mean_user_power()?;
            let noise_power = noise_power_for(schedule.corruption_db, mean_power);
            let ctx = EpochContext {
                seed,
                epoch,
                batch_size: schedule.batch_size,
                reduction: schedule.reduction,
            };
            let train_loss = train_epoch(ae, &dataset, &phase_loss, eta, noise_power, ctx)?;
            if !ae.is_finite() {
                return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
            }
            let val_loss = if schedule.validate_every > 0 && (epoch + 1).is_multiple_of(schedule.validate_every) {
                Some(validation_loss(
                    ae,
                    &dataset,
                    &phase_loss,
                    noise_power,
                    seed,
                    epoch,
                    schedule.batch_size,
                )?)
            } else {
                None
            };
            let record = EpochRecord {
                epoch,
                phase,
                train_loss,
                val_loss,
                noise_power,
                mean_user_power: mean_power,
            };
            observer(&record);
            report.records.push(record);
            epoch += 1;

            if let (Some(rule), Some(v)) = (schedule.plateau, val_loss) {
                val_history.push(v);
                if val_history.len() > rule.window {
                    let past = val_history[val_history.len() - 1 - rule.window];
                    if past > 0.0 && ((past - v) / past).abs() < rule.threshold {
                        break;
                    }
                }
            }
        }
    }
    Ok(report)
}
