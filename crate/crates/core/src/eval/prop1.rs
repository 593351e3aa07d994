//! Checks that an autoencoder trained with the plain reconstruction loss
//! decides like the minimum-distance detector on its own constellation.

use ndarray::Array2;
use rand::Rng;

use super::detect::{DetectionOracle, Detector};
use crate::error::Result;
use crate::loss::LossSpec;
use crate::modem::{add_awgn, ArchitectureSpec};
use crate::rng::{Domain, RngStream};
use crate::system::{MappingMatrix, PnlLevel, SystemConfig};
use crate::train::{noise_power_for, run_two_step, Autoencoder, BatchReduction, TrainingSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Options {
    pub seed: u64,
    pub order: usize,
    pub epochs: usize,
    /// Further epochs at a tenth of the learning rate.
    pub refine_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub corruption_db: f64,
    pub width: usize,
    pub layers: usize,
    /// Noisy samples used to measure decision agreement.
    pub samples: usize,
}

impl Default for Prop1Options {
    fn default() -> Self {
        Self {
            seed: 1,
            order: 4,
            epochs: 10_000,
            refine_epochs: 5_000,
            learning_rate: 0.01,
            batch_size: 1,
            corruption_db: -10.0,
            width: 16,
            layers: 2,
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    /// Fraction of noisy samples on which decoder and detector agree.
    pub agreement: f64,
    /// The same measurement for the untrained autoencoder.
    pub untrained_agreement: f64,
    /// `max ‖r − r̂‖₂` over the noiseless constellation points.
    pub max_residual: f64,
    pub noise_power: f64,
    /// Set when training failed; the other fields then describe the
    /// untrained model.
    pub failure: Option<String>,
}

fn measure(ae: &Autoencoder, noise_power: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let constellation = ae.constellation()?;
    let oracle = DetectionOracle::new(&constellation, noise_power);

    let mut residual: f64 = 0.0;
    for m in 0..constellation.len() {
        let out = ae.decoder.forward(constellation.point(m))?;
        let r: f64 = out
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - (i == m) as u8 as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }

    let mut rng = RngStream::for_domain(seed, Domain::Probe, 0, 0);
    let mut y = Array2::<f64>::zeros((samples, constellation.dim()));
    for mut row in y.rows_mut() {
        let t = rng.random_range(0..constellation.len());
        let row = row.as_slice_mut().expect("contiguous");
        row.copy_from_slice(constellation.point(t));
        add_awgn(row, noise_power, &mut rng);
    }
    let nn = Detector::Neural(&ae.decoder).decide(&constellation, None, y.view())?;
    let med = Detector::Mld.decide(&constellation, Some(&oracle), y.view())?;
    let agree = nn.iter().zip(&med).filter(|(a, b)| a == b).count();
    Ok((agree as f64 / samples.max(1) as f64, residual))
}

/// Trains a single-user, single-resource autoencoder with the plain loss
/// and compares its decoder with minimum-distance detection at the training
/// noise level. Training failures are reported, not raised.
pub fn proposition1_check(opts: &Prop1Options) -> Result<Prop1Report> {
    let config = SystemConfig::new(opts.order, MappingMatrix::dense(1, 1), PnlLevel::Codeword, 1.0)?;
    let arch = ArchitectureSpec {
        encoder_width: opts.width,
        encoder_layers: opts.layers,
        decoder_width: opts.width,
        decoder_layers: opts.layers,
    };
    let mut ae = Autoencoder::new_multi_user(&config, &arch, opts.seed)?;
    let noise_power = noise_power_for(opts.corruption_db, config.power());
    let (untrained_agreement, _) = measure(&ae, noise_power, opts.samples, opts.seed)?;

    let schedule = TrainingSchedule {
        eta1: opts.learning_rate,
        eta2: opts.learning_rate / 10.0,
        t1: opts.epochs,
        t2: opts.refine_epochs,
        t3: 0,
        batch_size: opts.batch_size,
        corruption_db: opts.corruption_db,
        reduction: BatchReduction::Mean,
        validate_every: 0,
        plateau: None,
    };
    let failure = match run_two_step(&mut ae, &schedule, &LossSpec::l2(), opts.seed, usize::MAX, &mut |_| {}) {
        Ok(_) => None,
        Err(e) => {
            ae = Autoencoder::new_multi_user(&config, &arch, opts.seed)?;
            Some(e.to_string())
        }
    };
    let (agreement, max_residual) = measure(&ae, noise_power, opts.samples, opts.seed)?;
    Ok(Prop1Report {
        agreement,
        untrained_agreement,
        max_residual,
        noise_power,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_check_reports_all_fields() {
        let opts = Prop1Options {
            epochs: 200,
            refine_epochs: 0,
            samples: 20_000,
            ..Prop1Options::default()
        };
        let r = proposition1_check(&opts).unwrap();
        assert!(r.failure.is_none());
        assert!((0.0..=1.0).contains(&r.agreement));
        assert!(r.untrained_agreement < 0.6);
    }
}
