//! Monte Carlo bit error rate with a worker-count-invariant stopping rule.
//!
//! Each SNR point is simulated in fixed-size chunks. Chunk `c` of point `p`
//! draws its labels and noise from its own stream, so a chunk's error count
//! does not depend on which thread ran it. Chunks are merged in index order
//! and the stopping rule is checked after each one, so the reported counts
//! are identical for any number of workers.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::detect::{DetectionOracle, Detector};
use super::noise_power_for_ebn0;
use crate::error::{Error, Result};
use crate::modem::{add_awgn, SuperposedConstellation};
use crate::rng::{Domain, RngStream};

/// Transmissions simulated per chunk.
pub const MONTE_CARLO_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_errors: 200,
            max_bits: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Half-width of the 95% Wilson interval.
    pub ci95: f64,
}

impl BerPoint {
    pub fn from_counts(ebn0_db: f64, errors: u64, bits: u64) -> Self {
        let (lo, hi) = wilson_interval(errors, bits);
        Self {
            ebn0_db,
            bits,
            errors,
            ber: errors as f64 / bits as f64,
            ci95: 0.5 * (hi - lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    /// CSV with `ebn0_db,bits,errors,ber,ci95` columns. Each line of
    /// `provenance` becomes a leading `#` comment.
    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = String::new();
        for line in provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("ebn0_db,bits,errors,ber,ci95\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e}\n",
                p.ebn0_db, p.bits, p.errors, p.ber, p.ci95
            ));
        }
        out
    }

    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.ebn0_db, p.ber)).collect()
    }
}

/// 95% Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

fn simulate_chunk(
    constellation: &SuperposedConstellation,
    detector: &Detector<'_>,
    oracle: Option<&DetectionOracle<'_>>,
    noise_power: f64,
    seed: u64,
    point_idx: usize,
    chunk_idx: usize,
) -> Result<u64> {
    let mut rng = RngStream::for_domain(seed, Domain::MonteCarlo, point_idx as u64, chunk_idx as u64);
    let dim = constellation.dim();
    let mut sent = Vec::with_capacity(MONTE_CARLO_CHUNK);
    let mut y = Array2::<f64>::zeros((MONTE_CARLO_CHUNK, dim));
    for mut row in y.rows_mut() {
        let t = rng.random_range(0..constellation.len());
        sent.push(t);
        let row = row.as_slice_mut().expect("contiguous");
        row.copy_from_slice(constellation.point(t));
        add_awgn(row, noise_power, &mut rng);
    }
    let decided = detector.decide(constellation, oracle, y.view())?;
    Ok(sent
        .iter()
        .zip(&decided)
        .map(|(&t, &d)| (constellation.label(t) ^ constellation.label(d)).count_ones() as u64)
        .sum())
}

/// BER of `constellation` under `detector` at every Eb/N0 in `ebn0_grid`.
///
/// `workers` bounds the number of threads; the result does not depend on it.
pub fn monte_carlo_ber(
    constellation: &SuperposedConstellation,
    detector: Detector<'_>,
    ebn0_grid: &[f64],
    stopping: StoppingRule,
    seed: u64,
    workers: usize,
) -> Result<BerCurve> {
    detector.check(constellation)?;
    if stopping.max_bits == 0 {
        return Err(Error::config("max_bits must be positive"));
    }
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    let bits_per_chunk = (MONTE_CARLO_CHUNK * constellation.bits_per_point()) as u64;
    let eb = constellation.energy_per_bit();

    let mut curve = BerCurve::default();
    for (point_idx, &db) in ebn0_grid.iter().enumerate() {
        if !db.is_finite() {
            return Err(Error::config(format!("Eb/N0 value {db} is not finite")));
        }
        let noise_power = noise_power_for_ebn0(eb, db);
        let oracle = match detector {
            Detector::Mld => Some(DetectionOracle::new(constellation, noise_power)),
            Detector::Neural(_) => None,
        };
        let mut errors = 0u64;
        let mut bits = 0u64;
        let mut next_chunk = 0usize;
        'point: loop {
            let round: Vec<usize> = (next_chunk..next_chunk + workers).collect();
            next_chunk += workers;
            let counts: Vec<Result<u64>> = pool.install(|| {
                use rayon::prelude::*;
                round
                    .par_iter()
                    .map(|&c| {
                        simulate_chunk(constellation, &detector, oracle.as_ref(), noise_power, seed, point_idx, c)
                    })
                    .collect()
            });
            for count in counts {
                errors += count?;
                bits += bits_per_chunk;
                if errors >= stopping.min_errors || bits >= stopping.max_bits {
                    break 'point;
                }
            }
        }
        curve.points.push(BerPoint::from_counts(db, errors, bits));
    }
    Ok(curve)
}
