//! Single-user reference modulations.
//!
//! All three constellations have unit average energy and occupy one complex
//! resource.
//!
//! - QPSK: `(±1 ± i)/√2`, Gray labeled, bit 0 (MSB) from the real sign.
//! - Rectangular 8-QAM: the 4×2 grid `{±1, ±3} × {±1}` scaled by `1/√6`,
//!   Gray labeled along the real axis with the LSB from the imaginary sign.
//! - Non-rectangular 8-QAM: one point at the origin and seven on a ring of
//!   radius `√(8/7)`. The origin carries `000` and the ring carries the
//!   sequence `001, 011, 010, 110, 111, 101, 100` counter-clockwise from
//!   angle 0, so ring neighbours differ in one bit except across the seam.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{q_function, bounds::union_bound_ber, noise_power_for_ebn0};
use crate::error::{Error, Result};
use crate::modem::SuperposedConstellation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Qpsk,
    Qam8Rect,
    Qam8NonRect,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qpsk" => Ok(Baseline::Qpsk),
            "qam8_rect" => Ok(Baseline::Qam8Rect),
            "qam8_nonrect" => Ok(Baseline::Qam8NonRect),
            other => Err(Error::config(format!(
                "unknown baseline {other:?}; expected qpsk, qam8_rect or qam8_nonrect"
            ))),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Qpsk => "qpsk",
            Baseline::Qam8Rect => "qam8_rect",
            Baseline::Qam8NonRect => "qam8_nonrect",
        })
    }
}

/// Exact Gray-coded QPSK bit error rate, `Q(√(2·Eb/N0))`.
pub fn qpsk_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// The explicit constellation behind a baseline.
pub fn baseline_constellation(kind: Baseline) -> SuperposedConstellation {
    let (order, pts, labels): (usize, Vec<(f64, f64)>, Vec<u64>) = match kind {
        Baseline::Qpsk => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            (
                4,
                vec![(a, a), (a, -a), (-a, a), (-a, -a)],
                vec![0b00, 0b01, 0b10, 0b11],
            )
        }
        Baseline::Qam8Rect => {
            let s = 1.0 / 6f64.sqrt();
            let re = [-3.0, -1.0, 1.0, 3.0];
            let re_bits = [0b00u64, 0b01, 0b11, 0b10];
            let mut pts = Vec::new();
            let mut labels = Vec::new();
            for (x, xb) in re.iter().zip(re_bits) {
                for (y, yb) in [(1.0, 0u64), (-1.0, 1u64)] {
                    pts.push((x * s, y * s));
                    labels.push((xb << 1) | yb);
                }
            }
            (8, pts, labels)
        }
        Baseline::Qam8NonRect => {
            let r = (8.0f64 / 7.0).sqrt();
            let ring = [0b001u64, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
            let mut pts = vec![(0.0, 0.0)];
            let mut labels = vec![0b000];
            for (i, &b) in ring.iter().enumerate() {
                let a = 2.0 * PI * i as f64 / 7.0;
                pts.push((r * a.cos(), r * a.sin()));
                labels.push(b);
            }
            (8, pts, labels)
        }
    };
    let flat: Vec<f64> = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
    SuperposedConstellation::from_points(1, order, 1, flat, labels, 1.0)
        .expect("baseline constellations are well formed")
}

/// A noiseless, closed-form or bound-based BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCurve {
    pub kind: Baseline,
    pub points: Vec<(f64, f64)>,
}

impl AnalyticCurve {
    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = String::new();
        for line in provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("ebn0_db,ber\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y:.17e}\n"));
        }
        out
    }
}

/// QPSK uses the exact expression; the 8-QAM variants use the pairwise union
/// bound on their explicit constellations.
pub fn analytic_baseline(kind: Baseline, ebn0_grid: &[f64]) -> AnalyticCurve {
    let points = match kind {
        Baseline::Qpsk => ebn0_grid.iter().map(|&db| (db, qpsk_ber(db))).collect(),
        _ => {
            let c = baseline_constellation(kind);
            let eb = c.energy_per_bit();
            ebn0_grid
                .iter()
                .map(|&db| (db, union_bound_ber(&c, noise_power_for_ebn0(eb, db))))
                .collect()
        }
    };
    AnalyticCurve { kind, points }
}
