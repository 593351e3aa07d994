//! Exhaustive minimum-distance detection and the neural decoder, behind one
//! batch interface.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::modem::{argmax, SuperposedConstellation};
use crate::nn::DenseNetwork;

/// A superposed constellation searched exhaustively. With equiprobable
/// points and white Gaussian noise the maximum a posteriori decision is the
/// nearest point, so `noise_power` is kept only as metadata.
#[derive(Debug, Clone)]
pub struct DetectionOracle<'a> {
    constellation: &'a SuperposedConstellation,
    noise_power: f64,
    points: Array2<f64>,
    half_norms: Array1<f64>,
}

impl<'a> DetectionOracle<'a> {
    pub fn new(constellation: &'a SuperposedConstellation, noise_power: f64) -> Self {
        let points = Array2::from_shape_vec(
            (constellation.len(), constellation.dim()),
            constellation.points().to_vec(),
        )
        .expect("constellation storage is row-major");
        let half_norms = points.map_axis(Axis(1), |p| 0.5 * p.dot(&p));
        Self {
            constellation,
            noise_power,
            points,
            half_norms,
        }
    }

    pub fn constellation(&self) -> &SuperposedConstellation {
        self.constellation
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Index of the nearest point for every row of `y`. Ties go to the lowest
    /// index.
    ///
    /// Minimizes `‖x‖²/2 − y·x`, which ranks points exactly like `‖y − x‖²`.
    pub fn detect_batch(&self, y: ArrayView2<f64>) -> Result<Vec<usize>> {
        check_dim("received vector", self.constellation.dim(), y.ncols())?;
        let scores = y.dot(&self.points.t());
        Ok(scores
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_v = f64::INFINITY;
                for (i, (&s, &h)) in row.iter().zip(self.half_norms.iter()).enumerate() {
                    let v = h - s;
                    if v < best_v {
                        best_v = v;
                        best = i;
                    }
                }
                best
            })
            .collect())
    }
}

/// Bit label of the constellation point nearest to `y`.
pub fn mld_detect(oracle: &DetectionOracle<'_>, y: &[f64]) -> Result<u64> {
    let view = ArrayView2::from_shape((1, y.len()), y).expect("single row");
    let idx = oracle.detect_batch(view)?[0];
    Ok(oracle.constellation.label(idx))
}

/// Receiver used by the Monte Carlo harness.
#[derive(Debug, Clone, Copy)]
pub enum Detector<'a> {
    /// Exhaustive minimum-distance search over the superposed points.
    Mld,
    /// Trained decoder: per-user argmax over its `M·J` outputs.
    Neural(&'a DenseNetwork),
}

impl Detector<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::Mld => "mld",
            Detector::Neural(_) => "nn",
        }
    }

    pub(crate) fn check(&self, constellation: &SuperposedConstellation) -> Result<()> {
        if let Detector::Neural(net) = self {
            check_dim("decoder input", constellation.dim(), net.input_dim())?;
            let want = constellation.order() * constellation.users();
            if net.output_dim() != want {
                return Err(Error::DimensionMismatch {
                    context: "decoder output",
                    expected: want,
                    found: net.output_dim(),
                });
            }
        }
        Ok(())
    }

    /// Decided constellation index for each row of `y`.
    pub(crate) fn decide(
        &self,
        constellation: &SuperposedConstellation,
        oracle: Option<&DetectionOracle<'_>>,
        y: ArrayView2<f64>,
    ) -> Result<Vec<usize>> {
        match self {
            Detector::Mld => oracle
                .expect("oracle is built for minimum-distance detection")
                .detect_batch(y),
            Detector::Neural(net) => {
                let m = constellation.order();
                let bps = m.trailing_zeros();
                let trace = net.forward_batch(y)?;
                Ok(trace
                    .output()
                    .rows()
                    .into_iter()
                    .map(|row| {
                        let row = row.as_slice().expect("contiguous");
                        row.chunks_exact(m)
                            .fold(0usize, |acc, scores| (acc << bps) | argmax(scores))
                    })
                    .collect())
            }
        }
    }
}
