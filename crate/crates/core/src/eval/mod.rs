//! Codebook evaluation: Monte Carlo BER, exhaustive minimum-distance
//! detection, the pairwise union bound, analytic single-user baselines,
//! geometry metrics and the decoder/MED equivalence check.
//!
//! Eb/N0 convention used throughout: `Eb = Σ_j P^(j) / (J·log2 M)` (total
//! superposed energy per channel use over the bits it carries) and
//! `N0 = σ²`, the complex noise variance per resource.

mod baselines;
mod ber;
mod bounds;
mod detect;
mod metrics;
mod prop1;

pub use baselines::{analytic_baseline, baseline_constellation, qpsk_ber, AnalyticCurve, Baseline};
pub use ber::{
    monte_carlo_ber, wilson_interval, BerCurve, BerPoint, StoppingRule, MONTE_CARLO_CHUNK,
};
pub use bounds::union_bound_ber;
pub use detect::{mld_detect, DetectionOracle, Detector};
pub use metrics::{codebook_metrics, CodebookMetrics};
pub use prop1::{proposition1_check, Prop1Options, Prop1Report};

/// Textual form of the Eb/N0 convention, written into every BER file.
pub const EBN0_CONVENTION: &str = "Eb = sum_j P_j / (J log2 M); N0 = sigma^2 (complex noise variance per resource)";

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Complex noise variance `σ²` that puts a constellation with energy per bit
/// `eb` at `ebn0_db`.
pub fn noise_power_for_ebn0(eb: f64, ebn0_db: f64) -> f64 {
    eb / 10f64.powf(ebn0_db / 10.0)
}

/// Linear interpolation of the Eb/N0 at which a curve crosses `target`,
/// working on `log10(BER)`. Returns `None` when the target is not bracketed.
pub fn ebn0_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 <= 0.0 || y1 <= 0.0 {
            return None;
        }
        let (l0, l1) = (y0.log10(), y1.log10());
        if (l0 - lt) * (l1 - lt) <= 0.0 && l0 != l1 {
            Some(x0 + (lt - l0) * (x1 - x0) / (l1 - l0))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((q_function(3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
    }

    #[test]
    fn crossing_interpolation() {
        let pts = [(0.0, 1e-1), (2.0, 1e-3), (4.0, 1e-5)];
        assert!((ebn0_at_ber(&pts, 1e-2).unwrap() - 1.0).abs() < 1e-12);
        assert!((ebn0_at_ber(&pts, 1e-4).unwrap() - 3.0).abs() < 1e-12);
        assert!(ebn0_at_ber(&pts, 1e-7).is_none());
    }
}
