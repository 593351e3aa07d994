//! Pairwise union bound on the bit error rate.

use super::q_function;
use crate::modem::SuperposedConstellation;

/// `(1 / (|X|·J·log2 M)) Σ_i Σ_{k≠i} d_H(b_i, b_k) · Q(‖x_i − x_k‖ / √(2σ²))`
///
/// Every ordered pair is counted, so each unordered pair contributes twice
/// and the outer average runs over equiprobable transmitted points.
pub fn union_bound_ber(constellation: &SuperposedConstellation, noise_power: f64) -> f64 {
    let n = constellation.len();
    let scale = 1.0 / (2.0 * noise_power).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let xi = constellation.point(i);
        let bi = constellation.label(i);
        for k in (i + 1)..n {
            let dh = (bi ^ constellation.label(k)).count_ones();
            if dh == 0 {
                continue;
            }
            let d2: f64 = xi
                .iter()
                .zip(constellation.point(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += 2.0 * dh as f64 * q_function(d2.sqrt() * scale);
        }
    }
    total / (n as f64 * constellation.bits_per_point() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antipodal_pair() {
        let a: f64 = 0.7;
        let c = SuperposedConstellation::from_points(1, 2, 1, vec![a, 0.0, -a, 0.0], vec![0, 1], a * a).unwrap();
        let s2: f64 = 0.3;
        let want = q_function(2.0 * a / (2.0 * s2).sqrt());
        assert!((union_bound_ber(&c, s2) - want).abs() < 1e-16);
    }

    #[test]
    fn infinite_noise_limit() {
        // Q(0) = 1/2 for every pair
        let pts = vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0];
        let c = SuperposedConstellation::from_points(1, 4, 1, pts, vec![0, 1, 3, 2], 1.0).unwrap();
        let mut sum_dh = 0u32;
        for i in 0..4u64 {
            for k in 0..4u64 {
                sum_dh += (c.label(i as usize) ^ c.label(k as usize)).count_ones();
            }
        }
        let want = sum_dh as f64 / (4.0 * 2.0) * 0.5;
        assert!((union_bound_ber(&c, 1e300) - want).abs() < 1e-12);
    }
}
