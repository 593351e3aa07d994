//! Evaluation checked against independently coded references.

use noma_ae::eval::*;
use noma_ae::modem::{ArchitectureSpec, Codeword};
use noma_ae::train::Autoencoder;
use noma_ae::*;
use rand::Rng;

/// `P(Z > x)` by composite Simpson integration of the normal density.
fn q_simpson(x: f64) -> f64 {
    let upper = x + 40.0;
    let n = 20_000;
    let h = (upper - x) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(x) + pdf(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(x + i as f64 * h);
    }
    s * h / 3.0
}

fn brute_force_nearest(c: &SuperposedConstellation, y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..c.len() {
        let d: f64 = c.point(i).iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn random_codebooks(users: usize, resources: usize, order: usize, seed: u64) -> Vec<Codebook> {
    let mut rng = RngStream::new(seed, 99);
    (0..users)
        .map(|j| {
            let cws = (0..order)
                .map(|_| Codeword::from_packed((0..2 * resources).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            Codebook::natural(j, cws)
        })
        .collect()
}

#[test]
fn q_function_agrees_with_quadrature() {
    for x in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 4.27, 5.0] {
        let want = q_simpson(x);
        let got = q_function(x);
        assert!(((got - want) / want).abs() < 1e-9, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn qpsk_formula_agrees_with_quadrature() {
    for db in [0.0, 4.0, 6.8, 9.0, 9.6, 12.0] {
        let snr = 10f64.powf(db / 10.0);
        let want = q_simpson((2.0 * snr).sqrt());
        assert!(((qpsk_ber(db) - want) / want).abs() < 1e-9);
    }
    // 1e-3 near 6.8 dB and 3.4e-5 at 9.0 dB
    assert!((qpsk_ber(6.8) / 1e-3 - 1.0).abs() < 0.05);
    assert!((qpsk_ber(9.0) / 3.4e-5 - 1.0).abs() < 0.02);
    // Q(sqrt(2 * 10^0.96)) is about 9.8e-6
    assert!((qpsk_ber(9.6) / 9.8e-6 - 1.0).abs() < 0.05);
}

#[test]
fn mld_matches_exhaustive_search_on_random_outputs() {
    let cbs = random_codebooks(3, 2, 4, 7);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let oracle = DetectionOracle::new(&c, 0.1);
    let mut rng = RngStream::new(1, 2);
    for _ in 0..10_000 {
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let want = c.label(brute_force_nearest(&c, &y));
        assert_eq!(mld_detect(&oracle, &y).unwrap(), want);
    }
}

#[test]
fn negligible_noise_gives_zero_errors() {
    let cbs = random_codebooks(2, 2, 4, 3);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let m = codebook_metrics(&cbs, &c).unwrap();
    assert_eq!(m.distinct_points, 16);
    let stop = StoppingRule { min_errors: 1, max_bits: 100_000 };
    let curve = monte_carlo_ber(&c, Detector::Mld, &[60.0], stop, 5, 1).unwrap();
    assert_eq!(curve.points[0].errors, 0);
    assert!(curve.points[0].bits >= 100_000);
}

#[test]
fn bit_errors_follow_labels_not_indices() {
    // swapping labels of an antipodal pair must not change the error count
    let a = SuperposedConstellation::from_points(1, 2, 1, vec![1.0, 0.0, -1.0, 0.0], vec![0, 1], 1.0).unwrap();
    let b = SuperposedConstellation::from_points(1, 2, 1, vec![1.0, 0.0, -1.0, 0.0], vec![1, 0], 1.0).unwrap();
    let stop = StoppingRule { min_errors: 100, max_bits: 1_000_000 };
    let ca = monte_carlo_ber(&a, Detector::Mld, &[2.0], stop, 1, 1).unwrap();
    let cb = monte_carlo_ber(&b, Detector::Mld, &[2.0], stop, 1, 1).unwrap();
    assert_eq!(ca.points[0].errors, cb.points[0].errors);
}

#[test]
fn scaling_codewords_and_noise_together_changes_nothing() {
    let cbs = random_codebooks(3, 2, 4, 11);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let stop = StoppingRule { min_errors: 200, max_bits: 2_000_000 };
    let grid = [2.0, 6.0];
    let base = monte_carlo_ber(&c, Detector::Mld, &grid, stop, 8, 1).unwrap();
    let scaled = monte_carlo_ber(&c.scaled(2.0), Detector::Mld, &grid, stop, 8, 1).unwrap();
    for (p, q) in base.points.iter().zip(&scaled.points) {
        assert_eq!((p.errors, p.bits), (q.errors, q.bits));
    }
}

#[test]
fn curves_are_monotone_and_bounded() {
    let cbs = random_codebooks(3, 2, 4, 5);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let stop = StoppingRule { min_errors: 300, max_bits: 3_000_000 };
    let grid = [0.0, 3.0, 6.0, 9.0, 12.0];
    let curve = monte_carlo_ber(&c, Detector::Mld, &grid, stop, 2, 1).unwrap();
    for w in curve.points.windows(2) {
        assert!(w[1].ber <= w[0].ber + 2.0 * (w[0].ci95 + w[1].ci95));
    }
    for p in &curve.points {
        assert!((0.0..=1.0).contains(&p.ber) && p.bits > 0);
        let bound = union_bound_ber(&c, noise_power_for_ebn0(c.energy_per_bit(), p.ebn0_db));
        assert!(bound >= p.ber - 2.0 * p.ci95, "{} dB: bound {bound} < {}", p.ebn0_db, p.ber);
    }
}

#[test]
fn worker_count_does_not_change_counts() {
    let cbs = random_codebooks(3, 2, 4, 21);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let stop = StoppingRule { min_errors: 500, max_bits: 5_000_000 };
    let grid = [4.0, 8.0];
    let one = monte_carlo_ber(&c, Detector::Mld, &grid, stop, 13, 1).unwrap();
    for workers in [2, 3, 8] {
        assert_eq!(monte_carlo_ber(&c, Detector::Mld, &grid, stop, 13, workers).unwrap(), one);
    }
}

#[test]
fn mld_is_never_worse_than_an_untrained_decoder() {
    let cfg = SystemConfig::new(4, MappingMatrix::dense(2, 3), PnlLevel::SumPower, 1.0).unwrap();
    let arch = ArchitectureSpec {
        encoder_width: 8,
        encoder_layers: 2,
        decoder_width: 16,
        decoder_layers: 2,
    };
    let ae = Autoencoder::new_multi_user(&cfg, &arch, 3).unwrap();
    let c = ae.constellation().unwrap();
    let stop = StoppingRule { min_errors: 300, max_bits: 1_000_000 };
    let grid = [0.0, 6.0];
    let mld = monte_carlo_ber(&c, Detector::Mld, &grid, stop, 4, 1).unwrap();
    let nn = monte_carlo_ber(&c, Detector::Neural(&ae.decoder), &grid, stop, 4, 1).unwrap();
    for (m, n) in mld.points.iter().zip(&nn.points) {
        assert!(m.ber <= n.ber + 2.0 * (m.ci95 + n.ci95));
    }
}

#[test]
fn decoder_shape_mismatch_rejected() {
    let cbs = random_codebooks(2, 2, 4, 1);
    let c = SuperposedConstellation::from_codebooks(&cbs).unwrap();
    let spec = NetworkSpec::tanh_mlp(6, 8, 1, 8);
    let net = noma_ae::nn::init_network(&spec, &mut RngStream::new(1, 1)).unwrap();
    let stop = StoppingRule::default();
    assert!(monte_carlo_ber(&c, Detector::Neural(&net), &[0.0], stop, 1, 1).is_err());
}

#[test]
fn union_bound_of_qpsk_is_close_to_exact_at_high_snr() {
    let c = baseline_constellation(Baseline::Qpsk);
    for db in [8.0, 10.0, 12.0] {
        let ub = union_bound_ber(&c, noise_power_for_ebn0(c.energy_per_bit(), db));
        let exact = qpsk_ber(db);
        assert!(ub >= exact && ub < exact * 1.01, "{db}: {ub} vs {exact}");
    }
}
