//! Randomized invariants of the network, modem and file formats.

use noma_ae::codebook_io::CodebookFile;
use noma_ae::modem::{apply_pnl, mu_encode};
use noma_ae::nn::init_network;
use noma_ae::*;
use proptest::prelude::*;

fn level(n: u8) -> PnlLevel {
    PnlLevel::try_from(n).unwrap()
}

fn table_from(values: &[f64], users: usize, order: usize, resources: usize) -> CodewordTable {
    let mut t = CodewordTable::zeros(users, order, resources);
    let w = 2 * resources;
    for j in 0..users {
        for m in 0..order {
            let at = (j * order + m) * w;
            t.get_mut(j, m).copy_from_slice(&values[at..at + w]);
        }
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn label_bits_round_trip(users in 1usize..5, log_order in 1u32..4, seed in any::<u64>()) {
        let order = 1usize << log_order;
        let cfg = SystemConfig::new(order, MappingMatrix::dense(2, users), PnlLevel::Codeword, 1.0).unwrap();
        let label = (seed % cfg.num_labels() as u64) as usize;
        let bits = cfg.label_to_bits(label);
        prop_assert_eq!(bits.len(), cfg.total_bits());
        prop_assert_eq!(cfg.bits_to_label(&bits).unwrap(), label);
        prop_assert_eq!(cfg.label_of(&cfg.symbols_of(label)), label);
    }

    #[test]
    fn pnl_contracts_hold_for_any_raw_table(
        values in prop::collection::vec(0.05f64..3.0, 3 * 4 * 4),
        signs in prop::collection::vec(any::<bool>(), 3 * 4 * 4),
        lvl in 1u8..4,
        power in 0.25f64..4.0,
    ) {
        let values: Vec<f64> = values.iter().zip(&signs).map(|(v, s)| if *s { *v } else { -v }).collect();
        let cfg = SystemConfig::new(4, MappingMatrix::dense(2, 3), level(lvl), power).unwrap();
        let out = apply_pnl(&table_from(&values, 3, 4, 2), &cfg).unwrap();
        match lvl {
            1 => for j in 0..3 { for m in 0..4 { for k in 0..2 {
                prop_assert!((out.codeword(j, m).element_power(k) - power / 2.0).abs() < 1e-9);
            }}},
            2 => for j in 0..3 { for m in 0..4 {
                prop_assert!((out.codeword(j, m).power() - power).abs() < 1e-9);
            }},
            _ => prop_assert!((out.user_powers().iter().sum::<f64>() - 3.0 * power).abs() < 1e-9),
        }
    }

    #[test]
    fn level3_scale_is_common_to_all_users(values in prop::collection::vec(-2.0f64..2.0, 4 * 2 * 2)) {
        prop_assume!(values.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let cfg = SystemConfig::new(2, MappingMatrix::dense(1, 4), PnlLevel::SumPower, 1.0).unwrap();
        let raw = table_from(&values, 4, 2, 1);
        let out = apply_pnl(&raw, &cfg).unwrap();
        let scale = (4.0 / raw.user_powers().iter().sum::<f64>()).sqrt();
        for (a, b) in raw.as_slice().iter().zip(out.as_slice()) {
            prop_assert!((a * scale - b).abs() < 1e-12);
        }
    }

    #[test]
    fn codebook_text_round_trip_is_exact(
        values in prop::collection::vec(-10.0f64..10.0, 2 * 4 * 4),
        perm in Just(vec![0u32, 1, 2, 3]).prop_shuffle(),
    ) {
        let cfg = SystemConfig::new(4, MappingMatrix::dense(2, 2), PnlLevel::SumPower, 1.0).unwrap();
        let cbs: Vec<Codebook> = (0..2).map(|j| Codebook {
            user: j,
            codewords: (0..4).map(|m| {
                let at = (j * 4 + m) * 4;
                Codeword::from_packed(values[at..at + 4].to_vec()).unwrap()
            }).collect(),
            labels: perm.clone(),
        }).collect();
        let file = CodebookFile::per_user(cfg, cbs).unwrap();
        let back = CodebookFile::parse(&file.to_text("seed = 1")).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.constellation().unwrap(), file.constellation().unwrap());
    }

    #[test]
    fn network_text_round_trip_is_exact(width in 1usize..20, layers in 1usize..4, seed in any::<u64>()) {
        let net = init_network(&NetworkSpec::tanh_mlp(3, width, layers, 2), &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(DenseNetwork::from_text(&net.to_text()).unwrap(), net);
    }

    #[test]
    fn changing_one_user_leaves_the_others_bit_identical(
        seed in any::<u64>(),
        a in prop::collection::vec(0usize..4, 4),
        user in 0usize..4,
        symbol in 0usize..4,
    ) {
        let cfg = SystemConfig::new(4, MappingMatrix::dense(2, 4), PnlLevel::Codeword, 1.0).unwrap();
        let enc = MuEncoder::new(&cfg, 8, 2, seed).unwrap();
        let mut b = a.clone();
        b[user] = symbol;
        let ca = mu_encode(&enc, &OneHotInput::from_symbols(4, a).unwrap()).unwrap();
        let cb = mu_encode(&enc, &OneHotInput::from_symbols(4, b).unwrap()).unwrap();
        for j in (0..4).filter(|&j| j != user) {
            prop_assert_eq!(ca[j].as_slice(), cb[j].as_slice());
        }
    }
}
