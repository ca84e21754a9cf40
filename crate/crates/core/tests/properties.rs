use haucl::autodiff::Tape;
use haucl::checkpoint::{decode, encode};
use haucl::contrastive::contrastive_loss;
use haucl::data::{generate_synthetic, parse_dataset, to_json};
use haucl::metrics::ConfusionMatrix;
use haucl::vhgae::{binarize_with_repair, incidence_bce, kl_to_standard_normal, Latent};
use haucl::{build_initial_incidence, HauclModel, ModalityDims, RunConfig, SyntheticSpec, Tensor};
use proptest::prelude::*;
use std::path::Path;

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn initial_incidence_structure(n in 1usize..=50) {
        let g = build_initial_incidence(n).unwrap();
        prop_assert_eq!(g.num_edges(), n + 3);
        prop_assert_eq!(g.num_nodes(), 3 * n);
        prop_assert!(g.incidence().data().iter().all(|&v| v == 0.0 || v == 1.0));
        let (dv, de) = g.degrees();
        prop_assert!(dv.iter().all(|&d| d == 2.0));
        prop_assert!(de[..3].iter().all(|&d| d == n as f64));
        prop_assert!(de[3..].iter().all(|&d| d == 3.0));
    }

    #[test]
    fn kl_is_non_negative(mu in tensor(3, 4), raw in tensor(3, 4)) {
        let tape = Tape::new();
        let sigma = raw.map(|v| v.exp());
        let kl = kl_to_standard_normal(Latent {
            mu: tape.constant(mu),
            sigma: tape.constant(sigma),
        }).unwrap().item();
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn bce_is_non_negative_and_finite(p in prop::collection::vec(0.0..=1.0f64, 12), bits in prop::collection::vec(any::<bool>(), 12)) {
        let tape = Tape::new();
        let target = Tensor::new(vec![3, 4], bits.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let presence = tape.leaf(Tensor::new(vec![3, 4], p).unwrap());
        let bce = incidence_bce(presence, &target).unwrap();
        prop_assert!(bce.item() >= 0.0 && bce.item().is_finite());
        let g = tape.backward(bce).unwrap().wrt(presence).unwrap();
        prop_assert!(g.is_finite());
    }

    #[test]
    fn repair_leaves_no_empty_row(p in prop::collection::vec(0.0..1.0f64, 20)) {
        let hard = binarize_with_repair(&Tensor::new(vec![5, 4], p.clone()).unwrap());
        for i in 0..5 {
            prop_assert!(hard.row(i).contains(&1.0));
            for j in 0..4 {
                if p[i * 4 + j] >= 0.5 {
                    prop_assert_eq!(hard.at(i, j), 1.0);
                }
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions(x in tensor(4, 5)) {
        let tape = Tape::new();
        let s = tape.constant(x).softmax(1).unwrap().value();
        for i in 0..4 {
            let total: f64 = s.row(i).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.row(i).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn backward_is_idempotent(x in tensor(3, 3)) {
        let tape = Tape::new();
        let leaf = tape.leaf(x);
        let loss = leaf.matmul(leaf).unwrap().tanh().sum();
        let a = tape.backward(loss).unwrap().wrt(leaf).unwrap();
        let b = tape.backward(loss).unwrap().wrt(leaf).unwrap();
        prop_assert!(a.bit_eq(&b));
    }

    #[test]
    fn contrastive_loss_bounds_and_symmetry(v1 in tensor(4, 3), v2 in tensor(4, 3)) {
        let tape = Tape::new();
        let (a, b) = (tape.constant(v1), tape.constant(v2));
        let l12 = contrastive_loss(a, b, 0.5).unwrap().item();
        let l21 = contrastive_loss(b, a, 0.5).unwrap().item();
        prop_assert!(l12 > 0.0);
        prop_assert!((l12 - l21).abs() < 1e-12);
    }

    #[test]
    fn metrics_lie_in_unit_interval(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
        let (labels, preds): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = ConfusionMatrix::from_predictions(&preds, &labels, 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&cm.accuracy()));
        prop_assert!((0.0..=1.0).contains(&cm.weighted_f1()));
        let perfect = ConfusionMatrix::from_predictions(&labels, &labels, 4).unwrap();
        prop_assert_eq!(perfect.accuracy(), 1.0);
        prop_assert!((perfect.weighted_f1() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_text_round_trip(seed in any::<u64>(), lo in 1usize..4, extra in 0usize..3) {
        let data = generate_synthetic(&SyntheticSpec {
            num_dialogues: 3,
            len_range: (lo, lo + extra),
            dims: ModalityDims { t: 3, a: 2, v: 2 },
            seed,
            ..SyntheticSpec::default()
        }).unwrap();
        let back = parse_dataset(&to_json(&data), Path::new("mem")).unwrap();
        prop_assert_eq!(back, data);
    }
}

#[test]
fn model_checkpoint_round_trip_is_bit_exact() {
    let data = generate_synthetic(&SyntheticSpec { num_dialogues: 2, ..SyntheticSpec::default() }).unwrap();
    let model = HauclModel::new(RunConfig::tiny().model_config(&data), 3).unwrap();
    let back = decode(&encode(&model.params)).unwrap();
    assert!(back.bit_eq(&model.params));
    let mut fresh = HauclModel::new(RunConfig::tiny().model_config(&data), 4).unwrap();
    assert!(!fresh.params.bit_eq(&model.params));
    fresh.params.load_from(&back).unwrap();
    for dlg in &data.dialogues {
        assert!(fresh.embed(dlg).unwrap().bit_eq(&model.embed(dlg).unwrap()));
    }
}

#[test]
fn run_config_toml_round_trip() {
    for cfg in [RunConfig::default(), RunConfig::iemocap(), RunConfig::tiny()] {
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
}
