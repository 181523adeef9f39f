use condflow::datagen::{interpolate, pad_noise, Dataset, DatasetMeta, Sample};
use condflow::flow::{FlowConfig, FlowModel, Mixing, PriorConfig};
use condflow::math::{logsumexp, softmax};
use condflow::oracle::{kl_p_q, kl_q_p, sample_annulus, AnnulusSpec, CounterexampleParams};
use condflow::rng::seeded;
use condflow::training::{order_statistic_threshold, required_logit_gap, score};
use proptest::prelude::*;

fn small_model(seed: u64, mixing: Mixing, classes: usize) -> FlowModel {
    let cfg = FlowConfig {
        dim: 3,
        classes,
        blocks: 2,
        hidden: vec![6],
        mixing,
        prior: PriorConfig::Gmm { radius: 1.0 },
        seed,
        ..FlowConfig::default()
    };
    FlowModel::random(&cfg, 0.7).unwrap()
}

fn mixing() -> impl Strategy<Value = Mixing> {
    prop_oneof![Just(Mixing::Lu), Just(Mixing::Permutation), Just(Mixing::None)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_round_trip(seed in 0u64..1000, m in mixing(), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let model = small_model(seed, m, 2);
        let z = model.forward(&x).unwrap().z;
        let back = model.inverse(&z).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn posterior_is_a_distribution_consistent_with_the_marginal(
        seed in 0u64..1000, classes in 2usize..5, x in prop::collection::vec(-3.0f64..3.0, 3)
    ) {
        let model = small_model(seed, Mixing::Lu, classes);
        let sc = score(&model, &x).unwrap();
        let total: f64 = sc.posterior.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let joint: Vec<f64> = sc.class_ll.iter().zip(model.log_class_probs()).map(|(a, b)| a + b).collect();
        prop_assert!((logsumexp(&joint) - sc.log_marginal).abs() < 1e-12);
        for (c, p) in sc.posterior.iter().enumerate() {
            prop_assert!((p.ln() - (joint[c] - sc.log_marginal)).abs() < 1e-9 || *p < 1e-300);
        }
    }

    #[test]
    fn logit_gap_guarantees_confidence(classes in 2usize..50, log_delta in -12.0f64..-0.5) {
        let delta = 10f64.powf(log_delta);
        let gap = required_logit_gap(classes, delta, std::f64::consts::E).unwrap();
        // Worst case: every other class exactly `gap` below the top one.
        let mut logits = vec![-gap; classes];
        logits[0] = 0.0;
        let p = softmax(&logits)[0];
        prop_assert!(p >= (1.0 - delta) * (1.0 - 1e-12), "p {} delta {}", p, delta);
    }

    #[test]
    fn threshold_flags_at_most_the_tail(values in prop::collection::vec(-50.0f64..50.0, 1..200), q in 0.01f64..0.99) {
        let mut v = values.clone();
        let t = order_statistic_threshold(&mut v, q);
        let flagged = values.iter().filter(|&&x| x > t).count();
        prop_assert!(flagged as f64 <= (1.0 - q) * values.len() as f64 + 1e-9);
        prop_assert!(values.contains(&t));
    }

    #[test]
    fn kl_divergences_are_non_negative(l1 in 0.0f64..0.99, dim in 1usize..80, shell in 0.05f64..3.0) {
        let p = CounterexampleParams { lambda1: l1, lambda2: 0.01, shell, dim, epsilon: 1.0, delta: 0.25 };
        prop_assert!(kl_q_p(&p) >= -1e-12);
        prop_assert!(kl_p_q(&p) >= -1e-12);
    }

    #[test]
    fn annulus_samples_stay_in_the_annulus(inner in 0.0f64..2.0, width in 0.01f64..2.0, dim in 1usize..30, seed in 0u64..100) {
        let spec = AnnulusSpec::new(inner, inner + width, dim).unwrap();
        for x in sample_annulus(&spec, 20, &mut seeded(seed)).unwrap() {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(r >= inner - 1e-12 && r <= inner + width + 1e-12);
        }
    }

    #[test]
    fn interpolation_hits_both_endpoints(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4)) {
        prop_assert_eq!(interpolate(&a, &b, 0.0).unwrap(), a.clone());
        let end = interpolate(&a, &b, 1.0).unwrap();
        for (x, y) in end.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_adds_the_uniform_log_density(k in 1usize..10, scale in 0.01f64..1.0, seed in 0u64..100) {
        let (padded, correction) = pad_noise(&[1.0, 2.0], k, scale, &mut seeded(seed)).unwrap();
        prop_assert_eq!(padded.len(), 2 + k);
        prop_assert!((correction - k as f64 * (1.0 / scale).ln()).abs() < 1e-12);
    }

    #[test]
    fn dataset_text_round_trip(rows in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 3), 0usize..3), 1..30)) {
        let samples: Vec<Sample> = rows.into_iter().map(|(x, y)| Sample { x, y }).collect();
        let meta = DatasetMeta { kind: "test".into(), params: serde_json::Value::Null, seed: 0 };
        let ds = Dataset::new(3, 3, samples, meta.clone()).unwrap();
        let back = Dataset::from_text(&ds.to_text(), meta).unwrap();
        prop_assert_eq!(back.samples, ds.samples);
    }
}
