use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sign_radar::classifier::{
    accuracy, confusion_matrix, train, ClassifierModel, Example, StopReason, Topology, TrainConfig,
};
use sign_radar::Error;

fn random_image(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..n).map(|_| rng.random::<f32>()).collect()
}

fn random_examples(t: &Topology, labels: &[usize], seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|&label| Example {
            images: std::array::from_fn(|_| random_image(t.input_len(), &mut rng)),
            label,
        })
        .collect()
}

fn one_per_class(t: &Topology, seed: u64) -> Vec<Example> {
    random_examples(t, &(0..9).collect::<Vec<_>>(), seed)
}

#[test]
fn zero_model_is_uniform() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f32>::zeros(t.clone()).unwrap();
    let ex = random_examples(&t, &[4], 1).remove(0);
    let p = model.forward(&ex.image_refs(), true, 7).unwrap();
    assert_eq!(p.len(), 9);
    for v in &p {
        assert!((v - 1.0 / 9.0).abs() < 1e-12);
    }
    let (label, probs) = model.predict(&ex.image_refs()).unwrap();
    assert_eq!(label, 0);
    assert_eq!(probs, model.forward(&ex.image_refs(), false, 0).unwrap());
    let (loss, _) = model.loss_and_gradients(std::slice::from_ref(&ex), false, 0).unwrap();
    assert!((loss - 9f64.ln()).abs() < 1e-9, "loss {loss}");
}

#[test]
fn standard_topology_shapes() {
    let t = Topology::standard();
    assert_eq!(t.branch_features(), 16 * 16 * 32);
    let model = ClassifierModel::<f32>::zeros(t).unwrap();
    let groups = model.param_groups();
    let dense0 = groups.iter().find(|(n, _)| n == "dense0.w").unwrap();
    assert_eq!(dense0.1.len(), 256 * 3 * 8192);
    let out = groups.iter().find(|(n, _)| n == "dense2.w").unwrap();
    assert_eq!(out.1.len(), 9 * 64);
    assert_eq!(groups.last().unwrap().1.end, model.num_params());
}

#[test]
fn shape_mismatch_is_invalid_argument() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f32>::new(t.clone(), 1).unwrap();
    let img = vec![0.0f32; t.input_len()];
    let short = vec![0.0f32; t.input_len() - 1];
    assert!(matches!(model.forward(&[&img, &img], false, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(model.forward(&[&img, &short, &img], false, 0), Err(Error::InvalidArgument(_))));
}

/// Central differences over every parameter of the reduced model, with
/// dropout active under a fixed mask seed.
#[test]
fn gradients_match_finite_differences() {
    let t = Topology::reduced();
    let mut model = ClassifierModel::<f64>::new(t.clone(), 11).unwrap();
    // non-zero biases so bias gradients are exercised away from symmetry
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (_, r) in model.param_groups() {
        if r.len() < 12 {
            for p in &mut model.params_mut()[r] {
                *p = rng.random_range(-0.1..0.1);
            }
        }
    }
    let batch = random_examples(&t, &[2, 7, 5], 4);
    let seed = 99;
    let (_, grad) = model.loss_and_gradients(&batch, true, seed).unwrap();
    // h = 1e-5 balances roundoff in the loss (~1e-16 / h) against the
    // chance of stepping across a ReLU or pooling kink. The denominator
    // floor of 1e-6 keeps near-zero gradients from amplifying that roundoff.
    let h = 1e-5;
    let mut worst: Vec<(String, f64)> = Vec::new();
    for (name, range) in model.param_groups() {
        let mut max_err: f64 = 0.0;
        for i in range {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + h;
            let (lp, _) = model.loss_and_gradients(&batch, true, seed).unwrap();
            model.params_mut()[i] = orig - h;
            let (lm, _) = model.loss_and_gradients(&batch, true, seed).unwrap();
            model.params_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad[i];
            let scale = numeric.abs().max(analytic.abs()).max(1e-6);
            max_err = max_err.max((numeric - analytic).abs() / scale);
        }
        worst.push((name, max_err));
    }
    for (name, err) in &worst {
        assert!(*err < 1e-4, "{name}: relative error {err:e}");
    }
}

#[test]
fn duplicated_sample_gives_same_gradient() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f64>::new(t.clone(), 2).unwrap();
    let ex = random_examples(&t, &[3], 8);
    let twice = vec![ex[0].clone(), ex[0].clone()];
    let (l1, g1) = model.loss_and_gradients(&ex, false, 0).unwrap();
    let (l2, g2) = model.loss_and_gradients(&twice, false, 0).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
    }
}

#[test]
fn labels_are_validated() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f32>::new(t.clone(), 2).unwrap();
    let bad = random_examples(&t, &[9], 1);
    assert!(matches!(model.loss_and_gradients(&bad, false, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(model.loss_and_gradients(&[], false, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn permuting_output_rows_permutes_probabilities() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f64>::new(t.clone(), 5).unwrap();
    let ex = random_examples(&t, &[0], 6).remove(0);
    let perm = [4, 0, 8, 1, 7, 2, 6, 3, 5];
    let (w, b) = model.output_layer();
    let inputs = w.len() / 9;
    let mut permuted = model.clone();
    for (i, &src) in perm.iter().enumerate() {
        for j in 0..inputs {
            permuted.params_mut()[w.start + i * inputs + j] = model.params()[w.start + src * inputs + j];
        }
        permuted.params_mut()[b.start + i] = model.params()[b.start + src];
    }
    let p = model.forward(&ex.image_refs(), false, 0).unwrap();
    let q = permuted.forward(&ex.image_refs(), false, 0).unwrap();
    for (i, &src) in perm.iter().enumerate() {
        assert!((q[i] - p[src]).abs() < 1e-15);
    }
}

#[test]
fn shared_logit_shift_keeps_label() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f64>::new(t.clone(), 9).unwrap();
    let (_, b) = model.output_layer();
    for (k, ex) in random_examples(&t, &[0, 1, 2, 3, 4], 10).iter().enumerate() {
        let mut shifted = model.clone();
        for p in &mut shifted.params_mut()[b.clone()] {
            *p += 3.5 * (k as f64 - 2.0);
        }
        assert_eq!(model.predict(&ex.image_refs()).unwrap().0, shifted.predict(&ex.image_refs()).unwrap().0);
    }
}

#[test]
fn branches_are_independent_before_fusion() {
    let t = Topology::reduced();
    let model = ClassifierModel::<f32>::new(t.clone(), 12).unwrap();
    let ex = random_examples(&t, &[0], 13).remove(0);
    let zero = vec![0.0f32; t.input_len()];
    let before: Vec<Vec<f32>> = (0..3).map(|b| model.branch_features(b, &ex.images[b]).unwrap()).collect();
    let zeroed = [&ex.images[0][..], &zero, &zero];
    let after: Vec<Vec<f32>> = (0..3).map(|b| model.branch_features(b, zeroed[b]).unwrap()).collect();
    assert_eq!(before[0], after[0]);
    assert_ne!(before[1], after[1]);
    assert_ne!(before[2], after[2]);
    // the three branches have separate weights
    assert_ne!(model.branch_features(0, &ex.images[1]).unwrap(), before[1]);
}

#[test]
fn save_load_is_bit_exact() {
    let t = Topology::reduced();
    let mut model = ClassifierModel::<f32>::new(t.clone(), 21).unwrap();
    model.set_hyperparameters(Some(TrainConfig {
        stop_at_accuracy: Some(0.75),
        ..TrainConfig::default()
    }));
    let mut buf = Vec::new();
    model.save(&mut buf).unwrap();
    let back = ClassifierModel::<f32>::load(&buf[..]).unwrap();
    assert_eq!(back, model);
    assert!(back.params().iter().zip(model.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let ex = random_examples(&t, &[1], 22).remove(0);
    let p = model.forward(&ex.image_refs(), false, 0).unwrap();
    let q = back.forward(&ex.image_refs(), false, 0).unwrap();
    assert!(p.iter().zip(&q).all(|(a, b)| a.to_bits() == b.to_bits()));

    let mut again = Vec::new();
    back.save(&mut again).unwrap();
    assert_eq!(buf, again);

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(ClassifierModel::<f32>::load(&bad[..]), Err(Error::Format { .. })));
    assert!(ClassifierModel::<f32>::load(&buf[..buf.len() - 1]).is_err());
    let mut long = buf.clone();
    long.push(0);
    assert!(ClassifierModel::<f32>::load(&long[..]).is_err());
}

#[test]
fn single_and_double_precision_agree() {
    let t = Topology::reduced();
    let m32 = ClassifierModel::<f32>::new(t.clone(), 4).unwrap();
    let m64: ClassifierModel<f64> = m32.cast();
    for ex in random_examples(&t, &[0, 1, 2], 5) {
        let a = m32.forward(&ex.image_refs(), false, 0).unwrap();
        let b = m64.forward(&ex.image_refs(), false, 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        momentum: 0.9,
        batch_size: 3,
        epochs: 5,
        patience: 0,
        min_delta: 0.0,
        seed: 17,
        stop_at_accuracy: None,
    }
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let t = Topology::reduced();
    let data = one_per_class(&t, 30);
    let mut model = ClassifierModel::<f32>::new(t, 31).unwrap();
    let before = model.params().to_vec();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..quick_config()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 5);
    assert_eq!(model.params(), &before[..]);
}

#[test]
fn training_is_deterministic() {
    let t = Topology::reduced();
    let data = one_per_class(&t, 40);
    let run = || {
        let mut model = ClassifierModel::<f32>::new(t.clone(), 41).unwrap();
        let log = train(&mut model, &data, &quick_config()).unwrap();
        (model, log)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(la, lb);
    assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    let mut other = ClassifierModel::<f32>::new(t.clone(), 41).unwrap();
    train(&mut other, &data, &TrainConfig { seed: 18, ..quick_config() }).unwrap();
    assert_ne!(other.params(), a.params());
}

#[test]
fn missing_class_is_refused() {
    let t = Topology::reduced();
    let data = random_examples(&t, &[0, 1, 2, 3, 4, 5, 6, 8], 50);
    let mut model = ClassifierModel::<f32>::new(t, 51).unwrap();
    let err = train(&mut model, &data, &quick_config()).unwrap_err();
    assert!(err.to_string().contains("missing class(es) 7"), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(TrainConfig { batch_size: 0, ..quick_config() }.validate().is_err());
    assert!(TrainConfig { learning_rate: -1.0, ..quick_config() }.validate().is_err());
    assert!(TrainConfig { learning_rate: f64::NAN, ..quick_config() }.validate().is_err());
    assert!(TrainConfig { momentum: 1.0, ..quick_config() }.validate().is_err());
}

/// Full-batch gradient descent without dropout on a single batch drives
/// the loss down monotonically.
#[test]
fn full_batch_loss_is_non_increasing() {
    let t = Topology { dropout: 0.0, ..Topology::reduced() };
    let data = one_per_class(&t, 60);
    let mut model = ClassifierModel::<f64>::new(t, 61).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.003,
        momentum: 0.0,
        batch_size: 9,
        epochs: 40,
        ..quick_config()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    for w in log.epochs.windows(2) {
        assert!(w[1].loss <= w[0].loss, "loss rose: {} -> {}", w[0].loss, w[1].loss);
    }
    assert!(log.epochs.last().unwrap().loss < log.epochs[0].loss);
}

#[test]
fn memorizes_one_sample_per_class() {
    // the reduced head is only 8 and 6 units wide, too narrow for dropout
    let t = Topology { dropout: 0.0, ..Topology::reduced() };
    let data = one_per_class(&t, 70);
    let mut model = ClassifierModel::<f32>::new(t, 71).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.02,
        momentum: 0.9,
        batch_size: 9,
        epochs: 200,
        patience: 0,
        stop_at_accuracy: Some(1.0),
        ..quick_config()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    assert_eq!(log.stop, StopReason::AccuracyReached);
    assert_eq!(accuracy(&model, &data).unwrap(), 1.0);
    let cm = confusion_matrix(&model, &data).unwrap();
    assert_eq!(cm.accuracy(), 1.0);
}

#[test]
fn plateau_stops_early() {
    let t = Topology::reduced();
    let data = one_per_class(&t, 80);
    let mut model = ClassifierModel::<f32>::new(t, 81).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 50,
        patience: 3,
        ..quick_config()
    };
    let log = train(&mut model, &data, &cfg).unwrap();
    assert_eq!(log.stop, StopReason::Plateau);
    assert!(log.epochs.len() < 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn softmax_sums_to_one(model_seed in any::<u64>(), data_seed in any::<u64>(), train_mode in any::<bool>()) {
        let t = Topology::reduced();
        let model = ClassifierModel::<f32>::new(t.clone(), model_seed).unwrap();
        let ex = random_examples(&t, &[0], data_seed).remove(0);
        let p = model.forward(&ex.image_refs(), train_mode, data_seed).unwrap();
        prop_assert_eq!(p.len(), 9);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eval_forward_is_deterministic(seed in any::<u64>()) {
        let t = Topology::reduced();
        let model = ClassifierModel::<f32>::new(t.clone(), seed).unwrap();
        let ex = random_examples(&t, &[0], seed ^ 1).remove(0);
        let a = model.forward(&ex.image_refs(), false, 1).unwrap();
        let b = model.forward(&ex.image_refs(), false, 2).unwrap();
        prop_assert_eq!(a, b);
    }
}
