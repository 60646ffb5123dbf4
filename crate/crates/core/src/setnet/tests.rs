use super::*;
use crate::dataset::Sample;
use crate::rng::{stream_rng, Stream};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHAPE: NetShape = NetShape {
    rows: 6,
    u_max: 4,
    q_size: 5,
};

fn net(variant: Variant, hidden: &[usize], seed: u64) -> SetNetwork {
    SetNetwork::new(variant, SHAPE, hidden, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Random input with `used` detection-like columns followed by padding.
fn random_input(rng: &mut ChaCha8Rng, used: usize, cols: usize) -> Vec<f64> {
    let mut v = vec![0.0; SHAPE.rows * cols];
    for u in 0..used {
        let c = &mut v[u * SHAPE.rows..(u + 1) * SHAPE.rows];
        c[rng.random_range(0..2)] = 1.0;
        for x in &mut c[2..] {
            *x = rng.random::<f64>();
        }
    }
    v
}

fn permute_columns(v: &[f64], perm: &[usize]) -> Vec<f64> {
    let r = SHAPE.rows;
    perm.iter()
        .flat_map(|&u| v[u * r..(u + 1) * r].iter().copied())
        .collect()
}

fn random_target(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..SHAPE.q_size).map(|_| f64::from(rng.random_range(0u8..2))).collect()
}

/// Central finite differences of the loss, one parameter at a time.
fn finite_difference(net: &SetNetwork, v: &[f64], target: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|i| {
            let p0 = net.params()[i];
            probe.params_mut()[i] = p0 + eps;
            let up = loss(&probe.forward(v).unwrap(), target);
            probe.params_mut()[i] = p0 - eps;
            let down = loss(&probe.forward(v).unwrap(), target);
            probe.params_mut()[i] = p0;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn empty_input_gives_one_half() {
    for variant in [Variant::SetSum, Variant::ReuseConcat] {
        let n = net(variant, &[8], 1);
        let t = n.forward(&[0.0; SHAPE.rows * SHAPE.u_max]).unwrap();
        assert!(t.iter().all(|&x| x == 0.5), "{variant}: {t:?}");
    }
}

#[test]
fn hand_evaluated_single_layer() {
    // no hidden layers: t = sigmoid(W v + b) for a single UE
    let shape = NetShape {
        rows: 6,
        u_max: 3,
        q_size: 6,
    };
    let mut params = Vec::new();
    for o in 0..6 {
        for i in 0..6 {
            params.push(if o == i { 1.0 } else { 0.0 });
        }
    }
    let bias = [0.1, -0.2, 0.3, 0.0, -0.5, 0.25];
    params.extend_from_slice(&bias);
    let n = SetNetwork::from_parts(Variant::SetSum, shape, &[], params).unwrap();
    let column = [0.0, 1.0, 0.4, 0.7, 0.1, 0.05];
    let mut v = vec![0.0; 18];
    v[6..12].copy_from_slice(&column);
    let t = n.forward(&v).unwrap();
    for q in 0..6 {
        let z: f64 = column[q] + bias[q];
        let expected = 1.0 / (1.0 + (-z).exp());
        assert!((t[q] - expected).abs() < 1e-12);
    }
}

#[test]
fn loss_closed_forms() {
    let half = vec![0.5; 7];
    let target = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    assert!((loss(&half, &target) - core::f64::consts::LN_2).abs() < 1e-12);
    let perfect: Vec<f64> = target.to_vec();
    assert!(loss(&perfect, &target) < 1e-11);
    let t = [0.2, 0.9, 0.35, 0.6, 0.01, 0.99, 0.5];
    let flipped_t: Vec<f64> = t.iter().map(|x| 1.0 - x).collect();
    let flipped_y: Vec<f64> = target.iter().map(|y| 1.0 - y).collect();
    assert!((loss(&t, &target) - loss(&flipped_t, &flipped_y)).abs() < 1e-12);
}

#[test]
fn variant_tags_parse() {
    for v in Variant::ALL {
        assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
    }
    let err = "deep_sets".parse::<Variant>().unwrap_err();
    let msg = alloc::format!("{err}");
    assert!(msg.contains("set_sum") && msg.contains("reuse_concat") && msg.contains("vanilla_fc"));
}

#[test]
fn baselines_reject_wrong_column_count() {
    let v = vec![0.0; SHAPE.rows * (SHAPE.u_max + 1)];
    assert!(net(Variant::VanillaFc, &[4], 0).forward(&v).is_err());
    assert!(net(Variant::ReuseConcat, &[4], 0).forward(&v).is_err());
    assert!(net(Variant::SetSum, &[4], 0).forward(&v).is_ok());
    assert!(net(Variant::SetSum, &[4], 0).forward(&v[1..]).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for variant in Variant::ALL {
        for trial in 0..3 {
            // random biases keep every ReLU away from its kink
            let mut n = net(variant, &[5, 4], 10 + trial);
            for p in n.params_mut() {
                *p = rng.random::<f64>() - 0.5;
            }
            let v = random_input(&mut rng, 1 + trial as usize, SHAPE.u_max);
            let target = random_target(&mut rng);
            let (_, analytic) = n.gradient(&v, &target).unwrap();
            let numeric = finite_difference(&n, &v, &target, 1e-6);
            for (i, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
                let err = (a - f).abs() / f.abs().max(1.0);
                assert!(err < 1e-4, "{variant} param {i}: analytic {a}, fd {f}");
            }
        }
    }
}

#[test]
fn padding_columns_get_no_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = net(Variant::SetSum, &[6], 3);
    let v = random_input(&mut rng, 2, 2);
    let target = random_target(&mut rng);
    let (l1, g1) = n.gradient(&v, &target).unwrap();
    let mut padded = v.clone();
    padded.extend(core::iter::repeat_n(0.0, 3 * SHAPE.rows));
    let (l2, g2) = n.gradient(&padded, &target).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
}

#[test]
fn duplicated_column_doubles_its_contribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = net(Variant::SetSum, &[6], 4);
    let single = random_input(&mut rng, 1, 1);
    let mut double = single.clone();
    double.extend_from_slice(&single);
    let dz: Vec<f64> = (0..SHAPE.q_size).map(|_| rng.random::<f64>() - 0.5).collect();

    let mut ws = Workspace::default();
    let mut g1 = vec![0.0; n.num_params()];
    n.logits(&single, &mut ws).unwrap();
    n.backprop(&single, &dz, &mut g1, &mut ws);
    let mut g2 = vec![0.0; n.num_params()];
    n.logits(&double, &mut ws).unwrap();
    n.backprop(&double, &dz, &mut g2, &mut ws);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn vanilla_is_order_sensitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = net(Variant::VanillaFc, &[8], 6);
    let v = random_input(&mut rng, 3, SHAPE.u_max);
    let swapped = permute_columns(&v, &[1, 0, 2, 3]);
    assert_ne!(n.forward(&v).unwrap(), n.forward(&swapped).unwrap());
}

#[test]
fn training_is_deterministic_and_can_overfit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples: Vec<Sample> = (0..10)
        .map(|i| {
            let used = 1 + i % 3;
            Sample {
                scene_id: i as u64,
                camera_id: 0,
                v: random_input(&mut rng, used, SHAPE.u_max),
                t_star: (0..SHAPE.q_size).map(|_| rng.random_range(0u8..2)).collect(),
            }
        })
        .collect();
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 5,
        epochs: 400,
        optimizer: OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        seed: 3,
        hidden_widths: vec![32, 32],
    };
    let (a, curves) = train(Variant::SetSum, SHAPE, &samples, &samples[..2], &cfg, &mut |_| {}).unwrap();
    let final_train = curves.last().unwrap().train_loss;
    assert!(final_train < 0.01, "train loss {final_train}");
    assert_eq!(curves.epochs.len(), 400);
    let (b, _) = train(Variant::SetSum, SHAPE, &samples, &samples[..2], &cfg, &mut |_| {}).unwrap();
    assert_eq!(a.params(), b.params());
}

#[test]
fn divergence_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<Sample> = (0..4)
        .map(|i| Sample {
            scene_id: i,
            camera_id: 0,
            v: random_input(&mut rng, 2, SHAPE.u_max).iter().map(|x| x * 1e150).collect(),
            t_star: vec![1, 0, 1, 0, 1],
        })
        .collect();
    let cfg = TrainConfig {
        learning_rate: 1e10,
        epochs: 5,
        hidden_widths: vec![4],
        ..TrainConfig::default()
    };
    let err = train(Variant::SetSum, SHAPE, &samples, &samples, &cfg, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }));
}

#[test]
fn from_parts_checks_length() {
    let n = net(Variant::ReuseConcat, &[3], 0);
    let params = n.params().to_vec();
    let back = SetNetwork::from_parts(Variant::ReuseConcat, SHAPE, &[3], params.clone()).unwrap();
    assert_eq!(back, n);
    assert!(SetNetwork::from_parts(Variant::ReuseConcat, SHAPE, &[3], params[1..].to_vec()).is_err());
    assert_eq!(
        n.layer_dims(),
        vec![(6, 3), (3, 5), (SHAPE.u_max * SHAPE.q_size, SHAPE.q_size)]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn set_sum_is_permutation_invariant(seed in any::<u64>(), used in 0usize..=4, perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut rng = stream_rng(seed, Stream::Init, 1);
        let n = net(Variant::SetSum, &[7, 5], seed);
        let v = random_input(&mut rng, used, 4);
        let t = n.forward(&v).unwrap();
        prop_assert_eq!(t, n.forward(&permute_columns(&v, &perm)).unwrap());
    }

    #[test]
    fn set_sum_ignores_extra_padding(seed in any::<u64>(), used in 0usize..=4, extra in 1usize..6) {
        let mut rng = stream_rng(seed, Stream::Init, 2);
        let n = net(Variant::SetSum, &[7], seed);
        let v = random_input(&mut rng, used, 4);
        let mut padded = v.clone();
        padded.extend(core::iter::repeat_n(0.0, extra * SHAPE.rows));
        prop_assert_eq!(n.forward(&v).unwrap(), n.forward(&padded).unwrap());
    }

    #[test]
    fn outputs_are_probabilities(seed in any::<u64>(), used in 0usize..=4) {
        let mut rng = stream_rng(seed, Stream::Init, 3);
        let v = random_input(&mut rng, used, 4);
        for variant in Variant::ALL {
            for t in net(variant, &[6], seed).forward(&v).unwrap() {
                prop_assert!(t > 0.0 && t < 1.0);
            }
        }
    }
}
