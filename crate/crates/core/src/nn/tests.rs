use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Scalar head Σ r ∘ net(x); returns value.
fn head(net: &Network, x: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (net.predict(x.view()).unwrap() * r).sum()
}

#[test]
fn linear_zero_blocks_layout() {
    let net = Network::new(NetworkConfig::new(Arch::Linear, 0, 64, 62, 1)).unwrap();
    assert!(matches!(
        net.layers(),
        [Layer::Conv(_), Layer::Flatten(_), Layer::Dense(_)]
    ));
    let y = net.predict(Array2::zeros((3, 64)).view()).unwrap();
    assert_eq!(y.dim(), (3, 62));
}

#[test]
fn netc_four_blocks_has_four_swish() {
    let net = Network::new(NetworkConfig::new(Arch::NetC, 4, 31, 29, 1)).unwrap();
    assert_eq!(net.activation_count(), 4);
    assert!(net.activation_kinds().iter().all(|&k| k == ActivationKind::Swish));
    // nothing between the final conv and the flatten
    let layers = net.layers();
    let flat = layers.iter().position(|l| matches!(l, Layer::Flatten(_))).unwrap();
    assert!(matches!(layers[flat - 1], Layer::Conv(_)));
    assert!(matches!(layers[flat - 2], Layer::Activation(_)));
    let convs = layers.iter().filter(|l| matches!(l, Layer::Conv(_))).count();
    assert_eq!(convs, 5);
}

#[test]
fn linear_arch_has_no_activations() {
    let net = Network::new(NetworkConfig::new(Arch::Linear, 3, 16, 14, 1)).unwrap();
    assert_eq!(net.activation_count(), 0);
}

#[test]
fn same_seed_same_parameters() {
    let cfg = NetworkConfig::new(Arch::NetA, 2, 16, 14, 77);
    let a = Network::new(cfg.clone()).unwrap().params();
    let b = Network::new(cfg).unwrap().params();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn architectures_share_parameters() {
    let base = Network::new(NetworkConfig::new(Arch::NetA, 3, 16, 14, 5)).unwrap().params();
    for arch in [Arch::NetB, Arch::NetC] {
        let other = Network::new(NetworkConfig::new(arch, 3, 16, 14, 5)).unwrap().params();
        assert_eq!(base, other);
    }
}

#[test]
fn initialization_bounds() {
    let net = Network::new(NetworkConfig::new(Arch::NetC, 1, 16, 14, 3)).unwrap();
    for layer in net.layers() {
        match layer {
            Layer::Conv(c) => {
                let bound = (1.0 / (c.in_channels * c.kernel_size) as f64).sqrt();
                assert!(c.weight.value.iter().all(|v| v.abs() <= bound));
            }
            Layer::Dense(d) => {
                let bound = (1.0 / d.in_features() as f64).sqrt();
                assert!(d.weight.value.iter().all(|v| v.abs() <= bound));
            }
            _ => {}
        }
    }
}

#[test]
fn invalid_configs_rejected() {
    let mut cfg = NetworkConfig::new(Arch::NetA, 1, 16, 14, 0);
    cfg.kernel_size = 4;
    assert!(Network::new(cfg.clone()).is_err());
    cfg.kernel_size = 5;
    cfg.padding = 1;
    assert!(Network::new(cfg.clone()).is_err());
    cfg.padding = 2;
    cfg.stride = 2;
    assert!(Network::new(cfg.clone()).is_err());
    cfg.stride = 1;
    cfg.filters = 0;
    assert!(Network::new(cfg).is_err());
}

#[test]
fn zero_linear_net_maps_zero_to_zero() {
    let mut net = Network::new(NetworkConfig::new(Arch::Linear, 1, 12, 10, 9)).unwrap();
    net.set_params(&vec![0.0; net.num_params()]).unwrap();
    let y = net.forward(Array2::zeros((4, 12)).view()).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn per_sample_independence() {
    let net = Network::new(NetworkConfig::new(Arch::NetC, 2, 12, 10, 4)).unwrap();
    let x = random_matrix(1, 12, 1);
    let mut xx = Array2::zeros((2, 12));
    xx.row_mut(0).assign(&x.row(0));
    xx.row_mut(1).assign(&x.row(0));
    let single = net.predict(x.view()).unwrap();
    let double = net.predict(xx.view()).unwrap();
    assert_eq!(double.row(0), single.row(0));
    assert_eq!(double.row(1), single.row(0));
}

#[test]
fn forward_and_predict_agree() {
    let mut net = Network::new(NetworkConfig::new(Arch::NetB, 2, 12, 10, 4)).unwrap();
    let x = random_matrix(3, 12, 2);
    let a = net.forward(x.view()).unwrap();
    let b = net.predict(x.view()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn width_mismatch_rejected() {
    let mut net = Network::new(NetworkConfig::new(Arch::NetA, 1, 12, 10, 4)).unwrap();
    assert!(matches!(
        net.forward(Array2::zeros((2, 11)).view()),
        Err(NetError::ShapeMismatch { .. })
    ));
}

#[test]
fn backward_requires_forward() {
    let mut net = Network::new(NetworkConfig::new(Arch::NetA, 1, 12, 10, 4)).unwrap();
    assert!(matches!(
        net.backward(Array2::zeros((2, 10)).view()),
        Err(NetError::NoForwardCache)
    ));
    net.forward(Array2::zeros((2, 12)).view()).unwrap();
    net.backward(Array2::zeros((2, 10)).view()).unwrap();
    // cache is consumed
    assert!(net.backward(Array2::zeros((2, 10)).view()).is_err());
}

#[test]
fn zero_output_grad_leaves_grads_zero() {
    let mut net = Network::new(NetworkConfig::new(Arch::NetC, 1, 12, 10, 4)).unwrap();
    net.zero_grad();
    net.forward(random_matrix(3, 12, 8).view()).unwrap();
    net.backward(Array2::zeros((3, 10)).view()).unwrap();
    assert!(net.grads().iter().all(|&g| g == 0.0));
}

fn check_gradients(arch: Arch, seed: u64) {
    let mut net = Network::new(NetworkConfig::new(arch, 1, 8, 6, seed).with_filters(3, 5)).unwrap();
    let x = random_matrix(2, 8, seed + 100);
    let r = random_matrix(2, 6, seed + 200);
    net.zero_grad();
    net.forward(x.view()).unwrap();
    let dx = net.backward(r.view()).unwrap();
    let grads = net.grads();
    let params = net.params();
    let h = 1e-6;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        net.set_params(&p).unwrap();
        let up = head(&net, &x, &r);
        p[i] -= 2.0 * h;
        net.set_params(&p).unwrap();
        let down = head(&net, &x, &r);
        let fd = (up - down) / (2.0 * h);
        let err = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-3);
        assert!(err <= 1e-5, "{arch:?} param {i}: analytic {} vs fd {fd}", grads[i]);
    }
    net.set_params(&params).unwrap();
    for ((s, j), &g) in dx.indexed_iter() {
        let mut xp = x.clone();
        xp[[s, j]] += h;
        let up = head(&net, &xp, &r);
        xp[[s, j]] -= 2.0 * h;
        let down = head(&net, &xp, &r);
        let fd = (up - down) / (2.0 * h);
        assert!((fd - g).abs() / fd.abs().max(g.abs()).max(1e-3) <= 1e-5);
    }
}

#[test]
fn gradients_match_finite_differences() {
    for arch in [Arch::Linear, Arch::NetA, Arch::NetB, Arch::NetC] {
        check_gradients(arch, 11);
    }
}

#[test]
fn gradients_accumulate_across_calls() {
    let mut net = Network::new(NetworkConfig::new(Arch::NetC, 1, 8, 6, 2).with_filters(3, 3)).unwrap();
    let x = random_matrix(2, 8, 1);
    let r = random_matrix(2, 6, 2);
    net.zero_grad();
    net.forward(x.view()).unwrap();
    net.backward(r.view()).unwrap();
    let once = net.grads();
    net.forward(x.view()).unwrap();
    net.backward(r.view()).unwrap();
    for (a, b) in net.grads().iter().zip(&once) {
        assert!((a - 2.0 * b).abs() <= 1e-14 * b.abs().max(1.0));
    }
}

#[test]
fn conv_layers_preserve_length() {
    for k in [1, 3, 5, 7, 9] {
        for p in [8, 31, 64] {
            let mut conv = Conv1d::new(2, 3, k, (k - 1) / 2, p);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            conv.init(&mut rng);
            let y = conv.infer(&Array2::<f64>::ones((2, 4 * p)).view());
            assert_eq!(y.dim(), (3, 4 * p));
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::new(NetworkConfig::new(Arch::NetB, 2, 12, 10, 21)).unwrap();
    let stats = crate::dataset::NormStats { mean: 0.25, std: 1.5 };
    save_checkpoint(&net, Some(&stats), dir.path()).unwrap();
    let (loaded, norm) = load_checkpoint(dir.path()).unwrap();
    assert_eq!(norm, Some(stats));
    assert_eq!(loaded.config(), net.config());
    assert_eq!(loaded.params(), net.params());
    let bytes = std::fs::read(dir.path().join(PARAMS_FILE)).unwrap();
    assert_eq!(bytes.len(), net.num_params() * 8);
    std::fs::write(dir.path().join(PARAMS_FILE), &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(NetError::ShapeMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_network_is_affine(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let net = Network::new(NetworkConfig::new(Arch::Linear, 2, 10, 8, seed).with_filters(4, 3)).unwrap();
        let x1 = random_matrix(1, 10, seed + 1);
        let x2 = random_matrix(1, 10, seed + 2);
        let combo = &x1 * a + &x2 * b;
        let lhs = net.predict(combo.view()).unwrap();
        let zero = net.predict(Array2::zeros((1, 10)).view()).unwrap();
        let rhs = net.predict(x1.view()).unwrap() * a + net.predict(x2.view()).unwrap() * b - &zero * (a + b - 1.0);
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() <= 1e-10);
        }
    }

    #[test]
    fn batch_rows_are_independent(seed in 0u64..1000) {
        let net = Network::new(NetworkConfig::new(Arch::NetA, 1, 9, 7, seed).with_filters(3, 3)).unwrap();
        let x = random_matrix(3, 9, seed);
        let batch = net.predict(x.view()).unwrap();
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            let single = net.predict(row.insert_axis(Axis(0))).unwrap();
            prop_assert_eq!(single.row(0), batch.row(i));
        }
    }
}
