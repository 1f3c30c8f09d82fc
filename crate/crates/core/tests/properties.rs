//! Property tests for the network/mask algebra.

use proptest::prelude::*;

use subnet_core::net::{apply_mask, BinaryMask, DenseNetwork};
use subnet_core::sample::{sample_random_net, sample_target_net, TargetSpec};
use subnet_core::{Matrix, RngStream};

fn small_dims() -> impl Strategy<Value = Vec<usize>> {
    // d, one or two hidden widths, scalar output.
    (1usize..5, 1usize..6, 1usize..6, 0usize..2).prop_map(|(d, h1, h2, extra)| {
        let mut dims = vec![d, h1];
        if extra == 1 {
            dims.push(h2);
        }
        dims.push(1);
        dims
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_positively_homogeneous(
        dims in small_dims(),
        seed in 0u64..1000,
        scale in 1e-3f64..10.0,
        x_seed in 0u64..1000,
    ) {
        let net = sample_random_net(&dims, RngStream::new(seed)).unwrap();
        let mut rng = RngStream::new(x_seed).rng();
        use rand::Rng;
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let direct = net.forward(&scaled).unwrap()[0];
        let pulled = scale * net.forward(&x).unwrap()[0];
        let tol = 1e-12 * direct.abs().max(pulled.abs()).max(1.0);
        prop_assert!((direct - pulled).abs() <= tol, "{direct} vs {pulled}");
    }

    #[test]
    fn mask_application_is_idempotent(
        dims in small_dims(),
        seed in 0u64..1000,
        mask_bits in proptest::collection::vec(any::<bool>(), 64),
    ) {
        let net = sample_random_net(&dims, RngStream::new(seed)).unwrap();
        let mut mask = BinaryMask::ones_like(&net);
        let mut bit = 0;
        for li in 0..net.depth() {
            let layer = net.layer(li);
            for r in 0..layer.rows() {
                for c in 0..layer.cols() {
                    mask.layer_mut(li).set(r, c, mask_bits[bit % mask_bits.len()]);
                    bit += 1;
                }
            }
        }
        let once = apply_mask(&net, &mask).unwrap();
        let twice = apply_mask(&once, &mask).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn active_count_is_monotone(
        dims in small_dims(),
        seed in 0u64..1000,
        bits in proptest::collection::vec(any::<bool>(), 64),
    ) {
        let net = sample_random_net(&dims, RngStream::new(seed)).unwrap();
        let mut smaller = BinaryMask::zeros_like(&net);
        let mut larger = BinaryMask::zeros_like(&net);
        let mut bit = 0;
        for li in 0..net.depth() {
            let layer = net.layer(li);
            for r in 0..layer.rows() {
                for c in 0..layer.cols() {
                    let b = bits[bit % bits.len()];
                    let b2 = bits[(bit + 7) % bits.len()];
                    smaller.layer_mut(li).set(r, c, b && b2);
                    larger.layer_mut(li).set(r, c, b);
                    bit += 1;
                }
            }
        }
        prop_assert!(smaller.active_count() <= larger.active_count());
    }

    #[test]
    fn target_nets_are_one_lipschitz(
        seed in 0u64..500,
        x_seed in 0u64..500,
        d in 2usize..6,
        n in 1usize..5,
        l in 1usize..4,
    ) {
        let spec = TargetSpec { input_dim: d, width: n, depth: l, sparsity: d.min(n.max(1)) };
        let net = sample_target_net(&spec, RngStream::new(seed)).unwrap();
        use rand::Rng;
        let mut rng = RngStream::new(x_seed).rng();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let fx = net.forward(&x).unwrap()[0];
        let fy = net.forward(&y).unwrap()[0];
        let dist: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        prop_assert!((fx - fy).abs() <= dist + 1e-12);
    }

    #[test]
    fn network_json_round_trips(dims in small_dims(), seed in 0u64..1000) {
        let net = sample_random_net(&dims, RngStream::new(seed)).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: DenseNetwork = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, net);
    }
}

#[test]
fn masked_identity_sanity() {
    // Keep exactly the diagonal of a 2-layer identity-ish net.
    let net = DenseNetwork::new(vec![Matrix::identity(3), Matrix::from_rows(&[&[1.0, 1.0, 1.0]])])
        .unwrap();
    let mask = BinaryMask::ones_like(&net);
    let same = apply_mask(&net, &mask).unwrap();
    assert_eq!(same.forward(&[1.0, 2.0, -1.0]).unwrap(), vec![3.0]);
}
