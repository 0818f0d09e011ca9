use rand::{Rng, SeedableRng};
use svtk::model::{Network, NetworkConfig};
use svtk::nn::{softmax_cross_entropy, Mode, Parameterized, Tensor};

/// Published per-row parameter counts of the 97-speaker network.
const TABLE: [(&str, f64); 12] = [
    ("stem", 3.2e3),
    ("block1", 74.1e3),
    ("block2", 74.1e3),
    ("block3", 230.1e3),
    ("block4", 296.2e3),
    ("block5", 919.8e3),
    ("block6", 1182.2e3),
    ("block7", 3674.7e3),
    ("block8", 4723.7e3),
    ("softmax", 50e3),
    ("maxpool", 0.0),
    ("avgpool", 0.0),
];

const SHAPES: [(&str, &[usize]); 12] = [
    ("stem", &[129, 400, 64]),
    ("maxpool", &[65, 200, 64]),
    ("block1", &[65, 200, 64]),
    ("block2", &[65, 200, 64]),
    ("block3", &[33, 100, 128]),
    ("block4", &[33, 100, 128]),
    ("block5", &[17, 50, 256]),
    ("block6", &[17, 50, 256]),
    ("block7", &[9, 25, 512]),
    ("block8", &[9, 25, 512]),
    ("avgpool", &[512]),
    ("softmax", &[97]),
];

#[test]
fn rows_and_total_within_one_percent() {
    let net = Network::<f32>::build(NetworkConfig::full(97), 0).unwrap();
    let counts = net.count_parameters().unwrap();
    for (row, expect) in TABLE {
        let got = counts.row(row).unwrap().params as f64;
        if expect == 0.0 {
            assert_eq!(got, 0.0, "{row}");
        } else {
            assert!((got - expect).abs() / expect < 0.01, "{row}: {got} vs {expect}");
        }
    }
    assert_eq!(counts.row("softmax").unwrap().params, 512 * 97 + 97);
    assert!((counts.total as f64 - 11_228.0e3).abs() / 11_228.0e3 < 0.01, "total {}", counts.total);
    assert_eq!(counts.total, net.num_parameters());
}

#[test]
fn shape_chain_is_exact() {
    let net = Network::<f32>::build(NetworkConfig::full(97), 0).unwrap();
    let chain = net.shape_chain().unwrap();
    for (row, dims) in SHAPES {
        let got = &chain.iter().find(|(r, _)| r == row).unwrap().1;
        assert_eq!(got.as_slice(), dims, "{row}");
    }
    assert_eq!(net.embedding_dim(), 512);
}

#[test]
fn forward_trace_matches_shape_chain() {
    let mut net = Network::<f32>::build(NetworkConfig::desk(10), 1).unwrap();
    let x = Tensor::zeros(&[2, 257, 200, 1]);
    let out = net.forward(&x, Mode::Train).unwrap();
    assert_eq!(out.trace, net.shape_chain().unwrap());
    assert_eq!(out.embedding.dims(), &[2, 128]);
}

#[test]
fn same_seed_same_parameters() {
    let a = Network::<f32>::build(NetworkConfig::desk(10), 42).unwrap();
    let b = Network::<f32>::build(NetworkConfig::desk(10), 42).unwrap();
    let c = Network::<f32>::build(NetworkConfig::desk(10), 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.params()[0].value, c.params()[0].value);
}

#[test]
fn initial_loss_is_near_uniform() {
    let mut net = Network::<f32>::build(NetworkConfig::desk(10), 5).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::from_vec(vec![8, 257, 200, 1], (0..8 * 257 * 200).map(|_| r.random_range(-1.7f32..1.7)).collect()).unwrap();
    let labels: Vec<usize> = (0..8).collect();
    let out = net.forward(&x, Mode::Train).unwrap();
    let (loss, _) = softmax_cross_entropy(&out.logits, &labels).unwrap();
    assert!((loss - 10f64.ln()).abs() < 0.5, "loss {loss}");
}

#[test]
fn embeddings_are_deterministic_and_finite_on_zero_input() {
    let mut net = Network::<f32>::build(NetworkConfig::desk(10), 5).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::from_vec(vec![4, 257, 200, 1], (0..4 * 257 * 200).map(|_| r.random_range(-1.0f32..1.0)).collect()).unwrap();
    net.forward(&x, Mode::Train).unwrap();
    let z = Tensor::zeros(&[1, 257, 200, 1]);
    let e1 = net.infer(&z).unwrap().embedding;
    let e2 = net.infer(&z).unwrap().embedding;
    assert_eq!(e1, e2);
    assert!(e1.all_finite() && e1.len() == 128);
}
