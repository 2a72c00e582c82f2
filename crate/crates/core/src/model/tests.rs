use super::*;
use crate::autograd::Graph;
use crate::tensor::Tensor;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn toy_response_shapes() {
    for (variant, sc) in [(Variant::ThreeBranch, 10), (Variant::TwoBranch, 1)] {
        let net = Network::<f32>::new(ModelConfig::toy(variant), 3).unwrap();
        let z = net.embed_exemplar(&random(&[3, 127, 127], 1).cast()).unwrap();
        assert_eq!(z.shape(), [64, 15, 15]);
        let grid = net.respond(&z, &random(&[3, 255, 255], 2).cast()).unwrap();
        assert_eq!(grid.correlation.shape(), [64, 17, 17]);
        assert_eq!(grid.scores.shape(), [sc, 17, 17]);
        assert_eq!(
            grid.deltas.as_ref().map(|d| d.shape()[0]),
            (variant == Variant::ThreeBranch).then_some(20)
        );
        assert_eq!(grid.pyramid.skips[0].shape()[1..], [31, 31]);
        let plain = net.mask_logits(&grid, (3, 5), false).unwrap();
        assert_eq!(plain.shape(), [63, 63]);
        let refined = net.mask_logits(&grid, (16, 0), true).unwrap();
        assert_eq!(refined.shape(), [127, 127]);
        assert!(refined.all_finite());
    }
}

#[test]
fn wrong_patch_side_is_rejected() {
    let net = Network::<f64>::new(ModelConfig::tiny(Variant::TwoBranch), 0).unwrap();
    assert!(net.embed_exemplar(&random(&[3, 30, 30], 0)).is_err());
    assert!(net.embed_exemplar(&random(&[1, 31, 31], 0)).is_err());
    let z = net.embed_exemplar(&random(&[3, 31, 31], 0)).unwrap();
    assert!(net.respond(&z, &random(&[3, 31, 31], 0)).is_err());
    let grid = net.respond(&z, &random(&[3, 63, 63], 0)).unwrap();
    assert!(net.mask_logits(&grid, (5, 0), true).is_err());
}

#[test]
fn xcorr_delta_exemplar_copies_search() {
    let mut g = Graph::<f64>::inference();
    let mut z = Tensor::zeros(&[1, 3, 3]);
    z.data_mut()[4] = 1.0;
    let x = random(&[1, 6, 7], 4);
    let (zv, xv) = (g.input(z), g.input(x.clone()));
    let y = g.xcorr(zv, xv).unwrap();
    let out = g.value(y);
    assert_eq!(out.shape(), [1, 4, 5]);
    for i in 0..4 {
        for j in 0..5 {
            assert_eq!(out.at3(0, i, j), x.at3(0, i + 1, j + 1));
        }
    }
    let zz = g.input(Tensor::zeros(&[1, 3, 3]));
    let y = g.xcorr(zz, xv).unwrap();
    assert!(g.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_correlation_gives_bias_broadcast() {
    let mut net = Network::<f64>::new(ModelConfig::tiny(Variant::ThreeBranch), 1).unwrap();
    // give every bias a distinct value so the broadcast is visible
    let ids: Vec<ParamId> = net.params().ids().collect();
    for id in ids {
        if net.params().name(id).ends_with(".bias") {
            let t = net.params_mut().get_mut(id);
            for (i, v) in t.data_mut().iter_mut().enumerate() {
                *v = 0.1 * (i as f64 + 1.0);
            }
        }
    }
    let mut g = Graph::inference();
    let mut p = net.binder();
    let corr = g.input(Tensor::zeros(&[4, 5, 5]));
    let s = net.scores(&mut g, &mut p, corr).unwrap();
    let scores = g.value(s).clone();
    // hidden = relu(bias_h); out = W_out * hidden + bias_out, identical at every RoW
    for c in 0..scores.shape()[0] {
        let first = scores.at3(c, 0, 0);
        assert!(scores.data()[c * 25..(c + 1) * 25].iter().all(|&v| v == first));
    }
}

#[test]
fn zero_weights_refine_is_finite_bias_composition() {
    let mut net = Network::<f64>::new(ModelConfig::tiny(Variant::TwoBranch), 1).unwrap();
    let ids: Vec<ParamId> = net.params().ids().collect();
    for id in ids {
        let t = net.params_mut().get_mut(id);
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let post_bias = net
        .params()
        .ids()
        .find(|&i| net.params().name(i) == "refine.u3.post.bias")
        .unwrap();
    net.params_mut().get_mut(post_bias).data_mut()[0] = 0.25;
    let z = net.embed_exemplar(&random(&[3, 31, 31], 0)).unwrap();
    let grid = net.respond(&z, &random(&[3, 63, 63], 1)).unwrap();
    let m = net.mask_logits(&grid, (2, 2), true).unwrap();
    assert!(m.data().iter().all(|&v| v == 0.25));
}

#[test]
fn refine_gradient_wrt_row_vector() {
    let net = Network::<f64>::new(ModelConfig::tiny(Variant::ThreeBranch), 7).unwrap();
    let corr = random(&[4, 5, 5], 11);
    let skips = [
        random(&[4, 7, 7], 12),
        random(&[4, 15, 15], 13),
        random(&[3, 31, 31], 14),
    ];
    let feats = random(&[4, 7, 7], 15);
    let eval = |c: &Tensor<f64>| -> (f64, Option<Tensor<f64>>) {
        let mut g = Graph::new();
        let mut p = net.binder();
        let cv = g.leaf(c.clone());
        let sv = SearchVars {
            features: g.input(feats.clone()),
            skips: [
                g.input(skips[0].clone()),
                g.input(skips[1].clone()),
                g.input(skips[2].clone()),
            ],
        };
        let m = net.refine(&mut g, &mut p, cv, &sv, (1, 3)).unwrap();
        let n = g.value(m).len();
        let s = g.dot(m, vec![1.0; n]).unwrap();
        let v = g.value(s).data()[0];
        let mut grads = g.backward(s).unwrap();
        (v, grads.take(cv))
    };
    let (_, ga) = eval(&corr);
    let ga = ga.unwrap();
    let h = 1e-6;
    for ch in 0..4 {
        let k = (ch * 5 + 1) * 5 + 3;
        let mut plus = corr.clone();
        plus.data_mut()[k] += h;
        let mut minus = corr.clone();
        minus.data_mut()[k] -= h;
        let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
        let rel = (fd - ga.data()[k]).abs() / fd.abs().max(ga.data()[k].abs()).max(1e-8);
        assert!(rel < 1e-4, "channel {ch}: {} vs {fd}", ga.data()[k]);
    }
    // only the selected RoW receives gradient
    let other = ga
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 25 != 8)
        .all(|(_, &v)| v == 0.0);
    assert!(other);
}

#[test]
fn deterministic_and_cast_roundtrip() {
    let a = Network::<f32>::new(ModelConfig::tiny(Variant::ThreeBranch), 5).unwrap();
    let b = Network::<f32>::new(ModelConfig::tiny(Variant::ThreeBranch), 5).unwrap();
    assert_eq!(a.params(), b.params());
    let c = Network::<f32>::new(ModelConfig::tiny(Variant::ThreeBranch), 6).unwrap();
    assert_ne!(a.params(), c.params());
    let back: Network<f32> = a.cast::<f64>().cast();
    assert_eq!(back.params(), a.params());
    let patch = random(&[3, 31, 31], 0).cast::<f32>();
    assert_eq!(a.embed_exemplar(&patch).unwrap(), b.embed_exemplar(&patch).unwrap());
}

#[test]
fn param_layout_is_unique_and_loadable() {
    let net = Network::<f32>::new(ModelConfig::toy(Variant::TwoBranch), 0).unwrap();
    let mut names: Vec<&str> = net.params().iter().map(|(n, _)| n).collect();
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
    let mut other = Network::<f32>::new(ModelConfig::toy(Variant::ThreeBranch), 0).unwrap();
    let named = net.params().iter().map(|(n, t)| (n.into(), t.clone())).collect();
    assert!(other.params_mut().load(named).is_err());
}
