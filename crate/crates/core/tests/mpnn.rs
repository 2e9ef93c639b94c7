mod common;

use canon_gnn::mpnn::{
    load_checkpoint, prepare_inputs, save_checkpoint, train, MpnnConfig, MpnnModel, Readout, Split, TrainOptions,
};
use canon_gnn::{csl_benchmark, PeKind};
use common::{gradient_check, labelled_batch, permutation_gap};
use rand::Rng;

#[test]
fn gradients_match_finite_differences() {
    for (seed, w_diag) in [(1, false), (2, true)] {
        let c = gradient_check(seed, 200, w_diag);
        assert_eq!(c.groups_covered, c.groups_total);
        assert!(c.max_rel_error < 1e-4, "{c:?}");
    }
}

#[test]
fn embeddings_ignore_node_order() {
    for readout in [Readout::Sum, Readout::Mean, Readout::UgcWeighted] {
        for seed in 0..25 {
            let gap = permutation_gap(seed, readout);
            assert!(gap <= 1e-9, "{readout:?} seed {seed}: {gap:e}");
        }
    }
}

#[test]
fn phi_respects_its_lipschitz_bound() {
    let mut rng = common::rng(4);
    let mut model = MpnnModel::new(MpnnConfig::new(6, 2).with_hidden_dim(10).with_seed(9)).unwrap();
    for name in ["layer0.b1", "layer0.b2", "layer1.b1"] {
        for v in model.params_mut().group_mut(name).unwrap() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    for layer in 0..3 {
        let bound = model.phi_lipschitz_bound(layer).unwrap();
        let width = if layer == 0 { 6 } else { 10 };
        for _ in 0..300 {
            let x: Vec<f64> = (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
            let (fx, fy) = (model.phi(layer, &x).unwrap(), model.phi(layer, &y).unwrap());
            let num = fx.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(num / den <= bound, "layer {layer}: {} > {bound}", num / den);
        }
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let d = labelled_batch(3, 3, 10);
    let data = prepare_inputs(&d, PeKind::Ugc, Readout::UgcWeighted, None).unwrap();
    let mut model = MpnnModel::new(
        MpnnConfig::new(data.input_width(), 3)
            .with_readout(Readout::UgcWeighted)
            .with_seed(5),
    )
    .unwrap();
    model.ensure_readout_ranks(1..=10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.digest(), model.digest());
    for x in &data.inputs {
        assert_eq!(back.forward(x).unwrap(), model.forward(x).unwrap());
    }
}

#[test]
fn training_is_deterministic() {
    let d = csl_benchmark(13, &[2, 3, 5], 4, 1).unwrap();
    let data = prepare_inputs(&d, PeKind::Gc, Readout::Mean, None).unwrap();
    let ids = data.ids();
    let split = Split {
        train_ids: ids.iter().step_by(2).cloned().collect(),
        test_ids: ids.iter().skip(1).step_by(2).cloned().collect(),
    };
    let cfg = MpnnConfig::new(data.input_width(), data.num_classes)
        .with_readout(Readout::Mean)
        .with_hidden_dim(8)
        .with_seed(2);
    let opts = TrainOptions {
        max_epochs: 30,
        ..TrainOptions::default()
    };
    let (_, a) = train(&cfg, &opts, &data, &split).unwrap();
    let (_, b) = train(&cfg, &opts, &data, &split).unwrap();
    assert_eq!(a, b);
    assert!(a.epochs.iter().all(|e| e.loss.is_finite() && (0.0..=1.0).contains(&e.test_accuracy)));
}

#[test]
fn gc_features_learn_csl_classes() {
    let d = csl_benchmark(17, &[2, 3, 4], 5, 0).unwrap();
    let data = prepare_inputs(&d, PeKind::Gc, Readout::Mean, None).unwrap();
    let ids = data.ids();
    let split = Split {
        train_ids: ids.clone(),
        test_ids: ids,
    };
    let cfg = MpnnConfig::new(data.input_width(), data.num_classes)
        .with_readout(Readout::Mean)
        .with_hidden_dim(16)
        .with_seed(0);
    let (_, r) = train(&cfg, &TrainOptions::default(), &data, &split).unwrap();
    assert_eq!(r.train_accuracy, 1.0, "{:?}", r.epochs.last());
}
