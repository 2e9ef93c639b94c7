//! Independent oracles and generators shared by the integration suites and
//! the acceptance harness. Nothing here calls the search code under test.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use canon_gnn::features::one_hot_colors;
use canon_gnn::graph::Target;
use canon_gnn::mpnn::{prepare_inputs, ModelInput, MpnnConfig, MpnnModel, Readout};
use canon_gnn::ugc::ugc_encoding;
use canon_gnn::{
    apply_permutation, build_universe, concat_features, ColoredGraph, GraphDataset, LabelUniverse, PeKind,
    Permutation,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) with colors drawn uniformly from `0..num_colors`.
pub fn random_graph<R: Rng>(rng: &mut R, id: &str, n: usize, p: f64, num_colors: u32) -> ColoredGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let colors = (0..n).map(|_| rng.gen_range(0..num_colors.max(1))).collect();
    ColoredGraph::new(id, n, &edges, colors).unwrap()
}

/// A random graph with a random size, density and palette.
pub fn any_graph<R: Rng>(rng: &mut R, id: &str, max_n: usize) -> ColoredGraph {
    let n = rng.gen_range(1..=max_n);
    let p = rng.gen_range(0.0..=1.0);
    let k = rng.gen_range(1..=3);
    random_graph(rng, id, n, p, k)
}

/// Every permutation of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Mismatched node pairs and colors when node `i` of `g1` is placed on
/// `p[i]` of `g2`.
pub fn mismatches(g1: &ColoredGraph, g2: &ColoredGraph, p: &[usize]) -> (usize, usize) {
    let n = g1.n();
    let mut edges = 0;
    for i in 0..n {
        for j in i + 1..n {
            if g1.has_edge(i, j) != g2.has_edge(p[i], p[j]) {
                edges += 1;
            }
        }
    }
    let colors = (0..n).filter(|&i| g1.color(i) != g2.color(p[i])).count();
    (edges, colors)
}

pub fn cost(g1: &ColoredGraph, g2: &ColoredGraph, p: &[usize]) -> f64 {
    let (e, c) = mismatches(g1, g2, p);
    (2.0 * e as f64).sqrt() + c as f64
}

/// Exhaustive isomorphism test.
pub fn brute_isomorphic(g1: &ColoredGraph, g2: &ColoredGraph) -> bool {
    g1.n() == g2.n() && permutations(g1.n()).iter().any(|p| mismatches(g1, g2, p) == (0, 0))
}

/// Exhaustive minimum alignment distance.
pub fn brute_distance(g1: &ColoredGraph, g2: &ColoredGraph) -> f64 {
    permutations(g1.n())
        .iter()
        .map(|p| cost(g1, g2, p))
        .fold(f64::INFINITY, f64::min)
}

pub fn label(i: usize) -> String {
    format!("gene{i:03}")
}

/// Gene-network style data: one hidden master graph on `universe` labels,
/// each dataset graph an induced subgraph on a random label subset with
/// its nodes shuffled. Edge-consistent by construction.
pub fn gene_dataset(seed: u64, graphs: usize, universe: usize) -> GraphDataset {
    let mut rng = rng(seed);
    let mut master = vec![vec![false; universe]; universe];
    for a in 0..universe {
        for b in a + 1..universe {
            let e = rng.gen_bool(0.06);
            master[a][b] = e;
            master[b][a] = e;
        }
    }
    let all: Vec<usize> = (0..universe).collect();
    let out = (0..graphs)
        .map(|gi| {
            let size = rng.gen_range(universe / 8..=universe / 4);
            let mut chosen: Vec<usize> = all.choose_multiple(&mut rng, size).copied().collect();
            chosen.shuffle(&mut rng);
            let mut edges = Vec::new();
            for (i, &a) in chosen.iter().enumerate() {
                for (j, &b) in chosen.iter().enumerate().skip(i + 1) {
                    if master[a][b] {
                        edges.push((i, j));
                    }
                }
            }
            let colors = chosen.iter().map(|&a| (a % 3) as u32).collect();
            ColoredGraph::new(format!("sample{gi:02}"), size, &edges, colors)
                .unwrap()
                .with_labels(chosen.iter().map(|&a| label(a)).collect())
                .unwrap()
                .with_target(Some(Target::Class((gi % 2) as i64)))
        })
        .collect();
    let d = GraphDataset::new(out).unwrap();
    d.with_label_universe((0..universe).map(label).collect()).unwrap()
}

/// The flip injected into one graph of a consistent dataset.
#[derive(Debug, Clone)]
pub struct Injected {
    pub graph_id: String,
    pub labels: BTreeSet<String>,
    pub now_present: bool,
}

/// Toggles one node pair in one graph, choosing a pair whose labels occur
/// together in at least three graphs so the other graphs form a clear
/// majority.
pub fn inject_flip(d: &GraphDataset, seed: u64) -> (GraphDataset, Injected) {
    let mut rng = rng(seed);
    let mut holders: HashMap<(String, String), Vec<usize>> = HashMap::new();
    for (gi, g) in d.graphs().iter().enumerate() {
        let labels = g.labels().unwrap();
        for a in 0..g.n() {
            for b in a + 1..g.n() {
                let (x, y) = (labels[a].clone(), labels[b].clone());
                let key = if x < y { (x, y) } else { (y, x) };
                holders.entry(key).or_default().push(gi);
            }
        }
    }
    let mut shared: Vec<_> = holders.into_iter().filter(|(_, gs)| gs.len() >= 3).collect();
    shared.sort();
    let ((la, lb), gs) = shared.choose(&mut rng).expect("some label pair is shared by three graphs").clone();
    let target = *gs.choose(&mut rng).unwrap();
    let mut graphs = d.graphs().to_vec();
    let g = &graphs[target];
    let labels = g.labels().unwrap();
    let a = labels.iter().position(|l| *l == la).unwrap();
    let b = labels.iter().position(|l| *l == lb).unwrap();
    let now_present = !g.has_edge(a, b);
    graphs[target] = g.with_edge(a, b, now_present).unwrap();
    let inj = Injected {
        graph_id: graphs[target].id().to_owned(),
        labels: [la, lb].into_iter().collect(),
        now_present,
    };
    let out = GraphDataset::new(graphs)
        .unwrap()
        .with_label_universe(d.label_universe().unwrap().to_vec())
        .unwrap();
    (out, inj)
}

/// Small labelled graphs with class targets, for gradient and invariance checks.
pub fn labelled_batch(seed: u64, graphs: usize, labels: usize) -> GraphDataset {
    let mut rng = rng(seed);
    let pool: Vec<String> = (0..labels).map(label).collect();
    let out = (0..graphs)
        .map(|gi| {
            let n = rng.gen_range(3..=7);
            let g = random_graph(&mut rng, &format!("g{gi}"), n, 0.5, 3);
            let names: Vec<String> = pool.choose_multiple(&mut rng, n).cloned().collect();
            g.with_labels(names).unwrap().with_target(Some(Target::Class((gi % 3) as i64)))
        })
        .collect();
    GraphDataset::new(out).unwrap()
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
    pub groups_covered: usize,
    pub groups_total: usize,
    /// Parameter draws rejected because `±h` moved a rectifier across its kink.
    pub resampled: usize,
}

pub const FD_STEP: f64 = 1e-4;

/// Central-difference check of `count` parameters of a UGC-readout model.
/// Every group gets at least one draw; the rest are uniform over all values.
/// Relative error is `|a − f| / max(|a|, |f|, 1e-6)`, the floor keeping
/// exactly-zero gradients from dividing by zero.
pub fn gradient_check(seed: u64, count: usize, w_diag: bool) -> GradCheck {
    let mut rng = rng(seed);
    let d = labelled_batch(seed, 4, 12);
    let data = prepare_inputs(&d, PeKind::Ugc, Readout::UgcWeighted, None).unwrap();
    let mut cfg = MpnnConfig::new(data.input_width(), 3)
        .with_layers(2)
        .with_hidden_dim(5)
        .with_readout(Readout::UgcWeighted)
        .with_seed(seed);
    cfg.epsilon = vec![0.1, -0.2];
    cfg.w_diag = w_diag;
    let mut model = MpnnModel::new(cfg).unwrap();
    let ranks: BTreeSet<usize> = data
        .inputs
        .iter()
        .flat_map(|x| x.colouring().unwrap().ranks().to_vec())
        .collect();
    model.ensure_readout_ranks(ranks);
    let names: Vec<String> = model.params().groups().into_iter().map(|(n, _)| n).collect();
    for name in &names {
        let is_weight = name.contains(".w");
        for v in model.params_mut().group_mut(name).unwrap() {
            *v += if is_weight { rng.gen_range(-0.3..0.3) } else { rng.gen_range(-0.5..0.5) };
        }
    }

    let batch = &data.inputs;
    let (_, grads) = model.loss_and_gradients(batch).unwrap();
    let patterns = |m: &MpnnModel| -> Vec<Vec<bool>> {
        batch.iter().map(|x| m.forward_cached(x).unwrap().activation_pattern()).collect()
    };
    let base = patterns(&model);

    let sizes: Vec<usize> = names.iter().map(|n| grads.group(n).unwrap().len()).collect();
    let total: usize = sizes.iter().sum();
    let mut check = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
        groups_covered: 0,
        groups_total: names.len(),
        resampled: 0,
    };
    let mut covered = vec![false; names.len()];
    let mut draws = 0;
    while check.checked < count {
        draws += 1;
        assert!(draws < 50 * count, "too many kink rejections");
        let (gi, idx) = if check.checked < names.len() && !covered[check.checked] {
            let g = check.checked;
            (g, rng.gen_range(0..sizes[g]))
        } else {
            let mut flat = rng.gen_range(0..total);
            let mut g = 0;
            while flat >= sizes[g] {
                flat -= sizes[g];
                g += 1;
            }
            (g, flat)
        };
        let name = &names[gi];
        let original = model.params().group(name).unwrap()[idx];
        let mut at = |v: f64| {
            model.params_mut().group_mut(name).unwrap()[idx] = v;
            let out = (model.loss(batch).unwrap(), patterns(&model));
            model.params_mut().group_mut(name).unwrap()[idx] = original;
            out
        };
        let (lp, pp) = at(original + FD_STEP);
        let (lm, pm) = at(original - FD_STEP);
        if pp != base || pm != base {
            check.resampled += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let analytic = grads.group(name).unwrap()[idx];
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if err > check.max_rel_error {
            check.max_rel_error = err;
            check.worst = format!("{name}[{idx}]: analytic {analytic:e}, numeric {numeric:e}");
        }
        covered[gi] = true;
        check.checked += 1;
    }
    check.groups_covered = covered.iter().filter(|&&c| c).count();
    check
}

/// Features `X ⊕ UGC` and the UGC colouring for `g`.
pub fn ugc_input(g: &ColoredGraph, u: &LabelUniverse, color_width: usize) -> ModelInput {
    let tau = canon_gnn::ugc::ugc_colouring(g, u).unwrap();
    let x = concat_features(&one_hot_colors(g, color_width).unwrap(), &ugc_encoding(g, u, u.len()).unwrap()).unwrap();
    ModelInput::new(g, &x, Some(&tau)).unwrap()
}

/// Largest embedding difference between `g` and a random relabelling of it,
/// with features and colouring recomputed from the relabelled graph.
pub fn permutation_gap(seed: u64, readout: Readout) -> f64 {
    let mut rng = rng(seed);
    let d = labelled_batch(seed, 1, 16);
    let g = &d.graphs()[0];
    let u = build_universe(&d).unwrap();
    let p = Permutation::random(g.n(), &mut rng);
    let h = apply_permutation(g, &p).unwrap();
    let cfg = MpnnConfig::new(3 + u.len(), 2)
        .with_layers(rng.gen_range(1..=3))
        .with_hidden_dim(8)
        .with_readout(readout)
        .with_seed(rng.gen());
    let mut model = MpnnModel::new(cfg).unwrap();
    model.ensure_readout_ranks(1..=u.len());
    for name in model.params().groups().into_iter().map(|(n, _)| n).collect::<Vec<_>>() {
        for v in model.params_mut().group_mut(&name).unwrap() {
            *v += rng.gen_range(-0.2..0.2);
        }
    }
    let a = model.forward(&ugc_input(g, &u, 3)).unwrap().embedding;
    let b = model.forward(&ugc_input(&h, &u, 3)).unwrap().embedding;
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
