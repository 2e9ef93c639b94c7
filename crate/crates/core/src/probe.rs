//! Stability probes: the single-recolor counterexample family, positional
//! rank divergence, and embedding-gap ratios under GC and UGC encodings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::{canonical_form, is_rigid};
use crate::dataset::GraphDataset;
use crate::distance::{graph_distance, single_recolor_distance, AlignmentResult, DistanceMode, EXACT_LIMIT};
use crate::error::{Error, Result};
use crate::features::{concat_features, one_hot_colors, one_hot_ranks};
use crate::graph::{ColoredGraph, DiscreteColouring};
use crate::mpnn::{ModelInput, MpnnConfig, MpnnModel, Readout};
use crate::ugc::{build_universe, ugc_colouring, LabelUniverse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    RecolorNode { node: usize, color: u32 },
    RewireEdge { u: usize, v: usize, present: bool },
}

pub fn apply_perturbation(g: &ColoredGraph, p: &PerturbationSpec) -> Result<ColoredGraph> {
    match *p {
        PerturbationSpec::RecolorNode { node, color } => {
            if node >= g.n() {
                return Err(Error::Parameter(format!("node {node} outside graph of {} nodes", g.n())));
            }
            if g.color(node) == color {
                return Err(Error::Parameter(format!("node {node} already has color {color}")));
            }
            g.with_color(node, color)
        }
        PerturbationSpec::RewireEdge { u, v, present } => {
            if u >= g.n() || v >= g.n() || u == v {
                return Err(Error::Parameter(format!("({u}, {v}) is not a node pair of this graph")));
            }
            if g.has_edge(u, v) == present {
                return Err(Error::Parameter(format!(
                    "edge ({u}, {v}) is already {}",
                    if present { "present" } else { "absent" }
                )));
            }
            g.with_edge(u, v, present)
        }
    }
}

/// Number of `nodes` whose rank differs between two colourings of the same node set.
pub fn rank_divergence(a: &DiscreteColouring, b: &DiscreteColouring, nodes: impl IntoIterator<Item = usize>) -> usize {
    nodes.into_iter().filter(|&v| a.rank(v) != b.rank(v)).count()
}

/// Node labels `v00, v01, …` used by the probe family.
pub fn node_label(v: usize) -> String {
    format!("v{v:02}")
}

/// A counterexample pair and the facts checked while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub g1: ColoredGraph,
    pub g2: ColoredGraph,
    /// Samples drawn before one satisfied every premise.
    pub attempts: usize,
}

pub const COUNTEREXAMPLE_BUDGET: usize = 1000;

/// Expected degree of the random graphs in the counterexample family. A
/// fixed degree keeps the neighbourhood of the recolored node comparable
/// across sizes.
pub const PROBE_EXPECTED_DEGREE: f64 = 3.0;

/// Draws a graph with distinct colors `1..=n` where the last node `v_n` holds
/// the largest color, checks rigidity, and recolors `v_n` to `0`. Every
/// returned pair has been checked to satisfy `ρ(v_n|g1) = n`, `ρ(v_n|g2) = 1`
/// and `ρ(v_i|g2) = ρ(v_i|g1) + 1` for `i < n`: moving `v_n` from last to
/// first pushes every other node back by one.
pub fn gen_counterexample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Counterexample> {
    if n < 4 {
        return Err(Error::Parameter(format!("counterexample needs n >= 4, got {n}")));
    }
    let p = (PROBE_EXPECTED_DEGREE / (n - 1) as f64).min(1.0);
    let labels: Vec<String> = (0..n).map(node_label).collect();
    for attempt in 1..=COUNTEREXAMPLE_BUDGET {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let mut colors: Vec<u32> = (1..n as u32).collect();
        colors.shuffle(rng);
        colors.push(n as u32);
        let g1 = ColoredGraph::new(format!("cx{n}-g1"), n, &edges, colors)?.with_labels(labels.clone())?;
        if !is_rigid(&g1) {
            continue;
        }
        let g2 = g1.with_color(n - 1, 0)?.with_id(format!("cx{n}-g2"));
        if !is_rigid(&g2) {
            continue;
        }
        let r1 = canonical_form(&g1)?.colouring;
        let r2 = canonical_form(&g2)?.colouring;
        let shifted = (0..n - 1).all(|i| r2.rank(i) == r1.rank(i) + 1);
        if !(shifted && r1.rank(n - 1) == n && r2.rank(n - 1) == 1) {
            return Err(Error::Generation(format!(
                "rank shift failed on a rigid sample of size {n} (attempt {attempt})"
            )));
        }
        return Ok(Counterexample { g1, g2, attempts: attempt });
    }
    Err(Error::Generation(format!(
        "no rigid sample of size {n} within {COUNTEREXAMPLE_BUDGET} attempts"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSource {
    /// Branch-and-bound minimum.
    Exact,
    /// Single recolor on distinct colors: identity alignment, value 1.
    SingleRecolor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub n: usize,
    pub trial: usize,
    pub d_graphs: AlignmentResult,
    pub distance_source: DistanceSource,
    /// Nodes (all `n`) whose GC rank changed.
    pub pe_divergence_gc: usize,
    /// Nodes other than the recolored one whose GC rank changed.
    pub pe_divergence_gc_untouched: usize,
    /// Nodes other than the recolored one whose UGC rank changed.
    pub pe_divergence_ugc: usize,
    pub embedding_gap_gc: f64,
    pub embedding_gap_ugc: f64,
    pub ratio_gc: f64,
    pub ratio_ugc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeAggregate {
    pub n: usize,
    pub trials: usize,
    pub max_ratio_gc: f64,
    pub max_ratio_ugc: f64,
    pub gc_changed_everywhere: bool,
    pub ugc_untouched_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub reports: Vec<DivergenceReport>,
    pub aggregates: Vec<SizeAggregate>,
}

impl ProbeReport {
    pub fn aggregate(&self, n: usize) -> Option<&SizeAggregate> {
        self.aggregates.iter().find(|a| a.n == n)
    }

    /// One row per trial for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,trial,d,distance_source,pe_divergence_gc,pe_divergence_gc_untouched,pe_divergence_ugc,embedding_gap_gc,embedding_gap_ugc,ratio_gc,ratio_ugc\n",
        );
        for r in &self.reports {
            let src = match r.distance_source {
                DistanceSource::Exact => "exact",
                DistanceSource::SingleRecolor => "single_recolor",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.trial,
                r.d_graphs.distance,
                src,
                r.pe_divergence_gc,
                r.pe_divergence_gc_untouched,
                r.pe_divergence_ugc,
                r.embedding_gap_gc,
                r.embedding_gap_ugc,
                r.ratio_gc,
                r.ratio_ugc
            ));
        }
        out
    }
}

pub const PROBE_LAYERS: usize = 2;
/// Wide enough that embedding-gap norms concentrate and per-size maxima are
/// not dominated by a few random coordinates.
pub const PROBE_HIDDEN_DIM: usize = 128;

/// The untrained model shared by every probe trial: sum readout, input
/// `colors(0..=max_n) ⊕ ranks(1..=max_n)`.
pub fn probe_model(max_n: usize, seed: u64) -> Result<MpnnModel> {
    let cfg = MpnnConfig::new(2 * max_n + 1, 2)
        .with_layers(PROBE_LAYERS)
        .with_hidden_dim(PROBE_HIDDEN_DIM)
        .with_readout(Readout::Sum)
        .with_seed(seed);
    MpnnModel::new(cfg)
}

fn embed(model: &MpnnModel, g: &ColoredGraph, pe: &DiscreteColouring, max_n: usize) -> Result<Vec<f64>> {
    let x = concat_features(&one_hot_colors(g, max_n + 1)?, &one_hot_ranks(pe, max_n)?)?;
    Ok(model.forward(&ModelInput::new(g, &x, None)?)?.embedding)
}

fn l2_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn trial_rng(seed: u64, n: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | trial as u64);
    rng
}

fn run_trial(model: &MpnnModel, max_n: usize, n: usize, trial: usize, seed: u64) -> Result<DivergenceReport> {
    let cx = gen_counterexample(n, &mut trial_rng(seed, n, trial))?;
    let (g1, g2) = (&cx.g1, &cx.g2);
    let (d_graphs, distance_source) = if n <= EXACT_LIMIT {
        (graph_distance(g1, g2, DistanceMode::Exact)?, DistanceSource::Exact)
    } else {
        let d = single_recolor_distance(g1, g2)
            .ok_or_else(|| Error::Generation("pair is not a single recolor".into()))?;
        (d, DistanceSource::SingleRecolor)
    };
    let universe = LabelUniverse::from_labels((0..max_n).map(node_label));
    let gc1 = canonical_form(g1)?.colouring;
    let gc2 = canonical_form(g2)?.colouring;
    let ugc1 = ugc_colouring(g1, &universe)?;
    let ugc2 = ugc_colouring(g2, &universe)?;
    let embedding_gap_gc = l2_gap(&embed(model, g1, &gc1, max_n)?, &embed(model, g2, &gc2, max_n)?);
    let embedding_gap_ugc = l2_gap(&embed(model, g1, &ugc1, max_n)?, &embed(model, g2, &ugc2, max_n)?);
    let d = d_graphs.distance;
    Ok(DivergenceReport {
        n,
        trial,
        distance_source,
        pe_divergence_gc: rank_divergence(&gc1, &gc2, 0..n),
        pe_divergence_gc_untouched: rank_divergence(&gc1, &gc2, 0..n - 1),
        pe_divergence_ugc: rank_divergence(&ugc1, &ugc2, 0..n - 1),
        embedding_gap_gc,
        embedding_gap_ugc,
        ratio_gc: embedding_gap_gc / d,
        ratio_ugc: embedding_gap_ugc / d,
        d_graphs,
    })
}

/// Runs `trials` counterexample pairs per size against one fixed model.
/// Trials run in parallel on independent seeded streams; results are
/// ordered by size, then trial.
pub fn run_probe(sizes: &[usize], trials: usize, seed: u64) -> Result<ProbeReport> {
    let max_n = sizes
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::Parameter("probe needs at least one size".into()))?;
    if trials == 0 {
        return Err(Error::Parameter("probe needs at least one trial".into()));
    }
    let model = probe_model(max_n, seed)?;
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(n, t)| run_trial(&model, max_n, n, t, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = Vec::new();
    let aggregates = sizes
        .iter()
        .filter(|n| {
            let fresh = !seen.contains(*n);
            seen.push(**n);
            fresh
        })
        .map(|&n| {
            let rs: Vec<&DivergenceReport> = reports.iter().filter(|r| r.n == n).collect();
            SizeAggregate {
                n,
                trials: rs.len(),
                max_ratio_gc: rs.iter().map(|r| r.ratio_gc).fold(0.0, f64::max),
                max_ratio_ugc: rs.iter().map(|r| r.ratio_ugc).fold(0.0, f64::max),
                gc_changed_everywhere: rs.iter().all(|r| r.pe_divergence_gc == n),
                ugc_untouched_stable: rs.iter().all(|r| r.pe_divergence_ugc == 0),
            }
        })
        .collect();
    Ok(ProbeReport { reports, aggregates })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairConsistency {
    pub graph1_id: String,
    pub graph2_id: String,
    pub shared_labels: usize,
    pub tau_mismatches: usize,
    pub gc_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub pairs_checked: usize,
    /// Pairs whose UGC ranks disagree on some shared label. Always 0.
    pub tau_inconsistent_pairs: usize,
    /// Pairs whose GC ranks disagree on some shared label.
    pub gc_inconsistent_pairs: usize,
    pub gc_inconsistency_rate: f64,
    pub pairs: Vec<PairConsistency>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.tau_inconsistent_pairs == 0
    }
}

/// Compares UGC and GC ranks on the nodes two graphs share by label.
pub fn pair_consistency(g1: &ColoredGraph, g2: &ColoredGraph, u: &LabelUniverse) -> Result<PairConsistency> {
    let l1 = g1.labels().ok_or_else(|| Error::Labeling(g1.id().to_owned()))?;
    let l2 = g2.labels().ok_or_else(|| Error::Labeling(g2.id().to_owned()))?;
    let (t1, t2) = (ugc_colouring(g1, u)?, ugc_colouring(g2, u)?);
    let (r1, r2) = (canonical_form(g1)?.colouring, canonical_form(g2)?.colouring);
    let mut shared = 0;
    let mut tau_mismatches = 0;
    let mut gc_mismatches = 0;
    for (v1, label) in l1.iter().enumerate() {
        if let Some(v2) = l2.iter().position(|l| l == label) {
            shared += 1;
            tau_mismatches += usize::from(t1.rank(v1) != t2.rank(v2));
            gc_mismatches += usize::from(r1.rank(v1) != r2.rank(v2));
        }
    }
    Ok(PairConsistency {
        graph1_id: g1.id().to_owned(),
        graph2_id: g2.id().to_owned(),
        shared_labels: shared,
        tau_mismatches,
        gc_mismatches,
    })
}

/// Samples up to `pairs` distinct graph pairs (all pairs when fewer exist).
pub fn subgraph_consistency_probe(d: &GraphDataset, pairs: usize, seed: u64) -> Result<ConsistencyReport> {
    let k = d.len();
    let mut all: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    if pairs < all.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(pairs);
        all.sort_unstable();
    }
    let results = if all.is_empty() {
        Vec::new()
    } else {
        let u = build_universe(d)?;
        all.par_iter()
            .map(|&(i, j)| pair_consistency(&d.graphs()[i], &d.graphs()[j], &u))
            .collect::<Result<Vec<_>>>()?
    };
    let tau_bad = results.iter().filter(|p| p.tau_mismatches > 0).count();
    let gc_bad = results.iter().filter(|p| p.gc_mismatches > 0).count();
    Ok(ConsistencyReport {
        pairs_checked: results.len(),
        tau_inconsistent_pairs: tau_bad,
        gc_inconsistent_pairs: gc_bad,
        gc_inconsistency_rate: if results.is_empty() { 0.0 } else { gc_bad as f64 / results.len() as f64 },
        pairs: results,
    })
}

/// Colors of the three-triangle fixture; `ORANGE < BLUE < YELLOW`.
pub const ORANGE: u32 = 0;
pub const BLUE: u32 = 1;
pub const YELLOW: u32 = 2;

/// Three triangles (top, left, bottom) joined by the edges `t1–l1`, `t2–b1`
/// and `l2–b2`. The top apex `t0` is yellow in the first graph and orange
/// in the second; the left and bottom triangles are untouched. This is our
/// reading of a figure that is only partly specified in text.
pub fn figure2_pair() -> (ColoredGraph, ColoredGraph) {
    let names = ["t0", "t1", "t2", "l0", "l1", "l2", "b0", "b1", "b2"];
    let colors = vec![YELLOW, BLUE, BLUE, ORANGE, BLUE, BLUE, ORANGE, BLUE, BLUE];
    let edges = [
        (0, 1),
        (0, 2),
        (1, 2),
        (3, 4),
        (3, 5),
        (4, 5),
        (6, 7),
        (6, 8),
        (7, 8),
        (1, 4),
        (2, 7),
        (5, 8),
    ];
    let labels = names.iter().map(|s| s.to_string()).collect();
    let g1 = ColoredGraph::new("fig2-g1", 9, &edges, colors)
        .and_then(|g| g.with_labels(labels))
        .expect("fixture is valid");
    let g2 = g1.with_color(0, ORANGE).expect("node exists").with_id("fig2-g2");
    (g1, g2)
}
