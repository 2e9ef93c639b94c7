//! Graph alignment distance
//! `d(G1, G2) = min_π ‖A1 − P A2 Pᵀ‖_F + #{i : c1(i) ≠ c2(π(i))}`
//! for graphs of equal size.
//!
//! For 0/1 symmetric adjacency the Frobenius term equals `sqrt(2m)` where
//! `m` counts mismatched unordered node pairs.

use serde::Serialize;

use crate::canon::{refine_lists, Colouring};
use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, Permutation};
use crate::mpnn::{ModelInput, MpnnModel};

/// Largest node count accepted by [`DistanceMode::Exact`].
pub const EXACT_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    /// `π*`: node `i` of the first graph is matched to node `π*(i)` of the second.
    pub permutation: Permutation,
    pub distance: f64,
    pub edge_mismatches: usize,
    pub color_mismatches: usize,
    pub exact: bool,
    pub nodes_explored: u64,
}

fn cost(edge_mismatches: usize, color_mismatches: usize) -> f64 {
    ((2 * edge_mismatches) as f64).sqrt() + color_mismatches as f64
}

/// Mismatched unordered pairs and mismatched colors under `p`.
pub fn alignment_cost(g1: &ColoredGraph, g2: &ColoredGraph, p: &Permutation) -> Result<(usize, usize)> {
    check_sizes(g1, g2)?;
    if p.len() != g1.n() {
        return Err(Error::dim("alignment permutation has the wrong length"));
    }
    let n = g1.n();
    let mut edges = 0;
    for i in 0..n {
        for j in i + 1..n {
            if g1.has_edge(i, j) != g2.has_edge(p.apply(i), p.apply(j)) {
                edges += 1;
            }
        }
    }
    let colors = (0..n).filter(|&i| g1.color(i) != g2.color(p.apply(i))).count();
    Ok((edges, colors))
}

/// Distance value of the alignment `p`; an upper bound on `d(g1, g2)`.
pub fn alignment_distance(g1: &ColoredGraph, g2: &ColoredGraph, p: &Permutation) -> Result<f64> {
    let (e, c) = alignment_cost(g1, g2, p)?;
    Ok(cost(e, c))
}

fn check_sizes(g1: &ColoredGraph, g2: &ColoredGraph) -> Result<()> {
    if g1.n() != g2.n() {
        return Err(Error::dim(format!(
            "graph distance needs equal sizes, got {} and {} nodes",
            g1.n(),
            g2.n()
        )));
    }
    Ok(())
}

pub fn graph_distance(g1: &ColoredGraph, g2: &ColoredGraph, mode: DistanceMode) -> Result<AlignmentResult> {
    check_sizes(g1, g2)?;
    match mode {
        DistanceMode::Heuristic => Ok(heuristic(g1, g2)),
        DistanceMode::Exact => {
            if g1.n() > EXACT_LIMIT {
                return Err(Error::Size {
                    what: "exact graph distance",
                    n: g1.n(),
                    limit: EXACT_LIMIT,
                    hint: "use heuristic mode for an upper bound",
                });
            }
            Ok(branch_and_bound(g1, g2))
        }
    }
}

/// Certified distance for a pair that differs only in the color of one node,
/// where both graphs have pairwise distinct colors. Any other alignment moves
/// at least two nodes onto differently colored nodes, so the identity with
/// value 1 is optimal. Returns `None` when the premises do not hold.
pub fn single_recolor_distance(g1: &ColoredGraph, g2: &ColoredGraph) -> Option<AlignmentResult> {
    if g1.n() != g2.n() || g1.edges().ne(g2.edges()) {
        return None;
    }
    let distinct = |g: &ColoredGraph| {
        let mut c = g.colors().to_vec();
        c.sort_unstable();
        c.windows(2).all(|w| w[0] != w[1])
    };
    let diff = (0..g1.n()).filter(|&v| g1.color(v) != g2.color(v)).count();
    if diff != 1 || !distinct(g1) || !distinct(g2) {
        return None;
    }
    Some(AlignmentResult {
        permutation: Permutation::identity(g1.n()),
        distance: 1.0,
        edge_mismatches: 0,
        color_mismatches: 1,
        exact: true,
        nodes_explored: 0,
    })
}

/// Joint color compression so both graphs share color indices.
fn shared_color_ids(g1: &ColoredGraph, g2: &ColoredGraph) -> (Vec<usize>, Vec<usize>, usize) {
    let mut all: Vec<u32> = g1.colors().iter().chain(g2.colors()).copied().collect();
    all.sort_unstable();
    all.dedup();
    let id = |c: &u32| all.binary_search(c).expect("present");
    (
        g1.colors().iter().map(id).collect(),
        g2.colors().iter().map(id).collect(),
        all.len(),
    )
}

struct Bnb<'a> {
    g1: &'a ColoredGraph,
    g2: &'a ColoredGraph,
    order: Vec<usize>,
    c1: Vec<usize>,
    c2: Vec<usize>,
    rem1: Vec<usize>,
    rem2: Vec<usize>,
    assign: Vec<usize>,
    used: Vec<bool>,
    best_cost: f64,
    best: Vec<usize>,
    explored: u64,
}

impl Bnb<'_> {
    fn color_bound(&self, remaining: usize) -> usize {
        let matched: usize = self.rem1.iter().zip(&self.rem2).map(|(a, b)| a.min(b)).sum();
        remaining - matched
    }

    fn search(&mut self, depth: usize, edges: usize, colors: usize) {
        self.explored += 1;
        let n = self.order.len();
        if depth == n {
            let c = cost(edges, colors);
            if c < self.best_cost - 1e-12 {
                self.best_cost = c;
                self.best = self.assign.clone();
            }
            return;
        }
        let i = self.order[depth];
        for j in 0..n {
            if self.used[j] {
                continue;
            }
            let mut de = 0;
            for &ip in &self.order[..depth] {
                if self.g1.has_edge(i, ip) != self.g2.has_edge(j, self.assign[ip]) {
                    de += 1;
                }
            }
            let dc = usize::from(self.c1[i] != self.c2[j]);
            self.rem1[self.c1[i]] -= 1;
            self.rem2[self.c2[j]] -= 1;
            let lb = cost(edges + de, colors + dc) + self.color_bound(n - depth - 1) as f64;
            if lb < self.best_cost - 1e-12 {
                self.used[j] = true;
                self.assign[i] = j;
                self.search(depth + 1, edges + de, colors + dc);
                self.used[j] = false;
            }
            self.rem1[self.c1[i]] += 1;
            self.rem2[self.c2[j]] += 1;
        }
    }
}

fn branch_and_bound(g1: &ColoredGraph, g2: &ColoredGraph) -> AlignmentResult {
    let n = g1.n();
    let start = heuristic(g1, g2);
    let (c1, c2, k) = shared_color_ids(g1, g2);
    let mut rem1 = vec![0; k];
    let mut rem2 = vec![0; k];
    for (&a, &b) in c1.iter().zip(&c2) {
        rem1[a] += 1;
        rem2[b] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(g1.degree(v)));
    let mut bnb = Bnb {
        g1,
        g2,
        order,
        c1,
        c2,
        rem1,
        rem2,
        assign: vec![usize::MAX; n],
        used: vec![false; n],
        best_cost: start.distance,
        best: start.permutation.as_slice().to_vec(),
        explored: 0,
    };
    bnb.search(0, 0, 0);
    let permutation = Permutation::new(bnb.best).expect("search yields a bijection");
    let (e, c) = alignment_cost(g1, g2, &permutation).expect("sizes checked");
    AlignmentResult {
        permutation,
        distance: cost(e, c),
        edge_mismatches: e,
        color_mismatches: c,
        exact: true,
        nodes_explored: bnb.explored + start.nodes_explored,
    }
}

/// Refinement-guided greedy matching followed by pairwise-swap descent.
fn heuristic(g1: &ColoredGraph, g2: &ColoredGraph) -> AlignmentResult {
    let n = g1.n();
    let union = g1.disjoint_union(g2, "union").expect("valid graphs");
    let (refined, _) = refine_lists(&union.adjacency_lists(), &Colouring::of_graph(&union));
    let r1 = &refined.colors()[..n];
    let r2 = &refined.colors()[n..];

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (r1[v], v));
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut explored = 0u64;
    for (depth, &i) in order.iter().enumerate() {
        let mut best: Option<(usize, usize, usize)> = None;
        for j in (0..n).filter(|&j| !used[j]) {
            explored += 1;
            let edges = order[..depth]
                .iter()
                .filter(|&&ip| g1.has_edge(i, ip) != g2.has_edge(j, assign[ip]))
                .count();
            let colors = usize::from(g1.color(i) != g2.color(j));
            let refined_miss = usize::from(r1[i] != r2[j]);
            let key = (edges + colors, refined_miss, j);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let j = best.expect("a free node remains").2;
        used[j] = true;
        assign[i] = j;
    }

    let (mut edges, mut colors) = {
        let p = Permutation::new(assign.clone()).expect("bijection");
        alignment_cost(g1, g2, &p).expect("sizes checked")
    };
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n {
            for k in i + 1..n {
                explored += 1;
                let (de, dc) = swap_delta(g1, g2, &assign, i, k);
                let ne = edges as isize + de;
                let nc = colors as isize + dc;
                if cost(ne as usize, nc as usize) < cost(edges, colors) - 1e-12 {
                    assign.swap(i, k);
                    edges = ne as usize;
                    colors = nc as usize;
                    improved = true;
                }
            }
        }
    }
    let permutation = Permutation::new(assign).expect("bijection");
    AlignmentResult {
        permutation,
        distance: cost(edges, colors),
        edge_mismatches: edges,
        color_mismatches: colors,
        exact: false,
        nodes_explored: explored,
    }
}

/// Change in (edge mismatches, color mismatches) when nodes `i` and `k`
/// exchange their images.
fn swap_delta(g1: &ColoredGraph, g2: &ColoredGraph, assign: &[usize], i: usize, k: usize) -> (isize, isize) {
    let (pi, pk) = (assign[i], assign[k]);
    let mut de = 0isize;
    for x in 0..assign.len() {
        if x == i || x == k {
            continue;
        }
        let px = assign[x];
        let before_i = g1.has_edge(i, x) != g2.has_edge(pi, px);
        let after_i = g1.has_edge(i, x) != g2.has_edge(pk, px);
        let before_k = g1.has_edge(k, x) != g2.has_edge(pk, px);
        let after_k = g1.has_edge(k, x) != g2.has_edge(pi, px);
        de += after_i as isize - before_i as isize + after_k as isize - before_k as isize;
    }
    let before = (g1.color(i) != g2.color(pi)) as isize + (g1.color(k) != g2.color(pk)) as isize;
    let after = (g1.color(i) != g2.color(pk)) as isize + (g1.color(k) != g2.color(pi)) as isize;
    (de, after - before)
}

/// `‖g(A1, X1) − g(A2, X2)‖₂`, the distance used, and their ratio.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityMeasurement {
    pub embedding_gap: f64,
    pub alignment: AlignmentResult,
    /// `None` when the graphs are at distance 0.
    pub ratio: Option<f64>,
}

/// Tolerance below which embeddings of isomorphic inputs count as equal.
pub const ISOMORPHISM_GAP_TOLERANCE: f64 = 1e-9;

/// Empirical lower bound `‖Δg‖₂ / d(G1, G2)` on any stability constant of
/// `model`. Uses the exact distance up to [`EXACT_LIMIT`] nodes and the
/// heuristic upper bound beyond, which keeps the ratio a valid lower bound.
pub fn stability_ratio(
    model: &MpnnModel,
    g1: &ColoredGraph,
    x1: &ModelInput,
    g2: &ColoredGraph,
    x2: &ModelInput,
) -> Result<StabilityMeasurement> {
    let mode = if g1.n() <= EXACT_LIMIT {
        DistanceMode::Exact
    } else {
        DistanceMode::Heuristic
    };
    let alignment = graph_distance(g1, g2, mode)?;
    let e1 = model.forward(x1)?.embedding;
    let e2 = model.forward(x2)?.embedding;
    let gap = e1
        .iter()
        .zip(&e2)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if alignment.distance == 0.0 {
        if gap > ISOMORPHISM_GAP_TOLERANCE {
            return Err(Error::IsomorphismViolation { gap });
        }
        return Ok(StabilityMeasurement {
            embedding_gap: gap,
            alignment,
            ratio: None,
        });
    }
    Ok(StabilityMeasurement {
        embedding_gap: gap,
        ratio: Some(gap / alignment.distance),
        alignment,
    })
}
