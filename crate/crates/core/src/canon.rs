//! Exact canonical labeling by color refinement and
//! individualization-refinement search.
//!
//! Refinement is collision-free: every round ranks the distinct signatures
//! `(current color, sorted multiset of neighbor colors)` lexicographically,
//! so the new color order always extends the previous one. The search
//! branches over every node of the target cell and keeps the leaf whose
//! [`Certificate`] is lexicographically smallest.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, DiscreteColouring};

/// Default node limit for exact canonization.
pub const DEFAULT_MAX_NODES: usize = 64;

/// An ordered partition of the nodes. Colors are dense: `0..num_cells()`,
/// and the cell order is the numeric order of the colors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Colouring {
    colors: Vec<u32>,
    num_cells: usize,
}

impl Colouring {
    /// Ranks arbitrary integer colors densely, keeping their order.
    pub fn from_colors(raw: &[u32]) -> Self {
        let mut distinct = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let colors = raw
            .iter()
            .map(|c| distinct.binary_search(c).expect("present") as u32)
            .collect();
        Colouring {
            colors,
            num_cells: distinct.len(),
        }
    }

    /// The colouring induced by a graph's own node colors.
    pub fn of_graph(g: &ColoredGraph) -> Self {
        Self::from_colors(g.colors())
    }

    pub fn unit(n: usize) -> Self {
        Colouring {
            colors: vec![0; n],
            num_cells: usize::from(n > 0),
        }
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> u32 {
        self.colors[v]
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn is_discrete(&self) -> bool {
        self.num_cells == self.colors.len()
    }

    /// Cells in color order, each listing its nodes in increasing index order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.num_cells];
        for (v, &c) in self.colors.iter().enumerate() {
            cells[c as usize].push(v);
        }
        cells
    }

    /// True if every cell of `self` lies inside a single cell of `coarser`.
    pub fn refines(&self, coarser: &Colouring) -> bool {
        if self.len() != coarser.len() {
            return false;
        }
        let mut parent = vec![u32::MAX; self.num_cells];
        for (v, &c) in self.colors.iter().enumerate() {
            let slot = &mut parent[c as usize];
            if *slot == u32::MAX {
                *slot = coarser.colors[v];
            } else if *slot != coarser.colors[v] {
                return false;
            }
        }
        true
    }

    /// Splits `v` off as a singleton placed first within its own cell; every
    /// later position shifts by one, so the order of existing cells is kept.
    fn individualize(&self, v: usize) -> Colouring {
        let cv = self.colors[v];
        let colors = self
            .colors
            .iter()
            .enumerate()
            .map(|(u, &c)| if u == v || c < cv { c } else { c + 1 })
            .collect();
        Colouring {
            colors,
            num_cells: self.num_cells + 1,
        }
    }

    /// 1-based ranks of a discrete colouring.
    pub fn to_discrete(&self) -> Option<DiscreteColouring> {
        if !self.is_discrete() {
            return None;
        }
        DiscreteColouring::gc(self.colors.iter().map(|&c| c as usize + 1).collect()).ok()
    }
}

/// One round of collision-free refinement over adjacency lists. Returns the
/// new colouring; the caller detects the fixpoint by comparing cell counts.
pub(crate) fn refine_round(adj: &[Vec<usize>], current: &Colouring) -> Colouring {
    let n = current.len();
    let signatures: Vec<Vec<u32>> = adj
        .iter()
        .map(|nbrs| {
            let mut s: Vec<u32> = nbrs.iter().map(|&u| current.colors[u]).collect();
            s.sort_unstable();
            s
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let cmp = |a: &usize, b: &usize| {
        current.colors[*a]
            .cmp(&current.colors[*b])
            .then_with(|| signatures[*a].cmp(&signatures[*b]))
    };
    order.sort_unstable_by(cmp);
    let mut colors = vec![0u32; n];
    let mut next = 0u32;
    for (i, &v) in order.iter().enumerate() {
        if i > 0 && cmp(&order[i - 1], &v) != Ordering::Equal {
            next += 1;
        }
        colors[v] = next;
    }
    Colouring {
        colors,
        num_cells: if n == 0 { 0 } else { next as usize + 1 },
    }
}

pub(crate) fn refine_lists(adj: &[Vec<usize>], start: &Colouring) -> (Colouring, usize) {
    let mut current = start.clone();
    let mut rounds = 0;
    loop {
        let next = refine_round(adj, &current);
        if next.num_cells == current.num_cells {
            return (next, rounds);
        }
        rounds += 1;
        current = next;
    }
}

/// Coarsest equitable colouring refining `start`.
///
/// The result refines `start`, and whenever `start` orders two nodes
/// `c(u) < c(v)` the output keeps `u` before `v`.
pub fn refine(g: &ColoredGraph, start: &Colouring) -> Result<Colouring> {
    if start.len() != g.n() {
        return Err(Error::dim(format!(
            "colouring of length {} for graph with {} nodes",
            start.len(),
            g.n()
        )));
    }
    Ok(refine_lists(&g.adjacency_lists(), start).0)
}

/// Canonical byte string of a graph under a node order.
///
/// Layout: `n` as u32 big-endian; then for each position `i` the adjacency
/// row of node `order[i]` over columns `order[0..n]`, packed MSB-first and
/// padded to a whole byte; then the color of each `order[i]` as u32
/// big-endian.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Certificate(Vec<u8>);

impl Certificate {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Certificate({})", self.to_hex())
    }
}

impl Serialize for Certificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

fn certificate_for_order(g: &ColoredGraph, order: &[usize]) -> Certificate {
    let n = order.len();
    let row_bytes = n.div_ceil(8);
    let mut bytes = Vec::with_capacity(4 + n * row_bytes + 4 * n);
    bytes.extend_from_slice(&(n as u32).to_be_bytes());
    for &u in order {
        let start = bytes.len();
        bytes.resize(start + row_bytes, 0);
        for (j, &v) in order.iter().enumerate() {
            if g.has_edge(u, v) {
                bytes[start + j / 8] |= 0x80 >> (j % 8);
            }
        }
    }
    for &u in order {
        bytes.extend_from_slice(&g.color(u).to_be_bytes());
    }
    Certificate(bytes)
}

/// Certificate of `g` with nodes listed in increasing rank of `c`.
pub fn certificate_for_colouring(g: &ColoredGraph, c: &DiscreteColouring) -> Result<Certificate> {
    if c.len() != g.n() {
        return Err(Error::dim("colouring length differs from node count"));
    }
    Ok(certificate_for_order(g, &c.node_order()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: usize,
    pub leaves: usize,
    pub twin_prunes: usize,
}

#[derive(Debug, Clone)]
pub struct CanonResult {
    /// `ρ(v)`: 1-based position of `v` in the canonical form.
    pub colouring: DiscreteColouring,
    pub certificate: Certificate,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Copy)]
pub struct CanonOptions {
    pub max_nodes: usize,
}

impl Default for CanonOptions {
    fn default() -> Self {
        CanonOptions {
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

struct Search<'a> {
    g: &'a ColoredGraph,
    adj: Vec<Vec<usize>>,
    best: Option<(Certificate, Colouring)>,
    stats: SearchStats,
}

impl Search<'_> {
    fn visit(&mut self, colouring: Colouring) {
        self.stats.nodes_expanded += 1;
        let (eq, _) = refine_lists(&self.adj, &colouring);
        if eq.is_discrete() {
            self.stats.leaves += 1;
            let mut order = vec![0; eq.len()];
            for (v, &c) in eq.colors.iter().enumerate() {
                order[c as usize] = v;
            }
            let cert = certificate_for_order(self.g, &order);
            if self.best.as_ref().is_none_or(|(b, _)| cert < *b) {
                self.best = Some((cert, eq));
            }
            return;
        }
        let cells = eq.cells();
        let target = cells
            .iter()
            .filter(|c| c.len() > 1)
            .min_by_key(|c| c.len())
            .expect("non-discrete colouring has a non-singleton cell");
        let mut branched: Vec<usize> = Vec::with_capacity(target.len());
        for &v in target {
            // Interchangeable twins give isomorphic subtrees with identical certificates.
            if branched.iter().any(|&u| self.twins(u, v)) {
                self.stats.twin_prunes += 1;
                continue;
            }
            branched.push(v);
            self.visit(eq.individualize(v));
        }
    }

    fn twins(&self, u: usize, v: usize) -> bool {
        let (a, b) = (&self.adj[u], &self.adj[v]);
        fn strip(row: &[usize], other: usize) -> impl Iterator<Item = usize> + '_ {
            row.iter().copied().filter(move |&x| x != other)
        }
        strip(a, v).eq(strip(b, u))
    }
}

pub fn canonical_form(g: &ColoredGraph) -> Result<CanonResult> {
    canonical_form_with(g, &CanonOptions::default())
}

pub fn canonical_form_with(g: &ColoredGraph, opts: &CanonOptions) -> Result<CanonResult> {
    if g.n() > opts.max_nodes {
        return Err(Error::Size {
            what: "exact canonization",
            n: g.n(),
            limit: opts.max_nodes,
            hint: "use the label-based universal canonization path for large graphs",
        });
    }
    let mut search = Search {
        g,
        adj: g.adjacency_lists(),
        best: None,
        stats: SearchStats::default(),
    };
    search.visit(Colouring::of_graph(g));
    let (certificate, leaf) = search.best.expect("search reaches at least one leaf");
    Ok(CanonResult {
        colouring: leaf.to_discrete().expect("leaf is discrete"),
        certificate,
        stats: search.stats,
    })
}

/// Sufficient test for a trivial automorphism group: refinement of the
/// graph's own colouring is already discrete. A `false` answer does not
/// prove that nontrivial automorphisms exist.
pub fn is_rigid(g: &ColoredGraph) -> bool {
    refine_lists(&g.adjacency_lists(), &Colouring::of_graph(g))
        .0
        .is_discrete()
}

pub fn isomorphic(g1: &ColoredGraph, g2: &ColoredGraph) -> Result<bool> {
    isomorphic_with(g1, g2, &CanonOptions::default())
}

pub fn isomorphic_with(g1: &ColoredGraph, g2: &ColoredGraph, opts: &CanonOptions) -> Result<bool> {
    let c1 = canonical_form_with(g1, opts)?;
    let c2 = canonical_form_with(g2, opts)?;
    Ok(c1.certificate == c2.certificate)
}
