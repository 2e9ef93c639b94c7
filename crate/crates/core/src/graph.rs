//! Colored graphs, node permutations and discrete colourings.
//!
//! Nodes are 0-indexed. Rank-valued colourings ([`DiscreteColouring`]) are
//! 1-indexed so that a graph on `n` nodes receives ranks `1..=n`.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-graph prediction target as stored in dataset files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Class(i64),
    Value(f64),
}

impl Target {
    pub fn as_class(&self) -> Option<usize> {
        match *self {
            Target::Class(c) if c >= 0 => Some(c as usize),
            _ => None,
        }
    }
}

/// A simple undirected graph with integer node colors and optional global
/// node labels.
///
/// Adjacency is stored as one bitset row per node. The relation is kept
/// symmetric and irreflexive by construction.
#[derive(Clone, PartialEq)]
pub struct ColoredGraph {
    id: String,
    n: usize,
    words: usize,
    adj: Vec<u64>,
    colors: Vec<u32>,
    labels: Option<Vec<String>>,
    target: Option<Target>,
}

impl fmt::Debug for ColoredGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ColoredGraph")
            .field("id", &self.id)
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .field("colors", &self.colors)
            .field("labels", &self.labels)
            .field("target", &self.target)
            .finish()
    }
}

impl ColoredGraph {
    pub fn new(
        id: impl Into<String>,
        n: usize,
        edges: &[(usize, usize)],
        colors: Vec<u32>,
    ) -> Result<Self> {
        let id = id.into();
        if n == 0 {
            return Err(Error::invalid_graph(&id, "graph must have at least one node"));
        }
        if colors.len() != n {
            return Err(Error::invalid_graph(
                &id,
                format!("{} colors given for {} nodes", colors.len(), n),
            ));
        }
        let words = n.div_ceil(64);
        let mut g = ColoredGraph {
            id,
            n,
            words,
            adj: vec![0; n * words],
            colors,
            labels: None,
            target: None,
        };
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid_graph(
                    &g.id,
                    format!("edge ({u}, {v}) references a node outside 0..{n}"),
                ));
            }
            if u == v {
                return Err(Error::invalid_graph(&g.id, format!("self-loop on node {u}")));
            }
            g.set_edge_unchecked(u, v, true);
        }
        Ok(g)
    }

    /// Graph with every node colored 0.
    pub fn uncolored(id: impl Into<String>, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(id, n, edges, vec![0; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::invalid_graph(
                &self.id,
                format!("{} labels given for {} nodes", labels.len(), self.n),
            ));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Validation(format!(
                    "graph `{}` uses label `{l}` on more than one node",
                    self.id
                )));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_target(mut self, target: Option<Target>) -> Self {
        self.target = target;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> u32 {
        self.colors[v]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn target(&self) -> Option<Target> {
        self.target
    }

    /// Directed graphs are not supported; the flag is always false.
    pub fn is_directed(&self) -> bool {
        false
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adj[v * self.words..(v + 1) * self.words];
        row.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + t)
            })
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v * self.words..(v + 1) * self.words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Edges as `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|w| w.count_ones() as usize).sum::<usize>() / 2
    }

    /// Adjacency lists, one sorted vector per node.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|v| self.neighbors(v).collect()).collect()
    }

    /// Returns a copy with the edge `{u, v}` set to `present`.
    pub fn with_edge(&self, u: usize, v: usize, present: bool) -> Result<Self> {
        if u >= self.n || v >= self.n || u == v {
            return Err(Error::invalid_graph(&self.id, format!("cannot set edge ({u}, {v})")));
        }
        let mut g = self.clone();
        g.set_edge_unchecked(u, v, present);
        Ok(g)
    }

    /// Returns a copy with node `v` recolored.
    pub fn with_color(&self, v: usize, color: u32) -> Result<Self> {
        if v >= self.n {
            return Err(Error::invalid_graph(&self.id, format!("node {v} out of range")));
        }
        let mut g = self.clone();
        g.colors[v] = color;
        Ok(g)
    }

    fn set_edge_unchecked(&mut self, u: usize, v: usize, present: bool) {
        let (wu, bu) = (u * self.words + v / 64, v % 64);
        let (wv, bv) = (v * self.words + u / 64, u % 64);
        if present {
            self.adj[wu] |= 1 << bu;
            self.adj[wv] |= 1 << bv;
        } else {
            self.adj[wu] &= !(1 << bu);
            self.adj[wv] &= !(1 << bv);
        }
    }

    /// Disjoint union; nodes of `other` are shifted by `self.n()`. Labels are dropped.
    pub fn disjoint_union(&self, other: &ColoredGraph, id: impl Into<String>) -> Result<Self> {
        let n = self.n + other.n;
        let edges: Vec<_> = self
            .edges()
            .chain(other.edges().map(|(u, v)| (u + self.n, v + self.n)))
            .collect();
        let colors = self.colors.iter().chain(&other.colors).copied().collect();
        ColoredGraph::new(id, n, &edges, colors)
    }
}

/// A bijection of `{0..n-1}`. Node `v` is sent to `mapping[v]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(mapping: Vec<usize>) -> Result<Self> {
        Permutation::new(mapping)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{mapping:?} is not a bijection of 0..{n}"
                )));
            }
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Permutation { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mapping
    }

    #[inline]
    pub fn apply(&self, v: usize) -> usize {
        self.mapping[v]
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { mapping: inv }
    }

    /// The composition `next ∘ self`: first `self`, then `next`.
    pub fn then(&self, next: &Permutation) -> Result<Self> {
        if next.len() != self.len() {
            return Err(Error::dim(format!(
                "cannot compose permutations of length {} and {}",
                self.len(),
                next.len()
            )));
        }
        Ok(Permutation {
            mapping: self.mapping.iter().map(|&m| next.mapping[m]).collect(),
        })
    }

    /// Moves per-node values along the permutation: `out[p(v)] = values[v]`.
    pub fn permute_values<T: Clone>(&self, values: &[T]) -> Vec<T> {
        let mut out = values.to_vec();
        for (v, val) in values.iter().enumerate() {
            out[self.mapping[v]] = val.clone();
        }
        out
    }
}

/// Relabels the nodes of `g` by `p`: edge `(u, v)` becomes `(p(u), p(v))` and
/// node `p(v)` inherits the color and label of `v`.
pub fn apply_permutation(g: &ColoredGraph, p: &Permutation) -> Result<ColoredGraph> {
    if p.len() != g.n() {
        return Err(Error::dim(format!(
            "permutation of length {} applied to graph `{}` with {} nodes",
            p.len(),
            g.id(),
            g.n()
        )));
    }
    let edges: Vec<_> = g.edges().map(|(u, v)| (p.apply(u), p.apply(v))).collect();
    let colors = p.permute_values(g.colors());
    let mut out = ColoredGraph::new(g.id(), g.n(), &edges, colors)?;
    if let Some(labels) = g.labels() {
        out = out.with_labels(p.permute_values(labels))?;
    }
    Ok(out.with_target(g.target()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColouringMode {
    /// Canonical order of a single graph, ranks exactly `1..=n`.
    Gc,
    /// Dataset-wide ranks drawn from a shared universe `1..=N`.
    Ugc,
}

/// A discrete colouring: node `v` holds rank `ranks[v]`, all ranks distinct
/// and at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteColouring {
    ranks: Vec<usize>,
    mode: ColouringMode,
}

impl DiscreteColouring {
    pub fn gc(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
                return Err(Error::InvalidColouring(format!(
                    "canonical ranks must be exactly 1..={n}, got {ranks:?}"
                )));
            }
        }
        Ok(DiscreteColouring {
            ranks,
            mode: ColouringMode::Gc,
        })
    }

    pub fn ugc(ranks: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ranks.len());
        for &r in &ranks {
            if r == 0 || !seen.insert(r) {
                return Err(Error::InvalidColouring(format!(
                    "universal ranks must be distinct and positive, got {ranks:?}"
                )));
            }
        }
        Ok(DiscreteColouring {
            ranks,
            mode: ColouringMode::Ugc,
        })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self, v: usize) -> usize {
        self.ranks[v]
    }

    pub fn mode(&self) -> ColouringMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }

    /// Nodes listed in increasing rank order.
    pub fn node_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.ranks.len()).collect();
        order.sort_by_key(|&v| self.ranks[v]);
        order
    }

    /// The colouring carried along with the nodes under `p`.
    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        if p.len() != self.len() {
            return Err(Error::dim("permutation length differs from colouring length"));
        }
        Ok(DiscreteColouring {
            ranks: p.permute_values(&self.ranks),
            mode: self.mode,
        })
    }
}
