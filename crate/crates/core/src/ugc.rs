//! Universal graph canonization from global node labels.
//!
//! Ranks come from the lexicographic order of every label in the dataset.
//! The ranking is a valid universal canonization when each graph uses a
//! label at most once and every label pair shared by several graphs has the
//! same edge relation in all of them; [`validate_ugc`] checks both.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::{canonical_form_with, CanonOptions};
use crate::dataset::GraphDataset;
use crate::error::{Error, Result};
use crate::features::{one_hot_ranks, FeatureTensor};
use crate::graph::{ColoredGraph, DiscreteColouring};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelUniverse {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelUniverse {
    /// Builds a universe from arbitrary labels; they are sorted and deduplicated.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort_unstable();
        labels.dedup();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i + 1))
            .collect();
        LabelUniverse { labels, index }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of labels `N`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// 1-based rank of a label.
    pub fn rank(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, rank: usize) -> Option<&str> {
        rank.checked_sub(1)
            .and_then(|i| self.labels.get(i))
            .map(String::as_str)
    }
}

/// The universe of every label in `d`, or the dataset's own declared
/// universe when the file carries one.
pub fn build_universe(d: &GraphDataset) -> Result<LabelUniverse> {
    let mut all = Vec::new();
    for g in d.graphs() {
        let labels = g.labels().ok_or_else(|| Error::Labeling(g.id().to_owned()))?;
        all.extend(labels.iter().cloned());
    }
    if let Some(declared) = d.label_universe() {
        all.extend(declared.iter().cloned());
    }
    Ok(LabelUniverse::from_labels(all))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UgcWitness {
    /// Two nodes of one graph carry the same label.
    DuplicateLabel {
        graph_id: String,
        node_a: usize,
        node_b: usize,
        label: String,
    },
    /// A shared label pair is adjacent in one graph and not in another.
    EdgeConflict {
        graph1_id: String,
        graph2_id: String,
        label_u: String,
        label_v: String,
        present_in: String,
        absent_in: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UgcValidationReport {
    pub injective_ok: bool,
    pub edge_consistent_ok: bool,
    pub witnesses: Vec<UgcWitness>,
}

impl UgcValidationReport {
    pub fn is_valid(&self) -> bool {
        self.injective_ok && self.edge_consistent_ok
    }
}

#[derive(Default, Clone, Copy)]
struct PairTally {
    present: u32,
    absent: u32,
    first_present: u32,
    first_absent: u32,
    first_seen_present: bool,
}

impl PairTally {
    fn inconsistent(&self) -> bool {
        self.present > 0 && self.absent > 0
    }

    /// The edge state held by the majority of graphs; ties go to the
    /// state of the first graph seen with this pair.
    fn majority(&self) -> bool {
        match self.present.cmp(&self.absent) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.first_seen_present,
        }
    }
}

fn ranked_nodes(g: &ColoredGraph, u: &LabelUniverse) -> Result<Vec<(usize, usize)>> {
    let labels = g.labels().ok_or_else(|| Error::Labeling(g.id().to_owned()))?;
    labels
        .iter()
        .enumerate()
        .map(|(v, l)| {
            u.rank(l).map(|r| (r, v)).ok_or_else(|| Error::Universe {
                graph_id: g.id().to_owned(),
                label: l.clone(),
            })
        })
        .collect()
}

/// Checks label injectivity per graph and edge consistency of every label
/// pair shared by two or more graphs.
///
/// For an inconsistent pair, every graph disagreeing with the majority edge
/// state is reported once, against the first graph holding the majority
/// state. Graphs without labels, or with labels outside `u`, are errors.
pub fn validate_ugc(d: &GraphDataset, u: &LabelUniverse) -> Result<UgcValidationReport> {
    let mut witnesses = Vec::new();

    let ranked: Vec<Vec<(usize, usize)>> = d
        .graphs()
        .iter()
        .map(|g| ranked_nodes(g, u))
        .collect::<Result<_>>()?;

    for (g, nodes) in d.graphs().iter().zip(&ranked) {
        let mut by_rank: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
        for &(r, v) in nodes {
            if let Some(prev) = by_rank.insert(r, v) {
                witnesses.push(UgcWitness::DuplicateLabel {
                    graph_id: g.id().to_owned(),
                    node_a: prev,
                    node_b: v,
                    label: u.label(r).unwrap_or_default().to_owned(),
                });
            }
        }
    }
    let injective_ok = witnesses.is_empty();

    let mut registry: HashMap<(u32, u32), PairTally> = HashMap::new();
    for (gi, (g, nodes)) in d.graphs().iter().zip(&ranked).enumerate() {
        for_each_pair(g, nodes, |key, present| {
            let t = registry.entry(key).or_insert_with(|| PairTally {
                first_seen_present: present,
                ..PairTally::default()
            });
            if present {
                if t.present == 0 {
                    t.first_present = gi as u32;
                }
                t.present += 1;
            } else {
                if t.absent == 0 {
                    t.first_absent = gi as u32;
                }
                t.absent += 1;
            }
        });
    }

    let graphs = d.graphs();
    let conflicts: Vec<Vec<UgcWitness>> = graphs
        .par_iter()
        .zip(&ranked)
        .map(|(g, nodes)| {
            let mut out = Vec::new();
            for_each_pair(g, nodes, |key, present| {
                let t = &registry[&key];
                if !t.inconsistent() || present == t.majority() {
                    return;
                }
                let reference = if t.majority() {
                    t.first_present
                } else {
                    t.first_absent
                };
                let ref_id = graphs[reference as usize].id().to_owned();
                let (present_in, absent_in) = if present {
                    (g.id().to_owned(), ref_id.clone())
                } else {
                    (ref_id.clone(), g.id().to_owned())
                };
                out.push(UgcWitness::EdgeConflict {
                    graph1_id: ref_id,
                    graph2_id: g.id().to_owned(),
                    label_u: u.label(key.0 as usize).unwrap_or_default().to_owned(),
                    label_v: u.label(key.1 as usize).unwrap_or_default().to_owned(),
                    present_in,
                    absent_in,
                });
            });
            out
        })
        .collect();
    let before = witnesses.len();
    witnesses.extend(conflicts.into_iter().flatten());
    let edge_consistent_ok = witnesses.len() == before;

    Ok(UgcValidationReport {
        injective_ok,
        edge_consistent_ok,
        witnesses,
    })
}

/// Visits every node pair of `g` keyed by `(smaller rank, larger rank)` in
/// a deterministic order.
fn for_each_pair(g: &ColoredGraph, nodes: &[(usize, usize)], mut f: impl FnMut((u32, u32), bool)) {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    for i in 0..sorted.len() {
        let (ra, a) = sorted[i];
        for &(rb, b) in &sorted[i + 1..] {
            if ra == rb {
                continue;
            }
            f((ra as u32, rb as u32), g.has_edge(a, b));
        }
    }
}

/// `τ(v) = rank(label(v))`.
pub fn ugc_colouring(g: &ColoredGraph, u: &LabelUniverse) -> Result<DiscreteColouring> {
    let ranks = ranked_nodes(g, u)?.into_iter().map(|(r, _)| r).collect();
    DiscreteColouring::ugc(ranks)
}

/// One-hot `τ` encoding; `width` must cover the universe (normally `u.len()`).
pub fn ugc_encoding(g: &ColoredGraph, u: &LabelUniverse, width: usize) -> Result<FeatureTensor> {
    one_hot_ranks(&ugc_colouring(g, u)?, width)
}

/// One-hot `τ` restricted to the graph's own labels: width `n`, columns in
/// increasing universe rank. Not comparable across graphs.
pub fn ugc_encoding_compact(g: &ColoredGraph, u: &LabelUniverse) -> Result<FeatureTensor> {
    let tau = ugc_colouring(g, u)?;
    let mut local = vec![0; g.n()];
    for (pos, v) in tau.node_order().into_iter().enumerate() {
        local[v] = pos + 1;
    }
    one_hot_ranks(&DiscreteColouring::gc(local)?, g.n())
}

/// One-hot canonical-order encoding `ρ(v)`; `width` is normally the largest
/// graph size in the dataset.
pub fn gc_encoding(g: &ColoredGraph, width: usize) -> Result<FeatureTensor> {
    gc_encoding_with(g, width, &CanonOptions::default())
}

pub fn gc_encoding_with(g: &ColoredGraph, width: usize, opts: &CanonOptions) -> Result<FeatureTensor> {
    let rho = canonical_form_with(g, opts)?.colouring;
    one_hot_ranks(&rho, width)
}
