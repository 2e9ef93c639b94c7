//! Graph datasets and their on-disk formats (JSON datasets, plain edge lists).

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, Target};

/// A collection of graphs with an optional shared, sorted label universe.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphDataset {
    graphs: Vec<ColoredGraph>,
    label_universe: Option<Vec<String>>,
}

impl GraphDataset {
    pub fn new(graphs: Vec<ColoredGraph>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(graphs.len());
        for g in &graphs {
            if !ids.insert(g.id()) {
                return Err(Error::Validation(format!("duplicate graph id `{}`", g.id())));
            }
        }
        Ok(GraphDataset {
            graphs,
            label_universe: None,
        })
    }

    /// Attaches a label universe. It must be sorted, duplicate-free and
    /// contain every label used by any graph.
    pub fn with_label_universe(mut self, universe: Vec<String>) -> Result<Self> {
        if universe.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "label_universe must be strictly increasing (sorted, no duplicates)".into(),
            ));
        }
        for g in &self.graphs {
            if let Some(labels) = g.labels() {
                if let Some(missing) = labels.iter().find(|l| universe.binary_search(l).is_err()) {
                    return Err(Error::Validation(format!(
                        "label `{missing}` of graph `{}` is missing from label_universe",
                        g.id()
                    )));
                }
            }
        }
        self.label_universe = Some(universe);
        Ok(self)
    }

    pub fn graphs(&self) -> &[ColoredGraph] {
        &self.graphs
    }

    pub fn into_graphs(self) -> Vec<ColoredGraph> {
        self.graphs
    }

    pub fn label_universe(&self) -> Option<&[String]> {
        self.label_universe.as_deref()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ColoredGraph> {
        self.graphs.iter().find(|g| g.id() == id)
    }

    pub fn require(&self, id: &str) -> Result<&ColoredGraph> {
        self.get(id)
            .ok_or_else(|| Error::Parameter(format!("no graph with id `{id}` in dataset")))
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(ColoredGraph::n).max().unwrap_or(0)
    }

    pub fn max_color(&self) -> Option<u32> {
        self.graphs.iter().flat_map(|g| g.colors().iter().copied()).max()
    }

    /// Class targets for every graph, or an error naming the first graph
    /// without a non-negative integer target.
    pub fn class_targets(&self) -> Result<Vec<usize>> {
        self.graphs
            .iter()
            .map(|g| {
                g.target().and_then(|t| t.as_class()).ok_or_else(|| {
                    Error::Config(format!("graph `{}` has no integer class target", g.id()))
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            graphs: self.graphs.iter().map(GraphRecord::from_graph).collect(),
            label_universe: self.label_universe.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
            context: "dataset".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let graphs = file
            .graphs
            .into_iter()
            .enumerate()
            .map(|(i, rec)| rec.into_graph(i))
            .collect::<Result<Vec<_>>>()?;
        let ds = GraphDataset::new(graphs)?;
        match file.label_universe {
            Some(u) => ds.with_label_universe(u),
            None => Ok(ds),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<GraphDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    GraphDataset::from_json(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn save_dataset(d: &GraphDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, d.to_json()? + "\n")?;
    Ok(())
}

/// Parses the edge-list format: one `u v` pair per line, `#` starts a comment.
/// The node count is one more than the largest index; all colors are 0.
pub fn parse_edge_list(id: &str, text: &str) -> Result<ColoredGraph> {
    let mut edges = Vec::new();
    let mut max_node = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ctx = || format!("{id} line {}", lineno + 1);
        let mut parts = line.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = parts.next().ok_or_else(|| Error::Parse {
                context: ctx(),
                message: "expected two node indices".into(),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                context: ctx(),
                message: format!("`{tok}` is not a node index"),
            })
        };
        let (u, v) = (next()?, next()?);
        if parts.next().is_some() {
            return Err(Error::Parse {
                context: ctx(),
                message: "trailing tokens after edge".into(),
            });
        }
        if u == v {
            return Err(Error::Parse {
                context: ctx(),
                message: format!("self-loop on node {u}"),
            });
        }
        max_node = Some(max_node.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    let n = max_node.map_or(0, |m| m + 1);
    ColoredGraph::uncolored(id, n, &edges)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<ColoredGraph> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into());
    parse_edge_list(&id, &fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    graphs: Vec<GraphRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_universe: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    id: String,
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    colors: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default)]
    target: Option<Target>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    directed: bool,
}

impl GraphRecord {
    fn from_graph(g: &ColoredGraph) -> Self {
        GraphRecord {
            id: g.id().to_owned(),
            num_nodes: g.n(),
            edges: g.edges().map(|(u, v)| [u, v]).collect(),
            colors: Some(g.colors().to_vec()),
            labels: g.labels().map(<[String]>::to_vec),
            target: g.target(),
            directed: false,
        }
    }

    fn into_graph(self, index: usize) -> Result<ColoredGraph> {
        let ctx = format!("graphs[{index}] (id `{}`)", self.id);
        if self.directed {
            return Err(Error::Parse {
                context: ctx,
                message: "directed graphs are not supported".into(),
            });
        }
        for (k, &[u, v]) in self.edges.iter().enumerate() {
            if u == v {
                return Err(Error::Parse {
                    context: format!("{ctx}.edges[{k}]"),
                    message: format!("self-loop on node {u}"),
                });
            }
            if u >= self.num_nodes || v >= self.num_nodes {
                return Err(Error::Parse {
                    context: format!("{ctx}.edges[{k}]"),
                    message: format!("edge [{u}, {v}] outside 0..{}", self.num_nodes),
                });
            }
        }
        let colors = self.colors.unwrap_or_else(|| vec![0; self.num_nodes]);
        if colors.len() != self.num_nodes {
            return Err(Error::Parse {
                context: format!("{ctx}.colors"),
                message: format!("{} colors for {} nodes", colors.len(), self.num_nodes),
            });
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        let g = ColoredGraph::new(self.id, self.num_nodes, &edges, colors).map_err(|e| {
            Error::Parse {
                context: ctx.clone(),
                message: e.to_string(),
            }
        })?;
        let g = match self.labels {
            Some(labels) => g.with_labels(labels)?,
            None => g,
        };
        Ok(g.with_target(self.target))
    }
}
