//! Weisfeiler-Lehman style distinguishability tests and benchmark generators.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::{canonical_form, refine_round, Colouring};
use crate::dataset::GraphDataset;
use crate::error::{Error, Result};
use crate::graph::{apply_permutation, ColoredGraph, Permutation, Target};
use crate::ugc::{ugc_colouring, LabelUniverse};

/// Positional information mixed into the initial colors of [`wl_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeKind {
    None,
    Gc,
    Ugc,
}

impl std::str::FromStr for PeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PeKind::None),
            "gc" => Ok(PeKind::Gc),
            "ugc" => Ok(PeKind::Ugc),
            other => Err(Error::Parameter(format!(
                "unknown positional encoding `{other}` (expected none, gc or ugc)"
            ))),
        }
    }
}

/// Sorted `(color, count)` pairs of one graph after joint refinement.
pub type ColorHistogram = Vec<(u32, usize)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WlVerdict {
    pub distinguishable: bool,
    pub rounds: usize,
    pub final_histograms: [ColorHistogram; 2],
}

fn pe_ranks(g: &ColoredGraph, pe: PeKind, universe: Option<&LabelUniverse>) -> Result<Vec<usize>> {
    match pe {
        PeKind::None => Ok(vec![0; g.n()]),
        PeKind::Gc => Ok(canonical_form(g)?.colouring.ranks().to_vec()),
        PeKind::Ugc => {
            let u = universe
                .ok_or_else(|| Error::Config("pe=ugc needs a label universe".into()))?;
            Ok(ugc_colouring(g, u)?.ranks().to_vec())
        }
    }
}

fn histograms(c: &Colouring, n: usize) -> [ColorHistogram; 2] {
    let hist = |range: std::ops::Range<usize>| {
        let mut m = BTreeMap::new();
        for v in range {
            *m.entry(c.color(v)).or_insert(0) += 1;
        }
        m.into_iter().collect::<Vec<_>>()
    };
    [hist(0..n), hist(n..2 * n)]
}

/// Joint color refinement of `g1 ⊔ g2`, starting from node colors (paired
/// with positional ranks when `pe` is not `None`). Stops as soon as the
/// per-graph histograms differ or the colouring is stable.
pub fn wl_test(
    g1: &ColoredGraph,
    g2: &ColoredGraph,
    pe: PeKind,
    universe: Option<&LabelUniverse>,
) -> Result<WlVerdict> {
    if g1.n() != g2.n() {
        return Err(Error::dim(format!(
            "wl_test needs equal sizes, got {} and {} nodes",
            g1.n(),
            g2.n()
        )));
    }
    let n = g1.n();
    let r1 = pe_ranks(g1, pe, universe)?;
    let r2 = pe_ranks(g2, pe, universe)?;
    let keys: Vec<(u32, usize)> = g1
        .colors()
        .iter()
        .zip(&r1)
        .chain(g2.colors().iter().zip(&r2))
        .map(|(&c, &r)| (c, r))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let start: Vec<u32> = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("present") as u32)
        .collect();

    let union = g1.disjoint_union(g2, "union")?;
    let adj = union.adjacency_lists();
    let mut colouring = Colouring::from_colors(&start);
    let mut hist = histograms(&colouring, n);
    let mut rounds = 0;
    while hist[0] == hist[1] {
        let next = refine_round(&adj, &colouring);
        rounds += 1;
        let stable = next.num_cells() == colouring.num_cells();
        colouring = next;
        hist = histograms(&colouring, n);
        if stable {
            break;
        }
    }
    Ok(WlVerdict {
        distinguishable: hist[0] != hist[1],
        rounds,
        final_histograms: hist,
    })
}

/// Circulant skip-link graph: edges `i ~ i±1` and `i ~ i±skip (mod n)`.
///
/// For prime `n`, skips `s` and `s'` give isomorphic graphs when
/// `s·s' ≡ ±1 (mod n)` (multiply node indices by `s⁻¹`). When `gcd(n, skip) > 1`
/// the skip edges alone split into several cycles; the graph stays connected
/// through the ring edges. [`csl_benchmark`] checks classes with certificates.
pub fn gen_csl(n: usize, skip: usize) -> Result<ColoredGraph> {
    if n < 5 {
        return Err(Error::Parameter(format!("CSL needs n >= 5, got {n}")));
    }
    if skip < 2 || 2 * skip >= n {
        return Err(Error::Parameter(format!(
            "CSL skip must satisfy 2 <= skip < n/2, got skip={skip} for n={n}"
        )));
    }
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        edges.push((i, (i + skip) % n));
    }
    ColoredGraph::uncolored(format!("csl-n{n}-s{skip}"), n, &edges)
}

fn cycle_edges(offset: usize, len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).map(move |i| (offset + i, offset + (i + 1) % len))
}

/// `(C_{2m}, C_m + C_m)`: both 2-regular on `2m` nodes, not isomorphic.
pub fn gen_wl_hard_pair(m: usize) -> Result<(ColoredGraph, ColoredGraph)> {
    if m < 3 {
        return Err(Error::Parameter(format!("hard pair needs m >= 3, got {m}")));
    }
    let single: Vec<_> = cycle_edges(0, 2 * m).collect();
    let double: Vec<_> = cycle_edges(0, m).chain(cycle_edges(m, m)).collect();
    Ok((
        ColoredGraph::uncolored(format!("cycle-{}", 2 * m), 2 * m, &single)?,
        ColoredGraph::uncolored(format!("double-cycle-{m}"), 2 * m, &double)?,
    ))
}

pub const DEFAULT_CSL_N: usize = 41;
pub const DEFAULT_CSL_SKIPS: [usize; 10] = [2, 3, 4, 5, 6, 9, 11, 12, 13, 16];
pub const DEFAULT_CSL_COPIES: usize = 15;

/// Classification dataset of randomly relabeled CSL graphs, one class per
/// skip. Each class draws from its own ChaCha stream so the output does not
/// depend on thread scheduling.
pub fn csl_benchmark(n: usize, skips: &[usize], copies: usize, seed: u64) -> Result<GraphDataset> {
    if skips.is_empty() || copies == 0 {
        return Err(Error::Parameter("CSL benchmark needs at least one skip and one copy".into()));
    }
    let bases = skips
        .iter()
        .map(|&s| gen_csl(n, s))
        .collect::<Result<Vec<_>>>()?;
    let certs = bases
        .par_iter()
        .map(|g| canonical_form(g).map(|r| r.certificate))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..skips.len() {
        for j in i + 1..skips.len() {
            if certs[i] == certs[j] {
                return Err(Error::Parameter(format!(
                    "skips {} and {} give isomorphic CSL graphs on {n} nodes",
                    skips[i], skips[j]
                )));
            }
        }
    }
    let classes = bases
        .par_iter()
        .enumerate()
        .map(|(class, base)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(class as u64);
            (0..copies)
                .map(|copy| {
                    let p = Permutation::random(n, &mut rng);
                    Ok(apply_permutation(base, &p)?
                        .with_id(format!("csl-s{}-{copy:02}", skips[class]))
                        .with_target(Some(Target::Class(class as i64))))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    GraphDataset::new(classes.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::isomorphic;

    #[test]
    fn cycles_fool_plain_refinement() {
        let (c6, two_c3) = gen_wl_hard_pair(3).unwrap();
        let plain = wl_test(&c6, &two_c3, PeKind::None, None).unwrap();
        assert!(!plain.distinguishable);
        assert!(plain.rounds <= 6);
        assert!(wl_test(&c6, &two_c3, PeKind::Gc, None).unwrap().distinguishable);
        assert!(!isomorphic(&c6, &two_c3).unwrap());
    }

    #[test]
    fn hard_pair_sizes() {
        for m in 3..8 {
            let (a, b) = gen_wl_hard_pair(m).unwrap();
            assert_eq!((a.n(), a.edge_count()), (2 * m, 2 * m));
            assert_eq!((b.n(), b.edge_count()), (2 * m, 2 * m));
        }
        assert!(matches!(gen_wl_hard_pair(2), Err(Error::Parameter(_))));
    }

    #[test]
    fn csl_is_four_regular() {
        let g = gen_csl(10, 2).unwrap();
        assert!((0..10).all(|v| g.degree(v) == 4));
        assert!(gen_csl(10, 5).is_err());
        assert!(gen_csl(4, 2).is_err());
        assert!(gen_csl(10, 1).is_err());
    }

    #[test]
    fn csl_skips_2_and_3_differ() {
        let a = gen_csl(41, 2).unwrap();
        let b = gen_csl(41, 3).unwrap();
        assert!(!isomorphic(&a, &b).unwrap());
        assert!(!wl_test(&a, &b, PeKind::None, None).unwrap().distinguishable);
        assert!(wl_test(&a, &b, PeKind::Gc, None).unwrap().distinguishable);
    }

    #[test]
    fn equivalent_skips_are_rejected() {
        // 2·20 ≡ −1 (mod 41), so skip 20 is equivalent to skip 2.
        let err = csl_benchmark(41, &[2, 20], 1, 0).unwrap_err();
        assert!(err.to_string().contains("2 and 20"), "{err}");
    }

    #[test]
    fn small_benchmark_is_deterministic() {
        let a = csl_benchmark(11, &[2, 3], 3, 9).unwrap();
        let b = csl_benchmark(11, &[2, 3], 3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a.class_targets().unwrap(), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn ugc_needs_universe() {
        let g = gen_csl(7, 2).unwrap();
        assert!(matches!(wl_test(&g, &g, PeKind::Ugc, None), Err(Error::Config(_))));
    }
}
