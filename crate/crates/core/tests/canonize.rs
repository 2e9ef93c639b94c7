mod common;

use canon_gnn::{
    apply_permutation, canonical_form, gen_csl, is_rigid, isomorphic, refine, ColoredGraph, Colouring, Permutation,
};
use common::{brute_isomorphic, random_graph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = ColoredGraph> {
    (1..=max_n, 0.0f64..=1.0, 1u32..=3, any::<u64>())
        .prop_map(|(n, p, k, seed)| random_graph(&mut ChaCha8Rng::seed_from_u64(seed), "g", n, p, k))
}

fn with_perm(max_n: usize) -> impl Strategy<Value = (ColoredGraph, Permutation)> {
    (graph_strategy(max_n), any::<u64>()).prop_map(|(g, seed)| {
        let p = Permutation::random(g.n(), &mut ChaCha8Rng::seed_from_u64(seed));
        (g, p)
    })
}

/// Every cell sends the same number of edges to each cell from each of its nodes.
fn is_equitable(g: &ColoredGraph, c: &Colouring) -> bool {
    let cells = c.cells();
    cells.iter().all(|cell| {
        cells.iter().all(|target| {
            let count = |v: usize| target.iter().filter(|&&u| g.has_edge(v, u)).count();
            cell.iter().all(|&v| count(v) == count(cell[0]))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn certificate_is_relabelling_invariant((g, p) in with_perm(10)) {
        let h = apply_permutation(&g, &p).unwrap();
        let a = canonical_form(&g).unwrap();
        let b = canonical_form(&h).unwrap();
        prop_assert_eq!(&a.certificate, &b.certificate);
        // The canonical orders land on the same relabelled graph.
        let ca = apply_permutation(&g, &Permutation::new(a.colouring.ranks().iter().map(|r| r - 1).collect()).unwrap()).unwrap();
        let cb = apply_permutation(&h, &Permutation::new(b.colouring.ranks().iter().map(|r| r - 1).collect()).unwrap()).unwrap();
        prop_assert_eq!(ca.edges().collect::<Vec<_>>(), cb.edges().collect::<Vec<_>>());
        prop_assert_eq!(ca.colors(), cb.colors());
    }

    #[test]
    fn canonical_ranks_respect_initial_colors(g in graph_strategy(10)) {
        let rho = canonical_form(&g).unwrap().colouring;
        for u in 0..g.n() {
            for v in 0..g.n() {
                if g.color(u) < g.color(v) {
                    prop_assert!(rho.rank(u) < rho.rank(v));
                }
            }
        }
    }

    #[test]
    fn isomorphic_matches_exhaustive_search(a in graph_strategy(6), seed in any::<u64>(), relabel in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = if relabel {
            apply_permutation(&a, &Permutation::random(a.n(), &mut rng)).unwrap()
        } else {
            random_graph(&mut rng, "h", a.n(), 0.5, 2)
        };
        prop_assert_eq!(isomorphic(&a, &b).unwrap(), brute_isomorphic(&a, &b));
    }

    #[test]
    fn refinement_is_equitable_and_finer(g in graph_strategy(12)) {
        let start = Colouring::of_graph(&g);
        let c = refine(&g, &start).unwrap();
        prop_assert!(c.refines(&start));
        prop_assert!(is_equitable(&g, &c));
        prop_assert_eq!(refine(&g, &c).unwrap(), c);
    }
}

#[test]
fn rigid_examples() {
    let p3 = ColoredGraph::new("p3", 3, &[(0, 1), (1, 2)], vec![0, 1, 2]).unwrap();
    assert!(is_rigid(&p3));
    let plain = ColoredGraph::uncolored("p3", 3, &[(0, 1), (1, 2)]).unwrap();
    assert!(!is_rigid(&plain));
}

#[test]
fn csl_classes_by_certificate() {
    let a = gen_csl(41, 2).unwrap();
    let b = apply_permutation(&a, &Permutation::random(41, &mut ChaCha8Rng::seed_from_u64(5))).unwrap();
    let c = gen_csl(41, 3).unwrap();
    assert!(isomorphic(&a, &b).unwrap());
    assert!(!isomorphic(&a, &c).unwrap());
}

#[test]
fn different_sizes_are_not_isomorphic() {
    let a = ColoredGraph::uncolored("a", 2, &[]).unwrap();
    let b = ColoredGraph::uncolored("b", 3, &[]).unwrap();
    assert!(!isomorphic(&a, &b).unwrap());
}
