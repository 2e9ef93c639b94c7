//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//! Run with `cargo test --release -p canon-gnn --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use canon_gnn::mpnn::{prepare_inputs, stratified_folds, train, MpnnConfig, Readout, Split, TrainOptions};
use canon_gnn::ugc::UgcWitness;
use canon_gnn::wl::{DEFAULT_CSL_COPIES, DEFAULT_CSL_N, DEFAULT_CSL_SKIPS};
use canon_gnn::{
    apply_permutation, build_universe, canonical_form, csl_benchmark, gen_wl_hard_pair, graph_distance, isomorphic,
    validate_ugc, wl_test, ColoredGraph, DistanceMode, PeKind, Permutation,
};
use common::{brute_distance, brute_isomorphic, random_graph};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_colored(rng: &mut impl Rng, id: &str, max_n: usize) -> ColoredGraph {
    let n = rng.gen_range(1..=max_n);
    let p = rng.gen_range(0.1..0.9);
    let k = rng.gen_range(1..=4);
    random_graph(rng, id, n, p, k)
}

fn canonical_invariance() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let mut rng = common::rng(101);
        let start = Instant::now();
        let mut failures = 0;
        for i in 0..1000 {
            let g = random_colored(&mut rng, &format!("g{i}"), 12);
            let cert = canonical_form(&g).unwrap().certificate;
            for _ in 0..10 {
                let h = apply_permutation(&g, &Permutation::random(g.n(), &mut rng)).unwrap();
                failures += usize::from(canonical_form(&h).unwrap().certificate != cert);
            }
        }
        let t = start.elapsed();
        outcome(
            failures == 0 && t < Duration::from_secs(60),
            format!("10000 relabellings, {failures} certificate mismatches, {:.1}s single-threaded (limit 60s)", t.as_secs_f64()),
        )
    })
}

fn isomorphism_oracle() -> Outcome {
    let mut rng = common::rng(202);
    let mut disagreements = 0;
    let mut positives = 0;
    for i in 0..600 {
        let a = random_colored(&mut rng, "a", 7);
        let b = match i % 3 {
            0 => apply_permutation(&a, &Permutation::random(a.n(), &mut rng)).unwrap(),
            1 => {
                let b = apply_permutation(&a, &Permutation::random(a.n(), &mut rng)).unwrap();
                if b.n() < 2 {
                    b
                } else {
                    let (u, v) = (rng.gen_range(0..b.n() - 1), b.n() - 1);
                    b.with_edge(u, v, !b.has_edge(u, v)).unwrap()
                }
            }
            _ => {
                let (p, k) = (rng.gen_range(0.1..0.9), rng.gen_range(1..=2));
                random_graph(&mut rng, "b", a.n(), p, k)
            }
        };
        let truth = brute_isomorphic(&a, &b);
        positives += usize::from(truth);
        disagreements += usize::from(isomorphic(&a, &b).unwrap() != truth);
    }
    outcome(
        disagreements == 0,
        format!("600 pairs ({positives} isomorphic), {disagreements} disagreements with exhaustive search"),
    )
}

fn expressivity() -> Outcome {
    let start = Instant::now();
    let d = csl_benchmark(DEFAULT_CSL_N, &DEFAULT_CSL_SKIPS, DEFAULT_CSL_COPIES, 0).unwrap();
    let g = d.graphs();
    let targets = d.class_targets().unwrap();
    let pairs: Vec<(usize, usize)> = (0..g.len()).flat_map(|i| (i + 1..g.len()).map(move |j| (i, j))).collect();
    let verdicts: Vec<(bool, bool, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let none = wl_test(&g[i], &g[j], PeKind::None, None).unwrap().distinguishable;
            let gc = wl_test(&g[i], &g[j], PeKind::Gc, None).unwrap().distinguishable;
            (targets[i] != targets[j], none, gc)
        })
        .collect();
    let cross = verdicts.iter().filter(|v| v.0).count();
    let plain_separated = verdicts.iter().filter(|v| v.0 && v.1).count();
    let gc_missed = verdicts.iter().filter(|v| v.0 && !v.2).count();
    let same = verdicts.len() - cross;
    let gc_misflagged = verdicts.iter().filter(|v| !v.0 && v.2).count();

    let mut hard_plain = 0;
    let mut hard_gc = 0;
    for m in 3..=10 {
        let (a, b) = gen_wl_hard_pair(m).unwrap();
        hard_plain += usize::from(wl_test(&a, &b, PeKind::None, None).unwrap().distinguishable);
        hard_gc += usize::from(wl_test(&a, &b, PeKind::Gc, None).unwrap().distinguishable);
    }
    let t = start.elapsed();
    let pass = plain_separated == 0
        && hard_plain == 0
        && gc_missed == 0
        && hard_gc == 8
        && gc_misflagged == 0
        && t < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "(a) 1-WL separated {plain_separated}/{cross} CSL cross-class pairs and {hard_plain}/8 hard pairs; \
             (b) GC separated {}/{cross} and {hard_gc}/8, mis-flagged {gc_misflagged}/{same} isomorphic pairs; {:.1}s",
            cross - gc_missed,
            t.as_secs_f64()
        ),
    )
}

fn csl_training() -> Outcome {
    let d = csl_benchmark(DEFAULT_CSL_N, &DEFAULT_CSL_SKIPS, DEFAULT_CSL_COPIES, 0).unwrap();
    let opts = TrainOptions {
        learning_rate: 1e-3,
        ..TrainOptions::default()
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for pe in [PeKind::Gc, PeKind::None] {
        let data = prepare_inputs(&d, pe, Readout::Mean, None).unwrap();
        let ids = data.ids();
        let folds = stratified_folds(&data.targets(), 5, 0).unwrap();
        let mut accs = Vec::new();
        for (f, (tr, te)) in folds.into_iter().enumerate() {
            let split = Split {
                train_ids: tr.iter().map(|&i| ids[i].clone()).collect(),
                test_ids: te.iter().map(|&i| ids[i].clone()).collect(),
            };
            let cfg = MpnnConfig::new(data.input_width(), data.num_classes)
                .with_layers(3)
                .with_hidden_dim(32)
                .with_readout(Readout::Mean)
                .with_seed(f as u64);
            let start = Instant::now();
            let (_, r) = train(&cfg, &opts, &data, &split).unwrap();
            let t = start.elapsed();
            pass &= t < Duration::from_secs(120);
            pass &= match pe {
                PeKind::Gc => r.train_accuracy >= 0.95 && r.test_accuracy >= 0.90,
                _ => r.test_accuracy <= 0.25,
            };
            accs.push(format!("{:.2}/{:.2} {:.0}s", r.train_accuracy, r.test_accuracy, t.as_secs_f64()));
        }
        lines.push(format!("pe={pe:?} train/test per fold [{}]", accs.join(", ")));
    }
    outcome(pass, lines.join("; "))
}

fn stability_contrast() -> Outcome {
    let start = Instant::now();
    let r = canon_gnn::probe::run_probe(&[6, 8, 10, 12], 20, 0).unwrap();
    let t = start.elapsed();
    let all_gc = r.reports.iter().all(|x| x.pe_divergence_gc == x.n);
    let all_ugc = r.reports.iter().all(|x| x.pe_divergence_ugc == 0);
    let (a6, a12) = (r.aggregate(6).unwrap(), r.aggregate(12).unwrap());
    let ugc_ok = a12.max_ratio_ugc <= 3.0 * a6.max_ratio_ugc;
    let gc_ok = a12.max_ratio_gc > a6.max_ratio_gc;
    outcome(
        all_gc && all_ugc && ugc_ok && gc_ok && t < Duration::from_secs(180),
        format!(
            "(a) GC changed on all nodes in every trial: {all_gc}, UGC untouched stable: {all_ugc}; \
             (b) UGC max ratio n=6 {:.4}, n=12 {:.4}; GC max ratio n=6 {:.4}, n=12 {:.4}; {:.1}s",
            a6.max_ratio_ugc,
            a12.max_ratio_ugc,
            a6.max_ratio_gc,
            a12.max_ratio_gc,
            t.as_secs_f64()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let dense = common::gradient_check(606, 200, false);
    let diag = common::gradient_check(607, 200, true);
    let pass = [&dense, &diag]
        .iter()
        .all(|c| c.max_rel_error < 1e-4 && c.groups_covered == c.groups_total);
    outcome(
        pass,
        format!(
            "dense W: max rel error {:.2e} over {} params in {}/{} groups; diagonal W: {:.2e} in {}/{} groups; {} kink resamples",
            dense.max_rel_error,
            dense.checked,
            dense.groups_covered,
            dense.groups_total,
            diag.max_rel_error,
            diag.groups_covered,
            diag.groups_total,
            dense.resampled + diag.resampled
        ),
    )
}

fn permutation_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for readout in [Readout::Sum, Readout::Mean, Readout::UgcWeighted] {
        for seed in 0..100 {
            worst = worst.max(common::permutation_gap(7000 + seed, readout));
        }
    }
    outcome(worst <= 1e-9, format!("300 triples over 3 readouts, max embedding difference {worst:.2e}"))
}

fn ugc_validator() -> Outcome {
    let d = common::gene_dataset(808, 50, 200);
    let clean = validate_ugc(&d, &build_universe(&d).unwrap()).unwrap();
    let (bad, inj) = common::inject_flip(&d, 809);
    let r = validate_ugc(&bad, &build_universe(&bad).unwrap()).unwrap();
    let exact = match r.witnesses.as_slice() {
        [UgcWitness::EdgeConflict {
            graph2_id,
            label_u,
            label_v,
            ..
        }] => *graph2_id == inj.graph_id && [label_u.clone(), label_v.clone()].into_iter().collect::<BTreeSet<_>>() == inj.labels,
        _ => false,
    };
    outcome(
        clean.is_valid() && clean.witnesses.is_empty() && exact,
        format!(
            "clean: valid={} with {} witnesses; flipped {:?} in {}: {} witness(es), matches injection: {exact}",
            clean.is_valid(),
            clean.witnesses.len(),
            inj.labels,
            inj.graph_id,
            r.witnesses.len()
        ),
    )
}

fn distance_oracle() -> Outcome {
    let mut rng = common::rng(909);
    let mut mismatches = 0;
    let mut nonzero_self = 0;
    for _ in 0..300 {
        let n = rng.gen_range(1..=6);
        let p = rng.gen_range(0.1..0.9);
        let a = random_graph(&mut rng, "a", n, p, 2);
        let b = random_graph(&mut rng, "b", n, p, 2);
        let exact = graph_distance(&a, &b, DistanceMode::Exact).unwrap().distance;
        mismatches += usize::from((exact - brute_distance(&a, &b)).abs() > 1e-12);
        let pa = apply_permutation(&a, &Permutation::random(n, &mut rng)).unwrap();
        nonzero_self += usize::from(graph_distance(&a, &pa, DistanceMode::Exact).unwrap().distance != 0.0);
    }
    outcome(
        mismatches == 0 && nonzero_self == 0,
        format!("300 pairs: {mismatches} differ from exhaustive minimum; {nonzero_self} relabellings with d > 0"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("canonical invariance", canonical_invariance),
        ("isomorphism oracle equivalence", isomorphism_oracle),
        ("CSL expressivity", expressivity),
        ("CSL training", csl_training),
        ("stability contrast", stability_contrast),
        ("gradient correctness", gradient_correctness),
        ("permutation invariance", permutation_invariance),
        ("UGC validator", ugc_validator),
        ("exact distance oracle", distance_oracle),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !filter.is_empty() && !filter.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!(
            "criterion {k} ({name}): {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
