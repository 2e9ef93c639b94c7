use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{emit, resolve, usage, CliResult, Envelope, FileConfig, Layered, EXIT_OK, EXIT_WITNESSES};
use crate::canon::{canonical_form, isomorphic};
use crate::dataset::{load_dataset, GraphDataset};
use crate::distance::{graph_distance, DistanceMode, EXACT_LIMIT};
use crate::features::FeatureTensor;
use crate::graph::ColoredGraph;
use crate::mpnn::{
    prepare_inputs, save_checkpoint, stratified_folds, train as train_model, MpnnConfig, Readout, Split,
    TrainOptions,
};
use crate::probe::{figure2_pair, gen_counterexample, run_probe};
use crate::ugc::{build_universe, ugc_colouring, ugc_encoding, ugc_encoding_compact, validate_ugc, LabelUniverse};
use crate::wl::{csl_benchmark, gen_wl_hard_pair, wl_test, PeKind, DEFAULT_CSL_COPIES, DEFAULT_CSL_N, DEFAULT_CSL_SKIPS};

pub(crate) struct Context {
    pub file: FileConfig,
    pub verbose: bool,
    pub command: &'static str,
}

impl Context {
    fn layered<T: Layered>(&self, flags: &T) -> CliResult<T> {
        let cfg = resolve(flags, &self.file)?;
        if self.verbose {
            eprintln!("{}", serde_json::to_string(&cfg).unwrap_or_default());
        }
        Ok(cfg)
    }

    fn report<C: Serialize, R: Serialize>(&self, seed: Option<u64>, cfg: &C, result: R) -> CliResult<String> {
        Envelope::new(self.command, seed, cfg, result).to_json()
    }
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn pair(p: &Option<Vec<String>>) -> CliResult<(String, String)> {
    match need(p, "pair")?.as_slice() {
        [a, b] => Ok((a.clone(), b.clone())),
        other => Err(usage(format!("--pair takes two graph ids, got {}", other.len()))),
    }
}

fn parse<T: std::str::FromStr<Err = crate::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: crate::Error| usage(e.to_string()))
}

fn universe_of(d: &GraphDataset) -> CliResult<LabelUniverse> {
    Ok(build_universe(d)?)
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes a generated dataset and its summary: the dataset goes to `--out`
/// (stdout without it), the summary to `--report`, or to stdout when the
/// dataset went to a file.
fn write_generated<C: Serialize>(
    ctx: &Context,
    seed: Option<u64>,
    cfg: &C,
    d: &GraphDataset,
    out: Option<&Path>,
    report: Option<&Path>,
    mut summary: serde_json::Value,
) -> CliResult<i32> {
    let text = d.to_json()? + "\n";
    summary["graphs"] = json!(d.len());
    summary["sha256"] = json!(sha256_hex(&text));
    emit(out, &text)?;
    let env = ctx.report(seed, cfg, summary)?;
    match (out, report) {
        (_, Some(r)) => emit(Some(r), &env)?,
        (Some(_), None) => emit(None, &env)?,
        (None, None) => {}
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CanonizeArgs {
    /// JSON dataset file.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Only this graph.
    #[arg(long, value_name = "ID")]
    pub graph_id: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl Layered for CanonizeArgs {
    fn defaults() -> Self {
        CanonizeArgs::default()
    }
}

pub(crate) fn canonize(ctx: &Context, flags: &CanonizeArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let d = load_dataset(need(&a.input, "input")?)?;
    let graphs: Vec<&ColoredGraph> = match &a.graph_id {
        Some(id) => vec![d.require(id)?],
        None => d.graphs().iter().collect(),
    };
    let result = graphs
        .into_iter()
        .map(|g| {
            let c = canonical_form(g)?;
            Ok(json!({
                "id": g.id(),
                "order": c.colouring.node_order(),
                "certificate_hex": c.certificate.to_hex(),
            }))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    emit(a.out.as_deref(), &ctx.report(None, &a, result)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EncodeArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// `gc` or `ugc`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// UGC only: one column per node of the graph instead of one per label.
    #[arg(long)]
    pub compact: bool,
}

impl Layered for EncodeArgs {
    fn defaults() -> Self {
        EncodeArgs::default()
    }
}

fn matrix_json(id: &str, ranks: &[usize], x: &FeatureTensor) -> serde_json::Value {
    json!({
        "id": id,
        "shape": [x.rows(), x.cols()],
        "ranks": ranks,
        "rows": x.to_rows(),
    })
}

pub(crate) fn encode(ctx: &Context, flags: &EncodeArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let mode: PeKind = parse(&need(&a.mode, "mode")?)?;
    let d = load_dataset(need(&a.input, "input")?)?;
    let (width, graphs) = match mode {
        PeKind::None => return Err(usage("--mode must be gc or ugc")),
        PeKind::Gc => {
            if a.compact {
                return Err(usage("--compact applies to --mode ugc only"));
            }
            let width = d.max_nodes();
            let rows = d
                .graphs()
                .iter()
                .map(|g| {
                    let rho = canonical_form(g)?.colouring;
                    let x = crate::features::one_hot_ranks(&rho, width)?;
                    Ok(matrix_json(g.id(), rho.ranks(), &x))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            (Some(width), rows)
        }
        PeKind::Ugc => {
            let u = universe_of(&d)?;
            let rows = d
                .graphs()
                .iter()
                .map(|g| {
                    let tau = ugc_colouring(g, &u)?;
                    let x = if a.compact {
                        ugc_encoding_compact(g, &u)?
                    } else {
                        ugc_encoding(g, &u, u.len())?
                    };
                    Ok(matrix_json(g.id(), tau.ranks(), &x))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            ((!a.compact).then_some(u.len()), rows)
        }
    };
    let result = json!({ "mode": mode, "width": width, "graphs": graphs });
    emit(a.out.as_deref(), &ctx.report(None, &a, result)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Exit with status 2 when witnesses are found.
    #[arg(long)]
    pub strict: bool,
}

impl Layered for ValidateArgs {
    fn defaults() -> Self {
        ValidateArgs::default()
    }
}

pub(crate) fn validate(ctx: &Context, flags: &ValidateArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let d = load_dataset(need(&a.input, "input")?)?;
    let u = universe_of(&d)?;
    let r = validate_ugc(&d, &u)?;
    let valid = r.is_valid();
    emit(a.report.as_deref(), &ctx.report(None, &a, &r)?)?;
    if !valid {
        eprintln!("{} witness(es) found", r.witnesses.len());
    }
    Ok(if a.strict && !valid { EXIT_WITNESSES } else { EXIT_OK })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DistanceArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["ID1", "ID2"])]
    pub pair: Option<Vec<String>>,
    /// Branch-and-bound search (n ≤ 10). Default when the graphs are small enough.
    #[arg(long, conflicts_with = "heuristic")]
    pub exact: bool,
    /// Refinement-guided matching with swap descent; an upper bound.
    #[arg(long)]
    pub heuristic: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl Layered for DistanceArgs {
    fn defaults() -> Self {
        DistanceArgs::default()
    }
}

pub(crate) fn distance(ctx: &Context, flags: &DistanceArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    if a.exact && a.heuristic {
        return Err(usage("--exact and --heuristic are mutually exclusive"));
    }
    let d = load_dataset(need(&a.input, "input")?)?;
    let (id1, id2) = pair(&a.pair)?;
    let (g1, g2) = (d.require(&id1)?, d.require(&id2)?);
    let mode = if a.exact || (!a.heuristic && g1.n().max(g2.n()) <= EXACT_LIMIT) {
        DistanceMode::Exact
    } else {
        DistanceMode::Heuristic
    };
    let r = graph_distance(g1, g2, mode)?;
    emit(a.out.as_deref(), &ctx.report(None, &a, &r)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct IsotestArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["ID1", "ID2"])]
    pub pair: Option<Vec<String>>,
    /// Positional encoding for the WL test: `none`, `gc` or `ugc`.
    #[arg(long)]
    pub pe: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

impl Layered for IsotestArgs {
    fn defaults() -> Self {
        IsotestArgs {
            pe: Some("gc".into()),
            ..IsotestArgs::default()
        }
    }
}

pub(crate) fn isotest(ctx: &Context, flags: &IsotestArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let pe: PeKind = parse(&need(&a.pe, "pe")?)?;
    let d = load_dataset(need(&a.input, "input")?)?;
    let (id1, id2) = pair(&a.pair)?;
    let (g1, g2) = (d.require(&id1)?, d.require(&id2)?);
    let universe = match pe {
        PeKind::Ugc => Some(universe_of(&d)?),
        _ => None,
    };
    let iso = isomorphic(g1, g2)?;
    let verdict = wl_test(g1, g2, pe, universe.as_ref())?;
    println!("isomorphic: {iso}");
    println!(
        "wl distinguishable (pe={}): {} after {} round(s)",
        need(&a.pe, "pe")?,
        verdict.distinguishable,
        verdict.rounds
    );
    if let Some(path) = &a.report {
        let result = json!({ "isomorphic": iso, "wl": verdict });
        emit(Some(path), &ctx.report(None, &a, result)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenCslArgs {
    /// Cycle length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Skip lengths, one class each.
    #[arg(long, value_delimiter = ',')]
    pub skips: Option<Vec<usize>>,
    /// Relabelled copies per class.
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

impl Layered for GenCslArgs {
    fn defaults() -> Self {
        GenCslArgs {
            n: Some(DEFAULT_CSL_N),
            skips: Some(DEFAULT_CSL_SKIPS.to_vec()),
            copies: Some(DEFAULT_CSL_COPIES),
            seed: Some(0),
            out: None,
            report: None,
        }
    }
}

pub(crate) fn gen_csl(ctx: &Context, flags: &GenCslArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let seed = need(&a.seed, "seed")?;
    let skips = need(&a.skips, "skips")?;
    let d = csl_benchmark(need(&a.n, "n")?, &skips, need(&a.copies, "copies")?, seed)?;
    let summary = json!({ "classes": skips.len() });
    write_generated(ctx, Some(seed), &a, &d, a.out.as_deref(), a.report.as_deref(), summary)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenPairsArgs {
    /// `wl-hard` (cycle vs two cycles), `counterexample` (rank-shift pairs)
    /// or `figure2` (three triangles, one recoloured).
    #[arg(long)]
    pub kind: Option<String>,
    /// Smallest half-length for `wl-hard`.
    #[arg(long)]
    pub m_min: Option<usize>,
    /// Largest half-length for `wl-hard`.
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Graph size for `counterexample`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of `counterexample` pairs.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

impl Layered for GenPairsArgs {
    fn defaults() -> Self {
        GenPairsArgs {
            kind: Some("wl-hard".into()),
            m_min: Some(3),
            m_max: Some(10),
            n: Some(8),
            count: Some(10),
            seed: Some(0),
            out: None,
            report: None,
        }
    }
}

pub(crate) fn gen_pairs(ctx: &Context, flags: &GenPairsArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let seed = need(&a.seed, "seed")?;
    let mut pairs = Vec::new();
    match need(&a.kind, "kind")?.as_str() {
        "wl-hard" => {
            for m in need(&a.m_min, "m-min")?..=need(&a.m_max, "m-max")? {
                pairs.push(gen_wl_hard_pair(m)?);
            }
        }
        "counterexample" => {
            let n = need(&a.n, "n")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..need(&a.count, "count")? {
                let cx = gen_counterexample(n, &mut rng)?;
                pairs.push((
                    cx.g1.with_id(format!("cx{n}-{i:03}-g1")),
                    cx.g2.with_id(format!("cx{n}-{i:03}-g2")),
                ));
            }
        }
        "figure2" => pairs.push(figure2_pair()),
        other => {
            return Err(usage(format!(
                "unknown --kind `{other}` (expected wl-hard, counterexample or figure2)"
            )))
        }
    }
    let ids: Vec<[String; 2]> = pairs.iter().map(|(x, y)| [x.id().to_owned(), y.id().to_owned()]).collect();
    let d = GraphDataset::new(pairs.into_iter().flat_map(|(x, y)| [x, y]).collect())?;
    write_generated(ctx, Some(seed), &a, &d, a.out.as_deref(), a.report.as_deref(), json!({ "pairs": ids }))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Positional encoding: `none`, `gc` or `ugc`.
    #[arg(long)]
    pub pe: Option<String>,
    /// Readout: `sum`, `mean` or `ugc`.
    #[arg(long)]
    pub readout: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden width.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without held-out improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Gradient-norm cap; 0 disables clipping.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Number of stratified folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Held-out fold index.
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Diagonal per-label readout weights.
    #[arg(long)]
    pub w_diag: bool,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Write the trained model here.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

impl Layered for TrainArgs {
    fn defaults() -> Self {
        let o = TrainOptions::default();
        TrainArgs {
            pe: Some("gc".into()),
            readout: Some("mean".into()),
            layers: Some(3),
            dim: Some(32),
            lr: Some(o.learning_rate),
            momentum: Some(o.momentum),
            epochs: Some(o.max_epochs),
            patience: Some(o.patience),
            clip: Some(o.max_grad_norm.unwrap_or(0.0)),
            folds: Some(5),
            fold: Some(0),
            seed: Some(0),
            ..TrainArgs::default()
        }
    }
}

pub(crate) fn train(ctx: &Context, flags: &TrainArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let seed = need(&a.seed, "seed")?;
    let pe: PeKind = parse(&need(&a.pe, "pe")?)?;
    let readout: Readout = parse(&need(&a.readout, "readout")?)?;
    let (folds, fold) = (need(&a.folds, "folds")?, need(&a.fold, "fold")?);
    if fold >= folds {
        return Err(usage(format!("--fold {fold} is out of range for {folds} folds")));
    }
    let clip = need(&a.clip, "clip")?;
    if clip.is_nan() || clip < 0.0 {
        return Err(usage("--clip must be non-negative"));
    }
    let d = load_dataset(need(&a.input, "input")?)?;
    let data = prepare_inputs(&d, pe, readout, None)?;
    let ids = data.ids();
    let (tr, te) = stratified_folds(&data.targets(), folds, seed)?.swap_remove(fold);
    let split = Split {
        train_ids: tr.iter().map(|&i| ids[i].clone()).collect(),
        test_ids: te.iter().map(|&i| ids[i].clone()).collect(),
    };
    let mut config = MpnnConfig::new(data.input_width(), data.num_classes)
        .with_layers(need(&a.layers, "layers")?)
        .with_hidden_dim(need(&a.dim, "dim")?)
        .with_readout(readout)
        .with_seed(seed);
    config.w_diag = a.w_diag;
    let opts = TrainOptions {
        learning_rate: need(&a.lr, "lr")?,
        momentum: need(&a.momentum, "momentum")?,
        patience: need(&a.patience, "patience")?,
        max_epochs: need(&a.epochs, "epochs")?,
        max_grad_norm: (clip > 0.0).then_some(clip),
        record_timing: false,
    };
    let (model, report) = train_model(&config, &opts, &data, &split)?;
    if let Some(p) = &a.checkpoint {
        save_checkpoint(&model, p)?;
    }
    let result = json!({
        "train_size": split.train_ids.len(),
        "test_size": split.test_ids.len(),
        "test_ids": split.test_ids,
        "report": report,
    });
    emit(a.report.as_deref(), &ctx.report(Some(seed), &a, result)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ProbeArgs {
    /// Graph sizes to probe.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Counterexample pairs per size.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Also write per-trial rows as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

impl Layered for ProbeArgs {
    fn defaults() -> Self {
        ProbeArgs {
            sizes: Some(vec![6, 8, 10, 12]),
            trials: Some(20),
            seed: Some(0),
            report: None,
            csv: None,
        }
    }
}

pub(crate) fn probe(ctx: &Context, flags: &ProbeArgs) -> CliResult<i32> {
    let a = ctx.layered(flags)?;
    let seed = need(&a.seed, "seed")?;
    let r = run_probe(&need(&a.sizes, "sizes")?, need(&a.trials, "trials")?, seed)?;
    if let Some(p) = &a.csv {
        emit(Some(p), &r.to_csv())?;
    }
    emit(a.report.as_deref(), &ctx.report(Some(seed), &a, &r)?)?;
    Ok(EXIT_OK)
}
