//! A small message-passing network with hand-written reverse-mode gradients.
//!
//! Layer update: `h' = φ((1+ε)·h_v + Σ_{u∈N(v)} h_u)` with
//! `φ(x) = ReLU(W2·ReLU(W1·x + b1) + b2)`. Readouts: sum, mean, or the
//! label-indexed `Σ_v W_{τ(v)} h_v`. An affine head produces class logits.

mod checkpoint;
mod lipschitz;
mod train;

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use lipschitz::{spectral_norm_estimate, spectral_norm_upper_bound};
pub use train::{
    prepare_inputs, stratified_folds, train, EpochRecord, PreparedData, Split, TrainOptions,
    TrainReport,
};

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::graph::{ColoredGraph, ColouringMode, DiscreteColouring};

/// Head weights start this much smaller than He-uniform so the first logits
/// sit near zero; unnormalised sum aggregation makes embeddings large.
pub const HEAD_INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Sum,
    Mean,
    UgcWeighted,
}

impl std::str::FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Readout::Sum),
            "mean" => Ok(Readout::Mean),
            "ugc" | "ugc_weighted" => Ok(Readout::UgcWeighted),
            other => Err(Error::Parameter(format!(
                "unknown readout `{other}` (expected sum, mean or ugc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpnnConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// One ε per layer; fixed, not trained.
    pub epsilon: Vec<f64>,
    pub readout: Readout,
    pub input_width: usize,
    pub num_classes: usize,
    pub seed: u64,
    /// Store each readout matrix `W_k` as its diagonal only.
    #[serde(default)]
    pub w_diag: bool,
}

impl MpnnConfig {
    pub fn new(input_width: usize, num_classes: usize) -> Self {
        MpnnConfig {
            num_layers: 3,
            hidden_dim: 32,
            epsilon: vec![0.0; 3],
            readout: Readout::Sum,
            input_width,
            num_classes,
            seed: 0,
            w_diag: false,
        }
    }

    pub fn with_layers(mut self, num_layers: usize) -> Self {
        self.num_layers = num_layers;
        self.epsilon = vec![self.epsilon.first().copied().unwrap_or(0.0); num_layers];
        self
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1".into());
        }
        if self.hidden_dim == 0 || self.input_width == 0 || self.num_classes == 0 {
            return bad("hidden_dim, input_width and num_classes must be positive".into());
        }
        if self.epsilon.len() != self.num_layers {
            return bad(format!(
                "{} epsilon values for {} layers",
                self.epsilon.len(),
                self.num_layers
            ));
        }
        if self.epsilon.iter().any(|e| !e.is_finite()) {
            return bad("epsilon must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `hidden × in`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `hidden × hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// All trainable values. Gradients use the same type; a readout rank missing
/// from a gradient has zero gradient, and one missing from a model stands
/// for the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<LayerParams>,
    /// Rank → flattened `W_k` (row-major `d×d`, or the diagonal of length `d`).
    pub readout: BTreeMap<usize, Array1<f64>>,
    /// `classes × hidden`
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl Params {
    fn zeros(cfg: &MpnnConfig) -> Self {
        let d = cfg.hidden_dim;
        let layers = (0..cfg.num_layers)
            .map(|t| LayerParams {
                w1: Array2::zeros((d, if t == 0 { cfg.input_width } else { d })),
                b1: Array1::zeros(d),
                w2: Array2::zeros((d, d)),
                b2: Array1::zeros(d),
            })
            .collect();
        Params {
            layers,
            readout: BTreeMap::new(),
            head_w: Array2::zeros((cfg.num_classes, d)),
            head_b: Array1::zeros(cfg.num_classes),
        }
    }

    /// Named parameter groups in a fixed order.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (t, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{t}.w1"), slice(&l.w1)));
            out.push((format!("layer{t}.b1"), l.b1.as_slice().expect("contiguous")));
            out.push((format!("layer{t}.w2"), slice(&l.w2)));
            out.push((format!("layer{t}.b2"), l.b2.as_slice().expect("contiguous")));
        }
        for (k, w) in &self.readout {
            out.push((format!("readout.w[{k}]"), w.as_slice().expect("contiguous")));
        }
        out.push(("head.w".into(), slice(&self.head_w)));
        out.push(("head.b".into(), self.head_b.as_slice().expect("contiguous")));
        out
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.groups().into_iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn group_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        if let Some(rest) = name.strip_prefix("readout.w[") {
            let k: usize = rest.strip_suffix(']')?.parse().ok()?;
            return self.readout.get_mut(&k)?.as_slice_mut();
        }
        match name {
            "head.w" => return self.head_w.as_slice_mut(),
            "head.b" => return self.head_b.as_slice_mut(),
            _ => {}
        }
        let (layer, field) = name.strip_prefix("layer")?.split_once('.')?;
        let l = self.layers.get_mut(layer.parse::<usize>().ok()?)?;
        match field {
            "w1" => l.w1.as_slice_mut(),
            "b1" => l.b1.as_slice_mut(),
            "w2" => l.w2.as_slice_mut(),
            "b2" => l.b2.as_slice_mut(),
            _ => None,
        }
    }

    pub fn num_values(&self) -> usize {
        self.groups().iter().map(|(_, v)| v.len()).sum()
    }

    fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w1 += &b.w1;
            a.b1 += &b.b1;
            a.w2 += &b.w2;
            a.b2 += &b.b2;
        }
        for (k, w) in &other.readout {
            match self.readout.get_mut(k) {
                Some(a) => *a += w,
                None => {
                    self.readout.insert(*k, w.clone());
                }
            }
        }
        self.head_w += &other.head_w;
        self.head_b += &other.head_b;
    }

    /// Euclidean norm over every value in every group.
    pub fn norm(&self) -> f64 {
        self.groups().iter().flat_map(|(_, v)| v.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w1 *= s;
            l.b1 *= s;
            l.w2 *= s;
            l.b2 *= s;
        }
        self.readout.values_mut().for_each(|w| *w *= s);
        self.head_w *= s;
        self.head_b *= s;
    }

    fn all_finite(&self) -> bool {
        self.groups().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

/// One graph prepared for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub id: String,
    adjacency: Vec<Vec<usize>>,
    features: Array2<f64>,
    colouring: Option<DiscreteColouring>,
    pub target: Option<usize>,
}

impl ModelInput {
    pub fn new(g: &ColoredGraph, features: &FeatureTensor, colouring: Option<&DiscreteColouring>) -> Result<Self> {
        if features.rows() != g.n() {
            return Err(Error::dim(format!(
                "graph `{}` has {} nodes but {} feature rows",
                g.id(),
                g.n(),
                features.rows()
            )));
        }
        if let Some(c) = colouring {
            if c.len() != g.n() {
                return Err(Error::dim(format!(
                    "colouring of length {} for graph `{}` with {} nodes",
                    c.len(),
                    g.id(),
                    g.n()
                )));
            }
        }
        let features = Array2::from_shape_vec((features.rows(), features.cols()), features.as_slice().to_vec())
            .map_err(|e| Error::dim(e.to_string()))?;
        Ok(ModelInput {
            id: g.id().to_owned(),
            adjacency: g.adjacency_lists(),
            features,
            colouring: colouring.cloned(),
            target: g.target().and_then(|t| t.as_class()),
        })
    }

    pub fn with_target(mut self, target: Option<usize>) -> Self {
        self.target = target;
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    pub fn colouring(&self) -> Option<&DiscreteColouring> {
        self.colouring.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub embedding: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    z: Array2<f64>,
    a1: Array2<f64>,
    r1: Array2<f64>,
    a2: Array2<f64>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    node_repr: Array2<f64>,
    embedding: Array1<f64>,
    logits: Array1<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> ForwardOutput {
        ForwardOutput {
            embedding: self.embedding.to_vec(),
            logits: self.logits.to_vec(),
        }
    }

    /// Sign pattern of every rectifier input (`true` when strictly positive).
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| l.a1.iter().chain(l.a2.iter()).map(|&x| x > 0.0))
            .collect()
    }

    /// Smallest `|x|` over all rectifier inputs: distance to the nearest kink.
    pub fn kink_margin(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.a1.iter().chain(l.a2.iter()))
            .fold(f64::INFINITY, |m, &x| m.min(x.abs()))
    }
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| x.max(0.0))
}

/// `(1+ε)·h_v + Σ_{u∈N(v)} h_u` for every node.
fn aggregate(adj: &[Vec<usize>], h: &Array2<f64>, eps: f64) -> Array2<f64> {
    let mut z = h * (1.0 + eps);
    for (v, nbrs) in adj.iter().enumerate() {
        let mut row = z.row_mut(v);
        for &u in nbrs {
            row += &h.row(u);
        }
    }
    z
}

fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|x| (x - m).exp());
    let s = e.sum();
    e / s
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn cross_entropy(logits: ArrayView1<f64>, target: usize) -> f64 {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + logits.mapv(|x| (x - m).exp()).sum().ln();
    lse - logits[target]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpnnModel {
    config: MpnnConfig,
    params: Params,
}

impl MpnnModel {
    /// He-uniform weights (head scaled by [`HEAD_INIT_SCALE`]), zero biases,
    /// empty readout bank, seeded by `config.seed`.
    pub fn new(config: MpnnConfig) -> Result<Self> {
        config.validate()?;
        let mut params = Params::zeros(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fill = |w: &mut Array2<f64>, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.gen_range(-bound..bound));
        };
        for l in &mut params.layers {
            fill(&mut l.w1, &mut rng);
            fill(&mut l.w2, &mut rng);
        }
        fill(&mut params.head_w, &mut rng);
        params.head_w *= HEAD_INIT_SCALE;
        Ok(MpnnModel { config, params })
    }

    pub(crate) fn from_parts(config: MpnnConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let expected = Params::zeros(&config);
        let shapes_match = params.layers.len() == expected.layers.len()
            && params.layers.iter().zip(&expected.layers).all(|(a, b)| {
                a.w1.dim() == b.w1.dim() && a.b1.dim() == b.b1.dim() && a.w2.dim() == b.w2.dim() && a.b2.dim() == b.b2.dim()
            })
            && params.head_w.dim() == expected.head_w.dim()
            && params.head_b.dim() == expected.head_b.dim()
            && params
                .readout
                .values()
                .all(|w| w.len() == readout_len(&config));
        if !shapes_match {
            return Err(Error::dim("parameter shapes do not match the configuration"));
        }
        Ok(MpnnModel { config, params })
    }

    pub fn config(&self) -> &MpnnConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Allocates identity readout matrices for `ranks` that have none yet.
    pub fn ensure_readout_ranks(&mut self, ranks: impl IntoIterator<Item = usize>) {
        for k in ranks {
            let id = self.identity_readout();
            self.params.readout.entry(k).or_insert(id);
        }
    }

    fn identity_readout(&self) -> Array1<f64> {
        let d = self.config.hidden_dim;
        if self.config.w_diag {
            Array1::ones(d)
        } else {
            Array1::from_iter((0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }))
        }
    }

    fn check_input(&self, x: &ModelInput) -> Result<()> {
        if x.feature_width() != self.config.input_width {
            return Err(Error::dim(format!(
                "graph `{}` has feature width {} but the model expects {}",
                x.id,
                x.feature_width(),
                self.config.input_width
            )));
        }
        if self.config.readout == Readout::UgcWeighted
            && x.colouring.as_ref().map(DiscreteColouring::mode) != Some(ColouringMode::Ugc)
        {
            return Err(Error::Config(format!(
                "ugc_weighted readout needs a UGC colouring for graph `{}`",
                x.id
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &ModelInput) -> Result<ForwardOutput> {
        Ok(self.forward_cached(x)?.output())
    }

    pub fn forward_cached(&self, x: &ModelInput) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut h = x.features.clone();
        let mut layers = Vec::with_capacity(self.config.num_layers);
        for (l, &eps) in self.params.layers.iter().zip(&self.config.epsilon) {
            let z = aggregate(&x.adjacency, &h, eps);
            let a1 = z.dot(&l.w1.t()) + &l.b1;
            let r1 = relu(&a1);
            let a2 = r1.dot(&l.w2.t()) + &l.b2;
            h = relu(&a2);
            layers.push(LayerCache { z, a1, r1, a2 });
        }
        let embedding = match self.config.readout {
            Readout::Sum => h.sum_axis(Axis(0)),
            Readout::Mean => h.sum_axis(Axis(0)) / x.n() as f64,
            Readout::UgcWeighted => {
                let c = x.colouring.as_ref().expect("checked");
                let mut e = Array1::zeros(self.config.hidden_dim);
                for v in 0..x.n() {
                    e += &self.apply_readout(c.rank(v), h.row(v));
                }
                e
            }
        };
        let logits = self.params.head_w.dot(&embedding) + &self.params.head_b;
        Ok(ForwardCache {
            layers,
            node_repr: h,
            embedding,
            logits,
        })
    }

    fn readout_view<'a>(&self, w: &'a Array1<f64>) -> ArrayView2<'a, f64> {
        let d = self.config.hidden_dim;
        ArrayView2::from_shape((d, d), w.as_slice().expect("contiguous")).expect("dense readout shape")
    }

    fn apply_readout(&self, k: usize, h: ArrayView1<f64>) -> Array1<f64> {
        match self.params.readout.get(&k) {
            None => h.to_owned(),
            Some(w) if self.config.w_diag => w * &h,
            Some(w) => self.readout_view(w).dot(&h),
        }
    }

    fn readout_transpose(&self, k: usize, g: ArrayView1<f64>) -> Array1<f64> {
        match self.params.readout.get(&k) {
            None => g.to_owned(),
            Some(w) if self.config.w_diag => w * &g,
            Some(w) => self.readout_view(w).t().dot(&g),
        }
    }

    /// Zero-valued gradient container shaped like this model (empty readout bank).
    pub fn zero_gradients(&self) -> Params {
        Params::zeros(&self.config)
    }

    /// Back-propagates `d_logits = ∂L/∂logits` through one cached forward pass,
    /// accumulating into `grads`.
    pub fn backward(&self, x: &ModelInput, cache: &ForwardCache, d_logits: &[f64], grads: &mut Params) -> Result<()> {
        if d_logits.len() != self.config.num_classes {
            return Err(Error::dim("upstream gradient length differs from class count"));
        }
        let dl = ArrayView1::from(d_logits);
        let e = &cache.embedding;
        grads.head_w += &outer(dl, e.view());
        grads.head_b += &dl;
        let de = self.params.head_w.t().dot(&dl);

        let n = x.n();
        let d = self.config.hidden_dim;
        let mut dh = Array2::zeros((n, d));
        match self.config.readout {
            Readout::Sum => dh.rows_mut().into_iter().for_each(|mut r| r.assign(&de)),
            Readout::Mean => {
                let scaled = &de / n as f64;
                dh.rows_mut().into_iter().for_each(|mut r| r.assign(&scaled));
            }
            Readout::UgcWeighted => {
                let c = x.colouring.as_ref().expect("checked in forward");
                let diag = self.config.w_diag;
                for v in 0..n {
                    let k = c.rank(v);
                    let hv = cache.node_repr.row(v);
                    dh.row_mut(v).assign(&self.readout_transpose(k, de.view()));
                    let gw = if diag {
                        &de * &hv
                    } else {
                        Array1::from_iter(outer(de.view(), hv))
                    };
                    match grads.readout.get_mut(&k) {
                        Some(acc) => *acc += &gw,
                        None => {
                            grads.readout.insert(k, gw);
                        }
                    }
                }
            }
        }

        for (t, (l, lc)) in self.params.layers.iter().zip(&cache.layers).enumerate().rev() {
            let g = &mut grads.layers[t];
            let da2 = &dh * &lc.a2.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            g.w2 += &da2.t().dot(&lc.r1);
            g.b2 += &da2.sum_axis(Axis(0));
            let dr1 = da2.dot(&l.w2);
            let da1 = &dr1 * &lc.a1.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            g.w1 += &da1.t().dot(&lc.z);
            g.b1 += &da1.sum_axis(Axis(0));
            let dz = da1.dot(&l.w1);
            if t > 0 {
                dh = aggregate(&x.adjacency, &dz, self.config.epsilon[t]);
            }
        }
        Ok(())
    }

    /// Mean cross-entropy over `batch` and its gradient. Per-graph gradients
    /// are computed in parallel and summed in batch order.
    pub fn loss_and_gradients(&self, batch: &[ModelInput]) -> Result<(f64, Params)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let parts = batch
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let target = x.target.ok_or_else(|| {
                    Error::Config(format!("graph `{}` has no class target", x.id))
                })?;
                if target >= self.config.num_classes {
                    return Err(Error::Config(format!(
                        "graph `{}` has target {target} but the model has {} classes",
                        x.id, self.config.num_classes
                    )));
                }
                let cache = self.forward_cached(x)?;
                let loss = cross_entropy(cache.logits.view(), target);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss on graph `{}` (batch index {i} of {})",
                        x.id,
                        batch.len()
                    )));
                }
                let mut dl = softmax(cache.logits.view());
                dl[target] -= 1.0;
                dl *= scale;
                let mut g = self.zero_gradients();
                self.backward(x, &cache, dl.as_slice().expect("contiguous"), &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = self.zero_gradients();
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            total.add_assign(g);
        }
        Ok((loss * scale, total))
    }

    pub fn loss(&self, batch: &[ModelInput]) -> Result<f64> {
        let mut total = 0.0;
        for x in batch {
            let target = x
                .target
                .ok_or_else(|| Error::Config(format!("graph `{}` has no class target", x.id)))?;
            total += cross_entropy(self.forward_cached(x)?.logits.view(), target);
        }
        Ok(total / batch.len().max(1) as f64)
    }

    pub fn predict(&self, x: &ModelInput) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.logits))
    }

    pub fn accuracy(&self, batch: &[ModelInput]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let correct = batch
            .par_iter()
            .map(|x| Ok(usize::from(Some(self.predict(x)?) == x.target)))
            .collect::<Result<Vec<_>>>()?;
        Ok(correct.iter().sum::<usize>() as f64 / batch.len() as f64)
    }

    /// `φ_t` applied to a single vector.
    pub fn phi(&self, layer: usize, x: &[f64]) -> Result<Vec<f64>> {
        let l = self
            .params
            .layers
            .get(layer)
            .ok_or_else(|| Error::Parameter(format!("no layer {layer}")))?;
        if x.len() != l.w1.ncols() {
            return Err(Error::dim("phi input width mismatch"));
        }
        let a1 = l.w1.dot(&ArrayView1::from(x)) + &l.b1;
        let a2 = l.w2.dot(&a1.mapv(|v| v.max(0.0))) + &l.b2;
        Ok(a2.mapv(|v| v.max(0.0)).to_vec())
    }

    /// `‖W2‖₂·‖W1‖₂` upper bound on the Lipschitz constant of `φ_t`.
    pub fn phi_lipschitz_bound(&self, layer: usize) -> Result<f64> {
        let l = self
            .params
            .layers
            .get(layer)
            .ok_or_else(|| Error::Parameter(format!("no layer {layer}")))?;
        Ok(spectral_norm_upper_bound(l.w1.view()) * spectral_norm_upper_bound(l.w2.view()))
    }

    /// SHA-256 of the checkpoint encoding, hex.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(checkpoint::encode(self)))
    }

    pub(crate) fn params_finite(&self) -> bool {
        self.params.all_finite()
    }

    /// Momentum step `v ← μv + g`, `θ ← θ − lr·v`. Readout ranks first seen in
    /// `grads` are allocated as identity.
    pub(crate) fn momentum_step(&mut self, velocity: &mut Params, grads: &Params, lr: f64, mu: f64) {
        self.ensure_readout_ranks(grads.readout.keys().copied());
        for k in self.params.readout.keys() {
            velocity
                .readout
                .entry(*k)
                .or_insert_with(|| Array1::zeros(readout_len(&self.config)));
        }
        velocity.layers.iter_mut().zip(&grads.layers).for_each(|(v, g)| {
            v.w1 = &v.w1 * mu + &g.w1;
            v.b1 = &v.b1 * mu + &g.b1;
            v.w2 = &v.w2 * mu + &g.w2;
            v.b2 = &v.b2 * mu + &g.b2;
        });
        for (k, v) in velocity.readout.iter_mut() {
            *v *= mu;
            if let Some(g) = grads.readout.get(k) {
                *v += g;
            }
        }
        velocity.head_w = &velocity.head_w * mu + &grads.head_w;
        velocity.head_b = &velocity.head_b * mu + &grads.head_b;

        for (p, v) in self.params.layers.iter_mut().zip(&velocity.layers) {
            p.w1.scaled_add(-lr, &v.w1);
            p.b1.scaled_add(-lr, &v.b1);
            p.w2.scaled_add(-lr, &v.w2);
            p.b2.scaled_add(-lr, &v.b2);
        }
        for (k, p) in self.params.readout.iter_mut() {
            p.scaled_add(-lr, &velocity.readout[k]);
        }
        self.params.head_w.scaled_add(-lr, &velocity.head_w);
        self.params.head_b.scaled_add(-lr, &velocity.head_b);
    }
}

fn readout_len(cfg: &MpnnConfig) -> usize {
    if cfg.w_diag {
        cfg.hidden_dim
    } else {
        cfg.hidden_dim * cfg.hidden_dim
    }
}

/// `a bᵀ`
fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let col = a.slice(s![.., ndarray::NewAxis]);
    let row = b.slice(s![ndarray::NewAxis, ..]);
    &col * &row
}
