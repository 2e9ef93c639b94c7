use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelInput, MpnnConfig, MpnnModel, Readout};
use crate::canon::canonical_form;
use crate::dataset::GraphDataset;
use crate::error::{Error, Result};
use crate::features::{concat_features, one_hot_colors, one_hot_ranks};
use crate::ugc::{build_universe, ugc_colouring, LabelUniverse};
use crate::wl::PeKind;

/// Model inputs for a whole dataset plus the widths they were built with.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub inputs: Vec<ModelInput>,
    pub color_width: usize,
    pub pe_width: usize,
    pub num_classes: usize,
}

impl PreparedData {
    pub fn input_width(&self) -> usize {
        self.color_width + self.pe_width
    }

    pub fn ids(&self) -> Vec<String> {
        self.inputs.iter().map(|x| x.id.clone()).collect()
    }

    pub fn targets(&self) -> Vec<usize> {
        self.inputs.iter().map(|x| x.target.unwrap_or(0)).collect()
    }
}

/// Builds `X ⊕ P` for every graph: one-hot colors, then one-hot GC or UGC
/// ranks (nothing for `pe = none`). A UGC colouring is attached whenever the
/// encoding or the readout needs one.
pub fn prepare_inputs(
    d: &GraphDataset,
    pe: PeKind,
    readout: Readout,
    universe: Option<&LabelUniverse>,
) -> Result<PreparedData> {
    let targets = d.class_targets()?;
    let color_width = d.max_color().map_or(1, |c| c as usize + 1);
    let needs_ugc = pe == PeKind::Ugc || readout == Readout::UgcWeighted;
    let owned;
    let universe = match (needs_ugc, universe) {
        (false, _) => None,
        (true, Some(u)) => Some(u),
        (true, None) => {
            owned = build_universe(d)?;
            Some(&owned)
        }
    };
    let pe_width = match pe {
        PeKind::None => 0,
        PeKind::Gc => d.max_nodes(),
        PeKind::Ugc => universe.map_or(0, LabelUniverse::len),
    };
    let inputs = d
        .graphs()
        .par_iter()
        .zip(&targets)
        .map(|(g, &t)| {
            let x = one_hot_colors(g, color_width)?;
            let ugc = universe.map(|u| ugc_colouring(g, u)).transpose()?;
            let x = match pe {
                PeKind::None => x,
                PeKind::Gc => concat_features(&x, &one_hot_ranks(&canonical_form(g)?.colouring, pe_width)?)?,
                PeKind::Ugc => concat_features(&x, &one_hot_ranks(ugc.as_ref().expect("built"), pe_width)?)?,
            };
            Ok(ModelInput::new(g, &x, ugc.as_ref())?.with_target(Some(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData {
        inputs,
        color_width,
        pe_width,
        num_classes: targets.iter().max().map_or(0, |m| m + 1),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Stratified `k`-fold partition of indices: each class is shuffled with the
/// seeded stream and dealt round-robin across folds. Returns `(train, test)`
/// index lists, both sorted.
pub fn stratified_folds(targets: &[usize], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > targets.len() {
        return Err(Error::Config(format!(
            "cannot split {} graphs into {k} folds",
            targets.len()
        )));
    }
    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &t) in targets.iter().enumerate() {
        by_class.entry(t).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; targets.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..targets.len()).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Epochs without a held-out loss improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Rescale the full gradient to at most this norm before each step.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
    /// Fill [`TrainReport::wall_clock_seconds`]; off keeps reports byte-stable.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 1e-3,
            momentum: 0.9,
            patience: 10,
            max_epochs: 300,
            max_grad_norm: Some(1.0),
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (lowest held-out loss).
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub stopped_early: bool,
    pub parameter_digest: String,
    pub wall_clock_seconds: Option<f64>,
}

fn select<'a>(data: &'a PreparedData, ids: &[String]) -> Result<Vec<ModelInput>> {
    let index: HashMap<&str, &'a ModelInput> = data.inputs.iter().map(|x| (x.id.as_str(), x)).collect();
    let mut out = ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|x| (*x).clone())
                .ok_or_else(|| Error::Parameter(format!("split names unknown graph `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Full-batch momentum descent with early stopping on the held-out loss.
/// The returned model carries the parameters of the best epoch.
pub fn train(
    config: &MpnnConfig,
    opts: &TrainOptions,
    data: &PreparedData,
    split: &Split,
) -> Result<(MpnnModel, TrainReport)> {
    if split.train_ids.is_empty() || split.test_ids.is_empty() {
        return Err(Error::Config("train and test splits must both be non-empty".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate.is_finite()) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let start = Instant::now();
    let train_set = select(data, &split.train_ids)?;
    let test_set = select(data, &split.test_ids)?;
    let mut model = MpnnModel::new(config.clone())?;
    let mut velocity = model.zero_gradients();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut epochs = Vec::new();
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=opts.max_epochs {
        let (loss, mut grads) = model.loss_and_gradients(&train_set)?;
        if let Some(c) = opts.max_grad_norm {
            let norm = grads.norm();
            if norm > c {
                grads.scale(c / norm);
            }
        }
        model.momentum_step(&mut velocity, &grads, opts.learning_rate, opts.momentum);
        if !model.params_finite() {
            return Err(Error::Numeric(format!(
                "parameters became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
        let test_loss = model.loss(&test_set)?;
        epochs.push(EpochRecord {
            epoch,
            loss,
            train_accuracy: model.accuracy(&train_set)?,
            test_loss,
            test_accuracy: model.accuracy(&test_set)?,
        });
        if test_loss < best.0 {
            best = (test_loss, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, best_epoch, model) = best;
    let report = TrainReport {
        best_epoch,
        train_accuracy: model.accuracy(&train_set)?,
        test_accuracy: model.accuracy(&test_set)?,
        stopped_early,
        parameter_digest: model.digest(),
        wall_clock_seconds: opts.record_timing.then(|| start.elapsed().as_secs_f64()),
        epochs,
    };
    Ok((model, report))
}
