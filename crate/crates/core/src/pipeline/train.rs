//! The optimization loop.
//!
//! Each epoch shuffles the training set with the shuffle stream, walks it in
//! batches, and takes one Adam step per batch on the mean token NLL over
//! `B × M_padded` positions (padding included). Per-instance gradients are
//! computed in parallel and summed in batch order, so results do not depend
//! on the thread count. After every epoch the model is decoded on the
//! evaluation file and the best-SA parameters are kept.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::load_dataset;
use crate::error::{Error, Result};
use crate::evaluation::{detection_f1, sequence_accuracy, TaggedSequence};
use crate::graph::Graph;
use crate::model::DiscModel;
use crate::params::{Adam, Gradients};
use crate::tagger::{nll_sum_node, PredictionRecord};
use crate::tokenization::CharAlphabet;

use super::checkpoint::Checkpoint;
use super::config::Config;
use super::data::{Batch, Prepared, Resources};
use super::predict::predict_prepared;
use super::seed::{seed_all, Rngs};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the batch losses, in training mode.
    pub train_loss: f64,
    pub test_sa: f64,
    pub test_f1: f64,
    pub validation_sa: Option<f64>,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    /// Eval-mode mean token NLL on the training set before the first step.
    pub initial_loss: f64,
    /// Eval-mode mean token NLL on the training set with the final weights.
    pub final_loss: f64,
}

/// Where the loop reports progress.
pub trait TrainObserver {
    fn epoch_end(&mut self, _record: &EpochRecord) {}
}

impl TrainObserver for () {}

impl<F: FnMut(&EpochRecord)> TrainObserver for F {
    fn epoch_end(&mut self, record: &EpochRecord) {
        self(record)
    }
}

/// Loads data and resources named by `config`, trains, and writes the best
/// checkpoint to `config.checkpoint_dir`.
pub fn train(config: &Config, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    let resources = Resources::load(config)?;
    let train_set = resources.prepare(&load_dataset(&config.train_file)?)?;
    let test_set = resources.prepare(&load_dataset(&config.test_file)?)?;
    let validation = match &config.validation_file {
        Some(p) => Some(resources.prepare(&load_dataset(p)?)?),
        None => None,
    };
    let outcome = train_prepared(config, &resources, &train_set, &test_set, validation.as_deref(), observer)?;
    outcome.checkpoint.save(&config.checkpoint_dir)?;
    let history = serde_json::to_string_pretty(&outcome.history)?;
    let path = config.checkpoint_dir.join("history.json");
    std::fs::write(&path, history).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(outcome)
}

fn scores(records: &[PredictionRecord]) -> Result<(f64, f64)> {
    let (p, g): (Vec<_>, Vec<_>) = records
        .iter()
        .map(|r| {
            (
                TaggedSequence::new(r.id.clone(), r.pred_labels.clone()),
                TaggedSequence::new(r.id.clone(), r.gold_labels.clone()),
            )
        })
        .unzip();
    Ok((sequence_accuracy(&p, &g)?, detection_f1(&p, &g)?.0))
}

/// Eval-mode mean token NLL over unpadded positions of every instance.
pub fn mean_loss(model: &DiscModel, data: &[Prepared]) -> Result<f64> {
    let parts: Vec<(f64, usize)> = data
        .par_iter()
        .map(|p| {
            let mut g = Graph::new(&model.store);
            let lp = model.forward::<rand_chacha::ChaCha8Rng>(&mut g, p.input(), p.m(), None)?;
            let nll = nll_sum_node(&mut g, lp, &p.gold)?;
            Ok((g.scalar(nll), p.m()))
        })
        .collect::<Result<_>>()?;
    let (sum, n) = parts.iter().fold((0.0, 0), |(s, n), (l, m)| (s + l, n + m));
    Ok(sum / n.max(1) as f64)
}

/// Loss and summed gradients of one batch. The loss is the mean over all
/// `len × m_padded` positions.
pub fn batch_gradients(
    model: &DiscModel,
    data: &[Prepared],
    batch: &Batch,
    dropout: f64,
    rngs: &Rngs,
    step: u64,
) -> Result<(f64, Gradients)> {
    let scale = 1.0 / (batch.len() * batch.m_padded) as f64;
    let mut total = Gradients::zeros_like(&model.store);
    let mut loss = 0.0;
    let width = rayon::current_num_threads().max(1);
    let slots: Vec<usize> = (0..batch.len()).collect();
    for chunk in slots.chunks(width) {
        let parts: Vec<(f64, Gradients)> = chunk
            .par_iter()
            .map(|&slot| {
                let p = &data[batch.indices[slot]];
                let mut g = Graph::new(&model.store);
                let mut rng = rngs.dropout(step, slot);
                let drop = (dropout > 0.0).then_some((dropout, &mut rng));
                let lp = model.forward(&mut g, p.input(), batch.m_padded, drop)?;
                let nll = nll_sum_node(&mut g, lp, &batch.gold[slot])?;
                let value = g.scalar(nll);
                g.backward(nll, scale);
                let mut grads = Gradients::zeros_like(&model.store);
                g.accumulate_param_grads(&mut grads);
                Ok((value, grads))
            })
            .collect::<Result<_>>()?;
        for (value, grads) in &parts {
            loss += value * scale;
            total.merge(grads);
        }
    }
    Ok((loss, total))
}

/// The loop over already prepared data. Selection uses `validation` when
/// given, else `test`.
pub fn train_prepared(
    config: &Config,
    resources: &Resources,
    train_set: &[Prepared],
    test_set: &[Prepared],
    validation: Option<&[Prepared]>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Config("training and test sets must be nonempty".into()));
    }
    let mut rngs = seed_all(config.seed);
    let alphabet = CharAlphabet::default().size();
    let mut model = DiscModel::new(config.dims, config.architecture, alphabet, &mut rngs.init)?;
    let mut adam = Adam::new(config.adam(), &model.store);
    let initial_loss = mean_loss(&model, train_set)?;

    let metric_name = if validation.is_some() { "validation_sa" } else { "test_sa" };
    let mut best: Option<(f64, usize, crate::params::ParamStore)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0u64;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rngs.shuffle);
        let mut losses = Vec::new();
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch = Batch::collate(train_set, idx);
            let (loss, mut grads) = batch_gradients(&model, train_set, &batch, config.dropout, &rngs, step)?;
            if !loss.is_finite() || !grads.global_norm().is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            grads.clip_global_norm(config.clip_norm);
            adam.step(&mut model.store, &grads);
            losses.push(loss);
            step += 1;
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let (test_sa, test_f1) = scores(&predict_prepared(&model, test_set, config.span_rule)?)?;
        let validation_sa = match validation {
            Some(v) => Some(scores(&predict_prepared(&model, v, config.span_rule)?)?.0),
            None => None,
        };
        let selected = validation_sa.unwrap_or(test_sa);
        let improved = best.as_ref().map_or(true, |(b, _, _)| selected > *b);
        if improved {
            best = Some((selected, epoch, model.store.clone()));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            test_sa,
            test_f1,
            validation_sa,
            improved,
        };
        observer.epoch_end(&record);
        history.push(record);
        if config.target_sa.is_some_and(|t| selected >= t) {
            break;
        }
    }

    let final_loss = mean_loss(&model, train_set)?;
    let (value, epoch, store) = best.expect("at least one epoch ran");
    model.store = store;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            model,
            vocab: resources.tokenizer.vocab.clone(),
            epoch,
            metric_name: metric_name.to_string(),
            metric_value: value,
        },
        history,
        initial_loss,
        final_loss,
    })
}
