//! Eval-mode decoding of whole datasets into prediction dumps.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::model::DiscModel;
use crate::tagger::{decode, extract_spans, PredictionRecord, SpanRule};
use crate::tensor::Matrix;
use crate::tokenization::{Label, SubwordVocab, NUM_CLASSES};

use super::checkpoint::Checkpoint;
use super::data::{Prepared, Resources};

/// Anything that assigns per-position log-probabilities to a prepared
/// instance, `M×5`.
pub trait Scorer: Sync {
    fn log_probs(&self, p: &Prepared) -> Result<Matrix>;
}

impl Scorer for DiscModel {
    fn log_probs(&self, p: &Prepared) -> Result<Matrix> {
        DiscModel::log_probs(self, p.input(), p.m())
    }
}

/// Puts all mass on the gold label. Drives the dump path without a model.
#[derive(Clone, Copy, Debug, Default)]
pub struct GoldScorer;

impl Scorer for GoldScorer {
    fn log_probs(&self, p: &Prepared) -> Result<Matrix> {
        let mut m = Matrix::filled(p.gold.len(), NUM_CLASSES, f64::NEG_INFINITY);
        for (i, l) in p.gold.iter().enumerate() {
            m.set(i, l.index(), 0.0);
        }
        Ok(m)
    }
}

/// Always predicts the literal reading.
#[derive(Clone, Copy, Debug, Default)]
pub struct LiteralScorer;

impl Scorer for LiteralScorer {
    fn log_probs(&self, p: &Prepared) -> Result<Matrix> {
        let m = p.m();
        let mut out = Matrix::filled(m, NUM_CLASSES, f64::NEG_INFINITY);
        for i in 0..m {
            let l = match i {
                0 => Label::Start,
                _ if i == m - 1 => Label::End,
                _ => Label::Literal,
            };
            out.set(i, l.index(), 0.0);
        }
        Ok(out)
    }
}

pub fn predict_prepared(scorer: &dyn Scorer, prepared: &[Prepared], rule: SpanRule) -> Result<Vec<PredictionRecord>> {
    prepared
        .par_iter()
        .map(|p| {
            let labels = decode(&scorer.log_probs(p)?);
            let spans = extract_spans(&labels, &p.views, rule);
            Ok(PredictionRecord {
                id: p.instance.id.clone(),
                pred_span: spans.first(),
                pred_surface: spans.surface,
                pred_labels: labels,
                gold_labels: p.gold.clone(),
            })
        })
        .collect()
}

/// Resource overrides for predicting with a checkpoint on foreign data.
#[derive(Clone, Debug, Default)]
pub struct PredictOptions {
    pub contextual_cache: Option<PathBuf>,
    pub static_embeddings: Option<PathBuf>,
    /// Must equal the checkpoint's vocabulary when given.
    pub subword_vocab: Option<PathBuf>,
}

/// Loads the resources a checkpoint was trained with, applying overrides.
pub fn checkpoint_resources(ckpt: &Checkpoint, opts: &PredictOptions) -> Result<Resources> {
    let mut config = ckpt.config.clone();
    if let Some(p) = &opts.contextual_cache {
        config.contextual_cache = Some(p.clone());
    }
    if let Some(p) = &opts.static_embeddings {
        config.static_embeddings = Some(p.clone());
    }
    if let Some(p) = &opts.subword_vocab {
        let v = SubwordVocab::load(p)?;
        if v != ckpt.vocab {
            return Err(Error::Compatibility(format!(
                "vocabulary {} differs from the checkpoint's ({} vs {} entries)",
                p.display(),
                v.len(),
                ckpt.vocab.len()
            )));
        }
    }
    let alphabet = crate::tokenization::CharAlphabet::default().size();
    if ckpt.model.alphabet_size != alphabet {
        return Err(Error::Compatibility(format!(
            "checkpoint character alphabet has {} symbols, tokenizer has {alphabet}",
            ckpt.model.alphabet_size
        )));
    }
    Resources::with_vocab(&config, ckpt.vocab.clone())
}

pub fn predict(ckpt: &Checkpoint, dataset: &Dataset, opts: &PredictOptions) -> Result<Vec<PredictionRecord>> {
    let resources = checkpoint_resources(ckpt, opts)?;
    let prepared = resources.prepare(dataset)?;
    predict_prepared(&ckpt.model, &prepared, ckpt.config.span_rule)
}
