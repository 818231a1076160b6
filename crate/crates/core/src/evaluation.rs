//! Sequence accuracy, sentence-level detection F1, per-type and per-fixedness
//! breakdowns, training-count correlation and error categorization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{Dataset, Instance, Span};
use crate::error::{Error, Result};
use crate::pipeline::{predict, Checkpoint, PredictOptions};
use crate::tagger::PredictionRecord;
use crate::tokenization::Label;

/// A label sequence tagged with its instance id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSequence {
    pub id: String,
    pub labels: Vec<Label>,
}

impl TaggedSequence {
    pub fn new(id: impl Into<String>, labels: Vec<Label>) -> Self {
        TaggedSequence { id: id.into(), labels }
    }
}

/// Positions where the gold label is not padding.
fn evaluated(gold: &[Label]) -> impl Iterator<Item = usize> + '_ {
    gold.iter().enumerate().filter(|(_, l)| **l != Label::Padding).map(|(i, _)| i)
}

fn check_pair(pred: &TaggedSequence, gold: &TaggedSequence) -> Result<()> {
    if pred.id != gold.id {
        return Err(Error::Alignment(format!(
            "prediction {} paired with gold {}",
            pred.id, gold.id
        )));
    }
    if let Some(last) = evaluated(&gold.labels).last() {
        if pred.labels.len() <= last {
            return Err(Error::Alignment(format!(
                "{}: {} predicted labels for {} gold positions",
                pred.id,
                pred.labels.len(),
                last + 1
            )));
        }
    }
    Ok(())
}

/// True when every non-padding gold position is predicted exactly.
pub fn sequence_correct(pred: &[Label], gold: &[Label]) -> bool {
    evaluated(gold).all(|i| pred.get(i) == Some(&gold[i]))
}

fn predicts_idiom(pred: &[Label], gold: &[Label]) -> bool {
    evaluated(gold).any(|i| pred.get(i) == Some(&Label::Idiomatic))
}

fn check_all(preds: &[TaggedSequence], golds: &[TaggedSequence]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} gold sequences",
            preds.len(),
            golds.len()
        )));
    }
    preds.iter().zip(golds).try_for_each(|(p, g)| check_pair(p, g))
}

pub fn sequence_accuracy(preds: &[TaggedSequence], golds: &[TaggedSequence]) -> Result<f64> {
    check_all(preds, golds)?;
    if golds.is_empty() {
        return Ok(0.0);
    }
    let right = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| sequence_correct(&p.labels, &g.labels))
        .count();
    Ok(right as f64 / golds.len() as f64)
}

/// Sentence-level confusion counts, idiomatic usage being positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Zero when precision and recall are both zero.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn detection_f1(preds: &[TaggedSequence], golds: &[TaggedSequence]) -> Result<(f64, Confusion)> {
    check_all(preds, golds)?;
    let mut c = Confusion::default();
    for (p, g) in preds.iter().zip(golds) {
        c.add(predicts_idiom(&p.labels, &g.labels), g.labels.contains(&Label::Idiomatic));
    }
    Ok((c.f1(), c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub count: usize,
    pub mean_sa: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub per_type: BTreeMap<String, TypeScore>,
    /// Fraction of types whose mean SA is exactly 1.
    pub perfect_fraction: f64,
}

/// `items` are `(idiom type, sequence correct)` pairs.
pub fn per_type_breakdown<'a>(items: impl IntoIterator<Item = (&'a str, bool)>) -> TypeBreakdown {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (t, ok) in items {
        let e = acc.entry(t.to_string()).or_default();
        e.0 += 1;
        e.1 += ok as usize;
    }
    let per_type: BTreeMap<_, _> = acc
        .into_iter()
        .map(|(t, (n, ok))| {
            (
                t,
                TypeScore {
                    count: n,
                    mean_sa: ok as f64 / n as f64,
                },
            )
        })
        .collect();
    let perfect = per_type.values().filter(|s| s.mean_sa == 1.0).count();
    TypeBreakdown {
        perfect_fraction: ratio(perfect, per_type.len()),
        per_type,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScore {
    pub count: usize,
    pub f1: f64,
    pub sa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-tailed.
    pub p: f64,
    pub n: usize,
}

/// Pearson correlation with a two-tailed p-value from Student's t with
/// `n - 2` degrees of freedom.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Alignment(format!("{n} x values, {} y values", ys.len())));
    }
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!("need at least 3 pairs, got {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(CorrelationResult { r, p, n })
}

/// Correlates each type's training occurrence count with its mean test SA,
/// over the types present in both.
pub fn correlate_train_count_vs_sa(train: &Dataset, per_type: &BTreeMap<String, TypeScore>) -> Result<CorrelationResult> {
    let counts = train.type_counts();
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_type
        .iter()
        .filter_map(|(t, s)| counts.get(t.as_str()).map(|&c| (c as f64, s.mean_sa)))
        .unzip();
    pearson(&xs, &ys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    /// Gold idiomatic, nothing predicted.
    Missing,
    /// Gold literal, a span predicted.
    LiteralFp,
    /// Predicted span overlaps the gold span without matching it.
    Partial,
    /// Predicted span disjoint from the gold span; needs a human to tell an
    /// alternative reading from a meaningful candidate.
    AlternativeOrMeaningfulCandidate,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Missing,
        ErrorCategory::LiteralFp,
        ErrorCategory::Partial,
        ErrorCategory::AlternativeOrMeaningfulCandidate,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Missing => "missing",
            ErrorCategory::LiteralFp => "literal_fp",
            ErrorCategory::Partial => "partial",
            ErrorCategory::AlternativeOrMeaningfulCandidate => "alternative_or_meaningful_candidate",
            ErrorCategory::Other => "other",
        }
    }
}

/// Rules in order: missing, literal_fp, partial, alternative, other.
pub fn categorize(gold_span: Option<Span>, pred_span: Option<Span>) -> ErrorCategory {
    match (gold_span, pred_span) {
        (Some(_), None) => ErrorCategory::Missing,
        (None, Some(_)) => ErrorCategory::LiteralFp,
        (Some(g), Some(p)) if p != g && p.overlaps(&g) => ErrorCategory::Partial,
        (Some(g), Some(p)) if !p.overlaps(&g) => ErrorCategory::AlternativeOrMeaningfulCandidate,
        _ => ErrorCategory::Other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub id: String,
    pub category: ErrorCategory,
    pub idiom_type: String,
    pub sentence: String,
    pub gold_span: Option<Span>,
    pub gold_surface: String,
    pub pred_span: Option<Span>,
    pub pred_surface: String,
    pub needs_review: bool,
}

/// Dump records matched to their gold instances, in dump order.
pub fn align<'a>(records: &'a [PredictionRecord], gold: &'a Dataset) -> Result<Vec<(&'a PredictionRecord, &'a Instance)>> {
    if records.len() != gold.len() {
        return Err(Error::Alignment(format!(
            "{} predictions for {} gold instances",
            records.len(),
            gold.len()
        )));
    }
    let mut seen = HashMap::new();
    records
        .iter()
        .map(|r| {
            if seen.insert(r.id.as_str(), ()).is_some() {
                return Err(Error::Alignment(format!("duplicate prediction for {}", r.id)));
            }
            let inst = gold
                .get(&r.id)
                .ok_or_else(|| Error::Alignment(format!("prediction {} has no gold instance", r.id)))?;
            Ok((r, inst))
        })
        .collect()
}

fn record_correct(r: &PredictionRecord) -> bool {
    sequence_correct(&r.pred_labels, &r.gold_labels)
}

pub fn categorize_errors(records: &[PredictionRecord], gold: &Dataset) -> Result<Vec<ErrorCase>> {
    Ok(align(records, gold)?
        .into_iter()
        .filter(|(r, _)| !record_correct(r))
        .map(|(r, inst)| {
            let category = categorize(inst.span, r.pred_span);
            ErrorCase {
                id: r.id.clone(),
                category,
                idiom_type: inst.idiom_type.clone(),
                sentence: inst.sentence.clone(),
                gold_span: inst.span,
                gold_surface: inst.gold_surface(),
                pred_span: r.pred_span,
                pred_surface: r.pred_surface.clone(),
                needs_review: category == ErrorCategory::AlternativeOrMeaningfulCandidate,
            }
        })
        .collect())
}

pub fn write_error_review(path: impl AsRef<Path>, cases: &[ErrorCase]) -> Result<()> {
    let path = path.as_ref();
    let ctx = || format!("writing {}", path.display());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?);
    for c in cases {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n").map_err(|e| Error::io(ctx(), e))?;
    }
    out.flush().map_err(|e| Error::io(ctx(), e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source: Option<String>,
    pub target: String,
    pub n: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub sa: f64,
    pub confusion: Confusion,
    pub per_type_sa: BTreeMap<String, TypeScore>,
    pub perfect_type_fraction: f64,
    pub per_fixedness: BTreeMap<String, LevelScore>,
    pub error_counts: BTreeMap<ErrorCategory, usize>,
}

pub fn evaluate(records: &[PredictionRecord], gold: &Dataset) -> Result<EvalReport> {
    let pairs = align(records, gold)?;
    let mut preds = Vec::with_capacity(pairs.len());
    let mut golds = Vec::with_capacity(pairs.len());
    for (r, _) in &pairs {
        preds.push(TaggedSequence::new(r.id.clone(), r.pred_labels.clone()));
        golds.push(TaggedSequence::new(r.id.clone(), r.gold_labels.clone()));
    }
    let sa = sequence_accuracy(&preds, &golds)?;
    let (f1, confusion) = detection_f1(&preds, &golds)?;
    let types = per_type_breakdown(pairs.iter().map(|(r, i)| (i.idiom_type.as_str(), record_correct(r))));

    let mut levels: BTreeMap<String, (Vec<TaggedSequence>, Vec<TaggedSequence>)> = BTreeMap::new();
    for ((p, g), (_, inst)) in preds.iter().zip(&golds).zip(&pairs) {
        if let Some(f) = inst.fixedness {
            let e = levels.entry(f.as_str().to_string()).or_default();
            e.0.push(p.clone());
            e.1.push(g.clone());
        }
    }
    let mut per_fixedness = BTreeMap::new();
    for (level, (p, g)) in levels {
        per_fixedness.insert(
            level,
            LevelScore {
                count: g.len(),
                f1: detection_f1(&p, &g)?.0,
                sa: sequence_accuracy(&p, &g)?,
            },
        );
    }
    let mut error_counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for c in categorize_errors(records, gold)? {
        *error_counts.entry(c.category).or_default() += 1;
    }
    Ok(EvalReport {
        source: None,
        target: gold.name.clone(),
        n: golds.len(),
        f1,
        precision: confusion.precision(),
        recall: confusion.recall(),
        sa,
        confusion,
        per_type_sa: types.per_type,
        perfect_type_fraction: types.perfect_fraction,
        per_fixedness,
        error_counts,
    })
}

/// Predicts `target` with a checkpoint trained elsewhere and scores it.
pub fn cross_domain_eval(ckpt: &Checkpoint, source: &str, target: &Dataset, opts: &PredictOptions) -> Result<EvalReport> {
    let records = predict(ckpt, target, opts)?;
    let mut report = evaluate(&records, target)?;
    report.source = Some(source.to_string());
    Ok(report)
}

impl EvalReport {
    pub fn render_table(&self, by_type: bool, by_fixedness: bool) -> String {
        let mut s = String::new();
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        if let Some(src) = &self.source {
            let _ = writeln!(s, "source: {src}");
        }
        let _ = writeln!(s, "target: {}  ({} sentences)", self.target, self.n);
        let _ = writeln!(s, "{:<12}{:>10}", "metric", "value");
        let _ = writeln!(s, "{:<12}{:>10}", "F1", pct(self.f1));
        let _ = writeln!(s, "{:<12}{:>10}", "SA", pct(self.sa));
        let _ = writeln!(s, "{:<12}{:>10}", "precision", pct(self.precision));
        let _ = writeln!(s, "{:<12}{:>10}", "recall", pct(self.recall));
        let c = &self.confusion;
        let _ = writeln!(s, "confusion: tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn);
        let _ = writeln!(
            s,
            "idiom types: {}  perfect SA: {}%",
            self.per_type_sa.len(),
            pct(self.perfect_type_fraction)
        );
        if by_fixedness {
            let _ = writeln!(s, "\n{:<26}{:>7}{:>9}{:>9}", "fixedness", "n", "F1", "SA");
            for (level, l) in &self.per_fixedness {
                let _ = writeln!(s, "{level:<26}{:>7}{:>9}{:>9}", l.count, pct(l.f1), pct(l.sa));
            }
        }
        if by_type {
            let _ = writeln!(s, "\n{:<40}{:>7}{:>9}", "idiom type", "n", "SA");
            for (t, score) in &self.per_type_sa {
                let _ = writeln!(s, "{t:<40}{:>7}{:>9}", score.count, pct(score.mean_sa));
            }
        }
        let _ = writeln!(s, "\nerrors:");
        for (cat, n) in &self.error_counts {
            let _ = writeln!(s, "  {:<38}{n:>6}", cat.as_str());
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
