//! Prediction head, loss, decoding and span extraction.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{BiLstm, Linear};
use crate::params::ParamStore;
use crate::tensor::Matrix;
use crate::tokenization::{Label, TokenizedViews, NUM_CLASSES};

/// BiLSTM over the fused sequence followed by a per-token linear map to the
/// five classes and a log-softmax.
#[derive(Clone, Debug)]
pub struct PredictionHead {
    pub rnn: BiLstm,
    pub out: Linear,
    pub in_dim: usize,
}

impl PredictionHead {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, in_dim: usize, d_emb: usize, rng: &mut R) -> Self {
        assert!(d_emb % 2 == 0, "d_emb must be even");
        PredictionHead {
            rnn: BiLstm::new(store, "head.rnn", in_dim, d_emb / 2, rng),
            out: Linear::new(store, "head.out", d_emb, NUM_CLASSES, rng),
            in_dim,
        }
    }

    /// `M_padded×5` log-probabilities for a fused `M×in` sequence. Rows past
    /// `M` see a zero hidden state. `dropout` multiplies the linear layer's
    /// input when given (`M_padded×d_emb`).
    pub fn forward(&self, g: &mut Graph, fused: NodeId, m_padded: usize, dropout: Option<Matrix>) -> Result<NodeId> {
        let (m, width) = g.shape(fused);
        if width != self.in_dim {
            return Err(Error::Shape(format!("fused width {width}, head expects {}", self.in_dim)));
        }
        if m == 0 || m_padded < m {
            return Err(Error::Shape(format!("cannot pad {m} positions to {m_padded}")));
        }
        let hidden = self.rnn.forward(g, fused);
        let hidden = if m_padded > m {
            let idx = (0..m_padded).map(|i| (i < m).then_some(i)).collect();
            g.gather_rows(hidden, idx)
        } else {
            hidden
        };
        let hidden = match dropout {
            Some(mask) => {
                if mask.shape() != g.shape(hidden) {
                    return Err(Error::Shape("dropout mask shape".into()));
                }
                let mask = g.constant(mask);
                g.mul(hidden, mask)
            }
            None => hidden,
        };
        let logits = self.out.forward(g, hidden);
        Ok(g.log_softmax_rows(logits))
    }
}

/// Mean over positions of `-log p(gold)`.
pub fn nll_loss(log_probs: &Matrix, gold: &[Label]) -> Result<f64> {
    if log_probs.rows() != gold.len() || log_probs.cols() != NUM_CLASSES || gold.is_empty() {
        return Err(Error::Shape(format!(
            "{}x{} log-probabilities against {} gold labels",
            log_probs.rows(),
            log_probs.cols(),
            gold.len()
        )));
    }
    let total: f64 = gold.iter().enumerate().map(|(i, l)| -log_probs.get(i, l.index())).sum();
    Ok(total / gold.len() as f64)
}

/// Graph form of the summed (not averaged) negative log-likelihood.
pub fn nll_sum_node(g: &mut Graph, log_probs: NodeId, gold: &[Label]) -> Result<NodeId> {
    if g.shape(log_probs).0 != gold.len() {
        return Err(Error::Shape(format!(
            "{} rows of log-probabilities against {} gold labels",
            g.shape(log_probs).0,
            gold.len()
        )));
    }
    let picked = g.pick_sum(log_probs, gold.iter().map(|l| l.index()).collect());
    Ok(g.scale_shift(picked, -1.0, 0.0))
}

/// Row-wise argmax; the earliest class wins ties.
pub fn decode(log_probs: &Matrix) -> Vec<Label> {
    log_probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            Label::from_index(best)
        })
        .collect()
}

/// How a multi-piece word is read back from its pieces' labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpanRule {
    /// Every piece must be idiomatic.
    #[default]
    Strict,
    /// Any idiomatic piece marks the word.
    AnyPiece,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub spans: Vec<Span>,
    pub surface: String,
}

impl SpanPrediction {
    pub fn first(&self) -> Option<Span> {
        self.spans.first().copied()
    }
}

/// Maximal runs of idiomatic words. Positions beyond the label sequence count
/// as non-idiomatic.
pub fn extract_spans(labels: &[Label], views: &TokenizedViews, rule: SpanRule) -> SpanPrediction {
    extract_spans_from_words(labels, &views.word_tokens, &views.word_to_subword, rule)
}

pub fn extract_spans_from_words<S: AsRef<str>>(
    labels: &[Label],
    words: &[S],
    word_to_subword: &[(usize, usize)],
    rule: SpanRule,
) -> SpanPrediction {
    let is_idiom = |p: usize| labels.get(p) == Some(&Label::Idiomatic);
    let flags: Vec<bool> = word_to_subword
        .iter()
        .map(|&(s, e)| match rule {
            SpanRule::Strict => (s..=e).all(is_idiom),
            SpanRule::AnyPiece => (s..=e).any(is_idiom),
        })
        .collect();
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(Span::new(s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(Span::new(s, flags.len() - 1));
    }
    let surface = spans
        .first()
        .map(|s| words[s.start..=s.end].iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    SpanPrediction { spans, surface }
}

/// One line of a prediction dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub pred_labels: Vec<Label>,
    pub pred_span: Option<Span>,
    pub pred_surface: String,
    pub gold_labels: Vec<Label>,
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let path = path.as_ref();
    let ctx = || format!("writing {}", path.display());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(ctx(), e))?;
    }
    out.flush().map_err(|e| Error::io(ctx(), e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenization::project_span_to_subwords;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Label::*;

    fn words(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let head = PredictionHead::new(&mut store, 8, 4, &mut rng);
        let mut g = Graph::new(&store);
        let u = g.constant(Matrix::uniform(3, 8, 2.0, &mut rng));
        let lp = head.forward(&mut g, u, 5, None).unwrap();
        let v = g.value(lp);
        assert_eq!(v.shape(), (5, 5));
        for row in v.iter_rows() {
            let s: f64 = row.iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_linear_gives_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let head = PredictionHead::new(&mut store, 4, 2, &mut rng);
        store.get_mut(head.out.w).fill(0.0);
        store.get_mut(head.out.b).fill(0.0);
        let mut g = Graph::new(&store);
        let u = g.constant(Matrix::filled(2, 4, 0.3));
        let lp = head.forward(&mut g, u, 2, None).unwrap();
        assert!(g.value(lp).data().iter().all(|&x| (x + 5f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn head_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let head = PredictionHead::new(&mut store, 4, 2, &mut rng);
        let mut g = Graph::new(&store);
        let u = g.constant(Matrix::zeros(2, 3));
        assert!(matches!(head.forward(&mut g, u, 2, None), Err(Error::Shape(_))));
    }

    #[test]
    fn loss_anchors() {
        let uniform = Matrix::filled(4, 5, -(5f64.ln()));
        let gold = [Start, Idiomatic, End, Padding];
        assert!((nll_loss(&uniform, &gold).unwrap() - 5f64.ln()).abs() < 1e-12);
        let mut onehot = Matrix::filled(4, 5, f64::NEG_INFINITY);
        for (i, l) in gold.iter().enumerate() {
            onehot.set(i, l.index(), 0.0);
        }
        assert_eq!(nll_loss(&onehot, &gold).unwrap(), 0.0);
        let mut two = Matrix::zeros(2, 5);
        two.set(0, 1, -1.0);
        two.set(1, 1, -3.0);
        assert_eq!(nll_loss(&two, &[Literal, Literal]).unwrap(), 2.0);
        assert!(nll_loss(&two, &[Literal]).is_err());
    }

    #[test]
    fn decode_tie_break() {
        let m = Matrix::from_rows(&[
            [-3.0, -1.0, -2.0, -4.0, -5.0],
            [-1.0, -1.0, -4.0, -4.0, -4.0],
            [-1.6, -1.6, -1.6, -1.6, -1.6],
        ]);
        assert_eq!(decode(&m), [Literal, Idiomatic, Idiomatic]);
    }

    #[test]
    fn behind_her_back_surface() {
        let w = words("put it behind her back");
        let w2s: Vec<_> = (1..=5).map(|i| (i, i)).collect();
        let labels = [Start, Literal, Literal, Idiomatic, Idiomatic, Idiomatic, End];
        let p = extract_spans_from_words(&labels, &w, &w2s, SpanRule::Strict);
        assert_eq!(p.surface, "behind her back");
        assert_eq!(p.spans, [Span::new(2, 4)]);
        let literal = [Start, Literal, Literal, Literal, Literal, Literal, End];
        let p = extract_spans_from_words(&literal, &w, &w2s, SpanRule::Strict);
        assert_eq!(p.surface, "");
        assert!(p.spans.is_empty());
    }

    #[test]
    fn two_runs_first_is_surface() {
        let w = words("a b c d e");
        let w2s: Vec<_> = (1..=5).map(|i| (i, i)).collect();
        let labels = [Start, Idiomatic, Literal, Idiomatic, Idiomatic, Literal, End];
        let p = extract_spans_from_words(&labels, &w, &w2s, SpanRule::Strict);
        assert_eq!(p.spans, [Span::new(0, 0), Span::new(2, 3)]);
        assert_eq!(p.surface, "a");
    }

    #[test]
    fn partial_word_rules() {
        let w = words("x yz w");
        let w2s = [(1, 1), (2, 3), (4, 4)];
        let labels = [Start, Literal, Idiomatic, Literal, Idiomatic, End];
        let strict = extract_spans_from_words(&labels, &w, &w2s, SpanRule::Strict);
        assert_eq!(strict.spans, [Span::new(2, 2)]);
        let any = extract_spans_from_words(&labels, &w, &w2s, SpanRule::AnyPiece);
        assert_eq!(any.spans, [Span::new(1, 2)]);
        assert_eq!(any.surface, "yz w");
    }

    #[test]
    fn projection_round_trip() {
        let w = words("he let the cat out of the bag");
        let w2s = [(1, 1), (2, 2), (3, 3), (4, 5), (6, 6), (7, 7), (8, 8), (9, 10)];
        let gold = Span::new(2, 7);
        let labels = project_span_to_subwords(Some(gold), &w2s, 14).unwrap();
        let p = extract_spans_from_words(&labels, &w, &w2s, SpanRule::Strict);
        assert_eq!(p.first(), Some(gold));
        assert_eq!(p.surface, "the cat out of the bag");
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.jsonl");
        let recs = vec![PredictionRecord {
            id: "s1".into(),
            pred_labels: vec![Start, Idiomatic, End, Padding],
            pred_span: Some(Span::new(0, 0)),
            pred_surface: "hi".into(),
            gold_labels: vec![Start, Literal, End, Padding],
        }];
        write_predictions(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(r#""pred_labels":["start","idiomatic","end","padding"]"#));
        assert!(text.contains(r#""pred_span":[0,0]"#));
        assert_eq!(read_predictions(&path).unwrap(), recs);
    }
}
