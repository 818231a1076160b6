//! The aligned views of one sentence: subwords for the contextual encoder,
//! words and characters for the static stream, POS tags, and the per-subword
//! gold labels.

mod chars;
mod pos;
mod wordpiece;

use serde::{Deserialize, Serialize};

pub use chars::{build_char_matrix, CharAlphabet, PAD_CHAR, UNK_CHAR};
pub use pos::{pos_tag, tag_index, PosTagger, DEFAULT_TAG, POS_TAGS};
pub use wordpiece::{subword_tokenize, SubwordTokens, SubwordVocab, END_ID, MAX_CHARS_PER_WORD, PAD_ID, START_ID, UNK_ID};

use crate::corpus::{Instance, Span};
use crate::error::{Error, Result};

/// Per-token target classes, in tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Idiomatic = 0,
    Literal = 1,
    Start = 2,
    End = 3,
    Padding = 4,
}

pub const NUM_CLASSES: usize = 5;

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Idiomatic, Label::Literal, Label::Start, Label::End, Label::Padding];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Label::ALL[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenizedViews {
    pub subword_tokens: Vec<String>,
    pub subword_ids: Vec<usize>,
    pub word_tokens: Vec<String>,
    pub char_matrix: Vec<Vec<usize>>,
    pub pos_tags: Vec<String>,
    pub word_to_subword: Vec<(usize, usize)>,
}

impl TokenizedViews {
    /// Subword count including the start and end tokens.
    pub fn m(&self) -> usize {
        self.subword_ids.len()
    }

    /// Word count.
    pub fn n(&self) -> usize {
        self.word_tokens.len()
    }

    pub fn char_width(&self) -> usize {
        self.char_matrix.first().map_or(0, Vec::len)
    }
}

/// Builds [`TokenizedViews`] for instances.
#[derive(Clone, Debug)]
pub struct Tokenizer {
    pub vocab: SubwordVocab,
    pub alphabet: CharAlphabet,
    pub tagger: PosTagger,
    pub char_width: usize,
    /// Lowercase words before subword lookup (uncased encoders).
    pub lowercase: bool,
}

impl Tokenizer {
    pub fn new(vocab: SubwordVocab, char_width: usize) -> Self {
        Tokenizer {
            vocab,
            alphabet: CharAlphabet::default(),
            tagger: PosTagger::default(),
            char_width,
            lowercase: true,
        }
    }

    pub fn views(&self, inst: &Instance) -> Result<TokenizedViews> {
        self.views_for_words(&inst.word_tokens, inst.pos_tags.as_deref())
    }

    pub fn views_for_words(&self, words: &[String], pos_tags: Option<&[String]>) -> Result<TokenizedViews> {
        let sub = subword_tokenize(words, &self.vocab, self.lowercase)?;
        Ok(TokenizedViews {
            subword_tokens: sub.tokens,
            subword_ids: sub.ids,
            word_tokens: words.to_vec(),
            char_matrix: build_char_matrix(words, &self.alphabet, self.char_width),
            pos_tags: pos_tag(words, pos_tags, &self.tagger),
            word_to_subword: sub.word_to_subword,
        })
    }
}

/// Gold labels on the subword axis: start at 0, end at `M-1`, idiomatic over
/// the pieces of every word in `span`, literal elsewhere, padding from `M` on.
pub fn project_span_to_subwords(span: Option<Span>, word_to_subword: &[(usize, usize)], m_padded: usize) -> Result<Vec<Label>> {
    let last = word_to_subword
        .last()
        .ok_or_else(|| Error::Projection("no words to project onto".into()))?;
    let m = last.1 + 2;
    if m_padded < m {
        return Err(Error::Projection(format!(
            "padded length {m_padded} shorter than sequence length {m}"
        )));
    }
    let mut labels = vec![Label::Padding; m_padded];
    labels[0] = Label::Start;
    labels[1..m - 1].fill(Label::Literal);
    labels[m - 1] = Label::End;
    if let Some(s) = span {
        if s.start > s.end || s.end >= word_to_subword.len() {
            return Err(Error::Projection(format!(
                "span [{}, {}] out of range for {} words",
                s.start,
                s.end,
                word_to_subword.len()
            )));
        }
        let first = word_to_subword[s.start].0;
        let last = word_to_subword[s.end].1;
        labels[first..=last].fill(Label::Idiomatic);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn behind_her_back_projection() {
        let w2s: Vec<_> = (1..=5).map(|i| (i, i)).collect();
        let labels = project_span_to_subwords(Some(Span::new(2, 4)), &w2s, 8).unwrap();
        assert_eq!(
            labels,
            [Start, Literal, Literal, Idiomatic, Idiomatic, Idiomatic, End, Padding]
        );
    }

    #[test]
    fn absent_span_is_all_literal() {
        let w2s: Vec<_> = (1..=5).map(|i| (i, i)).collect();
        let labels = project_span_to_subwords(None, &w2s, 9).unwrap();
        assert_eq!(
            labels,
            [Start, Literal, Literal, Literal, Literal, Literal, End, Padding, Padding]
        );
    }

    #[test]
    fn multi_piece_word_is_fully_labelled() {
        let w2s = [(1, 1), (2, 2), (3, 4)];
        let labels = project_span_to_subwords(Some(Span::new(2, 2)), &w2s, 6).unwrap();
        assert_eq!(labels, [Start, Literal, Literal, Idiomatic, Idiomatic, End]);
    }

    #[test]
    fn projection_errors() {
        let w2s = [(1, 1), (2, 2)];
        assert!(project_span_to_subwords(Some(Span::new(1, 2)), &w2s, 4).is_err());
        assert!(project_span_to_subwords(None, &w2s, 3).is_err());
    }

    #[test]
    fn views_are_consistent() {
        let vocab = SubwordVocab::with_default_specials(["put", "it", "be", "##hind", "back"]).unwrap();
        let tok = Tokenizer::new(vocab, 16);
        let words: Vec<String> = ["put", "it", "behind", "her", "back"].map(String::from).to_vec();
        let v = tok.views_for_words(&words, None).unwrap();
        assert_eq!(v.m(), 2 + 6);
        assert_eq!(v.word_to_subword, [(1, 1), (2, 2), (3, 4), (5, 5), (6, 6)]);
        assert_eq!(v.subword_ids[5], UNK_ID);
        assert_eq!(v.pos_tags.len(), 5);
        assert_eq!(v.char_matrix.len(), 5);
        assert_eq!(v.char_width(), 16);
    }
}
