use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const START_ID: usize = 2;
pub const END_ID: usize = 3;

/// Words longer than this many characters go straight to the unknown token.
pub const MAX_CHARS_PER_WORD: usize = 100;

/// Subword vocabulary. Ids are line numbers of the vocabulary file; the first
/// four lines are padding, unknown, sequence start and sequence end.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordVocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    continuation_prefix: String,
}

impl SubwordVocab {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 4 {
            return Err(Error::Tokenize(
                "vocabulary needs the four special tokens on its first lines".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Tokenize(format!("empty vocabulary entry on line {}", i + 1)));
            }
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::Tokenize(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(SubwordVocab {
            tokens,
            ids,
            continuation_prefix: "##".into(),
        })
    }

    /// `[PAD] [UNK] [CLS] [SEP]` followed by `pieces`.
    pub fn with_default_specials<I, S>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).collect();
        tokens.extend(pieces.into_iter().map(Into::into));
        Self::new(tokens)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::new(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
    }

    pub fn to_file_contents(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_contents()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    /// Greedy longest-match-first decomposition of one word. A word that
    /// cannot be fully covered by vocabulary pieces becomes `[UNK]`.
    pub fn wordpiece(&self, word: &str) -> Vec<usize> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_CHARS_PER_WORD {
            return vec![UNK_ID];
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(&self.continuation_prefix);
                }
                candidate.extend(&chars[start..end]);
                if let Some(id) = self.id(&candidate) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => return vec![UNK_ID],
            }
            start = end;
        }
        pieces
    }
}

/// Subword view of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordTokens {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    /// Inclusive subword range of each word.
    pub word_to_subword: Vec<(usize, usize)>,
}

pub fn subword_tokenize<S: AsRef<str>>(words: &[S], vocab: &SubwordVocab, lowercase: bool) -> Result<SubwordTokens> {
    if words.is_empty() {
        return Err(Error::Tokenize("empty word sequence".into()));
    }
    let mut ids = vec![START_ID];
    let mut word_to_subword = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let w = w.as_ref();
        if w.is_empty() {
            return Err(Error::Tokenize(format!("word token {i} is empty")));
        }
        let pieces = if lowercase {
            vocab.wordpiece(&w.to_lowercase())
        } else {
            vocab.wordpiece(w)
        };
        let start = ids.len();
        ids.extend(pieces);
        word_to_subword.push((start, ids.len() - 1));
    }
    ids.push(END_ID);
    Ok(SubwordTokens {
        tokens: ids.iter().map(|&i| vocab.token(i).to_string()).collect(),
        ids,
        word_to_subword,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> SubwordVocab {
        SubwordVocab::with_default_specials(["play", "##ing", "##ed", "un", "a", "b"]).unwrap()
    }

    #[test]
    fn greedy_longest_match() {
        let v = vocab();
        let t = subword_tokenize(&["playing"], &v, false).unwrap();
        assert_eq!(t.tokens, ["[CLS]", "play", "##ing", "[SEP]"]);
        assert_eq!(t.word_to_subword, [(1, 2)]);
    }

    #[test]
    fn unmatchable_word_is_unknown() {
        let v = vocab();
        assert_eq!(v.wordpiece("zebra"), [UNK_ID]);
        // prefix matches but the rest cannot be covered
        assert_eq!(v.wordpiece("playx"), [UNK_ID]);
    }

    #[test]
    fn single_piece_words() {
        let t = subword_tokenize(&["a", "b"], &vocab(), false).unwrap();
        assert_eq!(t.ids.len(), 4);
        assert_eq!(t.word_to_subword, [(1, 1), (2, 2)]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let v = vocab();
        assert!(subword_tokenize::<&str>(&[], &v, false).is_err());
        assert!(subword_tokenize(&["a", ""], &v, false).is_err());
    }

    #[test]
    fn lowercasing_applies_before_lookup() {
        let v = vocab();
        assert_eq!(
            subword_tokenize(&["Played"], &v, true).unwrap().tokens[1..3],
            ["play", "##ed"]
        );
        assert_eq!(subword_tokenize(&["Played"], &v, false).unwrap().ids[1], UNK_ID);
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = vocab();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(SubwordVocab::load(&p).unwrap(), v);
    }
}
