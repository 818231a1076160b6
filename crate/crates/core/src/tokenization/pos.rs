//! Deterministic lexicon + suffix-rule part-of-speech tagger.
//!
//! Rules, applied in order to each word (left to right):
//!
//! | rule | condition                                                 | tag    |
//! |------|-----------------------------------------------------------|--------|
//! | 1    | word (or its lowercase form) is in the lexicon            | lexicon|
//! | 2    | all characters are punctuation                            | `.`    |
//! | 3    | starts with a digit and contains only digits, `.`, `,`    | `NUM`  |
//! | 4    | ends in `-ly` (length > 3)                                | `ADV`  |
//! | 5    | ends in `-ing` (length > 4) or `-ed` (length > 3)         | `VERB` |
//! | 6    | ends in `-s` (length > 2) and previous tag is NOUN/PRON   | `VERB` |
//! | 7    | ends in `-tion -sion -ment -ness -ity -ship -ism`         | `NOUN` |
//! | 8    | ends in `-ous -ful -able -ible -ive -less -ical -al -ic`  | `ADJ`  |
//! | 9    | otherwise                                                 | `NOUN` |

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// The twelve coarse tags.
pub const POS_TAGS: [&str; 12] = [
    "ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRT", "PRON", "VERB", ".", "X",
];

pub const DEFAULT_TAG: &str = "NOUN";

pub fn tag_index(tag: &str) -> Result<usize> {
    POS_TAGS
        .iter()
        .position(|t| *t == tag)
        .ok_or_else(|| Error::Tag(tag.to_string()))
}

const BUILTIN_LEXICON: &[(&str, &str)] = &[
    ("the", "DET"),
    ("a", "DET"),
    ("an", "DET"),
    ("this", "DET"),
    ("that", "DET"),
    ("these", "DET"),
    ("those", "DET"),
    ("every", "DET"),
    ("some", "DET"),
    ("any", "DET"),
    ("no", "DET"),
    ("each", "DET"),
    ("all", "DET"),
    ("in", "ADP"),
    ("on", "ADP"),
    ("at", "ADP"),
    ("of", "ADP"),
    ("for", "ADP"),
    ("with", "ADP"),
    ("from", "ADP"),
    ("by", "ADP"),
    ("about", "ADP"),
    ("into", "ADP"),
    ("behind", "ADP"),
    ("under", "ADP"),
    ("over", "ADP"),
    ("through", "ADP"),
    ("after", "ADP"),
    ("before", "ADP"),
    ("between", "ADP"),
    ("against", "ADP"),
    ("and", "CONJ"),
    ("or", "CONJ"),
    ("but", "CONJ"),
    ("nor", "CONJ"),
    ("so", "CONJ"),
    ("because", "CONJ"),
    ("while", "CONJ"),
    ("if", "CONJ"),
    ("i", "PRON"),
    ("you", "PRON"),
    ("he", "PRON"),
    ("she", "PRON"),
    ("it", "PRON"),
    ("we", "PRON"),
    ("they", "PRON"),
    ("me", "PRON"),
    ("him", "PRON"),
    ("her", "PRON"),
    ("us", "PRON"),
    ("them", "PRON"),
    ("his", "PRON"),
    ("its", "PRON"),
    ("their", "PRON"),
    ("my", "PRON"),
    ("your", "PRON"),
    ("our", "PRON"),
    ("who", "PRON"),
    ("what", "PRON"),
    ("to", "PRT"),
    ("up", "PRT"),
    ("off", "PRT"),
    ("out", "PRT"),
    ("not", "PRT"),
    ("is", "VERB"),
    ("are", "VERB"),
    ("was", "VERB"),
    ("were", "VERB"),
    ("be", "VERB"),
    ("been", "VERB"),
    ("am", "VERB"),
    ("has", "VERB"),
    ("have", "VERB"),
    ("had", "VERB"),
    ("do", "VERB"),
    ("does", "VERB"),
    ("did", "VERB"),
    ("will", "VERB"),
    ("would", "VERB"),
    ("can", "VERB"),
    ("could", "VERB"),
    ("should", "VERB"),
    ("may", "VERB"),
    ("might", "VERB"),
    ("must", "VERB"),
    ("said", "VERB"),
    ("put", "VERB"),
    ("took", "VERB"),
    ("made", "VERB"),
    ("got", "VERB"),
    ("went", "VERB"),
    ("came", "VERB"),
    ("saw", "VERB"),
    ("very", "ADV"),
    ("too", "ADV"),
    ("also", "ADV"),
    ("just", "ADV"),
    ("then", "ADV"),
    ("now", "ADV"),
    ("never", "ADV"),
    ("always", "ADV"),
    ("here", "ADV"),
    ("there", "ADV"),
    ("good", "ADJ"),
    ("bad", "ADJ"),
    ("new", "ADJ"),
    ("old", "ADJ"),
    ("big", "ADJ"),
    ("small", "ADJ"),
    ("many", "ADJ"),
    ("hot", "ADJ"),
    ("thin", "ADJ"),
    ("high", "ADJ"),
    ("one", "NUM"),
    ("two", "NUM"),
    ("three", "NUM"),
    ("ten", "NUM"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct PosTagger {
    lexicon: HashMap<String, &'static str>,
}

impl Default for PosTagger {
    fn default() -> Self {
        Self::from_pairs(BUILTIN_LEXICON.iter().map(|&(w, t)| (w, t))).expect("builtin tags valid")
    }
}

impl PosTagger {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (w, t) in pairs {
            lexicon.insert(w.to_string(), POS_TAGS[tag_index(t)?]);
        }
        Ok(PosTagger { lexicon })
    }

    /// Tab-separated `word<TAB>tag` lines; blank lines are skipped.
    pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, t) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected word<TAB>tag".into(),
            })?;
            pairs.push((w, t.trim()));
        }
        Self::from_pairs(pairs)
    }

    pub fn tag<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        let mut prev: Option<&str> = None;
        words
            .iter()
            .map(|w| {
                let t = self.tag_word(w.as_ref(), prev);
                prev = Some(t);
                t.to_string()
            })
            .collect()
    }

    fn tag_word(&self, word: &str, prev: Option<&str>) -> &'static str {
        if let Some(t) = self.lexicon.get(word) {
            return t;
        }
        let lower = word.to_lowercase();
        if let Some(t) = self.lexicon.get(&lower) {
            return t;
        }
        if word.chars().all(|c| c.is_ascii_punctuation()) {
            return ".";
        }
        if word.starts_with(|c: char| c.is_ascii_digit()) && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
            return "NUM";
        }
        let len = lower.chars().count();
        if lower.ends_with("ly") && len > 3 {
            return "ADV";
        }
        if (lower.ends_with("ing") && len > 4) || (lower.ends_with("ed") && len > 3) {
            return "VERB";
        }
        if lower.ends_with('s') && len > 2 && matches!(prev, Some("NOUN") | Some("PRON")) {
            return "VERB";
        }
        const NOUN_SUFFIXES: [&str; 7] = ["tion", "sion", "ment", "ness", "ity", "ship", "ism"];
        if NOUN_SUFFIXES.iter().any(|s| lower.ends_with(s)) {
            return "NOUN";
        }
        const ADJ_SUFFIXES: [&str; 9] = ["ous", "ful", "able", "ible", "ive", "less", "ical", "al", "ic"];
        if ADJ_SUFFIXES.iter().any(|s| lower.ends_with(s) && len > s.len() + 1) {
            return "ADJ";
        }
        DEFAULT_TAG
    }
}

/// Uses precomputed tags verbatim when present, otherwise the rule tagger.
pub fn pos_tag<S: AsRef<str>>(words: &[S], precomputed: Option<&[String]>, tagger: &PosTagger) -> Vec<String> {
    match precomputed {
        Some(tags) => tags.to_vec(),
        None => tagger.tag(words),
    }
}
