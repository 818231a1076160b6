use std::collections::HashMap;

pub const PAD_CHAR: usize = 0;
pub const UNK_CHAR: usize = 1;

/// Character inventory for the character CNN. Id 0 pads, id 1 is unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct CharAlphabet {
    ids: HashMap<char, usize>,
}

impl Default for CharAlphabet {
    /// Printable ASCII.
    fn default() -> Self {
        Self::from_chars((' '..='~').collect::<Vec<_>>())
    }
}

impl CharAlphabet {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut ids = HashMap::new();
        for c in chars {
            let next = ids.len() + 2;
            ids.entry(c).or_insert(next);
        }
        CharAlphabet { ids }
    }

    /// Number of ids, including padding and unknown.
    pub fn size(&self) -> usize {
        self.ids.len() + 2
    }

    pub fn id(&self, c: char) -> usize {
        self.ids.get(&c).copied().unwrap_or(UNK_CHAR)
    }
}

/// One row of `width` char ids per word, truncated or right-padded.
pub fn build_char_matrix<S: AsRef<str>>(words: &[S], alphabet: &CharAlphabet, width: usize) -> Vec<Vec<usize>> {
    assert!(width >= 1, "character width must be positive");
    words
        .iter()
        .map(|w| {
            let mut row: Vec<usize> = w.as_ref().chars().take(width).map(|c| alphabet.id(c)).collect();
            row.resize(width, PAD_CHAR);
            row
        })
        .collect()
}
