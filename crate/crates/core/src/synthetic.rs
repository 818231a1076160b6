//! Generated corpora and toy resources for tests, benches and demos.
//!
//! Each idiom type is placed either in a figurative frame (span set) or a
//! literal frame (no span). Types beyond the built-in list are made-up
//! three-word phrases.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Fixedness, Instance, Span, UsageLabel};
use crate::encoder::StaticEmbeddings;
use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::pipeline::{Config, EncoderKind};
use crate::tokenization::SubwordVocab;

pub const IDIOMS: [&str; 10] = [
    "behind her back",
    "spill the beans",
    "break the ice",
    "under the weather",
    "in hot water",
    "on thin ice",
    "hit the sack",
    "cut corners",
    "over the moon",
    "in the dark",
];

const FIG_LEFT: [&str; 6] = [
    "everyone knew she was",
    "honestly he went",
    "in the meeting they were",
    "after the news we felt",
    "at work i was",
    "my manager said they were",
];
const FIG_RIGHT: [&str; 5] = ["without a doubt", "as usual", "again today", "in the end", "all week"];
const LIT_LEFT: [&str; 6] = [
    "the child put the toy",
    "the old cat sat",
    "we found the note",
    "the farmer left a box",
    "he photographed the bird",
    "a small boat drifted",
];
const LIT_RIGHT: [&str; 5] = [
    "in the garden",
    "near the wooden barn",
    "on the kitchen table",
    "by the river",
    "next to the door",
];

const SYLLABLES: [&str; 12] = [
    "zor", "bli", "mak", "tev", "qua", "rin", "dol", "fex", "pum", "sho", "kir", "vat",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub sentences: usize,
    pub types: usize,
    /// Share of instances in a literal frame.
    pub literal_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            sentences: 50,
            types: 10,
            literal_fraction: 0.3,
            seed: 1,
        }
    }
}

fn idiom_phrase(k: usize, rng: &mut ChaCha8Rng) -> String {
    if k < IDIOMS.len() {
        return IDIOMS[k].to_string();
    }
    let word = |rng: &mut ChaCha8Rng| (0..2).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect::<String>();
    format!("{} the {}{k}", word(rng), word(rng))
}

/// Instances cycle through the types, so every type appears
/// `sentences / types` times or once more.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.types == 0 || spec.sentences < spec.types {
        return Err(Error::Config(format!(
            "need at least one sentence per type ({} sentences, {} types)",
            spec.sentences, spec.types
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phrases: Vec<String> = (0..spec.types).map(|k| idiom_phrase(k, &mut rng)).collect();
    let levels = [Fixedness::Fixed, Fixedness::SemiFixed, Fixedness::SyntacticallyFlexible];
    let mut instances = Vec::with_capacity(spec.sentences);
    for i in 0..spec.sentences {
        let k = i % spec.types;
        let literal = rng.gen::<f64>() < spec.literal_fraction;
        let (left, right) = if literal {
            (*LIT_LEFT.choose(&mut rng).unwrap(), *LIT_RIGHT.choose(&mut rng).unwrap())
        } else {
            (*FIG_LEFT.choose(&mut rng).unwrap(), *FIG_RIGHT.choose(&mut rng).unwrap())
        };
        let left: Vec<&str> = left.split(' ').collect();
        let idiom: Vec<&str> = phrases[k].split(' ').collect();
        let words: Vec<String> = left
            .iter()
            .chain(&idiom)
            .chain(right.split(' ').collect::<Vec<_>>().iter())
            .map(|w| w.to_string())
            .collect();
        let span = (!literal).then(|| Span::new(left.len(), left.len() + idiom.len() - 1));
        instances.push(Instance {
            id: format!("syn-{i:05}"),
            sentence: words.join(" "),
            word_tokens: words,
            label: if literal { UsageLabel::Literal } else { UsageLabel::Idiomatic },
            span,
            idiom_type: phrases[k].clone(),
            fixedness: Some(levels[k % levels.len()]),
            pos_tags: None,
            source: Some("synthetic".into()),
        });
    }
    Dataset::new(format!("synthetic-{}", spec.seed), instances)
}

/// Whole words up to five characters; longer words become a three-character
/// head plus a `##` tail, so the corpus has multi-piece words.
pub fn toy_vocab<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> Result<SubwordVocab> {
    let mut pieces = BTreeSet::new();
    for d in datasets {
        for inst in d.instances() {
            for w in &inst.word_tokens {
                let w = w.to_lowercase();
                let chars: Vec<char> = w.chars().collect();
                if chars.len() <= 5 {
                    pieces.insert(w);
                } else {
                    pieces.insert(chars[..3].iter().collect());
                    pieces.insert(format!("##{}", chars[3..].iter().collect::<String>()));
                }
            }
        }
    }
    SubwordVocab::with_default_specials(pieces)
}

/// Random unit-scale vectors for every word except each seventh distinct
/// word, which stays out of vocabulary.
pub fn toy_static_embeddings<'a>(
    datasets: impl IntoIterator<Item = &'a Dataset>,
    dim: usize,
    seed: u64,
) -> Result<StaticEmbeddings> {
    let words: BTreeSet<&str> = datasets
        .into_iter()
        .flat_map(|d| d.instances().iter().flat_map(|i| i.word_tokens.iter().map(String::as_str)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = StaticEmbeddings::new(dim);
    for (i, w) in words.into_iter().enumerate() {
        if i % 7 == 6 {
            continue;
        }
        table.insert(w, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    }
    Ok(table)
}

/// Small dimensions for desk-scale runs.
pub fn toy_dims() -> ModelDims {
    ModelDims {
        d_con: 32,
        d_s: 16,
        d_char: 8,
        d_char_in: 8,
        d_pos: 8,
        d_emb: 64,
        kernel_width: 5,
        w_t: 16,
    }
}

/// Writes `train.jsonl`, `test.jsonl`, `vocab.txt`, `static.txt` and a
/// matching `config.txt` into `dir` and returns the config path.
pub fn write_toy_setup(dir: &Path, train: &Dataset, test: &Dataset, config: &Config) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    train.save(dir.join("train.jsonl"))?;
    test.save(dir.join("test.jsonl"))?;
    toy_vocab([train, test])?.save(dir.join("vocab.txt"))?;
    toy_static_embeddings([train, test], config.dims.d_s, config.seed.wrapping_add(17))?.save(dir.join("static.txt"))?;
    let c = Config {
        train_file: dir.join("train.jsonl"),
        test_file: dir.join("test.jsonl"),
        subword_vocab: dir.join("vocab.txt"),
        static_embeddings: Some(dir.join("static.txt")),
        checkpoint_dir: dir.join("checkpoint"),
        contextual_encoder: EncoderKind::Toy,
        contextual_cache: None,
        ..config.clone()
    };
    let path = dir.join("config.txt");
    std::fs::write(&path, c.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

/// Config for the overfit sanity run over a toy setup.
pub fn toy_config(seed: u64) -> Config {
    Config {
        dims: toy_dims(),
        epochs: 300,
        batch_size: 10,
        learning_rate: 3e-3,
        seed,
        contextual_encoder: EncoderKind::Toy,
        toy_encoder_seed: 7,
        ..Config::default()
    }
}
