//! Flat `key = value` configuration. Blank lines and lines starting with `#`
//! are ignored; unknown or repeated keys are errors. Relative paths resolve
//! against the config file's directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Architecture, ModelDims};
use crate::params::AdamConfig;
use crate::tagger::SpanRule;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "DISC_SEED";

/// Source of contextual embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EncoderKind {
    /// Precomputed cache file (`contextual_cache`).
    #[default]
    Cache,
    /// Random frozen encoder over the subword vocabulary.
    Toy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub dims: ModelDims,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub architecture: Architecture,
    pub train_file: PathBuf,
    pub test_file: PathBuf,
    /// When set, checkpoints are selected on this file instead of the test file.
    pub validation_file: Option<PathBuf>,
    pub static_embeddings: Option<PathBuf>,
    pub subword_vocab: PathBuf,
    pub contextual_cache: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    pub contextual_encoder: EncoderKind,
    pub toy_encoder_seed: u64,
    pub pos_lexicon: Option<PathBuf>,
    pub lowercase: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub clip_norm: f64,
    /// Stop once the selection metric reaches this value.
    pub target_sa: Option<f64>,
    pub span_rule: SpanRule,
}

impl Default for Config {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Config {
            dims: ModelDims::default(),
            epochs: 600,
            batch_size: 64,
            learning_rate: 1e-4,
            dropout: 0.2,
            seed: 1,
            architecture: Architecture::Disc,
            train_file: PathBuf::new(),
            test_file: PathBuf::new(),
            validation_file: None,
            static_embeddings: None,
            subword_vocab: PathBuf::new(),
            contextual_cache: None,
            checkpoint_dir: PathBuf::new(),
            contextual_encoder: EncoderKind::Cache,
            toy_encoder_seed: 0,
            pos_lexicon: None,
            lowercase: true,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            clip_norm: 5.0,
            target_sa: None,
            span_rule: SpanRule::Strict,
        }
    }
}

pub const KEYS: &[&str] = &[
    "d_con",
    "d_s",
    "d_char",
    "d_char_in",
    "d_pos",
    "d_emb",
    "kernel_width",
    "w_t",
    "epochs",
    "batch_size",
    "learning_rate",
    "dropout",
    "seed",
    "architecture",
    "train_file",
    "test_file",
    "validation_file",
    "static_embeddings",
    "subword_vocab",
    "contextual_cache",
    "checkpoint_dir",
    "contextual_encoder",
    "toy_encoder_seed",
    "pos_lexicon",
    "lowercase",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "clip_norm",
    "target_sa",
    "span_rule",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn path(base: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn opt_path(base: &Path, v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| path(base, v))
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c = Config::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", i + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            c.set(key, v, base_dir)?;
        }
        for required in ["train_file", "test_file", "subword_vocab", "checkpoint_dir"] {
            if !seen.contains(required) {
                return Err(Error::Config(format!("missing required key {required:?}")));
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads the file and applies the `DISC_SEED` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut c = Config::parse(&text, base)?;
        c.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(c)
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.seed = num(SEED_ENV, v.trim())?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let d = &mut self.dims;
        match key {
            "d_con" => d.d_con = num(key, v)?,
            "d_s" => d.d_s = num(key, v)?,
            "d_char" => d.d_char = num(key, v)?,
            "d_char_in" => d.d_char_in = num(key, v)?,
            "d_pos" => d.d_pos = num(key, v)?,
            "d_emb" => d.d_emb = num(key, v)?,
            "kernel_width" => d.kernel_width = num(key, v)?,
            "w_t" => d.w_t = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "dropout" => self.dropout = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "architecture" => self.architecture = v.parse()?,
            "train_file" => self.train_file = path(base, v),
            "test_file" => self.test_file = path(base, v),
            "validation_file" => self.validation_file = opt_path(base, v),
            "static_embeddings" => self.static_embeddings = opt_path(base, v),
            "subword_vocab" => self.subword_vocab = path(base, v),
            "contextual_cache" => self.contextual_cache = opt_path(base, v),
            "checkpoint_dir" => self.checkpoint_dir = path(base, v),
            "contextual_encoder" => {
                self.contextual_encoder = match v {
                    "cache" => EncoderKind::Cache,
                    "toy" => EncoderKind::Toy,
                    _ => return Err(Error::Config(format!("contextual_encoder: expected cache or toy, got {v:?}"))),
                }
            }
            "toy_encoder_seed" => self.toy_encoder_seed = num(key, v)?,
            "pos_lexicon" => self.pos_lexicon = opt_path(base, v),
            "lowercase" => self.lowercase = num(key, v)?,
            "adam_beta1" => self.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.adam_beta2 = num(key, v)?,
            "adam_epsilon" => self.adam_epsilon = num(key, v)?,
            "clip_norm" => self.clip_norm = num(key, v)?,
            "target_sa" => self.target_sa = if v.is_empty() { None } else { Some(num(key, v)?) },
            "span_rule" => {
                self.span_rule = match v {
                    "strict" => SpanRule::Strict,
                    "any_piece" => SpanRule::AnyPiece,
                    _ => return Err(Error::Config(format!("span_rule: expected strict or any_piece, got {v:?}"))),
                }
            }
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0,1), got {}", self.dropout)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("adam betas must be in [0,1) and epsilon positive".into()));
        }
        if let Some(t) = self.target_sa {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("target_sa must be in (0,1], got {t}")));
            }
        }
        if self.contextual_encoder == EncoderKind::Cache && self.contextual_cache.is_none() {
            return Err(Error::Config("contextual_encoder=cache needs contextual_cache".into()));
        }
        if self.architecture == Architecture::Disc && self.static_embeddings.is_none() {
            return Err(Error::Config("the disc architecture needs static_embeddings".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// Every key with its current value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let p = |p: &Path| p.display().to_string();
        let op = |p: &Option<PathBuf>| p.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
        let d = &self.dims;
        let fields: Vec<(&str, String)> = vec![
            ("d_con", d.d_con.to_string()),
            ("d_s", d.d_s.to_string()),
            ("d_char", d.d_char.to_string()),
            ("d_char_in", d.d_char_in.to_string()),
            ("d_pos", d.d_pos.to_string()),
            ("d_emb", d.d_emb.to_string()),
            ("kernel_width", d.kernel_width.to_string()),
            ("w_t", d.w_t.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("dropout", self.dropout.to_string()),
            ("seed", self.seed.to_string()),
            ("architecture", self.architecture.to_string()),
            ("train_file", p(&self.train_file)),
            ("test_file", p(&self.test_file)),
            ("validation_file", op(&self.validation_file)),
            ("static_embeddings", op(&self.static_embeddings)),
            ("subword_vocab", p(&self.subword_vocab)),
            ("contextual_cache", op(&self.contextual_cache)),
            ("checkpoint_dir", p(&self.checkpoint_dir)),
            (
                "contextual_encoder",
                match self.contextual_encoder {
                    EncoderKind::Cache => "cache",
                    EncoderKind::Toy => "toy",
                }
                .into(),
            ),
            ("toy_encoder_seed", self.toy_encoder_seed.to_string()),
            ("pos_lexicon", op(&self.pos_lexicon)),
            ("lowercase", self.lowercase.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_epsilon", self.adam_epsilon.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("target_sa", self.target_sa.map(|t| t.to_string()).unwrap_or_default()),
            (
                "span_rule",
                match self.span_rule {
                    SpanRule::Strict => "strict",
                    SpanRule::AnyPiece => "any_piece",
                }
                .into(),
            ),
        ];
        debug_assert_eq!(fields.len(), KEYS.len());
        let mut out = String::new();
        for (k, v) in fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# toy run
train_file = data/train.jsonl
test_file = data/test.jsonl
subword_vocab = vocab.txt
static_embeddings = /abs/static.txt
checkpoint_dir = ckpt
contextual_encoder = toy
";

    #[test]
    fn defaults_match_reference_setup() {
        let c = Config::parse(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(c.epochs, 600);
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.dropout, 0.2);
        assert_eq!(c.dims, ModelDims::default());
        assert_eq!(c.train_file, Path::new("/base/data/train.jsonl"));
        assert_eq!(c.static_embeddings.as_deref(), Some(Path::new("/abs/static.txt")));
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let bad = format!("{MINIMAL}hidden = 3\n");
        let err = Config::parse(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("hidden"), "{err}");
        let dup = format!("{MINIMAL}epochs = 3\nepochs = 4\n");
        assert!(Config::parse(&dup, Path::new(".")).is_err());
        assert!(Config::parse("epochs = 3", Path::new(".")).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for extra in [
            "dropout = 1.0",
            "learning_rate = 0",
            "d_emb = 7",
            "d_con = 0",
            "architecture = crf",
            "epochs = x",
        ] {
            let text = format!("{MINIMAL}{extra}\n");
            assert!(Config::parse(&text, Path::new(".")).is_err(), "{extra}");
        }
    }

    #[test]
    fn text_round_trip() {
        let text = format!("{MINIMAL}d_emb = 64\ntarget_sa = 0.95\nspan_rule = any_piece\n");
        let c = Config::parse(&text, Path::new("/b")).unwrap();
        let again = Config::parse(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn seed_override() {
        let mut c = Config::parse(MINIMAL, Path::new(".")).unwrap();
        c.apply_seed_override(Some("42")).unwrap();
        assert_eq!(c.seed, 42);
        c.apply_seed_override(None).unwrap();
        assert_eq!(c.seed, 42);
        assert!(c.apply_seed_override(Some("forty")).is_err());
    }
}
