//! Loading the frozen resources and turning instances into model inputs.

use std::path::Path;

use crate::corpus::{Dataset, Instance};
use crate::encoder::{ContextualCache, ContextualEncoder, StaticEmbeddings, ToyEncoder};
use crate::error::{Error, Result};
use crate::model::{ModelDims, ModelInput};
use crate::tensor::Matrix;
use crate::tokenization::{project_span_to_subwords, Label, PosTagger, SubwordVocab, TokenizedViews, Tokenizer, PAD_ID};

use super::config::{Config, EncoderKind};

/// Tokenizer plus the frozen embedding sources for one run.
pub struct Resources {
    pub tokenizer: Tokenizer,
    pub encoder: Box<dyn ContextualEncoder>,
    /// Absent only for architectures that ignore the static stream.
    pub static_table: Option<StaticEmbeddings>,
    pub dims: ModelDims,
}

impl std::fmt::Debug for Resources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resources")
            .field("vocab", &self.tokenizer.vocab.len())
            .field("encoder_dim", &self.encoder.dim())
            .field("static", &self.static_table.as_ref().map(StaticEmbeddings::len))
            .finish()
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} not found", path.display())))
    }
}

impl Resources {
    /// Loads everything named by `config`, reading the vocabulary from the
    /// config path.
    pub fn load(config: &Config) -> Result<Self> {
        require(&config.subword_vocab, "subword vocabulary")?;
        let vocab = SubwordVocab::load(&config.subword_vocab)?;
        Self::with_vocab(config, vocab)
    }

    pub fn with_vocab(config: &Config, vocab: SubwordVocab) -> Result<Self> {
        let dims = config.dims;
        let encoder: Box<dyn ContextualEncoder> = match config.contextual_encoder {
            EncoderKind::Toy => Box::new(ToyEncoder::new(vocab.len(), dims.d_con, config.toy_encoder_seed)),
            EncoderKind::Cache => {
                let path = config
                    .contextual_cache
                    .as_deref()
                    .ok_or_else(|| Error::Config("no contextual_cache configured".into()))?;
                require(path, "contextual cache")?;
                Box::new(ContextualCache::load(path)?)
            }
        };
        if encoder.dim() != dims.d_con {
            return Err(Error::Compatibility(format!(
                "contextual embeddings have dimension {}, model expects d_con={}",
                encoder.dim(),
                dims.d_con
            )));
        }
        let static_table = match &config.static_embeddings {
            Some(path) => {
                require(path, "static embeddings")?;
                let table = StaticEmbeddings::load(path)?;
                if table.dim() != dims.d_s {
                    return Err(Error::Compatibility(format!(
                        "static embeddings have dimension {}, model expects d_s={}",
                        table.dim(),
                        dims.d_s
                    )));
                }
                Some(table)
            }
            None => None,
        };
        let mut tokenizer = Tokenizer::new(vocab, dims.w_t);
        tokenizer.lowercase = config.lowercase;
        if let Some(path) = &config.pos_lexicon {
            require(path, "POS lexicon")?;
            tokenizer.tagger = PosTagger::load_lexicon(path)?;
        }
        Ok(Resources {
            tokenizer,
            encoder,
            static_table,
            dims,
        })
    }

    pub fn prepare_instance(&self, inst: &Instance) -> Result<Prepared> {
        let views = self.tokenizer.views(inst)?;
        let contextual = self.encoder.embed(&inst.id, &views.subword_ids)?;
        if contextual.rows() != views.m() {
            return Err(Error::Shape(format!(
                "instance {}: {} contextual rows for {} subwords",
                inst.id,
                contextual.rows(),
                views.m()
            )));
        }
        let static_vectors = match &self.static_table {
            Some(t) => t.embed_words(&views.word_tokens),
            None => Matrix::zeros(views.n(), self.dims.d_s),
        };
        let gold = project_span_to_subwords(inst.span, &views.word_to_subword, views.m())?;
        Ok(Prepared {
            instance: inst.clone(),
            views,
            contextual,
            static_vectors,
            gold,
        })
    }

    pub fn prepare(&self, d: &Dataset) -> Result<Vec<Prepared>> {
        d.instances().iter().map(|i| self.prepare_instance(i)).collect()
    }
}

/// One instance with its views, frozen lookups and unpadded gold labels.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub instance: Instance,
    pub views: TokenizedViews,
    pub contextual: Matrix,
    pub static_vectors: Matrix,
    /// Length `M`.
    pub gold: Vec<Label>,
}

impl Prepared {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            views: &self.views,
            contextual: &self.contextual,
            static_vectors: &self.static_vectors,
        }
    }

    pub fn m(&self) -> usize {
        self.views.m()
    }
}

/// A padded group of instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Positions in the prepared set.
    pub indices: Vec<usize>,
    pub subword_ids: Vec<Vec<usize>>,
    pub gold: Vec<Vec<Label>>,
    pub lengths: Vec<usize>,
    pub word_to_subword: Vec<Vec<(usize, usize)>>,
    pub m_padded: usize,
}

impl Batch {
    pub fn collate(prepared: &[Prepared], indices: &[usize]) -> Self {
        let m_padded = indices.iter().map(|&i| prepared[i].m()).max().unwrap_or(0);
        let mut b = Batch {
            indices: indices.to_vec(),
            subword_ids: Vec::with_capacity(indices.len()),
            gold: Vec::with_capacity(indices.len()),
            lengths: Vec::with_capacity(indices.len()),
            word_to_subword: Vec::with_capacity(indices.len()),
            m_padded,
        };
        for &i in indices {
            let p = &prepared[i];
            let mut ids = p.views.subword_ids.clone();
            ids.resize(m_padded, PAD_ID);
            let mut gold = p.gold.clone();
            gold.resize(m_padded, Label::Padding);
            b.subword_ids.push(ids);
            b.gold.push(gold);
            b.lengths.push(p.m());
            b.word_to_subword.push(p.views.word_to_subword.clone());
        }
        b
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Span, UsageLabel};

    fn inst(id: &str, words: &str, span: Option<Span>) -> Instance {
        Instance {
            id: id.into(),
            sentence: words.into(),
            word_tokens: words.split(' ').map(String::from).collect(),
            label: if span.is_some() {
                UsageLabel::Idiomatic
            } else {
                UsageLabel::Literal
            },
            span,
            idiom_type: "spill the beans".into(),
            fixedness: None,
            pos_tags: None,
            source: None,
        }
    }

    fn resources() -> Resources {
        let vocab = SubwordVocab::with_default_specials(["he", "spill", "the", "be", "##ans", "ed"]).unwrap();
        let dims = ModelDims {
            d_con: 4,
            d_s: 3,
            ..ModelDims::default()
        };
        let mut static_table = StaticEmbeddings::new(3);
        static_table.insert("beans", vec![1.0, 2.0, 3.0]).unwrap();
        Resources {
            tokenizer: Tokenizer::new(vocab, dims.w_t),
            encoder: Box::new(ToyEncoder::new(9, 4, 0)),
            static_table: Some(static_table),
            dims,
        }
    }

    #[test]
    fn prepared_shapes_and_labels() {
        let r = resources();
        let p = r
            .prepare_instance(&inst("a", "he spill the beans", Some(Span::new(1, 3))))
            .unwrap();
        assert_eq!(p.m(), 7);
        assert_eq!(p.contextual.shape(), (7, 4));
        assert_eq!(p.static_vectors.shape(), (4, 3));
        assert_eq!(p.static_vectors.row(3), [1.0, 2.0, 3.0]);
        assert_eq!(p.static_vectors.row(0), [0.0; 3]);
        use Label::*;
        assert_eq!(p.gold, [Start, Literal, Idiomatic, Idiomatic, Idiomatic, Idiomatic, End]);
    }

    #[test]
    fn collate_pads_to_longest() {
        let r = resources();
        let ps = vec![
            r.prepare_instance(&inst("a", "he spill the beans", Some(Span::new(1, 3))))
                .unwrap(),
            r.prepare_instance(&inst("b", "he spill", None)).unwrap(),
        ];
        let b = Batch::collate(&ps, &[1, 0]);
        assert_eq!(b.m_padded, 7);
        assert_eq!(b.lengths, [4, 7]);
        assert_eq!(b.subword_ids[0][4..], [PAD_ID; 3]);
        assert_eq!(b.gold[0][3..], [Label::End, Label::Padding, Label::Padding, Label::Padding]);
        assert!(b.subword_ids.iter().all(|r| r.len() == 7));
    }
}
