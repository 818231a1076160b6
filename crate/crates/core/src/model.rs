//! The full tagger graph and the encoder+linear reference tagger.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention_flow::AttentionFlowLayer;
use crate::encoder::{CharEncoder, Highway, PosEmbedding, StaticWordEncoder, StreamProjector};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{dropout_mask, BiLstm, Linear};
use crate::params::ParamStore;
use crate::tagger::PredictionHead;
use crate::tensor::Matrix;
use crate::tokenization::{TokenizedViews, NUM_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_con: usize,
    pub d_s: usize,
    pub d_char: usize,
    /// Width of the character embedding fed to the convolution.
    pub d_char_in: usize,
    pub d_pos: usize,
    pub d_emb: usize,
    pub kernel_width: usize,
    pub w_t: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_con: 768,
            d_s: 300,
            d_char: 64,
            d_char_in: 64,
            d_pos: 64,
            d_emb: 512,
            kernel_width: 5,
            w_t: 16,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("d_con", self.d_con),
            ("d_s", self.d_s),
            ("d_char", self.d_char),
            ("d_char_in", self.d_char_in),
            ("d_pos", self.d_pos),
            ("d_emb", self.d_emb),
            ("kernel_width", self.kernel_width),
            ("w_t", self.w_t),
        ];
        if let Some((name, _)) = all.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.d_emb % 2 != 0 {
            return Err(Error::Config(format!("d_emb must be even, got {}", self.d_emb)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Disc,
    /// Contextual embeddings, dropout, then a per-token linear classifier.
    EncoderLinearBaseline,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Disc => "disc",
            Architecture::EncoderLinearBaseline => "encoder_linear_baseline",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(Architecture::Disc),
            "encoder_linear_baseline" => Ok(Architecture::EncoderLinearBaseline),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Everything the graph needs for one sentence. The two matrices are the
/// frozen lookups (`M×d_con` and `N×d_s`).
#[derive(Clone, Copy, Debug)]
pub struct ModelInput<'a> {
    pub views: &'a TokenizedViews,
    pub contextual: &'a Matrix,
    pub static_vectors: &'a Matrix,
}

#[derive(Clone, Debug)]
pub struct DiscParts {
    pub static_words: StaticWordEncoder,
    pub pos: PosEmbedding,
    pub projector: StreamProjector,
    pub flow_static_pos: AttentionFlowLayer,
    pub reencode: BiLstm,
    pub flow_con_static: AttentionFlowLayer,
    pub head: PredictionHead,
}

#[derive(Clone, Debug)]
pub enum ModelParts {
    Disc(Box<DiscParts>),
    Baseline { out: Linear },
}

/// Owns the trainable parameters and the layer layout over them.
#[derive(Clone, Debug)]
pub struct DiscModel {
    pub store: ParamStore,
    pub parts: ModelParts,
    pub dims: ModelDims,
    pub architecture: Architecture,
    pub alphabet_size: usize,
}

impl DiscModel {
    pub fn new<R: Rng + ?Sized>(dims: ModelDims, architecture: Architecture, alphabet_size: usize, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let mut store = ParamStore::new();
        let parts = match architecture {
            Architecture::Disc => {
                let chars = CharEncoder::new(&mut store, alphabet_size, dims.d_char_in, dims.d_char, dims.kernel_width, rng);
                let d_word = dims.d_char + dims.d_s;
                let highway = Highway::new(&mut store, d_word, 2, rng);
                let pos = PosEmbedding::new(&mut store, dims.d_pos, rng);
                let projector = StreamProjector::new(&mut store, dims.d_con, d_word, dims.d_pos, dims.d_emb, rng);
                let flow_static_pos = AttentionFlowLayer::new(&mut store, "flow1", dims.d_emb, rng);
                let reencode = BiLstm::new(&mut store, "reencode", 4 * dims.d_emb, dims.d_emb / 2, rng);
                let flow_con_static = AttentionFlowLayer::new(&mut store, "flow2", dims.d_emb, rng);
                let head = PredictionHead::new(&mut store, 4 * dims.d_emb, dims.d_emb, rng);
                ModelParts::Disc(Box::new(DiscParts {
                    static_words: StaticWordEncoder {
                        chars,
                        highway,
                        d_static: dims.d_s,
                    },
                    pos,
                    projector,
                    flow_static_pos,
                    reencode,
                    flow_con_static,
                    head,
                }))
            }
            Architecture::EncoderLinearBaseline => ModelParts::Baseline {
                out: Linear::new(&mut store, "baseline.out", dims.d_con, NUM_CLASSES, rng),
            },
        };
        Ok(DiscModel {
            store,
            parts,
            dims,
            architecture,
            alphabet_size,
        })
    }

    /// `m_padded×5` log-probabilities. With a dropout RNG the run is in
    /// training mode.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        input: ModelInput<'_>,
        m_padded: usize,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<NodeId> {
        let m = input.views.m();
        if input.contextual.shape() != (m, self.dims.d_con) {
            return Err(Error::Shape(format!(
                "contextual embeddings are {}x{}, expected {m}x{}",
                input.contextual.rows(),
                input.contextual.cols(),
                self.dims.d_con
            )));
        }
        if m_padded < m {
            return Err(Error::Shape(format!("cannot pad {m} positions to {m_padded}")));
        }
        let e_con = g.constant(input.contextual.clone());
        match &self.parts {
            ModelParts::Disc(p) => {
                let views = input.views;
                let e_static = p.static_words.forward(g, &views.char_matrix, input.static_vectors)?;
                let e_pos = p.pos.forward(g, &views.pos_tags)?;
                let bundle = p.projector.project(g, e_con, e_static, e_pos)?;
                let first = p.flow_static_pos.forward(g, bundle.static_words, bundle.pos)?;
                let enriched = p.reencode.forward(g, first.u);
                let second = p.flow_con_static.forward(g, bundle.contextual, enriched)?;
                let mask = dropout.map(|(rate, rng)| dropout_mask(m_padded, self.dims.d_emb, rate, rng));
                p.head.forward(g, second.u, m_padded, mask)
            }
            ModelParts::Baseline { out } => {
                let mut x = e_con;
                if m_padded > m {
                    x = g.gather_rows(x, (0..m_padded).map(|i| (i < m).then_some(i)).collect());
                }
                if let Some((rate, rng)) = dropout {
                    let mask = g.constant(dropout_mask(m_padded, self.dims.d_con, rate, rng));
                    x = g.mul(x, mask);
                }
                let logits = out.forward(g, x);
                Ok(g.log_softmax_rows(logits))
            }
        }
    }

    /// Eval-mode log-probabilities as a plain matrix.
    pub fn log_probs(&self, input: ModelInput<'_>, m_padded: usize) -> Result<Matrix> {
        let mut g = Graph::new(&self.store);
        let out = self.forward::<rand_chacha::ChaCha8Rng>(&mut g, input, m_padded, None)?;
        Ok(g.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenization::{SubwordVocab, Tokenizer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelDims {
        ModelDims {
            d_con: 6,
            d_s: 4,
            d_char: 3,
            d_char_in: 2,
            d_pos: 3,
            d_emb: 4,
            kernel_width: 3,
            w_t: 6,
        }
    }

    fn views() -> TokenizedViews {
        let vocab = SubwordVocab::with_default_specials(["spill", "the", "be", "##ans"]).unwrap();
        let tok = Tokenizer::new(vocab, 6);
        let words: Vec<String> = ["spill", "the", "beans"].map(String::from).to_vec();
        tok.views_for_words(&words, None).unwrap()
    }

    #[test]
    fn output_shapes_for_both_architectures() {
        let v = views();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let con = Matrix::uniform(v.m(), 6, 1.0, &mut rng);
        let stat = Matrix::uniform(v.n(), 4, 1.0, &mut rng);
        let input = ModelInput {
            views: &v,
            contextual: &con,
            static_vectors: &stat,
        };
        for arch in [Architecture::Disc, Architecture::EncoderLinearBaseline] {
            let model = DiscModel::new(tiny(), arch, 97, &mut rng).unwrap();
            let lp = model.log_probs(input, v.m() + 2).unwrap();
            assert_eq!(lp.shape(), (v.m() + 2, 5));
            assert!(lp.is_finite());
        }
    }

    #[test]
    fn padding_does_not_change_real_positions() {
        let v = views();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let con = Matrix::uniform(v.m(), 6, 1.0, &mut rng);
        let stat = Matrix::uniform(v.n(), 4, 1.0, &mut rng);
        let input = ModelInput {
            views: &v,
            contextual: &con,
            static_vectors: &stat,
        };
        let model = DiscModel::new(tiny(), Architecture::Disc, 97, &mut rng).unwrap();
        let short = model.log_probs(input, v.m()).unwrap();
        let long = model.log_probs(input, v.m() + 3).unwrap();
        for i in 0..v.m() {
            assert_eq!(short.row(i), long.row(i));
        }
    }

    #[test]
    fn rejects_bad_contextual_shape() {
        let v = views();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let con = Matrix::zeros(v.m() - 1, 6);
        let stat = Matrix::zeros(v.n(), 4);
        let model = DiscModel::new(tiny(), Architecture::Disc, 97, &mut rng).unwrap();
        let input = ModelInput {
            views: &v,
            contextual: &con,
            static_vectors: &stat,
        };
        assert!(matches!(model.log_probs(input, 10), Err(Error::Shape(_))));
    }

    #[test]
    fn odd_d_emb_rejected() {
        let mut d = tiny();
        d.d_emb = 5;
        assert!(DiscModel::new(d, Architecture::Disc, 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert_eq!("disc".parse::<Architecture>().unwrap(), Architecture::Disc);
        assert!("crf".parse::<Architecture>().is_err());
    }
}
