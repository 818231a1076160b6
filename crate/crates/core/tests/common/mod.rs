#![allow(dead_code)]

use std::path::{Path, PathBuf};

use disc::corpus::Dataset;
use disc::corpus::Span;
use disc::graph::Graph;
use disc::model::{Architecture, DiscModel, ModelDims, ModelInput};
use disc::params::{Gradients, ParamStore};
use disc::pipeline::Config;
use disc::synthetic::{generate, toy_config, write_toy_setup, SyntheticSpec};
use disc::tagger::nll_sum_node;
use disc::tensor::Matrix;
use disc::tokenization::{project_span_to_subwords, Label, SubwordVocab, TokenizedViews, Tokenizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every dimension at most 4.
pub fn tiny_dims() -> ModelDims {
    ModelDims {
        d_con: 4,
        d_s: 3,
        d_char: 3,
        d_char_in: 2,
        d_pos: 2,
        d_emb: 4,
        kernel_width: 3,
        w_t: 5,
    }
}

/// Three words, five subwords including the start and end tokens.
pub struct TinySentence {
    pub views: TokenizedViews,
    pub contextual: Matrix,
    pub static_vectors: Matrix,
    pub gold: Vec<Label>,
}

impl TinySentence {
    pub fn new(seed: u64) -> Self {
        let vocab = SubwordVocab::with_default_specials(["cut", "corn", "##ers"]).unwrap();
        let tok = Tokenizer::new(vocab, 5);
        let words: Vec<String> = ["cut", "corners"].map(String::from).to_vec();
        let views = tok.views_for_words(&words, None).unwrap();
        assert_eq!(views.m(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = tiny_dims();
        let gold = project_span_to_subwords(Some(Span::new(0, 1)), &views.word_to_subword, views.m()).unwrap();
        TinySentence {
            contextual: Matrix::uniform(views.m(), dims.d_con, 1.0, &mut rng),
            static_vectors: Matrix::uniform(views.n(), dims.d_s, 1.0, &mut rng),
            views,
            gold,
        }
    }

    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            views: &self.views,
            contextual: &self.contextual,
            static_vectors: &self.static_vectors,
        }
    }
}

pub fn tiny_model(arch: Architecture, seed: u64) -> DiscModel {
    DiscModel::new(
        tiny_dims(),
        arch,
        disc::tokenization::CharAlphabet::default().size(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn loss_with(model: &DiscModel, store: &ParamStore, s: &TinySentence) -> f64 {
    let mut g = Graph::new(store);
    let lp = model.forward::<ChaCha8Rng>(&mut g, s.input(), s.gold.len(), None).unwrap();
    let nll = nll_sum_node(&mut g, lp, &s.gold).unwrap();
    g.scalar(nll)
}

/// `‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-12)` for every
/// parameter tensor, using central differences with step `eps`.
pub fn gradient_errors(model: &DiscModel, s: &TinySentence, eps: f64) -> Vec<(String, f64)> {
    let mut g = Graph::new(&model.store);
    let lp = model.forward::<ChaCha8Rng>(&mut g, s.input(), s.gold.len(), None).unwrap();
    let nll = nll_sum_node(&mut g, lp, &s.gold).unwrap();
    g.backward(nll, 1.0);
    let mut grads = Gradients::zeros_like(&model.store);
    g.accumulate_param_grads(&mut grads);
    drop(g);

    let mut store = model.store.clone();
    let ids: Vec<_> = model.store.ids().collect();
    ids.into_iter()
        .map(|id| {
            let analytic = grads.get(id).data().to_vec();
            let mut numeric = vec![0.0; analytic.len()];
            for (k, n) in numeric.iter_mut().enumerate() {
                let orig = store.get(id).data()[k];
                store.get_mut(id).data_mut()[k] = orig + eps;
                let up = loss_with(model, &store, s);
                store.get_mut(id).data_mut()[k] = orig - eps;
                let down = loss_with(model, &store, s);
                store.get_mut(id).data_mut()[k] = orig;
                *n = (up - down) / (2.0 * eps);
            }
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
            let denom = (norm(&analytic) + norm(&numeric)).max(1e-12);
            (model.store.name(id).to_string(), norm(&diff) / denom)
        })
        .collect()
}

/// A generated corpus written out with toy resources. Returns the config
/// path; the test file is the training file itself.
pub fn overfit_setup(dir: &Path, seed: u64) -> (PathBuf, Dataset) {
    let d = generate(&SyntheticSpec::default()).unwrap();
    let cfg = toy_config(seed);
    (write_toy_setup(dir, &d, &d, &cfg).unwrap(), d)
}

/// Same as [`overfit_setup`] but with a config tweak applied before writing.
pub fn setup_with(dir: &Path, train: &Dataset, test: &Dataset, tweak: impl FnOnce(&mut Config)) -> PathBuf {
    let mut cfg = toy_config(1);
    tweak(&mut cfg);
    write_toy_setup(dir, train, test, &cfg).unwrap()
}
