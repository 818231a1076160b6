//! Idiomatic expression identification: a sequence tagger that fuses
//! contextual and static word representations through two attention-flow
//! layers, with the corpus tooling and evaluation protocol around it.

pub mod attention_flow;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod layers;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod synthetic;
pub mod tagger;
pub mod tensor;
pub mod tokenization;

pub use corpus::{Dataset, DatasetStats, Fixedness, Instance, Span, SplitMode, SplitSpec, UsageLabel};
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use model::{Architecture, DiscModel, ModelDims};
pub use pipeline::{Checkpoint, Config};
pub use tagger::{PredictionRecord, SpanRule};
pub use tokenization::Label;
