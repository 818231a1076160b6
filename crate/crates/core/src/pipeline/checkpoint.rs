//! Checkpoint directories.
//!
//! ```text
//! <dir>/config.txt   config snapshot (key = value)
//! <dir>/vocab.txt    subword vocabulary, one token per line
//! <dir>/params.bin   trainable parameters
//! <dir>/meta.json    epoch, selection metric, dims, sizes
//! ```
//!
//! `params.bin` layout, little-endian: magic `DISCPRM\0`, `u32` version,
//! `u64` parameter count, then per parameter `u32` name length, UTF-8 name,
//! `u32` rows, `u32` cols and `rows·cols` `f64` values in row-major order.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Architecture, DiscModel, ModelDims};
use crate::params::ParamStore;
use crate::tensor::Matrix;
use crate::tokenization::SubwordVocab;

use super::config::Config;

const PARAMS_MAGIC: &[u8; 8] = b"DISCPRM\0";
const PARAMS_VERSION: u32 = 1;
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: Config,
    pub model: DiscModel,
    pub vocab: SubwordVocab,
    pub epoch: usize,
    pub metric_name: String,
    pub metric_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub epoch: usize,
    pub metric_name: String,
    pub metric_value: f64,
    pub architecture: Architecture,
    pub dims: ModelDims,
    pub alphabet_size: usize,
    pub vocab_size: usize,
    pub num_parameters: usize,
}

fn io_err(path: &Path, what: &str) -> impl FnOnce(std::io::Error) -> Error {
    let ctx = format!("{what} {}", path.display());
    move |e| Error::io(ctx, e)
}

pub fn write_params(store: &ParamStore, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (_, p) in store.iter() {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&(p.value.rows() as u32).to_le_bytes())?;
        w.write_all(&(p.value.cols() as u32).to_le_bytes())?;
        for x in p.value.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Overwrites every parameter of `store` from `r`. Names, order and shapes
/// must match exactly.
pub fn read_params_into(store: &mut ParamStore, mut r: impl Read) -> Result<()> {
    let bad = |m: String| Error::Compatibility(m);
    let io = |e: std::io::Error| Error::io("reading parameters", e);
    let mut magic = [0; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != PARAMS_MAGIC {
        return Err(bad("not a parameter file".into()));
    }
    let version = read_u32(&mut r).map_err(io)?;
    if version != PARAMS_VERSION {
        return Err(bad(format!("parameter file version {version}, expected {PARAMS_VERSION}")));
    }
    let mut count = [0; 8];
    r.read_exact(&mut count).map_err(io)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != store.len() {
        return Err(bad(format!("{count} stored parameters, model has {}", store.len())));
    }
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let len = read_u32(&mut r).map_err(io)? as usize;
        let mut name = vec![0; len];
        r.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name).map_err(|_| bad("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut r).map_err(io)? as usize;
        let cols = read_u32(&mut r).map_err(io)? as usize;
        if name != store.name(id) || (rows, cols) != store.get(id).shape() {
            let (er, ec) = store.get(id).shape();
            return Err(bad(format!(
                "stored parameter {name} ({rows}x{cols}) does not match model parameter {} ({er}x{ec})",
                store.name(id)
            )));
        }
        let mut data = vec![0.0; rows * cols];
        let mut b = [0; 8];
        for x in data.iter_mut() {
            r.read_exact(&mut b).map_err(io)?;
            *x = f64::from_le_bytes(b);
        }
        *store.get_mut(id) = Matrix::from_vec(rows, cols, data);
    }
    Ok(())
}

impl Checkpoint {
    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            format_version: FORMAT_VERSION,
            epoch: self.epoch,
            metric_name: self.metric_name.clone(),
            metric_value: self.metric_value,
            architecture: self.model.architecture,
            dims: self.model.dims,
            alphabet_size: self.model.alphabet_size,
            vocab_size: self.vocab.len(),
            num_parameters: self.model.store.num_scalars(),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir, "creating"))?;
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(io_err(&p, "writing"))
        };
        write("config.txt", self.config.to_text().as_bytes())?;
        write("vocab.txt", self.vocab.to_file_contents().as_bytes())?;
        write("meta.json", serde_json::to_string_pretty(&self.meta())?.as_bytes())?;
        let p = dir.join("params.bin");
        let mut w = BufWriter::new(fs::File::create(&p).map_err(io_err(&p, "creating"))?);
        write_params(&self.model.store, &mut w).map_err(io_err(&p, "writing"))?;
        w.flush().map_err(io_err(&p, "writing"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(io_err(&p, "reading"))
        };
        let config = Config::parse(&read("config.txt")?, dir)?;
        let meta: CheckpointMeta = serde_json::from_str(&read("meta.json")?)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "checkpoint format {}, expected {FORMAT_VERSION}",
                meta.format_version
            )));
        }
        if meta.dims != config.dims || meta.architecture != config.architecture {
            return Err(Error::Compatibility("meta.json disagrees with config.txt".into()));
        }
        let vocab = SubwordVocab::load(dir.join("vocab.txt"))?;
        if vocab.len() != meta.vocab_size {
            return Err(Error::Compatibility(format!(
                "vocabulary has {} entries, checkpoint recorded {}",
                vocab.len(),
                meta.vocab_size
            )));
        }
        // initial values are overwritten below
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = DiscModel::new(config.dims, config.architecture, meta.alphabet_size, &mut rng)?;
        let p = dir.join("params.bin");
        let f = fs::File::open(&p).map_err(io_err(&p, "opening"))?;
        read_params_into(&mut model.store, BufReader::new(f))?;
        Ok(Checkpoint {
            config,
            model,
            vocab,
            epoch: meta.epoch,
            metric_name: meta.metric_name,
            metric_value: meta.metric_value,
        })
    }
}
