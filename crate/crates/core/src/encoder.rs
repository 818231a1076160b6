//! Embedding phase: contextual, static+character and POS embeddings, each
//! projected to `d_emb` by its own bidirectional LSTM.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{init_uniform, BiLstm, Linear};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;
use crate::tokenization::{tag_index, POS_TAGS};

/// Frozen source of contextualized subword embeddings.
pub trait ContextualEncoder: Send + Sync {
    fn dim(&self) -> usize;

    /// One row per subword, `M×dim`.
    fn embed(&self, instance_id: &str, subword_ids: &[usize]) -> Result<Matrix>;
}

/// Random, frozen stand-in for a pre-trained encoder. Each row is
/// `tanh(T[id] + 0.5 · mean_j T[id_j])`, so it carries some sentence
/// context.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder {
    table: Matrix,
}

impl ToyEncoder {
    pub fn new(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ToyEncoder {
            table: Matrix::uniform(vocab_size, dim, 1.0, &mut rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }
}

impl ContextualEncoder for ToyEncoder {
    fn dim(&self) -> usize {
        self.table.cols()
    }

    fn embed(&self, _instance_id: &str, subword_ids: &[usize]) -> Result<Matrix> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for &id in subword_ids {
            if id >= self.table.rows() {
                return Err(Error::Shape(format!(
                    "subword id {id} outside toy encoder vocabulary of {}",
                    self.table.rows()
                )));
            }
            for (m, x) in mean.iter_mut().zip(self.table.row(id)) {
                *m += x / subword_ids.len() as f64;
            }
        }
        let mut out = Matrix::zeros(subword_ids.len(), d);
        for (r, &id) in subword_ids.iter().enumerate() {
            for ((o, x), m) in out.row_mut(r).iter_mut().zip(self.table.row(id)).zip(&mean) {
                *o = (x + 0.5 * m).tanh();
            }
        }
        Ok(out)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"DISCCTX\0";
pub const CACHE_VERSION: u32 = 1;

/// Precomputed contextual embeddings keyed by instance id.
///
/// File layout (version 1, all integers and floats little-endian):
///
/// ```text
/// magic   8 bytes  "DISCCTX\0"
/// version u32      1
/// dim     u32      embedding width D_con
/// count   u64      number of records
/// count × {
///     id_len u32, id (UTF-8, id_len bytes),
///     rows   u32, rows × dim f64 (row-major)
/// }
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextualCache {
    dim: usize,
    entries: HashMap<String, Matrix>,
}

impl ContextualCache {
    pub fn new(dim: usize) -> Self {
        ContextualCache {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, m: Matrix) -> Result<()> {
        if m.cols() != self.dim {
            return Err(Error::Shape(format!(
                "cache entry has width {}, cache dim is {}",
                m.cols(),
                self.dim
            )));
        }
        self.entries.insert(id.into(), m);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        let mut ids: Vec<&String> = self.entries.keys().collect();
        ids.sort();
        for id in ids {
            let m = &self.entries[id];
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&(m.rows() as u32).to_le_bytes())?;
            for x in m.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ctx = || format!("writing {}", path.display());
        let f = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(ctx(), e))?;
        w.flush().map_err(|e| Error::io(ctx(), e))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Compatibility(format!("contextual cache: {m}"));
        let io = |e| Error::io("reading contextual cache", e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut r).map_err(io)?;
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r).map_err(io)? as usize;
        let mut count = [0u8; 8];
        r.read_exact(&mut count).map_err(io)?;
        let count = u64::from_le_bytes(count);
        let mut cache = ContextualCache::new(dim);
        for _ in 0..count {
            let len = read_u32(&mut r).map_err(io)? as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id).map_err(io)?;
            let id = String::from_utf8(id).map_err(|_| bad("id is not UTF-8"))?;
            let rows = read_u32(&mut r).map_err(io)? as usize;
            let mut data = vec![0.0; rows * dim];
            let mut buf = [0u8; 8];
            for x in &mut data {
                r.read_exact(&mut buf).map_err(io)?;
                *x = f64::from_le_bytes(buf);
            }
            cache.entries.insert(id, Matrix::from_vec(rows, dim, data));
        }
        Ok(cache)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_from(BufReader::new(f))
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl ContextualEncoder for ContextualCache {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, instance_id: &str, subword_ids: &[usize]) -> Result<Matrix> {
        let m = self
            .entries
            .get(instance_id)
            .ok_or_else(|| Error::MissingEmbedding(instance_id.to_string()))?;
        if m.rows() != subword_ids.len() {
            return Err(Error::Shape(format!(
                "cached embedding for {instance_id} has {} rows, tokenization gives {}",
                m.rows(),
                subword_ids.len()
            )));
        }
        Ok(m.clone())
    }
}

/// Frozen word vectors. Lookup is case-sensitive with a lowercase fallback;
/// anything else gets the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticEmbeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl StaticEmbeddings {
    pub fn new(dim: usize) -> Self {
        StaticEmbeddings {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "static vector of length {} in a {}-dim table",
                v.len(),
                self.dim
            )));
        }
        self.vectors.insert(word.into(), v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Reads `word v_1 … v_D` lines. The dimension is taken from the first
    /// line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut table: Option<StaticEmbeddings> = None;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let mut fields = line.split(' ');
            let word = fields.next().unwrap_or_default();
            let v = fields
                .map(|x| x.parse::<f64>().map_err(|e| parse_err(format!("{x:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let t = table.get_or_insert_with(|| StaticEmbeddings::new(v.len()));
            if v.len() != t.dim {
                return Err(parse_err(format!("expected {} values, found {}", t.dim, v.len())));
            }
            t.vectors.insert(word.to_string(), v);
        }
        table.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no embedding lines".into(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = String::new();
        for w in words {
            out.push_str(w);
            for x in &self.vectors[w] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }

    /// `N×dim`, zero rows for out-of-vocabulary words.
    pub fn embed_words<S: AsRef<str>>(&self, words: &[S]) -> Matrix {
        let mut m = Matrix::zeros(words.len(), self.dim);
        for (r, w) in words.iter().enumerate() {
            if let Some(v) = self.lookup(w.as_ref()) {
                m.row_mut(r).copy_from_slice(v);
            }
        }
        m
    }
}

/// Character embeddings → 1-D convolution ("same" zero padding) → max-pool
/// over the character axis.
#[derive(Clone, Debug)]
pub struct CharEncoder {
    pub embed: ParamId,
    pub conv: Linear,
    pub kernel_width: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl CharEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        alphabet_size: usize,
        d_in: usize,
        d_out: usize,
        kernel_width: usize,
        rng: &mut R,
    ) -> Self {
        let embed = store.add("char.embed", init_uniform(alphabet_size, d_in, alphabet_size, rng));
        let conv = Linear::new(store, "char.conv", kernel_width * d_in, d_out, rng);
        CharEncoder {
            embed,
            conv,
            kernel_width,
            d_in,
            d_out,
        }
    }

    /// `N×d_out` from an `N×W_t` matrix of char ids.
    pub fn forward(&self, g: &mut Graph, char_matrix: &[Vec<usize>]) -> Result<NodeId> {
        let width = char_matrix.first().map_or(0, Vec::len);
        if width == 0 || char_matrix.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("character matrix is empty or ragged".into()));
        }
        let table = g.param(self.embed);
        let alphabet = g.shape(table).0;
        if let Some(&c) = char_matrix.iter().flatten().find(|&&c| c >= alphabet) {
            return Err(Error::Shape(format!("char id {c} outside alphabet of {alphabet}")));
        }
        let ids: Vec<Option<usize>> = char_matrix.iter().flatten().map(|&c| Some(c)).collect();
        let emb = g.gather_rows(table, ids);
        let half = (self.kernel_width - 1) / 2;
        let total = char_matrix.len() * width;
        let mut shifted = Vec::with_capacity(self.kernel_width);
        for k in 0..self.kernel_width {
            let idx = (0..total)
                .map(|p| {
                    let (word, pos) = (p / width, p % width);
                    let src = pos as isize + k as isize - half as isize;
                    (src >= 0 && (src as usize) < width).then(|| word * width + src as usize)
                })
                .collect();
            shifted.push(g.gather_rows(emb, idx));
        }
        let windows = g.concat_cols(&shifted);
        let conv = self.conv.forward(g, windows);
        Ok(g.max_row_groups(conv, width))
    }
}

/// Two-layer highway network, `y = g∘relu(W_t x + b_t) + (1-g)∘x` with
/// `g = σ(W_g x + b_g)`. Gate biases start at -2 so the carry path dominates
/// early.
#[derive(Clone, Debug)]
pub struct Highway {
    pub layers: Vec<(Linear, Linear)>,
}

pub const HIGHWAY_GATE_BIAS: f64 = -2.0;

impl Highway {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, dim: usize, n_layers: usize, rng: &mut R) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let transform = Linear::new(store, &format!("highway.{l}.transform"), dim, dim, rng);
                let gate = Linear::new(store, &format!("highway.{l}.gate"), dim, dim, rng);
                store.get_mut(gate.b).fill(HIGHWAY_GATE_BIAS);
                (transform, gate)
            })
            .collect();
        Highway { layers }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let mut x = x;
        for (transform, gate) in &self.layers {
            let t_pre = transform.forward(g, x);
            let t = g.relu(t_pre);
            let g_pre = gate.forward(g, x);
            let gv = g.sigmoid(g_pre);
            let carry = g.one_minus(gv);
            let a = g.mul(gv, t);
            let b = g.mul(carry, x);
            x = g.add(a, b);
        }
        x
    }
}

/// Trainable tag embedding table over [`POS_TAGS`].
#[derive(Clone, Debug)]
pub struct PosEmbedding {
    pub table: ParamId,
}

impl PosEmbedding {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, dim: usize, rng: &mut R) -> Self {
        let n = POS_TAGS.len();
        PosEmbedding {
            table: store.add("pos.embed", init_uniform(n, dim, n, rng)),
        }
    }

    pub fn forward<S: AsRef<str>>(&self, g: &mut Graph, tags: &[S]) -> Result<NodeId> {
        let idx = tags
            .iter()
            .map(|t| tag_index(t.as_ref()).map(Some))
            .collect::<Result<Vec<_>>>()?;
        let table = g.param(self.table);
        Ok(g.gather_rows(table, idx))
    }
}

/// The three projected streams.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingBundle {
    /// `M×d_emb`
    pub contextual: NodeId,
    /// `N×d_emb`
    pub static_words: NodeId,
    /// `N×d_emb`
    pub pos: NodeId,
}

#[derive(Clone, Debug)]
pub struct StreamProjector {
    pub contextual: BiLstm,
    pub static_words: BiLstm,
    pub pos: BiLstm,
    pub d_emb: usize,
    in_dims: (usize, usize, usize),
}

impl StreamProjector {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        d_con: usize,
        d_static: usize,
        d_pos: usize,
        d_emb: usize,
        rng: &mut R,
    ) -> Self {
        assert!(d_emb % 2 == 0, "d_emb must be even");
        StreamProjector {
            contextual: BiLstm::new(store, "proj.con", d_con, d_emb / 2, rng),
            static_words: BiLstm::new(store, "proj.static", d_static, d_emb / 2, rng),
            pos: BiLstm::new(store, "proj.pos", d_pos, d_emb / 2, rng),
            d_emb,
            in_dims: (d_con, d_static, d_pos),
        }
    }

    pub fn project(&self, g: &mut Graph, e_con: NodeId, e_static: NodeId, e_pos: NodeId) -> Result<EmbeddingBundle> {
        let expect = |name: &str, got: (usize, usize), cols: usize| {
            if got.1 != cols || got.0 == 0 {
                Err(Error::Shape(format!(
                    "{name} stream is {}x{}, expected width {cols}",
                    got.0, got.1
                )))
            } else {
                Ok(())
            }
        };
        let (dc, ds, dp) = self.in_dims;
        expect("contextual", g.shape(e_con), dc)?;
        expect("static", g.shape(e_static), ds)?;
        expect("pos", g.shape(e_pos), dp)?;
        if g.shape(e_static).0 != g.shape(e_pos).0 {
            return Err(Error::Shape(format!(
                "static stream has {} rows, POS stream {}",
                g.shape(e_static).0,
                g.shape(e_pos).0
            )));
        }
        Ok(EmbeddingBundle {
            contextual: self.contextual.forward(g, e_con),
            static_words: self.static_words.forward(g, e_static),
            pos: self.pos.forward(g, e_pos),
        })
    }
}

/// Char CNN, frozen static vectors and highway fusion for the word stream.
#[derive(Clone, Debug)]
pub struct StaticWordEncoder {
    pub chars: CharEncoder,
    pub highway: Highway,
    pub d_static: usize,
}

impl StaticWordEncoder {
    /// `N×(d_char + d_static)`; `static_vectors` is the frozen `N×d_static`
    /// lookup for the sentence.
    pub fn forward(&self, g: &mut Graph, char_matrix: &[Vec<usize>], static_vectors: &Matrix) -> Result<NodeId> {
        if static_vectors.rows() != char_matrix.len() || static_vectors.cols() != self.d_static {
            return Err(Error::Shape(format!(
                "static vectors {}x{} for {} words of width {}",
                static_vectors.rows(),
                static_vectors.cols(),
                char_matrix.len(),
                self.d_static
            )));
        }
        let chars = self.chars.forward(g, char_matrix)?;
        let words = g.constant(static_vectors.clone());
        let cat = g.concat_cols(&[chars, words]);
        Ok(self.highway.forward(g, cat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn toy_encoder_is_frozen_and_shaped() {
        let enc = ToyEncoder::new(20, 768, 0);
        let a = enc.embed("x", &[2, 5, 6, 7, 8, 9, 3]).unwrap();
        let b = enc.embed("y", &[2, 5, 6, 7, 8, 9, 3]).unwrap();
        assert_eq!(a.shape(), (7, 768));
        assert_eq!(a, b);
        assert!(enc.embed("x", &[25]).is_err());
    }

    #[test]
    fn cache_round_trip_and_miss() {
        let mut cache = ContextualCache::new(3);
        cache
            .insert("a", Matrix::from_rows(&[[1.0, 2.0, 3.5], [0.1, -0.2, 1e-300]]))
            .unwrap();
        cache.insert("b", Matrix::zeros(1, 3)).unwrap();
        let mut buf = Vec::new();
        cache.write_to(&mut buf).unwrap();
        let back = ContextualCache::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, cache);
        assert_eq!(back.embed("a", &[0, 0]).unwrap().get(1, 2), 1e-300);
        assert!(matches!(back.embed("zz", &[0]), Err(Error::MissingEmbedding(id)) if id == "zz"));
        assert!(matches!(back.embed("a", &[0]), Err(Error::Shape(_))));
        buf[0] = b'X';
        assert!(ContextualCache::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn static_lookup_with_fallbacks() {
        let mut t = StaticEmbeddings::new(2);
        t.insert("Paris", vec![1.0, 2.0]).unwrap();
        t.insert("dog", vec![3.0, 4.0]).unwrap();
        let m = t.embed_words(&["Paris", "Dog", "cat"]);
        assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.0, 0.0]]));
        assert!(t.lookup("paris").is_none());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        t.save(&p).unwrap();
        assert_eq!(StaticEmbeddings::load(&p).unwrap(), t);
        fs::write(&p, "a 1 2\nb 1\n").unwrap();
        assert!(matches!(StaticEmbeddings::load(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn char_encoder_output_is_length_invariant() {
        let mut store = ParamStore::new();
        let enc = CharEncoder::new(&mut store, 10, 4, 6, 5, &mut rng());
        let mut g = Graph::new(&store);
        let out = enc.forward(&mut g, &[vec![2, 3, 0, 0], vec![4, 5, 6, 7]]).unwrap();
        assert_eq!(g.shape(out), (2, 6));
        let out16 = enc.forward(&mut g, &[vec![2; 16]]).unwrap();
        assert_eq!(g.shape(out16), (1, 6));
        assert!(enc.forward(&mut g, &[vec![12, 0]]).is_err());
    }

    #[test]
    fn char_encoder_is_permutation_equivariant() {
        let mut store = ParamStore::new();
        let enc = CharEncoder::new(&mut store, 10, 3, 4, 5, &mut rng());
        let mut g = Graph::new(&store);
        let words = vec![vec![2, 3, 4, 0, 0], vec![5, 6, 0, 0, 0], vec![7, 8, 9, 2, 0]];
        let a = enc.forward(&mut g, &words).unwrap();
        let rev: Vec<_> = words.iter().rev().cloned().collect();
        let b = enc.forward(&mut g, &rev).unwrap();
        for i in 0..3 {
            assert_eq!(g.value(a).row(i), g.value(b).row(2 - i));
        }
    }

    #[test]
    fn highway_gate_extremes() {
        let mut store = ParamStore::new();
        let hw = Highway::new(&mut store, 5, 2, &mut rng());
        let x = Matrix::uniform(3, 5, 1.0, &mut rng());
        for (_, gate) in &hw.layers {
            store.get_mut(gate.b).fill(-1e4);
        }
        let mut g = Graph::new(&store);
        let xn = g.constant(x.clone());
        let y = hw.forward(&mut g, xn);
        assert_eq!(g.value(y), &x);

        // open gates: output is the transform path
        let mut store1 = store.clone();
        for (_, gate) in &hw.layers {
            store1.get_mut(gate.b).fill(1e4);
        }
        let mut g = Graph::new(&store1);
        let xn = g.constant(x.clone());
        let y = hw.forward(&mut g, xn);
        let mut expect = x.clone();
        for (t, _) in &hw.layers {
            let mut z = expect.matmul(store1.get(t.w));
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(store1.get(t.b).data()) {
                    *v = (*v + b).max(0.0);
                }
            }
            expect = z;
        }
        for (a, b) in g.value(y).data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn static_word_encoder_shapes() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let chars = CharEncoder::new(&mut store, 97, 64, 64, 5, &mut r);
        let highway = Highway::new(&mut store, 364, 2, &mut r);
        let enc = StaticWordEncoder {
            chars,
            highway,
            d_static: 300,
        };
        let mut g = Graph::new(&store);
        let out = enc.forward(&mut g, &vec![vec![5; 16]; 5], &Matrix::zeros(5, 300)).unwrap();
        assert_eq!(g.shape(out), (5, 364));
        assert!(enc.forward(&mut g, &vec![vec![5; 16]; 4], &Matrix::zeros(5, 300)).is_err());
    }

    #[test]
    fn pos_embedding_lookup() {
        let mut store = ParamStore::new();
        let pos = PosEmbedding::new(&mut store, 64, &mut rng());
        let mut g = Graph::new(&store);
        let out = pos.forward(&mut g, &["NOUN", "VERB", "NOUN"]).unwrap();
        assert_eq!(g.shape(out), (3, 64));
        assert_eq!(g.value(out).row(0), g.value(out).row(2));
        assert!(matches!(pos.forward(&mut g, &["NN"]), Err(Error::Tag(_))));
    }

    #[test]
    fn projector_shapes() {
        let mut store = ParamStore::new();
        let proj = StreamProjector::new(&mut store, 6, 5, 3, 8, &mut rng());
        let mut g = Graph::new(&store);
        let c = g.constant(Matrix::zeros(1, 6));
        let s = g.constant(Matrix::zeros(1, 5));
        let p = g.constant(Matrix::zeros(1, 3));
        let b = proj.project(&mut g, c, s, p).unwrap();
        assert_eq!(g.shape(b.contextual), (1, 8));
        assert_eq!(g.shape(b.static_words), (1, 8));
        assert_eq!(g.shape(b.pos), (1, 8));
        let bad = g.constant(Matrix::zeros(2, 4));
        assert!(proj.project(&mut g, c, bad, p).is_err());
    }
}
