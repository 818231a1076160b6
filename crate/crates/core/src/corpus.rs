//! Annotated sentences, the newline-delimited JSON dataset format, train/test
//! splitting and per-split statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentences longer than this are filtered out of every corpus.
pub const MAX_SENTENCE_WORDS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageLabel {
    Idiomatic,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixedness {
    Fixed,
    SemiFixed,
    SyntacticallyFlexible,
}

impl Fixedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Fixedness::Fixed => "fixed",
            Fixedness::SemiFixed => "semi_fixed",
            Fixedness::SyntacticallyFlexible => "syntactically_flexible",
        }
    }
}

/// Inclusive word-index range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// One annotated sentence containing a potentially idiomatic expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub sentence: String,
    pub word_tokens: Vec<String>,
    pub label: UsageLabel,
    pub span: Option<Span>,
    pub idiom_type: String,
    pub fixedness: Option<Fixedness>,
    pub pos_tags: Option<Vec<String>>,
    pub source: Option<String>,
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| {
            Err(Error::Validation {
                id: self.id.clone(),
                message,
            })
        };
        let n = self.word_tokens.len();
        if n == 0 {
            return fail("no word tokens".into());
        }
        if n > MAX_SENTENCE_WORDS {
            return fail(format!("{n} word tokens exceeds the {MAX_SENTENCE_WORDS}-word limit"));
        }
        if let Some(i) = self.word_tokens.iter().position(String::is_empty) {
            return fail(format!("word token {i} is empty"));
        }
        match (self.label, self.span) {
            (UsageLabel::Idiomatic, None) => return fail("idiomatic instance has no span".into()),
            (UsageLabel::Literal, Some(_)) => return fail("literal instance carries a span".into()),
            (UsageLabel::Idiomatic, Some(s)) if s.start > s.end || s.end >= n => {
                return fail(format!("span [{}, {}] invalid for {n} word tokens", s.start, s.end))
            }
            _ => {}
        }
        if let Some(tags) = &self.pos_tags {
            if tags.len() != n {
                return fail(format!("{} POS tags for {n} word tokens", tags.len()));
            }
        }
        Ok(())
    }

    pub fn is_idiomatic(&self) -> bool {
        self.label == UsageLabel::Idiomatic
    }

    /// Space-joined words of the gold span, or `""` for literal use.
    pub fn gold_surface(&self) -> String {
        self.span
            .map(|s| self.word_tokens[s.start..=s.end].join(" "))
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    instances: Vec<Instance>,
    idiom_types: BTreeSet<String>,
}

impl Dataset {
    /// Validates every instance and id uniqueness.
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for inst in &instances {
            inst.validate()?;
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::Validation {
                    id: inst.id.clone(),
                    message: "duplicate instance id".into(),
                });
            }
        }
        let idiom_types = instances.iter().map(|i| i.idiom_type.clone()).collect();
        Ok(Dataset {
            name: name.into(),
            instances,
            idiom_types,
        })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn idiom_types(&self) -> &BTreeSet<String> {
        &self.idiom_types
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Occurrence count per idiom type.
    pub fn type_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.idiom_type.as_str()).or_insert(0) += 1;
        }
        counts
    }

    fn subset(&self, name: String, keep: impl Fn(usize, &Instance) -> bool) -> Dataset {
        let instances: Vec<Instance> = self
            .instances
            .iter()
            .enumerate()
            .filter(|(i, inst)| keep(*i, inst))
            .map(|(_, inst)| inst.clone())
            .collect();
        let idiom_types = instances.iter().map(|i| i.idiom_type.clone()).collect();
        Dataset {
            name,
            instances,
            idiom_types,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(name: impl Into<String>, text: &str, path: &Path) -> Result<Self> {
        let mut instances = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let inst: Instance = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            instances.push(inst);
        }
        Dataset::new(name, instances)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::from_jsonl(name, &text, path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    Random,
    TypeAware,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMode::Random),
            "type_aware" => Ok(SplitMode::TypeAware),
            other => Err(Error::Split(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Split(format!(
                "test fraction {test_fraction} not strictly between 0 and 1"
            )));
        }
        Ok(SplitSpec {
            mode,
            test_fraction,
            seed,
        })
    }
}

pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    match spec.mode {
        SplitMode::Random => split_random(d, spec),
        SplitMode::TypeAware => split_type_aware(d, spec),
    }
}

fn part_names(d: &Dataset) -> (String, String) {
    (format!("{}.train", d.name), format!("{}.test", d.name))
}

/// Seeded shuffle of instances; the first `round(f·n)` go to test. Both parts
/// keep the original instance order.
pub fn split_random(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n < 2 || n_test == 0 || n_test == n {
        return Err(Error::Split(format!(
            "{n} instances at test fraction {} leave an empty part",
            spec.test_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test: HashSet<usize> = order[..n_test].iter().copied().collect();
    let (train_name, test_name) = part_names(d);
    Ok((
        d.subset(train_name, |i, _| !test.contains(&i)),
        d.subset(test_name, |i, _| test.contains(&i)),
    ))
}

/// Seeded shuffle of the sorted idiom types; the first `round(f·n_types)`
/// types and all their instances go to test.
pub fn split_type_aware(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let mut types: Vec<&str> = d.idiom_types.iter().map(String::as_str).collect();
    let n = types.len();
    if n < 2 {
        return Err(Error::Split(format!(
            "type-aware split needs at least 2 idiom types, found {n}"
        )));
    }
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Split(format!(
            "{n} idiom types at test fraction {} leave an empty part",
            spec.test_fraction
        )));
    }
    types.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test: HashSet<String> = types[..n_test].iter().map(|s| s.to_string()).collect();
    let (train_name, test_name) = part_names(d);
    Ok((
        d.subset(train_name, |_, inst| !test.contains(&inst.idiom_type)),
        d.subset(test_name, |_, inst| test.contains(&inst.idiom_type)),
    ))
}

/// One row of a dataset statistics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub size_train: usize,
    pub size_test: usize,
    pub pct_idiomatic_train: f64,
    pub pct_idiomatic_test: f64,
    pub n_idioms_train: usize,
    pub n_idioms_test: usize,
    pub avg_occ_train: f64,
    pub avg_occ_test: f64,
    pub std_occ_train: f64,
    pub std_occ_test: f64,
}

struct SplitSummary {
    size: usize,
    pct_idiomatic: f64,
    n_idioms: usize,
    avg_occ: f64,
    std_occ: f64,
}

fn summarize(d: &Dataset, which: &str) -> Result<SplitSummary> {
    if d.is_empty() {
        return Err(Error::Stats(format!("{which} split is empty")));
    }
    let size = d.len();
    let idiomatic = d.instances.iter().filter(|i| i.is_idiomatic()).count();
    let counts: Vec<f64> = d.type_counts().values().map(|&c| c as f64).collect();
    let k = counts.len() as f64;
    let avg = counts.iter().sum::<f64>() / k;
    // population standard deviation
    let var = counts.iter().map(|c| (c - avg).powi(2)).sum::<f64>() / k;
    Ok(SplitSummary {
        size,
        pct_idiomatic: 100.0 * idiomatic as f64 / size as f64,
        n_idioms: counts.len(),
        avg_occ: avg,
        std_occ: var.sqrt(),
    })
}

pub fn compute_stats(train: &Dataset, test: &Dataset) -> Result<DatasetStats> {
    let tr = summarize(train, "train")?;
    let te = summarize(test, "test")?;
    Ok(DatasetStats {
        size_train: tr.size,
        size_test: te.size,
        pct_idiomatic_train: tr.pct_idiomatic,
        pct_idiomatic_test: te.pct_idiomatic,
        n_idioms_train: tr.n_idioms,
        n_idioms_test: te.n_idioms,
        avg_occ_train: tr.avg_occ,
        avg_occ_test: te.avg_occ,
        std_occ_train: tr.std_occ,
        std_occ_test: te.std_occ,
    })
}

impl DatasetStats {
    pub fn render_table(&self) -> String {
        format!(
            "split  size    pct_idiomatic  n_idioms  avg_occ  std_occ\n\
             train  {:<7} {:<14.2} {:<9} {:<8.2} {:.2}\n\
             test   {:<7} {:<14.2} {:<9} {:<8.2} {:.2}\n",
            self.size_train,
            self.pct_idiomatic_train,
            self.n_idioms_train,
            self.avg_occ_train,
            self.std_occ_train,
            self.size_test,
            self.pct_idiomatic_test,
            self.n_idioms_test,
            self.avg_occ_test,
            self.std_occ_test,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn inst(id: &str, words: &str, span: Option<(usize, usize)>, ty: &str) -> Instance {
        let word_tokens: Vec<String> = words.split(' ').map(str::to_string).collect();
        Instance {
            id: id.into(),
            sentence: words.into(),
            word_tokens,
            label: if span.is_some() {
                UsageLabel::Idiomatic
            } else {
                UsageLabel::Literal
            },
            span: span.map(|(s, e)| Span::new(s, e)),
            idiom_type: ty.into(),
            fixedness: None,
            pos_tags: None,
            source: None,
        }
    }

    fn typed(n_types: usize, per_type: usize) -> Dataset {
        let mut v = Vec::new();
        for t in 0..n_types {
            for k in 0..per_type {
                v.push(inst(&format!("{t}-{k}"), "a b c", Some((0, 1)), &format!("type{t}")));
            }
        }
        Dataset::new("d", v).unwrap()
    }

    #[test]
    fn parse_two_records() {
        let text = concat!(
            r#"{"id":"1","sentence":"he spilled the beans","word_tokens":["he","spilled","the","beans"],"label":"idiomatic","span":[1,3],"idiom_type":"spill the beans","fixedness":"semi_fixed","pos_tags":null,"source":"bnc"}"#,
            "\n",
            r#"{"id":"2","sentence":"beans","word_tokens":["beans"],"label":"literal","span":null,"idiom_type":"spill the beans","fixedness":null,"pos_tags":["NOUN"],"source":null}"#,
            "\n"
        );
        let d = Dataset::from_jsonl("x", text, Path::new("x.jsonl")).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.instances()[0].span, Some(Span::new(1, 3)));
        assert_eq!(d.instances()[0].fixedness, Some(Fixedness::SemiFixed));
        assert_eq!(d.idiom_types().len(), 1);
        assert_eq!(d.to_jsonl(), text);
    }

    #[test]
    fn idiomatic_without_span_rejected() {
        let mut i = inst("q", "a b", None, "t");
        i.label = UsageLabel::Idiomatic;
        let err = Dataset::new("d", vec![i]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref id, .. } if id == "q"), "{err}");
    }

    #[test]
    fn span_past_end_rejected() {
        let i = inst("q", "a b c d", Some((3, 5)), "t");
        assert!(matches!(i.validate(), Err(Error::Validation { .. })));
    }

    #[test]
    fn other_invariants_rejected() {
        let mut long = inst("l", "w", None, "t");
        long.word_tokens = vec!["w".into(); 51];
        assert!(long.validate().is_err());
        let mut tags = inst("p", "a b", None, "t");
        tags.pos_tags = Some(vec!["NOUN".into()]);
        assert!(tags.validate().is_err());
        let mut lit = inst("s", "a b", Some((0, 0)), "t");
        lit.label = UsageLabel::Literal;
        assert!(lit.validate().is_err());
        let dup = vec![inst("x", "a", None, "t"), inst("x", "b", None, "t")];
        assert!(Dataset::new("d", dup).is_err());
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = "\n{\"id\":\"1\"}\n";
        match Dataset::from_jsonl("x", text, Path::new("f.jsonl")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn random_split_sizes_and_determinism() {
        let d = typed(5, 2);
        let spec = SplitSpec::new(SplitMode::Random, 0.2, 7).unwrap();
        let (tr, te) = split_random(&d, &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut ids: Vec<_> = tr.instances().iter().chain(te.instances()).map(|i| &i.id).collect();
        ids.sort();
        let mut orig: Vec<_> = d.instances().iter().map(|i| &i.id).collect();
        orig.sort();
        assert_eq!(ids, orig);
        assert_eq!(split_random(&d, &spec).unwrap(), (tr, te));
    }

    #[test]
    fn random_split_of_one_instance_fails() {
        let d = Dataset::new("d", vec![inst("a", "x", None, "t")]).unwrap();
        let spec = SplitSpec::new(SplitMode::Random, 0.5, 0).unwrap();
        assert!(matches!(split_random(&d, &spec), Err(Error::Split(_))));
    }

    #[test]
    fn type_aware_split_takes_whole_types() {
        let d = typed(5, 2);
        let spec = SplitSpec::new(SplitMode::TypeAware, 0.2, 3).unwrap();
        let (tr, te) = split_type_aware(&d, &spec).unwrap();
        assert_eq!(te.idiom_types().len(), 1);
        assert_eq!(te.len(), 2);
        assert!(tr.idiom_types().is_disjoint(te.idiom_types()));
    }

    #[test]
    fn type_aware_split_of_one_type_fails() {
        let d = typed(1, 4);
        let spec = SplitSpec::new(SplitMode::TypeAware, 0.5, 0).unwrap();
        assert!(matches!(split_type_aware(&d, &spec), Err(Error::Split(_))));
    }

    #[test]
    fn bad_fraction_rejected() {
        assert!(SplitSpec::new(SplitMode::Random, 0.0, 0).is_err());
        assert!(SplitSpec::new(SplitMode::Random, 1.0, 0).is_err());
    }

    #[test]
    fn stats_symmetric_case() {
        let train = typed(2, 2);
        let test = typed(1, 1);
        let s = compute_stats(&train, &test).unwrap();
        assert_eq!(s.size_train, 4);
        assert_eq!(s.pct_idiomatic_train, 100.0);
        assert_eq!(s.n_idioms_train, 2);
        assert_eq!(s.avg_occ_train, 2.0);
        assert_eq!(s.std_occ_train, 0.0);
    }

    #[test]
    fn stats_population_std() {
        // occurrences 1 and 3: mean 2, population std 1
        let v = vec![
            inst("a", "x", None, "t1"),
            inst("b", "x", None, "t2"),
            inst("c", "x", None, "t2"),
            inst("d", "x", Some((0, 0)), "t2"),
        ];
        let d = Dataset::new("d", v).unwrap();
        let s = compute_stats(&d, &d).unwrap();
        assert_eq!(s.std_occ_train, 1.0);
        assert_eq!(s.pct_idiomatic_test, 25.0);
    }

    #[test]
    fn stats_empty_split_fails() {
        let d = typed(2, 1);
        let empty = Dataset::new("e", vec![]).unwrap();
        assert!(matches!(compute_stats(&d, &empty), Err(Error::Stats(_))));
    }
}
