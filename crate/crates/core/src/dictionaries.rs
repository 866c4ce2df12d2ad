//! Bilingual and multilingual translation dictionaries and the paired
//! training matrices built from them.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Ordered word tuples, one column per language. By convention the last
/// language is the hub.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationDictionary {
    langs: Vec<String>,
    tuples: Vec<Vec<String>>,
}

impl TranslationDictionary {
    /// Builds a dictionary, dropping exact duplicate tuples while keeping the
    /// first occurrence order.
    pub fn new(langs: Vec<String>, tuples: Vec<Vec<String>>) -> Result<Self> {
        if langs.len() < 2 {
            return Err(Error::Invalid(format!(
                "a dictionary needs at least two languages, got {}",
                langs.len()
            )));
        }
        let mut seen = HashSet::with_capacity(tuples.len());
        let mut kept = Vec::with_capacity(tuples.len());
        for (i, t) in tuples.into_iter().enumerate() {
            if t.len() != langs.len() {
                return Err(Error::Invalid(format!(
                    "tuple {i} has {} entries, expected {}",
                    t.len(),
                    langs.len()
                )));
            }
            if t.iter().any(String::is_empty) {
                return Err(Error::Invalid(format!("tuple {i} contains an empty token")));
            }
            if seen.insert(t.clone()) {
                kept.push(t);
            }
        }
        Ok(TranslationDictionary {
            langs,
            tuples: kept,
        })
    }

    pub fn langs(&self) -> &[String] {
        &self.langs
    }

    pub fn tuples(&self) -> &[Vec<String>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.langs.len()
    }

    /// Column holding `lang`.
    pub fn column(&self, lang: &str) -> Result<usize> {
        self.langs.iter().position(|l| l == lang).ok_or_else(|| {
            Error::Invalid(format!(
                "language `{lang}` is not one of the dictionary's [{}]",
                self.langs.join(", ")
            ))
        })
    }

    /// Keeps the tuples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        TranslationDictionary {
            langs: self.langs.clone(),
            tuples: indices.iter().map(|&i| self.tuples[i].clone()).collect(),
        }
    }

    /// Dictionary restricted to two of the columns.
    pub fn project(&self, a: usize, b: usize) -> Result<Self> {
        let n = self.arity();
        if a >= n || b >= n || a == b {
            return Err(Error::Invalid(format!("invalid column pair ({a}, {b})")));
        }
        let tuples = self
            .tuples
            .iter()
            .map(|t| vec![t[a].clone(), t[b].clone()])
            .collect();
        TranslationDictionary::new(vec![self.langs[a].clone(), self.langs[b].clone()], tuples)
    }
}

/// Reads a dictionary whose lines hold one token per language, separated by
/// tabs or spaces.
pub fn read_dictionary<R: BufRead>(
    reader: R,
    langs: &[String],
    origin: &str,
) -> Result<TranslationDictionary> {
    let mut tuples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let tuple: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if tuple.len() != langs.len() {
            return Err(Error::parse(
                origin,
                n + 1,
                format!("expected {} tokens, found {}", langs.len(), tuple.len()),
            ));
        }
        tuples.push(tuple);
    }
    TranslationDictionary::new(langs.to_vec(), tuples)
}

pub fn load_dictionary(path: impl AsRef<Path>, langs: &[String]) -> Result<TranslationDictionary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dictionary(BufReader::new(file), langs, &path.display().to_string())
}

/// Writes one tab-separated tuple per line.
pub fn write_dictionary<W: Write>(dict: &TranslationDictionary, mut writer: W) -> std::io::Result<()> {
    for t in dict.tuples() {
        writeln!(writer, "{}", t.join("\t"))?;
    }
    writer.flush()
}

pub fn save_dictionary(dict: &TranslationDictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dictionary(dict, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Joins bilingual dictionaries `(x_i, pivot)` into tuples
/// `(x_1, ..., x_m, pivot)`.
///
/// A pivot word is emitted only when every input translates it; the first
/// listed translation is used. Output order follows the first dictionary.
pub fn join_on_pivot(bis: &[TranslationDictionary]) -> Result<TranslationDictionary> {
    if bis.len() < 2 {
        return Err(Error::Invalid(format!(
            "pivot join needs at least two dictionaries, got {}",
            bis.len()
        )));
    }
    let pivot = &bis[0].langs().last().expect("arity >= 2")[..];
    for d in bis {
        if d.arity() != 2 {
            return Err(Error::Invalid("pivot join takes bilingual dictionaries".into()));
        }
        if d.langs()[1] != pivot {
            return Err(Error::Invalid(format!(
                "pivot mismatch: `{}` vs `{pivot}`",
                d.langs()[1]
            )));
        }
    }

    let first_translation: Vec<HashMap<&str, &str>> = bis
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in d.tuples() {
                m.entry(t[1].as_str()).or_insert(t[0].as_str());
            }
            m
        })
        .collect();

    let mut emitted = HashSet::new();
    let mut tuples = Vec::new();
    for t in bis[0].tuples() {
        let p = t[1].as_str();
        if !emitted.insert(p) {
            continue;
        }
        let row: Option<Vec<String>> = first_translation
            .iter()
            .map(|m| m.get(p).map(|w| (*w).to_owned()))
            .collect();
        if let Some(mut row) = row {
            row.push(p.to_owned());
            tuples.push(row);
        }
    }
    let mut langs: Vec<String> = bis.iter().map(|d| d.langs()[0].clone()).collect();
    langs.push(pivot.to_owned());
    TranslationDictionary::new(langs, tuples)
}

/// Uniform sample of `size` tuples without replacement. The chosen tuples
/// keep their original relative order.
pub fn subsample(dict: &TranslationDictionary, size: usize, seed: u64) -> Result<TranslationDictionary> {
    if size > dict.len() {
        return Err(Error::Invalid(format!(
            "cannot sample {size} tuples from a dictionary of {}",
            dict.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, dict.len(), size).into_vec();
    picked.sort_unstable();
    Ok(dict.select(&picked))
}

/// Row-aligned source and target vectors for the in-vocabulary tuples of a
/// dictionary.
#[derive(Clone, Debug)]
pub struct PairedMatrices {
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
    /// Index of the dictionary tuple behind each row.
    pub rows: Vec<usize>,
    pub skipped_oov: usize,
}

impl PairedMatrices {
    pub fn kept(&self) -> usize {
        self.rows.len()
    }
}

/// Gathers one row per tuple whose two words both exist in the given spaces.
/// Out-of-vocabulary tuples are counted, not reported as errors, unless no
/// tuple survives.
pub fn build_pairs(
    dict: &TranslationDictionary,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    src_col: usize,
    tgt_col: usize,
) -> Result<PairedMatrices> {
    let gathered = gather_rows(dict, &[(src, src_col), (tgt, tgt_col)])?;
    let skipped = dict.len() - gathered.rows.len();
    let mut matrices = gathered.matrices;
    let target = matrices.pop().expect("two spaces");
    let source = matrices.pop().expect("two spaces");
    Ok(PairedMatrices {
        source,
        target,
        rows: gathered.rows,
        skipped_oov: skipped,
    })
}

pub(crate) struct Gathered {
    pub matrices: Vec<DMatrix<f64>>,
    pub rows: Vec<usize>,
}

fn covered_rows(dict: &TranslationDictionary, members: &[(&EmbeddingSpace, usize)]) -> Vec<usize> {
    dict.tuples()
        .iter()
        .enumerate()
        .filter(|(_, t)| members.iter().all(|(s, c)| s.contains(&t[*c])))
        .map(|(i, _)| i)
        .collect()
}

/// For each `(space, column)` member, the matrix of vectors for the tuples
/// fully covered by every member.
pub(crate) fn gather_rows(
    dict: &TranslationDictionary,
    members: &[(&EmbeddingSpace, usize)],
) -> Result<Gathered> {
    for (space, col) in members {
        if *col >= dict.arity() {
            return Err(Error::Invalid(format!(
                "column {col} out of range for a {}-language dictionary",
                dict.arity()
            )));
        }
        if space.lang() != dict.langs()[*col] {
            return Err(Error::Invalid(format!(
                "space language `{}` does not match dictionary column `{}`",
                space.lang(),
                dict.langs()[*col]
            )));
        }
    }
    let dim = members[0].0.dim();
    if let Some((s, _)) = members.iter().find(|(s, _)| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: s.dim(),
        });
    }

    let rows = covered_rows(dict, members);
    let skipped = dict.len() - rows.len();
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            what: "dictionary tuples".into(),
            evaluated: 0,
            skipped,
        });
    }
    let matrices = members
        .iter()
        .map(|(space, col)| {
            let ids: Vec<usize> = rows
                .iter()
                .map(|&r| space.index_of(&dict.tuples()[r][*col]).expect("filtered"))
                .collect();
            space.matrix().select_rows(ids.iter())
        })
        .collect();
    Ok(Gathered { matrices, rows })
}
