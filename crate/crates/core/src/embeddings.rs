//! Monolingual embedding spaces: word2vec text I/O, normalization and
//! word-frequency tables.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};

/// One preprocessing step applied to every row of a space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormStep {
    /// Scale each row to unit Euclidean length.
    Unit,
    /// Subtract the column-wise mean.
    Center,
}

/// Recipe applied before orthogonal alignment: unit, center, unit.
pub const DEFAULT_RECIPE: [NormStep; 3] = [NormStep::Unit, NormStep::Center, NormStep::Unit];

impl fmt::Display for NormStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormStep::Unit => f.write_str("unit"),
            NormStep::Center => f.write_str("center"),
        }
    }
}

impl FromStr for NormStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unit" => Ok(NormStep::Unit),
            "center" => Ok(NormStep::Center),
            other => Err(Error::Invalid(format!(
                "unknown normalization step `{other}` (expected `unit` or `center`)"
            ))),
        }
    }
}

/// Parses a comma-separated recipe such as `unit,center,unit`. The literal
/// `none` (or an empty string) yields no steps.
pub fn parse_recipe(s: &str) -> Result<Vec<NormStep>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

/// A vocabulary-indexed matrix of word vectors for one language.
///
/// Row `i` of the matrix is the vector of `words[i]`. Spaces are immutable:
/// every transformation returns a new value.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    lang: String,
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: DMatrix<f64>,
    frequencies: Option<Vec<u64>>,
    norm_state: Vec<NormStep>,
}

impl EmbeddingSpace {
    /// Builds a space, rejecting duplicate tokens, a row count that differs
    /// from the vocabulary size, and non-finite entries.
    pub fn new(lang: impl Into<String>, words: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != words.len() {
            return Err(Error::Invalid(format!(
                "matrix has {} rows but vocabulary has {} words",
                matrix.nrows(),
                words.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::Invalid(format!("empty token at row {i}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate token `{w}`")));
            }
        }
        if let Some(i) = first_non_finite_row(&matrix) {
            return Err(Error::Numeric(format!(
                "non-finite value in the vector of `{}`",
                words[i]
            )));
        }
        Ok(EmbeddingSpace {
            lang: lang.into(),
            words,
            index,
            matrix,
            frequencies: None,
            norm_state: Vec::new(),
        })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dimensionality of the vectors.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Copy of the vector for `word`, if it is in the vocabulary.
    pub fn vector(&self, word: &str) -> Option<RowDVector<f64>> {
        self.index_of(word).map(|i| self.matrix.row(i).into_owned())
    }

    pub fn frequencies(&self) -> Option<&[u64]> {
        self.frequencies.as_deref()
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        let i = self.index_of(word)?;
        self.frequencies.as_ref().map(|f| f[i])
    }

    /// Normalization steps applied so far, in order.
    pub fn norm_state(&self) -> &[NormStep] {
        &self.norm_state
    }

    /// Returns the same space relabelled with another language code.
    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    /// Attaches a frequency table aligned with `words`.
    pub fn with_frequencies(mut self, frequencies: Vec<u64>) -> Result<Self> {
        if frequencies.len() != self.words.len() {
            return Err(Error::Invalid(format!(
                "frequency table covers {} words, vocabulary has {}",
                frequencies.len(),
                self.words.len()
            )));
        }
        self.frequencies = Some(frequencies);
        Ok(self)
    }

    /// Same vocabulary and frequencies, new vectors. The normalization
    /// history is cleared since an arbitrary transform invalidates it.
    pub(crate) fn with_matrix(&self, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: matrix.nrows(),
            });
        }
        if let Some(i) = first_non_finite_row(&matrix) {
            return Err(Error::Numeric(format!(
                "transform produced a non-finite vector for `{}`",
                self.words[i]
            )));
        }
        Ok(EmbeddingSpace {
            lang: self.lang.clone(),
            words: self.words.clone(),
            index: self.index.clone(),
            matrix,
            frequencies: self.frequencies.clone(),
            norm_state: Vec::new(),
        })
    }

    /// Applies `steps` in order and returns the normalized copy.
    pub fn normalize(&self, steps: &[NormStep]) -> Result<Self> {
        let mut matrix = self.matrix.clone();
        for step in steps {
            match step {
                NormStep::Unit => {
                    for (i, mut row) in matrix.row_iter_mut().enumerate() {
                        let norm = row.norm();
                        if norm == 0.0 {
                            return Err(Error::Degenerate(format!(
                                "zero vector for `{}` cannot be unit-normalized",
                                self.words[i]
                            )));
                        }
                        row /= norm;
                    }
                }
                NormStep::Center => {
                    if matrix.nrows() > 0 {
                        let mean = matrix.row_mean();
                        for mut row in matrix.row_iter_mut() {
                            row -= &mean;
                        }
                    }
                }
            }
        }
        let mut out = self.with_matrix(matrix)?;
        out.norm_state = self.norm_state.clone();
        out.norm_state.extend_from_slice(steps);
        Ok(out)
    }
}

fn first_non_finite_row(matrix: &DMatrix<f64>) -> Option<usize> {
    matrix
        .row_iter()
        .position(|row| row.iter().any(|v| !v.is_finite()))
}

/// Options for reading word2vec text files.
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Keep only the first `limit` entries of the file.
    pub limit: Option<usize>,
    /// Lowercase tokens; later duplicates are dropped.
    pub lowercase: bool,
}

/// Reads a word2vec text stream: a `V D` header followed by `V` lines of
/// `token v1 ... vD`.
///
/// When lowercasing makes two tokens collide, the first occurrence wins.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    lang: &str,
    options: LoadOptions,
    origin: &str,
) -> Result<EmbeddingSpace> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, Ok(line))) if line.trim().is_empty() => continue,
            Some((n, Ok(line))) => break (n + 1, line),
            Some((n, Err(e))) => return Err(Error::parse(origin, n + 1, e.to_string())),
            None => return Err(Error::parse(origin, 1, "missing `V D` header")),
        }
    };
    let (vocab_size, dim) = parse_header(&header.1).ok_or_else(|| {
        Error::parse(origin, header.0, format!("malformed header `{}`", header.1.trim()))
    })?;

    let wanted = options.limit.map_or(vocab_size, |l| l.min(vocab_size));
    let mut words = Vec::with_capacity(wanted);
    let mut seen = HashMap::with_capacity(wanted);
    let mut data = Vec::with_capacity(wanted * dim);
    let mut read = 0;

    for (n, line) in lines {
        if read == wanted {
            break;
        }
        let line_no = n + 1;
        let line = line.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        let start = data.len();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(origin, line_no, format!("cannot parse `{field}` as a number"))
            })?;
            if !value.is_finite() {
                return Err(Error::parse(origin, line_no, format!("non-finite value `{field}`")));
            }
            data.push(value);
        }
        let found = data.len() - start;
        if found != dim {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {dim} components for `{token}`, found {found}"),
            ));
        }
        read += 1;

        let token = if options.lowercase {
            token.to_lowercase()
        } else {
            token.to_owned()
        };
        if seen.contains_key(&token) {
            data.truncate(start);
            continue;
        }
        seen.insert(token.clone(), words.len());
        words.push(token);
    }

    if read < wanted {
        return Err(Error::parse(
            origin,
            header.0,
            format!("header declares {vocab_size} vectors, file holds {read}"),
        ));
    }
    if words.is_empty() {
        return Err(Error::Invalid(format!("{origin}: empty vocabulary")));
    }
    let matrix = DMatrix::from_row_slice(words.len(), dim, &data);
    EmbeddingSpace::new(lang, words, matrix)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let v = it.next()?.parse().ok()?;
    let d = it.next()?.parse().ok()?;
    if it.next().is_some() || d == 0 {
        return None;
    }
    Some((v, d))
}

/// Loads a word2vec text file from disk.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    lang: &str,
    options: LoadOptions,
) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), lang, options, &path.display().to_string())
}

/// Writes `space` in word2vec text format with six decimal digits.
pub fn write_embeddings<W: Write>(space: &EmbeddingSpace, mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "{} {}", space.len(), space.dim())?;
    for (word, row) in space.words.iter().zip(space.matrix.row_iter()) {
        write!(writer, "{word}")?;
        for v in row.iter() {
            write!(writer, " {v:.6}")?;
        }
        writeln!(writer)?;
    }
    writer.flush()
}

pub fn save_embeddings(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if space.dim() == 0 {
        return Err(Error::Invalid("cannot save a space with zero dimensions".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(space, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Attaches counts read from a `word<TAB>count` stream. Words of the space
/// missing from the stream get a count of zero; words of the stream missing
/// from the space are ignored.
pub fn read_frequencies<R: BufRead>(
    space: &EmbeddingSpace,
    reader: R,
    origin: &str,
) -> Result<EmbeddingSpace> {
    let mut counts = vec![0u64; space.len()];
    let mut assigned = vec![false; space.len()];
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (word, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, n + 1, "expected `word<TAB>count`"))?;
        let count = count.trim();
        let count: u64 = count.parse().map_err(|_| {
            Error::parse(
                origin,
                n + 1,
                format!("count `{count}` is not a non-negative integer"),
            )
        })?;
        if let Some(i) = space.index_of(word) {
            if !assigned[i] {
                counts[i] = count;
                assigned[i] = true;
            }
        }
    }
    space.clone().with_frequencies(counts)
}

pub fn load_frequencies(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_frequencies(space, BufReader::new(file), &path.display().to_string())
}
