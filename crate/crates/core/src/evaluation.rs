//! Intrinsic and downstream scoring of aligned spaces: dictionary induction
//! P@k, word-similarity correlations and hypernym discovery MRR/MAP/P@5.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DVector, DVectorView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::alignment::LinearMap;
use crate::dictionaries::TranslationDictionary;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::meemi::least_squares_map;

/// Default cut-off for hypernym retrieval and for gold hypernym lists.
pub const HYPERNYM_K: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DictInduction,
    WordSimilarity,
    Hypernym,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub evaluated: usize,
    pub skipped_oov: usize,
}

/// Run metadata kept apart from the results so reports can be compared
/// byte for byte across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub generated_at_unix: u64,
}

impl ReportMetadata {
    pub fn now() -> Self {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            generated_at_unix: secs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub metrics: BTreeMap<String, f64>,
    pub coverage: Coverage,
    pub config: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ReportMetadata>,
}

impl EvalReport {
    fn new(task: Task, coverage: Coverage) -> Self {
        EvalReport {
            task,
            metrics: BTreeMap::new(),
            coverage,
            config: Map::new(),
            metadata: None,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    /// Adds a config entry (dataset names, seeds, ...).
    pub fn with_config(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.config.insert(key.to_owned(), value.into());
        self
    }

    pub fn with_metadata(mut self, metadata: ReportMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without the metadata block; stable for identical inputs.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.metadata = None;
        copy.to_json()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let task = serde_json::to_value(self.task).expect("task serializes");
        let _ = writeln!(out, "task: {}", task.as_str().unwrap_or_default());
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "  {name:<14} {value:.4}");
        }
        let _ = writeln!(
            out,
            "coverage: {} evaluated, {} skipped (OOV)",
            self.coverage.evaluated, self.coverage.skipped_oov
        );
        out
    }
}

/// A retrieved word with its cosine score.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub index: usize,
    pub score: f64,
}

/// Exhaustive cosine search over the rows of one space.
pub struct CosineIndex<'a> {
    space: &'a EmbeddingSpace,
    inv_norms: Vec<f64>,
}

impl<'a> CosineIndex<'a> {
    pub fn new(space: &'a EmbeddingSpace) -> Self {
        let inv_norms = space
            .matrix()
            .row_iter()
            .map(|r| {
                let n = r.norm();
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            })
            .collect();
        CosineIndex { space, inv_norms }
    }

    /// Cosine of `query` against every row; zero rows score 0.
    pub fn scores(&self, query: &[f64]) -> Result<Vec<f64>> {
        let d = self.space.dim();
        if query.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: query.len(),
            });
        }
        let q = DVectorView::from_slice(query, d);
        let qn = q.norm();
        if qn == 0.0 || !qn.is_finite() {
            return Err(Error::Degenerate("cosine is undefined for a zero query vector".into()));
        }
        let dots: DVector<f64> = self.space.matrix() * q;
        Ok(dots
            .iter()
            .zip(&self.inv_norms)
            .map(|(dot, inv)| dot * inv / qn)
            .collect())
    }

    /// Top `k` rows by cosine, descending, ties broken by row index.
    /// Rows for which `exclude` returns true are never returned.
    pub fn top_k(
        &self,
        query: &[f64],
        k: usize,
        exclude: impl Fn(usize) -> bool,
    ) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        let scores = self.scores(query)?;
        let mut ranked: Vec<(f64, usize)> = scores
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !exclude(*i))
            .map(|(i, s)| (s, i))
            .collect();
        let by_rank = |x: &(f64, usize), y: &(f64, usize)| -> Ordering {
            y.0.total_cmp(&x.0).then(x.1.cmp(&y.1))
        };
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, by_rank);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(by_rank);
        Ok(ranked
            .into_iter()
            .map(|(score, index)| Neighbor {
                word: self.space.words()[index].clone(),
                index,
                score,
            })
            .collect())
    }
}

/// Exact top-`k` cosine neighbours of `query` in `space`.
pub fn knn(
    query: &[f64],
    space: &EmbeddingSpace,
    k: usize,
    exclude: Option<&HashSet<String>>,
) -> Result<Vec<Neighbor>> {
    if space.is_empty() {
        return Err(Error::Invalid("cannot search an empty space".into()));
    }
    let index = CosineIndex::new(space);
    let excluded: HashSet<usize> = exclude
        .map(|set| set.iter().filter_map(|w| space.index_of(w)).collect())
        .unwrap_or_default();
    index.top_k(query, k, |i| excluded.contains(&i))
}

/// Share of queries whose first correct answer sits at rank `≤ k`.
pub fn precision_at_k(first_hits: &[Option<usize>], k: usize) -> f64 {
    if first_hits.is_empty() {
        return 0.0;
    }
    let hits = first_hits.iter().filter(|r| matches!(r, Some(r) if *r <= k)).count();
    hits as f64 / first_hits.len() as f64
}

/// Bilingual dictionary induction: for every source word, is any of its
/// gold translations among the `k` nearest target words?
///
/// Test pairs are grouped by source word, so a word with several gold
/// translations counts once. Gold targets missing from the target space stay
/// in the gold set and simply never match.
pub fn eval_dict_induction(
    test: &TranslationDictionary,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    ks: &[usize],
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Invalid("k values must be positive".into()));
    }
    let src_col = test.column(src.lang())?;
    let tgt_col = test.column(tgt.lang())?;

    let mut order: Vec<&str> = Vec::new();
    let mut golds: HashMap<&str, HashSet<&str>> = HashMap::new();
    for t in test.tuples() {
        let s = t[src_col].as_str();
        golds
            .entry(s)
            .or_insert_with(|| {
                order.push(s);
                HashSet::new()
            })
            .insert(t[tgt_col].as_str());
    }
    let (queries, skipped): (Vec<&str>, Vec<&str>) =
        order.into_iter().partition(|w| src.contains(w));
    if queries.is_empty() {
        return Err(Error::InsufficientData {
            what: "dictionary induction source words".into(),
            evaluated: 0,
            skipped: skipped.len(),
        });
    }

    let max_k = *ks.iter().max().expect("non-empty");
    let index = CosineIndex::new(tgt);
    let first_hits: Vec<Option<usize>> = queries
        .par_iter()
        .map(|w| {
            let i = src.index_of(w).expect("filtered");
            let row = src.matrix().row(i).transpose();
            let gold = &golds[w];
            let found = index.top_k(row.as_slice(), max_k, |_| false)?;
            Ok(found.iter().position(|n| gold.contains(n.word.as_str())).map(|p| p + 1))
        })
        .collect::<Result<_>>()?;

    let mut report = EvalReport::new(
        Task::DictInduction,
        Coverage {
            evaluated: queries.len(),
            skipped_oov: skipped.len(),
        },
    );
    let mut sorted_ks = ks.to_vec();
    sorted_ks.sort_unstable();
    sorted_ks.dedup();
    for &k in &sorted_ks {
        report.metrics.insert(format!("P@{k}"), precision_at_k(&first_hits, k));
    }
    debug_assert!(sorted_ks
        .windows(2)
        .all(|w| report.metrics[&format!("P@{}", w[0])] <= report.metrics[&format!("P@{}", w[1])]));
    report.config.insert("retrieval".into(), json!("cosine"));
    report.config.insert("ks".into(), json!(sorted_ks));
    report.config.insert("src_lang".into(), json!(src.lang()));
    report.config.insert("tgt_lang".into(), json!(tgt.lang()));
    Ok(report)
}

/// One word pair of a similarity benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityItem {
    pub word_a: String,
    pub word_b: String,
    pub gold: f64,
}

/// Reads `word_a<TAB>word_b<TAB>score` lines; `#` starts a comment line.
pub fn read_similarity_dataset<R: BufRead>(reader: R, origin: &str) -> Result<Vec<SimilarityItem>> {
    let mut items = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [a, b, score] = fields.as_slice() else {
            return Err(Error::parse(origin, n + 1, "expected `word_a<TAB>word_b<TAB>score`"));
        };
        let gold: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(origin, n + 1, format!("bad score `{score}`")))?;
        items.push(SimilarityItem {
            word_a: a.trim().to_owned(),
            word_b: b.trim().to_owned(),
            gold,
        });
    }
    Ok(items)
}

pub fn load_similarity_dataset(path: impl AsRef<Path>) -> Result<Vec<SimilarityItem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_similarity_dataset(BufReader::new(file), &path.display().to_string())
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Invalid("correlation series differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Degenerate("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("a correlation series has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| dot / (na * nb))
}

/// Correlates cosine similarities with gold scores. `word_a` is looked up
/// in `space_a` and `word_b` in `space_b`; pass the same space twice for a
/// monolingual benchmark.
pub fn eval_word_similarity(
    dataset: &[SimilarityItem],
    space_a: &EmbeddingSpace,
    space_b: &EmbeddingSpace,
) -> Result<EvalReport> {
    let mut gold = Vec::with_capacity(dataset.len());
    let mut predicted = Vec::with_capacity(dataset.len());
    for item in dataset {
        let (Some(a), Some(b)) = (space_a.vector(&item.word_a), space_b.vector(&item.word_b)) else {
            continue;
        };
        if let Some(c) = cosine(a.as_slice(), b.as_slice()) {
            gold.push(item.gold);
            predicted.push(c);
        }
    }
    let coverage = Coverage {
        evaluated: gold.len(),
        skipped_oov: dataset.len() - gold.len(),
    };
    if gold.len() < 2 {
        return Err(Error::InsufficientData {
            what: "word similarity pairs".into(),
            evaluated: coverage.evaluated,
            skipped: coverage.skipped_oov,
        });
    }
    let mut report = EvalReport::new(Task::WordSimilarity, coverage);
    report.metrics.insert("pearson_r".into(), pearson(&predicted, &gold)?);
    report.metrics.insert("spearman_rho".into(), spearman(&predicted, &gold)?);
    report.config.insert("similarity".into(), json!("cosine"));
    report.config.insert("lang_a".into(), json!(space_a.lang()));
    report.config.insert("lang_b".into(), json!(space_b.lang()));
    Ok(report)
}

/// A term with its gold hypernyms, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct HypernymQuery {
    pub term: String,
    pub gold: Vec<String>,
}

/// Reads `term<TAB>hypernym1<TAB>hypernym2...` lines.
pub fn read_hypernym_data<R: BufRead>(reader: R, origin: &str) -> Result<Vec<HypernymQuery>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t').map(str::trim).filter(|f| !f.is_empty());
        let term = fields.next().unwrap_or_default().to_owned();
        let gold: Vec<String> = fields.map(str::to_owned).collect();
        if gold.is_empty() {
            return Err(Error::parse(origin, n + 1, format!("`{term}` has no hypernyms")));
        }
        out.push(HypernymQuery { term, gold });
    }
    Ok(out)
}

pub fn load_hypernym_data(path: impl AsRef<Path>) -> Result<Vec<HypernymQuery>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_hypernym_data(BufReader::new(file), &path.display().to_string())
}

/// Expands queries into `(hyponym, hypernym)` training pairs.
pub fn hypernym_pairs(queries: &[HypernymQuery]) -> Vec<(String, String)> {
    queries
        .iter()
        .flat_map(|q| q.gold.iter().map(move |h| (q.term.clone(), h.clone())))
        .collect()
}

/// Training pairs together with the space their vectors come from.
#[derive(Clone, Copy, Debug)]
pub struct HypernymTrainingSet<'a> {
    pub pairs: &'a [(String, String)],
    pub space: &'a EmbeddingSpace,
}

#[derive(Clone, Debug)]
pub struct HypernymModel {
    pub map: LinearMap,
    pub pairs_used: usize,
    pub skipped_oov: usize,
}

/// Least-squares map from hyponym vectors to hypernym vectors. Several
/// training sets (e.g. one per language of a shared space) contribute their
/// rows to one regression.
pub fn train_hypernym_map(sets: &[HypernymTrainingSet<'_>], ridge: f64) -> Result<HypernymModel> {
    let mut hypo = Vec::new();
    let mut hyper = Vec::new();
    let mut skipped = 0;
    let mut dim = None;
    for set in sets {
        let d = *dim.get_or_insert(set.space.dim());
        if set.space.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: set.space.dim(),
            });
        }
        for (a, b) in set.pairs {
            match (set.space.vector(a), set.space.vector(b)) {
                (Some(x), Some(y)) => {
                    hypo.extend(x.iter().copied());
                    hyper.extend(y.iter().copied());
                }
                _ => skipped += 1,
            }
        }
    }
    let d = dim.unwrap_or(0);
    let used = hypo.len().checked_div(d).unwrap_or(0);
    if used == 0 {
        return Err(Error::InsufficientData {
            what: "hyponym-hypernym training pairs".into(),
            evaluated: 0,
            skipped,
        });
    }
    let a = nalgebra::DMatrix::from_row_slice(used, d, &hypo);
    let t = nalgebra::DMatrix::from_row_slice(used, d, &hyper);
    Ok(HypernymModel {
        map: least_squares_map(&a, &t, ridge)?,
        pairs_used: used,
        skipped_oov: skipped,
    })
}

/// `1/rank` of the first hit, or 0 without hits. Positions are 1-based.
pub fn reciprocal_rank(hit_positions: &[usize]) -> f64 {
    hit_positions.iter().min().map_or(0.0, |&r| 1.0 / r as f64)
}

/// Mean over queries of `1/rank_i`.
pub fn mean_reciprocal_rank(first_ranks: &[usize]) -> f64 {
    if first_ranks.is_empty() {
        return 0.0;
    }
    first_ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / first_ranks.len() as f64
}

/// Mean of `P@K_j` over the 1-based positions `K_j` of the gold hits.
pub fn average_precision(hit_positions: &[usize]) -> f64 {
    if hit_positions.is_empty() {
        return 0.0;
    }
    let mut sorted = hit_positions.to_vec();
    sorted.sort_unstable();
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, &pos)| (j + 1) as f64 / pos as f64)
        .sum();
    total / sorted.len() as f64
}

/// Hits within the first `cutoff` positions divided by `min(cutoff, |gold|)`.
pub fn precision_at_cutoff(hit_positions: &[usize], cutoff: usize, gold_len: usize) -> f64 {
    let denom = cutoff.min(gold_len);
    if denom == 0 {
        return 0.0;
    }
    hit_positions.iter().filter(|&&p| p <= cutoff).count() as f64 / denom as f64
}

/// Scores hypernym retrieval: each term vector is mapped with `map`, and
/// candidates (the term itself excluded) are ranked by cosine. Gold lists
/// are capped at their first [`HYPERNYM_K`] distinct entries.
pub fn eval_hypernym(
    test: &[HypernymQuery],
    map: &LinearMap,
    query_space: &EmbeddingSpace,
    candidate_space: &EmbeddingSpace,
    k: usize,
) -> Result<EvalReport> {
    if candidate_space.is_empty() {
        return Err(Error::Invalid("candidate space is empty".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if map.dim() != query_space.dim() || map.dim() != candidate_space.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: query_space.dim(),
        });
    }
    let index = CosineIndex::new(candidate_space);
    let per_query: Vec<Option<(f64, f64, f64)>> = test
        .par_iter()
        .map(|q| {
            let Some(v) = query_space.vector(&q.term) else {
                return Ok(None);
            };
            let projected = v * map.matrix();
            let own = candidate_space.index_of(&q.term);
            let found = match index.top_k(projected.as_slice(), k, |i| Some(i) == own) {
                Ok(found) => found,
                Err(Error::Degenerate(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut seen = HashSet::new();
            let gold: HashSet<&str> = q
                .gold
                .iter()
                .map(String::as_str)
                .filter(|g| seen.insert(*g))
                .take(HYPERNYM_K)
                .collect();
            let hits: Vec<usize> = found
                .iter()
                .enumerate()
                .filter(|(_, n)| gold.contains(n.word.as_str()))
                .map(|(p, _)| p + 1)
                .collect();
            Ok(Some((
                reciprocal_rank(&hits),
                average_precision(&hits),
                precision_at_cutoff(&hits, 5, gold.len()),
            )))
        })
        .collect::<Result<_>>()?;

    let scored: Vec<(f64, f64, f64)> = per_query.iter().flatten().copied().collect();
    let coverage = Coverage {
        evaluated: scored.len(),
        skipped_oov: test.len() - scored.len(),
    };
    if scored.is_empty() {
        return Err(Error::InsufficientData {
            what: "hypernym test terms".into(),
            evaluated: 0,
            skipped: coverage.skipped_oov,
        });
    }
    let n = scored.len() as f64;
    let mut report = EvalReport::new(Task::Hypernym, coverage);
    report.metrics.insert("MRR".into(), scored.iter().map(|s| s.0).sum::<f64>() / n);
    report.metrics.insert("MAP".into(), scored.iter().map(|s| s.1).sum::<f64>() / n);
    report.metrics.insert("P@5".into(), scored.iter().map(|s| s.2).sum::<f64>() / n);
    report.config.insert("retrieval".into(), json!("cosine"));
    report.config.insert("k".into(), json!(k));
    report.config.insert("gold_cap".into(), json!(HYPERNYM_K));
    report.config.insert("query_lang".into(), json!(query_space.lang()));
    report.config.insert("candidate_lang".into(), json!(candidate_space.lang()));
    Ok(report)
}
