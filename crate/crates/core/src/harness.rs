//! Seeded synthetic benchmarks and dictionary-size ablations.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::align_bilingual;
use crate::dictionaries::{subsample, TranslationDictionary};
use crate::embeddings::{EmbeddingSpace, NormStep, DEFAULT_RECIPE};
use crate::error::{Error, Result};
use crate::evaluation::{eval_dict_induction, EvalReport};
use crate::meemi::{meemi_bilingual, MeemiOptions};

pub const SYNTH_SRC_LANG: &str = "src";
pub const SYNTH_TGT_LANG: &str = "tgt";

/// How the target space departs from the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distortion {
    /// `tgt = src·R`
    Orthogonal,
    /// `tgt = src·R·S` with `S` diagonal, entries in `[0.5, 2.0]`.
    DiagScaling,
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distortion::Orthogonal => f.write_str("orthogonal"),
            Distortion::DiagScaling => f.write_str("diag-scaling"),
        }
    }
}

impl FromStr for Distortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Distortion::Orthogonal),
            "diag-scaling" | "orthogonal+diag-scaling" => Ok(Distortion::DiagScaling),
            other => Err(Error::Invalid(format!(
                "unknown distortion `{other}` (expected `orthogonal` or `diag-scaling`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub distortion: Distortion,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.vocab_size < self.dim {
            return Err(Error::Invalid(format!(
                "synthetic spaces need vocab_size >= dim >= 2, got vocab_size={} dim={}",
                self.vocab_size, self.dim
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Invalid(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Source space, distorted target space and the identity gold dictionary.
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    pub gold: TranslationDictionary,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with the signs of `R`'s diagonal folded into `Q`.
fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, d, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Word `i` of a synthetic vocabulary; both languages share tokens.
pub fn synth_word(i: usize) -> String {
    format!("w{i}")
}

pub fn generate_pair(config: &SynthConfig) -> Result<SyntheticPair> {
    config.validate()?;
    let (n, d) = (config.vocab_size, config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let words: Vec<String> = (0..n).map(synth_word).collect();
    let src = EmbeddingSpace::new(SYNTH_SRC_LANG, words.clone(), gaussian(&mut rng, n, d))?
        .normalize(&[NormStep::Unit])?;

    let mut transform = random_orthogonal(&mut rng, d);
    if config.distortion == Distortion::DiagScaling {
        let scale = Uniform::new_inclusive(0.5, 2.0).expect("valid range");
        let diag = DVector::from_fn(d, |_, _| rng.sample(scale));
        transform *= DMatrix::from_diagonal(&diag);
    }
    let mut tgt = src.matrix() * transform;
    if config.noise_sigma > 0.0 {
        tgt += gaussian(&mut rng, n, d) * config.noise_sigma;
    }
    let tgt = EmbeddingSpace::new(SYNTH_TGT_LANG, words.clone(), tgt)?.normalize(&[NormStep::Unit])?;

    let gold = TranslationDictionary::new(
        vec![SYNTH_SRC_LANG.into(), SYNTH_TGT_LANG.into()],
        words.iter().map(|w| vec![w.clone(), w.clone()]).collect(),
    )?;
    Ok(SyntheticPair { src, tgt, gold })
}

/// Seeded split into `(train, test)`; the test part holds
/// `round(len · test_fraction)` tuples. Both keep dictionary order.
pub fn split_dictionary(
    dict: &TranslationDictionary,
    test_fraction: f64,
    seed: u64,
) -> Result<(TranslationDictionary, TranslationDictionary)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Invalid(format!("test fraction {test_fraction} not in [0, 1)")));
    }
    let n_test = (dict.len() as f64 * test_fraction).round() as usize;
    let test = subsample(dict, n_test, seed)?;
    let test_set: std::collections::HashSet<&Vec<String>> = test.tuples().iter().collect();
    let train_idx: Vec<usize> = (0..dict.len())
        .filter(|&i| !test_set.contains(&dict.tuples()[i]))
        .collect();
    Ok((dict.select(&train_idx), test))
}

/// Mean cosine between row `i` of `a` and row `i` of `b`.
pub fn mean_pair_cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let total: f64 = a
        .row_iter()
        .zip(b.row_iter())
        .map(|(x, y)| x.dot(&y) / (x.norm() * y.norm()))
        .sum();
    total / a.nrows() as f64
}

/// Mean Euclidean distance between matching rows.
pub fn mean_pair_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let total: f64 = a.row_iter().zip(b.row_iter()).map(|(x, y)| (x - y).norm()).sum();
    total / a.nrows() as f64
}

/// Settings shared by the align → fine-tune → evaluate pipeline.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub recipe: Vec<NormStep>,
    pub meemi: MeemiOptions,
    pub ks: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            recipe: DEFAULT_RECIPE.to_vec(),
            meemi: MeemiOptions::default(),
            ks: vec![1, 5, 10],
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    /// Dictionary induction after orthogonal alignment only.
    pub base: EvalReport,
    /// Dictionary induction after fine-tuning.
    pub meemi: EvalReport,
    pub train_pairs: usize,
}

/// Normalizes both spaces, aligns `src` to `tgt` orthogonally, fine-tunes
/// both with Meemi on `train`, and scores dictionary induction on `test`
/// before and after fine-tuning.
pub fn run_pipeline(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    train: &TranslationDictionary,
    test: &TranslationDictionary,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let src = src.normalize(&config.recipe)?;
    let tgt = tgt.normalize(&config.recipe)?;
    let aligned = align_bilingual(&src, &tgt, train)?;
    let base = eval_dict_induction(test, &aligned.aligned_src, &tgt, &config.ks)?;
    let tuned = meemi_bilingual(&aligned.aligned_src, &tgt, train, &config.meemi)?;
    let meemi = eval_dict_induction(test, &tuned.src, &tuned.tgt, &config.ks)?;
    Ok(PipelineOutcome {
        base,
        meemi,
        train_pairs: tuned.pairs_used,
    })
}

#[derive(Clone, Debug)]
pub struct AblationConfig {
    /// Data settings; trial `t` uses seed `synth.seed + t`.
    pub synth: SynthConfig,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub test_fraction: f64,
    pub pipeline: PipelineConfig,
}

impl AblationConfig {
    pub fn new(synth: SynthConfig, sizes: Vec<usize>, trials: usize) -> Self {
        AblationConfig {
            synth,
            sizes,
            trials,
            test_fraction: 0.2,
            pipeline: PipelineConfig {
                ks: vec![1],
                ..PipelineConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub size: usize,
    pub seed: u64,
    pub metric: String,
    pub base: f64,
    pub meemi: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationSummary {
    pub size: usize,
    pub trials: usize,
    pub mean_base: f64,
    pub mean_meemi: f64,
    pub mean_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

const ABLATION_METRIC: &str = "P@1";

impl AblationTable {
    /// Per-size means over trials, in ascending size order.
    pub fn summary(&self) -> Vec<AblationSummary> {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.size).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .into_iter()
            .map(|size| {
                let rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.size == size).collect();
                let n = rows.len() as f64;
                AblationSummary {
                    size,
                    trials: rows.len(),
                    mean_base: rows.iter().map(|r| r.base).sum::<f64>() / n,
                    mean_meemi: rows.iter().map(|r| r.meemi).sum::<f64>() / n,
                    mean_delta: rows.iter().map(|r| r.delta).sum::<f64>() / n,
                }
            })
            .collect()
    }

    pub fn mean_delta(&self, size: usize) -> Option<f64> {
        self.summary().into_iter().find(|s| s.size == size).map(|s| s.mean_delta)
    }

    /// `size,seed,metric,base,meemi,delta` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::Invalid(format!("cannot write ablation CSV: {e}")))?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("cannot write ablation CSV: {e}")))
    }

    pub fn summary_json(&self, config: &AblationConfig) -> serde_json::Value {
        serde_json::json!({
            "metric": ABLATION_METRIC,
            "synth": config.synth,
            "sizes": config.sizes,
            "trials": config.trials,
            "test_fraction": config.test_fraction,
            "summary": self.summary(),
        })
    }
}

/// For every trial seed and dictionary size: generate data, hold out a test
/// split, subsample the training pool, run the pipeline and record the
/// held-out P@1 before and after fine-tuning.
pub fn run_ablation(config: &AblationConfig) -> Result<AblationTable> {
    config.synth.validate()?;
    if config.trials == 0 || config.sizes.is_empty() {
        return Err(Error::Invalid("ablation needs at least one size and one trial".into()));
    }
    let pool = config.synth.vocab_size
        - (config.synth.vocab_size as f64 * config.test_fraction).round() as usize;
    if let Some(&too_big) = config.sizes.iter().find(|&&s| s > pool || s == 0) {
        return Err(Error::Invalid(format!(
            "dictionary size {too_big} not in 1..={pool} (training pool after the held-out split)"
        )));
    }

    let seeds: Vec<u64> = (0..config.trials as u64).map(|t| config.synth.seed + t).collect();
    let per_seed: Vec<Vec<AblationRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let data = generate_pair(&SynthConfig { seed, ..config.synth })?;
            let (pool, test) = split_dictionary(&data.gold, config.test_fraction, seed)?;
            config
                .sizes
                .iter()
                .map(|&size| {
                    let train = subsample(&pool, size, seed)?;
                    let out = run_pipeline(&data.src, &data.tgt, &train, &test, &config.pipeline)?;
                    let base = out.base.metric(ABLATION_METRIC).expect("P@1 computed");
                    let meemi = out.meemi.metric(ABLATION_METRIC).expect("P@1 computed");
                    Ok(AblationRow {
                        size,
                        seed,
                        metric: ABLATION_METRIC.into(),
                        base,
                        meemi,
                        delta: meemi - base,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<AblationRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.size, r.seed));
    Ok(AblationTable { rows })
}
