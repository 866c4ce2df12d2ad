//! Meet-in-the-middle fine-tuning of already aligned spaces.
//!
//! Each space gets its own unconstrained linear map, fitted by least squares
//! so that the vectors of dictionary entries land on the average of their
//! translations: the plain mean for bilingual dictionaries, a
//! frequency-weighted mean as an option, or the centroid of an n-language
//! tuple for the multilingual case.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::alignment::{apply_map, LinearMap, MapFlavor};
use crate::dictionaries::{gather_rows, TranslationDictionary};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares solution of `min Σ‖a_i·M − t_i‖² + ridge·‖M‖²`.
///
/// With `ridge == 0` this is the exact (minimum-norm when `AᵀA` is singular)
/// solution, obtained from the SVD of `A` with singular values below the
/// rank tolerance treated as zero.
pub fn least_squares_map(a: &DMatrix<f64>, t: &DMatrix<f64>, ridge: f64) -> Result<LinearMap> {
    if a.shape() != t.shape() {
        return Err(Error::Invalid(format!(
            "inputs and targets differ in shape: {:?} vs {:?}",
            a.shape(),
            t.shape()
        )));
    }
    let (k, d) = a.shape();
    if k == 0 || d == 0 {
        return Err(Error::Invalid("least squares needs at least one row and one column".into()));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::Invalid(format!("ridge must be finite and non-negative, got {ridge}")));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("least-squares targets contain non-finite values".into()));
    }
    let svd = linalg::svd(a)?;
    let tol = linalg::rank_tolerance(&svd.singular_values, k, d);
    let gains: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| {
            if ridge > 0.0 {
                s / (s * s + ridge)
            } else if s > tol {
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();

    // M = V · diag(gains) · Uᵀ · T
    let mut projected = svd.u.transpose() * t;
    for (mut row, g) in projected.row_iter_mut().zip(&gains) {
        row *= *g;
    }
    let m = svd.v_t.transpose() * projected;
    Ok(LinearMap::new(m, MapFlavor::Unconstrained)?.with_trained_on(k))
}

/// How raw occurrence counts enter the weighted average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrequencyScale {
    /// Use counts as they are.
    #[default]
    Raw,
    /// Divide each count by its space's total and multiply by 10⁶.
    PerMillion,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MeemiOptions {
    /// Use frequency-weighted averages as targets (bilingual only).
    pub weighted: bool,
    pub frequency_scale: FrequencyScale,
    /// Ridge penalty for the regressions; 0 gives plain least squares.
    pub ridge: f64,
}

#[derive(Clone, Debug)]
pub struct MeemiBilingual {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    pub src_map: LinearMap,
    pub tgt_map: LinearMap,
    pub pairs_used: usize,
    pub skipped_oov: usize,
}

fn scaled_frequencies(space: &EmbeddingSpace, scale: FrequencyScale) -> Result<Vec<f64>> {
    let raw = space.frequencies().ok_or_else(|| {
        Error::Invalid(format!(
            "weighted fine-tuning needs word frequencies for `{}`",
            space.lang()
        ))
    })?;
    Ok(match scale {
        FrequencyScale::Raw => raw.iter().map(|&c| c as f64).collect(),
        FrequencyScale::PerMillion => {
            let total: f64 = raw.iter().map(|&c| c as f64).sum();
            if total == 0.0 {
                vec![0.0; raw.len()]
            } else {
                raw.iter().map(|&c| c as f64 / total * 1e6).collect()
            }
        }
    })
}

/// Targets `(f_w·w + f_v·v) / (f_w + f_v)` per row, falling back to the
/// plain average when both counts are zero.
pub fn weighted_targets(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    fa: &[f64],
    fb: &[f64],
) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let (wa, wb) = (fa[i], fb[i]);
        let total = wa + wb;
        let mut row = t.row_mut(i);
        if total == 0.0 {
            row.copy_from(&((a.row(i) + b.row(i)) / 2.0));
        } else {
            row.copy_from(&((a.row(i) * wa + b.row(i) * wb) / total));
        }
    }
    t
}

fn centroid(members: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (k, d) = members[0].shape();
    let sum = members.iter().fold(DMatrix::zeros(k, d), |acc, m| acc + m);
    sum / members.len() as f64
}

/// Fine-tunes two aligned spaces towards the midpoints of their dictionary
/// pairs. The two maps are fitted independently.
pub fn meemi_bilingual(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &TranslationDictionary,
    options: &MeemiOptions,
) -> Result<MeemiBilingual> {
    let src_col = dict.column(src.lang())?;
    let tgt_col = dict.column(tgt.lang())?;
    let gathered = gather_rows(dict, &[(src, src_col), (tgt, tgt_col)])?;
    let (a, b) = (&gathered.matrices[0], &gathered.matrices[1]);

    let targets = if options.weighted {
        let fs = scaled_frequencies(src, options.frequency_scale)?;
        let ft = scaled_frequencies(tgt, options.frequency_scale)?;
        let word = |space: &EmbeddingSpace, col: usize, r: usize| {
            space.index_of(&dict.tuples()[r][col]).expect("in vocabulary")
        };
        let fa: Vec<f64> = gathered.rows.iter().map(|&r| fs[word(src, src_col, r)]).collect();
        let fb: Vec<f64> = gathered.rows.iter().map(|&r| ft[word(tgt, tgt_col, r)]).collect();
        weighted_targets(a, b, &fa, &fb)
    } else {
        centroid(&gathered.matrices)
    };

    let shared = format!("{}+{}", src.lang(), tgt.lang());
    let (src_map, tgt_map) = rayon::join(
        || least_squares_map(a, &targets, options.ridge),
        || least_squares_map(b, &targets, options.ridge),
    );
    let src_map = src_map?.with_langs(src.lang(), shared.clone());
    let tgt_map = tgt_map?.with_langs(tgt.lang(), shared);

    Ok(MeemiBilingual {
        src: apply_map(src, &src_map)?,
        tgt: apply_map(tgt, &tgt_map)?,
        src_map,
        tgt_map,
        pairs_used: gathered.rows.len(),
        skipped_oov: dict.len() - gathered.rows.len(),
    })
}

/// Spaces for several languages living in one coordinate system, anchored
/// on a hub language.
#[derive(Clone, Debug)]
pub struct MultiSpace {
    hub: String,
    spaces: BTreeMap<String, EmbeddingSpace>,
}

impl MultiSpace {
    pub fn new(hub: impl Into<String>, spaces: Vec<EmbeddingSpace>) -> Result<Self> {
        let hub = hub.into();
        if spaces.len() < 2 {
            return Err(Error::Invalid(format!(
                "a multilingual space needs at least two languages, got {}",
                spaces.len()
            )));
        }
        let dim = spaces[0].dim();
        let mut map = BTreeMap::new();
        for s in spaces {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            let lang = s.lang().to_owned();
            if map.insert(lang.clone(), s).is_some() {
                return Err(Error::Invalid(format!("language `{lang}` given twice")));
            }
        }
        if !map.contains_key(&hub) {
            return Err(Error::Invalid(format!("hub language `{hub}` has no space")));
        }
        Ok(MultiSpace { hub, spaces: map })
    }

    pub fn hub(&self) -> &str {
        &self.hub
    }

    pub fn get(&self, lang: &str) -> Option<&EmbeddingSpace> {
        self.spaces.get(lang)
    }

    pub fn langs(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(String::as_str)
    }

    pub fn spaces(&self) -> impl Iterator<Item = &EmbeddingSpace> {
        self.spaces.values()
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spaces[&self.hub].dim()
    }

    pub fn into_spaces(self) -> BTreeMap<String, EmbeddingSpace> {
        self.spaces
    }
}

#[derive(Clone, Debug)]
pub struct MeemiMultilingual {
    pub space: MultiSpace,
    pub maps: BTreeMap<String, LinearMap>,
    pub tuples_used: usize,
    pub skipped_oov: usize,
}

/// Fits one map per language (hub included) sending each member of a tuple
/// to the tuple's centroid, then re-maps every space.
pub fn meemi_multilingual(
    ms: &MultiSpace,
    dict: &TranslationDictionary,
    ridge: f64,
) -> Result<MeemiMultilingual> {
    if dict.arity() != ms.len() {
        return Err(Error::Invalid(format!(
            "dictionary has {} languages, multilingual space has {}",
            dict.arity(),
            ms.len()
        )));
    }
    let members: Vec<(&EmbeddingSpace, usize)> = dict
        .langs()
        .iter()
        .enumerate()
        .map(|(col, lang)| {
            ms.get(lang).map(|s| (s, col)).ok_or_else(|| {
                Error::Invalid(format!("dictionary language `{lang}` has no space"))
            })
        })
        .collect::<Result<_>>()?;
    let gathered = gather_rows(dict, &members)?;
    let targets = centroid(&gathered.matrices);
    let shared = dict.langs().join("+");

    let fitted: Vec<(EmbeddingSpace, LinearMap)> = members
        .par_iter()
        .zip(gathered.matrices.par_iter())
        .map(|((space, _), rows)| {
            let map = least_squares_map(rows, &targets, ridge)?.with_langs(space.lang(), &*shared);
            Ok((apply_map(space, &map)?, map))
        })
        .collect::<Result<_>>()?;

    let mut maps = BTreeMap::new();
    let mut spaces = Vec::with_capacity(fitted.len());
    for (space, map) in fitted {
        maps.insert(space.lang().to_owned(), map);
        spaces.push(space);
    }
    Ok(MeemiMultilingual {
        space: MultiSpace::new(ms.hub(), spaces)?,
        maps,
        tuples_used: gathered.rows.len(),
        skipped_oov: dict.len() - gathered.rows.len(),
    })
}
