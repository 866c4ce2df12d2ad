//! Cross-lingual word embedding alignment.
//!
//! Independently trained monolingual spaces are first aligned with an
//! orthogonal Procrustes map, then fine-tuned with unconstrained
//! least-squares maps that pull translation pairs towards their average
//! ("meeting in the middle"). Plain, frequency-weighted and multilingual
//! (hub-anchored centroid) variants are provided, together with the usual
//! intrinsic metrics and a seeded synthetic harness.
//!
//! ```
//! use meemi::harness::{generate_pair, Distortion, SynthConfig};
//! use meemi::{align_bilingual, meemi_bilingual, MeemiOptions};
//!
//! let pair = generate_pair(&SynthConfig {
//!     vocab_size: 200,
//!     dim: 8,
//!     noise_sigma: 0.05,
//!     distortion: Distortion::DiagScaling,
//!     seed: 1,
//! })?;
//! let aligned = align_bilingual(&pair.src, &pair.tgt, &pair.gold)?;
//! let tuned = meemi_bilingual(&aligned.aligned_src, &pair.tgt, &pair.gold, &MeemiOptions::default())?;
//! assert_eq!(tuned.pairs_used, 200);
//! # Ok::<(), meemi::Error>(())
//! ```

pub mod alignment;
pub mod dictionaries;
pub mod embeddings;
mod error;
pub mod evaluation;
pub mod harness;
mod linalg;
pub mod meemi;

pub use alignment::{
    align_bilingual, apply_map, load_map, procrustes, save_map, BilingualAlignment, LinearMap,
    MapFlavor, ProcrustesFit,
};
pub use dictionaries::{
    build_pairs, join_on_pivot, load_dictionary, save_dictionary, subsample, PairedMatrices, TranslationDictionary,
};
pub use embeddings::{
    load_embeddings, load_frequencies, save_embeddings, EmbeddingSpace, LoadOptions, NormStep,
    DEFAULT_RECIPE,
};
pub use error::{Error, Result};
pub use evaluation::{
    eval_dict_induction, eval_hypernym, eval_word_similarity, knn, train_hypernym_map, EvalReport,
};
pub use meemi::{
    least_squares_map, meemi_bilingual, meemi_multilingual, FrequencyScale, MeemiOptions,
    MultiSpace,
};
