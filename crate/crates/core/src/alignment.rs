//! Orthogonal alignment of two embedding spaces and the linear map type
//! shared by every fitting routine.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;

use crate::dictionaries::{build_pairs, PairedMatrices, TranslationDictionary};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::linalg;

/// Maximum tolerated `‖M·Mᵀ − I‖_max` for an orthogonal map.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFlavor {
    Orthogonal,
    Unconstrained,
}

impl fmt::Display for MapFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapFlavor::Orthogonal => f.write_str("orthogonal"),
            MapFlavor::Unconstrained => f.write_str("unconstrained"),
        }
    }
}

impl FromStr for MapFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(MapFlavor::Orthogonal),
            "unconstrained" => Ok(MapFlavor::Unconstrained),
            other => Err(Error::Invalid(format!("unknown map flavor `{other}`"))),
        }
    }
}

/// A square matrix applied to row vectors (`x ↦ x·M`).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    flavor: MapFlavor,
    src_lang: String,
    tgt_lang: String,
    trained_on: usize,
}

impl LinearMap {
    /// Wraps `matrix`, checking it is square, finite and, for the orthogonal
    /// flavor, orthogonal within [`ORTHOGONALITY_TOL`].
    pub fn new(matrix: DMatrix<f64>, flavor: MapFlavor) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Invalid(format!(
                "linear map must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("linear map contains non-finite entries".into()));
        }
        let map = LinearMap {
            matrix,
            flavor,
            src_lang: String::new(),
            tgt_lang: String::new(),
            trained_on: 0,
        };
        if flavor == MapFlavor::Orthogonal {
            let err = map.orthogonality_error();
            if err > ORTHOGONALITY_TOL {
                return Err(Error::Numeric(format!(
                    "map tagged orthogonal deviates from orthogonality by {err:e}"
                )));
            }
        }
        Ok(map)
    }

    pub fn identity(dim: usize) -> Self {
        LinearMap::new(DMatrix::identity(dim, dim), MapFlavor::Orthogonal).expect("identity")
    }

    pub fn with_langs(mut self, src: impl Into<String>, tgt: impl Into<String>) -> Self {
        self.src_lang = src.into();
        self.tgt_lang = tgt.into();
        self
    }

    pub fn with_trained_on(mut self, pairs: usize) -> Self {
        self.trained_on = pairs;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn flavor(&self) -> MapFlavor {
        self.flavor
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn src_lang(&self) -> &str {
        &self.src_lang
    }

    pub fn tgt_lang(&self) -> &str {
        &self.tgt_lang
    }

    /// Number of training pairs the map was fitted on.
    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    /// `‖M·Mᵀ − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (&self.matrix * self.matrix.transpose() - DMatrix::<f64>::identity(d, d)).amax()
    }
}

/// Writes a map as a `d d flavor` header followed by `d` rows of `d`
/// numbers with nine significant digits.
pub fn write_map<W: Write>(map: &LinearMap, mut writer: W) -> std::io::Result<()> {
    let d = map.dim();
    writeln!(writer, "{d} {d} {}", map.flavor)?;
    for row in map.matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        writeln!(writer, "{}", line.join(" "))?;
    }
    writer.flush()
}

pub fn read_map<R: BufRead>(reader: R, origin: &str) -> Result<LinearMap> {
    let mut lines = reader.lines().enumerate().filter(|(_, l)| match l {
        Ok(l) => !l.trim().is_empty(),
        Err(_) => true,
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing `d d flavor` header"))?;
    let header = header.map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols, flavor) = match fields.as_slice() {
        [r, c, f] => (
            r.parse::<usize>().ok(),
            c.parse::<usize>().ok(),
            f.parse::<MapFlavor>().ok(),
        ),
        _ => (None, None, None),
    };
    let (Some(d), Some(c), Some(flavor)) = (rows, cols, flavor) else {
        return Err(Error::parse(origin, 1, format!("malformed header `{header}`")));
    };
    if d != c || d == 0 {
        return Err(Error::parse(origin, 1, format!("expected a square map, got {d}x{c}")));
    }

    let mut data = Vec::with_capacity(d * d);
    for _ in 0..d {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, d + 1, format!("expected {d} matrix rows")))?;
        let line = line.map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        let before = data.len();
        for field in line.split_whitespace() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(origin, n + 1, format!("cannot parse `{field}`")))?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(Error::parse(
                origin,
                n + 1,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
    }
    LinearMap::new(DMatrix::from_row_slice(d, d, &data), flavor)
}

pub fn save_map(map: &LinearMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_map(map, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<LinearMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_map(BufReader::new(file), &path.display().to_string())
}

/// `Σ‖a_i·W − b_i‖²` over the rows of `a` and `b`.
pub fn mapping_objective(a: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * w - b).norm_squared()
}

/// Result of an orthogonal Procrustes fit.
#[derive(Clone, Debug)]
pub struct ProcrustesFit {
    pub map: LinearMap,
    /// Singular values of `AᵀB`, descending.
    pub singular_values: Vec<f64>,
    /// Set when `AᵀB` is rank deficient, in which case the optimum is not
    /// unique and the returned map is one of several minimizers.
    pub rank_deficient: bool,
}

/// Orthogonal `W` minimizing `Σ‖a_i·W − b_i‖²`, computed as `U·Vᵀ` from the
/// SVD `AᵀB = U·Σ·Vᵀ`.
pub fn procrustes(pairs: &PairedMatrices) -> Result<ProcrustesFit> {
    procrustes_matrices(&pairs.source, &pairs.target)
}

pub fn procrustes_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<ProcrustesFit> {
    if a.shape() != b.shape() {
        return Err(Error::Invalid(format!(
            "paired matrices differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (k, d) = a.shape();
    if k == 0 || d == 0 {
        return Err(Error::Invalid("procrustes needs at least one pair and one dimension".into()));
    }
    if k < d {
        warn!("procrustes fitted on {k} pairs in {d} dimensions; the map is underdetermined");
    }
    let cross = a.transpose() * b;
    let svd = linalg::svd(&cross)?;
    let w = &svd.u * &svd.v_t;
    let tol = linalg::rank_tolerance(&svd.singular_values, d, d);
    let rank_deficient = svd.singular_values.iter().filter(|&&s| s > tol).count() < d;
    let map = LinearMap::new(w, MapFlavor::Orthogonal)?.with_trained_on(k);
    Ok(ProcrustesFit {
        map,
        singular_values: svd.singular_values,
        rank_deficient,
    })
}

/// Right-multiplies every row of `space` by the map. Vocabulary and
/// frequencies carry over; the normalization history is cleared.
pub fn apply_map(space: &EmbeddingSpace, map: &LinearMap) -> Result<EmbeddingSpace> {
    if space.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: space.dim(),
        });
    }
    space.with_matrix(space.matrix() * map.matrix())
}

/// Output of [`align_bilingual`].
#[derive(Clone, Debug)]
pub struct BilingualAlignment {
    pub aligned_src: EmbeddingSpace,
    pub fit: ProcrustesFit,
    pub skipped_oov: usize,
}

/// Maps `src` onto `tgt` with an orthogonal map learned from `dict`. The
/// target space is left as is.
pub fn align_bilingual(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &TranslationDictionary,
) -> Result<BilingualAlignment> {
    let pairs = build_pairs(dict, src, tgt, dict.column(src.lang())?, dict.column(tgt.lang())?)?;
    let mut fit = procrustes(&pairs)?;
    fit.map = fit.map.with_langs(src.lang(), tgt.lang());
    let aligned_src = apply_map(src, &fit.map)?;
    Ok(BilingualAlignment {
        aligned_src,
        fit,
        skipped_oov: pairs.skipped_oov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{NormStep, DEFAULT_RECIPE};
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation(deg: f64) -> DMatrix<f64> {
        let (s, c) = deg.to_radians().sin_cos();
        // Row-vector convention: (1, 0)·R = (cos, sin).
        DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
    }

    fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        let normal = rand_distr::StandardNormal;
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(normal))
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        gaussian(rng, d, d).qr().q()
    }

    fn space(lang: &str, m: DMatrix<f64>) -> EmbeddingSpace {
        let words = (0..m.nrows()).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new(lang, words, m).unwrap()
    }

    fn identity_dict(src: &str, tgt: &str, n: usize) -> TranslationDictionary {
        let tuples = (0..n).map(|i| vec![format!("w{i}"), format!("w{i}")]).collect();
        TranslationDictionary::new(vec![src.into(), tgt.into()], tuples).unwrap()
    }

    #[test]
    fn identical_sides_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(&mut rng, 30, 5);
        let fit = procrustes_matrices(&a, &a).unwrap();
        assert!((fit.map.matrix() - DMatrix::<f64>::identity(5, 5)).amax() <= 1e-8);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn recovers_known_orthogonal_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian(&mut rng, 40, 8);
        let r = random_orthogonal(&mut rng, 8);
        let fit = procrustes_matrices(&a, &(&a * &r)).unwrap();
        assert!((fit.map.matrix() - &r).amax() <= 1e-6);
    }

    #[test]
    fn thirty_degree_toy_matches_grid_search() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = &a * rotation(30.0);

        // Independent oracle: scan the rotation angle at 1e-4 rad.
        let mut best = (f64::INFINITY, 0.0);
        let mut theta = 0.0f64;
        while theta < std::f64::consts::TAU {
            let (s, c) = theta.sin_cos();
            let r = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
            let obj = mapping_objective(&a, &r, &b);
            if obj < best.0 {
                best = (obj, theta);
            }
            theta += 1e-4;
        }
        assert!((best.1.to_degrees() - 30.0).abs() < 1e-2);

        let fit = procrustes_matrices(&a, &b).unwrap();
        assert!((fit.map.matrix() - rotation(30.0)).amax() <= 1e-6);
    }

    #[test]
    fn rank_deficient_cross_covariance_is_flagged() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let fit = procrustes_matrices(&a, &a).unwrap();
        assert!(fit.rank_deficient);
        assert!(fit.map.orthogonality_error() <= ORTHOGONALITY_TOL);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = DMatrix::zeros(3, 2);
        let b = DMatrix::zeros(4, 2);
        assert!(procrustes_matrices(&a, &b).is_err());
    }

    #[test]
    fn apply_identity_and_rotation() {
        let s = space("x", DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, -2.0]));
        let same = apply_map(&s, &LinearMap::identity(2)).unwrap();
        assert_eq!(same.matrix(), s.matrix());

        let quarter = LinearMap::new(rotation(90.0), MapFlavor::Orthogonal).unwrap();
        let turned = apply_map(&s, &quarter).unwrap();
        assert!((turned.matrix()[(0, 0)] - 0.0).abs() <= 1e-9);
        assert!((turned.matrix()[(0, 1)] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn apply_checks_dimension() {
        let s = space("x", DMatrix::zeros(2, 3));
        assert!(matches!(
            apply_map(&s, &LinearMap::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn orthogonal_map_keeps_unit_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = space("x", gaussian(&mut rng, 20, 6)).normalize(&[NormStep::Unit]).unwrap();
        let map = LinearMap::new(random_orthogonal(&mut rng, 6), MapFlavor::Orthogonal).unwrap();
        let out = apply_map(&s, &map).unwrap();
        assert!(out.norm_state().is_empty());
        for row in out.matrix().row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn align_same_space_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = gaussian(&mut rng, 60, 6);
        let src = space("a", base.clone()).normalize(&DEFAULT_RECIPE).unwrap();
        let tgt = src.clone().with_lang("b");
        let out = align_bilingual(&src, &tgt, &identity_dict("a", "b", 60)).unwrap();
        assert!((out.aligned_src.matrix() - src.matrix()).amax() <= 1e-8);
        assert_eq!(out.fit.map.src_lang(), "a");
        assert_eq!(out.fit.map.trained_on(), 60);
    }

    #[test]
    fn align_rotated_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = space("a", gaussian(&mut rng, 80, 10)).normalize(&[NormStep::Unit]).unwrap();
        let r = random_orthogonal(&mut rng, 10);
        let tgt = space("b", src.matrix() * &r);
        let out = align_bilingual(&src, &tgt, &identity_dict("a", "b", 50)).unwrap();
        assert!((out.aligned_src.matrix() - tgt.matrix()).amax() <= 1e-6);
        // Target is not modified.
        assert_eq!(tgt.matrix(), &(src.matrix() * &r));
    }

    #[test]
    fn map_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let map = LinearMap::new(random_orthogonal(&mut rng, 7), MapFlavor::Orthogonal).unwrap();
        let mut buf = Vec::new();
        write_map(&map, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("7 7 orthogonal\n"));
        let back = read_map(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.flavor(), MapFlavor::Orthogonal);
        for (x, y) in back.matrix().iter().zip(map.matrix().iter()) {
            assert!((x - y).abs() <= 5e-9 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn map_reader_rejects_garbage() {
        assert!(read_map("2 2\n1 0\n0 1\n".as_bytes(), "m").is_err());
        assert!(read_map("2 3 unconstrained\n".as_bytes(), "m").is_err());
        assert!(read_map("2 2 unconstrained\n1 0\n".as_bytes(), "m").is_err());
        assert!(read_map("2 2 orthogonal\n2 0\n0 1\n".as_bytes(), "m").is_err());
        let ok = read_map("2 2 unconstrained\n2 0\n0 1\n".as_bytes(), "m").unwrap();
        assert_eq!(ok.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn reflection_is_an_accepted_optimum() {
        let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 2.0]);
        let fit = procrustes_matrices(&a, &(&a * &reflect)).unwrap();
        let det = Matrix2::from_iterator(fit.map.matrix().iter().copied()).determinant();
        assert!((det + 1.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn beats_orthogonal_perturbations(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = gaussian(&mut rng, 40, 5);
                let b = gaussian(&mut rng, 40, 5);
                let fit = procrustes_matrices(&a, &b).unwrap();
                let w = fit.map.matrix();
                prop_assert!(fit.map.orthogonality_error() <= ORTHOGONALITY_TOL);
                let best = mapping_objective(&a, w, &b);
                for _ in 0..20 {
                    // Small rotation: Cayley transform of a small skew matrix.
                    let g = gaussian(&mut rng, 5, 5) * 0.05;
                    let skew = &g - g.transpose();
                    let eye = DMatrix::<f64>::identity(5, 5);
                    let q = (&eye - &skew).try_inverse().unwrap() * (&eye + &skew);
                    prop_assert!(best <= mapping_objective(&a, &(w * q), &b) + 1e-12);
                }
            }

            #[test]
            fn orthogonal_apply_preserves_cosines(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = space("x", gaussian(&mut rng, 12, 4)).normalize(&[NormStep::Unit]).unwrap();
                let map = LinearMap::new(random_orthogonal(&mut rng, 4), MapFlavor::Orthogonal).unwrap();
                let out = apply_map(&s, &map).unwrap();
                let before = s.matrix() * s.matrix().transpose();
                let after = out.matrix() * out.matrix().transpose();
                prop_assert!((before - after).amax() <= 1e-6);
            }
        }
    }
}
