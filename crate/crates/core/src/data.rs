//! Dataset generation, ingestion, standardization and PCA projection.

use crate::gmm::{FeatureVector, LabeledSet};
use crate::prob::ClassLabel;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("class {class}: covariance is not symmetric positive definite")]
    NonPosDefCovariance { class: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("line {line}: label {label} outside 1..={k}")]
    LabelOutOfRange { line: u64, label: i64, k: usize },
    #[error("line {line}, column {column}: non-finite feature value")]
    NonFiniteFeature { line: u64, column: usize },
    #[error("feature {0} has zero variance")]
    ZeroVarianceFeature(usize),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("covariance is degenerate (total variance {0})")]
    DegenerateCovariance(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One Gaussian cluster of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub count: usize,
}

/// A run of consecutive rows drawn from one class (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub class: usize,
    pub count: usize,
}

/// Gaussian clusters, one per class, plus an optional row schedule.
///
/// Without a schedule rows are emitted in class blocks (all of class 1, then
/// class 2, ...). With one, rows follow the listed segments, which must use
/// up every class's count exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub classes: Vec<ClassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<Segment>>,
}

impl SyntheticSpec {
    /// Four 2-D clusters along a damage path, 1997 points in total.
    ///
    /// Classes 1 and 2 overlap, as do 3 and 4, with a clear margin between 2
    /// and 3. These parameters are illustrative, not a reconstruction of any
    /// published dataset.
    pub fn four_class_default() -> Self {
        let iso = |s: f64| vec![vec![s, 0.0], vec![0.0, s]];
        SyntheticSpec {
            seed: 1997,
            classes: vec![
                ClassSpec {
                    mean: vec![-2.0, 1.0],
                    covariance: iso(0.35),
                    count: 700,
                },
                ClassSpec {
                    mean: vec![-0.8, 0.0],
                    covariance: iso(0.3),
                    count: 550,
                },
                ClassSpec {
                    mean: vec![1.8, -0.4],
                    covariance: iso(0.3),
                    count: 450,
                },
                ClassSpec {
                    mean: vec![3.0, 0.6],
                    covariance: iso(0.35),
                    count: 297,
                },
            ],
            schedule: None,
        }
    }

    /// Four natural frequencies over 3932 sequential observations: normal
    /// condition, a cold-temperature stiffening episode at rows 1200..1500,
    /// and progressive damage from row 3476 (incipient, then advanced).
    pub fn z24_like() -> Self {
        let diag = |s: [f64; 4]| {
            (0..4)
                .map(|i| (0..4).map(|j| if i == j { s[i] } else { 0.0 }).collect())
                .collect()
        };
        SyntheticSpec {
            seed: 24,
            classes: vec![
                ClassSpec {
                    mean: vec![3.95, 5.10, 9.90, 10.40],
                    covariance: diag([0.0025, 0.0040, 0.0100, 0.0100]),
                    count: 3176,
                },
                ClassSpec {
                    mean: vec![4.15, 5.35, 10.20, 10.75],
                    covariance: diag([0.0060, 0.0080, 0.0200, 0.0200]),
                    count: 300,
                },
                ClassSpec {
                    mean: vec![3.86, 4.98, 9.74, 10.22],
                    covariance: diag([0.0020, 0.0030, 0.0080, 0.0080]),
                    count: 228,
                },
                ClassSpec {
                    mean: vec![3.70, 4.80, 9.50, 9.95],
                    covariance: diag([0.0030, 0.0040, 0.0100, 0.0100]),
                    count: 228,
                },
            ],
            schedule: Some(vec![
                Segment {
                    class: 1,
                    count: 1200,
                },
                Segment {
                    class: 2,
                    count: 300,
                },
                Segment {
                    class: 1,
                    count: 1976,
                },
                Segment {
                    class: 3,
                    count: 228,
                },
                Segment {
                    class: 4,
                    count: 228,
                },
            ]),
        }
    }

    pub fn dim(&self) -> usize {
        self.classes.first().map_or(0, |c| c.mean.len())
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    fn validate(&self) -> Result<Vec<Cholesky<f64, nalgebra::Dyn>>, DataError> {
        if self.classes.is_empty() {
            return Err(DataError::InvalidSpec("no classes".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(DataError::InvalidSpec("zero-dimensional mean".into()));
        }
        let mut factors = Vec::with_capacity(self.classes.len());
        for (i, c) in self.classes.iter().enumerate() {
            let class = i + 1;
            if c.count == 0 {
                return Err(DataError::InvalidSpec(format!("class {class} has count 0")));
            }
            if c.mean.len() != d || c.covariance.len() != d || c.covariance.iter().any(|r| r.len() != d) {
                return Err(DataError::InvalidSpec(format!(
                    "class {class}: mean/covariance must be {d}-dimensional"
                )));
            }
            let cov = DMatrix::from_fn(d, d, |r, col| c.covariance[r][col]);
            if cov.iter().any(|v| !v.is_finite()) || (&cov - cov.transpose()).amax() > 1e-12 {
                return Err(DataError::NonPosDefCovariance { class });
            }
            factors.push(Cholesky::new(cov).ok_or(DataError::NonPosDefCovariance { class })?);
        }
        if let Some(schedule) = &self.schedule {
            let mut used = vec![0usize; self.classes.len()];
            for seg in schedule {
                if seg.class == 0 || seg.class > self.classes.len() {
                    return Err(DataError::InvalidSpec(format!(
                        "schedule names class {} outside 1..={}",
                        seg.class,
                        self.classes.len()
                    )));
                }
                used[seg.class - 1] += seg.count;
            }
            for (i, (u, c)) in used.iter().zip(&self.classes).enumerate() {
                if *u != c.count {
                    return Err(DataError::InvalidSpec(format!(
                        "schedule uses {u} rows of class {}, spec has {}",
                        i + 1,
                        c.count
                    )));
                }
            }
        }
        Ok(factors)
    }
}

/// Draws every class's points; each class has its own seed stream.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledSet, DataError> {
    let factors = spec.validate()?;
    let d = spec.dim();
    let mut draws: Vec<std::vec::IntoIter<FeatureVector>> = spec
        .classes
        .iter()
        .zip(&factors)
        .enumerate()
        .map(|(i, (c, chol))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            let mean = DVector::from_column_slice(&c.mean);
            let l = chol.l();
            (0..c.count)
                .map(|_| {
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    &mean + &l * z
                })
                .collect::<Vec<_>>()
                .into_iter()
        })
        .collect();
    let schedule = spec.schedule.clone().unwrap_or_else(|| {
        spec.classes
            .iter()
            .enumerate()
            .map(|(i, c)| Segment {
                class: i + 1,
                count: c.count,
            })
            .collect()
    });
    let mut set = LabeledSet::new(d);
    for seg in schedule {
        for _ in 0..seg.count {
            let x = draws[seg.class - 1].next().expect("schedule validated");
            set.push(x, ClassLabel::from_index(seg.class - 1))
                .expect("finite draws of the right dimension");
        }
    }
    Ok(set)
}

/// Reads a `f1,...,fD,label` table; row order is preserved.
pub fn load_dataset(path: &Path, dim: usize, k: usize) -> Result<LabeledSet, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, dim, k)
}

pub fn read_dataset<R: std::io::Read>(reader: R, dim: usize, k: usize) -> Result<LabeledSet, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |line: u64, column: usize, message: String| DataError::ParseError {
        line,
        column,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(parse_err(1, 0, "missing header row".into()));
    }
    if headers.len() != dim + 1 {
        return Err(parse_err(
            1,
            headers.len(),
            format!("expected {} columns ({dim} features + label), found {}", dim + 1, headers.len()),
        ));
    }
    let mut set = LabeledSet::new(dim);
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut x = DVector::zeros(dim);
        for column in 0..dim {
            let field = record[column].trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, column + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteFeature {
                    line,
                    column: column + 1,
                });
            }
            x[column] = v;
        }
        let field = record[dim].trim();
        let label: i64 = field
            .parse()
            .map_err(|_| parse_err(line, dim + 1, format!("not an integer label: {field:?}")))?;
        if label < 1 || label as usize > k {
            return Err(DataError::LabelOutOfRange { line, label, k });
        }
        set.push(x, ClassLabel::from_index(label as usize - 1))
            .expect("dimension and finiteness checked");
    }
    if set.is_empty() {
        return Err(parse_err(2, 0, "no data rows".into()));
    }
    Ok(set)
}

/// Writes a `f1,...,fD,label` table with shortest round-trip float formatting.
pub fn write_dataset<W: Write>(set: &LabeledSet, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=set.dim()).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, label) in set.iter() {
        for v in x.iter() {
            write!(out, "{v},")?;
        }
        writeln!(out, "{label}")?;
    }
    Ok(())
}

/// Per-feature affine map to zero mean and unit sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(points: &[FeatureVector]) -> Result<Self, DataError> {
        if points.len() < 2 {
            return Err(DataError::TooFewPoints {
                needed: 2,
                got: points.len(),
            });
        }
        let d = points[0].len();
        let n = points.len() as f64;
        let mean: DVector<f64> = points.iter().fold(DVector::zeros(d), |a, x| a + x) / n;
        let mut sd = vec![0.0; d];
        for x in points {
            for j in 0..d {
                sd[j] += (x[j] - mean[j]).powi(2);
            }
        }
        for (j, s) in sd.iter_mut().enumerate() {
            *s = (*s / (n - 1.0)).sqrt();
            if !(*s > 0.0) {
                return Err(DataError::ZeroVarianceFeature(j + 1));
            }
        }
        Ok(Standardizer {
            mean: mean.iter().copied().collect(),
            sd,
        })
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        DVector::from_fn(x.len(), |j, _| (x[j] - self.mean[j]) / self.sd[j])
    }

    pub fn invert(&self, z: &FeatureVector) -> FeatureVector {
        DVector::from_fn(z.len(), |j, _| z[j] * self.sd[j] + self.mean[j])
    }
}

/// Standardizes a labeled set, returning the transform for reuse on other points.
pub fn standardize(data: &LabeledSet) -> Result<(LabeledSet, Standardizer), DataError> {
    let st = Standardizer::fit(data.points())?;
    Ok((data.map_points(|x| st.apply(x)), st))
}

/// Top-two principal directions of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: DVector<f64>,
    /// `2 x D`; rows are orthonormal loadings.
    pub loadings: DMatrix<f64>,
    /// Fraction of total variance along each retained direction.
    pub explained: [f64; 2],
}

impl Projection {
    pub fn fit(points: &[FeatureVector]) -> Result<Self, DataError> {
        let d = points.first().map_or(0, |p| p.len());
        if d < 2 {
            return Err(DataError::DimensionMismatch { expected: 2, got: d });
        }
        if points.len() < d {
            return Err(DataError::TooFewPoints {
                needed: d,
                got: points.len(),
            });
        }
        let n = points.len() as f64;
        let mean: DVector<f64> = points.iter().fold(DVector::zeros(d), |a, x| a + x) / n;
        let mut cov = DMatrix::zeros(d, d);
        for x in points {
            let c = x - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= n - 1.0;
        let total = cov.trace();
        if !(total > 0.0) {
            return Err(DataError::DegenerateCovariance(total));
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut loadings = DMatrix::zeros(2, d);
        let mut explained = [0.0; 2];
        for (row, &i) in order.iter().take(2).enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v = -v;
            }
            loadings.set_row(row, &v.transpose());
            explained[row] = eig.eigenvalues[i].max(0.0) / total;
        }
        Ok(Projection {
            mean,
            loadings,
            explained,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, x: &FeatureVector) -> DVector<f64> {
        &self.loadings * (x - &self.mean)
    }

    /// Back to feature space: `mean + loadings^T * coords`.
    pub fn lift(&self, coords: &DVector<f64>) -> FeatureVector {
        &self.mean + self.loadings.transpose() * coords
    }

    pub fn project_set(&self, data: &LabeledSet) -> LabeledSet {
        data.map_points(|x| self.project(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::Rng;

    #[test]
    fn default_spec_has_expected_size() {
        let spec = SyntheticSpec::four_class_default();
        assert_eq!(spec.total(), 1997);
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.len(), 1997);
        assert_eq!(data.class_counts(4), vec![700, 550, 450, 297]);
    }

    #[test]
    fn z24_like_follows_schedule() {
        let spec = SyntheticSpec::z24_like();
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.len(), 3932);
        assert_eq!(data.dim(), 4);
        assert_eq!(data.label(0).get(), 1);
        assert_eq!(data.label(1200).get(), 2);
        assert_eq!(data.label(1499).get(), 2);
        assert_eq!(data.label(1500).get(), 1);
        assert_eq!(data.label(3475).get(), 1);
        assert_eq!(data.label(3476).get(), 3);
        assert_eq!(data.label(3931).get(), 4);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::four_class_default();
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn rejects_bad_covariance_and_schedule() {
        let mut spec = SyntheticSpec::four_class_default();
        spec.classes[2].covariance = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            generate_synthetic(&spec),
            Err(DataError::NonPosDefCovariance { class: 3 })
        ));
        let mut spec = SyntheticSpec::z24_like();
        spec.schedule.as_mut().unwrap()[0].count = 10;
        assert!(matches!(generate_synthetic(&spec), Err(DataError::InvalidSpec(_))));
    }

    #[test]
    fn sample_means_converge() {
        let spec = SyntheticSpec {
            seed: 5,
            classes: vec![ClassSpec {
                mean: vec![1.0, -2.0],
                covariance: vec![vec![0.5, 0.1], vec![0.1, 0.3]],
                count: 100_000,
            }],
            schedule: None,
        };
        let data = generate_synthetic(&spec).unwrap();
        let n = data.len() as f64;
        let mean = data.points().iter().fold(DVector::zeros(2), |a, x| a + x) / n;
        for (j, var) in [0.5f64, 0.3].iter().enumerate() {
            assert!((mean[j] - spec.classes[0].mean[j]).abs() < 3.0 * var.sqrt() / n.sqrt());
        }
    }

    #[test]
    fn dataset_round_trip() {
        let data = generate_synthetic(&SyntheticSpec::four_class_default()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f1,f2,label\n"));
        let back = read_dataset(buf.as_slice(), 2, 4).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            read_dataset("".as_bytes(), 2, 4),
            Err(DataError::ParseError { .. })
        ));
        assert!(matches!(
            read_dataset("f1,f2,label\n".as_bytes(), 2, 4),
            Err(DataError::ParseError { .. })
        ));
        match read_dataset("f1,f2,label\n0.1,0.2,1\n0.3,0.4,5\n".as_bytes(), 2, 4) {
            Err(DataError::LabelOutOfRange { line: 3, label: 5, k: 4 }) => {}
            other => panic!("{other:?}"),
        }
        match read_dataset("f1,f2,label\n0.1,abc,1\n".as_bytes(), 2, 4) {
            Err(DataError::ParseError { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_dataset("f1,f2,label\n0.1,inf,1\n".as_bytes(), 2, 4),
            Err(DataError::NonFiniteFeature { line: 2, column: 2 })
        ));
        assert!(matches!(
            read_dataset("f1,label\n0.1,1\n".as_bytes(), 2, 4),
            Err(DataError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn standardize_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = (0..500)
            .map(|_| dvector![rng.random_range(3.0..5.0), rng.random_range(-100.0..10.0)])
            .collect();
        let labels = vec![ClassLabel::from_index(0); pts.len()];
        let data = LabeledSet::from_parts(2, pts, labels).unwrap();
        let (z, st) = standardize(&data).unwrap();
        let n = z.len() as f64;
        for j in 0..2 {
            let m: f64 = z.points().iter().map(|x| x[j]).sum::<f64>() / n;
            let v: f64 = z.points().iter().map(|x| (x[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(m.abs() < 1e-9);
            assert!((v.sqrt() - 1.0).abs() < 1e-9);
        }
        for (x, zx) in data.points().iter().zip(z.points()) {
            assert!((st.invert(zx) - x).amax() < 1e-9);
        }
        let (zz, st2) = standardize(&z).unwrap();
        assert!(st2.mean.iter().all(|m| m.abs() < 1e-9));
        assert!(st2.sd.iter().all(|s| (s - 1.0).abs() < 1e-9));
        for (a, b) in z.points().iter().zip(zz.points()) {
            assert!((a - b).amax() < 1e-9);
        }
    }

    #[test]
    fn standardize_rejects_constant_feature() {
        let pts = vec![dvector![1.0, 2.0], dvector![1.0, 3.0], dvector![1.0, 4.0]];
        let data = LabeledSet::from_parts(2, pts, vec![ClassLabel::from_index(0); 3]).unwrap();
        assert!(matches!(standardize(&data), Err(DataError::ZeroVarianceFeature(1))));
    }

    #[test]
    fn pca_on_plane_is_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<_> = (0..50)
            .map(|_| dvector![rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0) * 0.3])
            .collect();
        let proj = Projection::fit(&pts).unwrap();
        let lt = &proj.loadings * proj.loadings.transpose();
        assert!((lt - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
        for i in 0..pts.len() {
            for j in 0..i {
                let a = (&pts[i] - &pts[j]).norm();
                let b = (proj.project(&pts[i]) - proj.project(&pts[j])).norm();
                assert!((a - b).abs() < 1e-9);
            }
        }
        let centroid = pts.iter().fold(DVector::zeros(2), |a, x| a + proj.project(x)) / 50.0;
        assert!(centroid.amax() < 1e-9);
    }

    #[test]
    fn pca_on_line_has_one_component() {
        let dir = dvector![1.0, -2.0, 0.5, 3.0].normalize();
        let pts: Vec<_> = (0..40).map(|i| &dir * (i as f64 - 20.0) + dvector![1.0, 1.0, 1.0, 1.0]).collect();
        let proj = Projection::fit(&pts).unwrap();
        assert!(proj.explained[1] < 1e-12);
        assert!((proj.explained[0] - 1.0).abs() < 1e-12);
        // sign convention: largest-magnitude loading is positive
        let row = proj.loadings.row(0).transpose();
        let pivot = row.iamax();
        assert!(row[pivot] > 0.0);
    }

    #[test]
    fn pca_matches_dense_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mix = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let pts: Vec<_> = (0..300)
            .map(|_| &mix * DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let proj = Projection::fit(&pts).unwrap();
        // oracle: eigenvalues via the characteristic behaviour of power iteration
        let n = pts.len() as f64;
        let mean = pts.iter().fold(DVector::zeros(4), |a, x| a + x) / n;
        let cov = pts
            .iter()
            .fold(DMatrix::zeros(4, 4), |a, x| a + (x - &mean) * (x - &mean).transpose())
            / (n - 1.0);
        let total = cov.trace();
        let mut v = DVector::from_element(4, 1.0);
        for _ in 0..5000 {
            v = (&cov * &v).normalize();
        }
        let l1 = (v.transpose() * &cov * &v)[0];
        let deflated = &cov - &v * v.transpose() * l1;
        let mut w = DVector::from_fn(4, |i, _| if i == 1 { 1.0 } else { 0.3 });
        for _ in 0..5000 {
            w = (&deflated * &w).normalize();
        }
        let l2 = (w.transpose() * &deflated * &w)[0];
        assert!((proj.explained[0] - l1 / total).abs() < 1e-8);
        assert!((proj.explained[1] - l2 / total).abs() < 1e-8);
        assert!(proj.explained[0] + proj.explained[1] <= 1.0 + 1e-12);
        let lt = &proj.loadings * proj.loadings.transpose();
        assert!((lt - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
    }

    #[test]
    fn pca_errors() {
        let pts = vec![dvector![1.0, 1.0], dvector![1.0, 1.0], dvector![1.0, 1.0]];
        assert!(matches!(Projection::fit(&pts), Err(DataError::DegenerateCovariance(_))));
        assert!(matches!(
            Projection::fit(&[dvector![1.0, 2.0, 3.0]]),
            Err(DataError::TooFewPoints { .. })
        ));
    }
}
