//! Supervised Bayesian Gaussian mixture classifier.
//!
//! Every class gets a Normal-inverse-Wishart prior on its mean and
//! covariance, and the mixing proportions get a Dirichlet prior. Parameters
//! are never point-estimated: class-conditional densities are the Student-t
//! posterior predictives and class priors are the Dirichlet predictive
//! `(n_k + alpha_k) / (n + alpha_0)`. Fitting is a closed-form conjugate
//! update from sufficient statistics.

use crate::prob::{ClassLabel, DiscreteDistribution};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use thiserror::Error;

pub type FeatureVector = DVector<f64>;

/// Symmetry tolerance on NIW scale matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GmmError {
    #[error("label {label} outside 1..={k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("posterior scale of class {class} is not positive definite")]
    NonPosDefResult { class: usize },
    #[error("predictive scale of class {class} is not positive definite")]
    NonPosDefScale { class: usize },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("non-finite feature value at component {0}")]
    NonFiniteFeature(usize),
}

/// Labeled observations `(feature vector, class)` of a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    dim: usize,
    points: Vec<FeatureVector>,
    labels: Vec<ClassLabel>,
}

impl LabeledSet {
    pub fn new(dim: usize) -> Self {
        LabeledSet {
            dim,
            points: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_parts(
        dim: usize,
        points: Vec<FeatureVector>,
        labels: Vec<ClassLabel>,
    ) -> Result<Self, GmmError> {
        assert_eq!(points.len(), labels.len(), "points and labels differ in length");
        let mut set = LabeledSet::new(dim);
        for (x, y) in points.into_iter().zip(labels) {
            set.push(x, y)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: FeatureVector, label: ClassLabel) -> Result<(), GmmError> {
        if x.len() != self.dim {
            return Err(GmmError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(GmmError::NonFiniteFeature(i));
        }
        self.points.push(x);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[FeatureVector] {
        &self.points
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &FeatureVector {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> ClassLabel {
        self.labels[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureVector, ClassLabel)> {
        self.points.iter().zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Number of rows per class for labels `1..=k` (larger labels ignored).
    pub fn class_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for l in &self.labels {
            if l.index() < k {
                counts[l.index()] += 1;
            }
        }
        counts
    }

    pub fn map_points(&self, f: impl Fn(&FeatureVector) -> FeatureVector) -> LabeledSet {
        let points: Vec<_> = self.points.iter().map(f).collect();
        let dim = points.first().map_or(self.dim, |p| p.len());
        LabeledSet {
            dim,
            points,
            labels: self.labels.clone(),
        }
    }
}

/// Normal-inverse-Wishart hyperparameters `(m, kappa, v, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams {
    pub m: DVector<f64>,
    pub kappa: f64,
    pub v: f64,
    pub s: DMatrix<f64>,
}

impl NiwParams {
    pub fn new(m: DVector<f64>, kappa: f64, v: f64, s: DMatrix<f64>) -> Result<Self, GmmError> {
        let p = NiwParams { m, kappa, v, s };
        p.validate()?;
        Ok(p)
    }

    /// Zero mean, `kappa = 1`, `v = D + 2` and `S = I`, so the prior mean of
    /// each class covariance is exactly the identity.
    pub fn unit(dim: usize) -> Self {
        let v = dim as f64 + 2.0;
        NiwParams {
            m: DVector::zeros(dim),
            kappa: 1.0,
            v,
            s: DMatrix::identity(dim, dim) * (v - dim as f64 - 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn validate(&self) -> Result<(), GmmError> {
        let d = self.dim();
        if self.s.nrows() != d || self.s.ncols() != d {
            return Err(GmmError::InvalidPrior(format!(
                "scale matrix is {}x{}, expected {d}x{d}",
                self.s.nrows(),
                self.s.ncols()
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(GmmError::InvalidPrior(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.v > d as f64 - 1.0) {
            return Err(GmmError::InvalidPrior(format!(
                "v must exceed D - 1 = {}, got {}",
                d as f64 - 1.0,
                self.v
            )));
        }
        if self.m.iter().chain(self.s.iter()).any(|v| !v.is_finite()) {
            return Err(GmmError::InvalidPrior("non-finite hyperparameter".into()));
        }
        if (&self.s - self.s.transpose()).amax() > SYMMETRY_TOLERANCE {
            return Err(GmmError::InvalidPrior("scale matrix is not symmetric".into()));
        }
        if Cholesky::new(self.s.clone()).is_none() {
            return Err(GmmError::InvalidPrior(
                "scale matrix is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Mean of the inverse-Wishart, `S / (v - D - 1)`; defined for `v > D + 1`.
    pub fn expected_covariance(&self) -> Option<DMatrix<f64>> {
        let denom = self.v - self.dim() as f64 - 1.0;
        (denom > 0.0).then(|| &self.s / denom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self, GmmError> {
        if alpha.is_empty() {
            return Err(GmmError::InvalidPrior("empty Dirichlet parameter".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(GmmError::InvalidPrior(format!(
                "Dirichlet concentrations must be positive, got {a}"
            )));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn symmetric(k: usize, alpha: f64) -> Self {
        DirichletParams::new(vec![alpha; k]).expect("positive concentration")
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = GmmError;
    fn try_from(v: Vec<f64>) -> Result<Self, GmmError> {
        DirichletParams::new(v)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(d: DirichletParams) -> Self {
        d.alpha
    }
}

/// Shared prior for all classes plus the mixing-proportion prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPrior {
    pub niw: NiwParams,
    pub alpha: DirichletParams,
}

impl GmmPrior {
    pub fn new(niw: NiwParams, alpha: DirichletParams) -> Result<Self, GmmError> {
        niw.validate()?;
        Ok(GmmPrior { niw, alpha })
    }

    pub fn unit(dim: usize, k: usize) -> Self {
        GmmPrior {
            niw: NiwParams::unit(dim),
            alpha: DirichletParams::symmetric(k, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.niw.dim()
    }

    pub fn k(&self) -> usize {
        self.alpha.k()
    }

    pub fn fit(&self, data: &LabeledSet) -> Result<GmmPosterior, GmmError> {
        fit(data, &self.niw, &self.alpha)
    }
}

/// Multivariate Student-t with a cached Cholesky factor of its scale.
#[derive(Debug, Clone)]
struct StudentT {
    loc: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    dof: f64,
    log_norm: f64,
}

impl StudentT {
    fn new(loc: DVector<f64>, scale: DMatrix<f64>, dof: f64) -> Option<Self> {
        let d = loc.len() as f64;
        let chol = Cholesky::new(scale)?;
        let l = chol.l_dirty();
        let log_det: f64 = 2.0 * (0..loc.len()).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        let log_norm = ln_gamma((dof + d) / 2.0)
            - ln_gamma(dof / 2.0)
            - 0.5 * d * (dof * PI).ln()
            - 0.5 * log_det;
        Some(StudentT {
            loc,
            chol,
            dof,
            log_norm,
        })
    }

    fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let d = self.loc.len() as f64;
        let diff = x - &self.loc;
        // Mahalanobis distance through the lower factor: |L^-1 (x - loc)|^2
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("non-singular Cholesky factor");
        let maha = z.norm_squared();
        self.log_norm - 0.5 * (self.dof + d) * (maha / self.dof).ln_1p()
    }
}

#[derive(Debug, Clone)]
struct ClassPosterior {
    niw: NiwParams,
    predictive: StudentT,
}

/// Posterior over all mixture parameters, in marginalized form.
#[derive(Debug, Clone)]
pub struct GmmPosterior {
    classes: Vec<ClassPosterior>,
    counts: Vec<usize>,
    alpha: DirichletParams,
    dim: usize,
}

/// Conjugate update of every class from the fixed prior.
pub fn fit(
    data: &LabeledSet,
    prior: &NiwParams,
    alpha: &DirichletParams,
) -> Result<GmmPosterior, GmmError> {
    prior.validate()?;
    let d = prior.dim();
    let k = alpha.k();
    if data.dim() != d && !data.is_empty() {
        return Err(GmmError::DimensionMismatch {
            expected: d,
            got: data.dim(),
        });
    }
    let mut counts = vec![0usize; k];
    let mut sums = vec![DVector::<f64>::zeros(d); k];
    let mut scatters = vec![DMatrix::<f64>::zeros(d, d); k];
    for (x, label) in data.iter() {
        if label.get() > k {
            return Err(GmmError::LabelOutOfRange {
                label: label.get(),
                k,
            });
        }
        let c = label.index();
        counts[c] += 1;
        sums[c] += x;
        scatters[c].ger(1.0, x, x, 1.0);
    }
    let classes = (0..k)
        .map(|c| {
            let niw = update_niw(prior, counts[c], &sums[c], &scatters[c]);
            ClassPosterior::new(niw, c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GmmPosterior {
        classes,
        counts,
        alpha: alpha.clone(),
        dim: d,
    })
}

fn update_niw(prior: &NiwParams, n: usize, sum: &DVector<f64>, scatter: &DMatrix<f64>) -> NiwParams {
    if n == 0 {
        return prior.clone();
    }
    let nf = n as f64;
    let kappa = prior.kappa + nf;
    let m = (&prior.m * prior.kappa + sum) / kappa;
    let mut s = &prior.s + scatter;
    s.ger(prior.kappa, &prior.m, &prior.m, 1.0);
    s.ger(-kappa, &m, &m, 1.0);
    let s = (&s + s.transpose()) * 0.5;
    NiwParams {
        m,
        kappa,
        v: prior.v + nf,
        s,
    }
}

impl ClassPosterior {
    fn new(niw: NiwParams, class: usize) -> Result<Self, GmmError> {
        if Cholesky::new(niw.s.clone()).is_none() {
            return Err(GmmError::NonPosDefResult { class: class + 1 });
        }
        let d = niw.dim() as f64;
        let dof = niw.v - d + 1.0;
        let factor = (niw.kappa + 1.0) / (niw.kappa * dof);
        let predictive = StudentT::new(niw.m.clone(), &niw.s * factor, dof)
            .ok_or(GmmError::NonPosDefScale { class: class + 1 })?;
        Ok(ClassPosterior { niw, predictive })
    }
}

impl GmmPosterior {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn alpha(&self) -> &DirichletParams {
        &self.alpha
    }

    pub fn class_params(&self, k: ClassLabel) -> &NiwParams {
        &self.classes[k.index()].niw
    }

    /// `log p(x | class k, D_l)`.
    pub fn class_log_predictive(&self, k: ClassLabel, x: &FeatureVector) -> Result<f64, GmmError> {
        self.check_label(k)?;
        self.check_dim(x)?;
        Ok(self.classes[k.index()].predictive.ln_pdf(x))
    }

    /// `P(class k | D_l) = (n_k + alpha_k) / (n + alpha_0)`.
    pub fn class_prior_predictive(&self, k: ClassLabel) -> Result<f64, GmmError> {
        self.check_label(k)?;
        let n: usize = self.counts.iter().sum();
        let c = k.index();
        Ok((self.counts[c] as f64 + self.alpha.alpha()[c]) / (n as f64 + self.alpha.total()))
    }

    /// Class posterior `P(H = k | x, D_l)`, normalized in log space.
    pub fn predict(&self, x: &FeatureVector) -> Result<DiscreteDistribution, GmmError> {
        self.check_dim(x)?;
        let n: usize = self.counts.iter().sum();
        let log_denom = (n as f64 + self.alpha.total()).ln();
        let logs: Vec<f64> = self
            .classes
            .iter()
            .enumerate()
            .map(|(c, cls)| {
                cls.predictive.ln_pdf(x) + (self.counts[c] as f64 + self.alpha.alpha()[c]).ln()
                    - log_denom
            })
            .collect();
        Ok(DiscreteDistribution::from_normalized(softmax(&logs)))
    }

    /// Posterior mean of each class mean and the inverse-Wishart mean of each
    /// class covariance, for plotting.
    pub fn map_summaries(&self) -> Vec<ClassSummary> {
        self.classes
            .iter()
            .enumerate()
            .map(|(c, cls)| ClassSummary {
                class: ClassLabel::from_index(c),
                count: self.counts[c],
                mean: cls.niw.m.iter().copied().collect(),
                covariance: cls.niw.expected_covariance().map(|m| {
                    m.row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect()
                }),
            })
            .collect()
    }

    fn check_label(&self, k: ClassLabel) -> Result<(), GmmError> {
        if k.get() > self.k() {
            return Err(GmmError::LabelOutOfRange {
                label: k.get(),
                k: self.k(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<(), GmmError> {
        if x.len() != self.dim {
            return Err(GmmError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: ClassLabel,
    pub count: usize,
    pub mean: Vec<f64>,
    /// `None` when `v_n <= D + 1`.
    pub covariance: Option<Vec<Vec<f64>>>,
}

fn softmax(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}
