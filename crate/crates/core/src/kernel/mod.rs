//! Gram matrices, kernel banks and the operations that build them.
//!
//! Every matrix here is dense and immutable once constructed. Banks are
//! normalized so that each member has trace equal to the number of samples,
//! which makes the weight constraint `sum(gamma) = t` meaningful across
//! kernels of very different scales.

pub(crate) mod io;

pub use io::{
    load_bank, load_csv_bank, read_bank, read_groups, save_bank, write_bank, write_groups,
};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted for precomputed matrices.
const SYMMETRY_TOL: f64 = 1e-12;

/// Sample matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Vec<i32>,
}

impl Dataset {
    pub fn new(points: Array2<f64>, labels: Vec<i32>) -> Result<Self> {
        let m = points.nrows();
        if m < 2 {
            return Err(Error::invalid(format!(
                "dataset needs at least 2 samples, got {m}"
            )));
        }
        if labels.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: labels.len(),
            });
        }
        if labels.iter().all(|&l| l == labels[0]) {
            return Err(Error::invalid("dataset needs at least two distinct labels"));
        }
        if let Some(((i, j), _)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at sample {i}, feature {j}"
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Rows `indices` of this dataset, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let points = self.points.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(points, labels)
    }
}

/// Kernel function family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `exp(-|x - z|^2 / (2 width^2))`
    Gaussian {
        width: f64,
    },
    /// `(x . z + offset)^degree`
    Polynomial {
        degree: u32,
        offset: f64,
    },
    Linear,
}

/// A kernel function, optionally restricted to a subset of the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<usize>>,
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian { width },
            features: None,
        }
    }

    pub fn polynomial(degree: u32, offset: f64) -> Self {
        Self {
            kind: KernelKind::Polynomial { degree, offset },
            features: None,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            features: None,
        }
    }

    pub fn on_features(mut self, features: Vec<usize>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.kind {
            KernelKind::Gaussian { width } if !(width > 0.0 && width.is_finite()) => {
                return Err(Error::invalid(format!(
                    "gaussian width must be positive, got {width}"
                )));
            }
            KernelKind::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::invalid("polynomial degree must be at least 1"));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::invalid(format!(
                        "polynomial offset must be non-negative, got {offset}"
                    )));
                }
            }
            _ => {}
        }
        if let Some(features) = &self.features {
            if features.is_empty() {
                return Err(Error::invalid("feature subset is empty"));
            }
            if let Some(&f) = features.iter().find(|&&f| f >= dim) {
                return Err(Error::invalid(format!(
                    "feature index {f} out of range for {dim}-dimensional data"
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the kernel on two full feature rows.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian { width } => {
                let sq = self.fold(a, b, |x, y| (x - y) * (x - y));
                (-sq / (2.0 * width * width)).exp()
            }
            KernelKind::Polynomial { degree, offset } => {
                (self.fold(a, b, |x, y| x * y) + offset).powi(degree as i32)
            }
            KernelKind::Linear => self.fold(a, b, |x, y| x * y),
        }
    }

    fn fold(&self, a: &[f64], b: &[f64], term: impl Fn(f64, f64) -> f64) -> f64 {
        match &self.features {
            Some(features) => features.iter().map(|&f| term(a[f], b[f])).sum(),
            None => a.iter().zip(b).map(|(&x, &y)| term(x, y)).sum(),
        }
    }
}

/// Dense symmetric kernel matrix with its cached trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Array2<f64>,
    trace: f64,
    source: Option<KernelSpec>,
}

impl GramMatrix {
    /// Wraps a precomputed matrix after checking shape, finiteness and symmetry.
    pub fn new(values: Array2<f64>, source: Option<KernelSpec>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::invalid(format!(
                "gram matrix must be square, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            for j in 0..=i {
                let a = values[[i, j]];
                if !a.is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
                let b = values[[j, i]];
                if !b.is_finite() {
                    return Err(Error::NonFiniteEntry { row: j, col: i });
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::invalid(format!(
                        "gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_trusted(values, source))
    }

    fn from_trusted(values: Array2<f64>, source: Option<KernelSpec>) -> Self {
        let trace = values.diag().sum();
        Self {
            values,
            trace,
            source,
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn source(&self) -> Option<&KernelSpec> {
        self.source.as_ref()
    }

    /// Number of samples.
    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn scaled(&self, factor: f64) -> GramMatrix {
        Self::from_trusted(&self.values * factor, self.source.clone())
    }

    /// Principal submatrix on `indices`.
    pub fn select(&self, indices: &[usize]) -> GramMatrix {
        Self::from_trusted(self.block(indices, indices), self.source.clone())
    }

    /// Rectangular block with the given rows and columns.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| {
            self.values[[rows[a], cols[b]]]
        })
    }
}

/// Gram matrix of `spec` over all pairs of samples in `data`.
pub fn compute_gram(data: &Dataset, spec: &KernelSpec) -> Result<GramMatrix> {
    let values = compute_cross(data.points(), data.points(), spec)?;
    Ok(GramMatrix::from_trusted(values, Some(spec.clone())))
}

/// Kernel evaluations between the rows of `left` and the rows of `right`.
///
/// Rows are computed in parallel; each entry is evaluated independently so
/// the result does not depend on the thread count.
pub fn compute_cross(
    left: &Array2<f64>,
    right: &Array2<f64>,
    spec: &KernelSpec,
) -> Result<Array2<f64>> {
    if left.ncols() != right.ncols() {
        return Err(Error::LengthMismatch {
            expected: left.ncols(),
            found: right.ncols(),
        });
    }
    spec.validate(left.ncols())?;
    let (left, right) = (left.as_standard_layout(), right.as_standard_layout());
    let (m, q) = (left.nrows(), right.nrows());
    let mut flat = vec![0.0; m * q];
    if q > 0 {
        flat.par_chunks_mut(q).enumerate().for_each(|(i, row)| {
            let a = left.row(i);
            let a = a.as_slice().expect("standard layout");
            for (j, out) in row.iter_mut().enumerate() {
                let b = right.row(j);
                *out = spec.eval(a, b.as_slice().expect("standard layout"));
            }
        });
    }
    let values = Array2::from_shape_vec((m, q), flat).expect("shape matches buffer");
    if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { row, col });
    }
    Ok(values)
}

/// Rescales `k` so that its trace equals `target`.
pub fn trace_normalize(k: &GramMatrix, target: f64) -> Result<GramMatrix> {
    if !(k.trace > 0.0) {
        return Err(Error::NonPositiveTrace(k.trace));
    }
    Ok(k.scaled(target / k.trace))
}

/// Adds `jitter` to the diagonal.
pub fn stabilize(k: &GramMatrix, jitter: f64) -> GramMatrix {
    let mut values = k.values.clone();
    values.diag_mut().mapv_inplace(|v| v + jitter);
    GramMatrix::from_trusted(values, k.source.clone())
}

/// Weighted sum `sum_j gamma_j K_j` of the bank's kernels.
pub fn combine(bank: &KernelBank, gamma: &[f64]) -> Result<GramMatrix> {
    if gamma.len() != bank.len() {
        return Err(Error::LengthMismatch {
            expected: bank.len(),
            found: gamma.len(),
        });
    }
    if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(Error::invalid(format!(
            "kernel weights must be finite and non-negative, got {g}"
        )));
    }
    let m = bank.samples();
    let mut acc = Array2::<f64>::zeros((m, m));
    for (k, &g) in bank.kernels.iter().zip(gamma) {
        if g != 0.0 {
            acc.scaled_add(g, &k.values);
        }
    }
    Ok(GramMatrix::from_trusted(acc, None))
}

/// Ordered kernels over a shared sample set, with the sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kernels: Vec<GramMatrix>,
    labels: Vec<i32>,
    groups: Option<Vec<String>>,
}

impl KernelBank {
    pub fn new(kernels: Vec<GramMatrix>, labels: Vec<i32>) -> Result<Self> {
        let Some(first) = kernels.first() else {
            return Err(Error::invalid("kernel bank needs at least one kernel"));
        };
        let m = first.size();
        if let Some(k) = kernels.iter().find(|k| k.size() != m) {
            return Err(Error::LengthMismatch {
                expected: m,
                found: k.size(),
            });
        }
        if labels.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: labels.len(),
            });
        }
        Ok(Self {
            kernels,
            labels,
            groups: None,
        })
    }

    /// Attaches a descriptor group name to every kernel.
    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.kernels.len() {
            return Err(Error::LengthMismatch {
                expected: self.kernels.len(),
                found: groups.len(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    /// Number of kernels.
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Number of samples.
    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn kernels(&self) -> &[GramMatrix] {
        &self.kernels
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    /// Labels as `+1.0 / -1.0`, failing if any label is outside `{+1, -1}`.
    pub fn binary_labels(&self) -> Result<Vec<f64>> {
        self.labels
            .iter()
            .map(|&l| match l {
                1 => Ok(1.0),
                -1 => Ok(-1.0),
                other => Err(Error::invalid(format!(
                    "expected binary labels in {{+1, -1}}, found {other}"
                ))),
            })
            .collect()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&l| l == 1 || l == -1)
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<i32> {
        let mut classes = self.labels.clone();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Sub-bank over `indices` with replacement labels.
    pub fn select(&self, indices: &[usize], labels: Vec<i32>) -> Result<KernelBank> {
        let kernels = self.kernels.iter().map(|k| k.select(indices)).collect();
        let bank = KernelBank::new(kernels, labels)?;
        Ok(KernelBank {
            groups: self.groups.clone(),
            ..bank
        })
    }

    /// Stabilizes then trace-normalizes every kernel to the sample count.
    ///
    /// Each kernel receives jitter `jitter_rel * trace / m` before being
    /// scaled to trace `m`. Returns the prepared bank and, per kernel, the
    /// factor applied to the raw values (so cross-kernel blocks against new
    /// samples can be scaled identically).
    pub fn prepare(&self, jitter_rel: f64) -> Result<(KernelBank, Vec<f64>)> {
        if !(jitter_rel >= 0.0) {
            return Err(Error::invalid(format!(
                "jitter must be non-negative, got {jitter_rel}"
            )));
        }
        let m = self.samples() as f64;
        let mut kernels = Vec::with_capacity(self.len());
        let mut scales = Vec::with_capacity(self.len());
        for k in &self.kernels {
            if !(k.trace > 0.0) {
                return Err(Error::NonPositiveTrace(k.trace));
            }
            let stable = stabilize(k, jitter_rel * k.trace / m);
            let scale = m / stable.trace;
            scales.push(scale);
            kernels.push(stable.scaled(scale));
        }
        Ok((
            KernelBank {
                kernels,
                labels: self.labels.clone(),
                groups: self.groups.clone(),
            },
            scales,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bank_of(mats: Vec<Array2<f64>>) -> KernelBank {
        let m = mats[0].nrows();
        let labels = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        KernelBank::new(
            mats.into_iter()
                .map(|v| GramMatrix::new(v, None).unwrap())
                .collect(),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let data =
            Dataset::new(array![[0.3, -1.0], [2.0, 5.0], [0.3, -1.0]], vec![1, -1, 1]).unwrap();
        let k = compute_gram(&data, &KernelSpec::gaussian(1.0)).unwrap();
        for i in 0..3 {
            assert_eq!(k.values()[[i, i]], 1.0);
        }
        // identical points
        assert_eq!(k.values()[[0, 2]], 1.0);
    }

    #[test]
    fn linear_kernel_orthogonal_points() {
        let data = Dataset::new(array![[1.0, 0.0], [0.0, 1.0]], vec![1, -1]).unwrap();
        let k = compute_gram(&data, &KernelSpec::linear()).unwrap();
        assert_eq!(k.values()[[0, 1]], 0.0);
        assert_eq!(k.values()[[1, 0]], 0.0);
    }

    #[test]
    fn gaussian_at_class_mean_separation() {
        let data = Dataset::new(array![[0.0], [3.0]], vec![-1, 1]).unwrap();
        let k = compute_gram(&data, &KernelSpec::gaussian(1.0)).unwrap();
        let expected = (-4.5f64).exp();
        assert!((k.values()[[0, 1]] - expected).abs() < 1e-15);
        assert!((k.values()[[0, 1]] - 0.011109).abs() < 1e-6);
    }

    #[test]
    fn polynomial_on_feature_subset() {
        let data = Dataset::new(array![[1.0, 2.0, 9.0], [3.0, 4.0, -9.0]], vec![1, -1]).unwrap();
        let spec = KernelSpec::polynomial(2, 1.0).on_features(vec![0, 1]);
        let k = compute_gram(&data, &spec).unwrap();
        assert_eq!(k.values()[[0, 1]], (3.0f64 + 8.0 + 1.0).powi(2));
    }

    #[test]
    fn invalid_specs_rejected() {
        let data = Dataset::new(array![[1.0], [2.0]], vec![1, -1]).unwrap();
        assert!(compute_gram(&data, &KernelSpec::gaussian(0.0)).is_err());
        assert!(compute_gram(&data, &KernelSpec::polynomial(0, 1.0)).is_err());
        assert!(compute_gram(&data, &KernelSpec::linear().on_features(vec![1])).is_err());
    }

    #[test]
    fn non_finite_entry_names_pair() {
        let data = Dataset::new(array![[1e200], [1e200]], vec![1, -1]).unwrap();
        let err = compute_gram(&data, &KernelSpec::polynomial(3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry { row: 0, col: 0 }));
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(array![[1.0]], vec![1]).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], vec![1, 1]).is_err());
        assert!(Dataset::new(array![[1.0], [f64::NAN]], vec![1, -1]).is_err());
    }

    #[test]
    fn trace_normalize_examples() {
        let eye = GramMatrix::new(Array2::eye(4), None).unwrap();
        assert_eq!(trace_normalize(&eye, 4.0).unwrap().values(), eye.values());

        let two = GramMatrix::new(array![[2.0, 0.0], [0.0, 2.0]], None).unwrap();
        assert_eq!(
            trace_normalize(&two, 2.0).unwrap().values(),
            &Array2::<f64>::eye(2)
        );

        let zero = GramMatrix::new(Array2::zeros((3, 3)), None).unwrap();
        assert!(matches!(
            trace_normalize(&zero, 3.0),
            Err(Error::NonPositiveTrace(_))
        ));
    }

    #[test]
    fn stabilize_examples() {
        let k = GramMatrix::new(array![[1.0, 0.5], [0.5, 1.0]], None).unwrap();
        assert_eq!(stabilize(&k, 0.0), k);

        let zero = GramMatrix::new(Array2::zeros((3, 3)), None).unwrap();
        let s = stabilize(&zero, 1e-6);
        assert_eq!(s.values(), &(Array2::<f64>::eye(3) * 1e-6));
        assert_eq!(s.trace(), 3e-6);
    }

    #[test]
    fn combine_examples() {
        let a: Array2<f64> = Array2::eye(3);
        let b = &a * 2.0;
        let bank = bank_of(vec![a.clone(), b]);
        assert_eq!(combine(&bank, &[1.0, 0.0]).unwrap().values(), &a);
        assert_eq!(
            combine(&bank, &[0.0, 0.0]).unwrap().values(),
            &Array2::<f64>::zeros((3, 3))
        );
        assert_eq!(combine(&bank, &[0.5, 0.5]).unwrap().values(), &(&a * 1.5));
        assert!(matches!(
            combine(&bank, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(GramMatrix::new(array![[1.0, 0.2], [0.3, 1.0]], None).is_err());
        assert!(GramMatrix::new(array![[1.0, 0.2, 0.0], [0.2, 1.0, 0.0]], None).is_err());
    }

    #[test]
    fn prepare_normalizes_and_reports_scales() {
        let bank = bank_of(vec![
            array![[2.0, 1.0], [1.0, 2.0]],
            array![[9.0, 0.0], [0.0, 1.0]],
        ]);
        let (prepared, scales) = bank.prepare(1e-8).unwrap();
        for (k, raw) in prepared.kernels().iter().zip(bank.kernels()) {
            assert!((k.trace() - 2.0).abs() <= 1e-9 * 2.0);
            let _ = raw;
        }
        assert!((scales[0] - 2.0 / (4.0 * (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn binary_labels_check() {
        let bank = bank_of(vec![Array2::eye(2)]);
        assert_eq!(bank.binary_labels().unwrap(), vec![1.0, -1.0]);
        let multi = KernelBank::new(
            vec![GramMatrix::new(Array2::eye(2), None).unwrap()],
            vec![0, 3],
        )
        .unwrap();
        assert!(multi.binary_labels().is_err());
        assert_eq!(multi.classes(), vec![0, 3]);
    }
}
