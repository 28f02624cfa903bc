use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stratified_split, TrainTestProblem};
use crate::error::{Error, Result};
use crate::kernel::{compute_gram, Dataset, KernelBank, KernelSpec};

/// Two Gaussian classes plus label-independent noise features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Samples in total, split evenly between the classes.
    pub m: usize,
    pub dim: usize,
    /// Positive class mean on every coordinate; the negative mean is 0.
    pub separation: f64,
    pub seed: u64,
    pub gaussian_widths: Vec<f64>,
    pub polynomial_degrees: Vec<u32>,
    pub polynomial_offset: f64,
    /// Noise kernels, each on its own block of `dim` noise features.
    pub noisy: usize,
    pub train_fraction: f64,
    pub jitter: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            m: 500,
            dim: 3,
            separation: 3.0,
            seed: 0,
            gaussian_widths: vec![0.5, 2.0],
            polynomial_degrees: vec![2, 3],
            polynomial_offset: 1.0,
            noisy: 2,
            train_fraction: 0.5,
            jitter: 1e-8,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `(dim + 1) * (widths + degrees) + noisy`.
    pub fn kernel_count(&self) -> usize {
        (self.dim + 1) * (self.gaussian_widths.len() + self.polynomial_degrees.len()) + self.noisy
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 4 {
            return Err(Error::invalid(format!(
                "need at least 4 samples, got {}",
                self.m
            )));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if !self.separation.is_finite() {
            return Err(Error::invalid("separation must be finite"));
        }
        if let Some(w) = self
            .gaussian_widths
            .iter()
            .find(|w| !(**w > 0.0 && w.is_finite()))
        {
            return Err(Error::invalid(format!(
                "gaussian width must be positive, got {w}"
            )));
        }
        if self.kernel_count() == 0 {
            return Err(Error::invalid("configuration yields no kernels"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::invalid(format!(
                "jitter must be non-negative, got {}",
                self.jitter
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// All samples: informative columns first, then the noise blocks.
    pub data: Dataset,
    /// Unprepared kernels over every sample.
    pub full: KernelBank,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub problem: TrainTestProblem,
}

impl SyntheticData {
    pub fn train(&self) -> Result<Dataset> {
        self.data.subset(&self.train_idx)
    }

    pub fn test(&self) -> Result<Dataset> {
        self.data.subset(&self.test_idx)
    }
}

fn median_distance(points: &Array2<f64>) -> f64 {
    let n = points.nrows();
    let mut dist = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist.push(d.sqrt());
        }
    }
    dist.sort_by(f64::total_cmp);
    let h = dist.len() / 2;
    if dist.len() % 2 == 1 {
        dist[h]
    } else {
        0.5 * (dist[h - 1] + dist[h])
    }
}

/// Kernel specs for every informative view: each single coordinate, then
/// all coordinates, each with every width and degree.
fn informative_specs(cfg: &SyntheticConfig) -> Vec<(KernelSpec, String)> {
    let mut views: Vec<(Vec<usize>, String)> = (0..cfg.dim)
        .map(|c| (vec![c], format!("dim{}", c + 1)))
        .collect();
    views.push(((0..cfg.dim).collect(), "all".into()));
    let mut specs = Vec::new();
    for (features, name) in views {
        for &w in &cfg.gaussian_widths {
            specs.push((
                KernelSpec::gaussian(w).on_features(features.clone()),
                name.clone(),
            ));
        }
        for &p in &cfg.polynomial_degrees {
            specs.push((
                KernelSpec::polynomial(p, cfg.polynomial_offset).on_features(features.clone()),
                name.clone(),
            ));
        }
    }
    specs
}

/// Draws the two-class benchmark, builds its kernel bank and splits it.
///
/// Class `-1` is `N(0, I)` and class `+1` is `N(separation * 1, I)`. Every
/// noise kernel is a gaussian on `dim` fresh standard-normal columns drawn
/// independently of the labels, with width equal to the median pairwise
/// distance of those columns.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cols = cfg.dim * (1 + cfg.noisy);
    let mut points = Array2::<f64>::zeros((cfg.m, cols));
    let labels: Vec<i32> = (0..cfg.m)
        .map(|i| if i < cfg.m / 2 { -1 } else { 1 })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        let mean = if l > 0 { cfg.separation } else { 0.0 };
        for c in 0..cols {
            let z: f64 = StandardNormal.sample(&mut rng);
            points[[i, c]] = if c < cfg.dim { mean + z } else { z };
        }
    }
    let data = Dataset::new(points, labels.clone())?;

    let mut specs = informative_specs(cfg);
    for k in 0..cfg.noisy {
        let features: Vec<usize> = (cfg.dim * (k + 1)..cfg.dim * (k + 2)).collect();
        let block = data.points().select(ndarray::Axis(1), &features);
        let width = median_distance(&block);
        specs.push((
            KernelSpec::gaussian(width).on_features(features),
            "noise".into(),
        ));
    }
    let kernels = specs
        .iter()
        .map(|(s, _)| compute_gram(&data, s))
        .collect::<Result<Vec<_>>>()?;
    let groups = specs.into_iter().map(|(_, g)| g).collect();
    let full = KernelBank::new(kernels, labels)?.with_groups(groups)?;

    let (train_idx, test_idx) = stratified_split(full.labels(), cfg.train_fraction, cfg.seed)?;
    let problem = TrainTestProblem::from_bank(&full, &train_idx, &test_idx, cfg.jitter)?;
    Ok(SyntheticData {
        data,
        full,
        train_idx,
        test_idx,
        problem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let cfg = SyntheticConfig::default();
        assert_eq!(cfg.kernel_count(), 18);
        let small = SyntheticConfig { m: 40, ..cfg };
        let s = generate_synthetic(&small).unwrap();
        assert_eq!(s.problem.train().len(), 18);
        assert_eq!(s.problem.train().samples(), 20);
        assert_eq!(s.problem.test_len(), 20);
        assert_eq!(s.data.dim(), 9);
        let groups = s.full.groups().unwrap();
        assert_eq!(groups.iter().filter(|g| *g == "noise").count(), 2);
        assert_eq!(groups.iter().filter(|g| *g == "all").count(), 4);
    }

    #[test]
    fn median_of_line() {
        let p = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 3.0]).unwrap();
        // distances 1, 3, 2
        assert_eq!(median_distance(&p), 2.0);
    }
}
