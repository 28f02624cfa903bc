//! Banks with a known answer: a few kernels carry the label signal and the
//! rest are label-independent noise.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stratified_split, TrainTestProblem};
use crate::error::{Error, Result};
use crate::kernel::{compute_gram, Dataset, GramMatrix, KernelBank, KernelSpec};

fn balanced_labels(m: usize) -> Vec<i32> {
    (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()
}

fn noise_kernel(rng: &mut ChaCha8Rng, labels: &[i32], dim: usize) -> Result<GramMatrix> {
    let m = labels.len();
    let points = Array2::from_shape_fn((m, dim), |_| StandardNormal.sample(&mut *rng));
    let data = Dataset::new(points, labels.to_vec())?;
    compute_gram(&data, &KernelSpec::gaussian((2.0 * dim as f64).sqrt()))
}

/// Two kernels over `m` samples: kernel 0 is `y y'` (a perfect label
/// kernel), kernel 1 is a gaussian on label-independent features. Split
/// 50/50 by `seed`.
pub fn perfect_vs_noise(m: usize, seed: u64, jitter: f64) -> Result<TrainTestProblem> {
    if m < 8 {
        return Err(Error::invalid(format!("need at least 8 samples, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = balanced_labels(m);
    let y = Array2::from_shape_fn((m, 1), |(i, _)| f64::from(labels[i]));
    let perfect = GramMatrix::new(y.dot(&y.t()), None)?;
    let noise = noise_kernel(&mut rng, &labels, 3)?;
    let full = KernelBank::new(vec![perfect, noise], labels)?
        .with_groups(vec!["label".into(), "noise".into()])?;
    TrainTestProblem::split(&full, 0.5, seed, jitter)
}

/// Unreliable copies of the label mixed with label-independent channels.
///
/// Informative channel `c` is the feature `s * y + spread * N(0, 1)` where
/// the sign `s` is `-1` with probability `flips[c]`; noise channels replace
/// `s * y` by a fair random sign. Every channel gets a unit-width gaussian
/// kernel, so noise kernels match informative ones in distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub m: usize,
    pub flips: Vec<f64>,
    pub spread: f64,
    pub noise: usize,
    /// Label kernels that see only training labels: `y y'` on the training
    /// block and zero against every test sample.
    pub memorizers: usize,
    /// Gaussian width of the noise kernels; informative kernels use 1.
    pub noise_width: f64,
    pub seed: u64,
    pub jitter: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            m: 200,
            flips: vec![0.25; 6],
            spread: 0.5,
            noise: 30,
            memorizers: 1,
            noise_width: 1.0,
            seed: 0,
            jitter: 1e-8,
        }
    }
}

impl PlantedConfig {
    pub fn kernel_count(&self) -> usize {
        self.flips.len() + self.noise + self.memorizers
    }
}

/// Builds the planted bank of `cfg` over all samples and splits it 50/50.
pub fn planted_channels(cfg: &PlantedConfig) -> Result<TrainTestProblem> {
    if cfg.m < 8 || cfg.flips.is_empty() {
        return Err(Error::invalid(
            "need at least 8 samples and one informative channel",
        ));
    }
    if let Some(f) = cfg.flips.iter().find(|f| !(0.0..0.5).contains(*f)) {
        return Err(Error::invalid(format!(
            "flip probability must lie in [0, 0.5), got {f}"
        )));
    }
    if !(cfg.spread > 0.0 && cfg.spread.is_finite()) {
        return Err(Error::invalid(format!(
            "spread must be positive, got {}",
            cfg.spread
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = balanced_labels(cfg.m);
    let n = cfg.flips.len() + cfg.noise;
    let mut features = Array2::<f64>::zeros((cfg.m, n));
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..n {
            let sign = match cfg.flips.get(c) {
                Some(&f) if rng.random::<f64>() < f => -f64::from(l),
                Some(_) => f64::from(l),
                None if rng.random::<bool>() => 1.0,
                None => -1.0,
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, c]] = sign + cfg.spread * z;
        }
    }
    let data = Dataset::new(features, labels.clone())?;
    let kernels = (0..n)
        .map(|c| {
            let width = if c < cfg.flips.len() {
                1.0
            } else {
                cfg.noise_width
            };
            compute_gram(&data, &KernelSpec::gaussian(width).on_features(vec![c]))
        })
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<String> = (0..n)
        .map(|c| {
            if c < cfg.flips.len() {
                format!("channel{}", c + 1)
            } else {
                "noise".into()
            }
        })
        .collect();
    let mut kernels = kernels;
    let mut groups: Vec<String> = groups;
    let (train_idx, test_idx) = stratified_split(&labels, 0.5, cfg.seed)?;
    for _ in 0..cfg.memorizers {
        let mut z: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        for &i in &test_idx {
            z[i] = 0.0;
        }
        kernels.push(rank_one(&z)?);
        groups.push("memorizer".into());
    }
    let full = KernelBank::new(kernels, labels)?.with_groups(groups)?;
    TrainTestProblem::from_bank(&full, &train_idx, &test_idx, cfg.jitter)
}

fn rank_one(v: &[f64]) -> Result<GramMatrix> {
    let n = v.len();
    GramMatrix::new(Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j]), None)
}
