//! Train/test problems, the synthetic benchmark, multiclass reductions,
//! t-sweeps and solver comparisons.

mod multiclass;
mod planted;
mod report;
mod synthetic;

pub use multiclass::{
    tasks, train_multiclass, BinaryModel, BinaryTask, MulticlassModel, Scheme, TaskFailure,
};
pub use planted::{perfect_vs_noise, planted_channels, PlantedConfig};
pub use report::{
    compare_solvers, sweep_t, ComparisonReport, ComparisonRow, SolverSummary, SweepReport,
    SweepRow, WinTally,
};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelBank;
use crate::mkl::{
    cskl_train, lpnorm_mkl_train, simplemkl_train, CsklConfig, GammaStep, MklConfig, MklModel,
    MklWeights, OptTrace, Termination, TraceEntry, WeightConstraint,
};
use crate::svm::{self, compute_d};

/// Weights above this count as selected in reports.
pub const SELECTION_THRESHOLD: f64 = 1e-6;

/// Splits sample indices per class, sending `round(n_c * train_fraction)` of
/// each class (chosen by a seeded shuffle) to the training side. Both index
/// lists come back sorted.
pub fn stratified_split(
    labels: &[i32],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let cut = ((members.len() as f64) * train_fraction).round() as usize;
        let cut = cut.clamp(1.min(members.len()), members.len());
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A prepared training bank plus the matching train-by-test kernel blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestProblem {
    train: KernelBank,
    cross: Vec<Array2<f64>>,
    test_labels: Vec<i32>,
}

impl TrainTestProblem {
    /// `cross[j]` holds kernel `j` between training rows and test columns,
    /// already scaled like `train`'s kernel `j`.
    pub fn new(train: KernelBank, cross: Vec<Array2<f64>>, test_labels: Vec<i32>) -> Result<Self> {
        if cross.len() != train.len() {
            return Err(Error::LengthMismatch {
                expected: train.len(),
                found: cross.len(),
            });
        }
        let shape = (train.samples(), test_labels.len());
        if let Some(c) = cross.iter().find(|c| c.dim() != shape) {
            let (r, q) = c.dim();
            return Err(Error::invalid(format!(
                "cross block is {r}x{q}, expected {}x{}",
                shape.0, shape.1
            )));
        }
        if cross.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cross block contains non-finite values"));
        }
        Ok(Self {
            train,
            cross,
            test_labels,
        })
    }

    /// Splits a bank over all samples into a prepared training bank and test
    /// blocks scaled by the same per-kernel factors.
    pub fn from_bank(
        full: &KernelBank,
        train_idx: &[usize],
        test_idx: &[usize],
        jitter: f64,
    ) -> Result<Self> {
        let n = full.samples();
        if let Some(&i) = train_idx.iter().chain(test_idx).find(|&&i| i >= n) {
            return Err(Error::invalid(format!(
                "sample index {i} out of range for {n} samples"
            )));
        }
        let labels = full.labels();
        let sub = full.select(train_idx, train_idx.iter().map(|&i| labels[i]).collect())?;
        let (train, scales) = sub.prepare(jitter)?;
        let cross = full
            .kernels()
            .iter()
            .zip(&scales)
            .map(|(k, &s)| k.block(train_idx, test_idx) * s)
            .collect();
        let test_labels = test_idx.iter().map(|&i| labels[i]).collect();
        Self::new(train, cross, test_labels)
    }

    /// Stratified split of `full` followed by [`TrainTestProblem::from_bank`].
    pub fn split(full: &KernelBank, train_fraction: f64, seed: u64, jitter: f64) -> Result<Self> {
        let (train, test) = stratified_split(full.labels(), train_fraction, seed)?;
        Self::from_bank(full, &train, &test, jitter)
    }

    pub fn train(&self) -> &KernelBank {
        &self.train
    }

    pub fn cross(&self) -> &[Array2<f64>] {
        &self.cross
    }

    pub fn test_labels(&self) -> &[i32] {
        &self.test_labels
    }

    pub fn test_len(&self) -> usize {
        self.test_labels.len()
    }

    /// Decision values on the test set of a binary model trained on `train`.
    pub fn decision_values(&self, gamma: &[f64], solution: &svm::SvmSolution) -> Result<Vec<f64>> {
        if gamma.len() != self.cross.len() {
            return Err(Error::LengthMismatch {
                expected: self.cross.len(),
                found: gamma.len(),
            });
        }
        let mut k = Array2::<f64>::zeros((self.train.samples(), self.test_len()));
        for (c, &g) in self.cross.iter().zip(gamma) {
            if g != 0.0 {
                k.scaled_add(g, c);
            }
        }
        svm::decision_values(solution, &k, &self.train.binary_labels()?)
    }

    /// Fraction of test labels (in `{+1, -1}`) predicted correctly.
    pub fn accuracy(&self, gamma: &[f64], solution: &svm::SvmSolution) -> Result<f64> {
        let f = self.decision_values(gamma, solution)?;
        let correct = f
            .iter()
            .zip(&self.test_labels)
            .filter(|(&v, &l)| svm::predict_label(v) == f64::from(l))
            .count();
        Ok(correct as f64 / self.test_len().max(1) as f64)
    }

    /// Training samples of `task` relabeled to `+1 / -1`, with every test
    /// column kept. The training kernels are rescaled to trace equal to the
    /// task's sample count.
    pub fn binary_task(&self, task: &BinaryTask) -> Result<TrainTestProblem> {
        let labels = self.train.labels();
        let idx: Vec<usize> = (0..labels.len())
            .filter(|&i| task.covers(labels[i]))
            .collect();
        let relabeled: Vec<i32> = idx.iter().map(|&i| task.binary_label(labels[i])).collect();
        if idx.len() == labels.len() {
            let train = self.train.select(&idx, relabeled)?;
            return Self::new(train, self.cross.clone(), self.test_labels.clone());
        }
        let (train, scales) = self.train.select(&idx, relabeled)?.prepare(0.0)?;
        let all: Vec<usize> = (0..self.test_len()).collect();
        let cross = self
            .cross
            .iter()
            .zip(&scales)
            .map(|(c, &s)| {
                let rows = Array2::from_shape_fn((idx.len(), all.len()), |(a, b)| c[[idx[a], b]]);
                rows * s
            })
            .collect();
        Self::new(train, cross, self.test_labels.clone())
    }
}

/// Which weight learner to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverSpec {
    Cskl {
        t: usize,
        gamma_step: GammaStep,
    },
    #[serde(rename = "simplemkl")]
    SimpleMkl,
    #[serde(rename = "lpmkl")]
    LpMkl {
        p: f64,
    },
    /// Fixed average kernel, `gamma = 1/N`.
    Uniform,
}

impl SolverSpec {
    pub fn name(&self) -> String {
        match self {
            SolverSpec::Cskl { t, gamma_step } => match gamma_step {
                GammaStep::ReducedGradient => format!("cskl(t={t})"),
                GammaStep::LpDirection => format!("cskl-lp(t={t})"),
            },
            SolverSpec::SimpleMkl => "simplemkl".into(),
            SolverSpec::LpMkl { p } => format!("lpmkl(p={p})"),
            SolverSpec::Uniform => "uniform".into(),
        }
    }

    pub fn validate(&self, n_kernels: usize) -> Result<()> {
        match *self {
            SolverSpec::Cskl { t, .. } if t == 0 || t > n_kernels => Err(Error::invalid(format!(
                "t must lie in 1..={n_kernels}, got {t}"
            ))),
            SolverSpec::LpMkl { p } if !(p > 1.0 && p.is_finite()) => Err(Error::invalid(format!(
                "p must be a finite value above 1, got {p}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn train(&self, bank: &KernelBank, cfg: &MklConfig) -> Result<MklModel> {
        self.validate(bank.len())?;
        match *self {
            SolverSpec::Cskl { t, gamma_step } => cskl_train(
                bank,
                &CsklConfig {
                    t,
                    gamma_step,
                    mkl: cfg.clone(),
                },
            ),
            SolverSpec::SimpleMkl => simplemkl_train(bank, cfg),
            SolverSpec::LpMkl { p } => lpnorm_mkl_train(bank, p, cfg),
            SolverSpec::Uniform => uniform_model(bank, cfg),
        }
    }
}

fn uniform_model(bank: &KernelBank, cfg: &MklConfig) -> Result<MklModel> {
    cfg.validate()?;
    let constraint = WeightConstraint::UnitSimplex;
    let gamma = constraint.uniform(bank.len());
    let y = bank.binary_labels()?;
    let solution = svm::solve(&crate::kernel::combine(bank, &gamma)?, &y, &cfg.svm, None)?;
    let d = compute_d(&solution.alpha, &y, bank)?;
    let entry = TraceEntry {
        iteration: 0,
        objective: solution.dual_objective,
        gamma: gamma.clone(),
        d,
        step: 0.0,
        svm_iterations: solution.iterations,
        gap: None,
        elapsed: Default::default(),
    };
    Ok(MklModel {
        weights: MklWeights::new(gamma, constraint)?,
        solution,
        trace: OptTrace {
            entries: vec![entry],
            termination: Termination::Converged,
        },
    })
}

/// Number of distinct group names among kernels with weight above
/// [`SELECTION_THRESHOLD`].
pub fn groups_selected(gamma: &[f64], groups: Option<&[String]>) -> usize {
    let Some(groups) = groups else {
        return gamma.iter().filter(|&&g| g > SELECTION_THRESHOLD).count();
    };
    let mut names: Vec<&str> = gamma
        .iter()
        .zip(groups)
        .filter(|(&g, _)| g > SELECTION_THRESHOLD)
        .map(|(_, n)| n.as_str())
        .collect();
    names.sort_unstable();
    names.dedup();
    names.len()
}
