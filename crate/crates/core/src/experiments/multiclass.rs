use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SolverSpec, TrainTestProblem};
use crate::error::{ErrorKind, Result};
use crate::mkl::{MklConfig, MklModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneVsOne,
    OneVsRest,
}

/// Binary problem: `positive` against `negative`, or against every other
/// class when `negative` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTask {
    pub positive: i32,
    pub negative: Option<i32>,
}

impl BinaryTask {
    pub fn covers(&self, label: i32) -> bool {
        match self.negative {
            Some(n) => label == self.positive || label == n,
            None => true,
        }
    }

    pub fn binary_label(&self, label: i32) -> i32 {
        if label == self.positive {
            1
        } else {
            -1
        }
    }

    pub fn id(&self) -> String {
        match self.negative {
            Some(n) => format!("{}v{}", self.positive, n),
            None => format!("{}vR", self.positive),
        }
    }
}

/// Binary tasks for sorted distinct `classes`. Pairs put the larger class
/// id on the positive side. Two classes always give a single task.
pub fn tasks(classes: &[i32], scheme: Scheme) -> Vec<BinaryTask> {
    if classes.len() == 2 {
        return vec![BinaryTask {
            positive: classes[1],
            negative: Some(classes[0]),
        }];
    }
    match scheme {
        Scheme::OneVsOne => {
            let mut out = Vec::new();
            for (i, &a) in classes.iter().enumerate() {
                for &b in &classes[i + 1..] {
                    out.push(BinaryTask {
                        positive: b,
                        negative: Some(a),
                    });
                }
            }
            out
        }
        Scheme::OneVsRest => classes
            .iter()
            .map(|&c| BinaryTask {
                positive: c,
                negative: None,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub task: BinaryTask,
    pub model: MklModel,
    /// Decision values on every test sample.
    pub decision: Vec<f64>,
}

impl BinaryModel {
    /// Accuracy over the test samples whose labels the task covers.
    pub fn task_accuracy(&self, test_labels: &[i32]) -> f64 {
        let mut total = 0usize;
        let mut correct = 0usize;
        for (&f, &l) in self.decision.iter().zip(test_labels) {
            if !self.task.covers(l) {
                continue;
            }
            total += 1;
            let predicted = if f >= 0.0 { 1 } else { -1 };
            if predicted == self.task.binary_label(l) {
                correct += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: BinaryTask,
    pub kind: ErrorKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub scheme: Scheme,
    pub classes: Vec<i32>,
    pub models: Vec<BinaryModel>,
    pub failures: Vec<TaskFailure>,
}

impl MulticlassModel {
    /// Predicted class per test sample.
    ///
    /// One-vs-one takes the majority vote, then the largest summed decision
    /// value in favour of each tied class, then the lowest class id.
    /// One-vs-rest takes the largest decision value.
    pub fn predict(&self) -> Vec<i32> {
        let q = self.models.first().map_or(0, |m| m.decision.len());
        let k = self.classes.len();
        let slot = |c: i32| {
            self.classes
                .iter()
                .position(|&x| x == c)
                .expect("known class")
        };
        (0..q)
            .map(|s| {
                let mut votes = vec![0usize; k];
                let mut score = vec![0.0f64; k];
                let mut seen = vec![false; k];
                for m in &self.models {
                    let f = m.decision[s];
                    let p = slot(m.task.positive);
                    seen[p] = true;
                    match (self.pairwise(), m.task.negative) {
                        (true, Some(n)) => {
                            let n = slot(n);
                            seen[n] = true;
                            if f >= 0.0 {
                                votes[p] += 1;
                            } else {
                                votes[n] += 1;
                            }
                            score[p] += f;
                            score[n] -= f;
                        }
                        _ => score[p] += f,
                    }
                }
                let mut best: Option<usize> = None;
                for c in (0..k).filter(|&c| seen[c]) {
                    best = match best {
                        None => Some(c),
                        Some(b) if (votes[c], score[c]) > (votes[b], score[b]) => Some(c),
                        keep => keep,
                    };
                }
                self.classes[best.unwrap_or(0)]
            })
            .collect()
    }

    fn pairwise(&self) -> bool {
        self.scheme == Scheme::OneVsOne || self.classes.len() == 2
    }

    pub fn accuracy(&self, test_labels: &[i32]) -> f64 {
        let predicted = self.predict();
        if predicted.is_empty() {
            return 0.0;
        }
        let correct = predicted
            .iter()
            .zip(test_labels)
            .filter(|(a, b)| a == b)
            .count();
        correct as f64 / predicted.len() as f64
    }
}

/// Trains one binary model per task of `scheme`, in parallel. A task whose
/// solver fails is recorded in `failures` while the others complete.
pub fn train_multiclass(
    problem: &TrainTestProblem,
    scheme: Scheme,
    solver: &SolverSpec,
    cfg: &MklConfig,
) -> Result<MulticlassModel> {
    solver.validate(problem.train().len())?;
    cfg.validate()?;
    let classes = problem.train().classes();
    let list = tasks(&classes, scheme);
    let results: Vec<std::result::Result<BinaryModel, TaskFailure>> = list
        .par_iter()
        .map(|task| {
            let fit = || -> Result<BinaryModel> {
                let sub = problem.binary_task(task)?;
                let model = solver.train(sub.train(), cfg)?;
                let decision = sub.decision_values(model.weights.gamma(), &model.solution)?;
                Ok(BinaryModel {
                    task: *task,
                    model,
                    decision,
                })
            };
            fit().map_err(|e| TaskFailure {
                task: *task,
                kind: e.kind(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut models = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(m) => models.push(m),
            Err(f) => failures.push(f),
        }
    }
    Ok(MulticlassModel {
        scheme,
        classes,
        models,
        failures,
    })
}
