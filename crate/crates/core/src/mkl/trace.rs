use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Objective change and optimality gap both below tolerance.
    Converged,
    /// No step could improve the objective while the gap stayed open.
    Stalled,
    /// `max_outer_iters` reached.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `J(gamma)` after this iteration's weight update.
    pub objective: f64,
    pub gamma: Vec<f64>,
    /// Quadratic forms at the solution for `gamma`.
    pub d: Vec<f64>,
    /// Total step length taken along the search directions.
    pub step: f64,
    /// SMO pair updates spent in this iteration.
    pub svm_iterations: usize,
    /// `(g_t(d) - gamma' d) / g_t(d)`, or `None` where no gap is defined.
    pub gap: Option<f64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Per-iteration audit log of an alternating optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub entries: Vec<TraceEntry>,
    pub termination: Termination,
}

impl OptTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.objective).collect()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    /// Largest increase between consecutive objectives (0 if non-increasing).
    pub fn max_increase(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(0.0, f64::max)
    }

    /// CSV with columns `iteration,objective,step,gamma_sum,nonzero`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,step,gamma_sum,nonzero\n");
        for e in &self.entries {
            let sum: f64 = e.gamma.iter().sum();
            let nonzero = e.gamma.iter().filter(|&&g| g > 0.0).count();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.iteration, e.objective, e.step, sum, nonzero
            );
        }
        out
    }
}
