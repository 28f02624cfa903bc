use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SELECTION_THRESHOLD;
use super::{
    groups_selected, tasks, train_multiclass, MulticlassModel, Scheme, SolverSpec, TrainTestProblem,
};
use crate::error::{Error, Result};
use crate::mkl::{GammaStep, MklConfig, Termination};

/// Fields shared by sweep rows, derived from one multiclass fit.
struct Fit {
    accuracy: f64,
    objective: f64,
    gamma: Vec<f64>,
    selected: usize,
    groups_selected: usize,
    termination: Termination,
    outer_iterations: usize,
    failed_tasks: usize,
}

fn summarize(fit: &MulticlassModel, problem: &TrainTestProblem) -> Result<Fit> {
    let n = problem.train().len();
    let mut gamma = vec![0.0; n];
    let mut any = vec![0.0f64; n];
    let mut objective = 0.0;
    let mut termination = Termination::Converged;
    let mut outer_iterations = 0;
    for m in &fit.models {
        m.model.weights.validate()?;
        for (j, &g) in m.model.weights.gamma().iter().enumerate() {
            gamma[j] += g / fit.models.len() as f64;
            any[j] = any[j].max(g);
        }
        objective += m.model.objective();
        outer_iterations = outer_iterations.max(m.model.trace.entries.len().saturating_sub(1));
        if termination == Termination::Converged {
            termination = m.model.trace.termination;
        }
    }
    Ok(Fit {
        accuracy: fit.accuracy(problem.test_labels()),
        objective,
        gamma,
        selected: any.iter().filter(|&&g| g > SELECTION_THRESHOLD).count(),
        groups_selected: groups_selected(&any, problem.train().groups()),
        termination,
        outer_iterations,
        failed_tasks: fit.failures.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: usize,
    pub t: usize,
    /// Test accuracy of the (multiclass) prediction.
    pub accuracy: f64,
    /// Final dual objective, summed over binary tasks.
    pub objective: f64,
    /// Final weights, averaged over binary tasks.
    pub gamma: Vec<f64>,
    /// Kernels with weight above the selection threshold in any task.
    pub selected: usize,
    pub groups_selected: usize,
    pub termination: Termination,
    pub outer_iterations: usize,
    pub failed_tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Concatenates single-run reports, numbering runs in order.
    pub fn merge(runs: Vec<SweepReport>) -> SweepReport {
        let rows = runs
            .into_iter()
            .enumerate()
            .flat_map(|(r, rep)| {
                rep.rows
                    .into_iter()
                    .map(move |row| SweepRow { run: r, ..row })
            })
            .collect();
        SweepReport { rows }
    }

    pub fn t_values(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.rows.iter().map(|r| r.t).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn mean_accuracy(&self, t: usize) -> Option<f64> {
        let acc: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.t == t)
            .map(|r| r.accuracy)
            .collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }

    /// `(t, mean accuracy)` for every swept `t`.
    pub fn summary(&self) -> Vec<(usize, f64)> {
        self.t_values()
            .into_iter()
            .filter_map(|t| self.mean_accuracy(t).map(|a| (t, a)))
            .collect()
    }

    /// Highest mean accuracy over `lo..=hi` (smallest `t` on ties).
    pub fn best_in(&self, lo: usize, hi: usize) -> Option<(usize, f64)> {
        self.summary()
            .into_iter()
            .filter(|&(t, _)| t >= lo && t <= hi)
            .fold(None, |best, (t, a)| match best {
                Some((_, b)) if b >= a => best,
                _ => Some((t, a)),
            })
    }

    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.gamma.len());
        let mut out = String::from("run,t,accuracy,objective,selected,groups_selected,termination,outer_iterations,failed_tasks");
        for j in 0..n {
            let _ = write!(out, ",gamma_{}", j + 1);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                r.t,
                r.accuracy,
                r.objective,
                r.selected,
                r.groups_selected,
                termination_name(r.termination),
                r.outer_iterations,
                r.failed_tasks
            );
            for g in &r.gamma {
                let _ = write!(out, ",{g}");
            }
            out.push('\n');
        }
        out
    }

    /// Two columns, `t,mean_accuracy`, for plotting.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("t,mean_accuracy\n");
        for (t, a) in self.summary() {
            let _ = writeln!(out, "{t},{a}");
        }
        out
    }
}

pub(crate) fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::Stalled => "stalled",
        Termination::IterationCap => "iteration_cap",
    }
}

/// Trains CSKL for every `t` in `t_values` on the training side of
/// `problem` and scores each fit on its test side. The `t` values run in
/// parallel; rows come back in the order given.
pub fn sweep_t(
    problem: &TrainTestProblem,
    t_values: &[usize],
    gamma_step: GammaStep,
    scheme: Scheme,
    cfg: &MklConfig,
) -> Result<SweepReport> {
    let n = problem.train().len();
    if t_values.is_empty() {
        return Err(Error::invalid("no t values to sweep"));
    }
    if let Some(&t) = t_values.iter().find(|&&t| t == 0 || t > n) {
        return Err(Error::invalid(format!("t must lie in 1..={n}, got {t}")));
    }
    cfg.validate()?;
    let rows = t_values
        .par_iter()
        .map(|&t| {
            let solver = SolverSpec::Cskl { t, gamma_step };
            let fit = train_multiclass(problem, scheme, &solver, cfg)?;
            let s = summarize(&fit, problem)?;
            Ok(SweepRow {
                run: 0,
                t,
                accuracy: s.accuracy,
                objective: s.objective,
                gamma: s.gamma,
                selected: s.selected,
                groups_selected: s.groups_selected,
                termination: s.termination,
                outer_iterations: s.outer_iterations,
                failed_tasks: s.failed_tasks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: usize,
    pub task: String,
    pub solver: String,
    /// Accuracy on the test samples the task covers; `None` if it failed.
    pub accuracy: Option<f64>,
    /// Accuracy divided by the reference solver's accuracy on the same task.
    pub ratio: Option<f64>,
    pub objective: Option<f64>,
    pub selected: Option<usize>,
    pub groups_selected: Option<usize>,
    pub error: Option<String>,
}

/// Outcome counts of one solver against the reference over all tasks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WinTally {
    pub solver: String,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Tasks where either side failed.
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub mean_task_accuracy: f64,
    /// Mean over runs of the combined multiclass accuracy.
    pub mean_accuracy: f64,
    pub failed_tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub solvers: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// Multiclass accuracy per run, in solver order.
    pub run_accuracy: Vec<Vec<f64>>,
}

impl ComparisonReport {
    pub fn merge(runs: Vec<ComparisonReport>) -> ComparisonReport {
        let mut out = ComparisonReport::default();
        for (r, rep) in runs.into_iter().enumerate() {
            out.reference = rep.reference;
            out.solvers = rep.solvers;
            out.run_accuracy.extend(rep.run_accuracy);
            out.rows.extend(
                rep.rows
                    .into_iter()
                    .map(|row| ComparisonRow { run: r, ..row }),
            );
        }
        out
    }

    fn task_keys(&self) -> Vec<(usize, String)> {
        let mut keys: Vec<(usize, String)> = Vec::new();
        for row in &self.rows {
            let key = (row.run, row.task.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys
    }

    fn accuracy_of(&self, key: &(usize, String), solver: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.run == key.0 && r.task == key.1 && r.solver == solver)
            .and_then(|r| r.accuracy)
    }

    /// Wins, losses and ties of every non-reference solver.
    pub fn tallies(&self) -> Vec<WinTally> {
        let keys = self.task_keys();
        self.solvers
            .iter()
            .skip(1)
            .map(|s| {
                let mut tally = WinTally {
                    solver: s.clone(),
                    ..Default::default()
                };
                for key in &keys {
                    match (
                        self.accuracy_of(key, s),
                        self.accuracy_of(key, &self.reference),
                    ) {
                        (Some(a), Some(b)) if a > b => tally.wins += 1,
                        (Some(a), Some(b)) if a < b => tally.losses += 1,
                        (Some(_), Some(_)) => tally.ties += 1,
                        _ => tally.undecided += 1,
                    }
                }
                tally
            })
            .collect()
    }

    pub fn summaries(&self) -> Vec<SolverSummary> {
        self.solvers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let acc: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| &r.solver == s)
                    .filter_map(|r| r.accuracy)
                    .collect();
                let runs: Vec<f64> = self.run_accuracy.iter().map(|r| r[i]).collect();
                SolverSummary {
                    solver: s.clone(),
                    mean_task_accuracy: mean(&acc),
                    mean_accuracy: mean(&runs),
                    failed_tasks: self
                        .rows
                        .iter()
                        .filter(|r| &r.solver == s && r.accuracy.is_none())
                        .count(),
                }
            })
            .collect()
    }

    /// Per task, the solver with the highest accuracy (`tie` when shared)
    /// and the number of descriptor groups it selected.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("run,task,winner,groups_selected\n");
        for key in self.task_keys() {
            let rows: Vec<&ComparisonRow> = self
                .rows
                .iter()
                .filter(|r| r.run == key.0 && r.task == key.1 && r.accuracy.is_some())
                .collect();
            let Some(top) = rows.iter().filter_map(|r| r.accuracy).reduce(f64::max) else {
                continue;
            };
            let winners: Vec<&&ComparisonRow> =
                rows.iter().filter(|r| r.accuracy == Some(top)).collect();
            if winners.len() == 1 {
                let w = winners[0];
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    key.0,
                    key.1,
                    w.solver,
                    w.groups_selected.unwrap_or(0)
                );
            } else {
                let _ = writeln!(out, "{},{},tie,", key.0, key.1);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "run,task,solver,accuracy,ratio,objective,selected,groups_selected,error\n",
        );
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                r.task,
                csv_field(&r.solver),
                opt(r.accuracy.map(|v| v.to_string())),
                opt(r.ratio.map(|v| v.to_string())),
                opt(r.objective.map(|v| v.to_string())),
                opt(r.selected.map(|v| v.to_string())),
                opt(r.groups_selected.map(|v| v.to_string())),
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Trains every solver on every binary task of `problem` and tabulates
/// per-task accuracies against the first solver.
pub fn compare_solvers(
    problem: &TrainTestProblem,
    solvers: &[SolverSpec],
    scheme: Scheme,
    cfg: &MklConfig,
) -> Result<ComparisonReport> {
    if solvers.len() < 2 {
        return Err(Error::invalid("comparison needs at least two solvers"));
    }
    for s in solvers {
        s.validate(problem.train().len())?;
    }
    let fits = solvers
        .par_iter()
        .map(|s| train_multiclass(problem, scheme, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = solvers.iter().map(SolverSpec::name).collect();
    let groups = problem.train().groups();
    let mut rows = Vec::new();
    for task in tasks(&problem.train().classes(), scheme) {
        let mut reference = None;
        for (i, (fit, name)) in fits.iter().zip(&names).enumerate() {
            let model = fit.models.iter().find(|m| m.task == task);
            let row = match model {
                Some(m) => {
                    m.model.weights.validate()?;
                    let acc = m.task_accuracy(problem.test_labels());
                    if i == 0 {
                        reference = Some(acc);
                    }
                    let gamma = m.model.weights.gamma();
                    ComparisonRow {
                        run: 0,
                        task: task.id(),
                        solver: name.clone(),
                        accuracy: Some(acc),
                        ratio: reference.filter(|&r| r > 0.0).map(|r| acc / r),
                        objective: Some(m.model.objective()),
                        selected: Some(gamma.iter().filter(|&&g| g > SELECTION_THRESHOLD).count()),
                        groups_selected: Some(groups_selected(gamma, groups)),
                        error: None,
                    }
                }
                None => ComparisonRow {
                    run: 0,
                    task: task.id(),
                    solver: name.clone(),
                    accuracy: None,
                    ratio: None,
                    objective: None,
                    selected: None,
                    groups_selected: None,
                    error: fit
                        .failures
                        .iter()
                        .find(|f| f.task == task)
                        .map(|f| f.error.clone()),
                },
            };
            rows.push(row);
        }
    }
    let run_accuracy = vec![fits
        .iter()
        .map(|f| f.accuracy(problem.test_labels()))
        .collect()];
    Ok(ComparisonReport {
        reference: names[0].clone(),
        solvers: names,
        rows,
        run_accuracy,
    })
}
