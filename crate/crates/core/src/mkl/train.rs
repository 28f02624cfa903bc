//! Alternating optimization of SVM duals and kernel weights.
//!
//! `J(gamma)` is the optimal SVM dual objective over the combined kernel
//! `sum_j gamma_j K_j`; it is convex in `gamma`, and its gradient at the
//! current optimal `alpha` is `phi_m = -d_m / 2`. Every weight step
//! re-solves the SVM at each trial point and only ever accepts points that
//! lower `J`, so the recorded objective sequence is non-increasing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::simplex::{
    descent_direction, largest_index, lp_direction, max_step, pivot_index, topt_value,
};
use super::trace::{OptTrace, Termination, TraceEntry};
use super::{MklWeights, WeightConstraint, SNAP};
use crate::error::{Error, Result};
use crate::kernel::{combine, KernelBank};
use crate::svm::{self, compute_d, SvmConfig, SvmSolution};

/// How the capped-simplex weights are updated each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaStep {
    /// Pivoted reduced gradient with vertex walking and line search.
    ReducedGradient,
    /// Linear-program direction towards the best vertex, then line search.
    LpDirection,
}

/// Settings shared by every alternating solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklConfig {
    pub svm: SvmConfig,
    /// Stop once `|J_new - J_old| <= tolerance * max(1, |J_new|)`.
    pub tolerance: f64,
    /// Required relative optimality gap `(g_t(d) - gamma'd) / g_t(d)` at exit.
    pub gap_tolerance: f64,
    pub max_outer_iters: usize,
    /// Golden-section evaluations per line search.
    pub line_search_evals: usize,
    /// Line search stops once the bracket is below this fraction of `S_max`.
    pub line_search_tol: f64,
}

impl MklConfig {
    pub fn new(svm: SvmConfig) -> Self {
        Self {
            svm,
            tolerance: 1e-5,
            gap_tolerance: 1e-4,
            max_outer_iters: 200,
            line_search_evals: 30,
            line_search_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.svm.validate()?;
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.gap_tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "gap tolerance must be positive, got {}",
                self.gap_tolerance
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be at least 1"));
        }
        if self.line_search_evals < 2 {
            return Err(Error::invalid("line search needs at least 2 evaluations"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsklConfig {
    /// Number of kernels to select; weights satisfy `sum(gamma) = t`.
    pub t: usize,
    pub gamma_step: GammaStep,
    pub mkl: MklConfig,
}

impl CsklConfig {
    pub fn new(t: usize, svm: SvmConfig) -> Self {
        Self {
            t,
            gamma_step: GammaStep::ReducedGradient,
            mkl: MklConfig::new(svm),
        }
    }

    pub fn with_step(mut self, step: GammaStep) -> Self {
        self.gamma_step = step;
        self
    }

    pub fn validate(&self, n_kernels: usize) -> Result<()> {
        if self.t == 0 || self.t > n_kernels {
            return Err(Error::invalid(format!(
                "t must lie in 1..={n_kernels}, got {}",
                self.t
            )));
        }
        self.mkl.validate()
    }
}

/// Learned weights, the SVM at those weights, and the optimization log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklModel {
    pub weights: MklWeights,
    pub solution: SvmSolution,
    pub trace: OptTrace,
}

impl MklModel {
    pub fn objective(&self) -> f64 {
        self.solution.dual_objective
    }
}

/// Result of a single weight update.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaStepOutcome {
    pub gamma: Vec<f64>,
    pub solution: SvmSolution,
    pub step: f64,
    /// SVM solves performed.
    pub evaluations: usize,
    /// The search direction was zero: `gamma` is stationary for this `d`.
    pub stationary: bool,
}

#[derive(Debug, Clone)]
struct Point {
    gamma: Vec<f64>,
    solution: SvmSolution,
}

impl Point {
    fn objective(&self) -> f64 {
        self.solution.dual_objective
    }
}

struct Evaluator<'a> {
    bank: &'a KernelBank,
    y: &'a [f64],
    svm: &'a SvmConfig,
    evaluations: usize,
    svm_iterations: usize,
}

impl<'a> Evaluator<'a> {
    fn new(bank: &'a KernelBank, y: &'a [f64], svm: &'a SvmConfig) -> Self {
        Self {
            bank,
            y,
            svm,
            evaluations: 0,
            svm_iterations: 0,
        }
    }

    fn eval(&mut self, gamma: Vec<f64>, warm: Option<&[f64]>) -> Result<Point> {
        let k = combine(self.bank, &gamma)?;
        let solution = svm::solve(&k, self.y, self.svm, warm)?;
        self.evaluations += 1;
        self.svm_iterations += solution.iterations;
        Ok(Point { gamma, solution })
    }

    fn d(&self, point: &Point) -> Result<Vec<f64>> {
        compute_d(&point.solution.alpha, self.y, self.bank)
    }
}

/// Optimal SVM solution for fixed weights `gamma`; its dual objective is `J(gamma)`.
pub fn gamma_objective(bank: &KernelBank, gamma: &[f64], svm: &SvmConfig) -> Result<SvmSolution> {
    let y = bank.binary_labels()?;
    let k = combine(bank, gamma)?;
    svm::solve(&k, &y, svm, None)
}

/// `gamma + s d`, clamped to the box with near-bound entries snapped; the
/// coordinate `saturated` (if any) is placed exactly on the bound it reaches.
fn advance(gamma: &[f64], d: &[f64], s: f64, saturated: Option<usize>) -> Vec<f64> {
    let mut next: Vec<f64> = gamma
        .iter()
        .zip(d)
        .map(|(&g, &dm)| {
            let v = (g + s * dm).clamp(0.0, 1.0);
            if v < SNAP {
                0.0
            } else if v > 1.0 - SNAP {
                1.0
            } else {
                v
            }
        })
        .collect();
    if let Some(i) = saturated {
        next[i] = if d[i] < 0.0 { 0.0 } else { 1.0 };
    }
    next
}

fn is_zero(d: &[f64]) -> bool {
    d.iter().all(|&x| x == 0.0)
}

/// Drops entries negligible against the largest one and rebalances the
/// pivot so that `sum(D) = 0`. Returns `false` when nothing but the pivot
/// would move.
fn clean(dir: &mut [f64], mu: usize) -> bool {
    let scale = dir.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut any = false;
    let mut rest = 0.0;
    for (k, x) in dir.iter_mut().enumerate() {
        if k == mu {
            continue;
        }
        if x.abs() <= 1e-13 * scale {
            *x = 0.0;
        } else {
            any = true;
            rest += *x;
        }
    }
    dir[mu] = -rest;
    any
}

/// Golden-section search for the minimum of `J(base + s d)` on `[0, s_max]`.
/// Returns the best point seen, which is never worse than `base`, and its step.
fn line_search(
    ev: &mut Evaluator<'_>,
    base: Point,
    d: &[f64],
    s_max: f64,
    end: Option<Point>,
    cfg: &MklConfig,
) -> Result<(Point, f64)> {
    const R: f64 = 0.618_033_988_749_894_9;
    let origin = base.gamma.clone();
    let mut best = (base, 0.0);
    if let Some(end) = end {
        if end.objective() < best.0.objective() {
            best = (end, s_max);
        }
    }
    let probe = |ev: &mut Evaluator<'_>, best: &mut (Point, f64), s: f64| -> Result<f64> {
        let p = ev.eval(advance(&origin, d, s, None), Some(&best.0.solution.alpha))?;
        let f = p.objective();
        if f < best.0.objective() {
            *best = (p, s);
        }
        Ok(f)
    };
    let (mut a, mut b) = (0.0, s_max);
    let mut c = b - R * (b - a);
    let mut fc = probe(ev, &mut best, c)?;
    let mut e = a + R * (b - a);
    let mut fe = probe(ev, &mut best, e)?;
    let mut evals = 2;
    while evals < cfg.line_search_evals && b - a > cfg.line_search_tol * s_max {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - R * (b - a);
            fc = probe(ev, &mut best, c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + R * (b - a);
            fe = probe(ev, &mut best, e)?;
        }
        evals += 1;
    }
    Ok(best)
}

struct Moved {
    point: Point,
    step: f64,
    stationary: bool,
}

impl Moved {
    fn stay(point: Point, stationary: bool) -> Self {
        Self {
            point,
            step: 0.0,
            stationary,
        }
    }
}

fn gradient(d: &[f64]) -> Vec<f64> {
    d.iter().map(|x| -0.5 * x).collect()
}

/// Reduced-gradient step: walk from vertex to vertex along `D` while the full
/// step keeps lowering `J`, then line-search the last segment.
fn reduced_gradient(
    ev: &mut Evaluator<'_>,
    mut current: Point,
    d: &[f64],
    pivot: fn(&[f64]) -> usize,
    cfg: &MklConfig,
) -> Result<Moved> {
    let mu = pivot(&current.gamma);
    let mut dir = descent_direction(&current.gamma, mu, &gradient(d));
    if is_zero(&dir) || !clean(&mut dir, mu) {
        return Ok(Moved::stay(current, true));
    }
    let mut bound = match max_step(&current.gamma, &dir) {
        Some(b) if b.s_max > 0.0 => b,
        _ => return Ok(Moved::stay(current, false)),
    };
    let mut step = 0.0;
    loop {
        let next = advance(&current.gamma, &dir, bound.s_max, Some(bound.index));
        let candidate = ev.eval(next, Some(&current.solution.alpha))?;
        if candidate.objective() >= current.objective() {
            let (best, s) = line_search(ev, current, &dir, bound.s_max, Some(candidate), cfg)?;
            return Ok(Moved {
                point: best,
                step: step + s,
                stationary: false,
            });
        }
        step += bound.s_max;
        current = candidate;
        // fold every coordinate pinned at a bound into the pivot
        for (k, (dk, &g)) in dir.iter_mut().zip(&current.gamma).enumerate() {
            let pinned = (*dk < 0.0 && g == 0.0) || (*dk > 0.0 && g == 1.0);
            if !pinned {
                continue;
            }
            if k == mu {
                return Ok(Moved {
                    point: current,
                    step,
                    stationary: false,
                });
            }
            *dk = 0.0;
        }
        if !clean(&mut dir, mu) {
            return Ok(Moved {
                point: current,
                step,
                stationary: false,
            });
        }
        bound = match max_step(&current.gamma, &dir) {
            Some(b) if b.s_max > 0.0 => b,
            _ => {
                return Ok(Moved {
                    point: current,
                    step,
                    stationary: false,
                })
            }
        };
    }
}

/// Step towards the best vertex of the feasible set, then line-search.
fn lp_move(ev: &mut Evaluator<'_>, current: Point, d: &[f64], cfg: &MklConfig) -> Result<Moved> {
    let phi = gradient(d);
    let dir = lp_direction(&current.gamma, &phi);
    let descent: f64 = phi.iter().zip(&dir).map(|(p, x)| p * x).sum();
    if is_zero(&dir) || descent >= 0.0 {
        return Ok(Moved::stay(current, true));
    }
    let Some(bound) = max_step(&current.gamma, &dir) else {
        return Ok(Moved::stay(current, true));
    };
    if bound.s_max <= 0.0 {
        return Ok(Moved::stay(current, false));
    }
    let (point, step) = line_search(ev, current, &dir, bound.s_max, None, cfg)?;
    Ok(Moved {
        point,
        step,
        stationary: false,
    })
}

/// Reduced-gradient step, switching to the LP direction when it cannot move.
fn reduced_or_lp(
    ev: &mut Evaluator<'_>,
    current: Point,
    d: &[f64],
    pivot: fn(&[f64]) -> usize,
    cfg: &MklConfig,
) -> Result<Moved> {
    let moved = reduced_gradient(ev, current, d, pivot, cfg)?;
    if moved.step == 0.0 && !moved.stationary {
        return lp_move(ev, moved.point, d, cfg);
    }
    Ok(moved)
}

fn relative_gap(d: &[f64], gamma: &[f64], t: usize) -> f64 {
    let top = topt_value(d, t).unwrap_or(0.0);
    if top <= 0.0 {
        return 0.0;
    }
    let dot: f64 = d.iter().zip(gamma).map(|(a, b)| a * b).sum();
    ((top - dot) / top).max(0.0)
}

fn start(
    ev: &mut Evaluator<'_>,
    gamma: Vec<f64>,
    gap_t: Option<usize>,
    clock: Instant,
) -> Result<(Point, Vec<f64>, TraceEntry)> {
    let point = ev.eval(gamma, None)?;
    let d = ev.d(&point)?;
    let entry = TraceEntry {
        iteration: 0,
        objective: point.objective(),
        gamma: point.gamma.clone(),
        d: d.clone(),
        step: 0.0,
        svm_iterations: ev.svm_iterations,
        gap: gap_t.map(|t| relative_gap(&d, &point.gamma, t)),
        elapsed: clock.elapsed(),
    };
    Ok((point, d, entry))
}

fn finish(
    point: Point,
    constraint: WeightConstraint,
    entries: Vec<TraceEntry>,
    termination: Termination,
) -> Result<MklModel> {
    Ok(MklModel {
        weights: MklWeights::new(point.gamma, constraint)?,
        solution: point.solution,
        trace: OptTrace {
            entries,
            termination,
        },
    })
}

type StepFn<'f> = dyn FnMut(&mut Evaluator<'_>, Point, &[f64]) -> Result<Moved> + 'f;

/// Alternate SVM solves and weight steps on a simplex-type constraint until the
/// objective settles and the optimality gap for `gap_t` closes.
fn alternate(
    bank: &KernelBank,
    cfg: &MklConfig,
    constraint: WeightConstraint,
    gap_t: usize,
    step: &mut StepFn<'_>,
) -> Result<MklModel> {
    let y = bank.binary_labels()?;
    let mut ev = Evaluator::new(bank, &y, &cfg.svm);
    let clock = Instant::now();
    let (mut current, mut d, first) =
        start(&mut ev, constraint.uniform(bank.len()), Some(gap_t), clock)?;
    let mut entries = vec![first];
    let mut termination = Termination::IterationCap;
    for iteration in 1..=cfg.max_outer_iters {
        let before = current.objective();
        let spent = ev.svm_iterations;
        let moved = step(&mut ev, current, &d)?;
        current = moved.point;
        d = ev.d(&current)?;
        let gap = relative_gap(&d, &current.gamma, gap_t);
        entries.push(TraceEntry {
            iteration,
            objective: current.objective(),
            gamma: current.gamma.clone(),
            d: d.clone(),
            step: moved.step,
            svm_iterations: ev.svm_iterations - spent,
            gap: Some(gap),
            elapsed: clock.elapsed(),
        });
        let settled = (current.objective() - before).abs()
            <= cfg.tolerance * current.objective().abs().max(1.0);
        if gap <= cfg.gap_tolerance && (settled || moved.stationary) {
            termination = Termination::Converged;
            break;
        }
        if moved.step == 0.0 {
            termination = Termination::Stalled;
            break;
        }
    }
    finish(current, constraint, entries, termination)
}

/// Controlled-sparsity training: minimize `J` over the capped simplex with
/// `sum(gamma) = t`.
pub fn cskl_train(bank: &KernelBank, cfg: &CsklConfig) -> Result<MklModel> {
    cfg.validate(bank.len())?;
    let mkl = &cfg.mkl;
    let constraint = WeightConstraint::CappedSimplex { t: cfg.t };
    match cfg.gamma_step {
        GammaStep::ReducedGradient => alternate(bank, mkl, constraint, cfg.t, &mut |ev, p, d| {
            reduced_or_lp(ev, p, d, pivot_index, mkl)
        }),
        GammaStep::LpDirection => alternate(bank, mkl, constraint, cfg.t, &mut |ev, p, d| {
            lp_move(ev, p, d, mkl)
        }),
    }
}

/// SimpleMKL baseline on the unit simplex, pivoting on the largest weight.
pub fn simplemkl_train(bank: &KernelBank, cfg: &MklConfig) -> Result<MklModel> {
    cfg.validate()?;
    alternate(
        bank,
        cfg,
        WeightConstraint::UnitSimplex,
        1,
        &mut |ev, p, d| reduced_or_lp(ev, p, d, largest_index, cfg),
    )
}

/// Closed-form weights on the unit Lp ball for fixed `d`:
/// `gamma_j = d_j^(1/(p-1)) / (sum_k d_k^(p/(p-1)))^(1/p)`.
/// An all-zero `d` yields the uniform point `N^(-1/p)`.
pub fn lpnorm_weights(d: &[f64], p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!(
            "p must be a finite value above 1, got {p}"
        )));
    }
    let d: Vec<f64> = d.iter().map(|x| x.max(0.0)).collect();
    let q = p / (p - 1.0);
    let norm = d.iter().map(|x| x.powf(q)).sum::<f64>().powf(1.0 / p);
    if !(norm > 0.0) || !norm.is_finite() {
        return Ok(WeightConstraint::LpBall { p }.uniform(d.len()));
    }
    Ok(d.iter().map(|x| x.powf(1.0 / (p - 1.0)) / norm).collect())
}

/// Lp-norm MKL baseline: alternate SVM solves with the closed-form weight update.
pub fn lpnorm_mkl_train(bank: &KernelBank, p: f64, cfg: &MklConfig) -> Result<MklModel> {
    cfg.validate()?;
    lpnorm_weights(&[], p)?;
    let constraint = WeightConstraint::LpBall { p };
    let y = bank.binary_labels()?;
    let mut ev = Evaluator::new(bank, &y, &cfg.svm);
    let clock = Instant::now();
    let (mut current, mut d, first) = start(&mut ev, constraint.uniform(bank.len()), None, clock)?;
    let mut entries = vec![first];
    let mut termination = Termination::IterationCap;
    for iteration in 1..=cfg.max_outer_iters {
        let before = current.objective();
        let spent = ev.svm_iterations;
        let gamma = lpnorm_weights(&d, p)?;
        let step = gamma
            .iter()
            .zip(&current.gamma)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        current = ev.eval(gamma, Some(&current.solution.alpha))?;
        d = ev.d(&current)?;
        entries.push(TraceEntry {
            iteration,
            objective: current.objective(),
            gamma: current.gamma.clone(),
            d: d.clone(),
            step,
            svm_iterations: ev.svm_iterations - spent,
            gap: None,
            elapsed: clock.elapsed(),
        });
        if (current.objective() - before).abs()
            <= cfg.tolerance * current.objective().abs().max(1.0)
        {
            termination = Termination::Converged;
            break;
        }
    }
    finish(current, constraint, entries, termination)
}

fn single_step(
    bank: &KernelBank,
    gamma: &[f64],
    solution: &SvmSolution,
    cfg: &MklConfig,
    step: fn(&mut Evaluator<'_>, Point, &[f64], &MklConfig) -> Result<Moved>,
) -> Result<GammaStepOutcome> {
    cfg.validate()?;
    if gamma.len() != bank.len() {
        return Err(Error::LengthMismatch {
            expected: bank.len(),
            found: gamma.len(),
        });
    }
    let y = bank.binary_labels()?;
    if solution.alpha.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: solution.alpha.len(),
        });
    }
    let mut ev = Evaluator::new(bank, &y, &cfg.svm);
    let point = Point {
        gamma: gamma.to_vec(),
        solution: solution.clone(),
    };
    let d = ev.d(&point)?;
    let moved = step(&mut ev, point, &d, cfg)?;
    Ok(GammaStepOutcome {
        gamma: moved.point.gamma,
        solution: moved.point.solution,
        step: moved.step,
        evaluations: ev.evaluations,
        stationary: moved.stationary,
    })
}

/// One reduced-gradient weight update from `gamma`, where `solution` is the
/// optimal SVM at `gamma`. Falls back to the LP direction when the pivot is
/// blocked at a bound.
pub fn reduced_gradient_gamma_step(
    bank: &KernelBank,
    gamma: &[f64],
    solution: &SvmSolution,
    cfg: &MklConfig,
) -> Result<GammaStepOutcome> {
    single_step(bank, gamma, solution, cfg, |ev, p, d, cfg| {
        reduced_or_lp(ev, p, d, pivot_index, cfg)
    })
}

/// One LP-direction weight update from `gamma`.
pub fn lp_gamma_step(
    bank: &KernelBank,
    gamma: &[f64],
    solution: &SvmSolution,
    cfg: &MklConfig,
) -> Result<GammaStepOutcome> {
    single_step(bank, gamma, solution, cfg, lp_move)
}
