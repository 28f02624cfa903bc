//! Sequential minimal optimization with second-order working set selection.
//!
//! Both variants minimize `f(a) = 1/2 a' Q a + p' a` with `Q_ij = y_i y_j K_ij`
//! under `0 <= a_i <= u` and `y' a = 0`. The C-SVM uses `p = -1`, `u = C`;
//! the nu-SVM uses `p = 0`, `u = 1/m` and additionally keeps `sum(a) = nu`,
//! which is preserved by restricting working pairs to a single class.

use ndarray::Array2;

use super::{SvmConfig, SvmSolution};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

struct Smo<'a> {
    k: &'a Array2<f64>,
    y: &'a [f64],
    upper: f64,
    linear: f64,
    same_class: bool,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(
        k: &'a Array2<f64>,
        y: &'a [f64],
        upper: f64,
        linear: f64,
        same_class: bool,
        alpha: Vec<f64>,
    ) -> Self {
        let mut smo = Self {
            k,
            y,
            upper,
            linear,
            same_class,
            grad: Vec::new(),
            alpha,
        };
        smo.grad = smo.fresh_gradient();
        smo
    }

    fn fresh_gradient(&self) -> Vec<f64> {
        let m = self.y.len();
        let mut grad = vec![self.linear; m];
        for (j, &a) in self.alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let coef = a * self.y[j];
            let col = self.k.row(j);
            for (i, g) in grad.iter_mut().enumerate() {
                *g += self.y[i] * coef * col[i];
            }
        }
        grad
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.upper
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.upper
        }
    }

    /// Working pair within labels matching `class` (all labels when
    /// `None`): `i` is the maximal violator in the up set, `j` maximizes the
    /// second-order decrease `b^2 / a` over the low set. Also returns the
    /// maximal violation `max(-y G | up) - min(-y G | low)`.
    fn pair_in(&self, class: Option<f64>) -> (Option<(usize, usize, f64)>, f64) {
        let members = || (0..self.y.len()).filter(move |&t| class.is_none_or(|c| c == self.y[t]));
        let mut gmax = f64::NEG_INFINITY;
        let mut best_i = None;
        let mut gmin = f64::INFINITY;
        for t in members() {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                best_i = Some(t);
            }
            if self.in_low(t) && v < gmin {
                gmin = v;
            }
        }
        let violation = gmax - gmin;
        let Some(i) = best_i else {
            return (None, violation);
        };
        let kii = self.k[[i, i]];
        let ki = self.k.row(i);
        let mut best: Option<(usize, usize, f64)> = None;
        for j in members() {
            if !self.in_low(j) {
                continue;
            }
            let b = gmax + self.y[j] * self.grad[j];
            if b <= 0.0 {
                continue;
            }
            let mut a = kii + self.k[[j, j]] - 2.0 * ki[j];
            if a <= 0.0 {
                a = TAU;
            }
            let gain = b * b / a;
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((i, j, gain));
            }
        }
        (best, violation)
    }

    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let classes: &[Option<f64>] = if self.same_class {
            &[Some(1.0), Some(-1.0)]
        } else {
            &[None]
        };
        let mut pair: Option<(usize, usize, f64)> = None;
        let mut violation = f64::NEG_INFINITY;
        for &c in classes {
            let (p, v) = self.pair_in(c);
            violation = violation.max(v);
            if let Some(p) = p {
                if pair.is_none_or(|q| p.2 > q.2) {
                    pair = Some(p);
                }
            }
        }
        (pair.map(|(i, j, _)| (i, j)), violation)
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (k, y, c) = (self.k, self.y, self.upper);
        let old_i = self.alpha[i];
        let old_j = self.alpha[j];
        let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let di = (ai - old_i) * y[i];
        let dj = (aj - old_j) * y[j];
        let (ri, rj) = (k.row(i), k.row(j));
        for (t, g) in self.grad.iter_mut().enumerate() {
            *g += y[t] * (ri[t] * di + rj[t] * dj);
        }
    }

    fn run(&mut self, tol: f64, cap: usize) -> Result<(usize, f64)> {
        let mut iterations = 0;
        loop {
            let (pair, violation) = self.select();
            let Some((i, j)) = pair else {
                return Ok((iterations, 0.0));
            };
            if violation <= tol {
                return Ok((iterations, violation.max(0.0)));
            }
            if iterations >= cap {
                return Err(Error::NonConvergence {
                    iterations,
                    violation,
                });
            }
            self.update_pair(i, j);
            iterations += 1;
        }
    }

    fn objective(&self, grad: &[f64]) -> f64 {
        let half: f64 = self
            .alpha
            .iter()
            .zip(grad)
            .map(|(&a, &g)| a * (g + self.linear))
            .sum::<f64>()
            * 0.5;
        -half
    }
}

fn midpoint(ub: f64, lb: f64) -> f64 {
    match (ub.is_finite(), lb.is_finite()) {
        (true, true) => 0.5 * (ub + lb),
        (true, false) => ub,
        (false, true) => lb,
        (false, false) => 0.0,
    }
}

/// Offset `rho` with `y_i f(x_i) = rho` on free vectors, averaged; when no
/// vector is free, the midpoint of the interval the bounded ones allow.
fn free_average(entries: impl Iterator<Item = (f64, f64, f64)>, upper: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut count) = (0.0, 0usize);
    // (alpha, label, value)
    for (a, l, v) in entries {
        if a >= upper {
            if l < 0.0 {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        } else if a <= 0.0 {
            if l > 0.0 {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        } else {
            sum += v;
            count += 1;
        }
    }
    if count > 0 {
        sum / count as f64
    } else {
        midpoint(ub, lb)
    }
}

fn feasible_warm(
    warm: Option<&[f64]>,
    y: &[f64],
    upper: f64,
    total: Option<f64>,
) -> Option<Vec<f64>> {
    let warm = warm?;
    if warm.len() != y.len() {
        return None;
    }
    let slack = 1e-12 * upper.max(1.0);
    if warm.iter().any(|&a| !(a >= -slack && a <= upper + slack)) {
        return None;
    }
    let alpha: Vec<f64> = warm.iter().map(|&a| a.clamp(0.0, upper)).collect();
    let sum: f64 = alpha.iter().sum();
    let balance: f64 = alpha.iter().zip(y).map(|(a, l)| a * l).sum();
    if balance.abs() > 1e-10 * sum.max(1.0) {
        return None;
    }
    if let Some(nu) = total {
        if (sum - nu).abs() > 1e-10 {
            return None;
        }
    }
    Some(alpha)
}

fn finish(
    smo: Smo<'_>,
    iterations: usize,
    violation: f64,
    bias: f64,
    margin: Option<f64>,
    tol: f64,
) -> SvmSolution {
    let grad = smo.fresh_gradient();
    let dual_objective = smo.objective(&grad);
    let support_indices = smo
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > tol)
        .map(|(i, _)| i)
        .collect();
    SvmSolution {
        alpha: smo.alpha,
        bias,
        dual_objective,
        support_indices,
        margin,
        iterations,
        kkt_violation: violation,
    }
}

pub(super) fn solve_c(
    k: &Array2<f64>,
    y: &[f64],
    c: f64,
    cfg: &SvmConfig,
    warm: Option<&[f64]>,
) -> Result<SvmSolution> {
    let m = y.len();
    let alpha = feasible_warm(warm, y, c, None).unwrap_or_else(|| vec![0.0; m]);
    let mut smo = Smo::new(k, y, c, -1.0, false, alpha);
    let (iterations, violation) = smo.run(cfg.kkt_tolerance, cfg.iteration_cap(m))?;
    let grad = smo.fresh_gradient();
    let rho = free_average((0..m).map(|i| (smo.alpha[i], y[i], y[i] * grad[i])), c);
    Ok(finish(
        smo,
        iterations,
        violation,
        -rho,
        None,
        cfg.kkt_tolerance,
    ))
}

pub(super) fn solve_nu(
    k: &Array2<f64>,
    y: &[f64],
    nu: f64,
    cfg: &SvmConfig,
    warm: Option<&[f64]>,
) -> Result<SvmSolution> {
    let m = y.len();
    let upper = 1.0 / m as f64;
    let alpha = feasible_warm(warm, y, upper, Some(nu)).unwrap_or_else(|| {
        let mut alpha = vec![0.0; m];
        let (mut left_pos, mut left_neg) = (nu / 2.0, nu / 2.0);
        for (a, &l) in alpha.iter_mut().zip(y) {
            let left = if l > 0.0 {
                &mut left_pos
            } else {
                &mut left_neg
            };
            *a = upper.min(*left);
            *left -= *a;
        }
        alpha
    });
    let mut smo = Smo::new(k, y, upper, 0.0, true, alpha);
    let (iterations, violation) = smo.run(cfg.kkt_tolerance, cfg.iteration_cap(m))?;
    let grad = smo.fresh_gradient();
    // Per class, the gradient on free vectors equals rho -/+ b.
    let class_level = |class: f64| {
        free_average(
            (0..m)
                .filter(|&i| y[i] == class)
                .map(|i| (smo.alpha[i], 1.0, grad[i])),
            upper,
        )
    };
    let r_pos = class_level(1.0);
    let r_neg = class_level(-1.0);
    let rho = 0.5 * (r_pos + r_neg);
    let bias = 0.5 * (r_neg - r_pos);
    Ok(finish(
        smo,
        iterations,
        violation,
        bias,
        Some(rho),
        cfg.kkt_tolerance,
    ))
}
