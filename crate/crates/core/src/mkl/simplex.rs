//! Closed-form and direction-finding routines on the capped simplex
//! `{gamma : sum(gamma) = t, 0 <= gamma_i <= 1}`.

use std::cmp::Ordering;

use super::{MklWeights, WeightConstraint};
use crate::error::{Error, Result};

fn check_t(len: usize, t: usize) -> Result<()> {
    if t == 0 || t > len {
        return Err(Error::invalid(format!("t must lie in 1..={len}, got {t}")));
    }
    Ok(())
}

/// Indices ordered by decreasing value, ties by index.
fn descending(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order
}

/// Sum of the `t` largest entries of `v`.
pub fn topt_value(v: &[f64], t: usize) -> Result<f64> {
    check_t(v.len(), t)?;
    Ok(descending(v).iter().take(t).map(|&i| v[i]).sum())
}

/// Maximizer of `gamma' v` over the capped simplex with sum `t`.
///
/// Entries strictly above the `t`-th largest value get weight 1, entries
/// strictly below get 0, and the remaining mass is split equally across the
/// entries tied with the `t`-th largest value.
pub fn topt_gamma(v: &[f64], t: usize) -> Result<MklWeights> {
    check_t(v.len(), t)?;
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite entry {x}")));
    }
    let order = descending(v);
    let pivot = v[order[t - 1]];
    let above = v.iter().filter(|&&x| x > pivot).count();
    let ties = v.iter().filter(|&&x| x == pivot).count();
    let share = (t - above) as f64 / ties as f64;
    let gamma = v
        .iter()
        .map(|&x| match x.partial_cmp(&pivot) {
            Some(Ordering::Greater) => 1.0,
            Some(Ordering::Less) => 0.0,
            _ => share,
        })
        .collect();
    Ok(MklWeights::new_unchecked(
        gamma,
        WeightConstraint::CappedSimplex { t },
    ))
}

/// Coordinate farthest from both box bounds, `argmin |gamma_m - 1/2|`
/// (lowest index on ties).
pub fn pivot_index(gamma: &[f64]) -> usize {
    let mut best = 0;
    for (m, g) in gamma.iter().enumerate() {
        if (g - 0.5).abs() < (gamma[best] - 0.5).abs() {
            best = m;
        }
    }
    best
}

/// Largest coordinate (lowest index on ties).
pub fn largest_index(gamma: &[f64]) -> usize {
    let mut best = 0;
    for (m, &g) in gamma.iter().enumerate() {
        if g > gamma[best] {
            best = m;
        }
    }
    best
}

/// Reduced-gradient descent direction with pivot `mu`.
///
/// Coordinates at a bound whose reduced gradient pushes them outside the box
/// are frozen; every other coordinate moves against its reduced gradient
/// `phi_m - phi_mu`, and the pivot absorbs the sum so that `sum(D) = 0`.
pub fn descent_direction(gamma: &[f64], mu: usize, phi: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; gamma.len()];
    let mut pivot = 0.0;
    for m in 0..gamma.len() {
        if m == mu {
            continue;
        }
        let reduced = phi[m] - phi[mu];
        let frozen = (gamma[m] == 0.0 && reduced > 0.0) || (gamma[m] == 1.0 && reduced < 0.0);
        if !frozen {
            d[m] = -reduced;
            pivot += reduced;
        }
    }
    d[mu] = pivot;
    d
}

/// Largest step along a direction that stays in the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBound {
    pub s_max: f64,
    /// Coordinate that reaches its bound at `s_max`.
    pub index: usize,
}

/// Maximal feasible step `S` such that `gamma + S D` stays in `[0, 1]^N`.
/// Returns `None` for the zero direction.
pub fn max_step(gamma: &[f64], d: &[f64]) -> Option<StepBound> {
    let mut best: Option<StepBound> = None;
    for (m, (&g, &dm)) in gamma.iter().zip(d).enumerate() {
        let s = if dm < 0.0 {
            -g / dm
        } else if dm > 0.0 {
            (1.0 - g) / dm
        } else {
            continue;
        };
        let s = s.max(0.0);
        if best.is_none_or(|b| s < b.s_max) {
            best = Some(StepBound { s_max: s, index: m });
        }
    }
    best
}

/// Exact minimizer of `phi' D` subject to `sum(D) = 0` and
/// `-gamma <= D <= 1 - gamma`.
///
/// `gamma + D` is a vertex of the capped simplex holding the
/// `t = round(sum(gamma))` smallest entries of `phi`. Coordinates tied with
/// the threshold start from `D = 0` and absorb the balancing mass in index
/// order, so a flat `phi` yields `D = 0`.
pub fn lp_direction(gamma: &[f64], phi: &[f64]) -> Vec<f64> {
    let n = gamma.len();
    let t = gamma.iter().sum::<f64>().round() as usize;
    let mut d = vec![0.0; n];
    if t == 0 || n == 0 {
        return gamma.iter().map(|g| -g).collect();
    }
    let t = t.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
    let threshold = phi[order[t - 1]];
    let mut tied = Vec::new();
    let mut residual = 0.0;
    for m in 0..n {
        if phi[m] < threshold {
            d[m] = 1.0 - gamma[m];
        } else if phi[m] > threshold {
            d[m] = -gamma[m];
        } else {
            tied.push(m);
        }
        residual -= d[m];
    }
    // tied coordinates carry the mass that makes sum(D) = 0
    for m in tied {
        if residual > 0.0 {
            let take = residual.min(1.0 - gamma[m]);
            d[m] = take;
            residual -= take;
        } else if residual < 0.0 {
            let give = (-residual).min(gamma[m]);
            d[m] = -give;
            residual += give;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topt_value_examples() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(topt_value(&v, 2).unwrap(), 5.0);
        assert_eq!(topt_value(&v, 1).unwrap(), 3.0);
        assert_eq!(topt_value(&v, 3).unwrap(), 6.0);
        assert!(topt_value(&v, 0).is_err());
        assert!(topt_value(&v, 4).is_err());
    }

    #[test]
    fn topt_gamma_distinct() {
        let v = [5.0, 3.0, 4.0, 1.0];
        let w = topt_gamma(&v, 2).unwrap();
        assert_eq!(w.gamma(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(w.dot(&v), 9.0);
    }

    #[test]
    fn topt_gamma_ties_split_equally() {
        let v = [4.0, 4.0, 4.0];
        let w = topt_gamma(&v, 2).unwrap();
        for &g in w.gamma() {
            assert!((g - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!((w.dot(&v) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn topt_gamma_partial_tie() {
        let v = [7.0, 2.0, 2.0, 1.0];
        let w = topt_gamma(&v, 2).unwrap();
        assert_eq!(w.gamma(), &[1.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn descent_direction_example() {
        let gamma = [0.5, 0.3, 0.2];
        let phi = [-1.0, -2.0, -3.0];
        let mu = pivot_index(&gamma);
        assert_eq!(mu, 0);
        let d = descent_direction(&gamma, mu, &phi);
        assert_eq!(d, vec![-3.0, 1.0, 2.0]);
        assert_eq!(d.iter().sum::<f64>(), 0.0);
        let descent: f64 = phi.iter().zip(&d).map(|(p, x)| p * x).sum();
        assert_eq!(descent, -5.0);
    }

    #[test]
    fn descent_direction_freezes_bounds() {
        // gamma_1 = 0 and phi_1 - phi_mu > 0
        let d = descent_direction(&[0.5, 0.0, 0.5], 0, &[-1.0, 3.0, -2.0]);
        assert_eq!(d[1], 0.0);
        // gamma_1 = 1 and phi_1 - phi_mu < 0
        let d = descent_direction(&[0.5, 1.0, 0.5], 0, &[-1.0, -3.0, -2.0]);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn descent_direction_flat_gradient() {
        let d = descent_direction(&[0.2, 0.5, 0.3], 1, &[0.7; 3]);
        assert_eq!(d, vec![0.0; 3]);
    }

    #[test]
    fn max_step_example() {
        let b = max_step(&[0.5, 0.3, 0.2], &[-3.0, 1.0, 2.0]).unwrap();
        assert!((b.s_max - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(b.index, 0);
        assert!(max_step(&[0.5, 0.5], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn max_step_pair_at_bounds() {
        // gamma at (0, 1): moving (+1, -1) is limited by both coordinates equally
        let b = max_step(&[0.0, 1.0], &[1.0, -1.0]).unwrap();
        assert_eq!(b.s_max, 1.0);
        // tighter bound wins
        let b = max_step(&[0.25, 0.75], &[1.0, -1.0]).unwrap();
        assert_eq!(b.s_max, 0.75);
        assert_eq!(b.index, 0);
        let b = max_step(&[0.25, 0.5], &[2.0, -1.0]).unwrap();
        assert_eq!(b.s_max, 0.375);
        assert_eq!(b.index, 0);
    }

    #[test]
    fn lp_direction_example() {
        let d = lp_direction(&[0.5, 0.3, 0.2], &[-1.0, -2.0, -3.0]);
        assert_eq!(d, vec![-0.5, -0.3, 0.8]);
        let value: f64 = [-1.0, -2.0, -3.0].iter().zip(&d).map(|(p, x)| p * x).sum();
        assert!((value + 1.3).abs() < 1e-15);
    }

    #[test]
    fn lp_direction_flat_gradient() {
        assert_eq!(lp_direction(&[0.9, 0.6, 0.5], &[2.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn lp_direction_capped() {
        // t = 2: the two smallest phi go to 1
        let d = lp_direction(&[0.5, 0.5, 0.5, 0.5], &[3.0, -1.0, 0.0, 2.0]);
        assert_eq!(d, vec![-0.5, 0.5, 0.5, -0.5]);
    }
}
