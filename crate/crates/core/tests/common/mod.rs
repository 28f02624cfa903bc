//! Reference solvers and fixtures shared by the integration tests. None of
//! these reuse library code paths beyond building kernels and calling the
//! SVM at a fixed combination.

#![allow(dead_code)]

use cskl::kernel::{compute_gram, Dataset, GramMatrix, KernelBank, KernelSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m` labels, alternating so both classes are present.
pub fn alternating_labels(m: usize) -> Vec<i32> {
    (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()
}

/// Random points with a class-dependent shift along the first `dim / 2`
/// coordinates.
pub fn random_dataset(rng: &mut ChaCha8Rng, m: usize, dim: usize, shift: f64) -> Dataset {
    let labels = alternating_labels(m);
    let points = Array2::from_shape_fn((m, dim), |(i, c)| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        if c < dim.div_ceil(2) {
            z + shift * f64::from(labels[i])
        } else {
            z
        }
    });
    Dataset::new(points, labels).unwrap()
}

/// A normalized, stabilized bank of `n` assorted kernels over `m` samples.
pub fn random_bank(seed: u64, n: usize, m: usize) -> KernelBank {
    let mut rng = rng(seed);
    let dim = 3;
    let shift = rng.random_range(0.3..1.5);
    let data = random_dataset(&mut rng, m, dim, shift);
    let kernels: Vec<GramMatrix> = (0..n)
        .map(|j| {
            let features = vec![rng.random_range(0..dim)];
            let spec = match j % 3 {
                0 => KernelSpec::gaussian(rng.random_range(0.3..3.0)),
                1 => KernelSpec::polynomial(rng.random_range(1..=3), 1.0).on_features(features),
                _ => KernelSpec::gaussian(rng.random_range(0.3..3.0)).on_features(features),
            };
            compute_gram(&data, &spec).unwrap()
        })
        .collect();
    let bank = KernelBank::new(kernels, data.labels().to_vec()).unwrap();
    bank.prepare(1e-8).unwrap().0
}

/// Random symmetric positive definite matrix `A A' / dim + ridge I`.
pub fn random_spd(rng: &mut ChaCha8Rng, m: usize, ridge: f64) -> Array2<f64> {
    let a = Array2::from_shape_fn((m, m + 2), |_| StandardNormal.sample(&mut *rng));
    let mut k = a.dot(&a.t()) / (m + 2) as f64;
    for i in 0..m {
        k[[i, i]] += ridge;
    }
    k
}

pub fn binary_y(labels: &[i32]) -> Vec<f64> {
    labels.iter().map(|&l| f64::from(l)).collect()
}

// ---------------------------------------------------------------------------
// linear programs over the capped simplex

/// `max gamma' v` over `{sum(gamma) = t, 0 <= gamma <= 1}` by enumerating
/// the 0/1 vertices with exactly `t` ones.
pub fn capped_simplex_max(v: &[f64], t: usize) -> f64 {
    let n = v.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != t {
            continue;
        }
        let s: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| v[i]).sum();
        best = best.max(s);
    }
    best
}

/// `min phi' D` over `{sum(D) = 0, -gamma <= D <= 1 - gamma}`. A vertex has
/// every coordinate but one at a bound, so enumerate the free coordinate
/// and the bound pattern of the rest.
pub fn direction_lp_min(gamma: &[f64], phi: &[f64]) -> f64 {
    let n = gamma.len();
    let mut best = f64::INFINITY;
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut d = vec![0.0; n];
            let mut bit = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                d[i] = if mask & (1 << bit) != 0 {
                    1.0 - gamma[i]
                } else {
                    -gamma[i]
                };
                bit += 1;
            }
            let rest: f64 = d.iter().sum();
            d[free] = -rest;
            if d[free] < -gamma[free] - 1e-12 || d[free] > 1.0 - gamma[free] + 1e-12 {
                continue;
            }
            best = best.min(phi.iter().zip(&d).map(|(p, x)| p * x).sum());
        }
    }
    best
}

// ---------------------------------------------------------------------------
// SVM dual by accelerated projected gradient

/// `clip(z - lambda w, 0, upper)` with `lambda` chosen by bisection so that
/// `w' a = target`; `w` has entries in `{+1, -1}` or all ones on a subset.
fn project_hyperplane(z: &[f64], w: &[f64], upper: f64, target: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        z.iter()
            .zip(w)
            .map(|(&zi, &wi)| {
                if wi == 0.0 {
                    zi
                } else {
                    (zi - lambda * wi).clamp(0.0, upper)
                }
            })
            .collect()
    };
    let value = |a: &[f64]| -> f64 { a.iter().zip(w).map(|(x, wi)| x * wi).sum() };
    let bound = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) + upper + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // value(at(lambda)) is non-increasing in lambda
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(&at(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * bound {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

fn largest_eigenvalue(q: &Array2<f64>) -> f64 {
    let m = q.nrows();
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| q[[i, j]] * v[j]).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

/// Box `[0, upper]` plus either `y' a = 0` (`nu = None`) or, for the nu
/// variant, `sum` over each class equal to `nu / 2`.
fn project(z: &[f64], y: &[f64], upper: f64, nu: Option<f64>) -> Vec<f64> {
    match nu {
        None => project_hyperplane(z, y, upper, 0.0),
        Some(nu) => {
            let mut out = z.to_vec();
            for class in [1.0, -1.0] {
                let w: Vec<f64> = y
                    .iter()
                    .map(|&l| if l == class { 1.0 } else { 0.0 })
                    .collect();
                let part = project_hyperplane(z, &w, upper, nu / 2.0);
                for i in 0..z.len() {
                    if y[i] == class {
                        out[i] = part[i];
                    }
                }
            }
            out
        }
    }
}

/// Optimal SVM dual value, `max -1/2 a'Qa - linear * sum(a)` over the
/// feasible set, with `Q = YKY`. `linear = -1` for the C-SVM and `0` for
/// the nu-SVM, matching `sum(a) - 1/2 a'Qa` and `-1/2 a'Qa`.
pub fn svm_dual_oracle(k: &Array2<f64>, y: &[f64], upper: f64, nu: Option<f64>) -> f64 {
    let m = y.len();
    let q = Array2::from_shape_fn((m, m), |(i, j)| y[i] * y[j] * k[[i, j]]);
    let linear = if nu.is_some() { 0.0 } else { -1.0 };
    let f = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += a[i] * q[[i, j]] * a[j];
            }
        }
        0.5 * quad + linear * a.iter().sum::<f64>()
    };
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| (0..m).map(|j| q[[i, j]] * a[j]).sum::<f64>() + linear)
            .collect()
    };
    let step = 1.0 / (largest_eigenvalue(&q) * 1.01 + 1e-12);
    let mut x = project(&vec![0.0; m], y, upper, nu);
    let mut fx = f(&x);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut quiet = 0;
    for _ in 0..400_000 {
        let g = grad(&z);
        let trial: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&trial, y, upper, nu);
        let fn_ = f(&next);
        if fn_ > fx {
            // restart momentum; at round-off level this repeats, so it
            // counts as a step without progress
            t = 1.0;
            z = x.clone();
            quiet += 1;
            if quiet > 200 {
                break;
            }
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + beta * (n - o))
            .collect();
        let change = fx - fn_;
        x = next;
        fx = fn_;
        t = t_next;
        if change <= 1e-16 * fx.abs().max(1e-3) {
            quiet += 1;
            if quiet > 200 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    -fx
}

// ---------------------------------------------------------------------------
// joint problem by grid search

/// Smallest `J(gamma)` over capped-simplex points whose entries are
/// multiples of `1 / steps`, with one SVM solve per point.
pub fn grid_min(bank: &KernelBank, t: usize, steps: usize, svm: &cskl::svm::SvmConfig) -> f64 {
    let n = bank.len();
    let target = t * steps;
    let mut best = f64::INFINITY;
    let mut k = vec![0usize; n];
    loop {
        if k.iter().sum::<usize>() == target {
            let gamma: Vec<f64> = k.iter().map(|&x| x as f64 / steps as f64).collect();
            let sol = cskl::mkl::gamma_objective(bank, &gamma, svm).unwrap();
            best = best.min(sol.dual_objective);
        }
        // odometer over {0..=steps}^n
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            k[i] += 1;
            if k[i] <= steps {
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

/// `J(gamma)` for the given weights.
pub fn objective_at(bank: &KernelBank, gamma: &[f64], svm: &cskl::svm::SvmConfig) -> f64 {
    cskl::mkl::gamma_objective(bank, gamma, svm)
        .unwrap()
        .dual_objective
}
