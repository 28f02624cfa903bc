//! C-SVM and nu-SVM dual solvers over a fixed (combined) Gram matrix.

mod smo;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, KernelBank};

/// Which dual problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmVariant {
    /// Box `0 <= alpha_i <= c`, objective `sum(alpha) - 1/2 alpha' Q alpha`.
    C(f64),
    /// Box `0 <= alpha_i <= 1/m`, `sum(alpha) = nu`, objective `-1/2 alpha' Q alpha`.
    Nu(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub variant: SvmVariant,
    /// Stop when the maximal KKT violation drops to this value.
    pub kkt_tolerance: f64,
    /// Cap on pair updates; `None` means `10_000 * m`.
    pub max_iterations: Option<usize>,
}

impl SvmConfig {
    pub fn c_svm(c: f64) -> Self {
        Self {
            variant: SvmVariant::C(c),
            kkt_tolerance: 1e-6,
            max_iterations: None,
        }
    }

    pub fn nu_svm(nu: f64) -> Self {
        Self {
            variant: SvmVariant::Nu(nu),
            kkt_tolerance: 1e-6,
            max_iterations: None,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.kkt_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            SvmVariant::C(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::invalid(format!("C must be positive, got {c}")));
            }
            SvmVariant::Nu(nu) if !(nu > 0.0 && nu <= 1.0) => {
                return Err(Error::invalid(format!("nu must lie in (0, 1], got {nu}")));
            }
            _ => {}
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "KKT tolerance must be positive, got {}",
                self.kkt_tolerance
            )));
        }
        Ok(())
    }

    /// Upper bound on each dual variable for `m` samples.
    pub fn upper_bound(&self, m: usize) -> f64 {
        match self.variant {
            SvmVariant::C(c) => c,
            SvmVariant::Nu(_) => 1.0 / m as f64,
        }
    }

    fn iteration_cap(&self, m: usize) -> usize {
        self.max_iterations.unwrap_or(10_000 * m.max(1))
    }
}

/// Result of one dual solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    /// Indices with `alpha_i > kkt_tolerance`.
    pub support_indices: Vec<usize>,
    /// Margin `rho` (nu-SVM only).
    pub margin: Option<f64>,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub kkt_violation: f64,
}

impl SvmSolution {
    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

fn check_labels(y: &[f64], m: usize) -> Result<()> {
    if y.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if let Some(l) = y.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(Error::invalid(format!("labels must be +1 or -1, got {l}")));
    }
    Ok(())
}

/// Largest feasible nu for the label balance: `2 min(#pos, #neg) / m`.
pub fn max_feasible_nu(y: &[f64]) -> f64 {
    let pos = y.iter().filter(|&&l| l > 0.0).count();
    let neg = y.len() - pos;
    2.0 * pos.min(neg) as f64 / y.len() as f64
}

/// Solves whichever variant `cfg` names, optionally warm-started from a
/// previous `alpha` (ignored unless feasible for this problem).
pub fn solve(
    k: &GramMatrix,
    y: &[f64],
    cfg: &SvmConfig,
    warm: Option<&[f64]>,
) -> Result<SvmSolution> {
    cfg.validate()?;
    let m = k.size();
    check_labels(y, m)?;
    match cfg.variant {
        SvmVariant::C(c) => smo::solve_c(k.values(), y, c, cfg, warm),
        SvmVariant::Nu(nu) => {
            let max = max_feasible_nu(y);
            if nu > max + 1e-12 {
                return Err(Error::InfeasibleNu { nu, max });
            }
            smo::solve_nu(k.values(), y, nu, cfg, warm)
        }
    }
}

pub fn solve_csvm(k: &GramMatrix, y: &[f64], cfg: &SvmConfig) -> Result<SvmSolution> {
    if !matches!(cfg.variant, SvmVariant::C(_)) {
        return Err(Error::invalid("solve_csvm needs a C-SVM configuration"));
    }
    solve(k, y, cfg, None)
}

pub fn solve_nusvm(k: &GramMatrix, y: &[f64], cfg: &SvmConfig) -> Result<SvmSolution> {
    if !matches!(cfg.variant, SvmVariant::Nu(_)) {
        return Err(Error::invalid("solve_nusvm needs a nu-SVM configuration"));
    }
    solve(k, y, cfg, None)
}

/// Per-kernel quadratic forms `d_j = (Y alpha)' K_j (Y alpha)`.
pub fn compute_d(alpha: &[f64], y: &[f64], bank: &KernelBank) -> Result<Vec<f64>> {
    let m = bank.samples();
    if alpha.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: alpha.len(),
        });
    }
    check_labels(y, m)?;
    let support: Vec<(usize, f64)> = alpha
        .iter()
        .zip(y)
        .enumerate()
        .filter(|(_, (&a, _))| a != 0.0)
        .map(|(i, (&a, &l))| (i, a * l))
        .collect();
    Ok(bank
        .kernels()
        .iter()
        .map(|k| quadratic_form(k.values(), &support))
        .collect())
}

fn quadratic_form(k: &Array2<f64>, support: &[(usize, f64)]) -> f64 {
    let mut total = 0.0;
    for &(i, vi) in support {
        let row = k.row(i);
        let inner: f64 = support.iter().map(|&(j, vj)| row[j] * vj).sum();
        total += vi * inner;
    }
    total
}

/// `f(x_t) = sum_i alpha_i y_i K_cross[i][t] + bias` for every column `t`.
pub fn decision_values(model: &SvmSolution, k_cross: &Array2<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let m = model.alpha.len();
    if k_cross.nrows() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: k_cross.nrows(),
        });
    }
    check_labels(y, m)?;
    let mut out = vec![model.bias; k_cross.ncols()];
    for (i, (&a, &l)) in model.alpha.iter().zip(y).enumerate() {
        if a == 0.0 {
            continue;
        }
        let coef = a * l;
        for (o, &kv) in out.iter_mut().zip(k_cross.row(i)) {
            *o += coef * kv;
        }
    }
    Ok(out)
}

/// Sign of a decision value as a label; zero maps to `+1`.
pub fn predict_label(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn gram(v: Array2<f64>) -> GramMatrix {
        GramMatrix::new(v, None).unwrap()
    }

    #[test]
    fn csvm_two_points_identity() {
        let k = gram(Array2::eye(2));
        let sol = solve_csvm(&k, &[1.0, -1.0], &SvmConfig::c_svm(10.0)).unwrap();
        assert!((sol.alpha[0] - 1.0).abs() < 1e-9 && (sol.alpha[1] - 1.0).abs() < 1e-9);
        assert!((sol.dual_objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csvm_two_points_clipped() {
        let k = gram(Array2::eye(2));
        let sol = solve_csvm(&k, &[1.0, -1.0], &SvmConfig::c_svm(0.5)).unwrap();
        assert_eq!(sol.alpha, vec![0.5, 0.5]);
        assert!((sol.dual_objective - 0.75).abs() < 1e-12);
    }

    #[test]
    fn csvm_single_class_is_zero() {
        let k = gram(Array2::eye(3));
        let sol = solve_csvm(&k, &[1.0, 1.0, 1.0], &SvmConfig::c_svm(1.0)).unwrap();
        assert_eq!(sol.alpha, vec![0.0; 3]);
        assert_eq!(sol.dual_objective, 0.0);
        assert!(sol.support_indices.is_empty());
        // everything is predicted as the only class present
        assert!(sol.bias > 0.0);
    }

    #[test]
    fn nusvm_two_points() {
        let k = gram(Array2::eye(2));
        let sol = solve_nusvm(&k, &[1.0, -1.0], &SvmConfig::nu_svm(1.0)).unwrap();
        assert_eq!(sol.alpha, vec![0.5, 0.5]);
        assert!((sol.dual_objective + 0.25).abs() < 1e-15);
    }

    #[test]
    fn nusvm_balanced_four() {
        let k = gram(Array2::eye(4));
        let sol = solve_nusvm(&k, &[1.0, -1.0, 1.0, -1.0], &SvmConfig::nu_svm(1.0)).unwrap();
        for a in &sol.alpha {
            assert!((a - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn nusvm_infeasible() {
        let k = gram(Array2::eye(4));
        let err = solve_nusvm(&k, &[1.0, 1.0, 1.0, -1.0], &SvmConfig::nu_svm(0.6)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleNu { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(SvmConfig::c_svm(0.0).validate().is_err());
        assert!(SvmConfig::nu_svm(0.0).validate().is_err());
        assert!(SvmConfig::nu_svm(1.5).validate().is_err());
        assert!(SvmConfig::nu_svm(1.0).validate().is_ok());
    }

    #[test]
    fn d_examples() {
        let eye = KernelBank::new(vec![gram(Array2::eye(2))], vec![1, -1]).unwrap();
        assert_eq!(
            compute_d(&[1.0, 1.0], &[1.0, -1.0], &eye).unwrap(),
            vec![2.0]
        );
        let ones = KernelBank::new(vec![gram(Array2::ones((2, 2)))], vec![1, -1]).unwrap();
        assert_eq!(
            compute_d(&[1.0, 1.0], &[1.0, -1.0], &ones).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            compute_d(&[0.0, 0.0], &[1.0, -1.0], &eye).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn decision_value_edge_cases() {
        let zero = SvmSolution {
            alpha: vec![0.0, 0.0],
            bias: 0.0,
            dual_objective: 0.0,
            support_indices: vec![],
            margin: None,
            iterations: 0,
            kkt_violation: 0.0,
        };
        let cross = array![[0.3, 1.0, 2.0], [0.1, -1.0, 5.0]];
        assert_eq!(
            decision_values(&zero, &cross, &[1.0, -1.0]).unwrap(),
            vec![0.0; 3]
        );

        let model = SvmSolution {
            alpha: vec![1.0, 2.0],
            bias: 0.7,
            ..zero.clone()
        };
        let col_zero = array![[0.0], [0.0]];
        assert_eq!(
            decision_values(&model, &col_zero, &[1.0, -1.0]).unwrap(),
            vec![0.7]
        );
        assert!(decision_values(&model, &array![[1.0]], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn support_vector_sign_on_toy_problem() {
        // 1-d points -2, -1, 1, 2 with a linear kernel
        let x = [-2.0, -1.0, 1.0, 2.0];
        let y = [-1.0, -1.0, 1.0, 1.0];
        let k = Array2::from_shape_fn((4, 4), |(i, j)| x[i] * x[j]);
        let sol = solve_csvm(&gram(k.clone()), &y, &SvmConfig::c_svm(10.0)).unwrap();
        for &sv in &sol.support_indices {
            let col = k.column(sv).to_owned().insert_axis(ndarray::Axis(1));
            let f = decision_values(&sol, &col, &y).unwrap()[0];
            assert_eq!(predict_label(f), y[sv]);
        }
        assert!(!sol.support_indices.is_empty());
    }
}
