mod common;

use cskl::experiments::perfect_vs_noise;
use cskl::kernel::{GramMatrix, KernelBank};
use cskl::mkl::{
    cskl_train, gamma_objective, lp_direction, lp_gamma_step, lpnorm_mkl_train, lpnorm_weights,
    reduced_gradient_gamma_step, simplemkl_train, topt_gamma, topt_value, CsklConfig, GammaStep,
    MklConfig, WeightConstraint,
};
use cskl::svm::{self, compute_d, SvmConfig};
use ndarray::Array2;
use proptest::prelude::*;

fn two_point_bank(scales: &[f64]) -> KernelBank {
    let kernels = scales
        .iter()
        .map(|&s| GramMatrix::new(Array2::eye(2) * s, None).unwrap())
        .collect();
    KernelBank::new(kernels, vec![1, -1]).unwrap()
}

#[test]
fn repeated_steps_move_mass_to_stronger_kernel() {
    let bank = two_point_bank(&[2.0, 1.0]);
    let cfg = MklConfig::new(SvmConfig::c_svm(10.0));
    let mut gamma = vec![0.5, 0.5];
    let mut sol = gamma_objective(&bank, &gamma, &cfg.svm).unwrap();
    let y = bank.binary_labels().unwrap();
    let d0 = compute_d(&sol.alpha, &y, &bank).unwrap();
    assert!((d0[0] / d0[1] - 2.0).abs() < 1e-9);
    for _ in 0..20 {
        let out = reduced_gradient_gamma_step(&bank, &gamma, &sol, &cfg).unwrap();
        assert!(out.gamma[0] >= gamma[0] - 1e-12);
        gamma = out.gamma;
        sol = out.solution;
        if out.stationary {
            break;
        }
    }
    let d = compute_d(&sol.alpha, &y, &bank).unwrap();
    assert_eq!(topt_gamma(&d, 1).unwrap().gamma(), &[1.0, 0.0]);
    assert!((gamma[0] - 1.0).abs() < 1e-9 && gamma[1].abs() < 1e-9);
}

#[test]
fn optimal_gamma_is_stationary() {
    let bank = common::random_bank(21, 4, 16);
    let cfg = MklConfig::new(SvmConfig::nu_svm(0.3));
    let model = cskl_train(&bank, &CsklConfig::new(2, cfg.svm.clone())).unwrap();
    let gamma = model.weights.gamma().to_vec();
    for step in [reduced_gradient_gamma_step, lp_gamma_step] {
        let out = step(&bank, &gamma, &model.solution, &cfg).unwrap();
        assert!(out.solution.dual_objective >= model.objective() - 1e-6);
        assert!(out.solution.dual_objective <= model.objective() + 1e-12);
    }
}

#[test]
fn full_budget_is_all_ones() {
    let bank = common::random_bank(22, 5, 14);
    for step in [GammaStep::ReducedGradient, GammaStep::LpDirection] {
        let model = cskl_train(
            &bank,
            &CsklConfig::new(5, SvmConfig::c_svm(1.0)).with_step(step),
        )
        .unwrap();
        assert!(model
            .weights
            .gamma()
            .iter()
            .all(|&g| (g - 1.0).abs() <= 1e-6));
    }
}

#[test]
fn perfect_kernel_wins() {
    let problem = perfect_vs_noise(60, 3, 1e-8).unwrap();
    let bank = problem.train();
    let y = bank.binary_labels().unwrap();
    let svm = SvmConfig::nu_svm(0.2);
    let cfg = MklConfig::new(svm.clone());
    let models = [
        cskl_train(bank, &CsklConfig::new(1, svm)).unwrap(),
        simplemkl_train(bank, &cfg).unwrap(),
    ];
    for model in &models {
        let g = model.weights.gamma();
        assert!(g[0] > 1.0 - 1e-6 && g[1] < 1e-6, "gamma = {g:?}");
        let k = cskl::kernel::combine(bank, g).unwrap();
        let f = svm::decision_values(&model.solution, k.values(), &y).unwrap();
        assert!(f.iter().zip(&y).all(|(f, y)| f * y > 0.0));
    }
}

#[test]
fn single_kernel_simplemkl_is_plain_svm() {
    let full = common::random_bank(23, 1, 18);
    let svm = SvmConfig::c_svm(3.0);
    let model = simplemkl_train(&full, &MklConfig::new(svm.clone())).unwrap();
    assert_eq!(model.weights.gamma(), &[1.0]);
    let plain = svm::solve(
        &full.kernels()[0],
        &full.binary_labels().unwrap(),
        &svm,
        None,
    )
    .unwrap();
    assert!((model.objective() - plain.dual_objective).abs() <= 1e-9);
}

#[test]
fn lpnorm_examples() {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(
        &lpnorm_weights(&[3.0, 4.0], 2.0).unwrap(),
        &[0.6, 0.8]
    ));
    assert!(close(
        &lpnorm_weights(&[1.0, 0.0], 2.0).unwrap(),
        &[1.0, 0.0]
    ));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!(close(&lpnorm_weights(&[5.0, 5.0], 2.0).unwrap(), &[h, h]));
    assert!(close(&lpnorm_weights(&[0.0, 0.0], 2.0).unwrap(), &[h, h]));
    assert!(lpnorm_weights(&[1.0], 1.0).is_err());
}

#[test]
fn lpnorm_model_stays_on_ball() {
    let bank = common::random_bank(24, 4, 20);
    for p in [4.0 / 3.0, 2.0, 4.0] {
        let model = lpnorm_mkl_train(&bank, p, &MklConfig::new(SvmConfig::nu_svm(0.2))).unwrap();
        WeightConstraint::LpBall { p }
            .check(model.weights.gamma())
            .unwrap();
        let norm: f64 = model
            .weights
            .gamma()
            .iter()
            .map(|g| g.powf(p))
            .sum::<f64>()
            .powf(1.0 / p);
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn step_variants_agree() {
    for seed in 0..8 {
        let bank = common::random_bank(30 + seed, 4, 20);
        let svm = SvmConfig::nu_svm(0.2);
        let rg = cskl_train(&bank, &CsklConfig::new(2, svm.clone())).unwrap();
        let lp = cskl_train(
            &bank,
            &CsklConfig::new(2, svm).with_step(GammaStep::LpDirection),
        )
        .unwrap();
        assert!(
            (rg.objective() - lp.objective()).abs() <= 1e-3 * rg.objective().abs().max(1.0),
            "seed {seed}: {} vs {}",
            rg.objective(),
            lp.objective()
        );
    }
}

#[test]
fn invalid_budgets_rejected() {
    let bank = common::random_bank(25, 3, 10);
    assert!(cskl_train(&bank, &CsklConfig::new(0, SvmConfig::c_svm(1.0))).is_err());
    assert!(cskl_train(&bank, &CsklConfig::new(4, SvmConfig::c_svm(1.0))).is_err());
}

#[test]
fn trace_csv_has_row_per_iteration() {
    let bank = common::random_bank(26, 3, 12);
    let model = cskl_train(&bank, &CsklConfig::new(2, SvmConfig::nu_svm(0.2))).unwrap();
    let csv = model.trace.to_csv();
    assert_eq!(csv.lines().count(), model.trace.entries.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn topt_scale_invariant(v in prop::collection::vec(0.0..10.0f64, 1..10), scale in 0.1..10.0f64, t in 1usize..10) {
        let t = t.min(v.len());
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let a = topt_gamma(&v, t).unwrap();
        let b = topt_gamma(&scaled, t).unwrap();
        prop_assert_eq!(a.gamma(), b.gamma());
        prop_assert!((topt_value(&scaled, t).unwrap() - scale * topt_value(&v, t).unwrap()).abs() <= 1e-9 * scale * 100.0);
    }

    #[test]
    fn topt_ties_share_equally(
        base in prop::collection::vec(0u8..4, 2..10),
        t in 1usize..10,
    ) {
        let v: Vec<f64> = base.iter().map(|&b| f64::from(b)).collect();
        let t = t.min(v.len());
        let w = topt_gamma(&v, t).unwrap();
        WeightConstraint::CappedSimplex { t }.check(w.gamma()).unwrap();
        // equal values receive equal weight
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] == v[j] {
                    prop_assert!((w.gamma()[i] - w.gamma()[j]).abs() <= 1e-12);
                }
            }
        }
        prop_assert!((w.dot(&v) - common::capped_simplex_max(&v, t)).abs() <= 1e-9);
    }

    #[test]
    fn lp_direction_ignores_constant_shift(
        phi in prop::collection::vec(-3.0..3.0f64, 2..7),
        shift in -5.0..5.0f64,
    ) {
        let n = phi.len();
        let gamma = vec![1.0 / n as f64; n];
        let shifted: Vec<f64> = phi.iter().map(|p| p + shift).collect();
        let a = lp_direction(&gamma, &phi);
        let b = lp_direction(&gamma, &shifted);
        let va: f64 = a.iter().zip(&phi).map(|(x, p)| x * p).sum();
        let vb: f64 = b.iter().zip(&phi).map(|(x, p)| x * p).sum();
        prop_assert!((va - vb).abs() <= 1e-9);
    }

    #[test]
    fn cskl_weights_feasible(seed in 0u64..300, n in 2usize..6, t in 1usize..6) {
        let t = t.min(n);
        let bank = common::random_bank(seed, n, 12);
        let model = cskl_train(&bank, &CsklConfig::new(t, SvmConfig::nu_svm(0.2))).unwrap();
        WeightConstraint::CappedSimplex { t }.check(model.weights.gamma()).unwrap();
        prop_assert!(model.trace.max_increase() <= 1e-6);
    }
}
