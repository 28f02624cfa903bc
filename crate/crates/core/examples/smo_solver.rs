//! Solves the C-SVM and nu-SVM duals on a fixed kernel and scores new points.

use cskl::kernel::KernelBank;
use cskl::kernel::{compute_cross, compute_gram, Dataset, KernelSpec};
use cskl::svm::{compute_d, decision_values, predict_label, solve, SvmConfig};
use ndarray::array;

fn main() -> cskl::Result<()> {
    let train = array![
        [0.0, 0.0],
        [1.0, 0.5],
        [0.3, 1.0],
        [3.0, 3.0],
        [2.5, 3.5],
        [3.5, 2.0]
    ];
    let labels = vec![-1, -1, -1, 1, 1, 1];
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let data = Dataset::new(train.clone(), labels.clone())?;
    let spec = KernelSpec::gaussian(1.5);
    let k = compute_gram(&data, &spec)?;

    let test = array![[0.2, 0.1], [3.1, 2.9], [1.6, 1.6]];
    let cross = compute_cross(&train, &test, &spec)?;

    for cfg in [SvmConfig::c_svm(10.0), SvmConfig::nu_svm(0.5)] {
        let sol = solve(&k, &y, &cfg, None)?;
        println!("{:?}", cfg.variant);
        println!("  alpha {:.4?}", sol.alpha);
        println!(
            "  bias {:.4}, dual objective {:.6}, {} support vectors, {} SMO steps",
            sol.bias,
            sol.dual_objective,
            sol.support_indices.len(),
            sol.iterations
        );
        if let Some(rho) = sol.margin {
            println!("  margin {rho:.4}");
        }
        let f = decision_values(&sol, &cross, &y)?;
        let predicted: Vec<f64> = f.iter().map(|&v| predict_label(v)).collect();
        println!("  test decisions {f:.4?} -> {predicted:?}");

        let bank = KernelBank::new(vec![k.clone()], labels.clone())?;
        println!(
            "  d = alpha' Y K Y alpha = {:.6?}",
            compute_d(&sol.alpha, &y, &bank)?
        );
    }
    Ok(())
}
