//! SimpleMKL and Lp-norm MKL next to CSKL on a bank with one perfect
//! kernel and one noise kernel.

use cskl::experiments::perfect_vs_noise;
use cskl::mkl::{
    cskl_train, lpnorm_mkl_train, lpnorm_weights, simplemkl_train, CsklConfig, MklConfig,
};
use cskl::svm::SvmConfig;

fn main() -> cskl::Result<()> {
    println!(
        "L2 weights for d = (3, 4): {:?}",
        lpnorm_weights(&[3.0, 4.0], 2.0)?
    );

    let problem = perfect_vs_noise(80, 1, 1e-8)?;
    let bank = problem.train();
    let svm = SvmConfig::c_svm(10.0);
    let mkl = MklConfig::new(svm.clone());

    let models = [
        (
            "cskl t=1",
            cskl_train(bank, &CsklConfig::new(1, svm.clone()))?,
        ),
        ("simplemkl", simplemkl_train(bank, &mkl)?),
        ("lpmkl p=2", lpnorm_mkl_train(bank, 2.0, &mkl)?),
        ("lpmkl p=4/3", lpnorm_mkl_train(bank, 4.0 / 3.0, &mkl)?),
    ];
    for (name, m) in &models {
        println!(
            "{name:<12} gamma {:.4?}  J {:.6}  iterations {:>3}  test accuracy {:.4}",
            m.weights.gamma(),
            m.objective(),
            m.trace.entries.len() - 1,
            problem.accuracy(m.weights.gamma(), &m.solution)?
        );
    }
    Ok(())
}
