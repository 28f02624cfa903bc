//! One-vs-one and one-vs-rest CSKL on three Gaussian blobs.

use cskl::experiments::{train_multiclass, Scheme, SolverSpec, TrainTestProblem};
use cskl::kernel::{compute_gram, Dataset, KernelBank, KernelSpec};
use cskl::mkl::{GammaStep, MklConfig};
use cskl::svm::SvmConfig;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> cskl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.8).expect("valid deviation");
    let centers = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
    let per_class = 30;
    let m = per_class * centers.len();
    let mut points = Array2::zeros((m, 3));
    let mut labels = Vec::with_capacity(m);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..per_class {
            let r = c * per_class + i;
            points[[r, 0]] = center[0] + noise.sample(&mut rng);
            points[[r, 1]] = center[1] + noise.sample(&mut rng);
            // a label-independent column
            points[[r, 2]] = noise.sample(&mut rng);
            labels.push(c as i32);
        }
    }
    let data = Dataset::new(points, labels.clone())?;
    let specs = [
        KernelSpec::gaussian(1.0).on_features(vec![0, 1]),
        KernelSpec::gaussian(1.0).on_features(vec![0]),
        KernelSpec::gaussian(1.0).on_features(vec![1]),
        KernelSpec::gaussian(1.0).on_features(vec![2]),
    ];
    let kernels = specs
        .iter()
        .map(|s| compute_gram(&data, s))
        .collect::<cskl::Result<Vec<_>>>()?;
    let full = KernelBank::new(kernels, labels)?;
    let problem = TrainTestProblem::split(&full, 0.5, 3, 1e-8)?;

    let solver = SolverSpec::Cskl {
        t: 2,
        gamma_step: GammaStep::ReducedGradient,
    };
    let cfg = MklConfig::new(SvmConfig::nu_svm(0.2));
    for scheme in [Scheme::OneVsOne, Scheme::OneVsRest] {
        let fit = train_multiclass(&problem, scheme, &solver, &cfg)?;
        println!("{scheme:?}: {} binary models", fit.models.len());
        for b in &fit.models {
            println!(
                "  task {:<4} gamma {:.3?}  task accuracy {:.4}",
                b.task.id(),
                b.model.weights.gamma(),
                b.task_accuracy(problem.test_labels())
            );
        }
        println!(
            "  multiclass accuracy {:.4}",
            fit.accuracy(problem.test_labels())
        );
    }
    Ok(())
}
