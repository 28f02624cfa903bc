//! Trains CSKL on the synthetic benchmark for one t and prints the weight
//! trace.
//!
//! Usage: `cargo run --release --example cskl_train -- [t] [seed]`

use cskl::experiments::{generate_synthetic, SyntheticConfig};
use cskl::mkl::{cskl_train, topt_value, CsklConfig, GammaStep};
use cskl::svm::SvmConfig;

fn main() -> cskl::Result<()> {
    let mut args = std::env::args().skip(1);
    let t: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = generate_synthetic(&SyntheticConfig::default().with_seed(seed))?;
    let problem = &data.problem;
    let groups = problem.train().groups().unwrap_or_default().to_vec();

    for step in [GammaStep::ReducedGradient, GammaStep::LpDirection] {
        let cfg = CsklConfig::new(t, SvmConfig::nu_svm(0.2)).with_step(step);
        let model = cskl_train(problem.train(), &cfg)?;
        println!(
            "{step:?}: {:?} after {} iterations",
            model.trace.termination,
            model.trace.entries.len() - 1
        );
        for e in model.trace.entries.iter().take(5) {
            println!(
                "  iter {:>3}  J = {:.8}  step {:.3e}  gap {:?}",
                e.iteration, e.objective, e.step, e.gap
            );
        }
        let last = model.trace.last().expect("trace has entries");
        println!(
            "  final J = {:.8}, gamma'd = {:.8}, g_t(d) = {:.8}",
            last.objective,
            model.weights.dot(&last.d),
            topt_value(&last.d, t)?
        );
        for (j, g) in model
            .weights
            .gamma()
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > 1e-6)
        {
            println!(
                "  kernel {j:>2} [{}] gamma {g:.4}",
                groups.get(j).map_or("-", String::as_str)
            );
        }
        println!(
            "  test accuracy {:.4}",
            problem.accuracy(model.weights.gamma(), &model.solution)?
        );
    }
    Ok(())
}
