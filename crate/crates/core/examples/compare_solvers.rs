//! Compares CSKL at several t with the baselines on a bank where a few noisy
//! label channels hide among many noise kernels.

use cskl::experiments::{compare_solvers, planted_channels, PlantedConfig, Scheme, SolverSpec};
use cskl::mkl::{GammaStep, MklConfig};
use cskl::svm::SvmConfig;

fn main() -> cskl::Result<()> {
    let planted = PlantedConfig {
        seed: 2,
        ..PlantedConfig::default()
    };
    let problem = planted_channels(&planted)?;
    println!(
        "{} kernels, {} training samples",
        problem.train().len(),
        problem.train().samples()
    );

    let mut solvers = vec![SolverSpec::SimpleMkl];
    for t in [2, 6, 12] {
        solvers.push(SolverSpec::Cskl {
            t,
            gamma_step: GammaStep::ReducedGradient,
        });
    }
    solvers.push(SolverSpec::LpMkl { p: 2.0 });
    solvers.push(SolverSpec::Uniform);

    let cfg = MklConfig::new(SvmConfig::nu_svm(0.2));
    let report = compare_solvers(&problem, &solvers, Scheme::OneVsOne, &cfg)?;
    for row in &report.rows {
        println!(
            "{:<14} accuracy {:.4}  ratio {:.3}  kernels {:>2}  groups {}",
            row.solver,
            row.accuracy.unwrap_or(f64::NAN),
            row.ratio.unwrap_or(f64::NAN),
            row.selected.unwrap_or(0),
            row.groups_selected.unwrap_or(0)
        );
    }
    for t in report.tallies() {
        println!(
            "{} vs {}: {}W {}L {}T",
            t.solver, report.reference, t.wins, t.losses, t.ties
        );
    }
    Ok(())
}
