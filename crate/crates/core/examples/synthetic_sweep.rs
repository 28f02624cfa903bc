//! Sweeps t over the synthetic benchmark and prints mean test accuracy.
//!
//! Usage: `cargo run --release --example synthetic_sweep -- [runs] [nu]`

use cskl::experiments::{generate_synthetic, sweep_t, Scheme, SweepReport, SyntheticConfig};
use cskl::mkl::{GammaStep, MklConfig};
use cskl::svm::SvmConfig;

fn main() -> cskl::Result<()> {
    let mut args = std::env::args().skip(1);
    let runs: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let nu: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let cfg = MklConfig::new(SvmConfig::nu_svm(nu));
    let defaults = SyntheticConfig::default();
    let t_values: Vec<usize> = (1..=defaults.kernel_count()).collect();

    let mut reports = Vec::new();
    for seed in 0..runs {
        let data = generate_synthetic(&defaults.clone().with_seed(seed))?;
        reports.push(sweep_t(
            &data.problem,
            &t_values,
            GammaStep::ReducedGradient,
            Scheme::OneVsOne,
            &cfg,
        )?);
    }
    let report = SweepReport::merge(reports);
    for (t, acc) in report.summary() {
        let selected: f64 = report
            .rows
            .iter()
            .filter(|r| r.t == t)
            .map(|r| r.selected as f64)
            .sum::<f64>()
            / runs as f64;
        println!("t = {t:>2}  mean accuracy {acc:.4}  mean kernels selected {selected:.1}");
    }
    if let Some((t, acc)) = report.best_in(2, t_values.len() - 2) {
        println!("best intermediate t = {t} ({acc:.4})");
    }
    Ok(())
}
