use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{exit_code, Command, RunConfig, EXIT_OK, EXIT_SOLVER};
use crate::error::{Error, Result};
use crate::experiments::{
    compare_solvers, generate_synthetic, sweep_t, train_multiclass, ComparisonReport, SolverSpec,
    SweepReport, SyntheticConfig, TrainTestProblem, SELECTION_THRESHOLD,
};
use crate::kernel::io::write_atomic;
use crate::kernel::{
    load_bank, load_csv_bank, read_groups, save_bank, write_groups, KernelBank, KernelSpec,
};
use crate::mkl::{Termination, WeightConstraint};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub(super) fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::GenSynthetic(a) => gen_synthetic(a.to_config()?),
        Command::Train(a) => train(a.to_config()?),
        Command::Sweep(a) => sweep(a.to_config()?),
        Command::Compare(a) => compare(a.to_config()?),
        Command::InspectBank(a) => inspect_bank(a.to_config()?),
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| Error::invalid("this command needs --out DIR"))?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    if !dir.is_dir() {
        return Err(Error::io(
            &dir,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    Ok(dir)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn reject(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Err(Error::invalid(msg))
    } else {
        Ok(())
    }
}

/// The user's bank, or `None` for the generated benchmark.
fn load_input(cfg: &RunConfig) -> Result<Option<KernelBank>> {
    if cfg.bank.is_empty() {
        reject(cfg.groups.is_some(), "--groups needs --bank")?;
        return Ok(None);
    }
    let bank = match &cfg.labels {
        Some(labels) => load_csv_bank(&cfg.bank, labels)?,
        None => {
            reject(cfg.bank.len() != 1, "several kernel files need --labels")?;
            load_bank(&cfg.bank[0])?
        }
    };
    let bank = match &cfg.groups {
        Some(path) => {
            let groups = read_groups(path, bank.len())?;
            bank.with_groups(groups)?
        }
        None => bank,
    };
    Ok(Some(bank))
}

fn kernel_count(cfg: &RunConfig, bank: &Option<KernelBank>) -> usize {
    match bank {
        Some(b) => b.len(),
        None => cfg.synthetic(0).kernel_count(),
    }
}

fn problem(cfg: &RunConfig, bank: &Option<KernelBank>, run: usize) -> Result<TrainTestProblem> {
    match bank {
        Some(b) => {
            TrainTestProblem::split(b, cfg.train_fraction, cfg.seed + run as u64, cfg.jitter)
        }
        None => Ok(generate_synthetic(&cfg.synthetic(run))?.problem),
    }
}

/// Kernel parameters of the generated benchmark, echoed in reports.
fn synthetic_echo(cfg: &RunConfig, bank: &Option<KernelBank>) -> Option<SyntheticConfig> {
    bank.is_none().then(|| cfg.synthetic(0))
}

#[derive(Serialize)]
struct KernelInfo {
    index: usize,
    group: Option<String>,
    source: Option<KernelSpec>,
    trace: f64,
}

fn kernel_info(bank: &KernelBank) -> Vec<KernelInfo> {
    bank.kernels()
        .iter()
        .enumerate()
        .map(|(i, k)| KernelInfo {
            index: i,
            group: bank.groups().map(|g| g[i].clone()),
            source: k.source().cloned(),
            trace: k.trace(),
        })
        .collect()
}

fn gen_synthetic(cfg: RunConfig) -> Result<u8> {
    reject(!cfg.bank.is_empty(), "gen-synthetic does not read a bank")?;
    reject(!cfg.solver.is_empty(), "gen-synthetic does not train")?;
    let cfg = cfg.resolve()?;
    let dir = output_dir(&cfg)?;
    let synthetic = cfg.synthetic(0);
    let data = generate_synthetic(&synthetic)?;
    let bank = &data.full;

    let bank_path = dir.join("bank.cskb");
    save_bank(bank, &bank_path)?;
    let labels: String = bank.labels().iter().map(|l| format!("{l}\n")).collect();
    write_text(&dir, "labels.csv", &labels)?;
    write_text(
        &dir,
        "groups.txt",
        &write_groups(bank.groups().unwrap_or_default()),
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        synthetic: &'a SyntheticConfig,
        samples: usize,
        kernels: Vec<KernelInfo>,
    }
    let summary = Summary {
        config: &cfg,
        synthetic: &synthetic,
        samples: bank.samples(),
        kernels: kernel_info(bank),
    };
    write_json(&dir, "summary.json", &summary)?;

    say!("N = {} kernels, m = {} samples", bank.len(), bank.samples());
    for k in &summary.kernels {
        say!(
            "  kernel {:>2} [{}] trace {:.6}",
            k.index,
            k.group.as_deref().unwrap_or("-"),
            k.trace
        );
    }
    say!("wrote {}", bank_path.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TaskModel<'a> {
    task: String,
    positive: i32,
    negative: Option<i32>,
    constraint: WeightConstraint,
    gamma: &'a [f64],
    alpha: &'a [f64],
    bias: f64,
    margin: Option<f64>,
    objective: f64,
    termination: Termination,
    outer_iterations: usize,
    selected: usize,
    test_accuracy: f64,
    trace_file: String,
}

#[derive(Serialize)]
struct FailureOut {
    task: String,
    error: String,
}

fn train(cfg: RunConfig) -> Result<u8> {
    reject(cfg.solver.len() != 1, "train needs exactly one --solver")?;
    let cfg = cfg.resolve()?;
    let solver = cfg.solvers()?[0];
    let dir = output_dir(&cfg)?;
    let bank = load_input(&cfg)?;
    solver.validate(kernel_count(&cfg, &bank))?;
    let mkl = cfg.mkl_config();
    let scheme = cfg.scheme.into();

    let (problem, fit) = in_pool(cfg.threads, || -> Result<_> {
        let problem = problem(&cfg, &bank, 0)?;
        let fit = train_multiclass(&problem, scheme, &solver, &mkl)?;
        Ok((problem, fit))
    })??;

    let single = fit.models.len() + fit.failures.len() == 1;
    let mut tasks = Vec::new();
    for m in &fit.models {
        let trace_file = if single {
            "trace.csv".to_string()
        } else {
            format!("trace_{}.csv", m.task.id())
        };
        write_text(&dir, &trace_file, &m.model.trace.to_csv())?;
        let gamma = m.model.weights.gamma();
        tasks.push(TaskModel {
            task: m.task.id(),
            positive: m.task.positive,
            negative: m.task.negative,
            constraint: m.model.weights.constraint(),
            gamma,
            alpha: &m.model.solution.alpha,
            bias: m.model.solution.bias,
            margin: m.model.solution.margin,
            objective: m.model.objective(),
            termination: m.model.trace.termination,
            outer_iterations: m.model.trace.entries.len().saturating_sub(1),
            selected: gamma.iter().filter(|&&g| g > SELECTION_THRESHOLD).count(),
            test_accuracy: m.task_accuracy(problem.test_labels()),
            trace_file,
        });
    }
    let failures: Vec<FailureOut> = fit
        .failures
        .iter()
        .map(|f| FailureOut {
            task: f.task.id(),
            error: f.error.clone(),
        })
        .collect();
    let accuracy = fit.accuracy(problem.test_labels());

    #[derive(Serialize)]
    struct ModelFile<'a> {
        config: &'a RunConfig,
        synthetic: Option<SyntheticConfig>,
        solver: String,
        kernels: usize,
        train_samples: usize,
        test_samples: usize,
        accuracy: f64,
        tasks: &'a [TaskModel<'a>],
        failures: &'a [FailureOut],
    }
    let model = ModelFile {
        config: &cfg,
        synthetic: synthetic_echo(&cfg, &bank),
        solver: solver.name(),
        kernels: problem.train().len(),
        train_samples: problem.train().samples(),
        test_samples: problem.test_len(),
        accuracy,
        tasks: &tasks,
        failures: &failures,
    };
    write_json(&dir, "model.json", &model)?;

    #[derive(Serialize)]
    struct TaskSummary<'a> {
        task: &'a str,
        objective: f64,
        termination: Termination,
        outer_iterations: usize,
        selected: usize,
        test_accuracy: f64,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        synthetic: Option<SyntheticConfig>,
        solver: String,
        accuracy: f64,
        tasks: Vec<TaskSummary<'a>>,
        failures: &'a [FailureOut],
    }
    let summary = Summary {
        config: &cfg,
        synthetic: synthetic_echo(&cfg, &bank),
        solver: solver.name(),
        accuracy,
        tasks: tasks
            .iter()
            .map(|t| TaskSummary {
                task: &t.task,
                objective: t.objective,
                termination: t.termination,
                outer_iterations: t.outer_iterations,
                selected: t.selected,
                test_accuracy: t.test_accuracy,
            })
            .collect(),
        failures: &failures,
    };
    write_json(&dir, "summary.json", &summary)?;

    say!(
        "{}: test accuracy {:.4} over {} samples",
        solver.name(),
        accuracy,
        problem.test_len()
    );
    let mut code = EXIT_OK;
    for t in &tasks {
        say!(
            "  task {}: J = {:.6e}, {} kernels selected, {} iterations, {:?}",
            t.task,
            t.objective,
            t.selected,
            t.outer_iterations,
            t.termination
        );
        if t.termination != Termination::Converged {
            eprintln!(
                "task {} did not converge ({:?}); see {}",
                t.task,
                t.termination,
                dir.join(&t.trace_file).display()
            );
            code = code.max(EXIT_SOLVER);
        }
    }
    for f in &fit.failures {
        eprintln!("task {} failed: {}", f.task.id(), f.error);
        code = code.max(exit_code(f.kind));
    }
    say!("wrote {}", dir.join("model.json").display());
    Ok(code)
}

fn sweep(mut cfg: RunConfig) -> Result<u8> {
    reject(
        cfg.solver.iter().any(|s| s != "cskl"),
        "sweep only runs the cskl solver",
    )?;
    reject(cfg.t.is_some(), "sweep takes --t-min and --t-max, not --t")?;
    reject(cfg.p.is_some(), "--p only applies to the lpmkl solver")?;
    cfg.solver.clear();
    cfg.validate()?;
    let dir = output_dir(&cfg)?;
    let bank = load_input(&cfg)?;
    let n = kernel_count(&cfg, &bank);
    let hi = cfg.t_max.unwrap_or(n);
    if hi > n {
        return Err(Error::invalid(format!(
            "t-max {hi} exceeds the {n} kernels"
        )));
    }
    if cfg.t_min > hi {
        return Err(Error::invalid(format!(
            "t-min {} exceeds t-max {hi}",
            cfg.t_min
        )));
    }
    cfg.t_max = Some(hi);
    let cfg = cfg.resolve()?;
    let t_values: Vec<usize> = (cfg.t_min..=hi).collect();
    let mkl = cfg.mkl_config();

    let report = in_pool(cfg.threads, || -> Result<_> {
        let runs = (0..cfg.runs)
            .map(|r| {
                let problem = problem(&cfg, &bank, r)?;
                sweep_t(
                    &problem,
                    &t_values,
                    cfg.gamma_step.into(),
                    cfg.scheme.into(),
                    &mkl,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepReport::merge(runs))
    })??;

    write_text(&dir, "sweep.csv", &report.to_csv())?;
    write_text(&dir, "sweep_plot.csv", &report.plot_csv())?;

    #[derive(Serialize)]
    struct MeanRow {
        t: usize,
        mean_accuracy: f64,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        synthetic: Option<SyntheticConfig>,
        kernels: usize,
        mean_accuracy: Vec<MeanRow>,
        best_t: Option<usize>,
        best_accuracy: Option<f64>,
        non_converged_rows: usize,
        failed_tasks: usize,
    }
    let best = report.best_in(cfg.t_min, hi);
    let summary = Summary {
        config: &cfg,
        synthetic: synthetic_echo(&cfg, &bank),
        kernels: n,
        mean_accuracy: report
            .summary()
            .into_iter()
            .map(|(t, mean_accuracy)| MeanRow { t, mean_accuracy })
            .collect(),
        best_t: best.map(|b| b.0),
        best_accuracy: best.map(|b| b.1),
        non_converged_rows: report
            .rows
            .iter()
            .filter(|r| r.termination != Termination::Converged)
            .count(),
        failed_tasks: report.rows.iter().map(|r| r.failed_tasks).sum(),
    };
    write_json(&dir, "summary.json", &summary)?;

    say!("t  mean accuracy over {} run(s)", cfg.runs);
    for row in &summary.mean_accuracy {
        say!("{:>2} {:.4}", row.t, row.mean_accuracy);
    }
    if let (Some(t), Some(a)) = (summary.best_t, summary.best_accuracy) {
        say!("best t = {t} ({a:.4})");
    }
    say!("wrote {}", dir.join("sweep.csv").display());
    Ok(EXIT_OK)
}

fn compare(cfg: RunConfig) -> Result<u8> {
    let cfg = cfg.resolve()?;
    let solvers = cfg.solvers()?;
    reject(solvers.len() < 2, "compare needs at least two solvers")?;
    let dir = output_dir(&cfg)?;
    let bank = load_input(&cfg)?;
    let n = kernel_count(&cfg, &bank);
    for s in &solvers {
        s.validate(n)?;
    }
    let mkl = cfg.mkl_config();

    let report = in_pool(cfg.threads, || -> Result<_> {
        let runs = (0..cfg.runs)
            .map(|r| {
                let problem = problem(&cfg, &bank, r)?;
                compare_solvers(&problem, &solvers, cfg.scheme.into(), &mkl)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ComparisonReport::merge(runs))
    })??;

    write_text(&dir, "compare.csv", &report.to_csv())?;
    write_text(&dir, "histogram.csv", &report.histogram_csv())?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        synthetic: Option<SyntheticConfig>,
        solvers: Vec<SolverSpec>,
        reference: &'a str,
        tallies: Vec<crate::experiments::WinTally>,
        summaries: Vec<crate::experiments::SolverSummary>,
    }
    let summary = Summary {
        config: &cfg,
        synthetic: synthetic_echo(&cfg, &bank),
        solvers: solvers.clone(),
        reference: &report.reference,
        tallies: report.tallies(),
        summaries: report.summaries(),
    };
    write_json(&dir, "summary.json", &summary)?;

    for s in &summary.summaries {
        say!(
            "{:<16} mean accuracy {:.4}, mean task accuracy {:.4}, {} failed tasks",
            s.solver,
            s.mean_accuracy,
            s.mean_task_accuracy,
            s.failed_tasks
        );
    }
    for t in &summary.tallies {
        say!(
            "{} vs {}: {} wins, {} losses, {} ties, {} undecided",
            t.solver,
            report.reference,
            t.wins,
            t.losses,
            t.ties,
            t.undecided
        );
    }
    say!("wrote {}", dir.join("compare.csv").display());
    Ok(EXIT_OK)
}

fn inspect_bank(cfg: RunConfig) -> Result<u8> {
    reject(cfg.bank.is_empty(), "inspect-bank needs --bank")?;
    cfg.validate()?;
    let bank = load_input(&cfg)?.expect("bank given");

    #[derive(Serialize)]
    struct ClassCount {
        label: i32,
        count: usize,
    }
    #[derive(Serialize)]
    struct Inspection {
        samples: usize,
        kernels: usize,
        classes: Vec<ClassCount>,
        details: Vec<KernelInfo>,
        /// Largest `|K_ij - K_ji|` over all kernels.
        max_asymmetry: f64,
        min_diagonal: f64,
    }
    let mut max_asymmetry = 0.0f64;
    let mut min_diagonal = f64::INFINITY;
    for k in bank.kernels() {
        let v = k.values();
        for i in 0..v.nrows() {
            min_diagonal = min_diagonal.min(v[[i, i]]);
            for j in 0..i {
                max_asymmetry = max_asymmetry.max((v[[i, j]] - v[[j, i]]).abs());
            }
        }
    }
    let inspection = Inspection {
        samples: bank.samples(),
        kernels: bank.len(),
        classes: bank
            .classes()
            .into_iter()
            .map(|label| ClassCount {
                label,
                count: bank.labels().iter().filter(|&&l| l == label).count(),
            })
            .collect(),
        details: kernel_info(&bank),
        max_asymmetry,
        min_diagonal,
    };
    let text =
        serde_json::to_string_pretty(&inspection).map_err(|e| Error::invalid(e.to_string()))?;
    say!("{text}");
    if cfg.out.is_some() {
        let dir = output_dir(&cfg)?;
        write_json(&dir, "inspect.json", &inspection)?;
    }
    Ok(EXIT_OK)
}
