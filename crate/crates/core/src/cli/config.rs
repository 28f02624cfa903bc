use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Scheme, SolverSpec, SyntheticConfig};
use crate::mkl::{GammaStep, MklConfig};
use crate::svm::SvmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SvmKind {
    C,
    Nu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Rg,
    Lp,
}

impl From<StepKind> for GammaStep {
    fn from(s: StepKind) -> Self {
        match s {
            StepKind::Rg => GammaStep::ReducedGradient,
            StepKind::Lp => GammaStep::LpDirection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Ovo,
    Ovr,
}

impl From<SchemeKind> for Scheme {
    fn from(s: SchemeKind) -> Self {
        match s {
            SchemeKind::Ovo => Scheme::OneVsOne,
            SchemeKind::Ovr => Scheme::OneVsRest,
        }
    }
}

/// Every parameter of a run. Loaded from TOML, overridden by flags, then
/// resolved so that no default stays implicit in the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSKB file, or CSV kernel files when `labels` is set. Without it the
    /// synthetic benchmark is generated.
    pub bank: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Solver names, optionally `name:param` (`cskl:4`, `lpmkl:1.5`).
    pub solver: Vec<String>,
    pub svm: SvmKind,
    pub t: Option<usize>,
    pub p: Option<f64>,
    pub c: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub gap_tolerance: f64,
    pub max_outer_iters: usize,
    pub kkt_tolerance: f64,
    pub gamma_step: StepKind,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub t_min: usize,
    pub t_max: Option<usize>,
    pub runs: usize,
    pub scheme: SchemeKind,
    pub train_fraction: f64,
    pub jitter: f64,
    /// Sample count of the generated benchmark.
    pub m: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bank: Vec::new(),
            labels: None,
            groups: None,
            out: None,
            solver: Vec::new(),
            svm: SvmKind::Nu,
            t: None,
            p: None,
            c: 10.0,
            nu: 0.2,
            epsilon: 1e-5,
            gap_tolerance: 1e-4,
            max_outer_iters: 200,
            kkt_tolerance: 1e-6,
            gamma_step: StepKind::Rg,
            seed: 0,
            threads: 0,
            t_min: 1,
            t_max: None,
            runs: 1,
            scheme: SchemeKind::Ovo,
            train_fraction: 0.5,
            jitter: 1e-8,
            m: 500,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn svm_config(&self) -> SvmConfig {
        let svm = match self.svm {
            SvmKind::C => SvmConfig::c_svm(self.c),
            SvmKind::Nu => SvmConfig::nu_svm(self.nu),
        };
        svm.with_tolerance(self.kkt_tolerance)
    }

    pub fn mkl_config(&self) -> MklConfig {
        MklConfig {
            tolerance: self.epsilon,
            gap_tolerance: self.gap_tolerance,
            max_outer_iters: self.max_outer_iters,
            ..MklConfig::new(self.svm_config())
        }
    }

    pub fn synthetic(&self, run: usize) -> SyntheticConfig {
        SyntheticConfig {
            m: self.m,
            seed: self.seed + run as u64,
            train_fraction: self.train_fraction,
            jitter: self.jitter,
            ..SyntheticConfig::default()
        }
    }

    /// Checks values that do not depend on the bank.
    pub fn validate(&self) -> Result<()> {
        self.mkl_config().validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("c", self.c)?;
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!(
                "nu must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid(format!(
                "jitter must be non-negative, got {}",
                self.jitter
            )));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.t == Some(0) {
            return Err(Error::invalid("t must be at least 1, got 0"));
        }
        if self.t_min == 0 {
            return Err(Error::invalid("t-min must be at least 1"));
        }
        if let Some(hi) = self.t_max {
            if hi < self.t_min {
                return Err(Error::invalid(format!(
                    "t-max {hi} is below t-min {}",
                    self.t_min
                )));
            }
        }
        if let Some(p) = self.p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::invalid(format!(
                    "p must be a finite value above 1, got {p}"
                )));
            }
        }
        if self.labels.is_some() && self.bank.is_empty() {
            return Err(Error::invalid("labels given without kernel files"));
        }
        if self.bank.is_empty() {
            self.synthetic(0).validate()?;
        }
        Ok(())
    }

    /// Parses the solver list, filling `t` and `p` from the shared flags.
    /// `t` is only accepted alongside a CSKL solver and `p` alongside
    /// Lp-MKL.
    pub fn solvers(&self) -> Result<Vec<SolverSpec>> {
        let step = GammaStep::from(self.gamma_step);
        let mut out = Vec::new();
        for entry in &self.solver {
            let (name, param) = match entry.split_once(':') {
                Some((n, v)) => (n.trim(), Some(v.trim())),
                None => (entry.trim(), None),
            };
            let bad = || Error::invalid(format!("bad solver parameter in \"{entry}\""));
            let spec = match (name, param) {
                ("cskl", p) => {
                    let t = match p {
                        Some(v) => v.parse().map_err(|_| bad())?,
                        None => self
                            .t
                            .ok_or_else(|| Error::invalid("solver cskl needs --t"))?,
                    };
                    SolverSpec::Cskl {
                        t,
                        gamma_step: step,
                    }
                }
                ("lpmkl", p) => {
                    let p = match p {
                        Some(v) => v.parse().map_err(|_| bad())?,
                        None => self.p.unwrap_or(2.0),
                    };
                    SolverSpec::LpMkl { p }
                }
                ("simplemkl", None) => SolverSpec::SimpleMkl,
                ("uniform", None) => SolverSpec::Uniform,
                ("simplemkl" | "uniform", Some(_)) => return Err(bad()),
                _ => {
                    return Err(Error::invalid(format!(
                        "unknown solver \"{name}\" (expected cskl, simplemkl, lpmkl or uniform)"
                    )))
                }
            };
            out.push(spec);
        }
        let has_cskl = out.iter().any(|s| matches!(s, SolverSpec::Cskl { .. }));
        let has_lp = out.iter().any(|s| matches!(s, SolverSpec::LpMkl { .. }));
        if self.t.is_some() && !has_cskl {
            return Err(Error::invalid("--t only applies to the cskl solver"));
        }
        if self.p.is_some() && !has_lp {
            return Err(Error::invalid("--p only applies to the lpmkl solver"));
        }
        Ok(out)
    }

    /// Materializes the defaults that depend on the solver list or the host.
    pub fn resolve(mut self) -> Result<Self> {
        self.validate()?;
        let solvers = if self.solver.is_empty() {
            Vec::new()
        } else {
            self.solvers()?
        };
        if self.p.is_none()
            && solvers
                .iter()
                .any(|s| matches!(s, SolverSpec::LpMkl { .. }))
        {
            self.p = Some(2.0);
        }
        if self.threads == 0 {
            self.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        }
        Ok(self)
    }
}
