//! Experiment configuration document (TOML). Every section is optional and falls
//! back to the full-scale settings; unknown keys are rejected.

use std::path::{Path, PathBuf};

use ksfno_core::{FnoConfig, SolverConfig, TrainConfig};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n: 128,
            h: 1.0,
            dt: 0.01,
            t_final: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub count: usize,
    pub base_seed: u64,
    /// Train, validation and test sizes; the remainder is unused.
    pub splits: [usize; 3],
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            count: 128,
            base_seed: 0,
            splits: [80, 20, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// One model is trained per entry.
    pub modes: Vec<usize>,
    pub hidden: usize,
    pub proj_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            modes: vec![12, 24],
            hidden: 64,
            proj_hidden: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub scheduler_step: usize,
    pub scheduler_gamma: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            lr: d.lr,
            weight_decay: d.weight_decay,
            scheduler_step: d.scheduler_step,
            scheduler_gamma: d.scheduler_gamma,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.early_stop_patience.unwrap_or(0),
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub n_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { n_bins: 28 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub dataset: PathBuf,
    /// Checkpoint path stem; `reproduce` writes `<stem>_m<modes>.ksf`.
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset: "out/ks.ksd".into(),
            checkpoints: "out/fno".into(),
            reports: "out/report".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub solver: SolverSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let at = line.map_or(String::new(), |l| format!(" (line {l})"));
            CliError::Validation(format!("config{at}: {}", e.message().trim()))
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        let steps = (self.solver.t_final / self.solver.dt).round().max(1.0) as usize;
        SolverConfig {
            n: self.solver.n,
            h: self.solver.h,
            dt: self.solver.dt,
            t_final: self.solver.t_final,
            snapshot_stride: steps,
        }
    }

    pub fn fno_config(&self, modes: usize) -> FnoConfig {
        FnoConfig {
            proj_hidden: self.model.proj_hidden,
            ..FnoConfig::new(self.solver.n, modes, self.model.hidden)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr: t.lr,
            weight_decay: t.weight_decay,
            scheduler_step: t.scheduler_step,
            scheduler_gamma: t.scheduler_gamma,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            seed: t.seed,
            early_stop_patience: (t.patience > 0).then_some(t.patience),
        }
    }

    /// Checks every section against the owning module's preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.solver;
        if s.n < ksfno_core::field::MIN_GRID || !s.n.is_multiple_of(2) {
            return Err(invalid("solver.n", format!("must be even and at least 4, got {}", s.n)));
        }
        if !(s.h > 0.0 && s.h.is_finite()) {
            return Err(invalid("solver.h", format!("must be positive, got {}", s.h)));
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid("solver.dt", format!("must be positive, got {}", s.dt)));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(invalid("solver.t_final", format!("must be positive, got {}", s.t_final)));
        }
        self.solver_config()
            .validate()
            .map_err(|e| invalid("solver.t_final", e))?;

        let d = &self.data;
        if d.count == 0 {
            return Err(invalid("data.count", "must be at least 1"));
        }
        let requested: usize = d.splits.iter().sum();
        if requested > d.count {
            return Err(invalid(
                "data.splits",
                format!("train+val+test = {requested} exceeds data.count = {}", d.count),
            ));
        }
        if d.splits[0] == 0 || d.splits[1] == 0 {
            return Err(invalid("data.splits", "train and validation splits must be nonempty"));
        }
        if d.splits[2] == 0 {
            return Err(invalid("data.splits", "test split must be nonempty"));
        }

        let m = &self.model;
        if m.modes.is_empty() {
            return Err(invalid("model.modes", "must list at least one cutoff"));
        }
        for (i, &modes) in m.modes.iter().enumerate() {
            self.fno_config(modes)
                .validate()
                .map_err(|e| invalid(&format!("model.modes[{i}]"), e))?;
        }
        if m.hidden == 0 {
            return Err(invalid("model.hidden", "must be at least 1"));
        }
        if m.proj_hidden == 0 {
            return Err(invalid("model.proj_hidden", "must be at least 1"));
        }
        let mut sorted = m.modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != m.modes.len() {
            return Err(invalid("model.modes", "entries must be distinct"));
        }

        let t = &self.train;
        let field = |name: &str| format!("train.{name}");
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(invalid(&field("lr"), format!("must be positive, got {}", t.lr)));
        }
        if !(t.weight_decay >= 0.0 && t.weight_decay.is_finite()) {
            return Err(invalid(&field("weight_decay"), format!("must be nonnegative, got {}", t.weight_decay)));
        }
        if t.scheduler_step == 0 {
            return Err(invalid(&field("scheduler_step"), "must be at least 1"));
        }
        if !(t.scheduler_gamma > 0.0 && t.scheduler_gamma <= 1.0) {
            return Err(invalid(&field("scheduler_gamma"), format!("must lie in (0, 1], got {}", t.scheduler_gamma)));
        }
        if t.batch_size == 0 {
            return Err(invalid(&field("batch_size"), "must be at least 1"));
        }
        self.train_config().validate().map_err(|e| invalid("train", e))?;

        if self.eval.n_bins == 0 {
            return Err(invalid("eval.n_bins", "must be at least 1"));
        }
        for (name, p) in [
            ("paths.dataset", &self.paths.dataset),
            ("paths.checkpoints", &self.paths.checkpoints),
            ("paths.reports", &self.paths.reports),
        ] {
            if p.as_os_str().is_empty() {
                return Err(invalid(name, "must not be empty"));
            }
        }
        Ok(())
    }
}
