use std::path::{Path, PathBuf};

use ksfno_core::checkpoint::{save_checkpoint, Checkpoint};
use ksfno_core::dataset::generate_dataset_with_progress;
use ksfno_core::{assign_split, load_dataset, param_count, save_dataset, Error, Split};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{evaluate, history_path, EvalOutcome};

pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let solver = cfg.solver_config();
    let count = cfg.data.count;
    eprintln!(
        "generating {count} samples: n={} dt={} t_final={} ({} steps)",
        solver.n,
        solver.dt,
        solver.t_final,
        solver.steps()
    );
    let ds = generate_dataset_with_progress(count, cfg.data.base_seed, &solver, |i, s| {
        eprintln!(
            "  sample {:>4}/{count} seed {:>6}: final min {:+.4} max {:+.4} mean {:+.4}",
            i + 1,
            s.seed,
            s.target.min(),
            s.target.max(),
            s.target.mean()
        );
    })?;
    let [tr, va, te] = cfg.data.splits;
    let ds = assign_split(ds, tr, va, te)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    save_dataset(&ds, out)?;

    let finals = ds.samples.iter().map(|s| &s.target);
    let min = finals.clone().map(|f| f.min()).fold(f64::INFINITY, f64::min);
    let max = finals.clone().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
    let mean = finals.map(|f| f.mean()).sum::<f64>() / ds.len() as f64;
    println!(
        "wrote {} ({} samples, split {}/{}/{}/{} train/val/test/unused); final frames min {min:.4} max {max:.4} mean {mean:.4}",
        out.display(),
        ds.len(),
        ds.count(Split::Train),
        ds.count(Split::Val),
        ds.count(Split::Test),
        ds.count(Split::Unused)
    );
    Ok(())
}

/// `out` itself for a single cutoff, `<stem>_m<modes>.<ext>` for several.
pub fn checkpoint_paths(out: &Path, modes: &[usize]) -> Vec<PathBuf> {
    if modes.len() == 1 {
        return vec![out.to_path_buf()];
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned());
    modes
        .iter()
        .map(|m| {
            let name = match &ext {
                Some(e) => format!("{stem}_m{m}.{e}"),
                None => format!("{stem}_m{m}"),
            };
            out.with_file_name(name)
        })
        .collect()
}

pub fn train_models(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let ds = load_dataset(data)?;
    if ds.n() != cfg.solver.n {
        return Err(CliError::Validation(format!(
            "solver.n: config grid {} does not match dataset grid {}",
            cfg.solver.n,
            ds.n()
        )));
    }
    let train_cfg = cfg.train_config();
    let paths = checkpoint_paths(out, &cfg.model.modes);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    for (&modes, path) in cfg.model.modes.iter().zip(&paths) {
        let fno = cfg.fno_config(modes);
        eprintln!(
            "training modes={modes}: {} parameters, {} train / {} val samples",
            param_count(&fno),
            ds.count(Split::Train),
            ds.count(Split::Val)
        );
        let result = ksfno_core::training::train_with_observer(&ds, &fno, &train_cfg, |r| {
            eprintln!(
                "  epoch {:>4}: train {:.6} val {:.6} lr {:.3e}",
                r.epoch, r.train_loss, r.val_loss, r.lr
            );
        });
        let hist_path = history_path(path);
        let outcome = match result {
            Ok(o) => o,
            Err(Error::TrainingDiverged { epoch, history }) => {
                write_text(&hist_path, &history.to_csv())?;
                return Err(CliError::Numerical(format!(
                    "training modes={modes} diverged at epoch {epoch}; partial history in {}",
                    hist_path.display()
                )));
            }
            Err(e) => return Err(e.into()),
        };
        save_checkpoint(
            &Checkpoint {
                params: outcome.params,
                seed: train_cfg.seed,
            },
            path,
        )?;
        write_text(&hist_path, &outcome.history.to_csv())?;
        let h = &outcome.history;
        println!(
            "wrote {} (initial train loss {:.6}, best train {:.6}, best val epoch {})",
            path.display(),
            h.initial_train_loss.unwrap_or(f64::NAN),
            h.best_train_loss().unwrap_or(f64::NAN),
            h.best_val_epoch().map_or("-".into(), |e| e.to_string())
        );
    }
    Ok(paths)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn eval(cfg: &ExperimentConfig, data: &Path, ckpts: &[PathBuf], out: &Path) -> Result<EvalOutcome, CliError> {
    let outcome = evaluate(cfg, data, ckpts, out)?;
    for r in &outcome.summary {
        println!(
            "{}: modes {} params {} test MSE {:.6e} test rel-L2 {:.6} first bin with normalized error > 1: {}",
            r.model,
            r.modes,
            r.params,
            r.test_mse,
            r.test_rel_l2,
            r.first_bin_over_1.map_or("none".into(), |b| b.to_string())
        );
    }
    if let Some(o) = &outcome.ordering {
        println!("cutoff ordering holds: {}", o.holds());
    }
    println!("report written to {}", out.display());
    Ok(outcome)
}

pub fn plot(report: &Path) -> Result<(), CliError> {
    for p in crate::plot::render_report(report)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// n=32, 8 samples, tiny models: seconds.
    Smoke,
    /// n=64, 128 samples, hidden width 32: minutes on one core.
    Reduced,
    /// The configuration file as written.
    Paper,
}

/// Applies the scale preset on top of the configuration; paths and seeds are kept.
pub fn apply_scale(cfg: &ExperimentConfig, scale: Scale) -> ExperimentConfig {
    let mut c = cfg.clone();
    match scale {
        Scale::Paper => {}
        Scale::Smoke => {
            c.solver.n = 32;
            c.solver.t_final = 1.0;
            c.data.count = 8;
            c.data.splits = [4, 2, 2];
            c.model.modes = vec![4, 8];
            c.model.hidden = 8;
            c.model.proj_hidden = 32;
            c.train.lr = 1e-2;
            c.train.batch_size = 2;
            c.train.max_epochs = 5;
            c.eval.n_bins = 12;
        }
        Scale::Reduced => {
            c.solver.n = 64;
            c.data.count = 128;
            c.data.splits = [80, 20, 20];
            c.model.modes = vec![12, 24];
            c.model.hidden = 32;
            c.train.lr = 3e-3;
            c.train.batch_size = 4;
            c.train.max_epochs = 40;
            c.train.patience = 10;
            c.eval.n_bins = 14;
        }
    }
    c
}

pub fn reproduce(cfg: &ExperimentConfig, scale: Scale) -> Result<(), CliError> {
    let cfg = apply_scale(cfg, scale);
    cfg.validate()?;
    let p = &cfg.paths;
    generate(&cfg, &p.dataset)?;
    let ckpt_base = p.checkpoints.with_extension("ksf");
    let ckpts = train_models(&cfg, &p.dataset, &ckpt_base)?;
    eval(&cfg, &p.dataset, &ckpts, &p.reports)?;
    plot(&p.reports)
}
