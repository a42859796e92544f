//! Report directory layout and CSV schemas.
//!
//! ```text
//! <report>/summary.csv                 model,modes,params,test_mse,test_rel_l2,first_bin_over_1
//! <report>/samples.csv                 sample_index,seed
//! <report>/comparison.csv              bin_index,bin_center,<model>...   (normalized error, mean spectra)
//! <report>/ordering.txt                two-model cutoff ordering check
//! <report>/truth/sample_XXX_{input,target,logpower}.csv   n×n grids
//! <report>/truth/sample_XXX_radial.csv, mean_radial.csv
//! <report>/<model>/sample_XXX_{pred,logpower}.csv          n×n grids
//! <report>/<model>/sample_XXX_{radial,error}.csv, mean_radial.csv, mean_error.csv
//! <report>/<model>/history.csv         copied from the checkpoint's history, when present
//! ```
//!
//! Radial CSVs use `bin_index,bin_center,count,power`; error CSVs use
//! `bin_index,bin_center,error,normalized_error` with an empty normalized value
//! where the reference bin has no power.

use std::fs;
use std::path::{Path, PathBuf};

use ksfno_core::spectra::{error_power, log_power_2d, normalized_error_power};
use ksfno_core::training::{mse, relative_l2};
use ksfno_core::{
    cutoff_ordering, load_checkpoint, load_dataset, param_count, radial_power, FnoModel, RadialSpectrum, ScalarField2D,
    Split,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const RADIAL_HEADER: [&str; 4] = ["bin_index", "bin_center", "count", "power"];
pub const ERROR_HEADER: [&str; 4] = ["bin_index", "bin_center", "error", "normalized_error"];
pub const SUMMARY_HEADER: [&str; 6] = ["model", "modes", "params", "test_mse", "test_rel_l2", "first_bin_over_1"];

pub fn sample_stem(index: usize) -> String {
    format!("sample_{index:03}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Io(format!("{}: bad number {s:?}", path.display())))
}

fn check_header(rdr: &mut csv::Reader<fs::File>, expected: &[&str], path: &Path) -> Result<(), CliError> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(CliError::Io(format!(
            "{}: expected header {}, found {}",
            path.display(),
            expected.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// `n` rows of `n` comma-separated values, no header.
pub fn write_grid(path: &Path, n: usize, values: &[f64]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for row in values.chunks(n) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<(usize, Vec<f64>), CliError> {
    let mut rdr = reader(path, false)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        for v in rec?.iter() {
            values.push(parse_f64(v, path)?);
        }
        rows += 1;
    }
    if rows == 0 || values.len() != rows * rows {
        return Err(CliError::Io(format!("{}: not a square grid", path.display())));
    }
    Ok((rows, values))
}

pub fn write_radial(path: &Path, rs: &RadialSpectrum) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(RADIAL_HEADER)?;
    for (b, c) in rs.bin_centers().iter().enumerate() {
        w.write_record([b.to_string(), c.to_string(), rs.counts[b].to_string(), rs.power[b].to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialRow {
    pub bin_center: f64,
    pub count: usize,
    pub power: f64,
}

pub fn read_radial(path: &Path) -> Result<Vec<RadialRow>, CliError> {
    let mut rdr = reader(path, true)?;
    check_header(&mut rdr, &RADIAL_HEADER, path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(RadialRow {
                bin_center: parse_f64(&rec[1], path)?,
                count: rec[2]
                    .parse()
                    .map_err(|_| CliError::Io(format!("{}: bad count", path.display())))?,
                power: parse_f64(&rec[3], path)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub bin_center: f64,
    pub error: f64,
    pub normalized: Option<f64>,
}

pub fn error_rows(pred: &RadialSpectrum, gt: &RadialSpectrum) -> Result<Vec<ErrorRow>, CliError> {
    let err = error_power(pred, gt)?;
    let norm = normalized_error_power(pred, gt)?;
    Ok(gt
        .bin_centers()
        .into_iter()
        .zip(err)
        .zip(norm)
        .map(|((bin_center, error), normalized)| ErrorRow {
            bin_center,
            error,
            normalized,
        })
        .collect())
}

fn opt_str(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn write_errors(path: &Path, rows: &[ErrorRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(ERROR_HEADER)?;
    for (b, r) in rows.iter().enumerate() {
        w.write_record([b.to_string(), r.bin_center.to_string(), r.error.to_string(), opt_str(r.normalized)])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_errors(path: &Path) -> Result<Vec<ErrorRow>, CliError> {
    let mut rdr = reader(path, true)?;
    check_header(&mut rdr, &ERROR_HEADER, path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let normalized = match rec[3].trim() {
                "" => None,
                s => Some(parse_f64(s, path)?),
            };
            Ok(ErrorRow {
                bin_center: parse_f64(&rec[1], path)?,
                error: parse_f64(&rec[2], path)?,
                normalized,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub modes: usize,
    pub params: usize,
    pub test_mse: f64,
    pub test_rel_l2: f64,
    pub first_bin_over_1: Option<usize>,
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let mut rdr = reader(path, true)?;
    check_header(&mut rdr, &SUMMARY_HEADER, path)?;
    let bad = |what: &str| CliError::Io(format!("{}: bad {what}", path.display()));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                model: rec[0].to_string(),
                modes: rec[1].parse().map_err(|_| bad("modes"))?,
                params: rec[2].parse().map_err(|_| bad("params"))?,
                test_mse: parse_f64(&rec[3], path)?,
                test_rel_l2: parse_f64(&rec[4], path)?,
                first_bin_over_1: match rec[5].trim() {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("bin"))?),
                },
            })
        })
        .collect()
}

pub fn read_sample_indices(path: &Path) -> Result<Vec<usize>, CliError> {
    let mut rdr = reader(path, true)?;
    check_header(&mut rdr, &["sample_index", "seed"], path)?;
    rdr.records()
        .map(|rec| {
            rec?[0]
                .parse()
                .map_err(|_| CliError::Io(format!("{}: bad sample index", path.display())))
        })
        .collect()
}

/// `<ckpt>` → `<ckpt without extension>.history.csv`.
pub fn history_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("history.csv")
}

fn model_label(ckpt: &Path, taken: &[String]) -> String {
    let base = ckpt
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty() && s != "truth")
        .unwrap_or_else(|| "model".into());
    let mut label = base.clone();
    let mut k = 2;
    while taken.contains(&label) {
        label = format!("{base}_{k}");
        k += 1;
    }
    label
}

fn mkdir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Summary of an evaluation run, also written to disk.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub summary: Vec<SummaryRow>,
    pub ordering: Option<ksfno_core::CutoffOrdering>,
}

pub fn evaluate(cfg: &ExperimentConfig, data: &Path, ckpts: &[PathBuf], out: &Path) -> Result<EvalOutcome, CliError> {
    if ckpts.is_empty() {
        return Err(CliError::Validation("eval: at least one --ckpt is required".into()));
    }
    let ds = load_dataset(data)?;
    let test_idx = ds.indices(Split::Test);
    if test_idx.is_empty() {
        return Err(CliError::Validation(format!("{}: test split is empty", data.display())));
    }
    let n = ds.n();
    if n != cfg.solver.n {
        return Err(CliError::Validation(format!(
            "solver.n: config grid {} does not match dataset grid {n}",
            cfg.solver.n
        )));
    }
    let mut models = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for path in ckpts {
        let ckpt = load_checkpoint(path)?;
        if ckpt.config().n != n {
            return Err(CliError::Validation(format!(
                "{}: checkpoint grid {} does not match dataset grid {n}",
                path.display(),
                ckpt.config().n
            )));
        }
        let label = model_label(path, &labels);
        labels.push(label);
        models.push((path.clone(), ckpt));
    }

    let bins = cfg.eval.n_bins;
    let truth_dir = out.join("truth");
    mkdir(&truth_dir)?;
    let mut samples = writer(&out.join("samples.csv"))?;
    samples.write_record(["sample_index", "seed"])?;
    let mut gt_spectra = Vec::new();
    for &i in &test_idx {
        let s = &ds.samples[i];
        samples.write_record([i.to_string(), s.seed.to_string()])?;
        let stem = sample_stem(i);
        write_grid(&truth_dir.join(format!("{stem}_input.csv")), n, s.input.values())?;
        write_grid(&truth_dir.join(format!("{stem}_target.csv")), n, s.target.values())?;
        write_grid(&truth_dir.join(format!("{stem}_logpower.csv")), n, log_power_2d(&s.target)?.values())?;
        let rs = radial_power(&s.target, bins)?;
        write_radial(&truth_dir.join(format!("{stem}_radial.csv")), &rs)?;
        gt_spectra.push(rs);
    }
    samples.flush().map_err(|e| CliError::io(out, e))?;
    let gt_mean = RadialSpectrum::mean(&gt_spectra)?;
    write_radial(&truth_dir.join("mean_radial.csv"), &gt_mean)?;

    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for ((path, ckpt), label) in models.iter().zip(&labels) {
        let dir = out.join(label);
        mkdir(&dir)?;
        let model = FnoModel::new(ckpt.config())?;
        let mut pred_spectra = Vec::new();
        let (mut mse_sum, mut rel_sum) = (0.0, 0.0);
        for (k, &i) in test_idx.iter().enumerate() {
            let s = &ds.samples[i];
            let pred: ScalarField2D = model.forward(&s.input, &ckpt.params)?;
            mse_sum += mse(&pred, &s.target)?;
            rel_sum += relative_l2(&pred, &s.target)?;
            let stem = sample_stem(i);
            write_grid(&dir.join(format!("{stem}_pred.csv")), n, pred.values())?;
            write_grid(&dir.join(format!("{stem}_logpower.csv")), n, log_power_2d(&pred)?.values())?;
            let rs = radial_power(&pred, bins)?;
            write_radial(&dir.join(format!("{stem}_radial.csv")), &rs)?;
            write_errors(&dir.join(format!("{stem}_error.csv")), &error_rows(&rs, &gt_spectra[k])?)?;
            pred_spectra.push(rs);
        }
        let mean = RadialSpectrum::mean(&pred_spectra)?;
        write_radial(&dir.join("mean_radial.csv"), &mean)?;
        let rows = error_rows(&mean, &gt_mean)?;
        write_errors(&dir.join("mean_error.csv"), &rows)?;
        let normalized: Vec<Option<f64>> = rows.iter().map(|r| r.normalized).collect();
        let hist = history_path(path);
        if hist.exists() {
            fs::copy(&hist, dir.join("history.csv")).map_err(|e| CliError::io(&hist, e))?;
        }
        let count = test_idx.len() as f64;
        summary.push(SummaryRow {
            model: label.clone(),
            modes: ckpt.config().modes,
            params: param_count(ckpt.config()),
            test_mse: mse_sum / count,
            test_rel_l2: rel_sum / count,
            first_bin_over_1: ksfno_core::spectra::first_bin_exceeding(&normalized, 1.0),
        });
        curves.push(normalized);
    }

    let mut w = writer(&out.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &summary {
        w.write_record([
            r.model.clone(),
            r.modes.to_string(),
            r.params.to_string(),
            r.test_mse.to_string(),
            r.test_rel_l2.to_string(),
            r.first_bin_over_1.map_or(String::new(), |b| b.to_string()),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;

    let mut w = writer(&out.join("comparison.csv"))?;
    let mut header = vec!["bin_index".to_string(), "bin_center".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (b, c) in gt_mean.bin_centers().iter().enumerate() {
        let mut rec = vec![b.to_string(), c.to_string()];
        rec.extend(curves.iter().map(|curve| opt_str(curve[b])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;

    let ordering = if summary.len() == 2 {
        let (lo, hi) = if summary[0].modes <= summary[1].modes { (0, 1) } else { (1, 0) };
        let o = cutoff_ordering(&curves[lo], &curves[hi])?;
        let text = format!(
            "low cutoff: {} (modes {})\nhigh cutoff: {} (modes {})\nfirst bin with normalized error > 1: low {}, high {}\ntop-quartile bins where high > low: {:?}\nordering holds: {}\n",
            summary[lo].model,
            summary[lo].modes,
            summary[hi].model,
            summary[hi].modes,
            o.first_low.map_or("none".into(), |b| b.to_string()),
            o.first_high.map_or("none".into(), |b| b.to_string()),
            o.top_quartile_violations,
            o.holds()
        );
        let p = out.join("ordering.txt");
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Some(o)
    } else {
        None
    };
    Ok(EvalOutcome { summary, ordering })
}
