//! SVG rendering of a report directory. All inputs are read and every image is
//! rendered in memory before any file is written.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use plotters::style::colors::colormaps::ViridisRGB;

use crate::error::CliError;
use crate::report::{read_errors, read_grid, read_radial, read_sample_indices, read_summary, sample_stem, ErrorRow};

pub const PLOT_DIR: &str = "plots";
/// Heatmaps are block-averaged down to at most this many cells per side.
const MAX_CELLS: usize = 128;
const PANEL: u32 = 360;
const TITLE_FONT: (&str, u32) = ("sans-serif", 18);
const LABEL_FONT: (&str, u32) = ("sans-serif", 13);
/// Log-scale plots clamp values to this floor.
const LOG_DISPLAY_FLOOR: f64 = 1e-12;
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

struct Grid {
    title: String,
    n: usize,
    values: Vec<f64>,
}

struct History {
    label: String,
    epochs: Vec<f64>,
    train: Vec<f64>,
    val: Vec<f64>,
}

struct Inputs {
    fields: Vec<Grid>,
    spectra: Vec<Grid>,
    radial: Vec<Series>,
    errors: Vec<(String, Vec<ErrorRow>)>,
    histories: Vec<History>,
}

fn require(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingReport(format!("{} not found", path.display())))
    }
}

fn grid(title: &str, path: PathBuf) -> Result<Grid, CliError> {
    let (n, values) = read_grid(&require(path)?)?;
    Ok(Grid {
        title: title.to_string(),
        n,
        values,
    })
}

fn read_history(label: &str, path: &Path) -> Result<History, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let h = ksfno_core::TrainHistory::from_csv(&text)?;
    Ok(History {
        label: label.to_string(),
        epochs: h.records.iter().map(|r| r.epoch as f64).collect(),
        train: h.records.iter().map(|r| r.train_loss).collect(),
        val: h.records.iter().map(|r| r.val_loss).collect(),
    })
}

fn load_inputs(report: &Path) -> Result<Inputs, CliError> {
    if !report.is_dir() {
        return Err(CliError::MissingReport(format!("{} is not a directory", report.display())));
    }
    let summary = read_summary(&require(report.join("summary.csv"))?)?;
    if summary.is_empty() {
        return Err(CliError::MissingReport("summary.csv lists no models".into()));
    }
    let samples = read_sample_indices(&require(report.join("samples.csv"))?)?;
    let first = *samples
        .first()
        .ok_or_else(|| CliError::MissingReport("samples.csv lists no test samples".into()))?;
    let stem = sample_stem(first);
    let truth = report.join("truth");

    let mut fields = vec![
        grid("initial condition", truth.join(format!("{stem}_input.csv")))?,
        grid("ground truth", truth.join(format!("{stem}_target.csv")))?,
    ];
    let mut spectra = vec![grid("ground truth", truth.join(format!("{stem}_logpower.csv")))?];
    let radial_series = |label: &str, path: PathBuf| -> Result<Series, CliError> {
        let rows = read_radial(&require(path)?)?;
        Ok((label.to_string(), rows.iter().map(|r| (r.bin_center, r.power)).collect()))
    };
    let mut radial = vec![radial_series("ground truth", truth.join("mean_radial.csv"))?];
    let mut errors = Vec::new();
    let mut histories = Vec::new();
    for row in &summary {
        let dir = report.join(&row.model);
        let title = format!("{} (modes {})", row.model, row.modes);
        fields.push(grid(&title, dir.join(format!("{stem}_pred.csv")))?);
        spectra.push(grid(&title, dir.join(format!("{stem}_logpower.csv")))?);
        radial.push(radial_series(&title, dir.join("mean_radial.csv"))?);
        errors.push((title.clone(), read_errors(&require(dir.join("mean_error.csv"))?)?));
        let hist = dir.join("history.csv");
        if hist.is_file() {
            histories.push(read_history(&title, &hist)?);
        }
    }
    Ok(Inputs {
        fields,
        spectra,
        radial,
        errors,
        histories,
    })
}

fn plot_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::Io(format!("rendering failed: {e:?}"))
}

/// Block-averages a grid to at most `MAX_CELLS` per side.
fn downsample(g: &Grid) -> (usize, Vec<f64>) {
    let factor = g.n.div_ceil(MAX_CELLS).max(1);
    if factor == 1 {
        return (g.n, g.values.clone());
    }
    let m = g.n / factor;
    let mut out = vec![0.0; m * m];
    for i in 0..m * factor {
        for j in 0..m * factor {
            out[(i / factor) * m + j / factor] += g.values[i * g.n + j];
        }
    }
    let inv = 1.0 / (factor * factor) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    (m, out)
}

/// Side-by-side heatmaps sharing one colour range.
fn heatmaps(title: &str, grids: &[Grid]) -> Result<String, CliError> {
    let mut svg = String::new();
    {
        let width = PANEL * grids.len() as u32;
        let root = SVGBackend::with_string(&mut svg, (width, PANEL + 40)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let root = root.titled(title, TITLE_FONT).map_err(plot_err)?;
        let finite = grids.iter().flat_map(|g| g.values.iter()).copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let hi = if hi > lo { hi } else { lo + 1.0 };
        for (area, g) in root.split_evenly((1, grids.len())).iter().zip(grids) {
            let (m, vals) = downsample(g);
            let mut chart = ChartBuilder::on(area)
                .caption(&g.title, LABEL_FONT)
                .margin(8)
                .build_cartesian_2d(0..m, 0..m)
                .map_err(plot_err)?;
            chart
                .draw_series((0..m * m).map(|k| {
                    let (i, j) = (k / m, k % m);
                    let c = ViridisRGB::get_color_normalized(vals[k], lo, hi);
                    Rectangle::new([(j, m - 1 - i), (j + 1, m - i)], c.filled())
                }))
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .map(|v| v.max(LOG_DISPLAY_FLOOR))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() && hi > lo {
        (lo * 0.8, hi * 1.25)
    } else {
        (LOG_DISPLAY_FLOOR, 1.0)
    }
}

type Series = (String, Vec<(f64, f64)>);

fn line_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    caption: &str,
    series: &[Series],
    guide: Option<f64>,
) -> Result<(), CliError> {
    let x_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .fold(1.0, f64::max)
        * 1.02;
    let (lo, hi) = log_range(series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(area)
        .caption(caption, TITLE_FONT)
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, (lo..hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("radial wavenumber")
        .label_style(LABEL_FONT)
        .draw()
        .map_err(plot_err)?;
    for (k, (label, pts)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts = pts.iter().map(|&(x, y)| (x, y.max(LOG_DISPLAY_FLOOR)));
        chart
            .draw_series(LineSeries::new(pts, colour.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], colour.stroke_width(2)));
    }
    if let Some(g) = guide.filter(|g| (lo..hi).contains(g)) {
        chart
            .draw_series(LineSeries::new([(0.0, g), (x_max, g)], BLACK.mix(0.4)))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .label_font(LABEL_FONT)
        .draw()
        .map_err(plot_err)?;
    Ok(())
}

/// Mean radial power, error power and normalized error power against wavenumber.
fn spectrum_curves(radial: &[Series], errors: &[(String, Vec<ErrorRow>)]) -> Result<String, CliError> {
    let pick = |f: fn(&ErrorRow) -> Option<f64>| -> Vec<Series> {
        errors
            .iter()
            .map(|(label, rows)| {
                let pts = rows.iter().filter_map(|r| f(r).map(|v| (r.bin_center, v))).collect();
                (label.clone(), pts)
            })
            .collect()
    };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (3 * 440, 400)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let panels = root.split_evenly((1, 3));
        line_panel(&panels[0], "mean radial power", radial, None)?;
        line_panel(&panels[1], "error power |P_pred - P_true|", &pick(|r| Some(r.error)), None)?;
        line_panel(&panels[2], "normalized error power", &pick(|r| r.normalized), Some(1.0))?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

fn loss_curves(histories: &[History]) -> Result<String, CliError> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (640, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let x_max = histories
            .iter()
            .flat_map(|h| h.epochs.iter().copied())
            .fold(1.0, f64::max);
        let (lo, hi) = log_range(histories.iter().flat_map(|h| h.train.iter().chain(&h.val).copied()));
        let mut chart = ChartBuilder::on(&root)
            .caption("relative L2 loss", TITLE_FONT)
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..x_max, (lo..hi).log_scale())
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("epoch")
            .label_style(LABEL_FONT)
            .draw()
            .map_err(plot_err)?;
        for (k, h) in histories.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            for (series, name, style) in [
                (&h.train, "train", colour.stroke_width(2)),
                (&h.val, "val", colour.mix(0.5).stroke_width(2)),
            ] {
                let points: Vec<(f64, f64)> =
                    h.epochs.iter().zip(series).map(|(&e, &v)| (e, v.max(LOG_DISPLAY_FLOOR))).collect();
                chart
                    .draw_series(LineSeries::new(points, style))
                    .map_err(plot_err)?
                    .label(format!("{} {name}", h.label))
                    .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], style));
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font(LABEL_FONT)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Renders `fields.svg`, `spectra.svg`, `errors.svg` and, when histories are
/// present, `losses.svg` into `<report>/plots`. Returns the written paths.
pub fn render_report(report: &Path) -> Result<Vec<PathBuf>, CliError> {
    let inputs = load_inputs(report)?;
    let mut images = vec![
        ("fields.svg", heatmaps("fields (first test sample)", &inputs.fields)?),
        ("spectra.svg", heatmaps("log power spectra (first test sample)", &inputs.spectra)?),
        ("errors.svg", spectrum_curves(&inputs.radial, &inputs.errors)?),
    ];
    if inputs.histories.is_empty() {
        log::warn!("no history.csv in the report; skipping loss curves");
    } else {
        images.push(("losses.svg", loss_curves(&inputs.histories)?));
    }
    let dir = report.join(PLOT_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    images
        .into_iter()
        .map(|(name, svg)| {
            let path = dir.join(name);
            fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
