//! Python module `ksfno`. Fields are exchanged as lists of row lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ksfno_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use ksfno_core::spectra;
use ksfno_core::training::{self, relative_l2_with_grad};
use ksfno_core::{Error, FnoConfig, FnoParams, ScalarField2D, SolverConfig, Split};

create_exception!(ksfno, BlowUpError, PyRuntimeError, "The solver or the network produced a non-finite or exploding field.");

type Rows = Vec<Vec<f64>>;
/// `(epoch, train_loss, val_loss, lr)` per epoch.
type HistoryRows = Vec<(usize, f64, f64, f64)>;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        BlowUpError::new_err(e.to_string())
    } else if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Square row-major grid to a field.
pub fn field_from_rows(rows: &[Vec<f64>], h: f64) -> Result<ScalarField2D, Error> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!("expected a square grid with {n} rows")));
    }
    ScalarField2D::new(n, h, rows.concat())
}

pub fn rows_from_field(f: &ScalarField2D) -> Rows {
    f.values().chunks(f.n()).map(<[f64]>::to_vec).collect()
}

fn field(rows: Rows, h: f64) -> PyResult<ScalarField2D> {
    field_from_rows(&rows, h).map_err(to_py)
}

/// Number of trainable parameters of the network.
#[pyfunction]
#[pyo3(signature = (modes, hidden, in_channels = 3, proj_hidden = 128))]
fn param_count(modes: usize, hidden: usize, in_channels: usize, proj_hidden: usize) -> usize {
    ksfno_core::param_count(&FnoConfig {
        in_channels,
        proj_hidden,
        ..FnoConfig::new(2 * modes.max(2), modes, hidden)
    })
}

/// Uniform(0, 1) initial condition for `seed`.
#[pyfunction]
#[pyo3(signature = (n, seed, h = 1.0))]
fn generate_initial(n: usize, seed: u64, h: f64) -> PyResult<Rows> {
    ksfno_core::generate_initial(n, h, seed).map(|f| rows_from_field(&f)).map_err(to_py)
}

/// Explicit Euler integration; returns `(times, frames)`.
#[pyfunction]
#[pyo3(signature = (u0, dt, t_final, h = 1.0, snapshot_stride = None))]
fn evolve(u0: Rows, dt: f64, t_final: f64, h: f64, snapshot_stride: Option<usize>) -> PyResult<(Vec<f64>, Vec<Rows>)> {
    let u0 = field(u0, h)?;
    let mut cfg = SolverConfig {
        n: u0.n(),
        h,
        dt,
        t_final,
        snapshot_stride: 1,
    };
    cfg.snapshot_stride = snapshot_stride.unwrap_or_else(|| cfg.steps().max(1));
    let traj = ksfno_core::evolve(&u0, &cfg).map_err(to_py)?;
    Ok((traj.times, traj.frames.iter().map(rows_from_field).collect()))
}

/// Right-hand side `−½|∇u|² − ∇²u − ∇⁴u`.
#[pyfunction]
#[pyo3(signature = (u, h = 1.0))]
fn ks_rhs(u: Rows, h: f64) -> PyResult<Rows> {
    Ok(rows_from_field(&ksfno_core::solver::rhs(&field(u, h)?)))
}

fn radial(u: Rows, n_bins: usize) -> PyResult<ksfno_core::RadialSpectrum> {
    ksfno_core::radial_power(&field(u, 1.0)?, n_bins).map_err(to_py)
}

/// Radially averaged power: dict with `bin_edges`, `bin_centers`, `power`, `counts`.
#[pyfunction]
#[pyo3(signature = (u, n_bins = 28))]
fn radial_power<'py>(py: Python<'py>, u: Rows, n_bins: usize) -> PyResult<Bound<'py, PyDict>> {
    let rs = radial(u, n_bins)?;
    let d = PyDict::new(py);
    d.set_item("bin_centers", rs.bin_centers())?;
    d.set_item("bin_edges", rs.bin_edges)?;
    d.set_item("power", rs.power)?;
    d.set_item("counts", rs.counts)?;
    Ok(d)
}

/// DC-centred `log(P + 1e-12)` grid.
#[pyfunction]
fn log_power_2d(u: Rows) -> PyResult<Rows> {
    let lp = spectra::log_power_2d(&field(u, 1.0)?).map_err(to_py)?;
    Ok(lp.values().chunks(lp.n()).map(<[f64]>::to_vec).collect())
}

/// `|P_pred − P_true|` per radial bin.
#[pyfunction]
#[pyo3(signature = (pred, truth, n_bins = 28))]
fn error_power(pred: Rows, truth: Rows, n_bins: usize) -> PyResult<Vec<f64>> {
    spectra::error_power(&radial(pred, n_bins)?, &radial(truth, n_bins)?).map_err(to_py)
}

/// `|P_pred − P_true| / P_true` per radial bin; `None` where `P_true` is zero.
#[pyfunction]
#[pyo3(signature = (pred, truth, n_bins = 28))]
fn normalized_error_power(pred: Rows, truth: Rows, n_bins: usize) -> PyResult<Vec<Option<f64>>> {
    spectra::normalized_error_power(&radial(pred, n_bins)?, &radial(truth, n_bins)?).map_err(to_py)
}

/// Fraction of radial bins above `1e-6 ×` the strongest bin.
#[pyfunction]
#[pyo3(signature = (u, n_bins = 28))]
fn active_bin_fraction(u: Rows, n_bins: usize) -> PyResult<f64> {
    Ok(spectra::active_bin_fraction(&radial(u, n_bins)?))
}

#[pyfunction]
fn relative_l2(pred: Rows, target: Rows) -> PyResult<f64> {
    training::relative_l2(&field(pred, 1.0)?, &field(target, 1.0)?).map_err(to_py)
}

#[pyfunction]
fn mse(pred: Rows, target: Rows) -> PyResult<f64> {
    training::mse(&field(pred, 1.0)?, &field(target, 1.0)?).map_err(to_py)
}

/// Step schedule `lr · gamma^⌊(epoch − 1) / step⌋` (epochs count from 1).
#[pyfunction]
#[pyo3(signature = (epoch, lr = 1e-3, step = 30, gamma = 0.5))]
fn step_lr(epoch: usize, lr: f64, step: usize, gamma: f64) -> PyResult<f64> {
    let cfg = ksfno_core::TrainConfig {
        lr,
        scheduler_step: step,
        scheduler_gamma: gamma,
        ..Default::default()
    };
    cfg.validate().map_err(to_py)?;
    Ok(training::step_lr(epoch, &cfg))
}

/// Fourier neural operator with its parameters.
#[pyclass(module = "ksfno")]
struct FnoModel {
    model: ksfno_core::FnoModel,
    params: FnoParams,
    seed: u64,
}

impl FnoModel {
    fn from_params(params: FnoParams, seed: u64) -> PyResult<Self> {
        let model = ksfno_core::FnoModel::new(params.config()).map_err(to_py)?;
        Ok(Self { model, params, seed })
    }

    fn input(&self, u0: Rows) -> PyResult<ScalarField2D> {
        let u = field(u0, 1.0)?;
        if u.n() != self.params.config().n {
            return Err(PyValueError::new_err(format!(
                "input grid {} does not match model grid {}",
                u.n(),
                self.params.config().n
            )));
        }
        Ok(u)
    }
}

#[pymethods]
impl FnoModel {
    #[new]
    #[pyo3(signature = (n, modes, hidden, proj_hidden = 128, in_channels = 3, seed = 0))]
    fn new(n: usize, modes: usize, hidden: usize, proj_hidden: usize, in_channels: usize, seed: u64) -> PyResult<Self> {
        let cfg = FnoConfig {
            proj_hidden,
            in_channels,
            ..FnoConfig::new(n, modes, hidden)
        };
        cfg.validate().map_err(to_py)?;
        Self::from_params(ksfno_core::init_params(&cfg, seed), seed)
    }

    #[getter]
    fn n(&self) -> usize {
        self.params.config().n
    }

    #[getter]
    fn modes(&self) -> usize {
        self.params.config().modes
    }

    #[getter]
    fn hidden(&self) -> usize {
        self.params.config().hidden
    }

    fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Flat parameter vector in canonical order.
    #[getter]
    fn get_params(&self) -> Vec<f64> {
        self.params.as_slice().to_vec()
    }

    #[setter]
    fn set_params(&mut self, values: Vec<f64>) -> PyResult<()> {
        self.params = FnoParams::from_vec(self.params.config(), values).map_err(to_py)?;
        Ok(())
    }

    fn forward(&self, u0: Rows) -> PyResult<Rows> {
        let u = self.input(u0)?;
        self.model.forward(&u, &self.params).map(|y| rows_from_field(&y)).map_err(to_py)
    }

    /// Relative-L2 loss against `target` and its gradient over the parameters.
    fn loss_and_grad(&self, u0: Rows, target: Rows) -> PyResult<(f64, Vec<f64>)> {
        let u = self.input(u0)?;
        let t = field(target, 1.0)?;
        let (pred, cache) = self.model.forward_cached(&u, &self.params).map_err(to_py)?;
        let (loss, upstream) = relative_l2_with_grad(&pred, &t).map_err(to_py)?;
        let g = self.model.backward(&cache, &self.params, &upstream).map_err(to_py)?;
        Ok((loss, g.into_vec()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(
            &Checkpoint {
                params: self.params.clone(),
                seed: self.seed,
            },
            path,
        )
        .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let c = load_checkpoint(path).map_err(to_py)?;
        Self::from_params(c.params, c.seed)
    }

    fn __repr__(&self) -> String {
        let c = self.params.config();
        format!(
            "FnoModel(n={}, modes={}, hidden={}, proj_hidden={}, params={})",
            c.n,
            c.modes,
            c.hidden,
            c.proj_hidden,
            self.params.len()
        )
    }
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Unused => "unused",
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

/// Generated `(u0, u(t_final))` pairs with their split tags.
#[pyclass(module = "ksfno")]
struct Dataset {
    inner: ksfno_core::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (count, n, base_seed = 0, dt = 0.01, t_final = 10.0, h = 1.0, splits = (0, 0, 0)))]
    fn generate(
        count: usize,
        n: usize,
        base_seed: u64,
        dt: f64,
        t_final: f64,
        h: f64,
        splits: (usize, usize, usize),
    ) -> PyResult<Self> {
        let cfg = SolverConfig {
            n,
            h,
            dt,
            t_final,
            snapshot_stride: 1,
        };
        let ds = ksfno_core::generate_dataset(count, base_seed, &cfg).map_err(to_py)?;
        let ds = ksfno_core::assign_split(ds, splits.0, splits.1, splits.2).map_err(to_py)?;
        Ok(Self { inner: ds })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ksfno_core::load_dataset(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ksfno_core::save_dataset(&self.inner, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn splits(&self) -> Vec<&'static str> {
        self.inner.split.iter().map(|&s| split_name(s)).collect()
    }

    /// `(input, target, seed)` of sample `i`.
    fn sample(&self, i: usize) -> PyResult<(Rows, Rows, u64)> {
        let s = self
            .inner
            .samples
            .get(i)
            .ok_or_else(|| PyIndexError::new_err(format!("sample {i} out of range")))?;
        Ok((rows_from_field(&s.input), rows_from_field(&s.target), s.seed))
    }

    /// Trains a fresh model on the train/val splits; returns `(model, history)` where
    /// history is a list of `(epoch, train_loss, val_loss, lr)`.
    #[pyo3(signature = (modes, hidden, proj_hidden = 128, lr = 1e-3, weight_decay = 1e-4, batch_size = 8,
                        max_epochs = 100, scheduler_step = 30, scheduler_gamma = 0.5, patience = Some(20), seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        modes: usize,
        hidden: usize,
        proj_hidden: usize,
        lr: f64,
        weight_decay: f64,
        batch_size: usize,
        max_epochs: usize,
        scheduler_step: usize,
        scheduler_gamma: f64,
        patience: Option<usize>,
        seed: u64,
    ) -> PyResult<(FnoModel, HistoryRows)> {
        let fno = FnoConfig {
            proj_hidden,
            ..FnoConfig::new(self.inner.n(), modes, hidden)
        };
        let cfg = ksfno_core::TrainConfig {
            lr,
            weight_decay,
            scheduler_step,
            scheduler_gamma,
            batch_size,
            max_epochs,
            seed,
            early_stop_patience: patience,
        };
        let out = ksfno_core::train(&self.inner, &fno, &cfg).map_err(to_py)?;
        let history = out
            .history
            .records
            .iter()
            .map(|r| (r.epoch, r.train_loss, r.val_loss, r.lr))
            .collect();
        Ok((FnoModel::from_params(out.params, seed)?, history))
    }
}

#[pymodule]
fn ksfno(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BlowUpError", m.py().get_type::<BlowUpError>())?;
    m.add_class::<FnoModel>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(generate_initial, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(ks_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(radial_power, m)?)?;
    m.add_function(wrap_pyfunction!(log_power_2d, m)?)?;
    m.add_function(wrap_pyfunction!(error_power, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_error_power, m)?)?;
    m.add_function(wrap_pyfunction!(active_bin_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(relative_l2, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(step_lr, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let f = ksfno_core::generate_initial(6, 1.0, 1).unwrap();
        let rows = rows_from_field(&f);
        assert_eq!(rows.len(), 6);
        assert_eq!(field_from_rows(&rows, 1.0).unwrap(), f);
        assert!(field_from_rows(&[vec![1.0, 2.0], vec![3.0]], 1.0).is_err());
    }

    #[test]
    fn param_count_ignores_grid() {
        assert_eq!(param_count(12, 64, 3, 128), 4_743_937);
        assert_eq!(param_count(24, 64, 3, 128), 18_899_713);
    }
}
