//! Relative-L2 training with Adam (decoupled weight decay) and a step learning-rate
//! schedule. Batches are shuffled by a seeded stream and per-sample gradients are
//! summed in batch order, so a run with a fixed seed is bitwise reproducible.

use rayon::prelude::*;

use crate::dataset::{Dataset, Sample, Split};
use crate::error::{Error, Result};
use crate::field::ScalarField2D;
use crate::fno::{init_params, FnoConfig, FnoModel, FnoParams};
use crate::rng::SeededStream;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Keeps the batch-order stream distinct from the parameter-initialization stream.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub scheduler_step: usize,
    pub scheduler_gamma: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop once validation loss has not improved for this many epochs.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            scheduler_step: 30,
            scheduler_gamma: 0.5,
            batch_size: 8,
            max_epochs: 100,
            seed: 0,
            early_stop_patience: Some(20),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrainConfig(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be nonnegative, got {}", self.weight_decay));
        }
        if !(self.scheduler_gamma > 0.0 && self.scheduler_gamma <= 1.0) {
            return bad(format!("scheduler_gamma must lie in (0, 1], got {}", self.scheduler_gamma));
        }
        if self.scheduler_step == 0 {
            return bad("scheduler_step must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.early_stop_patience == Some(0) {
            return bad("early_stop_patience must be at least 1 when set".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Losses of the initial parameters, before any update.
    pub initial_train_loss: Option<f64>,
    pub initial_val_loss: Option<f64>,
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn best_train_loss(&self) -> Option<f64> {
        self.records.iter().map(|r| r.train_loss).reduce(f64::min)
    }

    pub fn best_val_epoch(&self) -> Option<usize> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.val_loss <= r.val_loss => Some(b),
                _ => Some(r),
            })
            .map(|r| r.epoch)
    }

    /// `epoch,train_loss,val_loss,lr` with shortest round-trip decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("epoch,train_loss,val_loss,lr") {
            return Err(Error::Malformed("missing history header".into()));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("bad number {s:?} in history")))
        };
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Malformed(format!("history row has {} columns", cols.len())));
            }
            records.push(EpochRecord {
                epoch: cols[0]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad epoch {:?}", cols[0])))?,
                train_loss: parse(cols[1])?,
                val_loss: parse(cols[2])?,
                lr: parse(cols[3])?,
            });
        }
        Ok(Self {
            initial_train_loss: None,
            initial_val_loss: None,
            records,
        })
    }
}

/// `‖pred − target‖₂ / ‖target‖₂` over the grid.
pub fn relative_l2(pred: &ScalarField2D, target: &ScalarField2D) -> Result<f64> {
    pred.check_same_shape(target)?;
    let denom = target.norm_l2();
    if denom == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let num: f64 = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Relative L2 and its gradient with respect to `pred`.
pub fn relative_l2_with_grad(pred: &ScalarField2D, target: &ScalarField2D) -> Result<(f64, Vec<f64>)> {
    let loss = relative_l2(pred, target)?;
    let denom = target.norm_l2();
    let diff_norm = loss * denom;
    let grad = if diff_norm == 0.0 {
        vec![0.0; pred.values().len()]
    } else {
        pred.values()
            .iter()
            .zip(target.values())
            .map(|(p, t)| (p - t) / (diff_norm * denom))
            .collect()
    };
    Ok((loss, grad))
}

/// Mean squared difference over all grid points.
pub fn mse(pred: &ScalarField2D, target: &ScalarField2D) -> Result<f64> {
    pred.check_same_shape(target)?;
    let sum: f64 = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.values().len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update at step `t ≥ 1`, preceded by decoupled weight decay
/// `θ ← θ − lr·wd·θ`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, weight_decay: f64, t: u64) {
    assert!(t >= 1, "Adam step index starts at 1");
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *p -= lr * weight_decay * *p;
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// `lr · γ^⌊(epoch − 1)/step⌋` for 1-based epochs.
pub fn step_lr(epoch: usize, cfg: &TrainConfig) -> f64 {
    assert!(epoch >= 1, "epochs are 1-based");
    cfg.lr * cfg.scheduler_gamma.powi(((epoch - 1) / cfg.scheduler_step) as i32)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss (initial ones if no epoch ran).
    pub params: FnoParams,
    pub history: TrainHistory,
}

fn diverged(epoch: usize, history: &TrainHistory) -> Error {
    Error::TrainingDiverged {
        epoch,
        history: Box::new(history.clone()),
    }
}

/// Mean relative L2 over `samples`, evaluated in parallel and reduced in order.
pub fn mean_relative_l2(model: &FnoModel, params: &FnoParams, samples: &[&Sample]) -> Result<f64> {
    let losses = samples
        .par_iter()
        .map(|s| relative_l2(&model.forward(&s.input, params)?, &s.target))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Mean loss and mean gradient over a batch; per-sample gradients are summed in
/// batch order, at most one chunk of worker-count gradients alive at a time.
fn batch_gradient(model: &FnoModel, params: &FnoParams, batch: &[&Sample]) -> Result<(f64, FnoParams)> {
    let chunk = rayon::current_num_threads().max(1);
    let mut total = FnoParams::zeros(model.config());
    let mut loss_sum = 0.0;
    for group in batch.chunks(chunk) {
        let results = group
            .par_iter()
            .map(|s| {
                let (pred, cache) = model.forward_cached(&s.input, params)?;
                let (loss, upstream) = relative_l2_with_grad(&pred, &s.target)?;
                Ok((loss, model.backward(&cache, params, &upstream)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (loss, grad) in results {
            loss_sum += loss;
            total.axpy(1.0, &grad);
        }
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    Ok((loss_sum * inv, total))
}

pub fn train(ds: &Dataset, fno_cfg: &FnoConfig, train_cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(ds, fno_cfg, train_cfg, |_| {})
}

/// As [`train`], calling `observer` after every epoch.
pub fn train_with_observer(
    ds: &Dataset,
    fno_cfg: &FnoConfig,
    train_cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    let model = FnoModel::new(fno_cfg)?;
    if ds.n() != fno_cfg.n {
        return Err(Error::ShapeMismatch(format!(
            "dataset grid {} does not match model grid {}",
            ds.n(),
            fno_cfg.n
        )));
    }
    let train_set = ds.subset(Split::Train);
    let val_set = ds.subset(Split::Val);
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidTrainConfig(
            "dataset needs nonempty train and val splits".into(),
        ));
    }

    let mut params = init_params(fno_cfg, train_cfg.seed);
    let mut history = TrainHistory::default();
    if train_cfg.max_epochs == 0 {
        return Ok(TrainOutcome { params, history });
    }
    let map_numeric = |e: Error, epoch: usize, h: &TrainHistory| match e {
        Error::BlowUp { .. } => diverged(epoch, h),
        other => other,
    };
    history.initial_train_loss =
        Some(mean_relative_l2(&model, &params, &train_set).map_err(|e| map_numeric(e, 0, &history))?);
    history.initial_val_loss =
        Some(mean_relative_l2(&model, &params, &val_set).map_err(|e| map_numeric(e, 0, &history))?);

    let mut best = (f64::INFINITY, params.clone());
    let mut since_best = 0;
    let mut adam = AdamState::new(params.len());
    let mut step: u64 = 0;
    let mut shuffle_rng = SeededStream::new(train_cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=train_cfg.max_epochs {
        let lr = step_lr(epoch, train_cfg);
        shuffle_rng.shuffle(&mut order);
        for batch_idx in order.chunks(train_cfg.batch_size) {
            let batch: Vec<&Sample> = batch_idx.iter().map(|&i| train_set[i]).collect();
            let (loss, grad) =
                batch_gradient(&model, &params, &batch).map_err(|e| map_numeric(e, epoch, &history))?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(diverged(epoch, &history));
            }
            step += 1;
            adam_step(params.as_mut_slice(), grad.as_slice(), &mut adam, lr, train_cfg.weight_decay, step);
        }
        let train_loss =
            mean_relative_l2(&model, &params, &train_set).map_err(|e| map_numeric(e, epoch, &history))?;
        let val_loss = mean_relative_l2(&model, &params, &val_set).map_err(|e| map_numeric(e, epoch, &history))?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(diverged(epoch, &history));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        };
        history.records.push(record);
        observer(&record);

        if val_loss < best.0 {
            best = (val_loss, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if train_cfg.early_stop_patience.is_some_and(|p| since_best >= p) {
                log::info!("early stop at epoch {epoch}: no validation improvement for {since_best} epochs");
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(vals: &[f64]) -> ScalarField2D {
        ScalarField2D::new(4, 1.0, vals.to_vec()).unwrap()
    }

    fn ramp() -> ScalarField2D {
        field(&(0..16).map(|i| i as f64 * 0.25 - 1.0).collect::<Vec<_>>())
    }

    #[test]
    fn relative_l2_cases() {
        let t = ramp();
        assert_eq!(relative_l2(&t, &t).unwrap(), 0.0);
        assert!((relative_l2(&t.scaled(2.0).unwrap(), &t).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_l2(&ScalarField2D::zeros(4, 1.0).unwrap(), &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            relative_l2(&t, &ScalarField2D::zeros(4, 1.0).unwrap()),
            Err(Error::ZeroTarget)
        ));
    }

    #[test]
    fn relative_l2_gradient_matches_differences() {
        let t = ramp();
        let p = field(&(0..16).map(|i| (i as f64).sin()).collect::<Vec<_>>());
        let (_, g) = relative_l2_with_grad(&p, &t).unwrap();
        for k in 0..16 {
            let mut up = p.values().to_vec();
            let mut dn = p.values().to_vec();
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            let fd = (relative_l2(&field(&up), &t).unwrap() - relative_l2(&field(&dn), &t).unwrap()) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn mse_cases() {
        let t = ramp();
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        let shifted = field(&t.values().iter().map(|v| v + 0.3).collect::<Vec<_>>());
        assert!((mse(&shifted, &t).unwrap() - 0.09).abs() < 1e-15);
        let p = field(&[0.5, -1.0, 2.0, 0.0, 1.5, 3.0, -0.5, 0.25, 1.0, 1.0, -2.0, 0.75, 0.0, 0.5, 4.0, -1.5]);
        let mut hand = 0.0;
        for k in 0..16 {
            let d = p.values()[k] - t.values()[k];
            hand += d * d;
        }
        assert!((mse(&p, &t).unwrap() - hand / 16.0).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut st, 1e-3, 0.0, 1);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st, AdamState::new(3));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![0.5];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut st, 0.01, 0.0, 1);
        assert!((p[0] - (0.5 - 0.01)).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_lr_is_identity() {
        let mut p = vec![0.5, 2.0];
        let mut st = AdamState::new(2);
        for t in 1..=3 {
            adam_step(&mut p, &[0.3, -4.0], &mut st, 0.0, 1e-4, t);
        }
        assert_eq!(p, vec![0.5, 2.0]);
    }

    #[test]
    fn adam_matches_scalar_trace() {
        // loss = 0.5·(3x² + y²), gradient (3x, y)
        let lr = 0.1;
        let wd = 0.01;
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        let mut trace = [(1.0f64, 0.0f64, 0.0f64), (-2.0, 0.0, 0.0)];
        for t in 1..=3u64 {
            let g = [3.0 * p[0], p[1]];
            adam_step(&mut p, &g, &mut st, lr, wd, t);
            for (k, (x, m, v)) in trace.iter_mut().enumerate() {
                let gk = if k == 0 { 3.0 * *x } else { *x };
                *x -= lr * wd * *x;
                *m = 0.9 * *m + 0.1 * gk;
                *v = 0.999 * *v + 0.001 * gk * gk;
                let mh = *m / (1.0 - 0.9f64.powi(t as i32));
                let vh = *v / (1.0 - 0.999f64.powi(t as i32));
                *x -= lr * mh / (vh.sqrt() + 1e-8);
            }
            assert!((p[0] - trace[0].0).abs() < 1e-12);
            assert!((p[1] - trace[1].0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_lr_schedule() {
        let cfg = TrainConfig { lr: 0.8, scheduler_step: 30, scheduler_gamma: 0.5, ..Default::default() };
        assert_eq!(step_lr(1, &cfg), 0.8);
        assert_eq!(step_lr(30, &cfg), 0.8);
        assert_eq!(step_lr(31, &cfg), 0.4);
        assert_eq!(step_lr(61, &cfg), 0.2);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = TrainHistory {
            initial_train_loss: None,
            initial_val_loss: None,
            records: vec![
                EpochRecord { epoch: 1, train_loss: 0.1 + 0.2, val_loss: 1.0 / 3.0, lr: 1e-3 },
                EpochRecord { epoch: 2, train_loss: 2.5e-7, val_loss: 0.123_456_789_012_345_68, lr: 5e-4 },
            ],
        };
        let csv = h.to_csv();
        assert!(csv.starts_with("epoch,train_loss,val_loss,lr\n"));
        assert_eq!(TrainHistory::from_csv(&csv).unwrap(), h);
        assert!(TrainHistory::from_csv("a,b\n").is_err());
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { scheduler_gamma: 1.5, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }
}
