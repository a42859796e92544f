//! Fourier neural operator: pointwise lifting, four Fourier layers and a two-stage
//! pointwise projection, with hand-written reverse-mode gradients.
//!
//! Each Fourier layer computes `σ(W·x + b + K(x))` where `K` keeps the low-frequency
//! block `k_x < m, k_y < m` of the real-input half-spectrum of every channel, mixes
//! channels there with a complex `hidden × hidden` matrix per mode, and transforms
//! back. Activations are stored channel-major as `(channels, n²)` arrays.

use std::ops::Range;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{hermitian_weight, Fft2Plan, ScalarField2D};
use crate::rng::SeededStream;

pub const N_LAYERS: usize = 4;

/// Channel-major activations, shape `(channels, n²)`.
pub type HiddenField = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Gelu,
    /// Turns the network into an affine map of its input; used to check gradients
    /// against closed forms.
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Gelu => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Activation::Gelu),
            1 => Ok(Activation::Identity),
            other => Err(Error::InvalidModelConfig(format!("unknown activation code {other}"))),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                cdf + x * pdf
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FnoConfig {
    /// Grid size the model runs on.
    pub n: usize,
    /// Retained Fourier modes per axis.
    pub modes: usize,
    pub hidden: usize,
    /// 1 (field only) or 3 (field plus normalized x and y coordinates).
    pub in_channels: usize,
    pub proj_hidden: usize,
    pub activation: Activation,
}

impl FnoConfig {
    /// Three input channels, projection width 128 and GELU.
    pub fn new(n: usize, modes: usize, hidden: usize) -> Self {
        Self {
            n,
            modes,
            hidden,
            in_channels: 3,
            proj_hidden: 128,
            activation: Activation::Gelu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < crate::field::MIN_GRID || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidModelConfig(format!(
                "grid size must be even and at least {}, got {}",
                crate::field::MIN_GRID,
                self.n
            )));
        }
        if self.modes == 0 {
            return Err(Error::InvalidModelConfig("modes must be at least 1".into()));
        }
        if self.modes > self.n / 2 {
            return Err(Error::ModesExceedGrid {
                modes: self.modes,
                limit: self.n / 2,
            });
        }
        if self.hidden == 0 || self.proj_hidden == 0 {
            return Err(Error::InvalidModelConfig(
                "hidden and proj_hidden must be at least 1".into(),
            ));
        }
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::InvalidModelConfig(format!(
                "in_channels must be 1 or 3, got {}",
                self.in_channels
            )));
        }
        Ok(())
    }
}

/// Closed-form number of real parameters (complex weights count twice).
pub fn param_count(cfg: &FnoConfig) -> usize {
    let (h, m) = (cfg.hidden, cfg.modes);
    N_LAYERS * (2 * h * h * m * m)
        + N_LAYERS * (h * h + h)
        + (cfg.in_channels * h + h)
        + (h * cfg.proj_hidden + cfg.proj_hidden)
        + (cfg.proj_hidden + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    /// `hidden × hidden × m × m` complex entries as interleaved `(re, im)` pairs,
    /// indexed `[in][out][k_x][k_y]`.
    pub spectral: Range<usize>,
    /// `hidden × hidden`, indexed `[in][out]`.
    pub point_w: Range<usize>,
    pub point_b: Range<usize>,
}

/// Offsets of every parameter block inside the flat canonical vector:
/// lift, then each layer's spectral/point weights, then the projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub lift_w: Range<usize>,
    pub lift_b: Range<usize>,
    pub layers: Vec<LayerLayout>,
    pub proj1_w: Range<usize>,
    pub proj1_b: Range<usize>,
    pub proj2_w: Range<usize>,
    pub proj2_b: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &FnoConfig) -> Self {
        let mut pos = 0;
        let mut take = |len: usize| {
            let r = pos..pos + len;
            pos += len;
            r
        };
        let (h, m) = (cfg.hidden, cfg.modes);
        let lift_w = take(cfg.in_channels * h);
        let lift_b = take(h);
        let layers = (0..N_LAYERS)
            .map(|_| LayerLayout {
                spectral: take(2 * h * h * m * m),
                point_w: take(h * h),
                point_b: take(h),
            })
            .collect();
        let proj1_w = take(h * cfg.proj_hidden);
        let proj1_b = take(cfg.proj_hidden);
        let proj2_w = take(cfg.proj_hidden);
        let proj2_b = take(1);
        Self {
            lift_w,
            lift_b,
            layers,
            proj1_w,
            proj1_b,
            proj2_w,
            proj2_b,
            total: pos,
        }
    }

    /// Block ranges with their fan-in, in canonical order.
    fn blocks(&self, cfg: &FnoConfig) -> Vec<(Range<usize>, BlockKind)> {
        let mut out = vec![
            (self.lift_w.clone(), BlockKind::Dense(cfg.in_channels)),
            (self.lift_b.clone(), BlockKind::Dense(cfg.in_channels)),
        ];
        for l in &self.layers {
            out.push((l.spectral.clone(), BlockKind::Spectral));
            out.push((l.point_w.clone(), BlockKind::Dense(cfg.hidden)));
            out.push((l.point_b.clone(), BlockKind::Dense(cfg.hidden)));
        }
        out.push((self.proj1_w.clone(), BlockKind::Dense(cfg.hidden)));
        out.push((self.proj1_b.clone(), BlockKind::Dense(cfg.hidden)));
        out.push((self.proj2_w.clone(), BlockKind::Dense(cfg.proj_hidden)));
        out.push((self.proj2_b.clone(), BlockKind::Dense(cfg.proj_hidden)));
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum BlockKind {
    Spectral,
    Dense(usize),
}

/// All network parameters in one flat vector; gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoParams {
    cfg: FnoConfig,
    layout: ParamLayout,
    data: Vec<f64>,
}

impl FnoParams {
    pub fn zeros(cfg: &FnoConfig) -> Self {
        let layout = ParamLayout::new(cfg);
        Self {
            cfg: *cfg,
            data: vec![0.0; layout.total],
            layout,
        }
    }

    pub fn from_vec(cfg: &FnoConfig, data: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(cfg);
        if data.len() != layout.total {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                layout.total,
                data.len()
            )));
        }
        Ok(Self {
            cfg: *cfg,
            layout,
            data,
        })
    }

    pub fn config(&self) -> &FnoConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, r: &Range<usize>) -> &[f64] {
        &self.data[r.clone()]
    }

    pub fn block_mut(&mut self, r: &Range<usize>) -> &mut [f64] {
        &mut self.data[r.clone()]
    }

    /// Complex spectral weight `w[i, o, kx, ky]` of layer `layer`.
    pub fn spectral_weight(&self, layer: usize, i: usize, o: usize, kx: usize, ky: usize) -> Complex64 {
        let idx = self.spectral_index(layer, i, o, kx, ky);
        Complex64::new(self.data[idx], self.data[idx + 1])
    }

    pub fn set_spectral_weight(&mut self, layer: usize, i: usize, o: usize, kx: usize, ky: usize, w: Complex64) {
        let idx = self.spectral_index(layer, i, o, kx, ky);
        self.data[idx] = w.re;
        self.data[idx + 1] = w.im;
    }

    fn spectral_index(&self, layer: usize, i: usize, o: usize, kx: usize, ky: usize) -> usize {
        let (h, m) = (self.cfg.hidden, self.cfg.modes);
        self.layout.layers[layer].spectral.start + 2 * (((i * h + o) * m + kx) * m + ky)
    }

    /// `self += scale · other`.
    pub fn axpy(&mut self, scale: f64, other: &FnoParams) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Spectral weights uniform in `±1/hidden²` per component; dense weights and biases
/// uniform in `±√(1/fan_in)`. Draws follow the canonical parameter order.
pub fn init_params(cfg: &FnoConfig, seed: u64) -> FnoParams {
    let mut p = FnoParams::zeros(cfg);
    let mut rng = SeededStream::new(seed);
    let spectral_scale = 1.0 / (cfg.hidden * cfg.hidden) as f64;
    for (range, kind) in p.layout.blocks(cfg) {
        let s = match kind {
            BlockKind::Spectral => spectral_scale,
            BlockKind::Dense(fan_in) => (1.0 / fan_in as f64).sqrt(),
        };
        for v in &mut p.data[range] {
            *v = rng.symmetric(s);
        }
    }
    p
}

/// Channel 0 is the field; with three channels, channels 1 and 2 hold `i/n` and `j/n`.
pub fn build_input(u0: &ScalarField2D, in_channels: usize) -> HiddenField {
    let n = u0.n();
    let mut x = Array2::zeros((in_channels, n * n));
    x.row_mut(0)
        .as_slice_mut()
        .expect("standard layout")
        .copy_from_slice(u0.values());
    if in_channels >= 3 {
        for i in 0..n {
            for j in 0..n {
                x[[1, i * n + j]] = i as f64 / n as f64;
                x[[2, i * n + j]] = j as f64 / n as f64;
            }
        }
    }
    x
}

fn row(x: &Array2<f64>, c: usize) -> &[f64] {
    let cols = x.ncols();
    &x.as_slice().expect("standard layout")[c * cols..(c + 1) * cols]
}

fn row_mut(x: &mut Array2<f64>, c: usize) -> &mut [f64] {
    let cols = x.ncols();
    &mut x.as_slice_mut().expect("standard layout")[c * cols..(c + 1) * cols]
}

/// `y[o, p] = Σ_i w[i, o]·x[i, p] + b[o]`.
fn pointwise(w: &[f64], b: &[f64], x: &Array2<f64>) -> Array2<f64> {
    let cin = x.nrows();
    let cout = b.len();
    let wv = ArrayView2::from_shape((cin, cout), w).expect("weight block shape");
    let mut y = wv.t().dot(x);
    for (mut r, &bias) in y.axis_iter_mut(Axis(0)).zip(b) {
        r += bias;
    }
    y
}

/// Accumulates weight/bias gradients of [`pointwise`] and returns the input gradient.
fn pointwise_backward(
    w: &[f64],
    x: &Array2<f64>,
    gy: &Array2<f64>,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Array2<f64> {
    let cin = x.nrows();
    let cout = gy.nrows();
    let gw_block = x.dot(&gy.t());
    for (g, v) in gw.iter_mut().zip(gw_block.iter()) {
        *g += v;
    }
    for (g, r) in gb.iter_mut().zip(gy.axis_iter(Axis(0))) {
        *g += r.sum();
    }
    let wv = ArrayView2::from_shape((cin, cout), w).expect("weight block shape");
    wv.dot(gy)
}

/// Intermediate values of one forward pass, kept for [`FnoModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: HiddenField,
    /// Inputs to each Fourier layer followed by the last layer's output.
    hidden: Vec<HiddenField>,
    /// Pre-activations of each Fourier layer.
    pre: Vec<HiddenField>,
    /// Retained spectra of each Fourier layer's input, `(channels · m · m)`.
    spectra: Vec<Vec<Complex64>>,
    proj_pre: HiddenField,
    proj_act: HiddenField,
}

/// A configured network bound to its FFT plan. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct FnoModel {
    cfg: FnoConfig,
    plan: Fft2Plan,
}

impl FnoModel {
    pub fn new(cfg: &FnoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            plan: Fft2Plan::new(cfg.n),
        })
    }

    pub fn config(&self) -> &FnoConfig {
        &self.cfg
    }

    fn check(&self, u0: &ScalarField2D, p: &FnoParams) -> Result<()> {
        if p.config() != &self.cfg {
            return Err(Error::ShapeMismatch(format!(
                "parameters were built for {:?}, model is {:?}",
                p.config(),
                self.cfg
            )));
        }
        if u0.n() != self.cfg.n {
            return Err(Error::ShapeMismatch(format!(
                "input grid {} does not match model grid {}",
                u0.n(),
                self.cfg.n
            )));
        }
        Ok(())
    }

    /// Truncated spectral convolution. Returns the output and the retained input spectra.
    pub fn spectral_conv(&self, x: &HiddenField, w: &[f64]) -> (HiddenField, Vec<Complex64>) {
        let m = self.cfg.modes;
        let mm = m * m;
        let channels = x.nrows();
        assert_eq!(w.len(), 2 * channels * channels * mm);

        let zero = Complex64::new(0.0, 0.0);
        let mut x_hat = vec![zero; channels * mm];
        for c in 0..channels {
            self.plan
                .forward_block(row(x, c), m, m, &mut x_hat[c * mm..(c + 1) * mm]);
        }
        let mut y_hat = vec![zero; channels * mm];
        for i in 0..channels {
            let xi = &x_hat[i * mm..(i + 1) * mm];
            for o in 0..channels {
                let wb = &w[2 * (i * channels + o) * mm..2 * (i * channels + o + 1) * mm];
                let yo = &mut y_hat[o * mm..(o + 1) * mm];
                for k in 0..mm {
                    yo[k] += Complex64::new(wb[2 * k], wb[2 * k + 1]) * xi[k];
                }
            }
        }
        let mut y = Array2::zeros(x.raw_dim());
        for o in 0..channels {
            self.plan
                .inverse_block(&y_hat[o * mm..(o + 1) * mm], m, m, row_mut(&mut y, o));
        }
        (y, x_hat)
    }

    /// Adjoint of [`Self::spectral_conv`]: accumulates weight gradients into `gw` and
    /// returns the input gradient.
    fn spectral_conv_backward(
        &self,
        x_hat: &[Complex64],
        w: &[f64],
        gy: &HiddenField,
        gw: &mut [f64],
    ) -> HiddenField {
        let n = self.cfg.n;
        let m = self.cfg.modes;
        let mm = m * m;
        let channels = gy.nrows();
        let zero = Complex64::new(0.0, 0.0);
        let norm = 1.0 / (n * n) as f64;

        // adjoint of the weighted inverse: forward transform scaled by c_ky / n²
        let mut gy_hat = vec![zero; channels * mm];
        for o in 0..channels {
            let block = &mut gy_hat[o * mm..(o + 1) * mm];
            self.plan.forward_block(row(gy, o), m, m, block);
            for (k, v) in block.iter_mut().enumerate() {
                *v *= hermitian_weight(k % m, n) * norm;
            }
        }

        let mut gx_hat = vec![zero; channels * mm];
        for i in 0..channels {
            let xi = &x_hat[i * mm..(i + 1) * mm];
            let gxi = &mut gx_hat[i * mm..(i + 1) * mm];
            for o in 0..channels {
                let base = 2 * (i * channels + o) * mm;
                let wb = &w[base..base + 2 * mm];
                let gwb = &mut gw[base..base + 2 * mm];
                let go = &gy_hat[o * mm..(o + 1) * mm];
                for k in 0..mm {
                    let g = go[k] * xi[k].conj();
                    gwb[2 * k] += g.re;
                    gwb[2 * k + 1] += g.im;
                    gxi[k] += Complex64::new(wb[2 * k], -wb[2 * k + 1]) * go[k];
                }
            }
        }

        // adjoint of the forward block transform: unweighted, unnormalized synthesis
        let mut gx = Array2::zeros(gy.raw_dim());
        for i in 0..channels {
            self.plan
                .inverse_block_raw(&gx_hat[i * mm..(i + 1) * mm], m, m, row_mut(&mut gx, i));
        }
        gx
    }

    /// `σ(pointwise(x) + spectral_conv(x))` for layer `layer` (0-based).
    pub fn fourier_layer(&self, x: &HiddenField, layer: usize, p: &FnoParams) -> HiddenField {
        let (pre, _) = self.fourier_layer_pre(x, layer, p);
        pre.mapv(|v| self.cfg.activation.apply(v))
    }

    fn fourier_layer_pre(&self, x: &HiddenField, layer: usize, p: &FnoParams) -> (HiddenField, Vec<Complex64>) {
        let l = &p.layout.layers[layer];
        let (spec, x_hat) = self.spectral_conv(x, p.block(&l.spectral));
        let mut pre = pointwise(p.block(&l.point_w), p.block(&l.point_b), x);
        pre += &spec;
        (pre, x_hat)
    }

    pub fn forward(&self, u0: &ScalarField2D, p: &FnoParams) -> Result<ScalarField2D> {
        Ok(self.forward_cached(u0, p)?.0)
    }

    pub fn forward_cached(&self, u0: &ScalarField2D, p: &FnoParams) -> Result<(ScalarField2D, ForwardCache)> {
        self.check(u0, p)?;
        let act = self.cfg.activation;
        let lay = &p.layout;
        let input = build_input(u0, self.cfg.in_channels);
        let mut hidden = vec![pointwise(p.block(&lay.lift_w), p.block(&lay.lift_b), &input)];
        let mut pre = Vec::with_capacity(N_LAYERS);
        let mut spectra = Vec::with_capacity(N_LAYERS);
        for layer in 0..N_LAYERS {
            let (z, x_hat) = self.fourier_layer_pre(&hidden[layer], layer, p);
            hidden.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
            spectra.push(x_hat);
        }
        let proj_pre = pointwise(p.block(&lay.proj1_w), p.block(&lay.proj1_b), &hidden[N_LAYERS]);
        let proj_act = proj_pre.mapv(|v| act.apply(v));
        let out = pointwise(p.block(&lay.proj2_w), p.block(&lay.proj2_b), &proj_act);
        let values = out.into_raw_vec_and_offset().0;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: 0,
                max_abs: f64::INFINITY,
                sample: None,
            });
        }
        let field = ScalarField2D::from_parts_unchecked(self.cfg.n, u0.h(), values);
        Ok((
            field,
            ForwardCache {
                input,
                hidden,
                pre,
                spectra,
                proj_pre,
                proj_act,
            },
        ))
    }

    /// Gradient of a scalar loss with respect to every parameter, given
    /// `upstream = ∂loss/∂output` (one value per grid point).
    pub fn backward(&self, cache: &ForwardCache, p: &FnoParams, upstream: &[f64]) -> Result<FnoParams> {
        let n2 = self.cfg.n * self.cfg.n;
        if upstream.len() != n2 {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has {} entries, expected {n2}",
                upstream.len()
            )));
        }
        let act = self.cfg.activation;
        let lay = p.layout.clone();
        let mut grad = FnoParams::zeros(&self.cfg);

        let g_out = Array2::from_shape_vec((1, n2), upstream.to_vec()).expect("shape");
        let (gw, gb) = split_two(&mut grad.data, &lay.proj2_w, &lay.proj2_b);
        let mut g = pointwise_backward(p.block(&lay.proj2_w), &cache.proj_act, &g_out, gw, gb);
        g.zip_mut_with(&cache.proj_pre, |gv, &z| *gv *= act.derivative(z));

        let (gw, gb) = split_two(&mut grad.data, &lay.proj1_w, &lay.proj1_b);
        let mut g_hidden = pointwise_backward(p.block(&lay.proj1_w), &cache.hidden[N_LAYERS], &g, gw, gb);

        for layer in (0..N_LAYERS).rev() {
            let l = &lay.layers[layer];
            let mut gz = g_hidden;
            gz.zip_mut_with(&cache.pre[layer], |gv, &z| *gv *= act.derivative(z));
            let x = &cache.hidden[layer];
            let (gw, gb) = split_two(&mut grad.data, &l.point_w, &l.point_b);
            let mut gx = pointwise_backward(p.block(&l.point_w), x, &gz, gw, gb);
            let gx_spec = self.spectral_conv_backward(
                &cache.spectra[layer],
                p.block(&l.spectral),
                &gz,
                &mut grad.data[l.spectral.clone()],
            );
            gx += &gx_spec;
            g_hidden = gx;
        }

        let (gw, gb) = split_two(&mut grad.data, &lay.lift_w, &lay.lift_b);
        pointwise_backward(p.block(&lay.lift_w), &cache.input, &g_hidden, gw, gb);
        Ok(grad)
    }
}

/// Disjoint mutable views of two non-overlapping ranges, `a` before `b`.
fn split_two<'a>(data: &'a mut [f64], a: &Range<usize>, b: &Range<usize>) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (head, tail) = data.split_at_mut(b.start);
    (&mut head[a.clone()], &mut tail[..b.len()])
}

/// Standalone truncated spectral convolution on `(channels, n²)` activations.
pub fn spectral_conv(x: &HiddenField, w: &[f64], modes: usize) -> Result<HiddenField> {
    let n2 = x.ncols();
    let n = (n2 as f64).sqrt().round() as usize;
    if n * n != n2 {
        return Err(Error::ShapeMismatch(format!("{n2} columns is not a square grid")));
    }
    if modes > n / 2 {
        return Err(Error::ModesExceedGrid { modes, limit: n / 2 });
    }
    let channels = x.nrows();
    if w.len() != 2 * channels * channels * modes * modes {
        return Err(Error::ShapeMismatch(format!(
            "spectral weight has {} entries, expected {}",
            w.len(),
            2 * channels * channels * modes * modes
        )));
    }
    let cfg = FnoConfig::new(n, modes, channels);
    let model = FnoModel::new(&cfg)?;
    Ok(model.spectral_conv(x, w).0)
}

pub fn forward(u0: &ScalarField2D, p: &FnoParams) -> Result<ScalarField2D> {
    FnoModel::new(p.config())?.forward(u0, p)
}

/// Runs the forward pass and returns parameter gradients for `upstream = ∂loss/∂output`.
pub fn backward(u0: &ScalarField2D, p: &FnoParams, upstream: &[f64]) -> Result<FnoParams> {
    let model = FnoModel::new(p.config())?;
    let (_, cache) = model.forward_cached(u0, p)?;
    model.backward(&cache, p, upstream)
}
