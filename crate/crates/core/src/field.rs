//! Real 2D fields on a square grid and their discrete Fourier transforms.
//!
//! Transform convention: the forward DFT is unnormalized and the inverse carries
//! the `1/n²` factor. Half-spectra use the real-input layout: `n` rows indexed by
//! `k_x` (negative frequencies wrapped into the upper rows) and `n/2 + 1` columns
//! indexed by `k_y`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest grid the stencils and spectra are defined on.
pub const MIN_GRID: usize = 4;

/// Real samples `u(x = i·h, y = j·h)` on an `n × n` grid, row-major in `i`.
#[derive(Clone, PartialEq)]
pub struct ScalarField2D {
    n: usize,
    h: f64,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField2D")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl ScalarField2D {
    pub fn new(n: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::InvalidField(format!(
                "grid size {n} is below the minimum {MIN_GRID}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidField(format!(
                "grid spacing must be positive and finite, got {h}"
            )));
        }
        if values.len() != n * n {
            return Err(Error::InvalidField(format!(
                "expected {} values for a {n}x{n} grid, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value at ({}, {})",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { n, h, values })
    }

    pub fn zeros(n: usize, h: f64) -> Result<Self> {
        Self::new(n, h, vec![0.0; n * n])
    }

    /// Samples `f(i, j)` at every grid index.
    pub fn from_fn(n: usize, h: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::new(n, h, values)
    }

    /// Caller guarantees the invariants (finite values, matching length).
    pub(crate) fn from_parts_unchecked(n: usize, h: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self { n, h, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Same samples with a different grid spacing.
    pub fn with_spacing(self, h: f64) -> Result<Self> {
        Self::new(self.n, h, self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Frobenius norm over the grid.
    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.n, self.h, self.values.iter().map(|v| a * v).collect())
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.n, self.h, values)
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "grid sizes differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}

/// Complex half-spectrum of a real field, `n × (n/2 + 1)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField2D {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField2D {
    pub fn new(n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::InvalidField(format!(
                "grid size {n} is below the minimum {MIN_GRID}"
            )));
        }
        let cols = half_cols(n);
        if coeffs.len() != n * cols {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients for n = {n}, got {}",
                n * cols,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidField("non-finite coefficient".into()));
        }
        Ok(Self { n, coeffs })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![Complex64::new(0.0, 0.0); n * half_cols(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        half_cols(self.n)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, kx: usize, ky: usize) -> Complex64 {
        self.coeffs[kx * self.cols() + ky]
    }

    pub fn set(&mut self, kx: usize, ky: usize, value: Complex64) {
        let cols = self.cols();
        self.coeffs[kx * cols + ky] = value;
    }
}

/// Nonnegative two-sided power (or log-power) grid, `n × n` row-major in `k_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSpectrum2D {
    n: usize,
    power: Vec<f64>,
}

impl FullSpectrum2D {
    pub fn new(n: usize, power: Vec<f64>) -> Result<Self> {
        if power.len() != n * n {
            return Err(Error::InvalidField(format!(
                "expected {} spectrum entries, got {}",
                n * n,
                power.len()
            )));
        }
        Ok(Self { n, power })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.power
    }

    pub fn get(&self, kx: usize, ky: usize) -> f64 {
        self.power[kx * self.n + ky]
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            power: self.power.iter().map(|&p| f(p)).collect(),
        }
    }
}

pub(crate) fn half_cols(n: usize) -> usize {
    n / 2 + 1
}

/// Weight of half-spectrum column `ky` when expanding to the full Hermitian spectrum.
#[inline]
pub(crate) fn hermitian_weight(ky: usize, n: usize) -> f64 {
    if ky == 0 || 2 * ky == n {
        1.0
    } else {
        2.0
    }
}

/// Cached 1D transforms of length `n` used to build partial and full 2D real transforms.
#[derive(Clone)]
pub struct Fft2Plan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2Plan").field("n", &self.n).finish()
    }
}

impl Fft2Plan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward DFT of a real `n × n` array, restricted to
    /// `k_x < rows`, `k_y < cols`. Output is `rows × cols` row-major.
    pub fn forward_block(&self, data: &[f64], rows: usize, cols: usize, out: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        assert!(rows <= n && cols <= n);
        assert_eq!(out.len(), rows * cols);

        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);

        // transpose the kept columns so the k_x transforms run on contiguous memory
        let mut cols_buf = vec![Complex64::new(0.0, 0.0); cols * n];
        for a in 0..n {
            for ky in 0..cols {
                cols_buf[ky * n + a] = buf[a * n + ky];
            }
        }
        self.forward.process(&mut cols_buf);
        for kx in 0..rows {
            for ky in 0..cols {
                out[kx * cols + ky] = cols_buf[ky * n + kx];
            }
        }
    }

    /// `out[a, b] = Σ_{k_x < rows, k_y < cols} Re(block[k_x, k_y] · e^{+2πi(k_x a + k_y b)/n})`,
    /// without normalization or Hermitian weighting.
    pub fn inverse_block_raw(&self, block: &[Complex64], rows: usize, cols: usize, out: &mut [f64]) {
        let n = self.n;
        assert!(rows <= n && cols <= n);
        assert_eq!(block.len(), rows * cols);
        assert_eq!(out.len(), n * n);

        let zero = Complex64::new(0.0, 0.0);
        let mut cols_buf = vec![zero; cols * n];
        for kx in 0..rows {
            for ky in 0..cols {
                cols_buf[ky * n + kx] = block[kx * cols + ky];
            }
        }
        self.inverse.process(&mut cols_buf);

        let mut rows_buf = vec![zero; n * n];
        for a in 0..n {
            for ky in 0..cols {
                rows_buf[a * n + ky] = cols_buf[ky * n + a];
            }
        }
        self.inverse.process(&mut rows_buf);
        for (o, c) in out.iter_mut().zip(&rows_buf) {
            *o = c.re;
        }
    }

    /// Inverse real transform of a half-spectrum block (`cols ≤ n/2 + 1`), including
    /// the Hermitian column weights and the `1/n²` normalization. Imaginary parts of
    /// the self-conjugate columns (`k_y = 0` and `k_y = n/2`) are ignored.
    pub fn inverse_block(&self, block: &[Complex64], rows: usize, cols: usize, out: &mut [f64]) {
        let n = self.n;
        assert!(cols <= half_cols(n));
        let scale = 1.0 / (n * n) as f64;
        let weighted: Vec<Complex64> = block
            .iter()
            .enumerate()
            .map(|(idx, c)| c * (hermitian_weight(idx % cols, n) * scale))
            .collect();
        self.inverse_block_raw(&weighted, rows, cols, out);
    }

    /// Unnormalized full two-sided complex DFT of a real field.
    pub fn forward_full(&self, data: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        self.forward_block(data, n, n, &mut out);
        out
    }
}

/// Unnormalized forward DFT of a real field in half-spectrum layout.
pub fn fft2_real(field: &ScalarField2D) -> SpectralField2D {
    let n = field.n();
    let cols = half_cols(n);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n * cols];
    Fft2Plan::new(n).forward_block(field.values(), n, cols, &mut coeffs);
    SpectralField2D { n, coeffs }
}

/// Inverse of [`fft2_real`], normalized by `1/n²`. The result has unit grid spacing;
/// use [`ScalarField2D::with_spacing`] to restore another one.
pub fn ifft2_real(spec: &SpectralField2D) -> ScalarField2D {
    let n = spec.n();
    let mut values = vec![0.0; n * n];
    Fft2Plan::new(n).inverse_block(spec.coeffs(), n, spec.cols(), &mut values);
    ScalarField2D::from_parts_unchecked(n, 1.0, values)
}

/// `|F(k_x, k_y)|²` over the full two-sided unnormalized DFT.
pub fn full_power(field: &ScalarField2D) -> FullSpectrum2D {
    let n = field.n();
    let spec = Fft2Plan::new(n).forward_full(field.values());
    FullSpectrum2D {
        n,
        power: spec.iter().map(|c| c.norm_sqr()).collect(),
    }
}

/// Rolls both axes by `n/2` so the DC entry lands at `(n/2, n/2)`.
pub fn fftshift_center(spec: &FullSpectrum2D) -> Result<FullSpectrum2D> {
    let n = spec.n();
    if !n.is_multiple_of(2) {
        return Err(Error::OddSize(n));
    }
    let half = n / 2;
    let mut power = vec![0.0; n * n];
    for i in 0..n {
        let si = (i + half) % n;
        for j in 0..n {
            power[si * n + (j + half) % n] = spec.power[i * n + j];
        }
    }
    Ok(FullSpectrum2D { n, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(n: usize, seed: u64) -> ScalarField2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField2D::from_fn(n, 1.0, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Direct O(n⁴) DFT sum.
    fn dft_oracle(field: &ScalarField2D) -> Vec<Complex64> {
        let n = field.n();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for kx in 0..n {
            for ky in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let theta = -2.0 * PI * ((kx * a + ky * b) % n) as f64 / n as f64;
                        acc += field.get(a, b) * Complex64::new(theta.cos(), theta.sin());
                    }
                }
                out[kx * n + ky] = acc;
            }
        }
        out
    }

    fn cos_mode(n: usize, k: usize) -> ScalarField2D {
        ScalarField2D::from_fn(n, 1.0, |i, _| (2.0 * PI * (k * i) as f64 / n as f64).cos()).unwrap()
    }

    #[test]
    fn rejects_invalid_fields() {
        assert!(ScalarField2D::new(3, 1.0, vec![0.0; 9]).is_err());
        assert!(ScalarField2D::new(4, 0.0, vec![0.0; 16]).is_err());
        assert!(ScalarField2D::new(4, 1.0, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[5] = f64::NAN;
        assert!(ScalarField2D::new(4, 1.0, v).is_err());
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let spec = fft2_real(&ScalarField2D::zeros(8, 1.0).unwrap());
        assert!(spec.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn constant_field_is_dc_only() {
        let n = 8;
        let c = 2.5;
        let f = ScalarField2D::from_fn(n, 1.0, |_, _| c).unwrap();
        let spec = fft2_real(&f);
        for kx in 0..n {
            for ky in 0..spec.cols() {
                let expect = if (kx, ky) == (0, 0) { c * (n * n) as f64 } else { 0.0 };
                assert!((spec.get(kx, ky) - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cosine_mode_matches_direct_dft() {
        let n = 16;
        let f = cos_mode(n, 3);
        let oracle = dft_oracle(&f);
        let spec = fft2_real(&f);
        for kx in 0..n {
            for ky in 0..spec.cols() {
                let got = spec.get(kx, ky);
                assert!((got - oracle[kx * n + ky]).norm() < 1e-9);
                let expected_mag = if ky == 0 && (kx == 3 || kx == 13) { (n * n) as f64 / 2.0 } else { 0.0 };
                assert!((got.norm() - expected_mag).abs() < 1e-9, "({kx},{ky}) {got}");
            }
        }
        let back = ifft2_real(&spec);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn half_spectrum_matches_oracle_on_random_field() {
        let f = random_field(8, 3);
        let oracle = dft_oracle(&f);
        let spec = fft2_real(&f);
        for kx in 0..8 {
            for ky in 0..5 {
                assert!((spec.get(kx, ky) - oracle[kx * 8 + ky]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip_random() {
        let f = random_field(8, 11);
        let back = ifft2_real(&fft2_real(&f));
        let err = back.lin_comb(1.0, &f, -1.0).unwrap().max_abs();
        assert!(err < 1e-10 * f.max_abs());
    }

    #[test]
    fn dc_coefficient_inverts_to_ones() {
        let n = 8;
        let mut spec = SpectralField2D::zeros(n).unwrap();
        spec.set(0, 0, Complex64::new((n * n) as f64, 0.0));
        let f = ifft2_real(&spec);
        assert!(f.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn power_of_delta_is_flat() {
        let mut v = vec![0.0; 64];
        v[8 * 3 + 5] = 1.0;
        let p = full_power(&ScalarField2D::new(8, 1.0, v).unwrap());
        assert!(p.values().iter().all(|x| (x - 1.0).abs() < 1e-12));
        let z = full_power(&ScalarField2D::zeros(8, 1.0).unwrap());
        assert!(z.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn parseval_on_random_fields() {
        for (n, seed) in [(8, 1), (16, 2), (32, 3)] {
            let f = random_field(n, seed);
            let p = full_power(&f);
            let lhs = p.total();
            let rhs = (n * n) as f64 * f.values().iter().map(|v| v * v).sum::<f64>();
            assert!(((lhs - rhs) / rhs).abs() < 1e-8, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn full_power_is_reflection_symmetric() {
        let n = 16;
        let p = full_power(&random_field(n, 4));
        for kx in 0..n {
            for ky in 0..n {
                let a = p.get(kx, ky);
                let b = p.get((n - kx) % n, (n - ky) % n);
                assert!(a >= 0.0);
                assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn shift_moves_dc_to_center_and_is_involution() {
        let n = 8;
        let f = ScalarField2D::from_fn(n, 1.0, |_, _| 1.0).unwrap();
        let p = full_power(&f);
        let s = fftshift_center(&p).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = s.get(i, j);
                if (i, j) == (n / 2, n / 2) {
                    assert!(v > 0.0);
                } else {
                    assert!(v.abs() < 1e-18);
                }
            }
        }
        assert_eq!(fftshift_center(&s).unwrap(), p);
    }

    #[test]
    fn shift_of_cos_mode_power() {
        let n = 16;
        let s = fftshift_center(&full_power(&cos_mode(n, 3))).unwrap();
        let big: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| s.get(i, j) > 1.0)
            .collect();
        assert_eq!(big, vec![(5, 8), (11, 8)]);
    }

    #[test]
    fn shift_rejects_odd_size() {
        let p = FullSpectrum2D::new(5, vec![0.0; 25]).unwrap();
        assert!(matches!(fftshift_center(&p), Err(Error::OddSize(5))));
    }

    #[test]
    fn block_transforms_agree_with_full() {
        let n = 16;
        let f = random_field(n, 9);
        let plan = Fft2Plan::new(n);
        let full = fft2_real(&f);
        let mut block = vec![Complex64::new(0.0, 0.0); 4 * 3];
        plan.forward_block(f.values(), 4, 3, &mut block);
        for kx in 0..4 {
            for ky in 0..3 {
                assert!((block[kx * 3 + ky] - full.get(kx, ky)).norm() < 1e-10);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field_strategy() -> impl Strategy<Value = ScalarField2D> {
            prop_oneof![Just(4usize), Just(6), Just(8), Just(16)].prop_flat_map(|n| {
                proptest::collection::vec(-10.0f64..10.0, n * n)
                    .prop_map(move |v| ScalarField2D::new(n, 1.0, v).unwrap())
            })
        }

        proptest! {
            #[test]
            fn round_trip(f in field_strategy()) {
                let back = ifft2_real(&fft2_real(&f));
                let err = back.lin_comb(1.0, &f, -1.0).unwrap().max_abs();
                prop_assert!(err <= 1e-10 * f.max_abs().max(1e-300));
            }

            #[test]
            fn linearity(f in field_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
                let g = random_field(f.n(), seed);
                let lhs = fft2_real(&f.lin_comb(a, &g, b).unwrap());
                let (ff, fg) = (fft2_real(&f), fft2_real(&g));
                let scale = (f.n() * f.n()) as f64 * 10.0;
                for ((l, x), y) in lhs.coeffs().iter().zip(ff.coeffs()).zip(fg.coeffs()) {
                    prop_assert!((l - (x * a + y * b)).norm() <= 1e-10 * scale);
                }
            }
        }
    }
}
