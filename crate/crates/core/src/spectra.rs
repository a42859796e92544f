//! Power-spectrum diagnostics: DC-centred log power, radially binned power, and
//! absolute and normalized error between a prediction's and a reference's radial
//! spectra.
//!
//! Radial bins are uniform over `[0, r_max]` with `r_max = √2·(n/2)·(1 + 1e-9)`,
//! so every pixel of the shifted grid, corners included, lands in exactly one bin.
//! Bins average (not sum) the raw power.

use crate::error::{Error, Result};
use crate::field::{fftshift_center, full_power, FullSpectrum2D, ScalarField2D};

/// Floor added inside the logarithm of display spectra.
pub const LOG_FLOOR: f64 = 1e-12;

/// Default bin count for a 128-point grid.
pub const DEFAULT_BINS: usize = 28;

/// Default fraction of bins that must carry power for a spectrum to count as broadband.
pub const BROADBAND_FRACTION: f64 = 0.9;

/// Bins below this fraction of the strongest bin count as empty.
pub const BROADBAND_RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    pub n_bins: usize,
    /// `n_bins + 1` uniform radial wavenumber edges.
    pub bin_edges: Vec<f64>,
    pub power: Vec<f64>,
    /// Pixels per bin.
    pub counts: Vec<usize>,
}

impl RadialSpectrum {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_bins != other.n_bins || self.bin_edges != other.bin_edges || self.counts != other.counts {
            return Err(Error::BinMismatch);
        }
        Ok(())
    }

    /// Bin-wise mean of several spectra sharing one bin layout.
    pub fn mean(spectra: &[RadialSpectrum]) -> Result<RadialSpectrum> {
        let first = spectra
            .first()
            .ok_or_else(|| Error::ShapeMismatch("cannot average zero spectra".into()))?;
        let mut power = vec![0.0; first.n_bins];
        for s in spectra {
            first.check_compatible(s)?;
            for (acc, p) in power.iter_mut().zip(&s.power) {
                *acc += p;
            }
        }
        let inv = 1.0 / spectra.len() as f64;
        power.iter_mut().for_each(|p| *p *= inv);
        Ok(RadialSpectrum {
            power,
            ..first.clone()
        })
    }
}

/// `fftshift(log(P + ε))` with the DC entry at `(n/2, n/2)`.
pub fn log_power_2d(field: &ScalarField2D) -> Result<FullSpectrum2D> {
    let logged = full_power(field).map(|p| (p + LOG_FLOOR).ln());
    fftshift_center(&logged)
}

/// Distance of each shifted-grid entry from the centre `(n/2, n/2)`.
pub fn radial_wavenumber(n: usize) -> Result<Vec<f64>> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddSize(n));
    }
    let c = (n / 2) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((i as f64 - c).hypot(j as f64 - c));
        }
    }
    Ok(out)
}

pub fn radial_max(n: usize) -> f64 {
    std::f64::consts::SQRT_2 * (n / 2) as f64 * (1.0 + 1e-9)
}

/// Radially averaged power of the centred two-sided spectrum.
pub fn radial_power(field: &ScalarField2D, n_bins: usize) -> Result<RadialSpectrum> {
    if n_bins == 0 {
        return Err(Error::ShapeMismatch("n_bins must be at least 1".into()));
    }
    let n = field.n();
    let radii = radial_wavenumber(n)?;
    let shifted = fftshift_center(&full_power(field))?;
    let r_max = radial_max(n);
    let width = r_max / n_bins as f64;

    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&r, &p) in radii.iter().zip(shifted.values()) {
        let b = ((r / width).floor() as usize).min(n_bins - 1);
        sums[b] += p;
        counts[b] += 1;
    }
    let power = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(RadialSpectrum {
        n_bins,
        bin_edges: (0..=n_bins).map(|b| b as f64 * width).collect(),
        power,
        counts,
    })
}

/// `|pred − gt|` per bin.
pub fn error_power(pred: &RadialSpectrum, gt: &RadialSpectrum) -> Result<Vec<f64>> {
    pred.check_compatible(gt)?;
    Ok(pred.power.iter().zip(&gt.power).map(|(p, g)| (p - g).abs()).collect())
}

/// `|pred − gt| / gt` per bin; `None` where the reference bin has no power.
pub fn normalized_error_power(pred: &RadialSpectrum, gt: &RadialSpectrum) -> Result<Vec<Option<f64>>> {
    pred.check_compatible(gt)?;
    Ok(pred
        .power
        .iter()
        .zip(&gt.power)
        .map(|(&p, &g)| if g > 0.0 { Some((p - g).abs() / g) } else { None })
        .collect())
}

/// True when at least `threshold_fraction` of the bins carry more than
/// `1e-6 ×` the strongest bin's power.
pub fn broadband_check(rs: &RadialSpectrum, threshold_fraction: f64) -> bool {
    active_bin_fraction(rs) >= threshold_fraction
}

pub fn active_bin_fraction(rs: &RadialSpectrum) -> f64 {
    let max = rs.power.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || rs.power.is_empty() {
        return 0.0;
    }
    let active = rs
        .power
        .iter()
        .filter(|&&p| p > BROADBAND_RELATIVE_FLOOR * max)
        .count();
    active as f64 / rs.power.len() as f64
}

/// First bin whose normalized error exceeds `threshold`, skipping undefined bins.
pub fn first_bin_exceeding(normalized: &[Option<f64>], threshold: f64) -> Option<usize> {
    normalized.iter().position(|v| v.is_some_and(|x| x > threshold))
}

/// Outcome of comparing two models' normalized error curves bin by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffOrdering {
    /// First bin where the low-cutoff model's normalized error exceeds 1.
    pub first_low: Option<usize>,
    /// Same for the high-cutoff model.
    pub first_high: Option<usize>,
    /// Bins in the top quartile (defined on both curves) where the high-cutoff
    /// model's error exceeds the low-cutoff model's.
    pub top_quartile_violations: Vec<usize>,
}

impl CutoffOrdering {
    /// The low-cutoff model breaks down strictly earlier, and the high-cutoff model
    /// is no worse anywhere in the top quartile.
    pub fn holds(&self) -> bool {
        let earlier = match (self.first_low, self.first_high) {
            (Some(l), Some(h)) => l < h,
            (Some(_), None) => true,
            (None, _) => false,
        };
        earlier && self.top_quartile_violations.is_empty()
    }
}

pub fn cutoff_ordering(low: &[Option<f64>], high: &[Option<f64>]) -> Result<CutoffOrdering> {
    if low.len() != high.len() {
        return Err(Error::BinMismatch);
    }
    let n = low.len();
    let start = n - n.div_ceil(4);
    let top_quartile_violations = (start..n)
        .filter(|&b| matches!((low[b], high[b]), (Some(l), Some(h)) if h > l))
        .collect();
    Ok(CutoffOrdering {
        first_low: first_bin_exceeding(low, 1.0),
        first_high: first_bin_exceeding(high, 1.0),
        top_quartile_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn delta(n: usize) -> ScalarField2D {
        let mut v = vec![0.0; n * n];
        v[n + 2] = 1.0;
        ScalarField2D::new(n, 1.0, v).unwrap()
    }

    fn spectrum(power: Vec<f64>) -> RadialSpectrum {
        let n_bins = power.len();
        RadialSpectrum {
            n_bins,
            bin_edges: (0..=n_bins).map(|b| b as f64).collect(),
            counts: vec![1; n_bins],
            power,
        }
    }

    #[test]
    fn log_power_of_constant_and_zero() {
        let n = 8;
        let c = 1.5;
        let lp = log_power_2d(&ScalarField2D::from_fn(n, 1.0, |_, _| c).unwrap()).unwrap();
        let centre = (c * c * (n as f64).powi(4) + LOG_FLOOR).ln();
        for i in 0..n {
            for j in 0..n {
                let expect = if (i, j) == (4, 4) { centre } else { LOG_FLOOR.ln() };
                assert!((lp.get(i, j) - expect).abs() < 1e-6, "({i},{j}) {}", lp.get(i, j));
            }
        }
        let z = log_power_2d(&ScalarField2D::zeros(n, 1.0).unwrap()).unwrap();
        assert!(z.values().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn log_power_of_cosine_has_symmetric_peaks() {
        let n = 16;
        let f = ScalarField2D::from_fn(n, 1.0, |i, _| (2.0 * PI * 3.0 * i as f64 / n as f64).cos()).unwrap();
        let lp = log_power_2d(&f).unwrap();
        let max = lp.values().iter().copied().fold(f64::MIN, f64::max);
        let peaks: Vec<_> = (0..n * n).filter(|&k| lp.values()[k] > max - 1e-6).map(|k| (k / n, k % n)).collect();
        assert_eq!(peaks, vec![(5, 8), (11, 8)]);
    }

    #[test]
    fn radial_wavenumber_values() {
        let r = radial_wavenumber(128).unwrap();
        assert_eq!(r[64 * 128 + 64], 0.0);
        assert_eq!(r[67 * 128 + 68], 5.0);
        assert!((r[0] - 90.509_667_991_878_08).abs() < 1e-9);
        assert!(matches!(radial_wavenumber(7), Err(Error::OddSize(7))));
    }

    #[test]
    fn constant_field_puts_power_in_first_bin() {
        let rs = radial_power(&ScalarField2D::from_fn(16, 1.0, |_, _| 2.0).unwrap(), 6).unwrap();
        assert!(rs.power[0] > 0.0);
        assert!(rs.power[1..].iter().all(|&p| p.abs() < 1e-20));
    }

    #[test]
    fn delta_gives_flat_bins() {
        let rs = radial_power(&delta(16), 6).unwrap();
        assert!(rs.power.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(broadband_check(&rs, BROADBAND_FRACTION));
        assert_eq!(rs.counts.iter().sum::<usize>(), 256);
    }

    #[test]
    fn default_layout_has_no_empty_bin() {
        let rs = radial_power(&delta(128), DEFAULT_BINS).unwrap();
        assert_eq!(rs.counts.iter().sum::<usize>(), 128 * 128);
        assert!(rs.counts.iter().all(|&c| c >= 1));
    }

    #[test]
    fn dc_only_spectrum_is_not_broadband() {
        let rs = radial_power(&ScalarField2D::from_fn(16, 1.0, |_, _| 1.0).unwrap(), 6).unwrap();
        assert!(!broadband_check(&rs, BROADBAND_FRACTION));
    }

    #[test]
    fn error_curves() {
        let a = spectrum(vec![1.0, 2.0, 0.0]);
        let b = spectrum(vec![1.5, 1.0, 4.0]);
        assert_eq!(error_power(&a, &a).unwrap(), vec![0.0; 3]);
        assert_eq!(error_power(&a, &b).unwrap(), error_power(&b, &a).unwrap());
        let zero = spectrum(vec![0.0; 3]);
        assert_eq!(error_power(&b, &zero).unwrap(), vec![1.5, 1.0, 4.0]);

        let scaled = spectrum(b.power.iter().map(|p| 1.1 * p).collect());
        for v in normalized_error_power(&scaled, &b).unwrap() {
            assert!((v.unwrap() - 0.1).abs() < 1e-12);
        }
        assert_eq!(normalized_error_power(&b, &b).unwrap(), vec![Some(0.0); 3]);
        let with_gap = normalized_error_power(&b, &a).unwrap();
        assert_eq!(with_gap[2], None);
        assert!(with_gap[0].unwrap().is_finite() && with_gap[1].unwrap().is_finite());

        let other = spectrum(vec![1.0, 2.0]);
        assert!(matches!(error_power(&a, &other), Err(Error::BinMismatch)));
        assert!(matches!(normalized_error_power(&a, &other), Err(Error::BinMismatch)));
    }

    #[test]
    fn ordering_of_cutoffs() {
        let low = [Some(0.1), Some(1.2), Some(3.0), Some(5.0)];
        let high = [Some(0.1), Some(0.5), Some(1.5), Some(4.0)];
        let o = cutoff_ordering(&low, &high).unwrap();
        assert_eq!((o.first_low, o.first_high), (Some(1), Some(2)));
        assert!(o.holds());
        let worse_top = [Some(0.1), Some(0.5), Some(1.5), Some(6.0)];
        let o = cutoff_ordering(&low, &worse_top).unwrap();
        assert_eq!(o.top_quartile_violations, vec![3]);
        assert!(!o.holds());
        assert!(cutoff_ordering(&high, &low).map(|o| !o.holds()).unwrap());
        assert!(cutoff_ordering(&low, &[None; 4]).unwrap().holds());
        assert!(cutoff_ordering(&low, &high[..3]).is_err());
    }

    #[test]
    fn first_exceeding_bin() {
        let v = [Some(0.2), None, Some(1.0), Some(1.5), Some(3.0)];
        assert_eq!(first_bin_exceeding(&v, 1.0), Some(3));
        assert_eq!(first_bin_exceeding(&v[..3], 1.0), None);
    }
}
