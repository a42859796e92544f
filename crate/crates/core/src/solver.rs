//! Explicit finite-difference integration of the 2D Kuramoto-Sivashinsky equation
//!
//! ```text
//! ∂t u = −½|∇u|² − ∇²u − ∇⁴u
//! ```
//!
//! on a square grid with homogeneous Dirichlet data: every ghost point outside the
//! `n × n` domain is zero. The biharmonic is the 5-point Laplacian applied twice,
//! with zero ghosts at both applications.

use crate::error::{Error, Result};
use crate::field::ScalarField2D;

/// Entries larger than this in magnitude count as numerical blow-up.
pub const BLOW_UP_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 128,
            h: 1.0,
            dt: 0.01,
            t_final: 10.0,
            snapshot_stride: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSolverConfig(msg));
        if self.n < crate::field::MIN_GRID {
            return bad(format!("n = {} is below the minimum grid size", self.n));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1".into());
        }
        let ratio = self.t_final / self.dt;
        let steps = ratio.round();
        // a few ULPs of slack: decimal dt values are not exactly representable
        if steps < 1.0 || (ratio - steps).abs() > 4.0 * f64::EPSILON * ratio {
            return bad(format!(
                "t_final / dt = {ratio} is not an integer step count"
            ));
        }
        if self.dt > self.stability_limit() {
            log::warn!(
                "dt = {} exceeds h⁴/10 = {}; explicit Euler may be unstable",
                self.dt,
                self.stability_limit()
            );
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Conservative explicit-stability guide `h⁴/10`.
    pub fn stability_limit(&self) -> f64 {
        self.h.powi(4) / 10.0
    }

    pub fn stable(&self) -> bool {
        self.dt <= self.stability_limit()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub frames: Vec<ScalarField2D>,
}

impl Trajectory {
    pub fn final_frame(&self) -> &ScalarField2D {
        self.frames.last().expect("trajectory always holds the initial frame")
    }
}

/// Preallocated stencil buffers for repeated stepping on one grid.
struct Stencils {
    n: usize,
    h: f64,
    lap: Vec<f64>,
    bih: Vec<f64>,
    grad: Vec<f64>,
}

impl Stencils {
    fn new(n: usize, h: f64) -> Self {
        Self {
            n,
            h,
            lap: vec![0.0; n * n],
            bih: vec![0.0; n * n],
            grad: vec![0.0; n * n],
        }
    }

    /// Writes `rhs(u)` into `out`.
    fn rhs_into(&mut self, u: &[f64], out: &mut [f64]) {
        laplacian_into(u, self.n, self.h, &mut self.lap);
        laplacian_into(&self.lap, self.n, self.h, &mut self.bih);
        grad_sq_into(u, self.n, self.h, &mut self.grad);
        for (((o, g), l), b) in out.iter_mut().zip(&self.grad).zip(&self.lap).zip(&self.bih) {
            *o = -0.5 * g - l - b;
        }
    }
}

fn laplacian_into(u: &[f64], n: usize, h: f64, out: &mut [f64]) {
    let inv_h2 = 1.0 / (h * h);
    for i in 0..n {
        for j in 0..n {
            let c = u[i * n + j];
            let up = if i > 0 { u[(i - 1) * n + j] } else { 0.0 };
            let down = if i + 1 < n { u[(i + 1) * n + j] } else { 0.0 };
            let left = if j > 0 { u[i * n + j - 1] } else { 0.0 };
            let right = if j + 1 < n { u[i * n + j + 1] } else { 0.0 };
            out[i * n + j] = (up + down + left + right - 4.0 * c) * inv_h2;
        }
    }
}

fn grad_sq_into(u: &[f64], n: usize, h: f64, out: &mut [f64]) {
    let inv_2h = 1.0 / (2.0 * h);
    for i in 0..n {
        for j in 0..n {
            let up = if i > 0 { u[(i - 1) * n + j] } else { 0.0 };
            let down = if i + 1 < n { u[(i + 1) * n + j] } else { 0.0 };
            let left = if j > 0 { u[i * n + j - 1] } else { 0.0 };
            let right = if j + 1 < n { u[i * n + j + 1] } else { 0.0 };
            let ux = (down - up) * inv_2h;
            let uy = (right - left) * inv_2h;
            out[i * n + j] = ux * ux + uy * uy;
        }
    }
}

fn with_values(field: &ScalarField2D, f: impl FnOnce(&[f64], &mut [f64])) -> ScalarField2D {
    let mut out = vec![0.0; field.values().len()];
    f(field.values(), &mut out);
    ScalarField2D::from_parts_unchecked(field.n(), field.h(), out)
}

/// 5-point Laplacian with zero ghost values.
pub fn laplacian(field: &ScalarField2D) -> ScalarField2D {
    with_values(field, |u, out| laplacian_into(u, field.n(), field.h(), out))
}

/// Laplacian of the Laplacian, zero ghosts at both applications.
pub fn biharmonic(field: &ScalarField2D) -> ScalarField2D {
    laplacian(&laplacian(field))
}

/// `u_x² + u_y²` from central differences with zero ghost values.
pub fn grad_sq(field: &ScalarField2D) -> ScalarField2D {
    with_values(field, |u, out| grad_sq_into(u, field.n(), field.h(), out))
}

/// Right-hand side `−½|∇u|² − ∇²u − ∇⁴u`.
pub fn rhs(field: &ScalarField2D) -> ScalarField2D {
    let mut stencils = Stencils::new(field.n(), field.h());
    with_values(field, |u, out| stencils.rhs_into(u, out))
}

fn check_blow_up(values: &[f64], step: usize) -> Result<()> {
    let mut max_abs = 0.0_f64;
    for &v in values {
        if !v.is_finite() {
            return Err(Error::BlowUp {
                step,
                max_abs: f64::INFINITY,
                sample: None,
            });
        }
        max_abs = max_abs.max(v.abs());
    }
    if max_abs > BLOW_UP_LIMIT {
        return Err(Error::BlowUp {
            step,
            max_abs,
            sample: None,
        });
    }
    Ok(())
}

/// One forward-Euler step `u + dt·rhs(u)`.
pub fn step_euler(field: &ScalarField2D, dt: f64) -> Result<ScalarField2D> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSolverConfig(format!(
            "dt must be nonnegative, got {dt}"
        )));
    }
    let mut next = rhs(field).into_values();
    for (x, u) in next.iter_mut().zip(field.values()) {
        *x = u + dt * *x;
    }
    check_blow_up(&next, 1)?;
    Ok(ScalarField2D::from_parts_unchecked(field.n(), field.h(), next))
}

/// Integrates `round(t_final/dt)` Euler steps from `u0`, keeping the initial frame,
/// every `snapshot_stride`-th frame and the final frame.
pub fn evolve(u0: &ScalarField2D, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    if u0.n() != config.n {
        return Err(Error::ShapeMismatch(format!(
            "initial field is {0}x{0} but the solver expects n = {1}",
            u0.n(),
            config.n
        )));
    }
    let n = config.n;
    let steps = config.steps();
    let mut stencils = Stencils::new(n, config.h);
    let mut u = u0.values().to_vec();
    let mut du = vec![0.0; n * n];

    let mut times = vec![0.0];
    let mut frames = vec![ScalarField2D::from_parts_unchecked(n, config.h, u.clone())];
    for step in 1..=steps {
        stencils.rhs_into(&u, &mut du);
        for (x, d) in u.iter_mut().zip(&du) {
            *x += config.dt * d;
        }
        check_blow_up(&u, step)?;
        if step % config.snapshot_stride == 0 || step == steps {
            times.push(step as f64 * config.dt);
            frames.push(ScalarField2D::from_parts_unchecked(n, config.h, u.clone()));
        }
    }
    Ok(Trajectory {
        config: *config,
        times,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, h: f64, seed: u64) -> ScalarField2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField2D::from_fn(n, h, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Dense `n² × n²` Dirichlet Laplacian.
    fn dense_laplacian(n: usize, h: f64) -> Vec<Vec<f64>> {
        let m = n * n;
        let mut a = vec![vec![0.0; m]; m];
        let inv = 1.0 / (h * h);
        for i in 0..n {
            for j in 0..n {
                let r = i * n + j;
                a[r][r] = -4.0 * inv;
                if i > 0 {
                    a[r][r - n] = inv;
                }
                if i + 1 < n {
                    a[r][r + n] = inv;
                }
                if j > 0 {
                    a[r][r - 1] = inv;
                }
                if j + 1 < n {
                    a[r][r + 1] = inv;
                }
            }
        }
        a
    }

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    #[test]
    fn zero_field_is_fixed_point() {
        let z = ScalarField2D::zeros(8, 1.0).unwrap();
        assert_eq!(laplacian(&z), z);
        assert_eq!(biharmonic(&z), z);
        assert_eq!(rhs(&z), z);
        assert_eq!(step_euler(&z, 0.3).unwrap(), z);
    }

    #[test]
    fn laplacian_exact_for_quadratic() {
        let h = 0.5;
        let n = 10;
        let f = ScalarField2D::from_fn(n, h, |i, j| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            x * x + y * y
        })
        .unwrap();
        let l = laplacian(&f);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                assert!((l.get(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn biharmonic_spike_center_weight() {
        let n = 11;
        let h = 0.5;
        let mut v = vec![0.0; n * n];
        v[5 * n + 5] = 1.0;
        let b = biharmonic(&ScalarField2D::new(n, h, v).unwrap());
        assert!((b.get(5, 5) - 20.0 / h.powi(4)).abs() < 1e-9);
        assert!((b.get(4, 5) + 8.0 / h.powi(4)).abs() < 1e-9);
        assert!((b.get(4, 4) - 2.0 / h.powi(4)).abs() < 1e-9);
        assert!((b.get(3, 5) - 1.0 / h.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn stencils_match_dense_oracles() {
        for n in [5, 8, 16] {
            let h = 0.7;
            let f = random_field(n, h, n as u64);
            let a = dense_laplacian(n, h);
            let lap_dense = mat_vec(&a, f.values());
            assert!(max_diff(laplacian(&f).values(), &lap_dense) < 1e-12);
            let bih_dense = mat_vec(&a, &lap_dense);
            assert!(max_diff(biharmonic(&f).values(), &bih_dense) < 1e-12 * 10.0);
        }
    }

    #[test]
    fn grad_sq_cases() {
        let n = 8;
        let c = ScalarField2D::from_fn(n, 1.0, |_, _| 3.0).unwrap();
        let g = grad_sq(&c);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                assert_eq!(g.get(i, j), 0.0);
            }
        }
        let a = 1.7;
        let lin = ScalarField2D::from_fn(n, 0.5, |i, _| a * i as f64 * 0.5).unwrap();
        let g = grad_sq(&lin);
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                assert!((g.get(i, j) - a * a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_field_rhs_vanishes_in_deep_interior() {
        let n = 9;
        let r = rhs(&ScalarField2D::from_fn(n, 1.0, |_, _| 0.8).unwrap());
        for i in 2..n - 2 {
            for j in 2..n - 2 {
                assert!(r.get(i, j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_dt_is_identity() {
        let f = random_field(8, 1.0, 5);
        assert_eq!(step_euler(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn step_reports_blow_up() {
        let f = ScalarField2D::from_fn(8, 1.0, |i, j| ((i * 8 + j) % 3) as f64 * 1e4).unwrap();
        assert!(matches!(step_euler(&f, 1.0), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn evolve_zero_stays_zero_and_keeps_snapshots() {
        let cfg = SolverConfig {
            n: 8,
            h: 1.0,
            dt: 0.01,
            t_final: 0.25,
            snapshot_stride: 10,
        };
        let traj = evolve(&ScalarField2D::zeros(8, 1.0).unwrap(), &cfg).unwrap();
        assert_eq!(traj.times.len(), 4);
        assert!((traj.times[3] - 0.25).abs() < 1e-12);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert!(traj.frames.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn evolve_rejects_bad_input() {
        let cfg = SolverConfig {
            n: 8,
            ..Default::default()
        };
        assert!(evolve(&ScalarField2D::zeros(16, 1.0).unwrap(), &cfg).is_err());
        let bad = SolverConfig {
            t_final: 0.015,
            ..cfg
        };
        assert!(bad.validate().is_err());
        assert!(SolverConfig { dt: -1.0, ..cfg }.validate().is_err());
        assert!(SolverConfig { snapshot_stride: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn default_step_counts_validate() {
        for (dt, t, steps) in [(0.01, 10.0, 1000), (0.005, 0.1, 20), (0.01, 0.1, 10), (0.00125, 0.1, 80)] {
            let cfg = SolverConfig { n: 8, dt, t_final: t, ..Default::default() };
            cfg.validate().unwrap();
            assert_eq!(cfg.steps(), steps);
        }
    }
}
