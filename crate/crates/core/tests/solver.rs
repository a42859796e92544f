use ksfno_core::dataset::generate_initial;
use ksfno_core::solver::{biharmonic, evolve, grad_sq, laplacian, rhs, step_euler, SolverConfig};
use ksfno_core::ScalarField2D;

/// Dense `n² × n²` Dirichlet Laplacian, assembled row by row.
fn dense_laplacian(n: usize, h: f64) -> Vec<Vec<f64>> {
    let m = n * n;
    let inv = 1.0 / (h * h);
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            a[r][r] = -4.0 * inv;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if (0..n as i64).contains(&ii) && (0..n as i64).contains(&jj) {
                    a[r][ii as usize * n + jj as usize] = inv;
                }
            }
        }
    }
    a
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Central-difference gradient magnitude with explicit index arithmetic on a
/// zero-padded copy of the grid.
fn grad_sq_oracle(f: &ScalarField2D) -> Vec<f64> {
    let n = f.n();
    let p = n + 2;
    let mut padded = vec![0.0; p * p];
    for i in 0..n {
        for j in 0..n {
            padded[(i + 1) * p + (j + 1)] = f.get(i, j);
        }
    }
    let h2 = 2.0 * f.h();
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n + 1, k % n + 1);
            let ux = (padded[(i + 1) * p + j] - padded[(i - 1) * p + j]) / h2;
            let uy = (padded[i * p + j + 1] - padded[i * p + j - 1]) / h2;
            ux * ux + uy * uy
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn l2_diff(a: &ScalarField2D, b: &ScalarField2D) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn rhs_is_sum_of_oracle_pieces() {
    let f = generate_initial(8, 1.0, 3).unwrap();
    let a = dense_laplacian(8, 1.0);
    let lap = mat_vec(&a, f.values());
    let bih = mat_vec(&a, &lap);
    let g = grad_sq_oracle(&f);
    let expect: Vec<f64> = (0..64).map(|k| -0.5 * g[k] - lap[k] - bih[k]).collect();
    assert!(max_abs_diff(rhs(&f).values(), &expect) < 1e-12);
}

#[test]
fn stencils_match_oracles_across_sizes() {
    for n in [5, 8, 16] {
        let f = generate_initial(n, 1.0, n as u64).unwrap();
        let a = dense_laplacian(n, 1.0);
        let lap = mat_vec(&a, f.values());
        assert!(max_abs_diff(laplacian(&f).values(), &lap) < 1e-12);
        assert!(max_abs_diff(biharmonic(&f).values(), &mat_vec(&a, &lap)) < 1e-12);
        assert!(max_abs_diff(grad_sq(&f).values(), &grad_sq_oracle(&f)) < 1e-12);
    }
}

#[test]
fn single_step_matches_dense_operator_step() {
    let n = 32;
    let dt = 0.01;
    let u0 = generate_initial(n, 1.0, 2024).unwrap();
    let a = dense_laplacian(n, 1.0);
    let lap = mat_vec(&a, u0.values());
    let bih = mat_vec(&a, &lap);
    let g = grad_sq_oracle(&u0);
    let expect: Vec<f64> = (0..n * n)
        .map(|k| u0.values()[k] + dt * (-0.5 * g[k] - lap[k] - bih[k]))
        .collect();
    let got = step_euler(&u0, dt).unwrap();
    assert!(max_abs_diff(got.values(), &expect) < 1e-12);
}

#[test]
fn evolve_is_bitwise_deterministic() {
    let cfg = SolverConfig {
        n: 16,
        t_final: 0.5,
        snapshot_stride: 10,
        ..Default::default()
    };
    let u0 = generate_initial(16, 1.0, 1).unwrap();
    let a = evolve(&u0, &cfg).unwrap();
    let b = evolve(&u0, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.frames.len(), a.times.len());
    assert_eq!(a.times.len(), 1 + 5);
}

#[test]
fn evolve_matches_repeated_steps() {
    let cfg = SolverConfig {
        n: 8,
        t_final: 0.05,
        snapshot_stride: 100,
        ..Default::default()
    };
    let u0 = generate_initial(8, 1.0, 5).unwrap();
    let mut u = u0.clone();
    for _ in 0..5 {
        u = step_euler(&u, cfg.dt).unwrap();
    }
    assert_eq!(evolve(&u0, &cfg).unwrap().final_frame(), &u);
}

#[test]
fn halving_dt_converges_at_first_order() {
    let n = 32;
    let u0 = generate_initial(n, 1.0, 7).unwrap();
    let run = |dt: f64| {
        let cfg = SolverConfig {
            n,
            dt,
            t_final: 0.1,
            snapshot_stride: 1_000_000,
            h: 1.0,
        };
        evolve(&u0, &cfg).unwrap().final_frame().clone()
    };
    let reference = run(0.005 / 8.0);
    let ratio = l2_diff(&run(0.01), &reference) / l2_diff(&run(0.005), &reference);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn short_run_from_uniform_data_stays_finite() {
    let n = 64;
    let cfg = SolverConfig {
        n,
        t_final: 1.0,
        ..Default::default()
    };
    let traj = evolve(&generate_initial(n, 1.0, 99).unwrap(), &cfg).unwrap();
    assert!(traj.final_frame().max_abs() < 1e3);
}
