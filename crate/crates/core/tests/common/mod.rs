//! Shared test oracles, deliberately independent of the library's
//! computation paths.
#![allow(dead_code)] // each test binary uses a different subset

use staragg::lars::LassoPath;
use staragg::linalg::Matrix;

/// xorshift64 uniform in [lo, hi].
pub fn uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    lo + (*state >> 11) as f64 / (1u64 << 53) as f64 * (hi - lo)
}

pub fn uniform_vec(state: &mut u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(state, lo, hi)).collect()
}

pub fn uniform_matrix(state: &mut u64, n: usize, p: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_rows((0..n).map(|_| uniform_vec(state, p, lo, hi)).collect()).unwrap()
}

/// Plain-loop empirical risk.
pub fn loop_risk(f: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..f.len() {
        s += (y[i] - f[i]) * (y[i] - f[i]);
    }
    s / f.len() as f64
}

pub fn mix(lambda: f64, f: &[f64], g: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(g)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect()
}

/// Grid search for min_λ R(λf + (1−λ)g) by direct evaluation: a
/// 1001-point pass over [0,1] refined by a second 1001-point pass around
/// the coarse minimum (final λ resolution 2e−6, far inside the 1e−6 risk
/// tolerances it certifies).
pub fn segment_grid_search(f: &[f64], g: &[f64], y: &[f64]) -> f64 {
    let stage = |lo: f64, hi: f64| -> (f64, f64) {
        let mut best = (f64::INFINITY, lo);
        for k in 0..=1000 {
            let l = lo + (hi - lo) * k as f64 / 1000.0;
            let r = loop_risk(&mix(l, f, g), y);
            if r < best.0 {
                best = (r, l);
            }
        }
        best
    };
    let (_, l0) = stage(0.0, 1.0);
    let (r, _) = stage((l0 - 1e-3).max(0.0), (l0 + 1e-3).min(1.0));
    r
}

/// Rebuilds the centered/scaled working design a path was fit under.
pub fn working_design(path: &LassoPath, x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let mut xw = Matrix::zeros(n, p);
    for j in 0..p {
        for i in 0..n {
            xw.set(i, j, (x.get(i, j) - path.centers()[j]) / path.scales()[j]);
        }
    }
    let yc: Vec<f64> = y.iter().map(|v| v - path.y_mean()).collect();
    (xw, yc)
}

/// Cyclic coordinate-descent lasso for min ½‖y − Xβ‖² + λ‖β‖₁,
/// run until the largest coefficient update is below `tol`.
pub fn coordinate_descent_lasso(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
    start: &[f64],
) -> Vec<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let col_sq: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x.get(i, j) * x.get(i, j)).sum())
        .collect();
    let mut beta = start.to_vec();
    let mut resid: Vec<f64> = (0..n)
        .map(|i| {
            let mut r = y[i];
            for j in 0..p {
                r -= x.get(i, j) * beta[j];
            }
            r
        })
        .collect();
    for _sweep in 0..100_000 {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let mut rho = 0.0;
            for i in 0..n {
                rho += x.get(i, j) * resid[i];
            }
            rho += col_sq[j] * beta[j];
            let new = if rho > lambda {
                (rho - lambda) / col_sq[j]
            } else if rho < -lambda {
                (rho + lambda) / col_sq[j]
            } else {
                0.0
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    resid[i] -= x.get(i, j) * delta;
                }
                beta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < tol {
            break;
        }
    }
    beta
}
