//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use edchrom::linalg::BlockTridiagonal;
use edchrom::IsothermModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random Tóth model with `n` components and heterogeneity `nu`.
pub fn random_model(rng: &mut impl Rng, n: usize, nu: f64) -> IsothermModel {
    loop {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
        let eps = rng.gen_range(0.2..0.8);
        if let Ok(m) = IsothermModel::toth(&a, &b, eps, nu) {
            let eta = m.eta();
            if eta.windows(2).all(|p| p[1] - p[0] > 1e-3 * p[1]) {
                return m;
            }
        }
    }
}

/// `W(c) = c + (1-ε)/ε q(c)` written out from the isotherm, in the model's
/// internal component order.
pub fn toth_forward(model: &IsothermModel, c: &[f64]) -> Vec<f64> {
    let nu = model.nu();
    let ratio = (1.0 - model.porosity()) / model.porosity();
    let d: f64 = model.b().iter().zip(c).map(|(b, c)| b * c.max(0.0)).sum();
    let phi = (1.0 + d.powf(nu)).powf(1.0 / nu);
    c.iter().zip(model.a()).map(|(&ci, a)| ci.max(0.0) + ratio * a * ci.max(0.0) / phi).collect()
}

/// Neumann Laplacian on `m` unit-interval cells, dense row-major.
pub fn laplacian_dense(m: usize) -> Vec<f64> {
    let h2 = (m * m) as f64;
    let mut a = vec![0.0; m * m];
    for j in 0..m {
        if j > 0 {
            a[j * m + j - 1] += h2;
            a[j * m + j] -= h2;
        }
        if j + 1 < m {
            a[j * m + j + 1] += h2;
            a[j * m + j] -= h2;
        }
    }
    a
}

/// Residual of `W(c_j) - κ (c𝒜)_j - G_j`, cell-major.
fn stage_residual(
    model: &IsothermModel,
    lap: &[f64],
    kappa: f64,
    g: &[f64],
    c: &[f64],
    n: usize,
    m: usize,
) -> Vec<f64> {
    let mut r = vec![0.0; n * m];
    for j in 0..m {
        let w = toth_forward(model, &c[j * n..(j + 1) * n]);
        for i in 0..n {
            let lc: f64 = (0..m).map(|k| lap[j * m + k] * c[k * n + i]).sum();
            r[j * n + i] = w[i] - kappa * lc - g[j * n + i];
        }
    }
    r
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Damped Newton on the full dense system with a central-difference
/// Jacobian and an LU solve from nalgebra.
pub fn dense_implicit_solve(model: &IsothermModel, g: &[f64], n: usize, m: usize, kappa: f64) -> Vec<f64> {
    let lap = laplacian_dense(m);
    let dim = n * m;
    // W(c) lies between c and (1 + η) c, so this start is positive and close.
    let mut c: Vec<f64> = g.iter().enumerate().map(|(k, x)| x / (1.0 + model.eta()[k % n])).collect();
    let mut r = stage_residual(model, &lap, kappa, g, &c, n, m);
    for _ in 0..100 {
        if max_abs(&r) <= 1e-15 * (1.0 + max_abs(g)) {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let h = 1e-6 * c[k].abs().max(1e-3);
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[k] += h;
            cm[k] -= h;
            let rp = stage_residual(model, &lap, kappa, g, &cp, n, m);
            let rm = stage_residual(model, &lap, kappa, g, &cm, n, m);
            for i in 0..dim {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&-DVector::from_vec(r.clone())).expect("dense Jacobian is singular");
        let norm = max_abs(&r);
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(x, d)| x + damping * d).collect();
            let rt = stage_residual(model, &lap, kappa, g, &trial, n, m);
            let positive = trial.iter().all(|&x| x > 0.0);
            if (positive && max_abs(&rt) < norm) || damping < 1e-4 {
                c = trial;
                r = rt;
                break;
            }
            damping *= 0.5;
        }
    }
    c
}

/// Random diagonally dominant block-tridiagonal system with its dense copy.
pub fn random_block_system(rng: &mut impl Rng, n: usize, m: usize) -> (BlockTridiagonal, Vec<f64>) {
    let dim = n * m;
    let mut dense = vec![0.0; dim * dim];
    let mut mat = BlockTridiagonal::zeros(n, m);
    for j in 0..m {
        let block: Vec<f64> = (0..n * n)
            .map(|k| if k % (n + 1) == 0 { rng.gen_range(4.0..8.0) * n as f64 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        mat.diag_block_mut(j).copy_from_slice(&block);
        for r in 0..n {
            for s in 0..n {
                dense[(j * n + r) * dim + j * n + s] = block[r * n + s];
            }
        }
        if j + 1 < m {
            let up: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lo: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            mat.upper_block_mut(j).copy_from_slice(&up);
            mat.lower_block_mut(j).copy_from_slice(&lo);
            for r in 0..n {
                for s in 0..n {
                    dense[(j * n + r) * dim + (j + 1) * n + s] = up[r * n + s];
                    dense[((j + 1) * n + r) * dim + j * n + s] = lo[r * n + s];
                }
            }
        }
    }
    (mat, dense)
}

pub fn dense_solve(dense: &[f64], rhs: &[f64]) -> Vec<f64> {
    let dim = rhs.len();
    let a = DMatrix::from_row_slice(dim, dim, dense);
    a.lu().solve(&DVector::from_column_slice(rhs)).expect("singular").iter().copied().collect()
}

/// Eigenvalues of a real matrix with real spectrum, ascending.
pub fn dense_eigenvalues(dense: &[f64], n: usize) -> Vec<f64> {
    let a = DMatrix::from_row_slice(n, n, dense);
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
