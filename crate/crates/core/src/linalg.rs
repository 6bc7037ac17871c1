//! Small dense LU with partial pivoting and a block-tridiagonal solver.
//!
//! Matrices are row-major `Vec<f64>`. The block size is the number of
//! components, so everything here is sized for a handful of rows.

use crate::error::{Error, Result};

/// LU factorization `P A = L U` of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn new(n: usize) -> Self {
        Self { n, lu: vec![0.0; n * n], piv: (0..n).collect() }
    }

    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        let mut lu = Self::new(n);
        lu.refactor(a)?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factors `a` in place of the previous factorization.
    pub fn refactor(&mut self, a: &[f64]) -> Result<()> {
        let n = self.n;
        debug_assert_eq!(a.len(), n * n);
        self.lu.copy_from_slice(a);
        let lu = &mut self.lu;
        for (k, p) in self.piv.iter_mut().enumerate() {
            *p = k;
        }
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_abs = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = r;
                }
            }
            if !(pivot_abs > 0.0) || !pivot_abs.is_finite() {
                return Err(Error::Singular { column: k });
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                self.piv.swap(k, pivot_row);
            }
            let inv = 1.0 / lu[k * n + k];
            for r in (k + 1)..n {
                let l = lu[r * n + k] * inv;
                lu[r * n + k] = l;
                if l != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= l * lu[k * n + c];
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b`, overwriting `b` with `x`. `scratch` needs length `n`.
    pub fn solve_with(&self, b: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        for (i, &p) in self.piv.iter().enumerate() {
            scratch[i] = b[p];
        }
        for i in 0..n {
            let mut s = scratch[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * scratch[k];
            }
            scratch[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = scratch[i];
            for k in (i + 1)..n {
                s -= self.lu[i * n + k] * scratch[k];
            }
            scratch[i] = s / self.lu[i * n + i];
        }
        b[..n].copy_from_slice(&scratch[..n]);
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let mut scratch = vec![0.0; self.n];
        self.solve_with(b, &mut scratch);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `y = A x` for row-major square `A`.
#[inline]
pub fn mat_vec(a: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    for (i, yi) in y.iter_mut().enumerate().take(n) {
        *yi = a[i * n..(i + 1) * n].iter().zip(x).map(|(a, x)| a * x).sum();
    }
}

/// Block-tridiagonal matrix with `m` diagonal blocks of size `n × n`.
///
/// `lower[j]` couples block row `j + 1` to column `j`; `upper[j]` couples
/// block row `j` to column `j + 1`. All blocks are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub n: usize,
    pub m: usize,
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BlockTridiagonal {
    pub fn zeros(n: usize, m: usize) -> Self {
        let nn = n * n;
        Self {
            n,
            m,
            diag: vec![0.0; nn * m],
            lower: vec![0.0; nn * m.saturating_sub(1)],
            upper: vec![0.0; nn * m.saturating_sub(1)],
        }
    }

    pub fn diag_block(&self, j: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.diag[j * nn..(j + 1) * nn]
    }

    pub fn diag_block_mut(&mut self, j: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.diag[j * nn..(j + 1) * nn]
    }

    pub fn lower_block_mut(&mut self, j: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.lower[j * nn..(j + 1) * nn]
    }

    pub fn upper_block_mut(&mut self, j: usize) -> &mut [f64] {
        let nn = self.n * self.n;
        &mut self.upper[j * nn..(j + 1) * nn]
    }

    /// `y = M x`, with `x` and `y` stored block by block (length `n m`).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (n, nn) = (self.n, self.n * self.n);
        let mut tmp = vec![0.0; n];
        for j in 0..self.m {
            let yj = &mut y[j * n..(j + 1) * n];
            mat_vec(&self.diag[j * nn..(j + 1) * nn], &x[j * n..(j + 1) * n], yj);
            if j > 0 {
                mat_vec(&self.lower[(j - 1) * nn..j * nn], &x[(j - 1) * n..j * n], &mut tmp);
                yj.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            }
            if j + 1 < self.m {
                mat_vec(&self.upper[j * nn..(j + 1) * nn], &x[(j + 1) * n..(j + 2) * n], &mut tmp);
                yj.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            }
        }
    }

    /// `‖M x - rhs‖∞ / (‖M‖∞ ‖x‖∞ + ‖rhs‖∞)`.
    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        let res = y.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let n = self.n;
        let nn = n * n;
        let mut norm = 0.0f64;
        for j in 0..self.m {
            for i in 0..n {
                let mut row = 0.0;
                let range = i * n..(i + 1) * n;
                row += self.diag[j * nn..][range.clone()].iter().map(|v| v.abs()).sum::<f64>();
                if j > 0 {
                    row += self.lower[(j - 1) * nn..][range.clone()].iter().map(|v| v.abs()).sum::<f64>();
                }
                if j + 1 < self.m {
                    row += self.upper[j * nn..][range].iter().map(|v| v.abs()).sum::<f64>();
                }
                norm = norm.max(row);
            }
        }
        let xn = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let bn = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = norm * xn + bn;
        if scale == 0.0 {
            res
        } else {
            res / scale
        }
    }
}

/// Reusable storage for [`BlockTridiagonal`] solves.
#[derive(Debug, Clone)]
pub struct BlockSolver {
    n: usize,
    lus: Vec<DenseLu>,
    /// `X_j = D'_j⁻¹ U_j`
    x_blocks: Vec<f64>,
    pivot: Vec<f64>,
    scratch: Vec<f64>,
    column: Vec<f64>,
    tmp: Vec<f64>,
}

impl BlockSolver {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            lus: (0..m).map(|_| DenseLu::new(n)).collect(),
            x_blocks: vec![0.0; n * n * m],
            pivot: vec![0.0; n * n],
            scratch: vec![0.0; n],
            column: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Block LU (block Thomas) solve; `rhs` is overwritten by the solution.
    pub fn solve(&mut self, mat: &BlockTridiagonal, rhs: &mut [f64]) -> Result<()> {
        let (n, m) = (mat.n, mat.m);
        if n != self.n || rhs.len() != n * m {
            return Err(Error::Shape(format!("block system {n}x{m} does not match rhs of length {}", rhs.len())));
        }
        if self.lus.len() != m {
            *self = Self::new(n, m);
        }
        let nn = n * n;
        for j in 0..m {
            // D'_j = D_j - L_{j-1} X_{j-1};  y_j = D'_j⁻¹ (r_j - L_{j-1} y_{j-1})
            self.pivot.copy_from_slice(&mat.diag[j * nn..(j + 1) * nn]);
            if j > 0 {
                let l = &mat.lower[(j - 1) * nn..j * nn];
                let x_prev = &self.x_blocks[(j - 1) * nn..j * nn];
                for r in 0..n {
                    for c in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += l[r * n + k] * x_prev[k * n + c];
                        }
                        self.pivot[r * n + c] -= s;
                    }
                }
                let (prev, cur) = rhs.split_at_mut(j * n);
                mat_vec(l, &prev[(j - 1) * n..], &mut self.tmp);
                cur[..n].iter_mut().zip(&self.tmp).for_each(|(a, b)| *a -= b);
            }
            self.lus[j].refactor(&self.pivot).map_err(|_| Error::Singular { column: j })?;
            self.lus[j].solve_with(&mut rhs[j * n..(j + 1) * n], &mut self.scratch);
            if j + 1 < m {
                let u = &mat.upper[j * nn..(j + 1) * nn];
                for c in 0..n {
                    for r in 0..n {
                        self.column[r] = u[r * n + c];
                    }
                    self.lus[j].solve_with(&mut self.column, &mut self.scratch);
                    for r in 0..n {
                        self.x_blocks[j * nn + r * n + c] = self.column[r];
                    }
                }
            }
        }
        for j in (0..m.saturating_sub(1)).rev() {
            // x_j = y_j - X_j x_{j+1}
            let (head, tail) = rhs.split_at_mut((j + 1) * n);
            mat_vec(&self.x_blocks[j * nn..(j + 1) * nn], &tail[..n], &mut self.tmp);
            head[j * n..].iter_mut().zip(&self.tmp).for_each(|(a, b)| *a -= b);
        }
        Ok(())
    }
}

/// One-shot block-tridiagonal solve.
pub fn block_tridiagonal_solve(mat: &BlockTridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    BlockSolver::new(mat.n, mat.m).solve(mat, &mut x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lu_solves_permuted_system() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factor(&a, 3).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for v in x {
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
        assert!(DenseLu::factor(&[1.0, 2.0, 2.0, 4.0], 2).is_err());
    }

    #[test]
    fn identity_blocks_return_rhs() {
        let mut mat = BlockTridiagonal::zeros(2, 4);
        for j in 0..4 {
            let d = mat.diag_block_mut(j);
            d[0] = 1.0;
            d[3] = 1.0;
        }
        let rhs: Vec<f64> = (0..8).map(|k| k as f64 - 2.5).collect();
        assert_eq!(block_tridiagonal_solve(&mat, &rhs).unwrap(), rhs);
    }

    #[test]
    fn matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, m) = (3, 6);
        let mut mat = BlockTridiagonal::zeros(n, m);
        for v in mat.lower.iter_mut().chain(mat.upper.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        for j in 0..m {
            let d = mat.diag_block_mut(j);
            for (k, v) in d.iter_mut().enumerate() {
                *v = rng.gen_range(-1.0..1.0) + if k % (n + 1) == 0 { 8.0 } else { 0.0 };
            }
        }
        let rhs: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = block_tridiagonal_solve(&mat, &rhs).unwrap();
        assert!(mat.relative_residual(&x, &rhs) <= 1e-14);

        // Dense oracle: assemble and solve independently of the block sweep.
        let size = n * m;
        let mut dense = nalgebra::DMatrix::<f64>::zeros(size, size);
        for j in 0..m {
            for r in 0..n {
                for c in 0..n {
                    dense[(j * n + r, j * n + c)] = mat.diag[j * n * n + r * n + c];
                    if j + 1 < m {
                        dense[(j * n + r, (j + 1) * n + c)] = mat.upper[j * n * n + r * n + c];
                        dense[((j + 1) * n + r, j * n + c)] = mat.lower[j * n * n + r * n + c];
                    }
                }
            }
        }
        let expected = dense.lu().solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
        for k in 0..size {
            assert_relative_eq!(x[k], expected[k], max_relative = 1e-11, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_block() {
        let mut mat = BlockTridiagonal::zeros(2, 1);
        mat.diag_block_mut(0).copy_from_slice(&[2.0, 1.0, 1.0, 3.0]);
        let x = block_tridiagonal_solve(&mat, &[3.0, 4.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-15);
    }
}
