use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N × m` cell values stored cell by cell: entry `(i, j)` lives at
/// `data[j * n + i]`, so the `N` components of cell `j` are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, data: vec![0.0; n * m] }
    }

    pub fn from_cells(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::Shape(format!("{} values for {n} components on {m} cells", data.len())));
        }
        Ok(Self { n, m, data })
    }

    /// Builds a field from `f(component, cell)`.
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * m);
        for j in 0..m {
            for i in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, m, data }
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.n + i] = value;
    }

    #[inline]
    pub fn cell(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn cell_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values of component `i` over all cells.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.get(i, j)).collect()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub(crate) fn same_shape(&self, other: &Field) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::Shape(format!("{}x{} field does not match {}x{}", self.n, self.m, other.n, other.m)));
        }
        Ok(())
    }
}

/// Compensated (Neumaier) summation.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
