//! Dense symmetric linear algebra on row-major `f64` buffers.

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mean_diagonal(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (0..self.n).map(|i| self[(i, i)]).sum::<f64>() / self.n as f64
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self[(i, i)] += v;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Rank-one update `self += x·xᵀ`, lower triangle only.
    pub(crate) fn syr_lower(&mut self, x: &[f64]) {
        let n = self.n;
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..i * n + i + 1];
            for (r, &xj) in row.iter_mut().zip(&x[..=i]) {
                *r += xi * xj;
            }
        }
    }

    /// Copies the lower triangle into the upper triangle.
    pub(crate) fn symmetrize_from_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    /// `self · selfᵀ`.
    pub fn mul_transpose(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle
    /// of `a` is read.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let d = a[(j, j)] - lj.iter().map(|v| v * v).sum::<f64>();
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d,
                    min_eigenvalue: min_eigenvalue_estimate(a),
                });
            }
            let djj = d.sqrt();
            l.data[j * n + j] = djj;
            for i in j + 1..n {
                let (head, tail) = l.data.split_at_mut(i * n);
                let lj = &head[j * n..j * n + j];
                let li = &mut tail[..n];
                let s: f64 = li[..j].iter().zip(lj).map(|(a, b)| a * b).sum();
                li[j] = (a[(i, j)] - s) / djj;
            }
        }
        Ok(Self { l })
    }

    /// Wraps an existing lower-triangular factor; the diagonal must be positive.
    pub fn from_lower(l: SquareMatrix) -> Result<Self> {
        let n = l.dim();
        for i in 0..n {
            if l[(i, i)].is_nan() || l[(i, i)] <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    pivot: i,
                    value: l[(i, i)],
                    min_eigenvalue: f64::NAN,
                });
            }
            for j in i + 1..n {
                if l[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "factor has nonzero upper entry at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn lower(&self) -> &SquareMatrix {
        &self.l
    }

    /// Solves `L·y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.l.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s: f64 = row[..i].iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ·x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let n = self.l.dim();
        for i in (0..n).rev() {
            y[i] /= self.l[(i, i)];
            let yi = y[i];
            let row = self.l.row(i);
            for (yk, &lik) in y[..i].iter_mut().zip(&row[..i]) {
                *yk -= lik * yi;
            }
        }
    }

    /// `A⁻¹·b` via forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `bᵀ·A⁻¹·b = ‖L⁻¹·b‖²`, using a scratch buffer.
    pub fn quadratic_form(&self, b: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend_from_slice(b);
        self.solve_lower_in_place(scratch);
        scratch.iter().map(|v| v * v).sum()
    }
}

/// Estimates the smallest eigenvalue of a symmetric matrix by power iteration
/// on `c·I − A`, where `c` is the Gershgorin upper bound of the spectrum.
pub fn min_eigenvalue_estimate(a: &SquareMatrix) -> f64 {
    let n = a.dim();
    if n == 0 {
        return f64::NAN;
    }
    let sym = |i: usize, j: usize| if j <= i { a[(i, j)] } else { a[(j, i)] };
    let c = (0..n)
        .map(|i| (0..n).map(|j| sym(i, j).abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    let mut mu = 0.0;
    for _ in 0..200 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let w: Vec<f64> = (0..n)
            .map(|i| c * v[i] - (0..n).map(|j| sym(i, j) * v[j]).sum::<f64>())
            .collect();
        mu = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        v = w;
    }
    c - mu
}
