//! Dense least squares by Householder QR.
//!
//! Designs here are small (a handful of columns, at most a few hundred rows),
//! so a plain column-major implementation is enough.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative threshold on |R_kk| / ‖X_k‖ below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Householder QR factorisation of an n × p design with n ≥ p and full column rank.
#[derive(Debug, Clone)]
pub struct Qr {
    n: usize,
    p: usize,
    // column-major: Householder vectors below the diagonal, R above
    a: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Qr {
    pub fn new(x: &Matrix) -> Result<Self> {
        let (n, p) = (x.rows, x.cols);
        if n < p {
            return Err(Error::SingularDesign(format!("{n} observations for {p} coefficients")));
        }
        let mut a = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                a[j * n + i] = x.get(i, j);
            }
        }
        let col_norms: Vec<f64> = (0..p).map(|j| norm(&a[j * n..(j + 1) * n])).collect();
        let mut rdiag = vec![0.0; p];
        for k in 0..p {
            let nrm = norm(&a[k * n + k..(k + 1) * n]);
            if nrm <= RANK_TOL * col_norms[k] || col_norms[k] == 0.0 {
                return Err(Error::SingularDesign(format!("column {k} is linearly dependent")));
            }
            let nrm = if a[k * n + k] < 0.0 { -nrm } else { nrm };
            for i in k..n {
                a[k * n + i] /= nrm;
            }
            a[k * n + k] += 1.0;
            for j in k + 1..p {
                let s: f64 = (k..n).map(|i| a[k * n + i] * a[j * n + i]).sum::<f64>() / a[k * n + k];
                for i in k..n {
                    a[j * n + i] -= s * a[k * n + i];
                }
            }
            rdiag[k] = -nrm;
        }
        Ok(Qr { n, p, a, rdiag })
    }

    /// Applies Qᵀ to `y` in place.
    fn apply_qt(&self, y: &mut [f64]) {
        let n = self.n;
        for k in 0..self.p {
            let s: f64 = (k..n).map(|i| self.a[k * n + i] * y[i]).sum::<f64>() / self.a[k * n + k];
            for (yi, &ai) in y[k..n].iter_mut().zip(&self.a[k * n + k..k * n + n]) {
                *yi -= s * ai;
            }
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.rdiag[i]
        } else {
            self.a[j * self.n + i]
        }
    }

    /// Least-squares coefficients minimising ‖y − Xb‖².
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut b = vec![0.0; self.p];
        for k in (0..self.p).rev() {
            let s: f64 = (k + 1..self.p).map(|j| self.r(k, j) * b[j]).sum();
            b[k] = (qty[k] - s) / self.rdiag[k];
        }
        b
    }

    /// (XᵀX)⁻¹ = R⁻¹R⁻ᵀ.
    pub fn xtx_inverse(&self) -> Matrix {
        let p = self.p;
        // upper-triangular inverse of R, column by column
        let mut rinv = Matrix::zeros(p, p);
        for j in 0..p {
            rinv.set(j, j, 1.0 / self.rdiag[j]);
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|k| self.r(i, k) * rinv.get(k, j)).sum();
                rinv.set(i, j, -s / self.rdiag[i]);
            }
        }
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let s: f64 = (i.max(j)..p).map(|k| rinv.get(i, k) * rinv.get(j, k)).sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * libm::sqrt(v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>())
}

/// Ordinary least squares fit with residuals.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub qr: Qr,
}

pub fn ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let qr = Qr::new(x)?;
    let coefficients = qr.solve(y);
    let fitted = x.mul_vec(&coefficients);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(OlsFit { coefficients, residuals, qr })
}

/// Heteroskedasticity-robust sandwich (XᵀX)⁻¹ Xᵀ diag(w) X (XᵀX)⁻¹ for per-row weights.
pub fn sandwich(x: &Matrix, bread: &Matrix, weights: &[f64]) -> Matrix {
    let p = x.cols;
    let mut meat = Matrix::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        let r = x.row(i);
        for a in 0..p {
            for b in 0..p {
                meat.data[a * p + b] += w * r[a] * r[b];
            }
        }
    }
    quadratic_form(bread, &meat)
}

/// B M B for symmetric `b`.
pub fn quadratic_form(b: &Matrix, m: &Matrix) -> Matrix {
    let p = b.cols;
    let mut bm = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            bm.data[i * p + j] = (0..p).map(|k| b.get(i, k) * m.get(k, j)).sum();
        }
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            out.data[i * p + j] = (0..p).map(|k| bm.get(i, k) * b.get(k, j)).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_interpolation() {
        let xs = [0.0, 1.0, 2.5, -1.0, 4.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = ols(&Matrix::from_rows(&rows), &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_rejected() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 5.0, i as f64]).collect();
        assert!(matches!(Qr::new(&Matrix::from_rows(&rows)), Err(Error::SingularDesign(_))));
        let rows: Vec<Vec<f64>> = (0..2).map(|i| vec![1.0, i as f64, 0.5]).collect();
        assert!(Qr::new(&Matrix::from_rows(&rows)).is_err());
    }

    #[test]
    fn xtx_inverse_matches_direct_inverse() {
        let rows = vec![vec![1.0, 0.3], vec![1.0, -1.2], vec![1.0, 2.0], vec![1.0, 0.7]];
        let x = Matrix::from_rows(&rows);
        let inv = Qr::new(&x).unwrap().xtx_inverse();
        // 2×2 closed form
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for r in &rows {
            s00 += r[0] * r[0];
            s01 += r[0] * r[1];
            s11 += r[1] * r[1];
        }
        let det = s00 * s11 - s01 * s01;
        assert!((inv.get(0, 0) - s11 / det).abs() < 1e-12);
        assert!((inv.get(0, 1) + s01 / det).abs() < 1e-12);
        assert!((inv.get(1, 0) + s01 / det).abs() < 1e-12);
        assert!((inv.get(1, 1) - s00 / det).abs() < 1e-12);
    }
}
