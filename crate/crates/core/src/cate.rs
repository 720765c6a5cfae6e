//! Regression baselines: the OLS CATE projection and the TWFE average effect.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, sandwich, Matrix};
use crate::normal;
use crate::panel::Panel;

pub const CATE_COEFFICIENTS: [&str; 4] = ["intercept", "treated", "x", "treated_x"];

/// OLS of ΔY_T on (1, A, X, A·X) with an HC1 covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateFit {
    pub coefficients: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    pub n: usize,
    pub variant: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CateInterval {
    pub point: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Fits the projection from final-period changes, arm indicators and covariate values.
pub fn fit_cate_arrays(dy: &[f64], treated: &[bool], x: &[f64]) -> Result<CateFit> {
    let n = dy.len();
    if treated.len() != n || x.len() != n {
        return Err(Error::InvalidParameter("length mismatch in CATE inputs".to_string()));
    }
    let n_t = treated.iter().filter(|&&a| a).count();
    if n_t < 3 || n - n_t < 3 {
        return Err(Error::DegenerateSubset(format!("{n_t} treated and {} control units; need 3 each", n - n_t)));
    }
    let mut design = Matrix::zeros(n, 4);
    for i in 0..n {
        let a = if treated[i] { 1.0 } else { 0.0 };
        design.set(i, 0, 1.0);
        design.set(i, 1, a);
        design.set(i, 2, x[i]);
        design.set(i, 3, a * x[i]);
    }
    let fit = ols(&design, dy)?;
    let bread = fit.qr.xtx_inverse();
    let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let v = sandwich(&design, &bread, &e2);
    let scale = n as f64 / (n - 4) as f64;
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = scale * 0.5 * (v.get(i, j) + v.get(j, i));
        }
    }
    let mut coefficients = [0.0; 4];
    coefficients.copy_from_slice(&fit.coefficients);
    Ok(CateFit { coefficients, covariance, n, variant: "HC1".to_string() })
}

/// Fits the projection on the panel's final-period change against a numeric column.
pub fn fit_cate_projection(panel: &Panel, x_column: &str) -> Result<CateFit> {
    let col = panel.column_index(x_column)?;
    let t = panel.n_periods();
    let n = panel.n_units();
    let dy: Vec<f64> = (0..n).map(|i| panel.outcome(i, t) - panel.outcome(i, t - 1)).collect();
    let x = (0..n).map(|i| panel.numeric_covariate(i, col)).collect::<Result<Vec<_>>>()?;
    fit_cate_arrays(&dy, panel.coarsened(), &x)
}

/// Normal-approximation interval for b_A + b_AX·x.
pub fn cate_interval(fit: &CateFit, x: f64, level: f64) -> Result<CateInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    let crit = normal::quantile(0.5 + 0.5 * level);
    Ok(cate_interval_with_critical(fit, x, crit))
}

pub(crate) fn cate_interval_with_critical(fit: &CateFit, x: f64, crit: f64) -> CateInterval {
    let b = &fit.coefficients;
    let v = &fit.covariance;
    let point = b[1] + b[3] * x;
    let var = v[1][1] + 2.0 * x * v[1][3] + x * x * v[3][3];
    let se = libm::sqrt(var.max(0.0));
    CateInterval { point, se, lo: point - crit * se, hi: point + crit * se }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwfeFit {
    pub estimate: f64,
    /// Cluster-robust by unit; absent with fewer than two units in either arm.
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub n_units: usize,
    pub n_treated: usize,
}

/// Coefficient on treated × final period from a unit and period fixed-effects
/// regression on the listed units.
pub fn twfe_ate(panel: &Panel, subset: &[usize]) -> Result<TwfeFit> {
    let mut units = subset.to_vec();
    units.sort_unstable();
    units.dedup();
    let g = units.len();
    let n_treated = units.iter().filter(|&&u| panel.is_treated(u)).count();
    if n_treated == 0 || n_treated == g {
        return Err(Error::DegenerateSubset(format!("{n_treated} treated among {g} units; need both arms")));
    }
    let t_len = panel.n_periods();
    let n = g * t_len;
    let p = g + t_len;
    let mut x = Matrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (k, &u) in units.iter().enumerate() {
        for t in 1..=t_len {
            let r = k * t_len + t - 1;
            x.set(r, k, 1.0);
            if t > 1 {
                x.set(r, g + t - 2, 1.0);
            }
            if t == t_len && panel.is_treated(u) {
                x.set(r, p - 1, 1.0);
            }
            y.push(panel.outcome(u, t));
        }
    }
    let fit = ols(&x, &y)?;
    let estimate = fit.coefficients[p - 1];
    let n_control = g - n_treated;
    let se = if n_treated >= 2 && n_control >= 2 && n > p {
        let bread = fit.qr.xtx_inverse();
        let d_row: Vec<f64> = (0..p).map(|j| bread.get(p - 1, j)).collect();
        let mut meat = 0.0;
        for k in 0..g {
            let mut score = 0.0;
            for r in k * t_len..(k + 1) * t_len {
                let xr = x.row(r);
                let proj: f64 = d_row.iter().zip(xr).map(|(a, b)| a * b).sum();
                score += proj * fit.residuals[r];
            }
            meat += score * score;
        }
        let gf = g as f64;
        let factor = gf / (gf - 1.0) * (n as f64 - 1.0) / (n - p) as f64;
        Some(libm::sqrt(factor * meat))
    } else {
        None
    };
    let crit = normal::quantile(0.975);
    let ci = se.map(|s| (estimate - crit * s, estimate + crit * s));
    Ok(TwfeFit { estimate, se, ci, n_units: g, n_treated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn noiseless_projection_recovers_coefficients() {
        let x = [-1.0, 0.0, 0.5, 2.0, -0.3, 1.0, 0.2, -2.0];
        let a = [true, true, true, true, false, false, false, false];
        let dy: Vec<f64> = x
            .iter()
            .zip(&a)
            .map(|(&x, &a)| {
                let a = if a { 1.0 } else { 0.0 };
                1.0 + 2.0 * a + 0.5 * x + 3.0 * a * x
            })
            .collect();
        let fit = fit_cate_arrays(&dy, &a, &x).unwrap();
        for (b, want) in fit.coefficients.iter().zip([1.0, 2.0, 0.5, 3.0]) {
            assert!((b - want).abs() < 1e-10);
        }
        let ci = cate_interval(&fit, 0.7, 0.95).unwrap();
        assert!((ci.hi - ci.lo).abs() < 1e-9);
    }

    #[test]
    fn interval_arithmetic() {
        let mut cov = [[0.0; 4]; 4];
        cov[1][1] = 0.04;
        let fit = CateFit { coefficients: [0.0, 1.0, 0.0, 0.0], covariance: cov, n: 10, variant: "HC1".into() };
        let ci = cate_interval(&fit, 3.0, 0.95).unwrap();
        assert!((ci.lo - 0.608).abs() < 1e-3 && (ci.hi - 1.392).abs() < 1e-3);
        assert!(cate_interval(&fit, 0.0, 1.0).is_err());
    }

    #[test]
    fn small_arm_is_degenerate() {
        let r = fit_cate_arrays(&[0.0; 5], &[true, true, false, false, false], &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(r, Err(Error::DegenerateSubset(_))));
    }

    #[test]
    fn canonical_two_by_two() {
        let p = Panel::from_grid(
            vec!["c".into(), "t".into()],
            vec![1, 2],
            vec![1.0, 2.0, 3.0, 7.0],
            vec![0, 1],
            vec![],
            vec![vec![], vec![]],
        )
        .unwrap();
        let fit = twfe_ate(&p, &[0, 1]).unwrap();
        assert!((fit.estimate - 3.0).abs() < 1e-12);
        assert_eq!(fit.se, None);
        assert!(matches!(twfe_ate(&p, &[0]), Err(Error::DegenerateSubset(_))));
    }
}
