//! Group trends, counterfactual imputation and unit-level DiD estimates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, Matrix};
use crate::panel::{first_difference, ComparatorPool, Panel};

/// How a unit's counterfactual trend is borrowed from its comparator pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "columns", rename_all = "snake_case")]
pub enum Adjuster {
    /// Pool-average first difference.
    None,
    /// Pool-average first difference among members matching exactly on the columns.
    Discrete(Vec<String>),
    /// OLS of the first difference on the columns within the pool.
    Linear(Vec<String>),
    /// Unit effect plus pool period mean.
    Twfe,
}

impl Adjuster {
    pub fn label(&self) -> String {
        match self {
            Adjuster::None => "none".to_string(),
            Adjuster::Discrete(c) => format!("discrete({})", c.join(";")),
            Adjuster::Linear(c) => format!("linear({})", c.join(";")),
            Adjuster::Twfe => "twfe".to_string(),
        }
    }
}

/// Fitted within-pool trend model ΔY_t ≈ α₀ + α₁·X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTrend {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl LinearTrend {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Pre-period prediction errors ε̃_{i,t} = Y_{i,t} − Ŷ_{i,t}, t = 2..T−1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub unit: usize,
    pub values: Vec<f64>,
    pub adjuster: Adjuster,
}

impl ResidualVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True for T = 2 panels, where no pre-period residual exists.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDidEstimate {
    pub unit: usize,
    /// Whether the unit is in the coarsened treated arm.
    pub treated: bool,
    /// ψ̂: effect of treatment relative to no policy, for either arm.
    pub point: f64,
    /// Ŷ_{i,T} under the pool's regime.
    pub predicted: f64,
    /// Y_{i,T}.
    pub observed: f64,
    pub pool: ComparatorPool,
    pub adjuster: Adjuster,
}

fn check_period(panel: &Panel, t: usize) -> Result<()> {
    if t < 2 || t > panel.n_periods() {
        return Err(Error::Domain(format!("period {t} outside 2..={}", panel.n_periods())));
    }
    Ok(())
}

fn nonempty(panel: &Panel, pool: &ComparatorPool) -> Result<()> {
    if pool.members.is_empty() {
        return Err(Error::EmptyPool { unit: panel.unit_id(pool.target_unit).to_string() });
    }
    Ok(())
}

/// Mean first difference at `t` over the pool members.
pub fn group_trend(panel: &Panel, pool: &ComparatorPool, t: usize) -> Result<f64> {
    nonempty(panel, pool)?;
    mean_difference(panel, &pool.members, t)
}

fn mean_difference(panel: &Panel, members: &[usize], t: usize) -> Result<f64> {
    let mut s = 0.0;
    for &j in members {
        s += first_difference(panel, j, t)?;
    }
    Ok(s / members.len() as f64)
}

fn numeric_row(panel: &Panel, unit: usize, cols: &[usize]) -> Result<Vec<f64>> {
    cols.iter().map(|&c| panel.numeric_covariate(unit, c)).collect()
}

/// OLS of ΔY_t on an intercept and the named numeric columns, fit within the pool.
pub fn fit_linear_trend_model(
    panel: &Panel,
    pool: &ComparatorPool,
    t: usize,
    columns: &[String],
) -> Result<LinearTrend> {
    nonempty(panel, pool)?;
    check_period(panel, t)?;
    let cols = columns.iter().map(|c| panel.column_index(c)).collect::<Result<Vec<_>>>()?;
    let n = pool.members.len();
    if n <= cols.len() + 1 {
        return Err(Error::SingularDesign(format!(
            "{n} pool members cannot identify {} trend coefficients",
            cols.len() + 1
        )));
    }
    let mut x = Matrix::zeros(n, cols.len() + 1);
    let mut y = Vec::with_capacity(n);
    for (r, &j) in pool.members.iter().enumerate() {
        x.set(r, 0, 1.0);
        for (k, v) in numeric_row(panel, j, &cols)?.into_iter().enumerate() {
            x.set(r, k + 1, v);
        }
        y.push(first_difference(panel, j, t)?);
    }
    let fit = ols(&x, &y)?;
    Ok(LinearTrend { intercept: fit.coefficients[0], slopes: fit.coefficients[1..].to_vec() })
}

/// Predicted Y_{unit,t} under the pool's treatment regime.
///
/// For `Twfe` the unit effect averages Y_{i,s} − λ̂_s over s ∈ 1..T−1 with
/// s ≠ t, so pre-period predictions are leave-one-out and the final-period
/// prediction uses every pre-period. With T = 2 this reduces to `None`.
pub fn impute_counterfactual(
    panel: &Panel,
    unit: usize,
    adjuster: &Adjuster,
    pool: &ComparatorPool,
    t: usize,
) -> Result<f64> {
    nonempty(panel, pool)?;
    check_period(panel, t)?;
    let prev = panel.outcome(unit, t - 1);
    match adjuster {
        Adjuster::None => Ok(prev + mean_difference(panel, &pool.members, t)?),
        Adjuster::Discrete(columns) => {
            let cols = columns.iter().map(|c| panel.column_index(c)).collect::<Result<Vec<_>>>()?;
            let matched: Vec<usize> = pool
                .members
                .iter()
                .copied()
                .filter(|&j| cols.iter().all(|&c| panel.covariate(j, c) == panel.covariate(unit, c)))
                .collect();
            if matched.is_empty() {
                return Err(Error::EmptyPool { unit: panel.unit_id(unit).to_string() });
            }
            Ok(prev + mean_difference(panel, &matched, t)?)
        }
        Adjuster::Linear(columns) => {
            let model = fit_linear_trend_model(panel, pool, t, columns)?;
            let cols = columns.iter().map(|c| panel.column_index(c)).collect::<Result<Vec<_>>>()?;
            Ok(prev + model.predict(&numeric_row(panel, unit, &cols)?))
        }
        Adjuster::Twfe => {
            let big_t = panel.n_periods();
            let lambda = |s: usize| -> f64 {
                pool.members.iter().map(|&j| panel.outcome(j, s)).sum::<f64>() / pool.members.len() as f64
            };
            let (mut acc, mut k) = (0.0, 0usize);
            for s in (1..big_t).filter(|&s| s != t) {
                acc += panel.outcome(unit, s) - lambda(s);
                k += 1;
            }
            Ok(acc / k as f64 + lambda(t))
        }
    }
}

/// Unit-level DiD estimate at the final period against the pool's regime.
pub fn unit_did(panel: &Panel, unit: usize, adjuster: &Adjuster, pool: &ComparatorPool) -> Result<UnitDidEstimate> {
    let treated = panel.is_treated(unit);
    let code = panel.code(unit);
    if pool.target.admits(code) {
        return Err(Error::Domain(format!(
            "unit {} with code {code} cannot be contrasted with pool {:?}",
            panel.unit_id(unit),
            pool.target
        )));
    }
    if treated && !pool.target.is_untreated() {
        return Err(Error::Domain(format!("treated unit {} needs an untreated comparator pool", panel.unit_id(unit))));
    }
    let big_t = panel.n_periods();
    let predicted = impute_counterfactual(panel, unit, adjuster, pool, big_t)?;
    let observed = panel.outcome(unit, big_t);
    let point = if treated { observed - predicted } else { predicted - observed };
    Ok(UnitDidEstimate { unit, treated, point, predicted, observed, pool: pool.clone(), adjuster: adjuster.clone() })
}

/// Residuals Y_{i,t} − Ŷ_{i,t} for t = 2..T−1 using the same pool and adjuster.
pub fn pre_period_residuals(
    panel: &Panel,
    unit: usize,
    adjuster: &Adjuster,
    pool: &ComparatorPool,
) -> Result<ResidualVector> {
    nonempty(panel, pool)?;
    let values = (2..panel.n_periods())
        .map(|t| Ok(panel.outcome(unit, t) - impute_counterfactual(panel, unit, adjuster, pool, t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualVector { unit, values, adjuster: adjuster.clone() })
}
