//! Sensitivity half-widths, bound intervals, tipping points and coarsening strategies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::did::{pre_period_residuals, unit_did, Adjuster, ResidualVector, UnitDidEstimate};
use crate::error::{Error, Result};
use crate::panel::{comparator_pool, Panel, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// Mean absolute value.
    L1Mean,
    /// Euclidean norm.
    L2,
    /// Maximum absolute value.
    Linf,
}

impl Norm {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1Mean => v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64,
            Norm::L2 => libm::sqrt(v.iter().map(|x| x * x).sum()),
            Norm::Linf => v.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Norm::L1Mean => "l1_mean",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum TauStyle {
    NormBased {
        norm: Norm,
    },
    /// Centre on the last pre-period error, half-width from the largest
    /// change between consecutive errors.
    LastPlusMaxdiff,
    /// τ* = |Ŷ − Y|, simulation only.
    Oracle,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRule {
    pub style: TauStyle,
    pub z: f64,
}

impl TauRule {
    pub fn new(style: TauStyle, z: f64) -> Result<Self> {
        if !(z >= 0.0) || !z.is_finite() {
            return Err(Error::InvalidParameter(format!("Z must be a finite nonnegative number, got {z}")));
        }
        if let TauStyle::Fixed { value } = style {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("fixed τ must be nonnegative, got {value}")));
            }
        }
        Ok(TauRule { style, z })
    }

    pub fn norm_based(norm: Norm, z: f64) -> Result<Self> {
        TauRule::new(TauStyle::NormBased { norm }, z)
    }

    pub fn with_z(self, z: f64) -> Result<Self> {
        TauRule::new(self.style, z)
    }

    pub fn label(&self) -> String {
        match self.style {
            TauStyle::NormBased { norm } => format!("{}*{}", self.z, norm.label()),
            TauStyle::LastPlusMaxdiff => format!("last+{}*maxdiff", self.z),
            TauStyle::Oracle => "oracle".to_string(),
            TauStyle::Fixed { value } => format!("fixed({value})"),
        }
    }
}

/// Output of a τ rule, before it is attached to a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauOutput {
    Symmetric {
        tau: f64,
    },
    /// `last_error` is ε̃_{T−1}; the centre moves by −ε̃ for treated units
    /// and +ε̃ for untreated ones.
    Shifted {
        last_error: f64,
        half_width: f64,
    },
    /// τ* with the interval widened by a few ulps of the operands so the
    /// rounding in Ŷ and ψ̂ cannot push the truth outside.
    Oracle {
        tau: f64,
    },
}

/// Sensitivity half-width (or centre shift and half-width) from pre-period residuals.
pub fn tau_from_rule(residuals: &ResidualVector, rule: &TauRule) -> Result<TauOutput> {
    let v = &residuals.values;
    match rule.style {
        TauStyle::Fixed { value } => Ok(TauOutput::Symmetric { tau: value }),
        TauStyle::NormBased { norm } => {
            if v.is_empty() {
                return Err(Error::InsufficientPrePeriods { unit: format!("#{}", residuals.unit) });
            }
            Ok(TauOutput::Symmetric { tau: rule.z * norm.apply(v) })
        }
        TauStyle::LastPlusMaxdiff => {
            if v.len() < 2 {
                return Err(Error::InsufficientPrePeriods { unit: format!("#{}", residuals.unit) });
            }
            let maxdiff = v.windows(2).fold(0.0, |m: f64, w| m.max((w[1] - w[0]).abs()));
            Ok(TauOutput::Shifted { last_error: v[v.len() - 1], half_width: rule.z * maxdiff })
        }
        TauStyle::Oracle => {
            Err(Error::InvalidParameter("the oracle rule needs the true counterfactual; use oracle_tau".to_string()))
        }
    }
}

/// τ* = |Ŷ − Y|.
pub fn oracle_tau(true_counterfactual: f64, predicted: f64) -> f64 {
    (predicted - true_counterfactual).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    StrictlyPositive,
    StrictlyNegative,
    Indeterminate,
}

impl Sign {
    /// Strict classification: an endpoint touching zero is indeterminate.
    pub fn classify(lo: f64, hi: f64) -> Sign {
        if lo > 0.0 {
            Sign::StrictlyPositive
        } else if hi < 0.0 {
            Sign::StrictlyNegative
        } else {
            Sign::Indeterminate
        }
    }

    pub fn is_strict(self) -> bool {
        self != Sign::Indeterminate
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::StrictlyPositive => "strictly_positive",
            Sign::StrictlyNegative => "strictly_negative",
            Sign::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub unit: usize,
    pub point: f64,
    /// Offset of the centre from the point estimate (nonzero only for shifted rules).
    pub shift: f64,
    pub half_width: f64,
    pub lo: f64,
    pub hi: f64,
    pub sign: Sign,
    pub rule: Option<TauRule>,
    pub strategy: String,
    /// Per-version intervals kept by the union strategy.
    pub components: Vec<(u32, f64, f64)>,
}

impl BoundResult {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Interval around ψ̂ for a τ output.
pub fn bound_interval(estimate: &UnitDidEstimate, tau: &TauOutput) -> BoundResult {
    let point = estimate.point;
    let (shift, half_width) = match *tau {
        TauOutput::Symmetric { tau } => (0.0, tau),
        TauOutput::Shifted { last_error, half_width } => {
            (if estimate.treated { -last_error } else { last_error }, half_width)
        }
        TauOutput::Oracle { tau } => {
            let guard = 8.0 * f64::EPSILON * (estimate.observed.abs() + 2.0 * estimate.predicted.abs() + tau);
            (0.0, tau + guard)
        }
    };
    let centre = point + shift;
    let (lo, hi) = (centre - half_width, centre + half_width);
    BoundResult {
        unit: estimate.unit,
        point,
        shift,
        half_width,
        lo,
        hi,
        sign: Sign::classify(lo, hi),
        rule: None,
        strategy: "standard".to_string(),
        components: Vec::new(),
    }
}

/// Smallest Z at which the symmetric interval reaches zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TippingPoint {
    Finite(f64),
    /// Zero residual norm with a nonzero estimate: no Z reaches zero.
    Infinite,
}

pub fn tipping_z(estimate: &UnitDidEstimate, residuals: &ResidualVector, norm: Norm) -> Result<TippingPoint> {
    if residuals.is_empty() {
        return Err(Error::InsufficientPrePeriods { unit: format!("#{}", residuals.unit) });
    }
    let n = norm.apply(&residuals.values);
    if estimate.point == 0.0 {
        return Ok(TippingPoint::Finite(0.0));
    }
    if n == 0.0 {
        return Ok(TippingPoint::Infinite);
    }
    Ok(TippingPoint::Finite(estimate.point.abs() / n))
}

/// Bound for one unit against the opposite coarsened arm, optionally matched on columns.
pub fn bound_unit(
    panel: &Panel,
    unit: usize,
    adjuster: &Adjuster,
    rule: &TauRule,
    match_columns: &[String],
) -> Result<(UnitDidEstimate, ResidualVector, BoundResult)> {
    let pool = comparator_pool(panel, unit, Target::opposite_arm(panel, unit), match_columns)?;
    bound_with_pool(panel, unit, adjuster, rule, pool)
}

fn bound_with_pool(
    panel: &Panel,
    unit: usize,
    adjuster: &Adjuster,
    rule: &TauRule,
    pool: crate::panel::ComparatorPool,
) -> Result<(UnitDidEstimate, ResidualVector, BoundResult)> {
    let est = unit_did(panel, unit, adjuster, &pool)?;
    let res = pre_period_residuals(panel, unit, adjuster, &pool)?;
    let tau = tau_from_rule(&res, rule)?;
    let mut b = bound_interval(&est, &tau);
    b.rule = Some(*rule);
    Ok((est, res, b))
}

/// How an untreated unit's Y(M(1)) is predicted when treatment is coarsened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CoarseningStrategy {
    /// Coarsened pool with Z multiplied by the factor.
    Conservative(f64),
    /// Pool restricted to treated units carrying this version.
    AssumeVersion(u32),
    /// Convex hull of the per-version bounds.
    UnionOverVersions,
}

impl CoarseningStrategy {
    pub fn label(&self) -> String {
        match self {
            CoarseningStrategy::Conservative(f) => format!("conservative({f})"),
            CoarseningStrategy::AssumeVersion(m) => format!("assume_version({m})"),
            CoarseningStrategy::UnionOverVersions => "union".to_string(),
        }
    }
}

pub fn coarsened_untreated_bound(
    panel: &Panel,
    unit: usize,
    strategy: CoarseningStrategy,
    rule: &TauRule,
    adjuster: &Adjuster,
) -> Result<BoundResult> {
    if panel.is_treated(unit) {
        return Err(Error::Domain(format!("unit {} is treated", panel.unit_id(unit))));
    }
    let versions: Vec<u32> = panel.observed_codes().into_iter().filter(|&m| m > 0).collect();
    let mut out = match strategy {
        CoarseningStrategy::Conservative(factor) => {
            if !(factor >= 1.0) || !factor.is_finite() {
                return Err(Error::Strategy(format!("inflation factor must be at least 1, got {factor}")));
            }
            let inflated = rule.with_z(rule.z * factor)?;
            bound_unit(panel, unit, adjuster, &inflated, &[])?.2
        }
        CoarseningStrategy::AssumeVersion(m) => {
            if !versions.contains(&m) {
                return Err(Error::Strategy(format!("version {m} is not observed among treated units")));
            }
            let pool = comparator_pool(panel, unit, Target::Code(m), &[])?;
            bound_with_pool(panel, unit, adjuster, rule, pool)?.2
        }
        CoarseningStrategy::UnionOverVersions => {
            if versions.is_empty() {
                return Err(Error::Strategy("no treated versions observed".to_string()));
            }
            let parts = versions
                .iter()
                .map(|&m| {
                    let pool = comparator_pool(panel, unit, Target::Code(m), &[])?;
                    Ok((m, bound_with_pool(panel, unit, adjuster, rule, pool)?.2))
                })
                .collect::<Result<Vec<_>>>()?;
            let lo = parts.iter().fold(f64::INFINITY, |a, (_, b)| a.min(b.lo));
            let hi = parts.iter().fold(f64::NEG_INFINITY, |a, (_, b)| a.max(b.hi));
            // a single version keeps its own point; otherwise report the hull midpoint
            let point = if versions.len() == 1 { parts[0].1.point } else { 0.5 * (lo + hi) };
            BoundResult {
                unit,
                point,
                shift: 0.5 * (lo + hi) - point,
                half_width: 0.5 * (hi - lo),
                lo,
                hi,
                sign: Sign::classify(lo, hi),
                rule: Some(*rule),
                strategy: String::new(),
                components: parts.iter().map(|(m, b)| (*m, b.lo, b.hi)).collect(),
            }
        }
    };
    out.strategy = strategy.label();
    Ok(out)
}

/// One cell of the robustness grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub adjuster: Adjuster,
    pub last_plus_maxdiff: bool,
    pub matched: bool,
}

impl GridSpec {
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            if self.adjuster == Adjuster::Twfe { "twfe" } else { "first_diff" },
            if self.last_plus_maxdiff { "last_plus_maxdiff" } else { "linf" },
            if self.matched { "matched" } else { "all" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessGrid {
    pub specs: Vec<GridSpec>,
    /// Unit-major; `None` where the matched pool is empty.
    pub cells: Vec<Vec<Option<Sign>>>,
}

impl RobustnessGrid {
    /// (strictly negative, strictly positive, evaluable) counts for one unit.
    pub fn counts(&self, unit: usize) -> (usize, usize, usize) {
        let row = &self.cells[unit];
        let neg = row.iter().filter(|s| **s == Some(Sign::StrictlyNegative)).count();
        let pos = row.iter().filter(|s| **s == Some(Sign::StrictlyPositive)).count();
        (neg, pos, row.iter().filter(|s| s.is_some()).count())
    }
}

/// The canonical eight specifications in output order.
pub fn grid_specs() -> Vec<GridSpec> {
    let mut v = Vec::with_capacity(8);
    for adjuster in [Adjuster::None, Adjuster::Twfe] {
        for last_plus_maxdiff in [false, true] {
            for matched in [false, true] {
                v.push(GridSpec { adjuster: adjuster.clone(), last_plus_maxdiff, matched });
            }
        }
    }
    v
}

/// Sign of every unit's bound under {first differences, twfe} × {Z·‖ε̃‖∞,
/// last-plus-maxdiff} × {all comparators, comparators matched on `match_columns`}.
pub fn robustness_grid(panel: &Panel, z: f64, match_columns: &[String]) -> Result<RobustnessGrid> {
    for c in match_columns {
        panel.column_index(c)?;
    }
    let specs = grid_specs();
    let cells = (0..panel.n_units())
        .map(|unit| {
            specs
                .iter()
                .map(|spec| {
                    let rule = if spec.last_plus_maxdiff {
                        TauRule::new(TauStyle::LastPlusMaxdiff, z)?
                    } else {
                        TauRule::norm_based(Norm::Linf, z)?
                    };
                    let cols: &[String] = if spec.matched { match_columns } else { &[] };
                    match bound_unit(panel, unit, &spec.adjuster, &rule, cols) {
                        Ok((_, _, b)) => Ok(Some(b.sign)),
                        Err(Error::EmptyPool { .. }) if spec.matched => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessGrid { specs, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ComparatorPool;
    use alloc::vec;

    fn residuals(v: &[f64]) -> ResidualVector {
        ResidualVector { unit: 0, values: v.to_vec(), adjuster: Adjuster::None }
    }

    fn estimate(point: f64, treated: bool) -> UnitDidEstimate {
        UnitDidEstimate {
            unit: 0,
            treated,
            point,
            predicted: 0.0,
            observed: point,
            pool: ComparatorPool { target_unit: 0, target: Target::Code(0), members: vec![1], filter: vec![] },
            adjuster: Adjuster::None,
        }
    }

    #[test]
    fn norms() {
        let v = [0.1, -0.3];
        assert!((Norm::L1Mean.apply(&v) - 0.2).abs() < 1e-15);
        assert!((Norm::L2.apply(&v) - libm::sqrt(0.1)).abs() < 1e-15);
        assert_eq!(Norm::Linf.apply(&v), 0.3);
    }

    #[test]
    fn linf_times_two() {
        let rule = TauRule::norm_based(Norm::Linf, 2.0).unwrap();
        match tau_from_rule(&residuals(&[0.1, -0.3]), &rule).unwrap() {
            TauOutput::Symmetric { tau } => assert!((tau - 0.6).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        let zero = TauRule::norm_based(Norm::Linf, 0.0).unwrap();
        assert_eq!(tau_from_rule(&residuals(&[0.1, -0.3]), &zero).unwrap(), TauOutput::Symmetric { tau: 0.0 });
    }

    #[test]
    fn last_plus_maxdiff_shift() {
        let rule = TauRule::new(TauStyle::LastPlusMaxdiff, 1.0).unwrap();
        let out = tau_from_rule(&residuals(&[0.2, 0.2]), &rule).unwrap();
        assert_eq!(out, TauOutput::Shifted { last_error: 0.2, half_width: 0.0 });
        let b = bound_interval(&estimate(1.0, true), &out);
        assert_eq!(b.shift, -0.2);
        let b = bound_interval(&estimate(1.0, false), &out);
        assert_eq!(b.shift, 0.2);
        assert!(matches!(tau_from_rule(&residuals(&[0.2]), &rule), Err(Error::InsufficientPrePeriods { .. })));
    }

    #[test]
    fn rule_validation() {
        assert!(TauRule::norm_based(Norm::L2, -1.0).is_err());
        assert!(TauRule::norm_based(Norm::L2, f64::NAN).is_err());
        assert!(TauRule::new(TauStyle::Fixed { value: -0.1 }, 1.0).is_err());
        let empty = residuals(&[]);
        assert!(tau_from_rule(&empty, &TauRule::norm_based(Norm::L2, 1.0).unwrap()).is_err());
        let fixed = TauRule::new(TauStyle::Fixed { value: 0.7 }, 1.0).unwrap();
        assert_eq!(tau_from_rule(&empty, &fixed).unwrap(), TauOutput::Symmetric { tau: 0.7 });
    }

    #[test]
    fn interval_signs() {
        let b = bound_interval(&estimate(2.0, true), &TauOutput::Symmetric { tau: 0.5 });
        assert_eq!((b.lo, b.hi, b.sign), (1.5, 2.5, Sign::StrictlyPositive));
        let b = bound_interval(&estimate(1.0, true), &TauOutput::Symmetric { tau: 1.0 });
        assert_eq!((b.lo, b.hi, b.sign), (0.0, 2.0, Sign::Indeterminate));
        let b = bound_interval(&estimate(-0.4, true), &TauOutput::Symmetric { tau: 0.1 });
        assert!((b.lo + 0.5).abs() < 1e-15 && (b.hi + 0.3).abs() < 1e-15);
        assert_eq!(b.sign, Sign::StrictlyNegative);
    }

    #[test]
    fn oracle_values() {
        assert_eq!(oracle_tau(3.0, 3.0), 0.0);
        assert_eq!(oracle_tau(3.0, 4.0), 1.0);
    }

    #[test]
    fn tipping() {
        let r = residuals(&[0.25, -0.1]);
        assert_eq!(tipping_z(&estimate(1.0, true), &r, Norm::Linf).unwrap(), TippingPoint::Finite(4.0));
        assert_eq!(tipping_z(&estimate(0.0, true), &r, Norm::Linf).unwrap(), TippingPoint::Finite(0.0));
        let z = residuals(&[0.0, 0.0]);
        assert_eq!(tipping_z(&estimate(1.0, true), &z, Norm::Linf).unwrap(), TippingPoint::Infinite);
    }
}
