//! Balanced unit × period panels with a time-invariant treatment code.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A static covariate cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateValue {
    Numeric(f64),
    Categorical(String),
}

impl CovariateValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CovariateValue::Numeric(v) => Some(*v),
            CovariateValue::Categorical(_) => None,
        }
    }
}

/// One long-format row.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit: String,
    pub time: i64,
    pub outcome: f64,
    pub code: i64,
    pub covariates: Vec<CovariateValue>,
}

/// Balanced panel. Units keep their order of first appearance; periods are
/// re-indexed to 1..=T in increasing order of the original time labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    units: Vec<String>,
    index: BTreeMap<String, usize>,
    time_labels: Vec<i64>,
    outcomes: Vec<f64>,
    codes: Vec<u32>,
    coarsened: Vec<bool>,
    covariate_names: Vec<String>,
    covariates: Vec<Vec<CovariateValue>>,
}

impl Panel {
    /// Builds a panel from long-format observations, validating balance,
    /// uniqueness and time invariance of treatment codes and covariates.
    pub fn from_observations(covariate_names: Vec<String>, rows: &[Observation]) -> Result<Panel> {
        let mut units: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut times: BTreeMap<i64, ()> = BTreeMap::new();
        for r in rows {
            if !index.contains_key(&r.unit) {
                index.insert(r.unit.clone(), units.len());
                units.push(r.unit.clone());
            }
            times.insert(r.time, ());
        }
        let time_labels: Vec<i64> = times.keys().copied().collect();
        let t_of: BTreeMap<i64, usize> = time_labels.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let n = units.len();
        let t_len = time_labels.len();
        if t_len < 2 {
            return Err(Error::Schema(format!("panel needs at least 2 periods, found {t_len}")));
        }

        let mut outcomes = alloc::vec![f64::NAN; n * t_len];
        let mut seen = alloc::vec![false; n * t_len];
        let mut codes: Vec<Option<u32>> = alloc::vec![None; n];
        let mut covariates: Vec<Option<Vec<CovariateValue>>> = alloc::vec![None; n];
        for r in rows {
            let u = index[&r.unit];
            let t = t_of[&r.time];
            if seen[u * t_len + t] {
                return Err(Error::Duplicate { unit: r.unit.clone(), time: r.time });
            }
            seen[u * t_len + t] = true;
            if !r.outcome.is_finite() {
                return Err(Error::Schema(format!("non-finite outcome for {} at {}", r.unit, r.time)));
            }
            outcomes[u * t_len + t] = r.outcome;
            let code = u32::try_from(r.code)
                .map_err(|_| Error::Schema(format!("treatment code {} for {} is negative", r.code, r.unit)))?;
            match codes[u] {
                None => codes[u] = Some(code),
                Some(c) if c != code => {
                    return Err(Error::Schema(format!(
                    "treatment code for {} changes over time ({c} vs {code}); only final-period adoption is supported",
                    r.unit
                )))
                }
                Some(_) => {}
            }
            if r.covariates.len() != covariate_names.len() {
                return Err(Error::Schema(format!(
                    "row for {} at {} has {} covariates, expected {}",
                    r.unit,
                    r.time,
                    r.covariates.len(),
                    covariate_names.len()
                )));
            }
            match &covariates[u] {
                None => covariates[u] = Some(r.covariates.clone()),
                Some(prev) if *prev != r.covariates => {
                    return Err(Error::Schema(format!("covariates for {} vary over time", r.unit)))
                }
                Some(_) => {}
            }
        }
        let missing: Vec<(String, i64)> = (0..n)
            .flat_map(|u| (0..t_len).map(move |t| (u, t)))
            .filter(|&(u, t)| !seen[u * t_len + t])
            .map(|(u, t)| (units[u].clone(), time_labels[t]))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Balance { missing });
        }
        let codes: Vec<u32> = codes.into_iter().map(|c| c.unwrap_or(0)).collect();
        let covariates: Vec<Vec<CovariateValue>> = covariates.into_iter().map(Option::unwrap_or_default).collect();
        Panel::assemble(units, time_labels, outcomes, codes, covariate_names, covariates)
    }

    /// Builds a panel from a unit-major outcome grid (`outcomes[u * T + t]`).
    pub fn from_grid(
        units: Vec<String>,
        time_labels: Vec<i64>,
        outcomes: Vec<f64>,
        codes: Vec<u32>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<CovariateValue>>,
    ) -> Result<Panel> {
        let n = units.len();
        let t_len = time_labels.len();
        if t_len < 2 {
            return Err(Error::Schema(format!("panel needs at least 2 periods, found {t_len}")));
        }
        if time_labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema("time labels must be strictly increasing".to_string()));
        }
        if outcomes.len() != n * t_len || codes.len() != n || covariates.len() != n {
            return Err(Error::Schema("grid dimensions do not match unit and period counts".to_string()));
        }
        if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::Schema(format!("non-finite outcome for {}", units[i / t_len])));
        }
        if covariates.iter().any(|c| c.len() != covariate_names.len()) {
            return Err(Error::Schema("covariate row length mismatch".to_string()));
        }
        Panel::assemble(units, time_labels, outcomes, codes, covariate_names, covariates)
    }

    fn assemble(
        units: Vec<String>,
        time_labels: Vec<i64>,
        outcomes: Vec<f64>,
        codes: Vec<u32>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<CovariateValue>>,
    ) -> Result<Panel> {
        let mut index = BTreeMap::new();
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate unit identifier {u}")));
            }
        }
        let coarsened = codes.iter().map(|&m| m > 0).collect();
        Ok(Panel { units, index, time_labels, outcomes, codes, coarsened, covariate_names, covariates })
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// Number of periods T.
    pub fn n_periods(&self) -> usize {
        self.time_labels.len()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn unit_id(&self, unit: usize) -> &str {
        &self.units[unit]
    }

    pub fn unit_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownUnit(id.to_string()))
    }

    pub fn time_labels(&self) -> &[i64] {
        &self.time_labels
    }

    /// Outcome of `unit` at period `t` ∈ 1..=T.
    pub fn outcome(&self, unit: usize, t: usize) -> f64 {
        debug_assert!((1..=self.n_periods()).contains(&t));
        self.outcomes[unit * self.n_periods() + t - 1]
    }

    /// Full outcome path of one unit, periods 1..=T.
    pub fn series(&self, unit: usize) -> &[f64] {
        let t = self.n_periods();
        &self.outcomes[unit * t..(unit + 1) * t]
    }

    pub fn code(&self, unit: usize) -> u32 {
        self.codes[unit]
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    /// Coarsened indicator A = 1(M > 0).
    pub fn is_treated(&self, unit: usize) -> bool {
        self.coarsened[unit]
    }

    pub fn coarsened(&self) -> &[bool] {
        &self.coarsened
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.covariate_names.iter().position(|c| c == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn covariate(&self, unit: usize, column: usize) -> &CovariateValue {
        &self.covariates[unit][column]
    }

    pub fn covariate_row(&self, unit: usize) -> &[CovariateValue] {
        &self.covariates[unit]
    }

    /// Numeric covariate lookup; categorical columns are a schema error.
    pub fn numeric_covariate(&self, unit: usize, column: usize) -> Result<f64> {
        self.covariates[unit][column]
            .as_f64()
            .ok_or_else(|| Error::Schema(format!("column {} is not numeric", self.covariate_names[column])))
    }

    /// Distinct treatment codes in increasing order.
    pub fn observed_codes(&self) -> Vec<u32> {
        let mut c = self.codes.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Recomputes the coarsened indicator from the treatment codes.
pub fn derive_coarsened(panel: &Panel) -> Panel {
    let mut out = panel.clone();
    out.coarsened = out.codes.iter().map(|&m| m > 0).collect();
    out
}

/// Y_{i,t} − Y_{i,t−1}.
pub fn first_difference(panel: &Panel, unit: usize, t: usize) -> Result<f64> {
    if t < 2 || t > panel.n_periods() {
        return Err(Error::Domain(format!("first difference needs 2 <= t <= {}, got {t}", panel.n_periods())));
    }
    Ok(panel.outcome(unit, t) - panel.outcome(unit, t - 1))
}

/// Which treatment codes a comparator pool admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Exactly this code (0 = untreated).
    Code(u32),
    /// Any positive code: the coarsened treated arm.
    AnyTreated,
}

impl Target {
    pub fn admits(self, code: u32) -> bool {
        match self {
            Target::Code(m) => code == m,
            Target::AnyTreated => code > 0,
        }
    }

    /// True when the pool's units are untreated.
    pub fn is_untreated(self) -> bool {
        self == Target::Code(0)
    }

    /// The opposite coarsened arm of a unit: controls for treated units,
    /// all treated units for controls.
    pub fn opposite_arm(panel: &Panel, unit: usize) -> Target {
        if panel.is_treated(unit) {
            Target::Code(0)
        } else {
            Target::AnyTreated
        }
    }
}

/// Units whose observed trends stand in for a target unit's counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorPool {
    pub target_unit: usize,
    pub target: Target,
    pub members: Vec<usize>,
    pub filter: Vec<String>,
}

impl ComparatorPool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// All other units admitted by `target` that match `unit` exactly on every
/// column in `match_columns`.
pub fn comparator_pool(panel: &Panel, unit: usize, target: Target, match_columns: &[String]) -> Result<ComparatorPool> {
    if unit >= panel.n_units() {
        return Err(Error::UnknownUnit(format!("index {unit}")));
    }
    let cols = match_columns.iter().map(|c| panel.column_index(c)).collect::<Result<Vec<_>>>()?;
    let members: Vec<usize> = (0..panel.n_units())
        .filter(|&j| j != unit && target.admits(panel.code(j)))
        .filter(|&j| cols.iter().all(|&c| panel.covariate(j, c) == panel.covariate(unit, c)))
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyPool { unit: panel.unit_id(unit).to_string() });
    }
    Ok(ComparatorPool { target_unit: unit, target, members, filter: match_columns.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(unit: &str, time: i64, y: f64, code: i64, flag: f64) -> Observation {
        Observation { unit: unit.to_string(), time, outcome: y, code, covariates: vec![CovariateValue::Numeric(flag)] }
    }

    fn small() -> Vec<Observation> {
        vec![
            obs("a", 2010, 1.0, 0, 1.0),
            obs("a", 2011, 2.0, 0, 1.0),
            obs("a", 2012, 4.0, 0, 1.0),
            obs("b", 2010, 3.0, 1, 0.0),
            obs("b", 2011, 5.0, 1, 0.0),
            obs("b", 2012, 5.0, 1, 0.0),
        ]
    }

    #[test]
    fn loads_two_by_three() {
        let p = Panel::from_observations(vec!["flag".into()], &small()).unwrap();
        assert_eq!(p.n_periods(), 3);
        assert_eq!(p.n_units(), 2);
        assert_eq!(p.time_labels(), &[2010, 2011, 2012]);
        assert_eq!(p.outcome(1, 2), 5.0);
    }

    #[test]
    fn missing_row_is_a_balance_error() {
        let mut rows = small();
        rows.remove(4);
        match Panel::from_observations(vec!["flag".into()], &rows) {
            Err(Error::Balance { missing }) => assert_eq!(missing, vec![("b".to_string(), 2011)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_and_staggered_rows_are_rejected() {
        let mut rows = small();
        rows.push(obs("a", 2011, 9.0, 0, 1.0));
        assert!(matches!(Panel::from_observations(vec!["flag".into()], &rows), Err(Error::Duplicate { .. })));
        let mut rows = small();
        rows[2].code = 1;
        assert!(matches!(Panel::from_observations(vec!["flag".into()], &rows), Err(Error::Schema(_))));
        let mut rows = small();
        rows[0].code = -1;
        assert!(matches!(Panel::from_observations(vec!["flag".into()], &rows), Err(Error::Schema(_))));
    }

    #[test]
    fn coarsening_is_indicator_of_positive_code() {
        let grid = vec![0.0; 6];
        let p = Panel::from_grid(
            vec!["x".into(), "y".into(), "z".into()],
            vec![1, 2],
            grid,
            vec![0, 1, 2],
            vec![],
            vec![vec![], vec![], vec![]],
        )
        .unwrap();
        assert_eq!(p.coarsened(), &[false, true, true]);
        let again = derive_coarsened(&derive_coarsened(&p));
        assert_eq!(again, p);
    }

    #[test]
    fn first_difference_domain() {
        let p = Panel::from_observations(vec!["flag".into()], &small()).unwrap();
        assert_eq!(first_difference(&p, 1, 2).unwrap(), 2.0);
        assert_eq!(first_difference(&p, 1, 3).unwrap(), 0.0);
        assert!(matches!(first_difference(&p, 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn pool_filters_on_code_and_columns() {
        let codes = vec![1, 0, 0, 0, 0];
        let flags = [1.0, 1.0, 0.0, 1.0, 0.0];
        let p = Panel::from_grid(
            (0..5).map(|i| format!("u{i}")).collect(),
            vec![1, 2],
            vec![0.0; 10],
            codes,
            vec!["flag".into()],
            flags.iter().map(|&f| vec![CovariateValue::Numeric(f)]).collect(),
        )
        .unwrap();
        let all = comparator_pool(&p, 0, Target::Code(0), &[]).unwrap();
        assert_eq!(all.members, vec![1, 2, 3, 4]);
        let matched = comparator_pool(&p, 0, Target::Code(0), &["flag".into()]).unwrap();
        assert_eq!(matched.members, vec![1, 3]);
        assert!(matches!(comparator_pool(&p, 1, Target::Code(2), &[]), Err(Error::EmptyPool { .. })));
        assert!(matches!(comparator_pool(&p, 0, Target::Code(0), &["nope".into()]), Err(Error::UnknownColumn(_))));
    }
}
