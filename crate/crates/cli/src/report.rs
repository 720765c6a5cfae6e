//! Table shapes for every command's CSV and JSON output.

use policybound_core::bounds::GridSpec;
use policybound_core::sim::{EstimatorSummary, Illustration};
use policybound_core::{BoundResult, Estimator, Panel, RobustnessGrid, SimReport, TippingPoint, TwfeFit};
use serde::Serialize;

use crate::csvio::{fmt_f64, to_csv};
use crate::error::Result;

pub const STATISTICS: [&str; 2] = ["Coverage", "Power and sign"];

fn stat(s: &EstimatorSummary, statistic: usize, treated: bool) -> f64 {
    match (statistic, treated) {
        (0, true) => s.treated_coverage,
        (0, false) => s.control_coverage,
        (_, true) => s.treated_power_and_sign,
        (_, false) => s.control_power_and_sign,
    }
}

/// Ten rows (statistic-major, estimator-minor) with treated and control columns.
pub fn sim_report_csv(report: &SimReport) -> Result<String> {
    let rows: Vec<Vec<String>> = (0..STATISTICS.len())
        .flat_map(|k| {
            Estimator::ALL.iter().map(move |&e| {
                let s = report.get(e);
                vec![
                    e.label().to_string(),
                    STATISTICS[k].to_string(),
                    fmt_f64(stat(s, k, true)),
                    fmt_f64(stat(s, k, false)),
                ]
            })
        })
        .collect();
    to_csv(&["estimator", "statistic", "treated", "control"], &rows)
}

/// Same rows as `sim_report_csv`, one treated and one control column per sample size.
pub fn sim_table_csv(reports: &[SimReport]) -> Result<String> {
    let mut header = vec!["estimator".to_string(), "statistic".to_string()];
    header.extend(reports.iter().map(|r| format!("treated_n{}", r.n)));
    header.extend(reports.iter().map(|r| format!("control_n{}", r.n)));
    let rows: Vec<Vec<String>> = (0..STATISTICS.len())
        .flat_map(|k| {
            Estimator::ALL.iter().map(move |&e| {
                let mut row = vec![e.label().to_string(), STATISTICS[k].to_string()];
                for treated in [true, false] {
                    row.extend(reports.iter().map(|r| fmt_f64(stat(r.get(e), k, treated))));
                }
                row
            })
        })
        .collect();
    to_csv(&header, &rows)
}

/// Z values drawn as dots on each interval.
pub const DOT_Z: [f64; 3] = [1.0, 1.5, 2.0];

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub unit: String,
    pub treated: bool,
    pub bound: BoundResult,
    /// `(z, lo, hi)` at each of `DOT_Z`.
    pub dots: Vec<(f64, f64, f64)>,
}

fn z_tag(z: f64) -> String {
    fmt_f64(z).replace('.', "_")
}

pub fn bounds_csv(rows: &[BoundRow]) -> Result<String> {
    let mut header: Vec<String> =
        ["unit", "point", "lo", "hi", "sign", "rule", "strategy"].iter().map(|s| s.to_string()).collect();
    for z in DOT_Z {
        header.push(format!("lo_z{}", z_tag(z)));
        header.push(format!("hi_z{}", z_tag(z)));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let b = &r.bound;
            let mut row = vec![
                r.unit.clone(),
                fmt_f64(b.point),
                fmt_f64(b.lo),
                fmt_f64(b.hi),
                b.sign.label().to_string(),
                b.rule.map(|x| x.label()).unwrap_or_default(),
                b.strategy.clone(),
            ];
            for &(_, lo, hi) in &r.dots {
                row.push(fmt_f64(lo));
                row.push(fmt_f64(hi));
            }
            row
        })
        .collect();
    to_csv(&header, &body)
}

#[derive(Debug, Clone, Serialize)]
pub struct TippingRow {
    pub unit: String,
    pub treated: bool,
    pub point: f64,
    pub norm: f64,
    pub z_star: TippingPoint,
}

pub fn tipping_csv(rows: &[TippingRow], norm_label: &str) -> Result<String> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let z = match r.z_star {
                TippingPoint::Finite(z) => fmt_f64(z),
                TippingPoint::Infinite => "inf".into(),
            };
            vec![r.unit.clone(), u8::from(r.treated).to_string(), fmt_f64(r.point), fmt_f64(r.norm), z]
        })
        .collect();
    to_csv(&["unit", "treated", "point", &format!("norm_{norm_label}"), "z_star"], &body)
}

pub fn robustness_csv(panel: &Panel, grid: &RobustnessGrid) -> Result<String> {
    let body: Vec<Vec<String>> = (0..panel.n_units())
        .map(|u| {
            let (neg, pos, evaluable) = grid.counts(u);
            vec![panel.unit_id(u).to_string(), neg.to_string(), pos.to_string(), evaluable.to_string()]
        })
        .collect();
    to_csv(&["unit", "negative", "positive", "evaluable"], &body)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridJson<'a> {
    pub z: f64,
    pub match_columns: &'a [String],
    pub specs: Vec<String>,
    pub units: Vec<GridUnitJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridUnitJson {
    pub unit: String,
    pub negative: usize,
    pub positive: usize,
    pub evaluable: usize,
    /// Sign label per spec, `null` where the matched pool was empty.
    pub signs: Vec<Option<&'static str>>,
}

pub fn grid_json<'a>(panel: &Panel, grid: &RobustnessGrid, z: f64, match_columns: &'a [String]) -> GridJson<'a> {
    GridJson {
        z,
        match_columns,
        specs: grid.specs.iter().map(GridSpec::label).collect(),
        units: (0..panel.n_units())
            .map(|u| {
                let (negative, positive, evaluable) = grid.counts(u);
                GridUnitJson {
                    unit: panel.unit_id(u).to_string(),
                    negative,
                    positive,
                    evaluable,
                    signs: grid.cells[u].iter().map(|c| c.map(|s| s.label())).collect(),
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectRow {
    pub estimand: String,
    pub n: usize,
    pub treated_n: usize,
    /// `None` when the subset has no unit in one of the arms.
    pub fit: Option<TwfeFit>,
}

pub fn effects_csv(rows: &[EffectRow]) -> Result<String> {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let f = r.fit.as_ref();
            vec![
                r.estimand.clone(),
                r.n.to_string(),
                r.treated_n.to_string(),
                opt(f.map(|f| f.estimate)),
                opt(f.and_then(|f| f.se)),
                opt(f.and_then(|f| f.ci).map(|c| c.0)),
                opt(f.and_then(|f| f.ci).map(|c| c.1)),
            ]
        })
        .collect();
    to_csv(&["estimand", "n", "treated_n", "estimate", "se", "ci_lo", "ci_hi"], &body)
}

pub fn curves_csv(ill: &Illustration) -> Result<String> {
    let body: Vec<Vec<String>> = ill
        .curves
        .iter()
        .map(|c| {
            [c.x, c.cde1, c.cde2, c.cate1, c.cate2, c.mixture_cate, c.mixture_cde, c.projection]
                .into_iter()
                .map(fmt_f64)
                .collect()
        })
        .collect();
    to_csv(&["x", "cde_m1", "cde_m2", "cate_m1", "cate_m2", "mixture_cate", "mixture_cde", "projection"], &body)
}

pub fn scatter_csv(ill: &Illustration) -> Result<String> {
    let body: Vec<Vec<String>> =
        ill.scatter.iter().map(|s| vec![fmt_f64(s.x), s.version.to_string(), fmt_f64(s.ite)]).collect();
    to_csv(&["x", "version", "ite"], &body)
}
