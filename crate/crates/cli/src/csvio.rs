//! Long-format panel CSV and generic table emission.

use policybound_core::{CovariateValue, Error, Observation, Panel};

use crate::error::Result;

/// Which header names hold the unit id, period, outcome and treatment code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub code: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema { unit: "unit".into(), time: "time".into(), outcome: "outcome".into(), code: "m".into() }
    }
}

/// Shortest decimal that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> std::result::Result<usize, Error> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("header has no column named {name:?}")))
}

/// Parse a long-format panel. Every non-schema column becomes a covariate; a column is
/// numeric when every cell parses as a finite number, categorical otherwise.
pub fn load_panel(text: &str, schema: &Schema) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let iu = header_index(&headers, &schema.unit)?;
    let it = header_index(&headers, &schema.time)?;
    let iy = header_index(&headers, &schema.outcome)?;
    let im = header_index(&headers, &schema.code)?;
    let mut seen = std::collections::BTreeSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(Error::Schema(format!("header repeats column {h:?}")).into());
        }
    }
    let cov_idx: Vec<usize> = (0..headers.len()).filter(|i| ![iu, it, iy, im].contains(i)).collect();
    let cov_names: Vec<String> = cov_idx.iter().map(|&i| headers[i].to_string()).collect();

    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let line = |r: usize| r + 2;
    let numeric: Vec<bool> = cov_idx
        .iter()
        .map(|&c| records.iter().all(|rec| rec[c].trim().parse::<f64>().is_ok_and(f64::is_finite)))
        .collect();

    let mut rows = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let unit = rec[iu].to_string();
        if unit.is_empty() {
            return Err(Error::Schema(format!("line {}: empty unit id", line(r))).into());
        }
        let time = rec[it]
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::Schema(format!("line {}: time {:?} is not an integer", line(r), &rec[it])))?;
        let outcome = rec[iy]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Schema(format!("line {}: outcome {:?} is not a number", line(r), &rec[iy])))?;
        let code = rec[im]
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::Schema(format!("line {}: treatment code {:?} is not an integer", line(r), &rec[im])))?;
        let covariates = cov_idx
            .iter()
            .zip(&numeric)
            .zip(&cov_names)
            .map(|((&c, &num), name)| {
                let cell = rec[c].trim();
                if cell.is_empty() {
                    Err(Error::Schema(format!("line {}: missing value for covariate {name}", line(r))))
                } else if num {
                    Ok(CovariateValue::Numeric(cell.parse().expect("checked numeric")))
                } else {
                    Ok(CovariateValue::Categorical(rec[c].to_string()))
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(Observation { unit, time, outcome, code, covariates });
    }
    Ok(Panel::from_observations(cov_names, &rows)?)
}

/// Inverse of `load_panel` under the default schema, one row per (unit, time) in unit-major order.
pub fn write_panel(panel: &Panel) -> Result<String> {
    let mut header = vec!["unit".to_string(), "time".into(), "outcome".into(), "m".into()];
    header.extend(panel.covariate_names().iter().cloned());
    let mut rows = Vec::with_capacity(panel.n_units() * panel.n_periods());
    for u in 0..panel.n_units() {
        for (t, &label) in panel.time_labels().iter().enumerate() {
            let mut row = vec![
                panel.unit_id(u).to_string(),
                label.to_string(),
                fmt_f64(panel.outcome(u, t + 1)),
                panel.code(u).to_string(),
            ];
            row.extend(panel.covariate_row(u).iter().map(|v| match v {
                CovariateValue::Numeric(x) => fmt_f64(*x),
                CovariateValue::Categorical(s) => s.clone(),
            }));
            rows.push(row);
        }
    }
    to_csv(&header, &rows)
}

/// Header plus rows, RFC-4180 quoting where a field needs it.
pub fn to_csv<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}
