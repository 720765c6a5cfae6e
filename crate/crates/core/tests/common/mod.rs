#![allow(dead_code)]

use policybound_core::{CovariateValue, Panel};
use proptest::prelude::*;

/// Panel with numeric covariate "x" and binary "flag".
pub fn grid_panel(t_len: usize, outcomes: Vec<f64>, codes: Vec<u32>, x: Vec<f64>, flag: Vec<f64>) -> Panel {
    let n = codes.len();
    Panel::from_grid(
        (0..n).map(|i| format!("s{i:02}")).collect(),
        (0..t_len as i64).map(|t| 2000 + t).collect(),
        outcomes,
        codes,
        vec!["x".into(), "flag".into()],
        x.iter().zip(&flag).map(|(&a, &b)| vec![CovariateValue::Numeric(a), CovariateValue::Numeric(b)]).collect(),
    )
    .unwrap()
}

/// Random panels with at least two units in every code 0, 1, 2.
pub fn arb_panel(t_range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Panel> {
    (t_range, 6usize..14).prop_flat_map(|(t, n)| {
        (
            Just(t),
            prop::collection::vec(-10.0f64..10.0, n * t),
            prop::collection::vec(0u32..3, n - 6),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(move |(t, y, extra, x, flag)| {
                let mut codes = vec![0, 0, 1, 1, 2, 2];
                codes.extend(extra);
                grid_panel(t, y, codes, x, flag.into_iter().map(f64::from).collect())
            })
    })
}
