//! Generator for the bundled 50-state application panel (`data/app_panel.csv`).
//!
//! Policy indicators follow the public state classification; outcomes are synthetic:
//! state level + common year effect + noise, with a small adoption effect in 2014 and
//! two planted larger effects (IL negative, NM positive).

use policybound_core::{CovariateValue, Panel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

pub const APP_PANEL_SEED: u64 = 20_140_101;
pub const YEARS: std::ops::RangeInclusive<i64> = 2009..=2014;

/// (expansion, pdmp_2014, pdmp_2013, rural, states)
const GROUPS: &[(u32, u8, u8, u8, &[&str])] = &[
    (1, 0, 0, 1, &["AR", "HI", "KY", "ND", "VT"]),
    (
        1,
        0,
        0,
        0,
        &[
            "AZ", "CA", "CO", "CT", "DC", "DE", "IA", "IL", "MD", "MI", "MN", "NJ", "NM", "NV", "NY", "OH", "OR", "RI",
            "WA",
        ],
    ),
    (1, 1, 0, 0, &["MA"]),
    (1, 1, 1, 0, &["WV"]),
    (0, 0, 0, 1, &["AK", "ID", "ME", "MS", "MT", "NE", "SD", "WY"]),
    (0, 0, 0, 0, &["AL", "FL", "GA", "KS", "MO", "NC", "OK", "PA", "SC", "TX", "UT", "VA", "WI"]),
    (0, 1, 0, 0, &["IN", "LA"]),
    (0, 1, 1, 0, &["TN"]),
];

const PLANTED: &[(&str, f64)] = &[("IL", -0.6), ("NM", 0.6)];

/// Draw the panel for `seed`. Units are sorted by state code.
pub fn generate(seed: u64) -> Result<Panel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<(&str, u32, u8, u8, u8)> = GROUPS
        .iter()
        .flat_map(|&(m, p14, p13, rural, ids)| ids.iter().map(move |&s| (s, m, p14, p13, rural)))
        .collect();
    states.sort_by_key(|s| s.0);

    let years: Vec<i64> = YEARS.collect();
    let t_len = years.len();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let year_effects: Vec<f64> = (0..t_len).map(|t| 0.12 * t as f64 + 0.05 * std_normal.sample(&mut rng)).collect();

    let mut outcomes = Vec::with_capacity(states.len() * t_len);
    for &(id, m, _, _, rural) in &states {
        let level = 2.5 + 0.8 * std_normal.sample(&mut rng) + 0.6 * f64::from(rural);
        let noise_sd = 0.05 + 0.05 * rng_unit(&mut rng);
        let effect = PLANTED
            .iter()
            .find(|p| p.0 == id)
            .map(|p| p.1)
            .unwrap_or_else(|| 0.01 + 0.03 * std_normal.sample(&mut rng));
        for (t, &ye) in year_effects.iter().enumerate() {
            let mut y = level + ye + noise_sd * std_normal.sample(&mut rng);
            if m > 0 && t + 1 == t_len {
                y += effect;
            }
            // rates are reported to four decimals
            outcomes.push((y * 1e4).round() / 1e4);
        }
    }

    let units = states.iter().map(|s| s.0.to_string()).collect();
    let codes = states.iter().map(|s| s.1).collect();
    let covariates = states
        .iter()
        .map(|s| [s.2, s.3, s.4].iter().map(|&v| CovariateValue::Numeric(f64::from(v))).collect())
        .collect();
    let names = vec!["pdmp_2014".to_string(), "pdmp_2013".into(), "rural".into()];
    Ok(Panel::from_grid(units, years, outcomes, codes, names, covariates)?)
}

fn rng_unit(rng: &mut ChaCha8Rng) -> f64 {
    rand::Rng::random::<f64>(rng)
}
