use policybound::{load_panel, write_panel, CliError, Schema};
use policybound_core::{CovariateValue, Error, Panel};
use proptest::prelude::*;

fn load(text: &str) -> Result<Panel, CliError> {
    load_panel(text, &Schema::default())
}

const SMALL: &str =
    "unit,time,outcome,m,x\na,1,1.5,0,0.25\na,2,2,0,0.25\na,3,4,0,0.25\nb,1,3,1,-1\nb,2,5,1,-1\nb,3,6.5,1,-1\n";

#[test]
fn loads_small_panel() {
    let p = load(SMALL).unwrap();
    assert_eq!((p.n_units(), p.n_periods()), (2, 3));
    assert_eq!(p.outcome(1, 3), 6.5);
    assert_eq!(p.codes(), &[0, 1]);
    assert_eq!(p.covariate(1, 0), &CovariateValue::Numeric(-1.0));
}

#[test]
fn missing_row_names_the_cell() {
    let text: String = SMALL.lines().filter(|l| !l.starts_with("b,2,")).map(|l| format!("{l}\n")).collect();
    match load(&text) {
        Err(CliError::Core(Error::Balance { missing })) => assert_eq!(missing, vec![("b".to_string(), 2)]),
        other => panic!("expected balance error, got {other:?}"),
    }
}

#[test]
fn schema_and_duplicate_errors() {
    let frac = SMALL.replace("b,1,3,1,", "b,1,3,1.5,");
    assert!(matches!(load(&frac), Err(CliError::Core(Error::Schema(_)))));
    let dup = format!("{SMALL}a,2,9,0,0.25\n");
    assert!(matches!(load(&dup), Err(CliError::Core(Error::Duplicate { ref unit, time: 2 })) if unit == "a"));
    let no_m = SMALL.replace("outcome,m,", "outcome,code,");
    assert!(matches!(load(&no_m), Err(CliError::Core(Error::Schema(_)))));
    let hole = SMALL.replace("a,2,2,0,0.25", "a,2,2,0,");
    assert!(matches!(load(&hole), Err(CliError::Core(Error::Schema(_)))));
}

#[test]
fn custom_schema_names() {
    let text = SMALL.replace("unit,time,outcome,m", "state,year,rate,expansion");
    let schema = Schema { unit: "state".into(), time: "year".into(), outcome: "rate".into(), code: "expansion".into() };
    assert_eq!(load_panel(&text, &schema).unwrap(), load(SMALL).unwrap());
}

#[test]
fn quoting_follows_rfc4180() {
    let text = "unit,time,outcome,m,label\n\"a,1\",1,1,0,\"say \"\"hi\"\"\"\n\"a,1\",2,2,0,\"say \"\"hi\"\"\"\nb,1,1,1,plain\nb,2,3,1,plain\n";
    let p = load(text).unwrap();
    assert_eq!(p.unit_id(0), "a,1");
    assert_eq!(p.covariate(0, 0), &CovariateValue::Categorical("say \"hi\"".into()));
    let out = write_panel(&p).unwrap();
    assert!(out.starts_with("unit,time,outcome,m,label\r\n\"a,1\",1,1,0,\"say \"\"hi\"\"\"\r\n"));
    assert_eq!(load(&out).unwrap(), p);
}

fn arb_panel() -> impl Strategy<Value = Panel> {
    (2usize..6, 2usize..5, any::<u64>()).prop_flat_map(|(n, t, _)| {
        (
            prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), n * t),
            prop::collection::vec(0u32..3, n),
            prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), n),
            prop::collection::vec("[a-z][a-z ,\"]{0,6}", n),
            prop::collection::vec(-3000i64..3000, t),
        )
            .prop_map(move |(y, codes, num, cat, mut times)| {
                times.sort_unstable();
                times.dedup();
                let t_len = times.len();
                let units = (0..n).map(|i| format!("unit {i}")).collect();
                let y = y.into_iter().take(n * t_len).collect();
                let cov = num
                    .iter()
                    .zip(&cat)
                    .map(|(&x, c)| vec![CovariateValue::Numeric(x), CovariateValue::Categorical(c.clone())])
                    .collect();
                (units, times, y, codes, cov)
            })
            .prop_filter_map("need two periods", |(units, times, y, codes, cov)| {
                Panel::from_grid(units, times, y, codes, vec!["x".into(), "label".into()], cov).ok()
            })
    })
}

proptest! {
    #[test]
    fn round_trip_is_identity(p in arb_panel()) {
        let text = write_panel(&p).unwrap();
        let back = load(&text).unwrap();
        for u in 0..p.n_units() {
            for t in 1..=p.n_periods() {
                prop_assert_eq!(back.outcome(u, t).to_bits(), p.outcome(u, t).to_bits());
            }
        }
        prop_assert_eq!(write_panel(&back).unwrap(), text);
        prop_assert_eq!(back, p);
    }
}
