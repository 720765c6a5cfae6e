//! Monte Carlo study of bound and CATE interval performance.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_interval, oracle_tau, tau_from_rule, Norm, TauOutput, TauRule};
use crate::cate::{cate_interval_with_critical, fit_cate_arrays};
use crate::did::{pre_period_residuals, unit_did, Adjuster};
use crate::error::{Error, Result};
use crate::estimands::{
    coarsened_mixture, treated_design_projection, version_cate, version_cde, DGPParams, ErrorLaw, EstimandKind, Line,
    OutcomeProcess,
};
use crate::normal;
use crate::panel::{comparator_pool, CovariateValue, Panel, Target};

/// Per-unit latent draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub x: f64,
    pub u: f64,
    /// Version the unit would adopt if treated.
    pub m1: u32,
    pub a: bool,
    /// Observed code A·M(1).
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub panel: Panel,
    pub latent: Vec<Latent>,
    /// (Y_T(0), Y_T(1), Y_T(2)) per unit.
    pub potential: Vec<[f64; 3]>,
    /// ψ_{i,M(1)} = Y_T(M(1)) − Y_T(0).
    pub true_ite: Vec<f64>,
    /// Common period intercepts δ_t.
    pub period_effects: Vec<f64>,
    pub seed: u64,
}

impl SimDataset {
    /// Y_T under the regime opposite to the unit's own: Y_T(0) for treated
    /// units, Y_T(M(1)) for untreated ones.
    pub fn counterfactual(&self, unit: usize) -> f64 {
        let l = &self.latent[unit];
        if l.a {
            self.potential[unit][0]
        } else {
            self.potential[unit][l.m1 as usize]
        }
    }
}

impl ErrorLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorLaw::CenteredExponential { rate } => {
                // rate was validated positive
                let e: f64 = Exp::new(rate).map(|d| d.sample(rng)).unwrap_or(0.0);
                e - 1.0 / rate
            }
            ErrorLaw::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            ErrorLaw::Zero => 0.0,
        }
    }
}

/// Draws (X, U, M(1), A) for `n` units.
pub fn draw_latent<R: Rng + ?Sized>(p: &DGPParams, n: usize, rng: &mut R) -> Vec<Latent> {
    let sx = libm::sqrt(p.sigma2_x);
    let load = p.sigma_xu / sx;
    let resid_sd = libm::sqrt(p.sigma2_u - load * load);
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let x = sx * z1;
            let u = load * z1 + resid_sd * z2;
            let a = rng.random::<f64>() < normal::cdf(p.probit_offset + x);
            let m1 = if rng.random::<f64>() < normal::cdf(x) { 2 } else { 1 };
            Latent { x, u, m1, a, m: if a { m1 } else { 0 } }
        })
        .collect()
}

/// Draws outcome paths for given latents and assembles the panel.
pub fn draw_outcomes<R: Rng + ?Sized>(
    p: &DGPParams,
    latent: Vec<Latent>,
    seed: u64,
    rng: &mut R,
) -> Result<SimDataset> {
    let n = latent.len();
    let t_len = p.periods;
    let deltas: Vec<f64> = (0..t_len).map(|_| p.period_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut grid = vec![0.0; n * t_len];
    let mut potential = Vec::with_capacity(n);
    let mut true_ite = Vec::with_capacity(n);
    for (i, l) in latent.iter().enumerate() {
        let drift = p.alpha[0] * l.u + p.beta[0] * l.x;
        let mut level = 0.0;
        for t in 0..t_len {
            let step = deltas[t] + drift + p.baseline_error.sample(rng);
            level = match p.process {
                OutcomeProcess::Levels => step,
                OutcomeProcess::RandomWalk => level + step,
            };
            grid[i * t_len + t] = level;
        }
        let y0 = grid[i * t_len + t_len - 1];
        let e1 = p.version_error.sample(rng);
        let e2 = p.version_error.sample(rng);
        let y1 = y0 + p.delta[0] + p.alpha[1] * l.u + p.beta[1] * l.x + e1;
        let y2 = y0 + p.delta[1] + p.alpha[2] * l.u + p.beta[2] * l.x + e2;
        let pot = [y0, y1, y2];
        grid[i * t_len + t_len - 1] = pot[l.m as usize];
        true_ite.push(pot[l.m1 as usize] - y0);
        potential.push(pot);
    }
    let panel = Panel::from_grid(
        (0..n).map(|i| format!("u{i}")).collect(),
        (1..=t_len as i64).collect(),
        grid,
        latent.iter().map(|l| l.m).collect(),
        vec!["x".to_string()],
        latent.iter().map(|l| vec![CovariateValue::Numeric(l.x)]).collect(),
    )?;
    Ok(SimDataset { panel, latent, potential, true_ite, period_effects: deltas, seed })
}

/// One unconditional draw of `n` units from a stream seeded with `seed`.
pub fn draw_dataset(p: &DGPParams, n: usize, seed: u64) -> Result<SimDataset> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 units, got {n}")));
    }
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = draw_latent(p, n, &mut rng);
    draw_outcomes(p, latent, seed, &mut rng)
}

/// Which groups need at least `MIN_GROUP` units for a draw to be kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// Each of M = 0, 1, 2.
    VersionLevels,
    /// Each of A = 0, 1. The study default.
    ArmLevels,
}

pub const MIN_GROUP: usize = 3;

fn accept_codes(codes: impl Iterator<Item = u32>, rule: AcceptanceRule) -> bool {
    let mut c = [0usize; 3];
    for m in codes {
        c[(m as usize).min(2)] += 1;
    }
    match rule {
        AcceptanceRule::VersionLevels => c.iter().all(|&k| k >= MIN_GROUP),
        AcceptanceRule::ArmLevels => c[0] >= MIN_GROUP && c[1] + c[2] >= MIN_GROUP,
    }
}

/// True iff every treatment group required by `rule` has at least three units.
pub fn accept_dataset(ds: &SimDataset, rule: AcceptanceRule) -> bool {
    accept_codes(ds.latent.iter().map(|l| l.m), rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmMetric {
    pub coverage: f64,
    pub power_and_sign: f64,
    pub units: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub treated: ArmMetric,
    pub control: ArmMetric,
}

/// Coverage of the true ITE and strict, correctly signed exclusion of zero, by arm.
pub fn evaluate_intervals(ds: &SimDataset, intervals: &[(f64, f64)]) -> Result<ArmMetrics> {
    if intervals.len() != ds.true_ite.len() {
        return Err(Error::InvalidParameter("one interval per unit is required".to_string()));
    }
    let mut acc = [[0usize; 3]; 2];
    for ((&(lo, hi), &psi), l) in intervals.iter().zip(&ds.true_ite).zip(&ds.latent) {
        let arm = &mut acc[usize::from(l.a)];
        arm[0] += 1;
        if lo <= psi && psi <= hi {
            arm[1] += 1;
        }
        if (lo > 0.0 && psi > 0.0) || (hi < 0.0 && psi < 0.0) {
            arm[2] += 1;
        }
    }
    let metric = |c: [usize; 3]| ArmMetric {
        coverage: if c[0] == 0 { f64::NAN } else { c[1] as f64 / c[0] as f64 },
        power_and_sign: if c[0] == 0 { f64::NAN } else { c[2] as f64 / c[0] as f64 },
        units: c[0],
    };
    Ok(ArmMetrics { treated: metric(acc[1]), control: metric(acc[0]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Tau,
    TauX,
    TauStar,
    TauStarX,
    CateOls,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Tau, Estimator::TauX, Estimator::TauStar, Estimator::TauStarX, Estimator::CateOls];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Tau => "ITE bounds: tau",
            Estimator::TauX => "ITE bounds: tau(x)",
            Estimator::TauStar => "ITE bounds: tau*",
            Estimator::TauStarX => "ITE bounds: tau(x)*",
            Estimator::CateOls => "CATE: OLS (LP target)",
        }
    }
}

/// Settings shared by every replication of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub params: DGPParams,
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub acceptance: AcceptanceRule,
    /// τ rule for the feasible bounds.
    pub rule: TauRule,
    pub level: f64,
}

impl StudyConfig {
    pub fn new(n: usize, reps: usize, base_seed: u64) -> Self {
        StudyConfig {
            params: DGPParams::default(),
            n,
            reps,
            base_seed,
            acceptance: AcceptanceRule::ArmLevels,
            rule: TauRule { style: crate::bounds::TauStyle::NormBased { norm: Norm::L1Mean }, z: 2.0 },
            level: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 2 * MIN_GROUP {
            return Err(Error::InvalidParameter(format!("n = {} is too small for the acceptance rule", self.n)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".to_string()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {}", self.level)));
        }
        TauRule::new(self.rule.style, self.rule.z).map(|_| ())
    }
}

/// Result of one accepted replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub rejected: usize,
    /// Indexed like `Estimator::ALL`; `None` when the estimator failed.
    pub metrics: Vec<Option<ArmMetrics>>,
}

const MAX_DRAWS: usize = 100_000;

/// Draws from the replication's own stream until a dataset is accepted.
pub fn draw_accepted(cfg: &StudyConfig, index: usize) -> Result<(SimDataset, usize)> {
    let seed = cfg.base_seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for rejected in 0..MAX_DRAWS {
        let latent = draw_latent(&cfg.params, cfg.n, &mut rng);
        if accept_codes(latent.iter().map(|l| l.m), cfg.acceptance) {
            return Ok((draw_outcomes(&cfg.params, latent, seed, &mut rng)?, rejected));
        }
    }
    Err(Error::InvalidParameter(format!("no acceptable draw in {MAX_DRAWS} attempts at n = {}", cfg.n)))
}

type Intervals = Vec<(f64, f64)>;

/// Feasible and oracle intervals for every unit.
fn bound_intervals(ds: &SimDataset, adjuster: &Adjuster, rule: &TauRule) -> Result<(Intervals, Intervals)> {
    let panel = &ds.panel;
    let mut feasible = Vec::with_capacity(panel.n_units());
    let mut oracle = Vec::with_capacity(panel.n_units());
    for unit in 0..panel.n_units() {
        let pool = comparator_pool(panel, unit, Target::opposite_arm(panel, unit), &[])?;
        let est = unit_did(panel, unit, adjuster, &pool)?;
        let res = pre_period_residuals(panel, unit, adjuster, &pool)?;
        let b = bound_interval(&est, &tau_from_rule(&res, rule)?);
        feasible.push((b.lo, b.hi));
        let star = oracle_tau(ds.counterfactual(unit), est.predicted);
        let b = bound_interval(&est, &TauOutput::Oracle { tau: star });
        oracle.push((b.lo, b.hi));
    }
    Ok((feasible, oracle))
}

/// Per-unit CATE intervals from the interaction regression on final-period changes.
pub fn cate_intervals(ds: &SimDataset, level: f64) -> Result<Vec<(f64, f64)>> {
    let p = &ds.panel;
    let t = p.n_periods();
    let dy: Vec<f64> = (0..p.n_units()).map(|i| p.outcome(i, t) - p.outcome(i, t - 1)).collect();
    let x: Vec<f64> = ds.latent.iter().map(|l| l.x).collect();
    let fit = fit_cate_arrays(&dy, p.coarsened(), &x)?;
    let crit = normal::quantile(0.5 + 0.5 * level);
    Ok(x.iter()
        .map(|&xi| {
            let ci = cate_interval_with_critical(&fit, xi, crit);
            (ci.lo, ci.hi)
        })
        .collect())
}

/// Evaluates all five estimators on replication `index`.
pub fn run_replication(cfg: &StudyConfig, index: usize) -> Result<Replication> {
    let (ds, rejected) = draw_accepted(cfg, index)?;
    let mut metrics = vec![None; Estimator::ALL.len()];
    let linear = Adjuster::Linear(vec!["x".to_string()]);
    for (adjuster, feasible_slot, oracle_slot) in [(&Adjuster::None, 0, 2), (&linear, 1, 3)] {
        if let Ok((feasible, oracle)) = bound_intervals(&ds, adjuster, &cfg.rule) {
            metrics[feasible_slot] = Some(evaluate_intervals(&ds, &feasible)?);
            metrics[oracle_slot] = Some(evaluate_intervals(&ds, &oracle)?);
        }
    }
    if let Ok(ci) = cate_intervals(&ds, cfg.level) {
        metrics[4] = Some(evaluate_intervals(&ds, &ci)?);
    }
    Ok(Replication { index, rejected, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub treated_coverage: f64,
    pub control_coverage: f64,
    pub treated_power_and_sign: f64,
    pub control_power_and_sign: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub acceptance: AcceptanceRule,
    pub rejected: usize,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimReport {
    pub fn get(&self, e: Estimator) -> &EstimatorSummary {
        // every report carries all five estimators in order
        &self.estimators[Estimator::ALL.iter().position(|&x| x == e).unwrap_or(0)]
    }
}

/// Averages per-replication arm fractions in index order. Replications must
/// be sorted by index; a failure rate above 1% for any estimator is an error.
pub fn aggregate(cfg: &StudyConfig, reps: &[Replication]) -> Result<SimReport> {
    if reps.iter().enumerate().any(|(i, r)| r.index != i) || reps.len() != cfg.reps {
        return Err(Error::InvalidParameter("replications must be complete and in index order".to_string()));
    }
    let mut estimators = Vec::with_capacity(Estimator::ALL.len());
    for (k, &estimator) in Estimator::ALL.iter().enumerate() {
        let ok: Vec<&ArmMetrics> = reps.iter().filter_map(|r| r.metrics[k].as_ref()).collect();
        let failed = reps.len() - ok.len();
        if failed * 100 > reps.len() {
            return Err(Error::TooManyFailures { failed, reps: reps.len() });
        }
        let mean = |f: &dyn Fn(&ArmMetrics) -> f64| ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64;
        estimators.push(EstimatorSummary {
            estimator,
            treated_coverage: mean(&|m| m.treated.coverage),
            control_coverage: mean(&|m| m.control.coverage),
            treated_power_and_sign: mean(&|m| m.treated.power_and_sign),
            control_power_and_sign: mean(&|m| m.control.power_and_sign),
            failed,
        });
    }
    Ok(SimReport {
        n: cfg.n,
        reps: cfg.reps,
        base_seed: cfg.base_seed,
        acceptance: cfg.acceptance,
        rejected: reps.iter().map(|r| r.rejected).sum(),
        estimators,
    })
}

/// Serial driver; the CLI runs the same replications on a thread pool.
pub fn run_replications(cfg: &StudyConfig) -> Result<SimReport> {
    cfg.validate()?;
    let reps = (0..cfg.reps).map(|r| run_replication(cfg, r)).collect::<Result<Vec<_>>>()?;
    aggregate(cfg, &reps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub cde1: f64,
    pub cde2: f64,
    pub cate1: f64,
    pub cate2: f64,
    pub mixture_cate: f64,
    pub mixture_cde: f64,
    pub projection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub version: u32,
    pub ite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Illustration {
    pub params: DGPParams,
    pub seed: u64,
    pub projection: Line,
    pub curves: Vec<CurvePoint>,
    pub scatter: Vec<ScatterPoint>,
}

pub const ILLUSTRATION_N: usize = 1000;

/// Effect curves on x ∈ [−3, 3] plus one N = 1000 draw of realised ITEs with σ_xu = 1/4.
pub fn make_illustration(seed: u64) -> Result<Illustration> {
    let params = DGPParams::illustration();
    let projection = crate::estimands::projection_oracle(&params, EstimandKind::Cate);
    let curves = (0..=120)
        .map(|k| {
            let x = -3.0 + 0.05 * k as f64;
            Ok(CurvePoint {
                x,
                cde1: version_cde(&params, 1, x)?,
                cde2: version_cde(&params, 2, x)?,
                cate1: version_cate(&params, 1, x)?,
                cate2: version_cate(&params, 2, x)?,
                mixture_cate: coarsened_mixture(&params, x, EstimandKind::Cate),
                mixture_cde: coarsened_mixture(&params, x, EstimandKind::Cde),
                projection: projection.at(x),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = draw_dataset(&params, ILLUSTRATION_N, seed)?;
    let scatter =
        ds.latent.iter().zip(&ds.true_ite).map(|(l, &ite)| ScatterPoint { x: l.x, version: l.m1, ite }).collect();
    Ok(Illustration { params, seed, projection, curves, scatter })
}

/// Line the OLS CATE interaction terms estimate under the study design.
pub fn cate_target(params: &DGPParams) -> Line {
    treated_design_projection(params, EstimandKind::Cate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarsening_counts_match() {
        let ds = draw_dataset(&DGPParams::default(), 50, 1).unwrap();
        let treated = ds.panel.coarsened().iter().filter(|&&a| a).count();
        assert_eq!(treated, ds.panel.codes().iter().filter(|&&m| m > 0).count());
        for (l, &m) in ds.latent.iter().zip(ds.panel.codes()) {
            assert_eq!(m, if l.a { l.m1 } else { 0 });
        }
    }

    #[test]
    fn observed_outcomes_are_consistent() {
        let p = DGPParams::default();
        let ds = draw_dataset(&p, 40, 3).unwrap();
        let t = p.periods;
        for (i, l) in ds.latent.iter().enumerate() {
            assert_eq!(ds.panel.outcome(i, t), ds.potential[i][l.m as usize]);
            assert_eq!(ds.true_ite[i], ds.potential[i][l.m1 as usize] - ds.potential[i][0]);
        }
    }

    #[test]
    fn acceptance_counts() {
        assert!(accept_codes([0, 0, 0, 1, 1, 1, 2, 2, 2].into_iter(), AcceptanceRule::VersionLevels));
        let codes = core::iter::repeat_n(0, 10).chain(core::iter::repeat_n(1, 2)).chain(core::iter::repeat_n(2, 8));
        assert!(!accept_codes(codes.clone(), AcceptanceRule::VersionLevels));
        assert!(accept_codes(codes, AcceptanceRule::ArmLevels));
    }

    #[test]
    fn metric_definitions() {
        let mut ds = draw_dataset(&DGPParams::default(), 20, 5).unwrap();
        let wide = vec![(f64::NEG_INFINITY, f64::INFINITY); 20];
        let m = evaluate_intervals(&ds, &wide).unwrap();
        assert_eq!((m.treated.coverage, m.treated.power_and_sign), (1.0, 0.0));
        let exact: Vec<(f64, f64)> = ds.true_ite.iter().map(|&v| (v, v)).collect();
        let m = evaluate_intervals(&ds, &exact).unwrap();
        assert_eq!((m.control.coverage, m.control.power_and_sign), (1.0, 1.0));
        ds.true_ite[0] = 2.0;
        let mut wrong = exact.clone();
        wrong[0] = (-3.0, -1.0);
        let one = if ds.latent[0].a { m.treated.units } else { m.control.units } as f64;
        let m2 = evaluate_intervals(&ds, &wrong).unwrap();
        let arm = if ds.latent[0].a { m2.treated } else { m2.control };
        assert!((arm.coverage - (1.0 - 1.0 / one)).abs() < 1e-12);
    }

    #[test]
    fn small_study_runs() {
        let cfg = StudyConfig::new(15, 4, 9);
        let report = run_replications(&cfg).unwrap();
        assert_eq!(report.estimators.len(), 5);
        assert_eq!(report.get(Estimator::TauStar).treated_coverage, 1.0);
        assert_eq!(report.get(Estimator::TauStarX).control_coverage, 1.0);
    }
}
