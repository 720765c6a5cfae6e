//! Argument parsing and command pipelines.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use policybound_core::panel::Target;
use policybound_core::sim::AcceptanceRule;
use policybound_core::{
    bound_unit, coarsened_untreated_bound, comparator_pool, make_illustration, pre_period_residuals, robustness_grid,
    tipping_z, twfe_ate, unit_did, Adjuster, BoundResult, CoarseningStrategy, Error, Norm, Panel, StudyConfig, TauRule,
    TauStyle,
};
use serde::Serialize;

use crate::config::{expand_config, resolve_threads, THREADS_ENV};
use crate::csvio::{load_panel, write_panel, Schema};
use crate::error::{CliError, Result};
use crate::report::{self, BoundRow, EffectRow, TippingRow, DOT_Z};
use crate::study::run_study;
use crate::{app_panel, svg};

#[derive(Debug, Parser)]
#[command(
    name = "policybound",
    version,
    about = "Unit-level difference-in-differences bounds and simulation study",
    arg_required_else_help = true,
    args_override_self = true,
    after_help = "Every flag may also be set in a key = value file passed with --config PATH; \
                  command-line flags win. POLICYBOUND_THREADS caps the worker count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo study at one sample size.
    Simulate(SimulateArgs),
    /// Effect curves and a realised-ITE scatter for the illustration DGP.
    Illustrate(IllustrateArgs),
    /// Bound every unit's effect.
    Bound(BoundArgs),
    /// Smallest Z at which each unit's interval reaches zero.
    Tipping(TippingArgs),
    /// Sign counts across the eight-specification grid.
    Robustness(RobustnessArgs),
    /// Simulation table across sample sizes, or subgroup average effects for a panel.
    Table(TableArgs),
    /// Write the bundled synthetic application panel.
    GeneratePanel(GenerateArgs),
}

#[derive(Debug, Args)]
struct PanelArgs {
    /// Long-format panel CSV.
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value = "unit")]
    unit_col: String,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "outcome")]
    outcome_col: String,
    #[arg(long, default_value = "m")]
    code_col: String,
}

impl PanelArgs {
    fn load(&self) -> Result<Panel> {
        let text = std::fs::read_to_string(&self.panel).map_err(|e| CliError::io(&self.panel, e))?;
        let schema = Schema {
            unit: self.unit_col.clone(),
            time: self.time_col.clone(),
            outcome: self.outcome_col.clone(),
            code: self.code_col.clone(),
        };
        load_panel(&text, &schema)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum NormArg {
    L1Mean,
    L2,
    Linf,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Norm {
        match n {
            NormArg::L1Mean => Norm::L1Mean,
            NormArg::L2 => Norm::L2,
            NormArg::Linf => Norm::Linf,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum StyleArg {
    Norm,
    LastPlusMaxdiff,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AdjusterArg {
    #[value(alias = "first_diff")]
    None,
    Twfe,
    Linear,
    Discrete,
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Sensitivity multiplier.
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    #[arg(long, value_enum, default_value = "linf")]
    norm: NormArg,
    #[arg(long, value_enum, default_value = "norm")]
    style: StyleArg,
    /// Half-width for `--style fixed`.
    #[arg(long)]
    fixed_tau: Option<f64>,
    #[arg(long, value_enum, default_value = "none")]
    adjuster: AdjusterArg,
    /// Covariates for the linear or discrete adjuster, comma separated.
    #[arg(long, default_value = "")]
    adjust_columns: String,
    /// Restrict comparators to units matching on these columns, comma separated.
    #[arg(long = "match", default_value = "")]
    match_columns: String,
}

fn columns(list: &str) -> Vec<String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RuleArgs {
    fn rule(&self) -> Result<TauRule> {
        let style = match self.style {
            StyleArg::Norm => TauStyle::NormBased { norm: self.norm.into() },
            StyleArg::LastPlusMaxdiff => TauStyle::LastPlusMaxdiff,
            StyleArg::Fixed => TauStyle::Fixed {
                value: self.fixed_tau.ok_or_else(|| CliError::Usage("--style fixed needs --fixed-tau".into()))?,
            },
        };
        TauRule::new(style, self.z).map_err(|e| CliError::Usage(e.to_string()))
    }

    fn adjuster(&self) -> Result<Adjuster> {
        let cols = columns(&self.adjust_columns);
        let needs_cols = matches!(self.adjuster, AdjusterArg::Linear | AdjusterArg::Discrete);
        if needs_cols == cols.is_empty() {
            return Err(CliError::Usage(
                "--adjust-columns is required by the linear and discrete adjusters and only by them".into(),
            ));
        }
        Ok(match self.adjuster {
            AdjusterArg::None => Adjuster::None,
            AdjusterArg::Twfe => Adjuster::Twfe,
            AdjusterArg::Linear => Adjuster::Linear(cols),
            AdjusterArg::Discrete => Adjuster::Discrete(cols),
        })
    }
}

#[derive(Debug, Args)]
struct Outputs {
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AcceptanceArg {
    Arm,
    Version,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Groups that must hold at least three units for a draw to be kept.
    #[arg(long, value_enum, default_value = "arm")]
    acceptance: AcceptanceArg,
    /// Multiplier for the feasible rules.
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    #[arg(long, value_enum, default_value = "l1_mean")]
    norm: NormArg,
    /// CATE interval level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Worker threads (capped by POLICYBOUND_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

impl StudyArgs {
    fn config(&self, n: usize) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::new(n, self.reps, self.seed);
        cfg.acceptance = match self.acceptance {
            AcceptanceArg::Arm => AcceptanceRule::ArmLevels,
            AcceptanceArg::Version => AcceptanceRule::VersionLevels,
        };
        cfg.rule = TauRule::norm_based(self.norm.into(), self.z).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.level = self.level;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn threads(&self) -> Result<usize> {
        resolve_threads(self.threads, std::env::var(THREADS_ENV).ok().as_deref())
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Units per replication.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Debug, Args)]
struct IllustrateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Curve grid CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scatter: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Untreated-unit strategy: standard, conservative:F, assume_version:M or union.
    #[arg(long, default_value = "standard")]
    strategy: String,
    #[command(flatten)]
    outputs: Outputs,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TippingArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, value_enum, default_value = "linf")]
    norm: NormArg,
    #[arg(long, value_enum, default_value = "none")]
    adjuster: AdjusterArg,
    #[arg(long, default_value = "")]
    adjust_columns: String,
    #[arg(long = "match", default_value = "")]
    match_columns: String,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    /// Columns for the matched-comparator specifications, comma separated.
    #[arg(long = "match", default_value = "")]
    match_columns: String,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableKind {
    Simulation,
    Effects,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long, value_enum, default_value = "simulation")]
    kind: TableKind,
    /// Sample sizes for the simulation table, comma separated.
    #[arg(long, default_value = "50,25,15")]
    sizes: String,
    #[command(flatten)]
    study: StudyArgs,
    /// Panel for the effects table.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Binary stratifier for the effects table.
    #[arg(long, default_value = "rural")]
    by: String,
    /// Binary history columns; units where all are 0 (or all 1) form the two history strata.
    #[arg(long, default_value = "pdmp_2014,pdmp_2013")]
    history: String,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = app_panel::APP_PANEL_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `argv` (program name excluded), run the command and return the exit status.
pub fn dispatch(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(std::iter::once("policybound".to_string()).chain(argv)) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = write!(stderr, "{}", e.render());
            return 1;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn emit(outputs: &Outputs, csv: &str, json: impl FnOnce() -> Result<String>, stdout: &mut dyn Write) -> Result<()> {
    match &outputs.out {
        Some(p) => write_file(p, csv)?,
        None => stdout.write_all(csv.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?,
    }
    if let Some(p) = &outputs.json {
        write_file(p, &json()?)?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Illustrate(a) => illustrate(a, stdout),
        Command::Bound(a) => bound(a, stdout),
        Command::Tipping(a) => tipping(a, stdout),
        Command::Robustness(a) => robustness(a, stdout),
        Command::Table(a) => table(a, stdout),
        Command::GeneratePanel(a) => {
            let csv = write_panel(&app_panel::generate(a.seed)?)?;
            match a.out {
                Some(p) => write_file(&p, &csv),
                None => stdout.write_all(csv.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
            }
        }
    }
}

#[derive(Serialize)]
struct SimJson<'a> {
    config: &'a StudyConfig,
    report: &'a policybound_core::SimReport,
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = a.study.config(a.n)?;
    let report = run_study(&cfg, a.study.threads()?)?;
    let csv = report::sim_report_csv(&report)?;
    emit(&a.outputs, &csv, || to_json(&SimJson { config: &cfg, report: &report }), stdout)
}

fn illustrate(a: IllustrateArgs, stdout: &mut dyn Write) -> Result<()> {
    let ill = make_illustration(a.seed)?;
    let outputs = Outputs { out: a.out, json: a.json };
    emit(&outputs, &report::curves_csv(&ill)?, || to_json(&ill), stdout)?;
    if let Some(p) = &a.scatter {
        write_file(p, &report::scatter_csv(&ill)?)?;
    }
    if let Some(p) = &a.svg {
        write_file(p, &svg::illustration_svg(&ill))?;
    }
    Ok(())
}

fn parse_strategy(s: &str) -> Result<Option<CoarseningStrategy>> {
    let bad = || CliError::Usage(format!("unknown strategy {s:?}"));
    Ok(match s.split_once(':') {
        None if s == "standard" => None,
        None if s == "union" => Some(CoarseningStrategy::UnionOverVersions),
        Some(("conservative", f)) => Some(CoarseningStrategy::Conservative(f.parse().map_err(|_| bad())?)),
        Some(("assume_version", m)) => Some(CoarseningStrategy::AssumeVersion(m.parse().map_err(|_| bad())?)),
        _ => return Err(bad()),
    })
}

fn bound_one(
    panel: &Panel,
    unit: usize,
    adjuster: &Adjuster,
    rule: &TauRule,
    match_columns: &[String],
    strategy: Option<CoarseningStrategy>,
) -> Result<BoundResult> {
    Ok(match strategy {
        Some(s) if !panel.is_treated(unit) => coarsened_untreated_bound(panel, unit, s, rule, adjuster)?,
        _ => bound_unit(panel, unit, adjuster, rule, match_columns)?.2,
    })
}

fn bound(a: BoundArgs, stdout: &mut dyn Write) -> Result<()> {
    let panel = a.panel.load()?;
    let rule = a.rule.rule()?;
    let adjuster = a.rule.adjuster()?;
    let match_columns = columns(&a.rule.match_columns);
    let strategy = parse_strategy(&a.strategy)?;
    if strategy.is_some() && !match_columns.is_empty() {
        return Err(CliError::Usage("--match applies to the standard strategy only".into()));
    }
    let rows = (0..panel.n_units())
        .map(|u| {
            let bound = bound_one(&panel, u, &adjuster, &rule, &match_columns, strategy)?;
            let dots = DOT_Z
                .iter()
                .map(|&z| {
                    let b = bound_one(&panel, u, &adjuster, &rule.with_z(z)?, &match_columns, strategy)?;
                    Ok((z, b.lo, b.hi))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BoundRow { unit: panel.unit_id(u).to_string(), treated: panel.is_treated(u), bound, dots })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(&a.outputs, &report::bounds_csv(&rows)?, || to_json(&rows), stdout)?;
    if let Some(p) = &a.svg {
        write_file(p, &svg::bounds_svg(&rows))?;
    }
    Ok(())
}

fn tipping(a: TippingArgs, stdout: &mut dyn Write) -> Result<()> {
    let panel = a.panel.load()?;
    let norm: Norm = a.norm.into();
    let adjuster = RuleArgs {
        z: 0.0,
        norm: a.norm,
        style: StyleArg::Norm,
        fixed_tau: None,
        adjuster: a.adjuster,
        adjust_columns: a.adjust_columns.clone(),
        match_columns: String::new(),
    }
    .adjuster()?;
    let match_columns = columns(&a.match_columns);
    let rows = (0..panel.n_units())
        .map(|u| {
            let pool = comparator_pool(&panel, u, Target::opposite_arm(&panel, u), &match_columns)?;
            let est = unit_did(&panel, u, &adjuster, &pool)?;
            let res = pre_period_residuals(&panel, u, &adjuster, &pool)?;
            Ok(TippingRow {
                unit: panel.unit_id(u).to_string(),
                treated: est.treated,
                point: est.point,
                norm: norm.apply(&res.values),
                z_star: tipping_z(&est, &res, norm)?,
            })
        })
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    emit(&a.outputs, &report::tipping_csv(&rows, norm.label())?, || to_json(&rows), stdout)
}

fn robustness(a: RobustnessArgs, stdout: &mut dyn Write) -> Result<()> {
    let panel = a.panel.load()?;
    if !(a.z >= 0.0 && a.z.is_finite()) {
        return Err(CliError::Usage(format!("--z must be finite and non-negative, got {}", a.z)));
    }
    let match_columns = columns(&a.match_columns);
    let grid = robustness_grid(&panel, a.z, &match_columns)?;
    emit(
        &a.outputs,
        &report::robustness_csv(&panel, &grid)?,
        || to_json(&report::grid_json(&panel, &grid, a.z, &match_columns)),
        stdout,
    )
}

fn table(a: TableArgs, stdout: &mut dyn Write) -> Result<()> {
    match a.kind {
        TableKind::Simulation => {
            let sizes = columns(&a.sizes)
                .iter()
                .map(|s| s.parse::<usize>().map_err(|_| CliError::Usage(format!("bad sample size {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if sizes.is_empty() {
                return Err(CliError::Usage("--sizes is empty".into()));
            }
            let threads = a.study.threads()?;
            let reports = sizes.iter().map(|&n| run_study(&a.study.config(n)?, threads)).collect::<Result<Vec<_>>>()?;
            emit(&a.outputs, &report::sim_table_csv(&reports)?, || to_json(&reports), stdout)
        }
        TableKind::Effects => {
            let path = a.panel.ok_or_else(|| CliError::Usage("--kind effects needs --panel".into()))?;
            let panel = PanelArgs {
                panel: path,
                unit_col: "unit".into(),
                time_col: "time".into(),
                outcome_col: "outcome".into(),
                code_col: "m".into(),
            }
            .load()?;
            let rows = effects_rows(&panel, a.by.trim(), &columns(&a.history))?;
            emit(&a.outputs, &report::effects_csv(&rows)?, || to_json(&rows), stdout)
        }
    }
}

/// 0/1 value of a binary covariate, or an error naming the unit.
fn binary(panel: &Panel, unit: usize, col: usize) -> Result<bool> {
    match panel.numeric_covariate(unit, col)? {
        0.0 => Ok(false),
        1.0 => Ok(true),
        v => Err(Error::Schema(format!(
            "column {} must be 0/1, unit {} has {v}",
            panel.covariate_names()[col],
            panel.unit_id(unit)
        ))
        .into()),
    }
}

fn effects_rows(panel: &Panel, by: &str, history: &[String]) -> Result<Vec<EffectRow>> {
    let n = panel.n_units();
    let by_col = if by.is_empty() { None } else { Some(panel.column_index(by)?) };
    let hist_cols = history.iter().map(|c| panel.column_index(c)).collect::<std::result::Result<Vec<_>, _>>()?;

    let by_vals = (0..n).map(|u| by_col.map(|c| binary(panel, u, c)).transpose()).collect::<Result<Vec<_>>>()?;
    // Some(d) when every history column equals d, None when they disagree
    let hist_vals = (0..n)
        .map(|u| {
            let v = hist_cols.iter().map(|&c| binary(panel, u, c)).collect::<Result<Vec<_>>>()?;
            Ok(if v.iter().all(|&b| b) {
                Some(true)
            } else if v.iter().all(|&b| !b) {
                Some(false)
            } else {
                None
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let hist_name = history.join("=");
    let mut strata: Vec<(String, Option<bool>, Option<bool>)> = vec![("all".into(), None, None)];
    if by_col.is_some() {
        strata.extend([false, true].map(|r| (format!("{by}={}", u8::from(r)), None, Some(r))));
    }
    if !hist_cols.is_empty() {
        for d in [false, true] {
            strata.push((format!("{hist_name}={}", u8::from(d)), Some(d), None));
            if by_col.is_some() {
                strata.extend(
                    [false, true]
                        .map(|r| (format!("{hist_name}={},{by}={}", u8::from(d), u8::from(r)), Some(d), Some(r))),
                );
            }
        }
    }

    strata
        .into_iter()
        .map(|(estimand, d, r)| {
            let subset: Vec<usize> = (0..n)
                .filter(|&u| d.is_none_or(|d| hist_vals[u] == Some(d)) && r.is_none_or(|r| by_vals[u] == Some(r)))
                .collect();
            let treated_n = subset.iter().filter(|&&u| panel.is_treated(u)).count();
            let fit = match twfe_ate(panel, &subset) {
                Ok(f) => Some(f),
                Err(Error::DegenerateSubset(_)) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(EffectRow { estimand, n: subset.len(), treated_n, fit })
        })
        .collect()
}
