//! Subcommand definitions and dispatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::compute::{
    compare_approx, dist_annuity, dist_intensity, independence, price_annuity, price_bond, price_gao, sensitivity,
    Grid, Method, RunError, RunResult,
};
use crate::config::{ModelConfig, Setup, SweepParam};
use crate::report::{csv_string, emit, metadata_line};
use crate::suite::{option_date_simulation, run_suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SUITE_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wannuity", version, about = "Joint survival annuity pricing under a linear-rational Wishart mortality model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Copy, Default)]
pub struct McFlags {
    /// Monte Carlo paths (overrides the config).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Euler time step in years (overrides the config).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Intensity,
    Annuity,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint survival bond SB(t, T) from the configured initial state.
    PriceBond {
        #[command(flatten)]
        common: Common,
        /// Bond maturity T.
        #[arg(long)]
        maturity: f64,
        /// Valuation time t.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Joint survival annuity from the configured initial state.
    PriceAnnuity {
        #[command(flatten)]
        common: Common,
        /// Valuation time; defaults to the option date (spot annuity).
        #[arg(long)]
        t: Option<f64>,
    },
    /// Guaranteed annuity option value at time 0.
    PriceGao {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Method::Cf)]
        method: Method,
        #[command(flatten)]
        mc: McFlags,
    },
    /// CDF and density on a grid, with summary rows.
    Dist {
        #[arg(value_enum)]
        kind: DistKind,
        #[command(flatten)]
        common: Common,
        /// z grid as lo:hi:steps.
        #[arg(long)]
        grid: Grid,
        /// Intensity leg (0-based).
        #[arg(long, default_value_t = 0)]
        leg: usize,
        /// Intensity horizon; defaults to the option date.
        #[arg(long)]
        horizon: Option<f64>,
        /// Lower-tail level for VaR/ES of the annuity.
        #[arg(long, default_value_t = 0.05)]
        p: f64,
    },
    /// Option value as one parameter moves.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Parameter range as lo:hi:steps.
        #[arg(long)]
        range: Grid,
    },
    /// Exact value against the Gaussian, spectral and gamma approximations.
    CompareApprox {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        g_grid: Grid,
    },
    /// Option value with and without dependence between the lives.
    Independence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        g_grid: Grid,
    },
    /// Runs the self-check suite and prints a pass/fail report.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McFlags,
    },
    /// Prints the configuration in canonical form.
    Canonical {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> RunResult<(ModelConfig, Setup)> {
    let cfg = ModelConfig::load(path)?;
    let setup = cfg.setup()?;
    Ok((cfg, setup))
}

fn apply_mc(setup: &mut Setup, flags: &McFlags) -> RunResult<()> {
    if let Some(p) = flags.paths {
        setup.mc.paths = p;
    }
    if let Some(dt) = flags.dt {
        setup.mc.dt = dt;
    }
    if let Some(s) = flags.seed {
        setup.mc.seed = s;
    }
    setup.mc.validate().map_err(|e| RunError::Usage(format!("invalid Monte Carlo flags: {e}")))
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> RunResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    emit(&s, out).map_err(|e| RunError::Usage(format!("cannot write output: {e}")))
}

fn write_text(text: &str, out: Option<&Path>) -> RunResult<()> {
    emit(text, out).map_err(|e| RunError::Usage(format!("cannot write output: {e}")))
}

fn csv_or_usage<R: serde::Serialize>(meta: &str, rows: &[R]) -> RunResult<String> {
    csv_string(meta, rows).map_err(|e| RunError::Usage(format!("cannot format csv: {e}")))
}

/// Executes one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wannuity: {e}");
            match e {
                RunError::Config(_) | RunError::Usage(_) => EXIT_CONFIG,
                RunError::Numerical(_) => EXIT_NUMERICAL,
            }
        }
    }
}

fn execute(cli: Cli) -> RunResult<i32> {
    match cli.command {
        Command::PriceBond { common, maturity, t } => {
            let (_, setup) = load(&common.config)?;
            let value = price_bond(&setup, t, maturity)?;
            write_json(&json!({ "t": t, "maturity": maturity, "value": value }), common.out.as_deref())?;
        }
        Command::PriceAnnuity { common, t } => {
            let (_, setup) = load(&common.config)?;
            let sched = setup.contract.schedule();
            let t = t.unwrap_or(sched.option_date());
            let value = price_annuity(&setup, t)?;
            write_json(
                &json!({
                    "t": t,
                    "option_date": sched.option_date(),
                    "payment_dates": sched.payment_dates(),
                    "value": value,
                }),
                common.out.as_deref(),
            )?;
        }
        Command::PriceGao { common, method, mc } => {
            let (_, mut setup) = load(&common.config)?;
            apply_mc(&mut setup, &mc)?;
            let report = price_gao(&setup, &setup.contract, method)?;
            write_json(&report, common.out.as_deref())?;
        }
        Command::Dist {
            kind,
            common,
            grid,
            leg,
            horizon,
            p,
        } => {
            let (cfg, setup) = load(&common.config)?;
            let text = match kind {
                DistKind::Intensity => {
                    let horizon = horizon.unwrap_or(setup.contract.schedule().option_date());
                    let meta = metadata_line(&cfg, &[("leg", leg.to_string()), ("horizon", horizon.to_string())]);
                    let d = dist_intensity(&setup, leg, horizon, &grid)?;
                    let mut text = csv_or_usage(&meta, &d.rows)?;
                    text.push_str(&format!("mean,{},\n", d.moments.mean));
                    text.push_str(&format!("variance,{},\n", d.moments.variance));
                    text
                }
                DistKind::Annuity => {
                    let meta = metadata_line(&cfg, &[("p", p.to_string())]);
                    let d = dist_annuity(&setup, &grid, p)?;
                    let mut text = csv_or_usage(&meta, &d.rows)?;
                    text.push_str(&format!("var,{},\n", d.tail.var));
                    text.push_str(&format!("es,{},\n", d.tail.es));
                    text
                }
            };
            write_text(&text, common.out.as_deref())?;
        }
        Command::Sensitivity { common, param, range } => {
            let cfg = ModelConfig::load(&common.config)?;
            let rows = sensitivity(&cfg, param, &range)?;
            let meta = metadata_line(&cfg, &[("param", param.label().to_string()), ("range", range.to_string())]);
            write_text(&csv_or_usage(&meta, &rows)?, common.out.as_deref())?;
        }
        Command::CompareApprox { common, g_grid } => {
            let (cfg, setup) = load(&common.config)?;
            let rows = compare_approx(&setup, &g_grid)?;
            let meta = metadata_line(&cfg, &[("g_grid", g_grid.to_string())]);
            write_text(&csv_or_usage(&meta, &rows)?, common.out.as_deref())?;
        }
        Command::Independence { common, g_grid } => {
            let (cfg, setup) = load(&common.config)?;
            let rows = independence(&setup, &g_grid)?;
            let meta = metadata_line(&cfg, &[("g_grid", g_grid.to_string())]);
            write_text(&csv_or_usage(&meta, &rows)?, common.out.as_deref())?;
        }
        Command::Validate { common, mc } => {
            let (_, mut setup) = load(&common.config)?;
            apply_mc(&mut setup, &mc)?;
            let sim = option_date_simulation(&setup, &setup.mc)?;
            let checks = run_suite(&setup, &sim)?;
            let mut text = String::new();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                text.push_str(&format!("{tag} {:<32} [{}] {}\n", c.name, c.tolerance, c.detail));
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            text.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
            write_text(&text, common.out.as_deref())?;
            if failed > 0 {
                return Ok(EXIT_SUITE_FAILED);
            }
        }
        Command::Canonical { config } => {
            let cfg = ModelConfig::load(&config)?;
            cfg.setup()?;
            write_text(&cfg.canonical(), None)?;
        }
    }
    Ok(EXIT_OK)
}
