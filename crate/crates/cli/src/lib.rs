//! Command-line driver: parses flags, loads the TOML experiment config and
//! writes long-format results.
//!
//! Exit codes: 0 on success, 1 on I/O or internal errors, 2 on usage or
//! configuration errors, 3 when a solver fails or reports infeasibility.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdsec_core::adc::{adc_solve, default_init};
use fdsec_core::harness::{
    self, epsilon_sweep, smallest_feasible_epsilon, trial_channels, ExperimentConfig, ExperimentKind, ExperimentOutput,
    OutputFormat, Record, ResultTable,
};
use fdsec_core::model::rates;
use fdsec_core::reduction::{lift, reduce};
use fdsec_core::robust::{histogram_csv, nonrobust_design, outage_csv, robust_dc_solve, EveFamily, OutageReport};
use fdsec_core::Error;

#[derive(Debug, Parser)]
#[command(name = "fdsec", version, about = "Secure full-duplex transmit design experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Alternating DC design on the first `--trials` channel draws (default 1).
    Solve(RunArgs),
    /// Per-iteration rates of the alternating solver.
    Convergence(RunArgs),
    /// Secrecy rate of each method over the power grid.
    SweepPower(RunArgs),
    /// Secrecy rate of each method over the antenna grid.
    SweepAntennas(RunArgs),
    /// Outage-constrained design on the first `--trials` channel draws (default 1).
    RobustSolve {
        #[command(flatten)]
        run: RunArgs,
        /// Outage thresholds to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        epsilon_grid: Vec<f64>,
    },
    /// Robust experiment of the config's kind with Monte Carlo outage checks.
    RobustEval(RunArgs),
    /// Write a template config.
    GenConfig {
        #[arg(long, value_enum, default_value_t = KindArg::SweepPower)]
        kind: KindArg,
        /// Directory for `<kind>.toml`; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Convergence,
    SweepPower,
    SweepAntennas,
    RobustExactMoment,
    RobustUncertainMoment,
    OutagePerChannel,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Convergence => ExperimentKind::Convergence,
            KindArg::SweepPower => ExperimentKind::SweepPower,
            KindArg::SweepAntennas => ExperimentKind::SweepAntennas,
            KindArg::RobustExactMoment => ExperimentKind::RobustExactMoment,
            KindArg::RobustUncertainMoment => ExperimentKind::RobustUncertainMoment,
            KindArg::OutagePerChannel => ExperimentKind::OutagePerChannel,
        }
    }
}

/// Exit code for a core error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 2,
        Error::RobustInfeasible { .. } | Error::Conic(_) | Error::Bisection(_) | Error::DegenerateChannelSet => 3,
        Error::Consistency(_) | Error::Io(_) => 1,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fdsec: {e}");
            exit_code(&e)
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Solve(a) => {
            let cfg = load(&a, None, Some(1))?;
            emit(&cfg, &solve(&cfg)?)
        }
        Command::Convergence(a) => experiment(&load(&a, Some(ExperimentKind::Convergence), None)?),
        Command::SweepPower(a) => experiment(&load(&a, Some(ExperimentKind::SweepPower), None)?),
        Command::SweepAntennas(a) => experiment(&load(&a, Some(ExperimentKind::SweepAntennas), None)?),
        Command::RobustSolve { run, epsilon_grid } => {
            let cfg = load(&run, None, Some(1))?;
            if let Some(bad) = epsilon_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                return Err(Error::Config(format!("epsilon grid value {bad} outside (0, 1)")));
            }
            emit(&cfg, &robust_solve(&cfg, &epsilon_grid)?)
        }
        Command::RobustEval(a) => {
            let cfg = load(&a, None, None)?;
            if !cfg.kind.is_robust() {
                return Err(Error::Config(format!(
                    "robust-eval needs a robust experiment kind, config has {}",
                    cfg.kind.name()
                )));
            }
            experiment(&cfg)
        }
        Command::GenConfig { kind, out } => {
            let cfg = ExperimentConfig::template(kind.into());
            let text = cfg.to_toml();
            match out {
                Some(dir) => write(&dir, &format!("{}.toml", cfg.kind.name()), &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

/// Reads the config and applies flag overrides. `kind` replaces the config's
/// kind; `trials_default` replaces its trial count unless `--trials` is given.
fn load(a: &RunArgs, kind: Option<ExperimentKind>, trials_default: Option<usize>) -> Result<ExperimentConfig, Error> {
    let text =
        fs::read_to_string(&a.config).map_err(|e| Error::Config(format!("cannot read {}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(k) = kind {
        cfg.kind = k;
    }
    if let Some(t) = trials_default {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(d) = &a.out {
        cfg.output.dir = Some(d.clone());
    }
    if let Some(f) = a.format {
        cfg.output.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn results_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg.output.format {
        OutputFormat::Csv => "results.csv",
        OutputFormat::Json => "results.json",
    }
}

/// Writes the result table plus any side files, or prints the table.
fn emit(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<(), Error> {
    for f in &out.table.failures {
        eprintln!(
            "fdsec: {} trial {} at {} failed: {}",
            f.method, f.trial, f.sweep, f.message
        );
    }
    let Some(dir) = &cfg.output.dir else {
        print!("{}", out.table.render(cfg.output.format));
        return Ok(());
    };
    write(dir, results_name(cfg), &out.table.render(cfg.output.format))?;
    for h in &out.histograms {
        write(dir, &format!("histogram_{}.csv", h.method), &histogram_csv(&h.families))?;
        let reports = outage_reports(&out.table, &h.method, h.trial, h.r_s, cfg.robust.draws);
        if !reports.is_empty() {
            write(dir, &format!("outage_{}.csv", h.method), &outage_csv(&reports))?;
        }
    }
    Ok(())
}

/// Per-family outage of one design on one trial, read back from the table.
fn outage_reports(table: &ResultTable, method: &str, trial: usize, r_s: f64, draws: usize) -> Vec<OutageReport> {
    EveFamily::ALL
        .into_iter()
        .filter_map(|family| {
            let metric = format!("outage_{}", family.name());
            table
                .records
                .iter()
                .find(|r| r.method == method && r.trial == trial && r.metric == metric)
                .map(|r| OutageReport {
                    family,
                    draw_count: draws,
                    outage_rate: r.value,
                    r_s,
                })
        })
        .collect()
}

fn experiment(cfg: &ExperimentConfig) -> Result<(), Error> {
    emit(cfg, &harness::run_experiment(cfg)?)
}

fn record(cfg: &ExperimentConfig, method: &str, sweep: f64, trial: usize, metric: &str, value: f64) -> Record {
    Record {
        experiment: cfg.label().to_string(),
        method: method.to_string(),
        sweep,
        trial,
        metric: metric.to_string(),
        value,
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<ExperimentOutput, Error> {
    let p = cfg.system.params();
    let mut table = ResultTable::default();
    for trial in 0..cfg.trials {
        let (ch, _) = trial_channels(cfg.seed, trial, p.n_tx);
        let rp = reduce(&ch, &p)?;
        let (w, trace) = adc_solve(&rp, &default_init(&rp), 1e-6, 100)?;
        let r = rates(&lift(&w, &rp)?, &ch, &p)?;
        let sweep = cfg.system.p_db;
        for (metric, value) in [
            ("R_a", r.r_a),
            ("R_b", r.r_b),
            ("R_e", r.r_e),
            ("ssr", r.sum_secrecy_rate()),
            ("iterations", trace.iterations() as f64),
            ("converged", f64::from(u8::from(trace.converged))),
        ] {
            table.records.push(record(cfg, "fd-dc", sweep, trial, metric, value));
        }
        if trial == 0 {
            if let Some(dir) = &cfg.output.dir {
                write(dir, "trace.csv", &trace.to_csv())?;
            }
        }
    }
    Ok(ExperimentOutput {
        table,
        histograms: Vec::new(),
    })
}

fn robust_solve(cfg: &ExperimentConfig, grid: &[f64]) -> Result<ExperimentOutput, Error> {
    let p = cfg.system.params();
    let mm = cfg.moments.model(p.n_tx);
    let mut table = ResultTable::default();
    for trial in 0..cfg.trials {
        let (ch, _) = trial_channels(cfg.seed, trial, p.n_tx);
        let r = robust_dc_solve(&ch, &p, &mm, cfg.robust.tol, cfg.robust.max_iter)?;
        let (_, nonrobust) = nonrobust_design(&ch, &p, &mm)?;
        for (metric, value) in [
            ("r_s", r.r_s),
            ("mu", r.variables.mu),
            ("nu_e", r.variables.nu_e),
            ("dc_iterations", r.dc_trace.len() as f64),
            ("newton_steps", r.newton_steps as f64),
            ("converged", f64::from(u8::from(r.converged))),
            ("audit_pass", f64::from(u8::from(r.audit.passes()))),
        ] {
            table
                .records
                .push(record(cfg, "robust", mm.epsilon, trial, metric, value));
        }
        table
            .records
            .push(record(cfg, "nonrobust", mm.epsilon, trial, "r_s", nonrobust));
        if grid.is_empty() {
            continue;
        }
        let points = epsilon_sweep(&ch, &p, &mm, grid, cfg.robust.tol, cfg.robust.max_iter);
        for pt in &points {
            match (pt.r_s, &pt.error) {
                (Some(v), _) => table
                    .records
                    .push(record(cfg, "epsilon_sweep", pt.epsilon, trial, "r_s", v)),
                (None, err) => {
                    eprintln!(
                        "fdsec: trial {trial} at epsilon {} failed: {}",
                        pt.epsilon,
                        err.as_deref().unwrap_or("unknown")
                    );
                    table
                        .records
                        .push(record(cfg, "epsilon_sweep", pt.epsilon, trial, "failed", 1.0));
                }
            }
        }
        match smallest_feasible_epsilon(&points) {
            Some(e) => eprintln!("fdsec: trial {trial}: smallest epsilon with a positive certified rate {e}"),
            None => eprintln!("fdsec: trial {trial}: no epsilon in the grid certifies a positive rate"),
        }
    }
    Ok(ExperimentOutput {
        table,
        histograms: Vec::new(),
    })
}
