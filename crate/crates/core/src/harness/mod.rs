//! Experiment drivers: baselines, Monte Carlo orchestration over channel
//! draws, and long-format result tables.
//!
//! Every trial owns a ChaCha stream derived from the master seed and the trial
//! index, and records carry their trial index, so results are identical
//! regardless of how the trials are scheduled across threads.

mod baselines;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adc::{adc_solve, default_init};
use crate::error::{Error, Result};
use crate::model::{ChannelSet, SystemParams};
use crate::reduction::reduce;
use crate::robust::{
    histogram, nonrobust_design, outage_rate, robust_dc_solve, sample_ambiguous_eve, secrecy_samples, Design,
    EveFamily, HistogramBin, MomentModel,
};

pub use baselines::{baseline_fd_zf, baseline_hd, fd_dc, HalfDuplexRates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-iteration rates of the alternating solver.
    Convergence,
    /// Secrecy rate of each method over the power grid (and SI factor grid).
    SweepPower,
    /// Secrecy rate of each method over the antenna grid.
    SweepAntennas,
    /// Robust and nonrobust designs checked against draws with the estimated moments.
    RobustExactMoment,
    /// Designs with and without moment radii checked against perturbed moments.
    RobustUncertainMoment,
    /// Worst-family outage of each design, one row per channel instance.
    OutagePerChannel,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SweepPower => "sweep_power",
            ExperimentKind::SweepAntennas => "sweep_antennas",
            ExperimentKind::RobustExactMoment => "robust_exact_moment",
            ExperimentKind::RobustUncertainMoment => "robust_uncertain_moment",
            ExperimentKind::OutagePerChannel => "outage_per_channel",
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(
            self,
            ExperimentKind::RobustExactMoment
                | ExperimentKind::RobustUncertainMoment
                | ExperimentKind::OutagePerChannel
        )
    }
}

/// Symmetric system: both nodes share antenna count, SI factor and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_tx: usize,
    /// Power budget in dB relative to the unit noise floor.
    pub p_db: f64,
    pub zeta: f64,
    /// Common noise power at Alice, Bob and Eve.
    #[serde(default = "one")]
    pub sigma2: f64,
}

fn one() -> f64 {
    1.0
}

impl SystemConfig {
    pub fn params(&self) -> SystemParams {
        let mut p = SystemParams::symmetric(self.n_tx, self.p_db, self.zeta);
        p.sigma_a2 = self.sigma2;
        p.sigma_b2 = self.sigma2;
        p.sigma_e2 = self.sigma2;
        p
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            p_db: 5.0,
            zeta: 0.01,
            sigma2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub power_db: Vec<f64>,
    /// SI factors swept by both sweep kinds.
    pub zeta: Vec<f64>,
    pub antennas: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            power_db: vec![0.0, 5.0, 10.0, 15.0],
            zeta: vec![0.01, 0.1],
            antennas: vec![2, 3, 4, 6, 8],
        }
    }
}

/// Isotropic moment estimates `xi = s (1 + j) 1_N`, `Omega = xi xi^H + rho I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub xi_scale: f64,
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            xi_scale: 0.01,
            rho: 0.002,
            tau1: 0.0,
            tau2: 0.0,
            epsilon: 0.05,
        }
    }
}

impl MomentConfig {
    pub fn model(&self, n: usize) -> MomentModel {
        MomentModel::isotropic(n, self.xi_scale, self.rho, self.tau1, self.tau2, self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    /// Eve draws per distribution family.
    pub draws: usize,
    pub histogram_bins: usize,
    /// Stopping gain (bits) of the robust DC loop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            draws: 100_000,
            histogram_bins: 50,
            tol: 1e-5,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Label written to the `experiment` column; defaults to the kind name.
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub moments: MomentConfig,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Template with the default desk-scale settings for `kind`.
    pub fn template(kind: ExperimentKind) -> Self {
        let trials = if kind.is_robust() {
            20
        } else if kind == ExperimentKind::Convergence {
            1
        } else {
            200
        };
        let mut moments = MomentConfig::default();
        if kind == ExperimentKind::RobustUncertainMoment {
            moments.tau1 = 0.05;
            moments.tau2 = 0.05;
        }
        Self {
            kind,
            name: None,
            seed: 42,
            trials,
            system: SystemConfig::default(),
            sweep: SweepConfig::default(),
            moments,
            robust: RobustConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        self.system
            .params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.kind {
            ExperimentKind::SweepPower if self.sweep.power_db.is_empty() => return bad("sweep.power_db is empty"),
            ExperimentKind::SweepAntennas if self.sweep.antennas.is_empty() => return bad("sweep.antennas is empty"),
            ExperimentKind::SweepPower | ExperimentKind::SweepAntennas if self.sweep.zeta.is_empty() => {
                return bad("sweep.zeta is empty")
            }
            _ => {}
        }
        if self.sweep.antennas.contains(&0) {
            return bad("antenna counts must be positive");
        }
        if self.sweep.zeta.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
            return bad("SI factors must lie in (0, 1)");
        }
        if self.kind.is_robust() {
            let m = &self.moments;
            if !(m.epsilon > 0.0 && m.epsilon < 1.0) {
                return bad("moments.epsilon must lie in (0, 1)");
            }
            if m.rho < 0.0 || m.tau1 < 0.0 || m.tau2 < 0.0 || m.xi_scale < 0.0 {
                return bad("moment parameters must be nonnegative");
            }
            if self.robust.draws == 0 {
                return bad("robust.draws must be at least 1");
            }
        }
        Ok(())
    }
}

/// One long-format result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub method: String,
    pub sweep: f64,
    pub trial: usize,
    pub metric: String,
    pub value: f64,
}

/// A trial that failed; it also appears in the table as a `failed` metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub sweep: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
}

impl ResultTable {
    pub const CSV_HEADER: &'static str = "experiment,method,sweep,trial,metric,value";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.experiment, r.method, r.sweep, r.trial, r.metric, r.value
            );
        }
        out
    }

    /// Array of record objects mirroring the CSV rows.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Values of one metric for one method, in record order.
    pub fn values(&self, method: &str, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// `(sweep, trial, value)` for one metric of one method.
    pub fn series(&self, method: &str, metric: &str) -> Vec<(f64, usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| (r.sweep, r.trial, r.value))
            .collect()
    }
}

/// Secrecy-rate histograms of one design on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSet {
    pub method: String,
    pub trial: usize,
    pub r_s: f64,
    pub families: Vec<(EveFamily, Vec<HistogramBin>)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    /// Histograms for the first trial of the robust kinds.
    pub histograms: Vec<HistogramSet>,
}

/// Stream for one trial: the master seed selects the key, the trial index the
/// stream, so trials never share random numbers.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Channels of one trial and the seed for its Eve draws.
pub fn trial_channels(seed: u64, trial: usize, n: usize) -> (ChannelSet, u64) {
    let mut rng = trial_rng(seed, trial);
    let ch = ChannelSet::sample(&mut rng, n);
    (ch, rng.next_u64())
}

#[derive(Default)]
struct TrialOut {
    records: Vec<Record>,
    failures: Vec<Failure>,
    histograms: Vec<HistogramSet>,
}

impl TrialOut {
    fn push(&mut self, cfg: &ExperimentConfig, method: &str, sweep: f64, trial: usize, metric: &str, value: f64) {
        self.records.push(Record {
            experiment: cfg.label().to_string(),
            method: method.to_string(),
            sweep,
            trial,
            metric: metric.to_string(),
            value,
        });
    }

    fn fail(&mut self, cfg: &ExperimentConfig, method: &str, sweep: f64, trial: usize, err: &Error) {
        self.push(cfg, method, sweep, trial, "failed", 1.0);
        self.failures.push(Failure {
            method: method.to_string(),
            sweep,
            trial,
            message: err.to_string(),
        });
    }
}

/// Runs the experiment over its grid and trials in parallel. Failures of a
/// single trial are recorded and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let trials: Vec<usize> = (0..cfg.trials).collect();
    let outs: Vec<TrialOut> = trials.par_iter().map(|&t| run_trial(cfg, t)).collect();
    let mut out = ExperimentOutput::default();
    for o in outs {
        out.table.records.extend(o.records);
        out.table.failures.extend(o.failures);
        out.histograms.extend(o.histograms);
    }
    Ok(out)
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialOut {
    let mut out = TrialOut::default();
    match cfg.kind {
        ExperimentKind::Convergence => convergence_trial(cfg, trial, &mut out),
        ExperimentKind::SweepPower => {
            let (ch, _) = trial_channels(cfg.seed, trial, cfg.system.n_tx);
            for &zeta in &cfg.sweep.zeta {
                for &p_db in &cfg.sweep.power_db {
                    let sys = SystemConfig {
                        p_db,
                        zeta,
                        ..cfg.system.clone()
                    };
                    compare_methods(cfg, &ch, &sys, p_db, trial, &mut out);
                }
            }
        }
        ExperimentKind::SweepAntennas => {
            for &zeta in &cfg.sweep.zeta {
                for &n in &cfg.sweep.antennas {
                    // Fresh draws per antenna count from the same trial stream.
                    let (ch, _) = trial_channels(cfg.seed, trial, n);
                    let sys = SystemConfig {
                        n_tx: n,
                        zeta,
                        ..cfg.system.clone()
                    };
                    compare_methods(cfg, &ch, &sys, n as f64, trial, &mut out);
                }
            }
        }
        ExperimentKind::RobustExactMoment
        | ExperimentKind::RobustUncertainMoment
        | ExperimentKind::OutagePerChannel => robust_trial(cfg, trial, &mut out),
    }
    out
}

fn convergence_trial(cfg: &ExperimentConfig, trial: usize, out: &mut TrialOut) {
    let p = cfg.system.params();
    let (ch, _) = trial_channels(cfg.seed, trial, p.n_tx);
    let run = reduce(&ch, &p).and_then(|rp| adc_solve(&rp, &default_init(&rp), 1e-6, 100));
    match run {
        Ok((_, trace)) => {
            for row in &trace.rows {
                let it = row.iter as f64;
                out.push(cfg, "fd-dc", it, trial, "R_a", row.r_a);
                out.push(cfg, "fd-dc", it, trial, "R_b", row.r_b);
                out.push(cfg, "fd-dc", it, trial, "R_e", row.r_e);
                out.push(cfg, "fd-dc", it, trial, "ssr", row.objective.max(0.0));
            }
        }
        Err(e) => out.fail(cfg, "fd-dc", 0.0, trial, &e),
    }
}

/// Method label, tagged with the SI factor when several are swept.
fn method_label(cfg: &ExperimentConfig, method: &str, zeta: f64) -> String {
    if cfg.sweep.zeta.len() > 1 {
        format!("{method}@zeta={zeta}")
    } else {
        method.to_string()
    }
}

fn compare_methods(
    cfg: &ExperimentConfig,
    ch: &ChannelSet,
    sys: &SystemConfig,
    sweep: f64,
    trial: usize,
    out: &mut TrialOut,
) {
    let p = sys.params();
    let dc = method_label(cfg, "fd-dc", sys.zeta);
    match fd_dc(ch, &p) {
        Ok((_, r)) => out.push(cfg, &dc, sweep, trial, "ssr", r),
        Err(e) => out.fail(cfg, &dc, sweep, trial, &e),
    }
    let zf = method_label(cfg, "fd-zf", sys.zeta);
    match baseline_fd_zf(ch, &p) {
        Ok((_, r)) => out.push(cfg, &zf, sweep, trial, "ssr", r),
        Err(e) => out.fail(cfg, &zf, sweep, trial, &e),
    }
    let hd = method_label(cfg, "hd-dc", sys.zeta);
    match baseline_hd(ch, &p) {
        Ok(r) => out.push(cfg, &hd, sweep, trial, "ssr", r.sum_secrecy_rate()),
        Err(e) => out.fail(cfg, &hd, sweep, trial, &e),
    }
}

/// Per-family outage of each design under draws with the moments `eval`,
/// sampled once per family and shared by all designs.
pub struct DesignEvaluation {
    pub method: String,
    pub r_s: f64,
    pub outage: Vec<(EveFamily, f64)>,
    pub histograms: Vec<(EveFamily, Vec<HistogramBin>)>,
}

impl DesignEvaluation {
    pub fn worst_outage(&self) -> f64 {
        self.outage.iter().map(|o| o.1).fold(0.0, f64::max)
    }
}

pub fn evaluate_designs(
    designs: &[(String, Design)],
    ch: &ChannelSet,
    p: &SystemParams,
    eval: &MomentModel,
    draw_seed: u64,
    draws: usize,
    bins: Option<usize>,
) -> Result<Vec<DesignEvaluation>> {
    let mut evals: Vec<DesignEvaluation> = designs
        .iter()
        .map(|(m, d)| DesignEvaluation {
            method: m.clone(),
            r_s: d.r_s,
            outage: Vec::new(),
            histograms: Vec::new(),
        })
        .collect();
    for family in EveFamily::ALL {
        let d = sample_ambiguous_eve(eval, family, draw_seed, draws)?;
        for ((_, design), ev) in designs.iter().zip(evals.iter_mut()) {
            let s = secrecy_samples(&design.pair, ch, p, &d)?;
            ev.outage.push((family, outage_rate(&s, design.r_s)));
            if let Some(b) = bins {
                ev.histograms.push((family, histogram(&s, b, design.r_s)));
            }
        }
    }
    Ok(evals)
}

fn robust_trial(cfg: &ExperimentConfig, trial: usize, out: &mut TrialOut) {
    let p = cfg.system.params();
    let (ch, draw_seed) = trial_channels(cfg.seed, trial, p.n_tx);
    let mm = cfg.moments.model(p.n_tx);
    let sweep = mm.epsilon;
    let mut designs: Vec<(String, Design)> = Vec::new();
    let mut solve = |method: &str, model: &MomentModel, out: &mut TrialOut| match robust_dc_solve(
        &ch,
        &p,
        model,
        cfg.robust.tol,
        cfg.robust.max_iter,
    ) {
        Ok(r) => {
            out.push(cfg, method, sweep, trial, "r_s", r.r_s);
            out.push(cfg, method, sweep, trial, "dc_iterations", r.dc_trace.len() as f64);
            out.push(cfg, method, sweep, trial, "newton_steps", r.newton_steps as f64);
            out.push(
                cfg,
                method,
                sweep,
                trial,
                "audit_pass",
                f64::from(u8::from(r.audit.passes())),
            );
            designs.push((method.to_string(), r.design()));
        }
        Err(e) => out.fail(cfg, method, sweep, trial, &e),
    };
    solve("robust", &mm, out);
    if cfg.kind == ExperimentKind::RobustUncertainMoment {
        solve("robust_tau0", &mm.with_radii(0.0, 0.0), out);
    }
    match nonrobust_design(&ch, &p, &mm) {
        Ok((pair, r_s)) => {
            out.push(cfg, "nonrobust", sweep, trial, "r_s", r_s);
            designs.push(("nonrobust".to_string(), Design { pair, r_s }));
        }
        Err(e) => out.fail(cfg, "nonrobust", sweep, trial, &e),
    }
    // Designs with radii are checked against a distribution whose moments are
    // off by those radii; exact-moment designs against the estimates.
    let eval = match cfg.kind {
        ExperimentKind::RobustExactMoment => mm.clone(),
        _ if mm.max_tau1() > 0.0 || mm.max_tau2() > 0.0 => mm.perturbed(),
        _ => mm.clone(),
    };
    let bins = (trial == 0 && cfg.kind != ExperimentKind::OutagePerChannel).then_some(cfg.robust.histogram_bins);
    match evaluate_designs(&designs, &ch, &p, &eval, draw_seed, cfg.robust.draws, bins) {
        Ok(evals) => {
            for ev in evals {
                if cfg.kind != ExperimentKind::OutagePerChannel {
                    for (family, rate) in &ev.outage {
                        out.push(
                            cfg,
                            &ev.method,
                            sweep,
                            trial,
                            &format!("outage_{}", family.name()),
                            *rate,
                        );
                    }
                }
                let worst = ev.worst_outage();
                out.push(cfg, &ev.method, sweep, trial, "worst_outage", worst);
                out.push(
                    cfg,
                    &ev.method,
                    sweep,
                    trial,
                    "violation",
                    f64::from(u8::from(worst > mm.epsilon)),
                );
                if !ev.histograms.is_empty() {
                    out.histograms.push(HistogramSet {
                        method: ev.method,
                        trial,
                        r_s: ev.r_s,
                        families: ev.histograms,
                    });
                }
            }
        }
        Err(e) => out.fail(cfg, "evaluation", sweep, trial, &e),
    }
}

/// Certified rate at one outage threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    /// `None` when the design failed; the message is in `error`.
    pub r_s: Option<f64>,
    pub error: Option<String>,
}

/// Robust design over a grid of thresholds. The restriction itself is never
/// empty (Eve's SNR slack is unbounded), so a threshold counts as feasible
/// when the certified rate is positive.
pub fn epsilon_sweep(
    ch: &ChannelSet,
    p: &SystemParams,
    mm: &MomentModel,
    grid: &[f64],
    tol: f64,
    max_iter: usize,
) -> Vec<EpsilonPoint> {
    grid.par_iter()
        .map(
            |&epsilon| match robust_dc_solve(ch, p, &mm.with_epsilon(epsilon), tol, max_iter) {
                Ok(r) => EpsilonPoint {
                    epsilon,
                    r_s: Some(r.r_s),
                    error: None,
                },
                Err(e) => EpsilonPoint {
                    epsilon,
                    r_s: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect()
}

pub fn smallest_feasible_epsilon(points: &[EpsilonPoint]) -> Option<f64> {
    points
        .iter()
        .filter(|pt| pt.r_s.is_some_and(|r| r > 0.0))
        .map(|pt| pt.epsilon)
        .min_by(f64::total_cmp)
}
