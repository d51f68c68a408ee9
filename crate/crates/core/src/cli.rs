//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::dispersion::DispersionMetric;
use crate::error::Error;
use crate::gradcheck::{
    check_grouping, check_score_loss, random_grouping_instance, random_scores, CheckOutcome, ScoreLoss,
    ScoreLossConfig, GRADCHECK_TOL,
};
use crate::grouping::{
    group_loss, GroupingObjective, GroupingParams, GroupingTable, MetaFeatureSet, Strategy, DEFAULT_EPSILON,
    DEFAULT_TAU,
};
use crate::io::{fmt_sig9, parse_ap_table, parse_features, parse_scores, write_features};
use crate::losses::{TclParams, DEFAULT_BETA_MINUS, DEFAULT_FOCAL_ALPHA, DEFAULT_FOCAL_GAMMA};
use crate::simlab::{self, histogram, histogram_csv, trace_csv, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "toprel",
    version,
    about = "Top-C classification and category grouping losses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a classification loss on a scores file.
    Loss(LossArgs),
    /// Evaluate the grouping loss on a feature matrix.
    Grouping(GroupingArgs),
    /// Compare analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Spread of per-class APs.
    Dispersion(DispersionArgs),
    /// Run gradient descent on synthetic meta-features.
    Simulate(SimulateArgs),
    /// Per-category histograms of a feature matrix.
    Hist(HistArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TclArgs {
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long = "beta-plus", default_value_t = 1.0)]
    pub beta_plus: f64,
    /// Threshold per false-class rank; a single value applies to every rank.
    #[arg(long = "beta-minus")]
    pub beta_minus: Vec<f64>,
    #[arg(long = "c", default_value_t = 2)]
    pub c: usize,
    #[arg(long = "focal-gamma", default_value_t = DEFAULT_FOCAL_GAMMA)]
    pub focal_gamma: f64,
    #[arg(long = "focal-alpha", default_value_t = DEFAULT_FOCAL_ALPHA)]
    pub focal_alpha: f64,
}

impl TclArgs {
    fn config(&self) -> Result<ScoreLossConfig, Failure> {
        if self.c < 2 {
            return Err(Failure::Usage(format!("--c must be at least 2, got {}", self.c)));
        }
        let ranks = self.c - 1;
        let beta_minus = match self.beta_minus.len() {
            0 => vec![DEFAULT_BETA_MINUS; ranks],
            1 => vec![self.beta_minus[0]; ranks],
            n if n == ranks => self.beta_minus.clone(),
            n => {
                return Err(Failure::Usage(format!(
                    "--beta-minus given {n} times but C = {} needs {ranks}",
                    self.c
                )))
            }
        };
        Ok(ScoreLossConfig {
            tcl: TclParams::new(self.beta_plus, beta_minus, self.eta, self.gamma, self.c)?,
            focal_gamma: self.focal_gamma,
            focal_alpha: self.focal_alpha,
        })
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// One of tcl, tcl2, bce, focal, ce.
    #[arg(value_parser = parse_score_loss)]
    pub loss: ScoreLoss,
    /// Scores file: `true_label=<index>` then one line of scores.
    pub scores: PathBuf,
    #[command(flatten)]
    pub params: TclArgs,
    /// Also print the gradient with respect to the scores.
    #[arg(long)]
    pub grad: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GroupingParamArgs {
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct GroupingArgs {
    /// Feature matrix: header `category,f0,...` then one row per category.
    pub features: PathBuf,
    /// Grouping table; defaults to the built-in Pascal VOC table.
    #[arg(long)]
    pub grouping: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy, default_value = "S-BEST")]
    pub strategy: Strategy,
    #[command(flatten)]
    pub params: GroupingParamArgs,
    /// Print the loss under every strategy.
    #[arg(long = "all-strategies")]
    pub all_strategies: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// tcl, tcl2, bce, focal, ce, grouping or all.
    #[arg(long, default_value = "all")]
    pub loss: String,
    /// Grouping strategy to check; every strategy when omitted.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Check a feature file instead of random instances.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Grouping table for --features; defaults to the Pascal VOC table.
    #[arg(long)]
    pub grouping: Option<PathBuf>,
    /// Check a scores file instead of random instances.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random instances per loss.
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    #[command(flatten)]
    pub params: TclArgs,
    #[command(flatten)]
    pub grouping_params: GroupingParamArgs,
    /// Perturb analytic gradients before comparing (negative control).
    #[arg(long = "corrupt-gradient", hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    /// AP table: lines of `class,ap` with an optional `class,ap` header.
    pub ap_file: PathBuf,
    /// std, cv, range or all.
    #[arg(long, default_value = "std")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "step-size")]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram range as `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    pub features: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Histogram range as `lo,hi`; defaults to the data's min and max.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_score_loss(s: &str) -> Result<ScoreLoss, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(Error::Io(e))
    }
}

/// Missing input files are argument errors; anything else while reading is
/// a runtime failure.
fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            Failure::Usage(format!("{}: no such file", path.display()))
        } else {
            Failure::Runtime(Error::invalid(format!("{}: {e}", path.display())))
        }
    })
}

fn load_grouping(path: Option<&Path>) -> Result<GroupingTable, Failure> {
    match path {
        None => Ok(GroupingTable::pascal_voc()),
        Some(p) => {
            Ok(GroupingTable::parse(&read_input(p)?).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?)
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("--range expects 'lo,hi', got '{s}'"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Parse `args` (program name first) and execute, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match &cli.command {
        Command::Loss(a) => cmd_loss(a, out),
        Command::Grouping(a) => cmd_grouping(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out, err),
        Command::Dispersion(a) => cmd_dispersion(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Hist(a) => cmd_hist(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn join_sig9(values: &[f64]) -> String {
    values.iter().map(|v| fmt_sig9(*v)).collect::<Vec<_>>().join(",")
}

fn cmd_loss(a: &LossArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = a.params.config()?;
    let path = a.scores.display().to_string();
    let scores = parse_scores(&read_input(&a.scores)?, &path)?;
    let v = crate::gradcheck::eval_score_loss(a.loss, &scores, &cfg)?;
    writeln!(out, "{}", fmt_sig9(v.value))?;
    if a.grad {
        writeln!(out, "{}", join_sig9(&v.gradient))?;
    }
    Ok(EXIT_OK)
}

fn grouping_params(a: &GroupingParamArgs, strategy: Strategy) -> Result<GroupingParams, Failure> {
    GroupingParams::new(a.tau, a.epsilon, strategy).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_grouping(a: &GroupingArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let table = load_grouping(a.grouping.as_deref())?;
    let params = grouping_params(&a.params, a.strategy)?;
    let x = parse_features(&read_input(&a.features)?, &a.features.display().to_string())?;
    let strategies: Vec<Strategy> = if a.all_strategies {
        Strategy::ALL.to_vec()
    } else {
        vec![a.strategy]
    };
    let objective = GroupingObjective::new(&x, &table, params)?;
    let flat = x.flatten();
    for s in &strategies {
        let p = GroupingParams::new(params.tau(), params.epsilon(), *s)?;
        let loss = GroupingObjective::new(&x, &table, p)?.value(&flat)?;
        writeln!(out, "loss[{s}]={}", fmt_sig9(loss))?;
    }
    let stats = objective.group_stats(&flat)?;
    writeln!(out, "group,size,u_group,delta_group,w_mean,w_std,w_mean_std,term")?;
    for (j, s) in stats.iter().enumerate() {
        writeln!(
            out,
            "{j},{},{},{},{},{},{},{}",
            s.size,
            fmt_sig9(s.u_group),
            fmt_sig9(s.delta_group),
            fmt_sig9(s.w_mean),
            fmt_sig9(s.w_std),
            fmt_sig9(s.w_mean_std),
            fmt_sig9(group_loss(j, &stats, &params)?)
        )?;
    }
    Ok(EXIT_OK)
}

/// Worst error and skip count accumulated over instances of one loss.
#[derive(Default)]
struct Tally {
    worst: Option<f64>,
    checked: usize,
    skipped: Vec<String>,
}

impl Tally {
    fn add(&mut self, o: CheckOutcome) {
        match o {
            CheckOutcome::Checked { max_rel_error } => {
                self.checked += 1;
                self.worst = Some(self.worst.map_or(max_rel_error, |w| w.max(max_rel_error)));
            }
            CheckOutcome::Skipped { reason } => self.skipped.push(reason),
        }
    }

    fn report(&self, label: &str, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<bool> {
        for reason in &self.skipped {
            writeln!(err, "warning: {label}: skipped singular point: {reason}")?;
        }
        match self.worst {
            Some(w) => {
                let pass = w < GRADCHECK_TOL;
                writeln!(
                    out,
                    "{label} max_rel_error={w:.3e} checked={} skipped={} {}",
                    self.checked,
                    self.skipped.len(),
                    if pass { "PASS" } else { "FAIL" }
                )?;
                Ok(pass)
            }
            None => {
                writeln!(out, "{label} SKIPPED skipped={}", self.skipped.len())?;
                Ok(true)
            }
        }
    }
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (score_losses, check_groups): (Vec<ScoreLoss>, bool) = match a.loss.as_str() {
        "all" => (ScoreLoss::ALL.to_vec(), true),
        "grouping" => (vec![], true),
        other => match other.parse::<ScoreLoss>() {
            Ok(l) => (vec![l], false),
            Err(_) => {
                return Err(Failure::Usage(format!(
                    "unknown loss selector '{other}' (expected tcl, tcl2, bce, focal, ce, grouping or all)"
                )))
            }
        },
    };
    let cfg = a.params.config()?;
    let strategies: Vec<Strategy> = a.strategy.map_or(Strategy::ALL.to_vec(), |s| vec![s]);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut all_pass = true;

    if !score_losses.is_empty() {
        let fixed = match &a.scores {
            Some(p) => Some(parse_scores(&read_input(p)?, &p.display().to_string())?),
            None => None,
        };
        for kind in score_losses {
            let mut tally = Tally::default();
            let instances = if fixed.is_some() { 1 } else { a.instances };
            for _ in 0..instances {
                let s = match &fixed {
                    Some(s) => s.clone(),
                    None => random_scores(&mut rng, 20)?,
                };
                let cfg = if kind == ScoreLoss::Tcl2 {
                    ScoreLossConfig {
                        tcl: TclParams::new(
                            cfg.tcl.beta_plus(),
                            vec![cfg.tcl.beta_minus()[0]],
                            cfg.tcl.eta(),
                            cfg.tcl.gamma(),
                            2,
                        )?,
                        ..cfg.clone()
                    }
                } else {
                    cfg.clone()
                };
                tally.add(check_score_loss(kind, &s, &cfg, a.corrupt)?);
            }
            all_pass &= tally.report(kind.name(), out, err)?;
        }
    }

    if check_groups {
        let fixed = match &a.features {
            Some(p) => {
                let x = parse_features(&read_input(p)?, &p.display().to_string())?;
                Some((x, load_grouping(a.grouping.as_deref())?))
            }
            None => None,
        };
        let instances: Vec<(MetaFeatureSet, GroupingTable)> = match fixed {
            Some(inst) => vec![inst],
            None => (0..a.instances)
                .map(|_| random_grouping_instance(&mut rng, 20, 64, 6))
                .collect::<Result<_, _>>()?,
        };
        for s in strategies {
            let params = grouping_params(&a.grouping_params, s)?;
            let mut tally = Tally::default();
            for (x, t) in &instances {
                tally.add(check_grouping(x, t, params, a.corrupt)?);
            }
            all_pass &= tally.report(&format!("grouping[{s}]"), out, err)?;
        }
    }

    writeln!(out, "{}", if all_pass { "RESULT PASS" } else { "RESULT FAIL" })?;
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_dispersion(a: &DispersionArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let metrics: Vec<DispersionMetric> = if a.metric == "all" {
        DispersionMetric::ALL.to_vec()
    } else {
        vec![a.metric.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?]
    };
    let table = parse_ap_table(&read_input(&a.ap_file)?, &a.ap_file.display().to_string())?;
    writeln!(out, "n={}", table.rows().len())?;
    writeln!(out, "mean={}", fmt_sig9(table.mean()))?;
    for m in metrics {
        writeln!(out, "{m}={}", fmt_sig9(table.dispersion(m)))?;
    }
    Ok(EXIT_OK)
}

/// On-disk simulation settings. Relative grouping paths resolve against the
/// config file's directory; `"voc"` selects the built-in table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub n_categories: Option<usize>,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_grouping")]
    pub grouping: String,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_init_sigma")]
    pub init_sigma: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_range")]
    pub range: [f64; 2],
}

fn default_feature_dim() -> usize {
    simlab::DEFAULT_SIM_FEATURE_DIM
}
fn default_grouping() -> String {
    "voc".into()
}
fn default_strategy() -> String {
    Strategy::Best.name().into()
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_step_size() -> f64 {
    1e-2
}
fn default_iterations() -> usize {
    500
}
fn default_seed() -> u64 {
    7
}
fn default_init_sigma() -> f64 {
    1.0
}
fn default_bins() -> usize {
    20
}
fn default_range() -> [f64; 2] {
    [-3.0, 3.0]
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = read_input(&a.config)?;
    let file: SimConfigFile =
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", a.config.display())))?;
    let grouping = if file.grouping == "voc" {
        GroupingTable::pascal_voc()
    } else {
        let base = a.config.parent().unwrap_or(Path::new("."));
        load_grouping(Some(&base.join(&file.grouping)))?
    };
    let strategy: Strategy = file.strategy.parse()?;
    let cfg = SimConfig {
        n_categories: file.n_categories.unwrap_or(grouping.categories().len()),
        feature_dim: file.feature_dim,
        grouping,
        grouping_params: GroupingParams::new(file.tau, file.epsilon, strategy)?,
        step_size: a.step_size.unwrap_or(file.step_size),
        iterations: a.steps.unwrap_or(file.iterations),
        seed: a.seed.unwrap_or(file.seed),
        init_sigma: file.init_sigma,
    };
    let bins = a.bins.unwrap_or(file.bins);
    let (lo, hi) = match &a.range {
        Some(r) => parse_range(r)?,
        None => (file.range[0], file.range[1]),
    };

    let outcome = simlab::simulate(&cfg)?;
    let hist_initial = histogram(&outcome.initial, bins, lo, hi)?;
    let hist_final = histogram(&outcome.features, bins, lo, hi)?;

    fs::create_dir_all(&a.out)?;
    let files = [
        ("trace.csv", trace_csv(&outcome.trace)),
        ("features_initial.csv", write_features(&outcome.initial)),
        ("features_final.csv", write_features(&outcome.features)),
        ("hist_initial.csv", histogram_csv(&outcome.initial, &hist_initial)),
        ("hist_final.csv", histogram_csv(&outcome.features, &hist_final)),
    ];
    for (name, body) in &files {
        fs::write(a.out.join(name), body)?;
    }

    let first = outcome.trace.first().expect("trace holds the initial row");
    let last = outcome.trace.last().expect("trace holds the initial row");
    let mut summary = String::new();
    writeln!(summary, "iterations={}", last.iteration).unwrap();
    writeln!(summary, "loss_initial={}", fmt_sig9(first.loss)).unwrap();
    writeln!(summary, "loss_final={}", fmt_sig9(last.loss)).unwrap();
    writeln!(summary, "mean_w_mean_std_initial={}", fmt_sig9(first.mean_w_mean_std())).unwrap();
    writeln!(summary, "mean_w_mean_std_final={}", fmt_sig9(last.mean_w_mean_std())).unwrap();
    write!(out, "{summary}")?;
    Ok(EXIT_OK)
}

fn cmd_hist(a: &HistArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let x = parse_features(&read_input(&a.features)?, &a.features.display().to_string())?;
    let (lo, hi) = match &a.range {
        Some(r) => parse_range(r)?,
        None => {
            let flat = x.flatten();
            let lo = flat.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        }
    };
    let counts = histogram(&x, a.bins, lo, hi)?;
    let csv = histogram_csv(&x, &counts);
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}
