//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for data or parameter errors (reported as one
//! JSON object on stderr), 2 for usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::constants::{DEFAULT_EPSILON, DEFAULT_REPLICATIONS, DEFAULT_SEED};
use crate::data_io::{
    histogram_series, k3_scatter, load_dataset, log_grid, save_dataset, save_plotdata, save_report,
    stair_steps, survival_curve, write_atomic, ComparisonSummary, Dataset, ExperimentMeta, NoiseModel,
    PlotSeries, Report, SyntheticSpec,
};
use crate::error::Error;
use crate::gksl::{correlation, evolve, measure, preserves_incoherence, SystemDescription};
use crate::lgi::{find_correlated_triads_grouped, relative_mismatch, triad_k3, TriadConfig};
use crate::montecarlo::{self, derive_seed, replication_rng, resample, ClampPolicy, RunConfig, TrialDistribution};
use crate::oscillation::{FlavorChannel, OscillationParams, Oscillator, TimeParameter};

const OUT_DIR_ENV: &str = "NULGI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "nulgi", version, about = "Leggett-Garg coherence tests for neutrino oscillation data")]
pub struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oscillation probability on a log-spaced L/E grid.
    Predict(PredictArgs),
    /// Bin-averaged predictions: per-point steps for a dataset, or a grid.
    Flatten(FlattenArgs),
    /// Evolve a system from a matrix description file and measure it.
    GkslDemo(GkslDemoArgs),
    /// List the correlated triads of a dataset.
    Triads(TriadsArgs),
    /// Pseudodata violation-count distribution and confidence.
    ViolationTest(ViolationTestArgs),
    /// Experimental versus theoretical confidence.
    Compare(CompareArgs),
    /// Write a synthetic dataset modeled on one experiment.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ParamsArg {
    /// Oscillation parameter file (TOML); defaults to the global best fit.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
}

impl ParamsArg {
    fn load(&self) -> crate::Result<OscillationParams<f64>> {
        match &self.params {
            Some(path) => OscillationParams::load(path),
            None => Ok(OscillationParams::best_fit()),
        }
    }
}

#[derive(Debug, Args)]
pub struct ChannelArg {
    /// Flavor channel such as ee, mumu, emu.
    #[arg(long, default_value = "ee", value_parser = parse_channel)]
    pub channel: FlavorChannel,
    /// Antineutrino mode.
    #[arg(long)]
    pub anti: bool,
}

impl ChannelArg {
    fn channel(&self) -> FlavorChannel {
        FlavorChannel {
            antineutrino: self.anti,
            ..self.channel
        }
    }
}

fn parse_channel(s: &str) -> Result<FlavorChannel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Smallest L/E in km/GeV.
    #[arg(long, default_value_t = 1.0)]
    pub t_min: f64,
    /// Largest L/E in km/GeV.
    #[arg(long, default_value_t = 1.0e5)]
    pub t_max: f64,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub params: ParamsArg,
    #[command(flatten)]
    pub channel: ChannelArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    #[command(flatten)]
    pub params: ParamsArg,
    /// Dataset whose points define the bins `[t - dt, t + dt]`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["channel", "anti", "resolution"])]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub channel: ChannelArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Bin half-width as a fraction of t (grid mode).
    #[arg(long, default_value_t = 0.1)]
    pub resolution: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GkslDemoArgs {
    /// Matrix description file.
    #[arg(long, value_name = "FILE")]
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TriadArgs {
    /// Relative tolerance of `t_i + t_j = t_k`.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Require i != j.
    #[arg(long)]
    pub no_self_pairs: bool,
    /// Only form triads within one group tag.
    #[arg(long)]
    pub within_group: bool,
}

impl TriadArgs {
    fn config(&self) -> crate::Result<TriadConfig<f64>> {
        let mut cfg = TriadConfig::new(self.epsilon)?;
        cfg.allow_self_pairs = !self.no_self_pairs;
        cfg.allow_cross_group = !self.within_group;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TriadsArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub triads: TriadArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub params: ParamsArg,
    #[command(flatten)]
    pub triads: TriadArgs,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub replications: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Clamp resampled probabilities into [0, 1].
    #[arg(long)]
    pub clamp: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

impl TrialArgs {
    fn run_config(&self, seed: u64) -> crate::Result<RunConfig> {
        Ok(RunConfig {
            replications: self.replications,
            seed,
            triads: self.triads.config()?,
            clamp: if self.clamp {
                ClampPolicy::UnitInterval
            } else {
                ClampPolicy::None
            },
            substitute: None,
        })
    }
}

#[derive(Debug, Args)]
pub struct ViolationTestArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
    /// Replace each p by its bin-averaged prediction before resampling.
    #[arg(long)]
    pub theoretical: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    DayaBay,
    Minos,
    Kamland,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::DayaBay => "daya-bay",
            Preset::Minos => "minos",
            Preset::Kamland => "kamland",
        }
    }

    fn meta(self) -> ExperimentMeta {
        match self {
            Preset::DayaBay => ExperimentMeta::daya_bay(),
            Preset::Minos => ExperimentMeta::minos(),
            Preset::Kamland => ExperimentMeta::kamland(),
        }
    }

    fn channel(self) -> FlavorChannel {
        match self {
            Preset::DayaBay | Preset::Kamland => FlavorChannel::survival(crate::oscillation::Flavor::E, true),
            Preset::Minos => FlavorChannel::survival(crate::oscillation::Flavor::Mu, false),
        }
    }

    /// `(points, time resolution, probability sigma)`.
    fn defaults(self) -> (usize, f64, f64) {
        match self {
            Preset::DayaBay => (40, 0.03, 0.005),
            Preset::Minos => (20, 0.15, 0.05),
            Preset::Kamland => (15, 0.06, 0.04),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[command(flatten)]
    pub params: ParamsArg,
    #[arg(long)]
    pub points: Option<usize>,
    /// Relative 1 sigma on t.
    #[arg(long)]
    pub time_resolution: Option<f64>,
    /// Absolute 1 sigma on p.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Do not scatter p around the prediction.
    #[arg(long)]
    pub exact: bool,
    /// Mass-basis dephasing rate per km/GeV.
    #[arg(long, default_value_t = 0.0)]
    pub dephasing: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub label: Option<String>,
    /// Output CSV (a `.meta.toml` sidecar is written next to it). Defaults to
    /// `<preset>.csv` in the directory named by the output-directory variable.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Failure of one CLI invocation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("{}", json!({"error": "usage", "message": msg}));
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Run(Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

/// Writes `text` to `out`, or to `stdout` when no path is given.
fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult {
    match out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => stdout.write_all(text.as_bytes()).map_err(io_err),
    }
}

fn print_json(stdout: &mut dyn Write, value: &serde_json::Value) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    writeln!(stdout, "{text}").map_err(io_err)
}

fn out_dir(out: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("--out DIR is required (or set {OUT_DIR_ENV})")))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Predict(a) => predict(a, cli.json, stdout),
        Command::Flatten(a) => flatten(a, cli.json, stdout),
        Command::GkslDemo(a) => gksl_demo(a, cli.json, stdout),
        Command::Triads(a) => triads(a, cli.json, stdout),
        Command::ViolationTest(a) => violation_test(a, cli.json, stdout),
        Command::Compare(a) => compare(a, cli.json, stdout),
        Command::Synth(a) => synth(a, cli.json, stdout),
    }
}

/// CSV to `--out`; with `--json` the series goes to stdout as JSON instead
/// (or a short summary when a file was written).
fn finish_series(series: &PlotSeries, out: Option<&Path>, json: bool, stdout: &mut dyn Write) -> CliResult {
    if json {
        if let Some(path) = out {
            save_plotdata(series, path)?;
        }
        return print_json(
            stdout,
            &json!({
                "series": series.name,
                "columns": series.columns,
                "rows": if out.is_some() { serde_json::Value::Null } else { json!(series.rows) },
                "row_count": series.rows.len(),
                "out": out.map(|p| p.display().to_string()),
            }),
        );
    }
    emit(out, &series.to_csv(), stdout)
}

fn predict(a: &PredictArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let params = a.params.load()?;
    let osc = Oscillator::new(&params, a.channel.channel())?;
    let series = survival_curve(&osc, a.grid.t_min, a.grid.t_max, a.grid.points)?;
    finish_series(&series, a.out.as_deref(), json, stdout)
}

fn flatten(a: &FlattenArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let params = a.params.load()?;
    let series = match &a.data {
        Some(path) => {
            let data = load_dataset(path)?;
            stair_steps(&data, &Oscillator::new(&params, data.channel)?)?
        }
        None => {
            if !(a.resolution >= 0.0 && a.resolution.is_finite()) {
                return Err(Error::Validation {
                    field: "resolution".into(),
                    message: "must be finite and >= 0".into(),
                }
                .into());
            }
            let osc = Oscillator::new(&params, a.channel.channel())?;
            let mut s = PlotSeries::new("flattened_grid", &["t_km_per_gev", "p", "p_flat"]);
            for t in log_grid(a.grid.t_min, a.grid.t_max, a.grid.points)? {
                let p = osc.probability(TimeParameter::new(t)?);
                s.push(vec![t, p, osc.bin_average(t, a.resolution * t)?]);
            }
            s
        }
    };
    finish_series(&series, a.out.as_deref(), json, stdout)
}

fn gksl_demo(a: &GkslDemoArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let sys = SystemDescription::<f64>::load(&a.system)?;
    let gen = sys.generator()?;
    let pvm = &sys.measurement;
    let two_level = pvm.m() == 1 && pvm.n() == 1;
    if !(a.t_min >= 0.0 && a.t_max >= a.t_min && a.t_max.is_finite()) || a.points == 0 {
        return Err(Error::Domain(format!("invalid time range [{}, {}] with {} points", a.t_min, a.t_max, a.points)).into());
    }
    let mut columns = vec!["t", "p_plus", "expectation", "coherence", "min_eigenvalue"];
    if two_level {
        columns.push("correlation");
    }
    let mut s = PlotSeries::new("gksl_demo", &columns);
    for i in 0..a.points {
        let t = if a.points == 1 {
            a.t_min
        } else {
            a.t_min + (a.t_max - a.t_min) * i as f64 / (a.points - 1) as f64
        };
        let rho = evolve(&gen, &sys.state, t)?;
        let m = measure(pvm, &rho)?;
        let mut row = vec![t, m.p_plus, m.expectation, pvm.coherence(rho.matrix()), rho.min_eigenvalue()];
        if two_level {
            row.push(correlation(&gen, pvm, &sys.state, 0.0, t)?);
        }
        s.push(row);
    }
    let preserving = preserves_incoherence(&gen.evolution_map(a.t_max)?, pvm, 1e-9);
    if json {
        if let Some(path) = &a.out {
            save_plotdata(&s, path)?;
        }
        return print_json(
            stdout,
            &json!({
                "dim": gen.dim(),
                "m": pvm.m(),
                "n": pvm.n(),
                "dissipators": sys.dissipators.len(),
                "preserves_incoherence": preserving,
                "columns": s.columns,
                "rows": if a.out.is_some() { serde_json::Value::Null } else { json!(s.rows) },
                "out": a.out.as_ref().map(|p| p.display().to_string()),
            }),
        );
    }
    emit(a.out.as_deref(), &s.to_csv(), stdout)?;
    if a.out.is_some() {
        writeln!(stdout, "preserves incoherence at t = {}: {preserving}", a.t_max).map_err(io_err)?;
    }
    Ok(())
}

fn triads(a: &TriadsArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let data = load_dataset(&a.data)?;
    let cfg = a.triads.config()?;
    let times = data.times();
    let probs = data.probabilities();
    let found = find_correlated_triads_grouped(&times, data.group_slice(), &cfg);
    let mut s = PlotSeries::new("triads", &["i", "j", "k", "t_i", "t_j", "t_k", "rel_err", "k3"]);
    for t in &found {
        s.push(vec![
            t.i as f64,
            t.j as f64,
            t.k as f64,
            times[t.i],
            times[t.j],
            times[t.k],
            relative_mismatch(times[t.i], times[t.j], times[t.k]),
            triad_k3(t, &probs)?,
        ]);
    }
    finish_series(&s, a.out.as_deref(), json, stdout)
}

fn has_nominal_triads(data: &Dataset, cfg: &TriadConfig<f64>) -> bool {
    !find_correlated_triads_grouped(&data.times(), data.group_slice(), cfg).is_empty()
}

const NO_TRIADS: &str = "no correlated triads at this tolerance";

fn confidence_text(c: Option<f64>) -> String {
    match c {
        Some(c) => format!("{c}"),
        None => "undefined".to_string(),
    }
}

fn write_trial_outputs(dir: &Path, suffix: &str, dist: &TrialDistribution, sample: &Dataset, cfg: &RunConfig) -> CliResult {
    save_plotdata(&histogram_series(dist), dir.join(format!("distribution{suffix}.csv")))?;
    // K3 scatter of the first replica, for inspection.
    let mut rng = replication_rng(cfg.seed, 0);
    let pseudo = resample(sample, &mut rng, cfg.clamp)?;
    let taus: Vec<f64> = pseudo.iter().map(|p| p.tau).collect();
    let found = find_correlated_triads_grouped(&taus, sample.group_slice(), &cfg.triads);
    save_plotdata(&k3_scatter(&pseudo, &found), dir.join(format!("k3_scatter{suffix}.csv")))?;
    Ok(())
}

fn violation_test(a: &ViolationTestArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let t = &a.trial;
    let dir = out_dir(&t.out)?;
    let data = load_dataset(&t.data)?;
    let params = a.theoretical.then(|| t.params.load()).transpose()?;
    let cfg = t.run_config(t.seed)?;
    let sample = match &params {
        Some(p) => montecarlo::theoretical_substitute(&data, p)?,
        None => data.clone(),
    };
    let dist = montecarlo::run_trials(&sample, &cfg)?;
    write_trial_outputs(&dir, "", &dist, &sample, &cfg)?;
    let notice = (!has_nominal_triads(&data, &cfg.triads)).then(|| NO_TRIADS.to_string());
    let report = Report {
        label: data.label.clone(),
        replications: dist.replications(),
        seed: t.seed,
        epsilon: t.triads.epsilon,
        mu: dist.mu(),
        sigma: dist.sigma(),
        confidence: dist.confidence(),
        comparison: None,
        notice,
    };
    save_report(&report, dir.join("summary.json"))?;
    if json {
        return print_json(stdout, &serde_json::to_value(&report).expect("report serializes"));
    }
    if let Some(n) = &report.notice {
        writeln!(stdout, "notice: {n}").map_err(io_err)?;
    }
    writeln!(stdout, "mu: {} sigma: {}", report.mu, report.sigma).map_err(io_err)?;
    writeln!(stdout, "confidence: {}", confidence_text(report.confidence)).map_err(io_err)
}

fn compare(a: &CompareArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let t = &a.trial;
    let dir = out_dir(&t.out)?;
    let data = load_dataset(&t.data)?;
    let params = t.params.load()?;
    let exp_cfg = t.run_config(derive_seed(t.seed, 0))?;
    let theo_cfg = t.run_config(derive_seed(t.seed, 1))?;
    let theo_data = montecarlo::theoretical_substitute(&data, &params)?;

    let exp = montecarlo::run_trials(&data, &exp_cfg)?;
    let theo = montecarlo::run_trials(&theo_data, &theo_cfg)?;
    write_trial_outputs(&dir, "_experimental", &exp, &data, &exp_cfg)?;
    write_trial_outputs(&dir, "_theoretical", &theo, &theo_data, &theo_cfg)?;

    let ratio = match montecarlo::compare(&exp, &theo) {
        Ok(r) => Some(r),
        Err(Error::Comparison(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let notice = if !has_nominal_triads(&data, &exp_cfg.triads) {
        Some(NO_TRIADS.to_string())
    } else if ratio.is_none() {
        Some("ratio undefined: a confidence is undefined or zero".to_string())
    } else {
        None
    };
    let report = Report {
        label: data.label.clone(),
        replications: exp.replications(),
        seed: t.seed,
        epsilon: t.triads.epsilon,
        mu: exp.mu(),
        sigma: exp.sigma(),
        confidence: exp.confidence(),
        comparison: Some(ComparisonSummary {
            theoretical_confidence: theo.confidence(),
            ratio,
        }),
        notice,
    };
    save_report(&report, dir.join("summary.json"))?;
    if json {
        return print_json(stdout, &serde_json::to_value(&report).expect("report serializes"));
    }
    if let Some(n) = &report.notice {
        writeln!(stdout, "notice: {n}").map_err(io_err)?;
    }
    writeln!(stdout, "experimental confidence: {}", confidence_text(exp.confidence())).map_err(io_err)?;
    writeln!(stdout, "theoretical confidence: {}", confidence_text(theo.confidence())).map_err(io_err)?;
    writeln!(stdout, "ratio: {}", confidence_text(ratio)).map_err(io_err)
}

fn synth(a: &SynthArgs, json: bool, stdout: &mut dyn Write) -> CliResult {
    let params = a.params.load()?;
    let (points, resolution, sigma) = a.preset.defaults();
    let out = match &a.out {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(OUT_DIR_ENV).ok_or_else(|| {
                CliError::Usage(format!("--out FILE is required (or set {OUT_DIR_ENV})"))
            })?;
            PathBuf::from(dir).join(format!("{}.csv", a.preset.name()))
        }
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let spec = SyntheticSpec {
        label: a
            .label
            .clone()
            .unwrap_or_else(|| format!("synthetic {}", a.preset.name())),
        channel: a.preset.channel(),
        meta: a.preset.meta(),
        points: a.points.unwrap_or(points),
        noise: NoiseModel {
            time_resolution: a.time_resolution.unwrap_or(resolution),
            probability_sigma: a.sigma.unwrap_or(sigma),
            perturb: !a.exact,
        },
        dephasing_rate: a.dephasing,
        seed: a.seed,
    };
    let data = crate::data_io::generate_synthetic(&params, &spec)?;
    save_dataset(&data, &out)?;
    if json {
        return print_json(
            stdout,
            &json!({"label": data.label, "points": data.len(), "out": out.display().to_string()}),
        );
    }
    writeln!(stdout, "wrote {} points to {}", data.len(), out.display()).map_err(io_err)
}
