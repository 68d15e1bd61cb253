//! Datasets, experiment metadata, synthetic stand-ins, and output files.
//!
//! A dataset is a CSV file
//!
//! ```text
//! # comment lines start with '#'
//! t_km_per_gev,p,dt,dp[,group]
//! 16250,0.32,1600,0.05,EH1
//! ```
//!
//! with an optional key-value sidecar `<stem>.meta.toml` next to it carrying
//! the label, flavor channel and experiment ranges.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gksl::{build_liouvillian, evolve, flavor_hamiltonian, mass_basis_dephasing, DensityMatrix};
use crate::lgi::{DataPoint, Triad};
use crate::montecarlo::{PseudoPoint, TrialDistribution};
use crate::oscillation::{Flavor, FlavorChannel, OscillationParams, Oscillator, TimeParameter};

pub const CSV_HEADER: [&str; 4] = ["t_km_per_gev", "p", "dt", "dp"];
pub const GROUP_COLUMN: &str = "group";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceType {
    Reactor,
    Accelerator,
}

/// Descriptive experiment ranges. Baselines in km, energies in GeV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentMeta {
    pub baseline_km: (f64, f64),
    pub energy_gev: (f64, f64),
    pub source: SourceType,
}

impl ExperimentMeta {
    pub fn new(baseline_km: (f64, f64), energy_gev: (f64, f64), source: SourceType) -> Result<Self> {
        let meta = Self {
            baseline_km,
            energy_gev,
            source,
        };
        meta.validate()?;
        Ok(meta)
    }

    /// Ranges must be positive and ordered. A single fixed baseline
    /// (`low == high`) is allowed as long as the L/E range is non-degenerate.
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("baseline_km", self.baseline_km), ("energy_gev", self.energy_gev)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
                return Err(Error::validation(name, format!("invalid range [{lo}, {hi}]")));
            }
        }
        let (t0, t1) = self.t_range();
        if !(t1 > t0) {
            return Err(Error::validation("energy_gev", "L/E range is degenerate"));
        }
        Ok(())
    }

    /// `(L_min / E_max, L_max / E_min)` in km/GeV.
    pub fn t_range(&self) -> (f64, f64) {
        (
            self.baseline_km.0 / self.energy_gev.1,
            self.baseline_km.1 / self.energy_gev.0,
        )
    }

    pub fn daya_bay() -> Self {
        Self {
            baseline_km: (0.364, 1.912),
            energy_gev: (0.001, 0.008),
            source: SourceType::Reactor,
        }
    }

    pub fn minos() -> Self {
        Self {
            baseline_km: (735.0, 735.0),
            energy_gev: (0.5, 50.0),
            source: SourceType::Accelerator,
        }
    }

    pub fn kamland() -> Self {
        Self {
            baseline_km: (180.0, 180.0),
            energy_gev: (0.002, 0.010),
            source: SourceType::Reactor,
        }
    }
}

/// Measured (or synthetic) survival probabilities of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub label: String,
    pub channel: FlavorChannel,
    pub points: Vec<DataPoint<f64>>,
    /// Optional per-point detector/hall tag.
    pub groups: Option<Vec<String>>,
    pub meta: Option<ExperimentMeta>,
}

impl Dataset {
    pub fn new(label: impl Into<String>, channel: FlavorChannel, points: Vec<DataPoint<f64>>) -> Result<Self> {
        let d = Self {
            label: label.into(),
            channel,
            points,
            groups: None,
            meta: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        self.groups = Some(groups);
        self.validate()?;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: ExperimentMeta) -> Result<Self> {
        meta.validate()?;
        self.meta = Some(meta);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::validation("points", "dataset is empty"));
        }
        for (row, p) in self.points.iter().enumerate() {
            p.validate().map_err(|e| match e {
                Error::Validation { field, message } => Error::Validation {
                    field,
                    message: format!("row {}: {message}", row + 1),
                },
                other => other,
            })?;
        }
        if let Some(g) = &self.groups {
            if g.len() != self.points.len() {
                return Err(Error::validation(GROUP_COLUMN, "one group key per point required"));
            }
        }
        if let Some(m) = &self.meta {
            m.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p).collect()
    }

    pub fn group_slice(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    label: String,
    channel: String,
    #[serde(default)]
    antineutrino: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_km: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy_gev: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<SourceType>,
}

/// `data/kamland.csv` -> `data/kamland.meta.toml`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.toml")
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Loads a dataset CSV plus its sidecar if one exists. Without a sidecar the
/// label is the file stem and the channel is electron-neutrino survival.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (points, groups) = parse_dataset_csv(&text)?;

    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    let mut dataset = Dataset {
        label: stem,
        channel: FlavorChannel::survival(Flavor::E, false),
        points,
        groups,
        meta: None,
    };
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        apply_sidecar(&mut dataset, &text)?;
    }
    dataset.validate()?;
    Ok(dataset)
}

fn apply_sidecar(dataset: &mut Dataset, text: &str) -> Result<()> {
    let side: Sidecar = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start].lines().count().max(1) as u64)
            .unwrap_or(0);
        parse_error(line, format!("metadata: {}", e.message()))
    })?;
    let mut channel: FlavorChannel = side.channel.parse()?;
    channel.antineutrino = side.antineutrino;
    dataset.label = side.label;
    dataset.channel = channel;
    dataset.meta = match (side.baseline_km, side.energy_gev, side.source) {
        (Some(l), Some(e), Some(s)) => Some(ExperimentMeta::new((l[0], l[1]), (e[0], e[1]), s)?),
        (None, None, None) => None,
        _ => {
            return Err(Error::validation(
                "metadata",
                "baseline_km, energy_gev and source must be given together",
            ))
        }
    };
    Ok(())
}

/// Data points plus the optional `group` column.
pub type ParsedRows = (Vec<DataPoint<f64>>, Option<Vec<String>>);

/// Parses the CSV body of a dataset; row order is preserved.
pub fn parse_dataset_csv(text: &str) -> Result<ParsedRows> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_group = match names.as_slice() {
        [a, b, c, d] if [*a, *b, *c, *d] == CSV_HEADER => false,
        [a, b, c, d, g] if [*a, *b, *c, *d] == CSV_HEADER && *g == GROUP_COLUMN => true,
        _ => {
            return Err(parse_error(
                header.position().map_or(1, |p| p.line()),
                format!("expected header t_km_per_gev,p,dt,dp[,group], got {}", names.join(",")),
            ))
        }
    };

    let mut points = Vec::new();
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut num = [0.0; 4];
        for (slot, (name, field)) in num.iter_mut().zip(CSV_HEADER.iter().zip(record.iter())) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_error(line, format!("{name}: cannot parse {field:?} as a number")))?;
        }
        let point = DataPoint {
            t: num[0],
            p: num[1],
            dt: num[2],
            dp: num[3],
        };
        point.validate().map_err(|e| match e {
            Error::Validation { field, message } => Error::Validation {
                field,
                message: format!("line {line}: {message}"),
            },
            other => other,
        })?;
        points.push(point);
        if has_group {
            groups.push(record.get(4).unwrap_or_default().to_owned());
        }
    }
    if points.is_empty() {
        return Err(Error::validation("points", "dataset is empty"));
    }
    Ok((points, has_group.then_some(groups)))
}

pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&CSV_HEADER.join(","));
    if dataset.groups.is_some() {
        out.push(',');
        out.push_str(GROUP_COLUMN);
    }
    out.push('\n');
    for (row, p) in dataset.points.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}", p.t, p.p, p.dt, p.dp));
        if let Some(g) = &dataset.groups {
            out.push(',');
            out.push_str(&g[row]);
        }
        out.push('\n');
    }
    out
}

fn sidecar_text(dataset: &Dataset) -> String {
    let side = Sidecar {
        label: dataset.label.clone(),
        channel: dataset.channel.to_string(),
        antineutrino: dataset.channel.antineutrino,
        baseline_km: dataset.meta.map(|m| [m.baseline_km.0, m.baseline_km.1]),
        energy_gev: dataset.meta.map(|m| [m.energy_gev.0, m.energy_gev.1]),
        source: dataset.meta.map(|m| m.source),
    };
    toml::to_string(&side).expect("sidecar serializes")
}

/// Writes the dataset CSV and its metadata sidecar.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, dataset_to_csv(dataset).as_bytes())?;
    write_atomic(&sidecar_path(path), sidecar_text(dataset).as_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// How synthetic points are smeared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// `dt = time_resolution * t`.
    pub time_resolution: f64,
    /// Absolute 1 sigma on `p`.
    pub probability_sigma: f64,
    /// Draw `p` from a Gaussian around the prediction (clamped to [0, 1]).
    pub perturb: bool,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            time_resolution: 0.0,
            probability_sigma: 0.0,
            perturb: false,
        }
    }
}

/// Synthetic survival dataset on a log-spaced L/E grid spanning the
/// experiment's range.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub label: String,
    pub channel: FlavorChannel,
    pub meta: ExperimentMeta,
    pub points: usize,
    pub noise: NoiseModel,
    /// Mass-basis dephasing rate per km/GeV; zero means coherent oscillation.
    pub dephasing_rate: f64,
    pub seed: u64,
}

pub fn generate_synthetic(params: &OscillationParams<f64>, spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.points < 3 {
        return Err(Error::domain("synthetic datasets need at least 3 points"));
    }
    spec.meta.validate()?;
    if !(spec.dephasing_rate >= 0.0 && spec.dephasing_rate.is_finite()) {
        return Err(Error::domain("dephasing rate must be >= 0"));
    }
    let noise = spec.noise;
    if !(noise.time_resolution >= 0.0 && noise.probability_sigma >= 0.0) {
        return Err(Error::domain("noise widths must be >= 0"));
    }
    let (t0, t1) = spec.meta.t_range();
    let grid: Vec<f64> = (0..spec.points)
        .map(|i| t0 * (t1 / t0).powf(i as f64 / (spec.points - 1) as f64))
        .collect();

    let truth: Vec<f64> = if spec.dephasing_rate == 0.0 {
        let osc = Oscillator::new(params, spec.channel)?;
        grid.iter()
            .map(|&t| Ok(osc.probability(TimeParameter::new(t)?)))
            .collect::<Result<_>>()?
    } else {
        let h = flavor_hamiltonian(params, spec.channel.antineutrino)?;
        let d = mass_basis_dephasing(params, spec.channel.antineutrino, spec.dephasing_rate)?;
        let gen = build_liouvillian(&h, &d)?;
        let rho0 = DensityMatrix::basis_state(3, spec.channel.initial.index())?;
        let det = spec.channel.detected.index();
        grid.iter()
            .map(|&t| Ok(evolve(&gen, &rho0, t)?.matrix()[(det, det)].re))
            .collect::<Result<_>>()?
    };

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let points = grid
        .iter()
        .zip(truth)
        .map(|(&t, p)| {
            let p = if noise.perturb {
                (p + noise.probability_sigma * normal.sample(&mut rng)).clamp(0.0, 1.0)
            } else {
                p.clamp(0.0, 1.0)
            };
            DataPoint::new(t, p, noise.time_resolution * t, noise.probability_sigma)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(spec.label.clone(), spec.channel, points)?.with_meta(spec.meta)
}

/// Comparison block of a [`Report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub theoretical_confidence: Option<f64>,
    pub ratio: Option<f64>,
}

/// JSON summary of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub label: String,
    pub replications: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub mu: f64,
    pub sigma: f64,
    /// `mu / sigma`; `null` when `sigma = 0`.
    pub confidence: Option<f64>,
    pub comparison: Option<ComparisonSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

pub fn save_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(e.line() as u64, e.to_string()))
}

/// A named table of numeric columns for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotSeries {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match columns");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn save_plotdata(series: &PlotSeries, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), series.to_csv().as_bytes())
}

/// Point predictions on a log grid.
pub fn survival_curve(osc: &Oscillator<f64>, t_min: f64, t_max: f64, points: usize) -> Result<PlotSeries> {
    let mut s = PlotSeries::new("survival_curve", &["t_km_per_gev", "p"]);
    for t in log_grid(t_min, t_max, points)? {
        s.push(vec![t, osc.probability(TimeParameter::new(t)?)]);
    }
    Ok(s)
}

/// `points` log-spaced values from `t_min` to `t_max` inclusive.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) {
        return Err(Error::domain(format!("invalid grid range [{t_min}, {t_max}]")));
    }
    if points == 0 {
        return Err(Error::domain("grid needs at least one point"));
    }
    if points == 1 {
        return Ok(vec![t_min]);
    }
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                t_max
            } else {
                t_min * (t_max / t_min).powf(i as f64 / (points - 1) as f64)
            }
        })
        .collect())
}

/// Flattened predictions: for each point, one flat segment at the bin
/// average over `[t - dt, t + dt]`, as two rows (segment start and end).
pub fn stair_steps(dataset: &Dataset, osc: &Oscillator<f64>) -> Result<PlotSeries> {
    let mut s = PlotSeries::new("flattened", &["segment", "t_km_per_gev", "p_flat"]);
    for (i, p) in dataset.points.iter().enumerate() {
        let flat = osc.bin_average(p.t, p.dt)?;
        s.push(vec![i as f64, (p.t - p.dt).max(0.0), flat]);
        s.push(vec![i as f64, p.t + p.dt, flat]);
    }
    Ok(s)
}

/// `K3` of each correlated triad in one pseudodata replica, against `tau_k`.
pub fn k3_scatter(pseudo: &[PseudoPoint], triads: &[Triad]) -> PlotSeries {
    let mut s = PlotSeries::new("k3_scatter", &["tau_i", "tau_j", "tau_k", "k3"]);
    for t in triads {
        let (a, b, c) = (pseudo[t.i], pseudo[t.j], pseudo[t.k]);
        s.push(vec![a.tau, b.tau, c.tau, crate::lgi::k3(a.pi, b.pi, c.pi)]);
    }
    s
}

/// Violation-count histogram as `(count, frequency)` rows.
pub fn histogram_series(dist: &TrialDistribution) -> PlotSeries {
    let mut s = PlotSeries::new("violation_histogram", &["count", "frequency"]);
    let hist: &BTreeMap<usize, usize> = dist.histogram();
    for (&count, &freq) in hist {
        s.push(vec![count as f64, freq as f64]);
    }
    s
}
