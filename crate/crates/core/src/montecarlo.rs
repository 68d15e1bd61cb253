//! Pseudodata resampling and violation-count statistics.
//!
//! Each replication draws every point's `(t, p)` from independent Gaussians
//! with the quoted 1 sigma widths, re-identifies the correlated triads on the
//! resampled times, and counts the triads with `K3 > 0`. The distribution of
//! counts over replications gives `mu`, `sigma` and the confidence `mu / sigma`.
//!
//! Replication `r` draws from the ChaCha20 stream `r` of the master seed, so
//! results do not depend on how replications are scheduled across threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::constants::{DEFAULT_REPLICATIONS, DEFAULT_SEED};
use crate::data_io::Dataset;
use crate::error::{Error, Result};
use crate::lgi::{count_violations, TriadConfig};
use crate::oscillation::{OscillationParams, Oscillator};

/// Consecutive non-positive time draws tolerated for one point.
pub const MAX_TIME_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClampPolicy {
    /// Keep resampled probabilities as drawn.
    #[default]
    None,
    /// Clamp resampled probabilities into `[0, 1]`.
    UnitInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub replications: usize,
    pub seed: u64,
    pub triads: TriadConfig<f64>,
    pub clamp: ClampPolicy,
    /// Replace measured probabilities by bin-averaged predictions of these
    /// parameters before resampling.
    pub substitute: Option<OscillationParams<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            triads: TriadConfig::default(),
            clamp: ClampPolicy::None,
            substitute: None,
        }
    }
}

/// One resampled point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoPoint {
    pub tau: f64,
    pub pi: f64,
}

/// The random stream for replication `replication` of `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// A child seed for an independent run sharing the master seed (splitmix64).
pub fn derive_seed(seed: u64, lane: u64) -> u64 {
    let mut z = seed ^ lane.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws one pseudodata replica. Time draws `<= 0` are redrawn.
pub fn resample<R: Rng + ?Sized>(dataset: &Dataset, rng: &mut R, clamp: ClampPolicy) -> Result<Vec<PseudoPoint>> {
    resample_with_redraws(dataset, rng, clamp, MAX_TIME_REDRAWS)
}

fn resample_with_redraws<R: Rng + ?Sized>(
    dataset: &Dataset,
    rng: &mut R,
    clamp: ClampPolicy,
    max_redraws: usize,
) -> Result<Vec<PseudoPoint>> {
    dataset
        .points
        .iter()
        .enumerate()
        .map(|(row, p)| {
            let mut tau = None;
            for _ in 0..max_redraws {
                let z: f64 = rng.sample(StandardNormal);
                let candidate = p.t + p.dt * z;
                if candidate > 0.0 {
                    tau = Some(candidate);
                    break;
                }
            }
            let tau = tau.ok_or_else(|| {
                Error::Data(format!(
                    "row {}: {max_redraws} consecutive non-positive time draws (t = {}, dt = {})",
                    row + 1,
                    p.t,
                    p.dt
                ))
            })?;
            let z: f64 = rng.sample(StandardNormal);
            let mut pi = p.p + p.dp * z;
            if clamp == ClampPolicy::UnitInterval {
                pi = pi.clamp(0.0, 1.0);
            }
            Ok(PseudoPoint { tau, pi })
        })
        .collect()
}

/// Correlated triads (on `tau`) with `K3 > 0` (on `pi`).
pub fn violation_count(pseudo: &[PseudoPoint], groups: Option<&[String]>, config: &TriadConfig<f64>) -> usize {
    let taus: Vec<f64> = pseudo.iter().map(|p| p.tau).collect();
    let pis: Vec<f64> = pseudo.iter().map(|p| p.pi).collect();
    count_violations(&taus, &pis, groups, config)
}

/// Histogram of violation counts over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDistribution {
    histogram: BTreeMap<usize, usize>,
    replications: usize,
    mu: f64,
    sigma: f64,
}

impl TrialDistribution {
    /// Builds from per-replication counts. `sigma` uses the population
    /// convention (divide by the number of replications).
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::domain("at least one replication required"));
        }
        let mut histogram = BTreeMap::new();
        for &c in counts {
            *histogram.entry(c).or_insert(0) += 1;
        }
        let replications = counts.len();
        let r = replications as f64;
        let mu = histogram.iter().map(|(&c, &f)| c as f64 * f as f64).sum::<f64>() / r;
        let var = histogram
            .iter()
            .map(|(&c, &f)| f as f64 * (c as f64 - mu).powi(2))
            .sum::<f64>()
            / r;
        Ok(Self {
            histogram,
            replications,
            mu,
            sigma: var.sqrt(),
        })
    }

    pub fn histogram(&self) -> &BTreeMap<usize, usize> {
        &self.histogram
    }

    pub fn replications(&self) -> usize {
        self.replications
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `mu / sigma`, undefined when `sigma = 0`.
    pub fn confidence(&self) -> Option<f64> {
        (self.sigma > 0.0).then(|| self.mu / self.sigma)
    }
}

/// Runs `config.replications` pseudodata replications.
pub fn run_trials(dataset: &Dataset, config: &RunConfig) -> Result<TrialDistribution> {
    if config.replications == 0 {
        return Err(Error::domain("replications must be >= 1"));
    }
    config.triads.validate()?;
    let substituted;
    let dataset = match &config.substitute {
        Some(params) => {
            substituted = theoretical_substitute(dataset, params)?;
            &substituted
        }
        None => dataset,
    };
    let groups = dataset.group_slice();
    let counts = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(config.seed, r);
            let pseudo = resample(dataset, &mut rng, config.clamp)?;
            Ok(violation_count(&pseudo, groups, &config.triads))
        })
        .collect::<Result<Vec<usize>>>()?;
    TrialDistribution::from_counts(&counts)
}

/// Same times and uncertainties, with each `p` replaced by the prediction
/// averaged over `[t - dt, t + dt]`.
pub fn theoretical_substitute(dataset: &Dataset, params: &OscillationParams<f64>) -> Result<Dataset> {
    let osc = Oscillator::new(params, dataset.channel)?;
    let mut out = dataset.clone();
    for p in &mut out.points {
        p.p = osc.bin_average(p.t, p.dt)?.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// `confidence(experimental) / confidence(theoretical)`.
pub fn compare(experimental: &TrialDistribution, theoretical: &TrialDistribution) -> Result<f64> {
    let e = experimental
        .confidence()
        .ok_or_else(|| Error::Comparison("experimental confidence undefined (sigma = 0)".into()))?;
    let t = theoretical
        .confidence()
        .ok_or_else(|| Error::Comparison("theoretical confidence undefined (sigma = 0)".into()))?;
    if t == 0.0 {
        return Err(Error::Comparison("theoretical confidence is zero".into()));
    }
    Ok(e / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgi::DataPoint;
    use crate::oscillation::{Flavor, FlavorChannel, TimeParameter};

    fn dataset(rows: &[(f64, f64, f64, f64)]) -> Dataset {
        let points = rows
            .iter()
            .map(|&(t, p, dt, dp)| DataPoint::new(t, p, dt, dp).unwrap())
            .collect();
        Dataset::new("test", FlavorChannel::survival(Flavor::E, true), points).unwrap()
    }

    #[test]
    fn zero_variance_resample_is_identity() {
        let d = dataset(&[(1.0, 0.9, 0.0, 0.0), (2.0, 0.4, 0.0, 0.0)]);
        let pseudo = resample(&d, &mut replication_rng(1, 0), ClampPolicy::None).unwrap();
        assert_eq!(pseudo, vec![PseudoPoint { tau: 1.0, pi: 0.9 }, PseudoPoint { tau: 2.0, pi: 0.4 }]);
    }

    #[test]
    fn resample_moments() {
        let d = dataset(&[(1.0, 0.5, 0.1, 0.05)]);
        let mut rng = replication_rng(99, 3);
        let n = 100_000;
        let draws: Vec<PseudoPoint> = (0..n)
            .map(|_| resample(&d, &mut rng, ClampPolicy::None).unwrap()[0])
            .collect();
        let mean = |f: &dyn Fn(&PseudoPoint) -> f64| draws.iter().map(f).sum::<f64>() / n as f64;
        let mt = mean(&|p| p.tau);
        let mp = mean(&|p| p.pi);
        let st = (mean(&|p| (p.tau - mt).powi(2))).sqrt();
        let sp = (mean(&|p| (p.pi - mp).powi(2))).sqrt();
        let root_n = (n as f64).sqrt();
        assert!((mt - 1.0).abs() < 4.0 * 0.1 / root_n);
        assert!((mp - 0.5).abs() < 4.0 * 0.05 / root_n);
        assert!((st / 0.1 - 1.0).abs() < 0.05);
        assert!((sp / 0.05 - 1.0).abs() < 0.05);
    }

    #[test]
    fn implausible_time_width_is_a_data_error() {
        // Each draw is positive with probability 1/2.
        let d = dataset(&[(1.0, 0.5, 1e300, 0.0)]);
        let failures = (0..64)
            .filter(|&r| {
                matches!(
                    resample_with_redraws(&d, &mut replication_rng(0, r), ClampPolicy::None, 1),
                    Err(Error::Data(_))
                )
            })
            .count();
        assert!(failures > 0 && failures < 64);
        for r in 0..64 {
            let p = resample(&d, &mut replication_rng(0, r), ClampPolicy::None).unwrap();
            assert!(p[0].tau > 0.0);
        }
    }

    #[test]
    fn clamp_policy() {
        let d = dataset(&[(1.0, 0.99, 0.0, 0.5)]);
        for r in 0..50 {
            let p = resample(&d, &mut replication_rng(5, r), ClampPolicy::UnitInterval).unwrap()[0];
            assert!((0.0..=1.0).contains(&p.pi));
        }
        let any_outside = (0..50).any(|r| resample(&d, &mut replication_rng(5, r), ClampPolicy::None).unwrap()[0].pi > 1.0);
        assert!(any_outside);
    }

    #[test]
    fn violation_count_examples() {
        let cfg = TriadConfig::default();
        assert_eq!(violation_count(&[], None, &cfg), 0);
        let pseudo = [
            PseudoPoint { tau: 1.0, pi: 0.9 },
            PseudoPoint { tau: 1.02, pi: 0.9 },
            PseudoPoint { tau: 2.0, pi: 0.5 },
        ];
        // (0,1,2): 0.81 - 0.5 > 0; (0,0,2) and (1,1,2) also correlate: 2.0 and 2.04 vs 2.0.
        let triads = crate::lgi::find_correlated_triads(&[1.0, 1.02, 2.0], &cfg);
        assert_eq!(triads.len(), 3);
        let strict = TriadConfig {
            allow_self_pairs: false,
            ..cfg
        };
        assert_eq!(violation_count(&pseudo, None, &strict), 1);
        assert_eq!(violation_count(&pseudo, None, &cfg), 3);
    }

    #[test]
    fn degenerate_distribution_has_undefined_confidence() {
        let d = dataset(&[(1.0, 0.9, 0.0, 0.0), (1.02, 0.9, 0.0, 0.0), (2.0, 0.5, 0.0, 0.0)]);
        let cfg = RunConfig {
            replications: 20,
            ..RunConfig::default()
        };
        let dist = run_trials(&d, &cfg).unwrap();
        assert_eq!(dist.histogram().len(), 1);
        assert_eq!(dist.sigma(), 0.0);
        assert_eq!(dist.mu(), 3.0);
        assert!(dist.confidence().is_none());
        assert!(compare(&dist, &dist).is_err());
    }

    #[test]
    fn distribution_moments_from_histogram() {
        let dist = TrialDistribution::from_counts(&[0, 2, 2, 4, 7]).unwrap();
        assert_eq!(dist.mu(), 3.0);
        assert!((dist.sigma() - (28.0_f64 / 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(dist.histogram()[&2], 2);
        assert!(TrialDistribution::from_counts(&[]).is_err());
    }

    #[test]
    fn substitution_keeps_times_and_uncertainties() {
        let params = OscillationParams::best_fit();
        let d = dataset(&[(16_000.0, 0.1, 0.0, 0.05), (30_000.0, 0.9, 3_000.0, 0.05)]);
        let s = theoretical_substitute(&d, &params).unwrap();
        let osc = Oscillator::new(&params, d.channel).unwrap();
        assert_eq!(s.points[0].p, osc.probability(TimeParameter::new(16_000.0).unwrap()));
        assert_eq!(s.points[1].p, osc.bin_average(30_000.0, 3_000.0).unwrap());
        for (a, b) in d.points.iter().zip(&s.points) {
            assert_eq!((a.t, a.dt, a.dp), (b.t, b.dt, b.dp));
        }
        // Points near t = 0 survive with certainty.
        let near_zero = theoretical_substitute(&dataset(&[(1e-9, 0.3, 0.0, 0.0)]), &params).unwrap();
        assert!((near_zero.points[0].p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_are_distinct_per_lane() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
