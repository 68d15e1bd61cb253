//! Standard-scheme three-flavor vacuum oscillation.
//!
//! Probabilities are evaluated as
//! `P(a -> b, t) = |sum_k conj(U[a][k]) U[b][k] exp(-i kappa dm2_k1 t)|^2`
//! with `t = L/E` in km/GeV and `kappa` from [`crate::constants::PHASE_KAPPA`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Complex, ComplexField, Matrix3};
use serde::{Deserialize, Serialize};

use crate::constants::{nufit, PHASE_KAPPA};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, SimpsonConfig};
use crate::scalar::{lit, phasor, re, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    E,
    Mu,
    Tau,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::E, Flavor::Mu, Flavor::Tau];

    pub fn index(self) -> usize {
        match self {
            Flavor::E => 0,
            Flavor::Mu => 1,
            Flavor::Tau => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Flavor::E => "e",
            Flavor::Mu => "mu",
            Flavor::Tau => "tau",
        }
    }
}

/// Production flavor, detection flavor and neutrino/antineutrino mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlavorChannel {
    pub initial: Flavor,
    pub detected: Flavor,
    pub antineutrino: bool,
}

impl FlavorChannel {
    pub fn new(initial: Flavor, detected: Flavor, antineutrino: bool) -> Self {
        Self {
            initial,
            detected,
            antineutrino,
        }
    }

    pub fn survival(flavor: Flavor, antineutrino: bool) -> Self {
        Self::new(flavor, flavor, antineutrino)
    }

    pub fn is_survival(&self) -> bool {
        self.initial == self.detected
    }

    /// All nine channels for one neutrino mode.
    pub fn all(antineutrino: bool) -> impl Iterator<Item = FlavorChannel> {
        Flavor::ALL.into_iter().flat_map(move |a| {
            Flavor::ALL
                .into_iter()
                .map(move |b| FlavorChannel::new(a, b, antineutrino))
        })
    }
}

impl fmt::Display for FlavorChannel {
    /// Formats as `ee`, `mumu`, `etau`, ... (the antineutrino flag is not part
    /// of the short name).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.initial.symbol(), self.detected.symbol())
    }
}

impl FromStr for FlavorChannel {
    type Err = Error;

    /// Parses the short name produced by `Display`, in neutrino mode.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        for a in Flavor::ALL {
            if let Some(rest) = s.strip_prefix(a.symbol()) {
                for b in Flavor::ALL {
                    if rest == b.symbol() {
                        return Ok(FlavorChannel::new(a, b, false));
                    }
                }
            }
        }
        Err(Error::validation(
            "channel",
            format!("unknown channel {s:?} (expected e.g. ee, mumu, emu)"),
        ))
    }
}

/// Mixing angles and CP phase in radians, mass-squared splittings in eV^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationParams<T> {
    pub theta12: T,
    pub theta13: T,
    pub theta23: T,
    pub delta_cp: T,
    pub dm2_21: T,
    /// Negative for inverted ordering.
    pub dm2_31: T,
}

impl<T: Real> OscillationParams<T> {
    pub fn new(theta12: T, theta13: T, theta23: T, delta_cp: T, dm2_21: T, dm2_31: T) -> Result<Self> {
        let p = Self {
            theta12,
            theta13,
            theta23,
            delta_cp,
            dm2_21,
            dm2_31,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds from angles in degrees. The CP phase is wrapped into `[0, 360)`.
    pub fn from_degrees(
        theta12_deg: f64,
        theta13_deg: f64,
        theta23_deg: f64,
        delta_cp_deg: f64,
        dm2_21: f64,
        dm2_31: f64,
    ) -> Result<Self> {
        if !delta_cp_deg.is_finite() {
            return Err(Error::validation("delta_cp", "not finite"));
        }
        let rad = |d: f64| lit::<T>(d.to_radians());
        Self::new(
            rad(theta12_deg),
            rad(theta13_deg),
            rad(theta23_deg),
            rad(delta_cp_deg.rem_euclid(360.0)),
            lit(dm2_21),
            lit(dm2_31),
        )
    }

    /// Normal-ordering global-fit best values.
    pub fn best_fit() -> Self {
        Self::from_degrees(
            nufit::THETA12_DEG,
            nufit::THETA13_DEG,
            nufit::THETA23_DEG,
            nufit::DELTA_CP_DEG,
            nufit::DM2_21_EV2,
            nufit::DM2_31_EV2,
        )
        .expect("reference parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = T::frac_pi_2();
        for (name, angle) in [
            ("theta12", self.theta12),
            ("theta13", self.theta13),
            ("theta23", self.theta23),
        ] {
            if !(angle >= T::zero() && angle <= half_pi) {
                return Err(Error::domain(format!("{name} = {angle} outside [0, pi/2]")));
            }
        }
        if !(self.delta_cp >= T::zero() && self.delta_cp < T::two_pi()) {
            return Err(Error::domain(format!("delta_cp = {} outside [0, 2 pi)", self.delta_cp)));
        }
        // Zero splittings are admitted so that the no-oscillation limit is expressible.
        if !(self.dm2_21 >= T::zero() && self.dm2_21.is_finite()) {
            return Err(Error::domain(format!("dm2_21 = {} must be >= 0", self.dm2_21)));
        }
        if !self.dm2_31.is_finite() {
            return Err(Error::domain("dm2_31 not finite"));
        }
        Ok(())
    }

    pub fn is_inverted_ordering(&self) -> bool {
        self.dm2_31 < T::zero()
    }

    /// Reads a key-value parameter file (angles in degrees, splittings in eV^2).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let file: ParamsFile = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1) as u64)
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        Self::from_degrees(
            file.theta12_deg,
            file.theta13_deg,
            file.theta23_deg,
            file.delta_cp_deg,
            file.dm2_21_ev2,
            file.dm2_31_ev2,
        )
    }

    pub fn to_config_string(&self) -> String {
        let file = ParamsFile {
            theta12_deg: to_f64(self.theta12).to_degrees(),
            theta13_deg: to_f64(self.theta13).to_degrees(),
            theta23_deg: to_f64(self.theta23).to_degrees(),
            delta_cp_deg: to_f64(self.delta_cp).to_degrees(),
            dm2_21_ev2: to_f64(self.dm2_21),
            dm2_31_ev2: to_f64(self.dm2_31),
        };
        toml::to_string(&file).expect("flat table serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    theta12_deg: f64,
    theta13_deg: f64,
    theta23_deg: f64,
    delta_cp_deg: f64,
    dm2_21_ev2: f64,
    dm2_31_ev2: f64,
}

/// Baseline over energy, km/GeV.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimeParameter<T>(T);

impl<T: Real> TimeParameter<T> {
    pub fn new(t: T) -> Result<Self> {
        if t >= T::zero() && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(Error::domain(format!("time parameter L/E = {t} must be finite and >= 0")))
        }
    }

    pub fn from_baseline_energy(baseline_km: T, energy_gev: T) -> Result<Self> {
        if !(energy_gev > T::zero()) {
            return Err(Error::domain("energy must be positive"));
        }
        Self::new(baseline_km / energy_gev)
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Lepton mixing matrix, rows indexed by flavor, columns by mass state.
#[derive(Debug, Clone, PartialEq)]
pub struct PmnsMatrix<T: Real> {
    u: Matrix3<Complex<T>>,
}

impl<T: Real> PmnsMatrix<T> {
    /// Standard parameterization. For antineutrinos the matrix is complex
    /// conjugated, which flips the sign of the CP phase.
    pub fn build(params: &OscillationParams<T>, antineutrino: bool) -> Result<Self> {
        params.validate()?;
        let (s12, c12) = params.theta12.sin_cos();
        let (s13, c13) = params.theta13.sin_cos();
        let (s23, c23) = params.theta23.sin_cos();
        let delta = if antineutrino { -params.delta_cp } else { params.delta_cp };
        // e^{+i delta}
        let e_id = phasor(-delta);
        let e_mid = e_id.conj();

        let u = Matrix3::new(
            re(c12 * c13),
            re(s12 * c13),
            e_mid * s13,
            re(-s12 * c23) - e_id * (c12 * s13 * s23),
            re(c12 * c23) - e_id * (s12 * s13 * s23),
            re(c13 * s23),
            re(s12 * s23) - e_id * (c12 * s13 * c23),
            re(-c12 * s23) - e_id * (s12 * s13 * c23),
            re(c13 * c23),
        );
        Ok(Self { u })
    }

    pub fn matrix(&self) -> &Matrix3<Complex<T>> {
        &self.u
    }

    pub fn element(&self, flavor: Flavor, mass_state: usize) -> Complex<T> {
        self.u[(flavor.index(), mass_state)]
    }

    /// `max |(U^dagger U - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> T {
        let g = self.u.adjoint() * self.u - Matrix3::identity();
        g.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| a.max(b))
    }

    /// `sum_k |U[a][k]|^4`: the survival probability once all interference
    /// between mass states has been averaged away.
    pub fn incoherent_survival(&self, flavor: Flavor) -> T {
        (0..3)
            .map(|k| self.element(flavor, k).norm_sqr().powi(2))
            .fold(T::zero(), |a, b| a + b)
    }
}

pub fn build_pmns<T: Real>(params: &OscillationParams<T>, antineutrino: bool) -> Result<PmnsMatrix<T>> {
    PmnsMatrix::build(params, antineutrino)
}

/// Oscillation probability for one channel with the mixing matrix and phase
/// rates precomputed.
#[derive(Debug, Clone)]
pub struct Oscillator<T: Real> {
    channel: FlavorChannel,
    pmns: PmnsMatrix<T>,
    /// `kappa * dm2_k1` for k = 1, 2, 3, rad per km/GeV.
    rates: [T; 3],
    /// `conj(U[a][k]) U[b][k]`
    weights: [Complex<T>; 3],
}

impl<T: Real> Oscillator<T> {
    pub fn new(params: &OscillationParams<T>, channel: FlavorChannel) -> Result<Self> {
        let pmns = PmnsMatrix::build(params, channel.antineutrino)?;
        let kappa: T = lit(PHASE_KAPPA);
        let rates = [T::zero(), kappa * params.dm2_21, kappa * params.dm2_31];
        let weights = std::array::from_fn(|k| {
            pmns.element(channel.initial, k).conj() * pmns.element(channel.detected, k)
        });
        Ok(Self {
            channel,
            pmns,
            rates,
            weights,
        })
    }

    pub fn channel(&self) -> FlavorChannel {
        self.channel
    }

    pub fn pmns(&self) -> &PmnsMatrix<T> {
        &self.pmns
    }

    /// Vacuum Hamiltonian eigen-phases per unit of L/E, `kappa * dm2_k1`.
    pub fn phase_rates(&self) -> [T; 3] {
        self.rates
    }

    pub fn probability(&self, t: TimeParameter<T>) -> T {
        self.probability_at(t.value())
    }

    fn probability_at(&self, t: T) -> T {
        let amp = (0..3).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
            acc + self.weights[k] * phasor(self.rates[k] * t)
        });
        amp.norm_sqr()
    }

    /// Mean probability over `[center - halfwidth, center + halfwidth]`,
    /// with the interval truncated at `t = 0`.
    pub fn bin_average(&self, center: T, halfwidth: T) -> Result<T> {
        TimeParameter::new(center)?;
        if !(halfwidth >= T::zero() && halfwidth.is_finite()) {
            return Err(Error::domain(format!("bin halfwidth {halfwidth} must be >= 0")));
        }
        let lo = (center - halfwidth).max(T::zero());
        let hi = center + halfwidth;
        if hi <= lo {
            return Ok(self.probability_at(center));
        }
        // Keep each initial panel under a quarter period of the fastest beat.
        let mut fastest = T::zero();
        for a in self.rates {
            for b in self.rates {
                fastest = fastest.max((a - b).abs());
            }
        }
        let quarter_periods = to_f64(fastest * (hi - lo) / T::frac_pi_2());
        let panels = (quarter_periods.ceil() as usize).clamp(8, 1 << 16);
        let config = SimpsonConfig {
            initial_panels: panels,
            ..SimpsonConfig::default()
        };
        let q = adaptive_simpson(|t| self.probability_at(t), lo, hi, &config)?;
        Ok(q.value / (hi - lo))
    }
}

pub fn oscillation_probability<T: Real>(
    params: &OscillationParams<T>,
    channel: FlavorChannel,
    t: TimeParameter<T>,
) -> Result<T> {
    Ok(Oscillator::new(params, channel)?.probability(t))
}

pub fn bin_averaged_probability<T: Real>(
    params: &OscillationParams<T>,
    channel: FlavorChannel,
    t_center: T,
    t_halfwidth: T,
) -> Result<T> {
    Oscillator::new(params, channel)?.bin_average(t_center, t_halfwidth)
}
