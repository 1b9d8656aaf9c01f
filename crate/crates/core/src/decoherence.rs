//! Environmental and collapse-model rates, and the per-channel budget.

use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::materials::{surface_area, MaterialDb, ParticleSpec};
use crate::scalar::Real;

/// Helium atom mass (kg).
pub const HELIUM_MASS: f64 = 6.64e-27;
/// Collapse rate per nucleon, GRW value (1/s).
pub const CSL_LAMBDA_GRW: f64 = 1e-17;
/// Collapse rate per nucleon, Adler value (1/s).
pub const CSL_LAMBDA_ADLER: f64 = 1e-9;
/// Collapse localisation length (m).
pub const CSL_RC: f64 = 1e-7;
/// GRW-parameter rate for the reference 10 nm YIG particle that the
/// calibrated mode reproduces (Hz).
pub const CSL_CALIBRATION_RATE: f64 = 8.5e4;
/// Noise frequency must stay below this fraction of the tunnel frequency.
pub const MAGNETIC_MARGIN: f64 = 1e-3;
/// Position noise above this fraction of the separation is significant.
pub const DEFAULT_VISIBILITY_FRACTION: f64 = 1e-2;
/// Magnons are frozen out when `h f_c > MAGNON_BOLTZMANN k_B T`.
pub const MAGNON_BOLTZMANN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CslMode {
    /// `lambda (m/amu)^2 f(R/r_c)` as written.
    Naive,
    /// Naive rate rescaled so GRW parameters give the quoted rate for the
    /// reference particle.
    Calibrated,
}

impl std::str::FromStr for CslMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "calibrated" => Ok(Self::Calibrated),
            _ => Err(Error::invalid(format!(
                "unknown CSL mode '{s}' (expected naive or calibrated)"
            ))),
        }
    }
}

impl std::fmt::Display for CslMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::Calibrated => "calibrated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CslParams<T> {
    pub lambda: T,
    pub r_c: T,
}

impl<T: Real> CslParams<T> {
    pub fn grw() -> Self {
        Self {
            lambda: T::lit(CSL_LAMBDA_GRW),
            r_c: T::lit(CSL_RC),
        }
    }

    pub fn adler() -> Self {
        Self {
            lambda: T::lit(CSL_LAMBDA_ADLER),
            r_c: T::lit(CSL_RC),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentConfig<T> {
    /// Residual gas pressure (Pa).
    pub pressure: T,
    pub gas_temperature: T,
    pub gas_mass: T,
    /// Particle temperature for blackbody emission (K).
    pub internal_temperature: T,
    /// Residual field inside the shield (T).
    pub shield_field: T,
    /// Bias field for the damping-limited coherence time (T).
    pub bias_field: T,
    pub visibility_fraction: T,
    pub magnetic_margin: T,
    pub csl_mode: CslMode,
}

impl<T: Real> Default for EnvironmentConfig<T> {
    fn default() -> Self {
        Self {
            pressure: T::lit(1e-7),
            gas_temperature: T::lit(0.3),
            gas_mass: T::lit(HELIUM_MASS),
            internal_temperature: T::lit(0.3),
            shield_field: T::lit(1e-12),
            bias_field: T::lit(1e-2),
            visibility_fraction: T::lit(DEFAULT_VISIBILITY_FRACTION),
            magnetic_margin: T::lit(MAGNETIC_MARGIN),
            csl_mode: CslMode::Naive,
        }
    }
}

impl<T: Real> EnvironmentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pressure", self.pressure),
            ("gas_temperature", self.gas_temperature),
            ("gas_mass", self.gas_mass),
            ("internal_temperature", self.internal_temperature),
            ("shield_field", self.shield_field),
            ("bias_field", self.bias_field),
            ("visibility_fraction", self.visibility_fraction),
            ("magnetic_margin", self.magnetic_margin),
        ];
        for (name, v) in fields {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Negligible,
    Significant,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Stochastic kicks with a rate and a recoil.
    Environmental,
    /// Collapse-model prediction; not part of the overall verdict.
    Collapse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel<T> {
    pub name: &'static str,
    pub kind: ChannelKind,
    #[serde(rename = "rate_hz")]
    pub rate: T,
    pub events: T,
    #[serde(rename = "position_noise_m")]
    pub position_noise: T,
    /// Velocity kick per event (m/s), where meaningful.
    #[serde(rename = "recoil_velocity_ms")]
    pub recoil_velocity: Option<T>,
    /// Characteristic frequency (Hz), where meaningful.
    #[serde(rename = "frequency_hz")]
    pub frequency: Option<T>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl<T: Real> Channel<T> {
    fn rate_channel(name: &'static str, kind: ChannelKind, rate: T, t0: T, recoil: Option<T>) -> Self {
        let position_noise = recoil.map_or(T::zero(), |v| v * t0);
        Self {
            name,
            kind,
            rate,
            events: rate * t0,
            position_noise,
            recoil_velocity: recoil,
            frequency: None,
            verdict: Verdict::Unknown,
            notes: Vec::new(),
        }
    }

    fn unknown(name: &'static str, kind: ChannelKind, err: &Error) -> Self {
        Self {
            name,
            kind,
            rate: T::nan(),
            events: T::nan(),
            position_noise: T::nan(),
            recoil_velocity: None,
            frequency: None,
            verdict: Verdict::Unknown,
            notes: vec![err.to_string()],
        }
    }

    /// Standard rule: significant iff the noise exceeds the visibility budget
    /// or more than one event is expected.
    fn judge(&mut self, visibility_fraction: T, delta_z: T) {
        let noisy = self.kind == ChannelKind::Environmental
            && self.position_noise > visibility_fraction * delta_z;
        self.verdict = if noisy || self.events > T::one() {
            Verdict::Significant
        } else {
            Verdict::Negligible
        };
    }
}

/// Hard-sphere collisions with a thermal gas.
pub fn gas_collision_channel<T: Real>(
    env: &EnvironmentConfig<T>,
    particle: &ParticleSpec<T>,
    t0: T,
    delta_z: T,
    consts: &PhysicalConstants<T>,
) -> Result<Channel<T>> {
    env.validate()?;
    particle.validate()?;
    let kind = ChannelKind::Environmental;
    if env.pressure == T::zero() {
        let mut ch = Channel::rate_channel("gas", kind, T::zero(), t0, Some(T::zero()));
        ch.judge(env.visibility_fraction, delta_z);
        return Ok(ch);
    }
    if env.gas_temperature == T::zero() {
        return Err(Error::invalid("gas temperature must be positive when pressure > 0"));
    }
    if env.gas_mass == T::zero() {
        return Err(Error::invalid("gas mass must be positive when pressure > 0"));
    }
    let kt = consts.k_b * env.gas_temperature;
    let v_gas = (kt / env.gas_mass).sqrt();
    let r = particle.outer_radius();
    let rate = T::PI() * env.pressure * v_gas * r * r / kt;
    let recoil = T::lit(2.0) * env.gas_mass * v_gas / particle.mass();
    let mut ch = Channel::rate_channel("gas", kind, rate, t0, Some(recoil));
    ch.judge(env.visibility_fraction, delta_z);
    Ok(ch)
}

/// Thermal photon emission at the Wien peak, photon energy `h c / lambda`.
pub fn blackbody_channel<T: Real>(
    env: &EnvironmentConfig<T>,
    particle: &ParticleSpec<T>,
    t0: T,
    delta_z: T,
    consts: &PhysicalConstants<T>,
) -> Result<Channel<T>> {
    env.validate()?;
    particle.validate()?;
    let temp = env.internal_temperature;
    if !(temp > T::zero()) {
        return Err(Error::invalid("internal temperature must be positive"));
    }
    let area = surface_area(particle);
    let rate = consts.wien_b * consts.sigma_sb * area * temp.powi(3) / (consts.h * consts.c);
    let lambda_max = consts.wien_b / temp;
    let recoil = consts.h / lambda_max / particle.mass();
    let mut ch = Channel::rate_channel("blackbody_emission", ChannelKind::Environmental, rate, t0, Some(recoil));
    ch.notes.push("photon energy taken as h c / lambda_max; the hbar form is ten times larger".into());
    ch.judge(env.visibility_fraction, delta_z);
    Ok(ch)
}

fn blackbody_absorption_channel<T: Real>() -> Channel<T> {
    let mut ch = Channel::rate_channel(
        "blackbody_absorption",
        ChannelKind::Environmental,
        T::zero(),
        T::zero(),
        None,
    );
    ch.verdict = Verdict::Negligible;
    ch.notes.push("not modelled; the cold environment makes absorption negligible".into());
    ch
}

/// Zeeman detuning between the `+S` and `-S` branch states in the residual
/// field, as a frequency: `2 g_L mu_B S B_g / h`.
pub fn magnetic_noise_frequency<T: Real>(g_l: T, spin: T, shield_field: T, consts: &PhysicalConstants<T>) -> T {
    T::lit(2.0) * g_l * consts.mu_b * spin * shield_field / consts.h
}

/// Compares the residual-field frequency against `margin * dE / h`.
pub fn magnetic_noise_channel<T: Real>(
    env: &EnvironmentConfig<T>,
    g_l: T,
    spin: T,
    delta_e: T,
    consts: &PhysicalConstants<T>,
) -> Result<Channel<T>> {
    env.validate()?;
    if !(delta_e >= T::zero()) {
        return Err(Error::invalid("tunnel splitting must be non-negative"));
    }
    let f = magnetic_noise_frequency(g_l, spin, env.shield_field, consts);
    let limit = env.magnetic_margin * delta_e / consts.h;
    let mut ch = Channel::rate_channel("magnetic_noise", ChannelKind::Environmental, T::zero(), T::zero(), None);
    ch.frequency = Some(f);
    ch.verdict = if f < limit || f == T::zero() {
        Verdict::Negligible
    } else {
        Verdict::Significant
    };
    ch.notes.push(format!("threshold {} Hz", limit));
    Ok(ch)
}

/// Shield field at which the noise channel turns significant.
pub fn magnetic_noise_threshold<T: Real>(g_l: T, spin: T, delta_e: T, margin: T, consts: &PhysicalConstants<T>) -> T {
    margin * delta_e / (T::lit(2.0) * g_l * consts.mu_b * spin)
}

/// Lowest propagating magnon frequency, `0.02 c / R_core`.
pub fn magnon_cutoff<T: Real>(particle: &ParticleSpec<T>, consts: &PhysicalConstants<T>) -> Result<T> {
    particle.validate()?;
    Ok(T::lit(0.02) * consts.c / particle.core_radius)
}

fn magnon_channel<T: Real>(
    env: &EnvironmentConfig<T>,
    particle: &ParticleSpec<T>,
    consts: &PhysicalConstants<T>,
) -> Result<Channel<T>> {
    let cutoff = magnon_cutoff(particle, consts)?;
    let thermal = consts.k_b * env.internal_temperature / consts.h;
    let mut ch = Channel::rate_channel("magnon", ChannelKind::Environmental, T::zero(), T::zero(), None);
    ch.frequency = Some(cutoff);
    ch.verdict = if cutoff > T::lit(MAGNON_BOLTZMANN) * thermal {
        Verdict::Negligible
    } else {
        Verdict::Significant
    };
    ch.notes.push(format!("thermal frequency {} Hz", thermal));
    Ok(ch)
}

/// Damping-limited spin coherence time `1 / (alpha gamma B)`. Infinite when
/// the damping or the field vanishes.
pub fn gilbert_coherence_time<T: Real>(alpha: T, gamma_r: T, field: T) -> Result<T> {
    if !(alpha >= T::zero() && gamma_r >= T::zero() && field >= T::zero()) {
        return Err(Error::invalid("damping, gyromagnetic ratio and field must be >= 0"));
    }
    let denom = alpha * gamma_r * field;
    Ok(if denom == T::zero() { T::infinity() } else { T::one() / denom })
}

/// Mass-density form factor of a uniform sphere, normalised to 1 as `x -> 0`:
/// `f(x) = (6/x^4) [1 - 2/x^2 + (1 + 2/x^2) exp(-x^2)]`, `x = R / r_c`.
pub fn csl_geometry_factor<T: Real>(x: T) -> T {
    let y = x * x;
    if y < T::one() {
        // Alternating series 6 sum (-1)^k (k-1)/(k+1)! y^(k-2), k >= 2.
        let mut term = T::one() / T::lit(6.0);
        let mut sum = T::zero();
        for k in 2..40u32 {
            sum += T::from_count(k as u64 - 1) * term;
            let kf = T::from_count(k as u64);
            term = -term * y / (kf + T::lit(2.0));
            if term.abs() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        return T::lit(6.0) * sum;
    }
    let two_over = T::lit(2.0) / y;
    T::lit(6.0) / (y * y) * (T::one() - two_over + (T::one() + two_over) * (-y).exp())
}

/// Uncalibrated collapse rate of a resolved superposition.
pub fn csl_rate_naive<T: Real>(
    particle: &ParticleSpec<T>,
    params: CslParams<T>,
    consts: &PhysicalConstants<T>,
) -> Result<T> {
    if !(params.lambda >= T::zero()) || !(params.r_c > T::zero()) {
        return Err(Error::invalid("CSL needs lambda >= 0 and r_c > 0"));
    }
    particle.validate()?;
    let n = particle.mass() / consts.amu;
    Ok(params.lambda * n * n * csl_geometry_factor(particle.outer_radius() / params.r_c))
}

/// Naive GRW rate of the 10 nm YIG reference particle.
fn calibration_reference<T: Real>(consts: &PhysicalConstants<T>) -> Result<T> {
    let db = MaterialDb::builtin();
    let yig = db.get("yig")?.cast::<T>();
    let reference = ParticleSpec::sphere(yig, T::lit(10e-9));
    csl_rate_naive(&reference, CslParams::grw(), consts)
}

pub fn csl_rate<T: Real>(
    particle: &ParticleSpec<T>,
    params: CslParams<T>,
    mode: CslMode,
    consts: &PhysicalConstants<T>,
) -> Result<T> {
    let naive = csl_rate_naive(particle, params, consts)?;
    match mode {
        CslMode::Naive => Ok(naive),
        CslMode::Calibrated => {
            Ok(naive * T::lit(CSL_CALIBRATION_RATE) / calibration_reference(consts)?)
        }
    }
}

/// `log10((m/m_e)^2 tau / 1 s)`.
pub fn macroscopicity<T: Real>(mass: T, tau: T, consts: &PhysicalConstants<T>) -> Result<T> {
    if !(mass > T::zero()) || !(tau > T::zero()) {
        return Err(Error::invalid("macroscopicity needs m > 0 and tau > 0"));
    }
    let ratio = mass / consts.m_e;
    Ok(T::lit(2.0) * ratio.log10() + tau.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Pass,
    Fail,
    Indeterminate,
}

/// Reduces channel verdicts. Only environmental channels count; the result
/// does not depend on channel order.
pub fn overall_verdict<T>(channels: &[Channel<T>]) -> Overall {
    let worst = channels
        .iter()
        .filter(|c| c.kind == ChannelKind::Environmental)
        .map(|c| c.verdict)
        .max();
    match worst {
        Some(Verdict::Unknown) => Overall::Indeterminate,
        Some(Verdict::Significant) => Overall::Fail,
        _ => Overall::Pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoherenceBudget<T> {
    pub t0: T,
    pub delta_z: T,
    pub visibility_fraction: T,
    pub csl_mode: CslMode,
    pub channels: Vec<Channel<T>>,
    /// Damping-limited coherence time at the bias field (s); infinite if unbounded.
    pub gilbert_time: T,
    pub overall: Overall,
    pub notes: Vec<String>,
}

impl<T: Real> DecoherenceBudget<T> {
    pub fn channel(&self, name: &str) -> Option<&Channel<T>> {
        self.channels.iter().find(|c| c.name == name)
    }
}

/// Runs every channel for one experiment.
pub fn assemble_budget<T: Real>(
    env: &EnvironmentConfig<T>,
    particle: &ParticleSpec<T>,
    delta_e: T,
    t0: T,
    delta_z: T,
    consts: &PhysicalConstants<T>,
) -> Result<DecoherenceBudget<T>> {
    env.validate()?;
    let g_l = particle.core.g_l;
    let spin = T::from_count(particle.spin()? as u64);
    if !(t0 >= T::zero()) || !(delta_z >= T::zero()) {
        return Err(Error::invalid("t0 and delta_z must be >= 0"));
    }
    let vis = env.visibility_fraction;
    let env_kind = ChannelKind::Environmental;
    let mut channels = vec![
        gas_collision_channel(env, particle, t0, delta_z, consts)
            .unwrap_or_else(|e| Channel::unknown("gas", env_kind, &e)),
        blackbody_channel(env, particle, t0, delta_z, consts)
            .unwrap_or_else(|e| Channel::unknown("blackbody_emission", env_kind, &e)),
        blackbody_absorption_channel(),
        magnetic_noise_channel(env, g_l, spin, delta_e, consts)
            .unwrap_or_else(|e| Channel::unknown("magnetic_noise", env_kind, &e)),
        magnon_channel(env, particle, consts)
            .unwrap_or_else(|e| Channel::unknown("magnon", env_kind, &e)),
    ];
    for (name, params) in [("csl_grw", CslParams::grw()), ("csl_adler", CslParams::adler())] {
        let kind = ChannelKind::Collapse;
        let ch = match csl_rate(particle, params, env.csl_mode, consts) {
            Ok(rate) => {
                let mut ch = Channel::rate_channel(name, kind, rate, t0, None);
                ch.judge(vis, delta_z);
                if env.csl_mode == CslMode::Naive {
                    ch.notes.push("naive amplification; does not reproduce the quoted GRW rate".into());
                } else {
                    ch.notes.push(format!("scaled so GRW parameters give {CSL_CALIBRATION_RATE} Hz for the reference particle"));
                }
                ch
            }
            Err(e) => Channel::unknown(name, kind, &e),
        };
        channels.push(ch);
    }

    let gilbert_time = gilbert_coherence_time(particle.core.gilbert_alpha, particle.core.gamma_r, env.bias_field)?;
    let mut notes = vec!["cryostat vibration not modelled; assumes cryogenics off during the protocol".to_string()];
    if t0 > gilbert_time {
        notes.push(format!("t0 = {t0} s exceeds the damping-limited coherence time {gilbert_time} s"));
    }
    let overall = overall_verdict(&channels);
    Ok(DecoherenceBudget {
        t0,
        delta_z,
        visibility_fraction: vis,
        csl_mode: env.csl_mode,
        channels,
        gilbert_time,
        overall,
        notes,
    })
}
