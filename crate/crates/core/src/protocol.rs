//! Release, split, and recombine interferometer.
//!
//! Both spin branches are treated as point wavepacket centres moving along
//! the gradient axis under `a = +/- g_L mu_B S_z (dB/dz)(t) / m`. The
//! gradient is `+G` on `[0, t0/4)`, `-G` on `[t0/4, 3t0/4)`, `+G` on
//! `[3t0/4, t0)` and off afterwards, so the branches separate, turn, and
//! overlap again at `t0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::materials::ParticleSpec;
use crate::scalar::Real;

/// Default number of RK4 steps over the full protocol.
pub const DEFAULT_STEPS: usize = 100_000;
/// Default number of trajectory samples kept in a result.
pub const DEFAULT_SAMPLES: usize = 201;
/// Relative closure tolerance for the numerical integrator.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolConfig<T> {
    pub particle: ParticleSpec<T>,
    pub spin_z: T,
    pub g_l: T,
    /// Gradient magnitude (T/m).
    pub grad_b: T,
    /// Total protocol time (s).
    pub t0: T,
    /// Angle between gradient axis and gravity (rad).
    pub theta: T,
    /// Initial momentum along the gradient axis (kg m/s).
    pub p0: T,
    /// Width of each polarity-reversal ramp as a fraction of `t0`.
    pub ramp_fraction: T,
    pub samples: usize,
    pub steps: usize,
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(particle: ParticleSpec<T>, spin_z: T, grad_b: T, t0: T) -> Self {
        let g_l = particle.core.g_l;
        Self {
            particle,
            spin_z,
            g_l,
            grad_b,
            t0,
            theta: T::zero(),
            p0: T::zero(),
            ramp_fraction: T::zero(),
            samples: DEFAULT_SAMPLES,
            steps: DEFAULT_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.particle.validate()?;
        if !(self.t0 > T::zero()) || !self.t0.is_finite() {
            return Err(Error::invalid(format!("t0 must be positive, got {}", self.t0)));
        }
        if !(self.grad_b >= T::zero()) {
            return Err(Error::invalid(format!(
                "gradient must be non-negative, got {}",
                self.grad_b
            )));
        }
        if !(self.theta >= T::zero() && self.theta <= T::FRAC_PI_2()) {
            return Err(Error::OutOfRange {
                what: "theta",
                value: self.theta.to_string(),
                range: "[0, pi/2]".into(),
            });
        }
        if !(self.ramp_fraction >= T::zero() && self.ramp_fraction < T::lit(0.2)) {
            return Err(Error::OutOfRange {
                what: "ramp_fraction",
                value: self.ramp_fraction.to_string(),
                range: "[0, 0.2)".into(),
            });
        }
        if !(self.spin_z >= T::zero()) {
            return Err(Error::invalid("S_z must be non-negative"));
        }
        if self.steps < 8 {
            return Err(Error::invalid("integrator needs at least 8 steps"));
        }
        Ok(())
    }

    fn mass(&self) -> T {
        self.particle.mass()
    }

    /// Peak branch acceleration `g_L mu_B S_z G / m`.
    pub fn acceleration(&self, mu_b: T) -> T {
        self.g_l * mu_b * self.spin_z * self.grad_b / self.mass()
    }

    fn ramp_width(&self) -> T {
        self.ramp_fraction * self.t0
    }

    /// Times where the schedule changes form, ascending, including 0, t0/2
    /// and t0.
    fn breakpoints(&self) -> Vec<T> {
        let t0 = self.t0;
        let half_w = self.ramp_width() * T::lit(0.5);
        let q1 = t0 * T::lit(0.25);
        let q3 = t0 * T::lit(0.75);
        let mut pts = vec![T::zero(), q1 - half_w, q1 + half_w, t0 * T::lit(0.5), q3 - half_w, q3 + half_w, t0];
        pts.dedup();
        pts
    }
}

/// One smooth piece of the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece<T> {
    Off,
    Flat(T),
    /// Cosine ramp starting at `start` with initial sign `sign`.
    Ramp { start: T, sign: T },
}

fn piece_at<T: Real>(t: T, config: &ProtocolConfig<T>) -> Piece<T> {
    let t0 = config.t0;
    if t < T::zero() || t >= t0 {
        return Piece::Off;
    }
    let w = config.ramp_width();
    let q1 = t0 * T::lit(0.25);
    let q3 = t0 * T::lit(0.75);
    if w > T::zero() {
        let half_w = w * T::lit(0.5);
        // Odd cosine ramps about each reversal keep every segment's impulse.
        for (centre, sign) in [(q1, T::one()), (q3, -T::one())] {
            let start = centre - half_w;
            if t >= start && t < centre + half_w {
                return Piece::Ramp { start, sign };
            }
        }
    }
    if t < q1 || t >= q3 {
        Piece::Flat(T::one())
    } else {
        Piece::Flat(-T::one())
    }
}

fn piece_value<T: Real>(piece: Piece<T>, t: T, config: &ProtocolConfig<T>) -> T {
    match piece {
        Piece::Off => T::zero(),
        Piece::Flat(sign) => sign * config.grad_b,
        Piece::Ramp { start, sign } => {
            sign * config.grad_b * (T::PI() * (t - start) / config.ramp_width()).cos()
        }
    }
}

/// Signed gradient (T/m) at time `t`.
pub fn gradient_schedule<T: Real>(t: T, config: &ProtocolConfig<T>) -> T {
    piece_value(piece_at(t, config), t, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint<T> {
    pub t: T,
    pub z: T,
    pub v: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolResult<T> {
    pub method: Integration,
    pub trajectory_up: Vec<TrajectoryPoint<T>>,
    pub trajectory_down: Vec<TrajectoryPoint<T>>,
    pub delta_z_max: T,
    pub t_peak: T,
    /// `g_L mu_B S_z t0^2 G / (8 m)`.
    pub delta_z_formula: T,
    pub closure_error_pos: T,
    pub closure_error_vel: T,
    pub closure_ok: bool,
    /// Closed form `g t0^3 g_L S_z mu_B G cos(theta) / (16 hbar)`.
    pub beta_g: T,
    /// `(1/hbar) int m g cos(theta) (z_up - z_down) dt` along the computed paths.
    pub beta_g_path: T,
    pub beta_g_mod_2pi: T,
    pub p_plus: T,
    pub p_minus: T,
    /// Free fall of both branches along gravity, `g t0^2 / 2`. Not part of the phase.
    pub common_mode_fall: T,
}

/// Closed-form maximum separation.
pub fn separation_formula<T: Real>(g_l: T, mu_b: T, spin_z: T, t0: T, grad_b: T, mass: T) -> T {
    g_l * mu_b * spin_z * t0 * t0 * grad_b / (T::lit(8.0) * mass)
}

/// Closed-form gravity phase.
pub fn gravity_phase<T: Real>(config: &ProtocolConfig<T>, consts: &PhysicalConstants<T>) -> T {
    consts.g_acc * config.t0.powi(3) * config.g_l * config.spin_z * consts.mu_b * config.grad_b
        * config.theta.cos()
        / (T::lit(16.0) * consts.hbar)
}

/// Phase reduced to `[0, 2 pi)`.
pub fn wrap_phase<T: Real>(beta: T) -> T {
    let tau = T::TAU();
    let r = beta % tau;
    if r < T::zero() {
        r + tau
    } else {
        r
    }
}

/// `(P(+S_x), P(-S_x)) = ((1 + cos b)/2, (1 - cos b)/2)`.
pub fn fringe_probabilities<T: Real>(beta: T) -> (T, T) {
    let c = beta.cos();
    let half = T::lit(0.5);
    let p_plus = half * (T::one() + c);
    (p_plus, T::one() - p_plus)
}

/// Piecewise-quadratic motion of the up branch for the ideal schedule,
/// relative to free flight.
struct AnalyticPath<T> {
    /// (start time, z, v, acceleration) per segment.
    segments: Vec<(T, T, T, T)>,
    t0: T,
}

impl<T: Real> AnalyticPath<T> {
    fn new(config: &ProtocolConfig<T>, accel: T) -> Self {
        let t0 = config.t0;
        let knots = [
            (T::zero(), accel),
            (t0 * T::lit(0.25), -accel),
            (t0 * T::lit(0.75), accel),
        ];
        let mut segments = Vec::with_capacity(3);
        let (mut z, mut v) = (T::zero(), T::zero());
        for (k, &(start, a)) in knots.iter().enumerate() {
            segments.push((start, z, v, a));
            let end = knots.get(k + 1).map_or(t0, |n| n.0);
            let tau = end - start;
            z += v * tau + a * tau * tau * T::lit(0.5);
            v += a * tau;
        }
        Self { segments, t0 }
    }

    fn state(&self, t: T) -> (T, T) {
        let t = t.min(self.t0).max(T::zero());
        let &(start, z, v, a) = self
            .segments
            .iter()
            .rev()
            .find(|s| t >= s.0)
            .unwrap_or(&self.segments[0]);
        let tau = t - start;
        (z + v * tau + a * tau * tau * T::lit(0.5), v + a * tau)
    }

    /// Exact integral of z over [0, t0]; Simpson's rule is exact on quadratics.
    fn integral_z(&self) -> T {
        let mut total = T::zero();
        for (k, s) in self.segments.iter().enumerate() {
            let end = self.segments.get(k + 1).map_or(self.t0, |n| n.0);
            let mid = (s.0 + end) * T::lit(0.5);
            let h = end - s.0;
            total += h / T::lit(6.0)
                * (self.state(s.0).0 + T::lit(4.0) * self.state(mid).0 + self.state(end).0);
        }
        total
    }
}

/// Output of the fixed-step integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericRun<T> {
    pub up: Vec<TrajectoryPoint<T>>,
    pub down: Vec<TrajectoryPoint<T>>,
    pub delta_z_max: T,
    pub t_peak: T,
    pub max_speed: T,
    pub final_up: (T, T),
    pub final_down: (T, T),
    /// Accumulated gravity phase along the integrated paths.
    pub phase: T,
}

/// Classical RK4 over each schedule segment separately, so no step straddles
/// a discontinuity in the forcing.
pub fn integrate_numeric<T: Real>(
    config: &ProtocolConfig<T>,
    consts: &PhysicalConstants<T>,
) -> Result<NumericRun<T>> {
    config.validate()?;
    let mass = config.mass();
    let coupling = config.g_l * consts.mu_b * config.spin_z / mass;
    let phase_rate = mass * consts.g_acc * config.theta.cos() / consts.hbar;
    let v0 = config.p0 / mass;
    let t0 = config.t0;

    // state: z_up, v_up, z_down, v_down, phase
    // The piece is fixed per segment so a jump at a segment edge is never sampled.
    let deriv = |piece: Piece<T>, t: T, y: &[T; 5]| -> [T; 5] {
        let a = coupling * piece_value(piece, t, config);
        [y[1], a, y[3], -a, phase_rate * (y[0] - y[2])]
    };

    let bps = config.breakpoints();
    let total_steps = T::from_count(config.steps as u64);
    let sample_every = if config.samples > 1 {
        (config.steps / (config.samples - 1)).max(1)
    } else {
        usize::MAX
    };

    let mut y = [T::zero(), v0, T::zero(), v0, T::zero()];
    let mut up = Vec::new();
    let mut down = Vec::new();
    let record = |t: T, y: &[T; 5], up: &mut Vec<TrajectoryPoint<T>>, down: &mut Vec<TrajectoryPoint<T>>| {
        up.push(TrajectoryPoint { t, z: y[0], v: y[1] });
        down.push(TrajectoryPoint { t, z: y[2], v: y[3] });
    };
    if config.samples > 0 {
        record(T::zero(), &y, &mut up, &mut down);
    }
    let mut best = (T::zero(), T::zero());
    let mut max_speed = v0.abs();
    let mut step_index = 0usize;
    let two = T::lit(2.0);
    let six = T::lit(6.0);

    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= T::zero() {
            continue;
        }
        let n = (total_steps * len / t0).round().to_usize().unwrap_or(1).max(1);
        let h = len / T::from_count(n as u64);
        let piece = piece_at((a + b) * T::lit(0.5), config);
        for k in 0..n {
            let t = a + h * T::from_count(k as u64);
            let k1 = deriv(piece, t, &y);
            let mut tmp = [T::zero(); 5];
            for i in 0..5 {
                tmp[i] = y[i] + h / two * k1[i];
            }
            let k2 = deriv(piece, t + h / two, &tmp);
            for i in 0..5 {
                tmp[i] = y[i] + h / two * k2[i];
            }
            let k3 = deriv(piece, t + h / two, &tmp);
            for i in 0..5 {
                tmp[i] = y[i] + h * k3[i];
            }
            let k4 = deriv(piece, t + h, &tmp);
            for i in 0..5 {
                y[i] += h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
            let t_now = if k + 1 == n { b } else { t + h };
            step_index += 1;
            let sep = (y[0] - y[2]).abs();
            if sep > best.0 {
                best = (sep, t_now);
            }
            max_speed = max_speed.max(y[1].abs()).max(y[3].abs());
            if config.samples > 0 && step_index % sample_every == 0 {
                record(t_now, &y, &mut up, &mut down);
            }
        }
    }
    if config.samples > 0 && up.last().map(|p| p.t) != Some(t0) {
        record(t0, &y, &mut up, &mut down);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("integrator produced a non-finite state".into()));
    }
    Ok(NumericRun {
        up,
        down,
        delta_z_max: best.0,
        t_peak: best.1,
        max_speed,
        final_up: (y[0], y[1]),
        final_down: (y[2], y[3]),
        phase: y[4],
    })
}

pub fn run_protocol<T: Real>(
    config: &ProtocolConfig<T>,
    consts: &PhysicalConstants<T>,
) -> Result<ProtocolResult<T>> {
    config.validate()?;
    let mass = config.mass();
    let t0 = config.t0;
    let v0 = config.p0 / mass;
    let beta_g = gravity_phase(config, consts);
    let delta_z_formula =
        separation_formula(config.g_l, consts.mu_b, config.spin_z, t0, config.grad_b, mass);
    let common_mode_fall = consts.g_acc * t0 * t0 * T::lit(0.5);
    let tol = T::lit(CLOSURE_TOLERANCE);

    if config.ramp_fraction == T::zero() {
        let accel = config.acceleration(consts.mu_b);
        let path = AnalyticPath::new(config, accel);
        let mut up = Vec::with_capacity(config.samples);
        let mut down = Vec::with_capacity(config.samples);
        if config.samples > 0 {
            let denom = T::from_count(config.samples.saturating_sub(1).max(1) as u64);
            for k in 0..config.samples {
                let t = t0 * T::from_count(k as u64) / denom;
                let (z, v) = path.state(t);
                up.push(TrajectoryPoint { t, z: z + v0 * t, v: v + v0 });
                down.push(TrajectoryPoint { t, z: -z + v0 * t, v: -v + v0 });
            }
        }
        let half = t0 * T::lit(0.5);
        let delta_z_max = T::lit(2.0) * path.state(half).0;
        let (z_end, v_end) = path.state(t0);
        let beta_g_path = T::lit(2.0) * mass * consts.g_acc * config.theta.cos()
            * path.integral_z()
            / consts.hbar;
        let (p_plus, p_minus) = fringe_probabilities(beta_g);
        return Ok(ProtocolResult {
            method: Integration::Analytic,
            trajectory_up: up,
            trajectory_down: down,
            delta_z_max,
            t_peak: half,
            delta_z_formula,
            closure_error_pos: z_end.abs(),
            closure_error_vel: v_end.abs(),
            closure_ok: true,
            beta_g,
            beta_g_path,
            beta_g_mod_2pi: wrap_phase(beta_g),
            p_plus,
            p_minus,
            common_mode_fall,
        });
    }

    let run = integrate_numeric(config, consts)?;
    let free_z = v0 * t0;
    let closure_error_pos = (run.final_up.0 - free_z)
        .abs()
        .max((run.final_down.0 - free_z).abs());
    let closure_error_vel = (run.final_up.1 - v0).abs().max((run.final_down.1 - v0).abs());
    let closure_ok = closure_error_pos <= tol * run.delta_z_max
        && closure_error_vel <= tol * run.max_speed;
    let (p_plus, p_minus) = fringe_probabilities(run.phase);
    Ok(ProtocolResult {
        method: Integration::Numeric,
        trajectory_up: run.up,
        trajectory_down: run.down,
        delta_z_max: run.delta_z_max,
        t_peak: run.t_peak,
        delta_z_formula,
        closure_error_pos,
        closure_error_vel,
        closure_ok,
        beta_g,
        beta_g_path: run.phase,
        beta_g_mod_2pi: wrap_phase(beta_g),
        p_plus,
        p_minus,
        common_mode_fall,
    })
}

/// Binomial draw of `n_shots` spin measurements. Deterministic in `seed`.
pub fn sample_fringe<T: Real>(p_plus: T, n_shots: u64, seed: u64) -> Result<(u64, u64)> {
    let p = p_plus.as_f64();
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "p_plus",
            value: p.to_string(),
            range: "[0, 1]".into(),
        });
    }
    if n_shots == 0 {
        return Ok((0, 0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Binomial::new(n_shots, p).map_err(|e| Error::Numeric(e.to_string()))?;
    let plus = dist.sample(&mut rng);
    Ok((plus, n_shots - plus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    Theta,
    T0,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow<T> {
    pub value: T,
    pub beta_g: T,
    pub beta_g_mod_2pi: T,
    pub p_plus: T,
    pub error: Option<String>,
}

/// Re-runs the protocol with one parameter varied.
pub fn fringe_scan<T: Real>(
    config: &ProtocolConfig<T>,
    parameter: ScanParameter,
    values: &[T],
    consts: &PhysicalConstants<T>,
) -> Result<Vec<ScanRow<T>>> {
    if values.is_empty() {
        return Err(Error::invalid("scan needs at least one parameter value"));
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let mut cfg = config.clone();
            cfg.samples = 0;
            match parameter {
                ScanParameter::Theta => cfg.theta = value,
                ScanParameter::T0 => cfg.t0 = value,
            }
            match run_protocol(&cfg, consts) {
                Ok(r) => {
                    let beta = if r.method == Integration::Numeric { r.beta_g_path } else { r.beta_g };
                    ScanRow {
                        value,
                        beta_g: beta,
                        beta_g_mod_2pi: wrap_phase(beta),
                        p_plus: r.p_plus,
                        error: None,
                    }
                }
                Err(e) => ScanRow {
                    value,
                    beta_g: T::nan(),
                    beta_g_mod_2pi: T::nan(),
                    p_plus: T::nan(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
