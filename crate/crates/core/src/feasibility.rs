//! Design-space search over spin, protocol time, gradient and shell size,
//! plus the dipole-versus-gravity force check.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::decoherence::{assemble_budget, macroscopicity, EnvironmentConfig, Overall};
use crate::error::{Error, Result};
use crate::materials::{mass_and_inertia, MaterialParams, ParticleSpec, ShellMaterial, SpinCounting};
use crate::protocol::separation_formula;
use crate::scalar::Real;
use crate::spinmodel::DoubleWellModel;

/// Refinement ratio of the second search stage.
pub const REFINE_RATIO: f64 = 1.25;
/// Refinement points on each side of the coarse optimum.
pub const REFINE_STEPS: i32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignConstraints<T> {
    /// Experiment temperature (K).
    pub t_exp: T,
    pub min_de_over_kt: T,
    pub min_du_over_kt: T,
    pub max_rotation_alpha: T,
    /// (T/m)
    pub max_grad_b: T,
    /// (s)
    pub max_t0: T,
    pub require_below_blocking: bool,
    /// Require the environmental decoherence budget to pass.
    pub require_budget: bool,
}

impl<T: Real> Default for DesignConstraints<T> {
    fn default() -> Self {
        Self {
            t_exp: T::lit(0.3),
            min_de_over_kt: T::lit(1.0),
            min_du_over_kt: T::lit(100.0),
            max_rotation_alpha: T::lit(1e-2),
            max_grad_b: T::lit(1e6),
            max_t0: T::lit(1e-5),
            require_below_blocking: true,
            require_budget: true,
        }
    }
}

impl<T: Real> DesignConstraints<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("T_exp", self.t_exp),
            ("min_dE_over_kT", self.min_de_over_kt),
            ("min_dU_over_kT", self.min_du_over_kt),
            ("max_rotation_alpha", self.max_rotation_alpha),
            ("max_t0", self.max_t0),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_grad_b >= T::zero()) {
            return Err(Error::invalid("max_grad_B must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    DeltaZ,
    Macroscopicity,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_z" => Ok(Self::DeltaZ),
            "macroscopicity" => Ok(Self::Macroscopicity),
            _ => Err(Error::invalid(format!(
                "unknown objective '{s}' (expected delta_z or macroscopicity)"
            ))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DeltaZ => "delta_z",
            Self::Macroscopicity => "macroscopicity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck<T> {
    pub name: &'static str,
    pub value: T,
    pub bound: T,
    /// `true` for a lower bound, `false` for an upper bound.
    pub lower: bool,
    pub satisfied: bool,
}

impl<T: Real> ConstraintCheck<T> {
    fn at_least(name: &'static str, value: T, bound: T) -> Self {
        Self { name, value, bound, lower: true, satisfied: value >= bound }
    }

    fn at_most(name: &'static str, value: T, bound: T) -> Self {
        Self { name, value, bound, lower: false, satisfied: value <= bound }
    }

    /// Relative margin to the bound; negative when violated.
    pub fn slack(&self) -> T {
        let scale = self.bound.abs().max(T::min_positive_value());
        if self.lower {
            (self.value - self.bound) / scale
        } else {
            (self.bound - self.value) / scale
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMetrics<T> {
    pub delta_u: T,
    pub delta_e: T,
    pub rotation_alpha: T,
    pub delta_z: T,
    pub mass: T,
    pub macroscopicity: Option<T>,
    pub budget: Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCandidate<T> {
    pub particle: ParticleSpec<T>,
    pub spin: u32,
    pub t0: T,
    pub grad_b: T,
    pub objective: Objective,
    pub score: T,
    pub metrics: Option<DesignMetrics<T>>,
    pub constraint_report: Vec<ConstraintCheck<T>>,
    pub feasible: bool,
    pub error: Option<String>,
}

impl<T: Real> DesignCandidate<T> {
    /// Unevaluated candidate.
    pub fn new(particle: ParticleSpec<T>, spin: u32, t0: T, grad_b: T, objective: Objective) -> Self {
        Self {
            particle,
            spin,
            t0,
            grad_b,
            objective,
            score: T::nan(),
            metrics: None,
            constraint_report: Vec::new(),
            feasible: false,
            error: None,
        }
    }

    /// Violated constraint for infeasible candidates, otherwise the one with
    /// the least relative slack.
    pub fn binding_constraint(&self) -> Option<&'static str> {
        if self.error.is_some() {
            return Some("error");
        }
        self.constraint_report
            .iter()
            .find(|c| !c.satisfied)
            .or_else(|| {
                self.constraint_report
                    .iter()
                    .min_by(|a, b| a.slack().partial_cmp(&b.slack()).unwrap_or(std::cmp::Ordering::Equal))
            })
            .map(|c| c.name)
    }
}

fn score_of<T: Real>(objective: Objective, metrics: &DesignMetrics<T>) -> T {
    match objective {
        Objective::DeltaZ => metrics.delta_z,
        Objective::Macroscopicity => metrics.macroscopicity.unwrap_or(T::neg_infinity()),
    }
}

fn compute<T: Real>(
    c: &DesignCandidate<T>,
    constraints: &DesignConstraints<T>,
    env: &EnvironmentConfig<T>,
    consts: &PhysicalConstants<T>,
) -> Result<(DesignMetrics<T>, Vec<ConstraintCheck<T>>)> {
    constraints.validate()?;
    if !(c.t0 >= T::zero()) || !(c.grad_b >= T::zero()) {
        return Err(Error::invalid("t0 and gradient must be >= 0"));
    }
    let model = DoubleWellModel::for_particle(&c.particle, c.spin)?;
    let delta_u = model.delta_u();
    let delta_e = model.wkb_splitting(consts.hbar)?;
    let (mass, inertia) = mass_and_inertia(&c.particle)?;
    let rotation_alpha = model.rotation_parameter(inertia, consts.hbar)?;
    let spin = T::from_count(c.spin as u64);
    let delta_z = separation_formula(c.particle.core.g_l, consts.mu_b, spin, c.t0, c.grad_b, mass);
    let mu = if c.t0 > T::zero() { Some(macroscopicity(mass, c.t0, consts)?) } else { None };
    let mut budget_particle = c.particle.clone();
    budget_particle.spin_override = Some(c.spin);
    let budget = assemble_budget(env, &budget_particle, delta_e, c.t0, delta_z, consts)?.overall;

    let kt = consts.k_b * constraints.t_exp;
    let mut report = vec![
        ConstraintCheck::at_least("dE_over_kT", delta_e / kt, constraints.min_de_over_kt),
        ConstraintCheck::at_least("dU_over_kT", delta_u / kt, constraints.min_du_over_kt),
        ConstraintCheck::at_most("rotation_alpha", rotation_alpha, constraints.max_rotation_alpha),
        ConstraintCheck::at_most("grad_B", c.grad_b, constraints.max_grad_b),
        ConstraintCheck::at_most("t0", c.t0, constraints.max_t0),
    ];
    if constraints.require_below_blocking {
        let mut check = ConstraintCheck::at_most("blocking_temperature", constraints.t_exp, c.particle.core.t_blocking);
        check.satisfied = constraints.t_exp < c.particle.core.t_blocking;
        report.push(check);
    }
    if constraints.require_budget {
        let pass = if budget == Overall::Pass { T::one() } else { T::zero() };
        report.push(ConstraintCheck::at_least("decoherence_budget", pass, T::one()));
    }
    let metrics = DesignMetrics {
        delta_u,
        delta_e,
        rotation_alpha,
        delta_z,
        mass,
        macroscopicity: mu,
        budget,
    };
    Ok((metrics, report))
}

/// Fills metrics, constraint report, score and feasibility. Module errors
/// make the candidate infeasible with the error recorded.
pub fn evaluate<T: Real>(
    candidate: &DesignCandidate<T>,
    constraints: &DesignConstraints<T>,
    env: &EnvironmentConfig<T>,
    consts: &PhysicalConstants<T>,
) -> DesignCandidate<T> {
    let mut out = candidate.clone();
    match compute(candidate, constraints, env, consts) {
        Ok((metrics, report)) => {
            out.score = score_of(candidate.objective, &metrics);
            out.feasible = report.iter().all(|c| c.satisfied);
            out.metrics = Some(metrics);
            out.constraint_report = report;
            out.error = None;
        }
        Err(e) => {
            out.score = T::nan();
            out.feasible = false;
            out.metrics = None;
            out.constraint_report.clear();
            out.error = Some(e.to_string());
        }
    }
    out
}

/// Inclusive search box. `shell_outer` is searched only with a shell material.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpec<T> {
    pub spin: (u32, u32),
    pub t0: (T, T),
    pub grad_b: (T, T),
    pub shell_outer: Option<(T, T)>,
}

impl<T: Real> SearchSpec<T> {
    /// Spin 100 to 2000, t0 and gradient up to the constraint maxima.
    pub fn for_constraints(constraints: &DesignConstraints<T>) -> Self {
        Self {
            spin: (100, 2000),
            t0: (T::lit(1e-7).min(constraints.max_t0), constraints.max_t0),
            grad_b: (T::lit(1e3).min(constraints.max_grad_b), constraints.max_grad_b),
            shell_outer: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let (s0, s1) = self.spin;
        if s0 == 0 || s0 > s1 {
            return Err(Error::invalid(format!("bad spin range {s0}..{s1}")));
        }
        let mut ranges = vec![("t0", self.t0), ("grad_B", self.grad_b)];
        if let Some(r) = self.shell_outer {
            ranges.push(("shell_outer", r));
        }
        for (name, (lo, hi)) in ranges {
            if !(lo >= T::zero() && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(format!("bad {name} range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Everything fixed during a search.
#[derive(Debug, Clone)]
pub struct DesignProblem<T> {
    pub material: MaterialParams<T>,
    pub shell: Option<ShellMaterial<T>>,
    pub counting: SpinCounting<T>,
    pub constraints: DesignConstraints<T>,
    pub env: EnvironmentConfig<T>,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult<T> {
    /// Every evaluated candidate: feasible ones first by descending score,
    /// then infeasible ones, each group tie-broken by S, t0, gradient, shell.
    pub ranked: Vec<DesignCandidate<T>>,
    pub evaluated: usize,
    pub feasible: usize,
    /// How often each constraint was violated among infeasible candidates.
    pub binding_histogram: BTreeMap<String, usize>,
}

impl<T: Real> OptimizeResult<T> {
    pub fn best(&self) -> Option<&DesignCandidate<T>> {
        self.ranked.first().filter(|c| c.feasible)
    }
}

fn decades<T: Real>(lo: T, hi: T) -> Vec<T> {
    let mut v = vec![lo];
    if lo > T::zero() {
        let mut x = lo * T::lit(10.0);
        while x < hi {
            v.push(x);
            x *= T::lit(10.0);
        }
    }
    v.push(hi);
    v
}

fn refine<T: Real>(best: T, lo: T, hi: T) -> Vec<T> {
    let mut v = vec![lo, hi];
    if best > T::zero() {
        let r = T::lit(REFINE_RATIO);
        for k in -REFINE_STEPS..=REFINE_STEPS {
            v.push((best * r.powi(k)).max(lo).min(hi));
        }
    }
    v
}

fn sorted_unique<T: Real>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.dedup();
    v
}

fn spins_from<T: Real>(values: Vec<T>, lo: u32, hi: u32) -> Vec<u32> {
    let set: BTreeSet<u32> = values
        .into_iter()
        .filter_map(|x| x.round().to_u32())
        .map(|s| s.clamp(lo, hi))
        .collect();
    set.into_iter().collect()
}

type Key = (u32, u64, u64, u64);

fn key_of<T: Real>(c: &DesignCandidate<T>) -> Key {
    (
        c.spin,
        c.t0.as_f64().to_bits(),
        c.grad_b.as_f64().to_bits(),
        c.particle.shell_outer_radius.as_f64().to_bits(),
    )
}

fn cmp_key<T: Real>(a: &DesignCandidate<T>, b: &DesignCandidate<T>) -> std::cmp::Ordering {
    let f = |x: T, y: T| x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal);
    a.spin
        .cmp(&b.spin)
        .then_with(|| f(a.t0, b.t0))
        .then_with(|| f(a.grad_b, b.grad_b))
        .then_with(|| f(a.particle.shell_outer_radius, b.particle.shell_outer_radius))
}

fn rank<T: Real>(a: &DesignCandidate<T>, b: &DesignCandidate<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a.feasible, b.feasible) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => b
            .score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| cmp_key(a, b)),
        (false, false) => cmp_key(a, b),
    }
}

impl<T: Real> DesignProblem<T> {
    /// Candidate for a grid point; `None` if the shell would not enclose the core.
    pub fn candidate(&self, spin: u32, t0: T, grad_b: T, shell_outer: Option<T>) -> Result<Option<DesignCandidate<T>>> {
        let radius = self.counting.radius_for_spin(&self.material, T::from_count(spin as u64))?;
        let particle = match (&self.shell, shell_outer) {
            (Some(shell), Some(outer)) => {
                if outer < radius {
                    return Ok(None);
                }
                ParticleSpec::core_shell(self.material.clone(), radius, shell.clone(), outer)
            }
            _ => ParticleSpec::sphere(self.material.clone(), radius),
        }
        .with_spin(spin);
        Ok(Some(DesignCandidate::new(particle, spin, t0, grad_b, self.objective)))
    }

    fn grid(&self, spins: &[u32], t0s: &[T], grads: &[T], shells: &[Option<T>]) -> Result<Vec<DesignCandidate<T>>> {
        let mut out = Vec::new();
        for &s in spins {
            for &t in t0s {
                for &g in grads {
                    for &sh in shells {
                        if let Some(c) = self.candidate(s, t, g, sh)? {
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn evaluate_all(&self, cands: Vec<DesignCandidate<T>>, consts: &PhysicalConstants<T>) -> Vec<DesignCandidate<T>> {
        cands
            .par_iter()
            .map(|c| evaluate(c, &self.constraints, &self.env, consts))
            .collect()
    }
}

/// Two-stage grid search: decade grid over the box, then a `1.25^k` grid
/// around the best coarse point.
pub fn optimize<T: Real>(
    problem: &DesignProblem<T>,
    search: &SearchSpec<T>,
    consts: &PhysicalConstants<T>,
) -> Result<OptimizeResult<T>> {
    problem.constraints.validate()?;
    problem.env.validate()?;
    search.validate()?;
    let (s_lo, s_hi) = search.spin;
    let f = |x: u32| T::from_count(x as u64);
    let shell_dim = problem.shell.is_some() && search.shell_outer.is_some();

    let coarse_spins = spins_from(decades(f(s_lo), f(s_hi)), s_lo, s_hi);
    let coarse_t0 = sorted_unique(decades(search.t0.0, search.t0.1));
    let coarse_g = sorted_unique(decades(search.grad_b.0, search.grad_b.1));
    let coarse_sh: Vec<Option<T>> = match search.shell_outer {
        Some((lo, hi)) if shell_dim => sorted_unique(decades(lo, hi)).into_iter().map(Some).collect(),
        _ => vec![None],
    };
    let mut all: BTreeMap<Key, DesignCandidate<T>> = BTreeMap::new();
    for c in problem.evaluate_all(problem.grid(&coarse_spins, &coarse_t0, &coarse_g, &coarse_sh)?, consts) {
        all.insert(key_of(&c), c);
    }

    let mut stage1: Vec<&DesignCandidate<T>> = all.values().collect();
    stage1.sort_by(|a, b| rank(a, b));
    if let Some(best) = stage1.first().filter(|c| c.feasible).map(|c| (*c).clone()) {
        let spins = spins_from(refine(f(best.spin), f(s_lo), f(s_hi)), s_lo, s_hi);
        let t0s = sorted_unique(refine(best.t0, search.t0.0, search.t0.1));
        let grads = sorted_unique(refine(best.grad_b, search.grad_b.0, search.grad_b.1));
        let shells: Vec<Option<T>> = match search.shell_outer {
            Some((lo, hi)) if shell_dim => sorted_unique(refine(best.particle.shell_outer_radius, lo, hi))
                .into_iter()
                .map(Some)
                .collect(),
            _ => vec![None],
        };
        let fresh: Vec<DesignCandidate<T>> = problem
            .grid(&spins, &t0s, &grads, &shells)?
            .into_iter()
            .filter(|c| !all.contains_key(&key_of(c)))
            .collect();
        for c in problem.evaluate_all(fresh, consts) {
            all.insert(key_of(&c), c);
        }
    }

    let mut ranked: Vec<DesignCandidate<T>> = all.into_values().collect();
    ranked.sort_by(rank);
    let mut binding_histogram = BTreeMap::new();
    for c in ranked.iter().filter(|c| !c.feasible) {
        if c.error.is_some() {
            *binding_histogram.entry("error".to_string()).or_insert(0) += 1;
        }
        for check in c.constraint_report.iter().filter(|k| !k.satisfied) {
            *binding_histogram.entry(check.name.to_string()).or_insert(0) += 1;
        }
    }
    let feasible = ranked.iter().filter(|c| c.feasible).count();
    Ok(OptimizeResult {
        evaluated: ranked.len(),
        feasible,
        ranked,
        binding_histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GravityTest<T> {
    pub f_grav: T,
    pub f_mag: T,
    /// `f_grav / f_mag`; infinite when the dipoles vanish.
    pub ratio: T,
}

/// Newtonian attraction versus the worst-case dipole-dipole force
/// `6 mu_0 mu_1 mu_2 / (4 pi d^4)` between two particles.
pub fn gravity_test_check<T: Real>(
    a: &ParticleSpec<T>,
    b: &ParticleSpec<T>,
    d: T,
    consts: &PhysicalConstants<T>,
) -> Result<GravityTest<T>> {
    if !(d > T::zero()) || !d.is_finite() {
        return Err(Error::invalid(format!("separation must be positive, got {d}")));
    }
    a.validate()?;
    b.validate()?;
    let moment = |p: &ParticleSpec<T>| -> Result<T> {
        Ok(p.core.g_l * consts.mu_b * T::from_count(p.spin()? as u64))
    };
    let d2 = d * d;
    // Factored so every intermediate stays in single-precision range.
    let f_mag = T::lit(6.0) * consts.mu_0 / (T::lit(4.0) * T::PI()) * (moment(a)? / d2) * (moment(b)? / d2);
    let f_grav = consts.big_g * (a.mass() / d) * (b.mass() / d);
    let ratio = if f_mag == T::zero() { T::infinity() } else { f_grav / f_mag };
    Ok(GravityTest { f_grav, f_mag, ratio })
}
