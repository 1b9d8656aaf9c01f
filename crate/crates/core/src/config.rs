//! Run configuration: sectioned `key = value` text with unit-checked values.
//!
//! Every key has a default, and the defaults describe the reference
//! scenario (10 nm YIG sphere, S = 500, t0 = 10 us, 1e6 T/m, 1e-9 mbar,
//! 0.3 K), so an empty file is a complete config.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::decoherence::{CslMode, EnvironmentConfig};
use crate::error::{Error, Result};
use crate::feasibility::{DesignConstraints, DesignProblem, Objective, SearchSpec};
use crate::kvfile::{self, Section};
use crate::materials::{
    format_material, material_with_overrides, shell_from_section, MaterialDb, MaterialParams,
    ParticleSpec, ShellMaterial, SpinCounting,
};
use crate::protocol::{ProtocolConfig, DEFAULT_SAMPLES, DEFAULT_STEPS};
use crate::units::{parse_si, Dimension};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountingMode {
    Anchored,
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSettings {
    pub material: String,
    pub radius: f64,
    /// `None` counts spins from the lattice.
    pub spin: Option<u32>,
    pub shell: Option<String>,
    pub shell_radius: f64,
    pub counting: CountingMode,
    pub anchor_spin: f64,
    pub anchor_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSettings {
    pub t0: f64,
    pub grad_b: f64,
    pub theta: f64,
    pub p0: f64,
    pub ramp_fraction: f64,
    /// `None` uses the particle spin.
    pub spin_z: Option<f64>,
    pub samples: usize,
    pub steps: usize,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSettings {
    pub objective: Objective,
    pub spin_min: u32,
    pub spin_max: u32,
    pub t0_min: f64,
    pub t0_max: f64,
    pub grad_min: f64,
    pub grad_max: f64,
    pub shell: Option<String>,
    pub shell_min: f64,
    pub shell_max: f64,
    /// Rows written to the design table.
    pub top: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Settings {
    pub spin_min: u32,
    pub spin_max: u32,
    pub spin_step: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GravitySettings {
    pub distance: f64,
    pub shell: String,
    pub shell_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub fig2: String,
    pub protocol: String,
    pub trajectory: String,
    pub budget: String,
    pub designs: String,
    pub gravity: String,
    pub summary: String,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Inline material definitions and overrides, in file order.
    pub materials: Vec<MaterialParams<f64>>,
    pub shells: Vec<ShellMaterial<f64>>,
    pub particle: ParticleSettings,
    pub protocol: ProtocolSettings,
    pub environment: EnvironmentConfig<f64>,
    pub constraints: DesignConstraints<f64>,
    pub design: DesignSettings,
    pub fig2: Fig2Settings,
    pub gravity: GravitySettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            materials: Vec::new(),
            shells: Vec::new(),
            particle: ParticleSettings {
                material: "yig".into(),
                radius: 10e-9,
                spin: Some(500),
                shell: None,
                shell_radius: 10e-9,
                counting: CountingMode::Anchored,
                anchor_spin: 500.0,
                anchor_radius: 10e-9,
            },
            protocol: ProtocolSettings {
                t0: 1e-5,
                grad_b: 1e6,
                theta: 0.0,
                p0: 0.0,
                ramp_fraction: 0.0,
                spin_z: None,
                samples: DEFAULT_SAMPLES,
                steps: DEFAULT_STEPS,
                shots: 1000,
            },
            environment: EnvironmentConfig::default(),
            constraints: DesignConstraints::default(),
            design: DesignSettings {
                objective: Objective::DeltaZ,
                spin_min: 100,
                spin_max: 2000,
                t0_min: 1e-7,
                t0_max: 1e-5,
                grad_min: 1e3,
                grad_max: 1e6,
                shell: None,
                shell_min: 10e-9,
                shell_max: 2e-6,
                top: 20,
            },
            fig2: Fig2Settings {
                spin_min: 100,
                spin_max: 2000,
                spin_step: 20,
            },
            gravity: GravitySettings {
                distance: 5e-4,
                shell: "silica".into(),
                shell_radius: 2e-6,
            },
            output: OutputSettings {
                fig2: "fig2.csv".into(),
                protocol: "protocol.json".into(),
                trajectory: "trajectory.csv".into(),
                budget: "budget.json".into(),
                designs: "designs.csv".into(),
                gravity: "gravity.json".into(),
                summary: "summary.json".into(),
                config: "config.echo".into(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Num(Dimension, &'static str),
    Int,
    Bool,
    Text,
}


/// Every recognised key, in echo order.
const KEYS: &[(&str, &str, Kind)] = &[
    ("", "seed", Kind::Int),
    ("particle", "material", Kind::Text),
    ("particle", "radius", Kind::Num(Dimension::LENGTH, "m")),
    ("particle", "spin", Kind::Text),
    ("particle", "shell", Kind::Text),
    ("particle", "shell_radius", Kind::Num(Dimension::LENGTH, "m")),
    ("particle", "counting", Kind::Text),
    ("particle", "anchor_spin", Kind::Num(Dimension::NONE, "")),
    ("particle", "anchor_radius", Kind::Num(Dimension::LENGTH, "m")),
    ("protocol", "t0", Kind::Num(Dimension::TIME, "s")),
    ("protocol", "gradB", Kind::Num(Dimension::FIELD_GRADIENT, "T/m")),
    ("protocol", "theta", Kind::Num(Dimension::NONE, "rad")),
    ("protocol", "p0", Kind::Num(Dimension::MOMENTUM, "kg m/s")),
    ("protocol", "ramp_fraction", Kind::Num(Dimension::NONE, "")),
    ("protocol", "S_z", Kind::Text),
    ("protocol", "samples", Kind::Int),
    ("protocol", "steps", Kind::Int),
    ("protocol", "shots", Kind::Int),
    ("environment", "pressure", Kind::Num(Dimension::PRESSURE, "Pa")),
    ("environment", "gas_temperature", Kind::Num(Dimension::TEMPERATURE, "K")),
    ("environment", "gas_mass", Kind::Num(Dimension::MASS, "kg")),
    ("environment", "internal_temperature", Kind::Num(Dimension::TEMPERATURE, "K")),
    ("environment", "shield_field", Kind::Num(Dimension::FIELD, "T")),
    ("environment", "bias_field", Kind::Num(Dimension::FIELD, "T")),
    ("environment", "visibility_fraction", Kind::Num(Dimension::NONE, "")),
    ("environment", "magnetic_margin", Kind::Num(Dimension::NONE, "")),
    ("environment", "csl_mode", Kind::Text),
    ("constraints", "T_exp", Kind::Num(Dimension::TEMPERATURE, "K")),
    ("constraints", "min_dE_over_kT", Kind::Num(Dimension::NONE, "")),
    ("constraints", "min_dU_over_kT", Kind::Num(Dimension::NONE, "")),
    ("constraints", "max_rotation_alpha", Kind::Num(Dimension::NONE, "")),
    ("constraints", "max_grad_B", Kind::Num(Dimension::FIELD_GRADIENT, "T/m")),
    ("constraints", "max_t0", Kind::Num(Dimension::TIME, "s")),
    ("constraints", "require_below_blocking", Kind::Bool),
    ("constraints", "require_budget", Kind::Bool),
    ("design", "objective", Kind::Text),
    ("design", "spin_min", Kind::Int),
    ("design", "spin_max", Kind::Int),
    ("design", "t0_min", Kind::Num(Dimension::TIME, "s")),
    ("design", "t0_max", Kind::Num(Dimension::TIME, "s")),
    ("design", "gradB_min", Kind::Num(Dimension::FIELD_GRADIENT, "T/m")),
    ("design", "gradB_max", Kind::Num(Dimension::FIELD_GRADIENT, "T/m")),
    ("design", "shell", Kind::Text),
    ("design", "shell_min", Kind::Num(Dimension::LENGTH, "m")),
    ("design", "shell_max", Kind::Num(Dimension::LENGTH, "m")),
    ("design", "top", Kind::Int),
    ("fig2", "spin_min", Kind::Int),
    ("fig2", "spin_max", Kind::Int),
    ("fig2", "spin_step", Kind::Int),
    ("gravity", "distance", Kind::Num(Dimension::LENGTH, "m")),
    ("gravity", "shell", Kind::Text),
    ("gravity", "shell_radius", Kind::Num(Dimension::LENGTH, "m")),
    ("output", "fig2", Kind::Text),
    ("output", "protocol", Kind::Text),
    ("output", "trajectory", Kind::Text),
    ("output", "budget", Kind::Text),
    ("output", "designs", Kind::Text),
    ("output", "gravity", Kind::Text),
    ("output", "summary", Kind::Text),
    ("output", "config", Kind::Text),
];

/// Parsed value, tagged by kind.
enum Value {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

fn parse_value(kind: Kind, key: &str, raw: &str, line: usize) -> Result<Value> {
    let bad = |message: String| Error::Parse { line, message };
    Ok(match kind {
        Kind::Num(dim, _) => {
            let v = parse_si(raw, dim).map_err(|e| bad(format!("{key}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{key} must be finite")));
            }
            Value::Num(v)
        }
        Kind::Int => Value::Int(
            raw.parse::<u64>()
                .map_err(|_| bad(format!("{key} must be a non-negative integer, got '{raw}'")))?,
        ),
        Kind::Bool => Value::Bool(match raw {
            "true" => true,
            "false" => false,
            _ => return Err(bad(format!("{key} must be true or false, got '{raw}'"))),
        }),
        Kind::Text => Value::Text(raw.to_string()),
    })
}

fn to_u32(v: u64, key: &str, line: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Parse {
        line,
        message: format!("{key} = {v} is too large"),
    })
}

fn optional_name(s: &str) -> Option<String> {
    (s != "none").then(|| s.to_string())
}

impl RunConfig {
    fn set(&mut self, section: &str, key: &str, value: Value, line: usize) -> Result<()> {
        let text_err = |expected: &str, got: &str| Error::Parse {
            line,
            message: format!("{key} must be {expected}, got '{got}'"),
        };
        match (section, key, value) {
            ("", "seed", Value::Int(v)) => self.seed = v,
            ("particle", "material", Value::Text(s)) => self.particle.material = s,
            ("particle", "radius", Value::Num(v)) => self.particle.radius = v,
            ("particle", "spin", Value::Text(s)) => {
                self.particle.spin = if s == "auto" {
                    None
                } else {
                    Some(s.parse().map_err(|_| text_err("a non-negative integer or 'auto'", &s))?)
                }
            }
            ("particle", "shell", Value::Text(s)) => self.particle.shell = optional_name(&s),
            ("particle", "shell_radius", Value::Num(v)) => self.particle.shell_radius = v,
            ("particle", "counting", Value::Text(s)) => {
                self.particle.counting = match s.as_str() {
                    "anchored" => CountingMode::Anchored,
                    "geometric" => CountingMode::Geometric,
                    _ => return Err(text_err("anchored or geometric", &s)),
                }
            }
            ("particle", "anchor_spin", Value::Num(v)) => self.particle.anchor_spin = v,
            ("particle", "anchor_radius", Value::Num(v)) => self.particle.anchor_radius = v,
            ("protocol", "t0", Value::Num(v)) => self.protocol.t0 = v,
            ("protocol", "gradB", Value::Num(v)) => self.protocol.grad_b = v,
            ("protocol", "theta", Value::Num(v)) => self.protocol.theta = v,
            ("protocol", "p0", Value::Num(v)) => self.protocol.p0 = v,
            ("protocol", "ramp_fraction", Value::Num(v)) => self.protocol.ramp_fraction = v,
            ("protocol", "S_z", Value::Text(s)) => {
                self.protocol.spin_z = if s == "auto" {
                    None
                } else {
                    Some(s.parse().map_err(|_| text_err("a number or 'auto'", &s))?)
                }
            }
            ("protocol", "samples", Value::Int(v)) => self.protocol.samples = v as usize,
            ("protocol", "steps", Value::Int(v)) => self.protocol.steps = v as usize,
            ("protocol", "shots", Value::Int(v)) => self.protocol.shots = v,
            ("environment", "pressure", Value::Num(v)) => self.environment.pressure = v,
            ("environment", "gas_temperature", Value::Num(v)) => self.environment.gas_temperature = v,
            ("environment", "gas_mass", Value::Num(v)) => self.environment.gas_mass = v,
            ("environment", "internal_temperature", Value::Num(v)) => self.environment.internal_temperature = v,
            ("environment", "shield_field", Value::Num(v)) => self.environment.shield_field = v,
            ("environment", "bias_field", Value::Num(v)) => self.environment.bias_field = v,
            ("environment", "visibility_fraction", Value::Num(v)) => self.environment.visibility_fraction = v,
            ("environment", "magnetic_margin", Value::Num(v)) => self.environment.magnetic_margin = v,
            ("environment", "csl_mode", Value::Text(s)) => {
                self.environment.csl_mode = s.parse::<CslMode>().map_err(|_| text_err("naive or calibrated", &s))?
            }
            ("constraints", "T_exp", Value::Num(v)) => self.constraints.t_exp = v,
            ("constraints", "min_dE_over_kT", Value::Num(v)) => self.constraints.min_de_over_kt = v,
            ("constraints", "min_dU_over_kT", Value::Num(v)) => self.constraints.min_du_over_kt = v,
            ("constraints", "max_rotation_alpha", Value::Num(v)) => self.constraints.max_rotation_alpha = v,
            ("constraints", "max_grad_B", Value::Num(v)) => self.constraints.max_grad_b = v,
            ("constraints", "max_t0", Value::Num(v)) => self.constraints.max_t0 = v,
            ("constraints", "require_below_blocking", Value::Bool(b)) => self.constraints.require_below_blocking = b,
            ("constraints", "require_budget", Value::Bool(b)) => self.constraints.require_budget = b,
            ("design", "objective", Value::Text(s)) => {
                self.design.objective = s.parse::<Objective>().map_err(|_| text_err("delta_z or macroscopicity", &s))?
            }
            ("design", "spin_min", Value::Int(v)) => self.design.spin_min = to_u32(v, key, line)?,
            ("design", "spin_max", Value::Int(v)) => self.design.spin_max = to_u32(v, key, line)?,
            ("design", "t0_min", Value::Num(v)) => self.design.t0_min = v,
            ("design", "t0_max", Value::Num(v)) => self.design.t0_max = v,
            ("design", "gradB_min", Value::Num(v)) => self.design.grad_min = v,
            ("design", "gradB_max", Value::Num(v)) => self.design.grad_max = v,
            ("design", "shell", Value::Text(s)) => self.design.shell = optional_name(&s),
            ("design", "shell_min", Value::Num(v)) => self.design.shell_min = v,
            ("design", "shell_max", Value::Num(v)) => self.design.shell_max = v,
            ("design", "top", Value::Int(v)) => self.design.top = v as usize,
            ("fig2", "spin_min", Value::Int(v)) => self.fig2.spin_min = to_u32(v, key, line)?,
            ("fig2", "spin_max", Value::Int(v)) => self.fig2.spin_max = to_u32(v, key, line)?,
            ("fig2", "spin_step", Value::Int(v)) => self.fig2.spin_step = to_u32(v, key, line)?,
            ("gravity", "distance", Value::Num(v)) => self.gravity.distance = v,
            ("gravity", "shell", Value::Text(s)) => self.gravity.shell = s,
            ("gravity", "shell_radius", Value::Num(v)) => self.gravity.shell_radius = v,
            ("output", k, Value::Text(s)) => {
                let slot = match k {
                    "fig2" => &mut self.output.fig2,
                    "protocol" => &mut self.output.protocol,
                    "trajectory" => &mut self.output.trajectory,
                    "budget" => &mut self.output.budget,
                    "designs" => &mut self.output.designs,
                    "gravity" => &mut self.output.gravity,
                    "summary" => &mut self.output.summary,
                    _ => &mut self.output.config,
                };
                *slot = s;
            }
            _ => unreachable!("key table and setter disagree for {section}.{key}"),
        }
        Ok(())
    }

    /// Echo text of one key: value plus unit.
    fn get(&self, section: &str, key: &str) -> String {
        let n = |v: f64, unit: &str| if unit.is_empty() { format!("{v}") } else { format!("{v} {unit}") };
        let unit = KEYS
            .iter()
            .find(|(s, k, _)| *s == section && *k == key)
            .map(|(_, _, kind)| match kind {
                Kind::Num(_, u) => *u,
                _ => "",
            })
            .unwrap_or("");
        let num = |v: f64| n(v, unit);
        let name = |o: &Option<String>| o.clone().unwrap_or_else(|| "none".into());
        match (section, key) {
            ("", "seed") => self.seed.to_string(),
            ("particle", "material") => self.particle.material.clone(),
            ("particle", "radius") => num(self.particle.radius),
            ("particle", "spin") => self.particle.spin.map_or("auto".into(), |s| s.to_string()),
            ("particle", "shell") => name(&self.particle.shell),
            ("particle", "shell_radius") => num(self.particle.shell_radius),
            ("particle", "counting") => match self.particle.counting {
                CountingMode::Anchored => "anchored".into(),
                CountingMode::Geometric => "geometric".into(),
            },
            ("particle", "anchor_spin") => num(self.particle.anchor_spin),
            ("particle", "anchor_radius") => num(self.particle.anchor_radius),
            ("protocol", "t0") => num(self.protocol.t0),
            ("protocol", "gradB") => num(self.protocol.grad_b),
            ("protocol", "theta") => num(self.protocol.theta),
            ("protocol", "p0") => num(self.protocol.p0),
            ("protocol", "ramp_fraction") => num(self.protocol.ramp_fraction),
            ("protocol", "S_z") => self.protocol.spin_z.map_or("auto".into(), |s| s.to_string()),
            ("protocol", "samples") => self.protocol.samples.to_string(),
            ("protocol", "steps") => self.protocol.steps.to_string(),
            ("protocol", "shots") => self.protocol.shots.to_string(),
            ("environment", "pressure") => num(self.environment.pressure),
            ("environment", "gas_temperature") => num(self.environment.gas_temperature),
            ("environment", "gas_mass") => num(self.environment.gas_mass),
            ("environment", "internal_temperature") => num(self.environment.internal_temperature),
            ("environment", "shield_field") => num(self.environment.shield_field),
            ("environment", "bias_field") => num(self.environment.bias_field),
            ("environment", "visibility_fraction") => num(self.environment.visibility_fraction),
            ("environment", "magnetic_margin") => num(self.environment.magnetic_margin),
            ("environment", "csl_mode") => self.environment.csl_mode.to_string(),
            ("constraints", "T_exp") => num(self.constraints.t_exp),
            ("constraints", "min_dE_over_kT") => num(self.constraints.min_de_over_kt),
            ("constraints", "min_dU_over_kT") => num(self.constraints.min_du_over_kt),
            ("constraints", "max_rotation_alpha") => num(self.constraints.max_rotation_alpha),
            ("constraints", "max_grad_B") => num(self.constraints.max_grad_b),
            ("constraints", "max_t0") => num(self.constraints.max_t0),
            ("constraints", "require_below_blocking") => self.constraints.require_below_blocking.to_string(),
            ("constraints", "require_budget") => self.constraints.require_budget.to_string(),
            ("design", "objective") => self.design.objective.to_string(),
            ("design", "spin_min") => self.design.spin_min.to_string(),
            ("design", "spin_max") => self.design.spin_max.to_string(),
            ("design", "t0_min") => num(self.design.t0_min),
            ("design", "t0_max") => num(self.design.t0_max),
            ("design", "gradB_min") => num(self.design.grad_min),
            ("design", "gradB_max") => num(self.design.grad_max),
            ("design", "shell") => name(&self.design.shell),
            ("design", "shell_min") => num(self.design.shell_min),
            ("design", "shell_max") => num(self.design.shell_max),
            ("design", "top") => self.design.top.to_string(),
            ("fig2", "spin_min") => self.fig2.spin_min.to_string(),
            ("fig2", "spin_max") => self.fig2.spin_max.to_string(),
            ("fig2", "spin_step") => self.fig2.spin_step.to_string(),
            ("gravity", "distance") => num(self.gravity.distance),
            ("gravity", "shell") => self.gravity.shell.clone(),
            ("gravity", "shell_radius") => num(self.gravity.shell_radius),
            ("output", "fig2") => self.output.fig2.clone(),
            ("output", "protocol") => self.output.protocol.clone(),
            ("output", "trajectory") => self.output.trajectory.clone(),
            ("output", "budget") => self.output.budget.clone(),
            ("output", "designs") => self.output.designs.clone(),
            ("output", "gravity") => self.output.gravity.clone(),
            ("output", "summary") => self.output.summary.clone(),
            ("output", "config") => self.output.config.clone(),
            _ => unreachable!("no getter for {section}.{key}"),
        }
    }

    /// Built-in database plus the inline definitions.
    pub fn database(&self) -> Result<MaterialDb> {
        let mut db = MaterialDb::builtin();
        for m in &self.materials {
            db.register(m.clone())?;
        }
        for s in &self.shells {
            db.register_shell(s.clone())?;
        }
        Ok(db)
    }

    pub fn counting(&self) -> SpinCounting<f64> {
        match self.particle.counting {
            CountingMode::Geometric => SpinCounting::Geometric,
            CountingMode::Anchored => SpinCounting::Anchored {
                spin: self.particle.anchor_spin,
                radius: self.particle.anchor_radius,
            },
        }
    }

    pub fn particle_spec(&self) -> Result<ParticleSpec<f64>> {
        let db = self.database()?;
        let core = db.get(&self.particle.material)?.clone();
        let spec = match &self.particle.shell {
            Some(shell) => ParticleSpec::core_shell(
                core,
                self.particle.radius,
                db.shell(shell)?.clone(),
                self.particle.shell_radius,
            ),
            None => ParticleSpec::sphere(core, self.particle.radius),
        };
        let spec = match self.particle.spin {
            Some(s) => spec.with_spin(s),
            None => spec,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig<f64>> {
        let particle = self.particle_spec()?;
        let spin_z = match self.protocol.spin_z {
            Some(s) => s,
            None => particle.spin()? as f64,
        };
        let p = &self.protocol;
        let mut cfg = ProtocolConfig::new(particle, spin_z, p.grad_b, p.t0);
        cfg.theta = p.theta;
        cfg.p0 = p.p0;
        cfg.ramp_fraction = p.ramp_fraction;
        cfg.samples = p.samples;
        cfg.steps = p.steps;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn design_problem(&self) -> Result<DesignProblem<f64>> {
        let db = self.database()?;
        let shell = match &self.design.shell {
            Some(s) => Some(db.shell(s)?.clone()),
            None => None,
        };
        Ok(DesignProblem {
            material: db.get(&self.particle.material)?.clone(),
            shell,
            counting: self.counting(),
            constraints: self.constraints.clone(),
            env: self.environment.clone(),
            objective: self.design.objective,
        })
    }

    /// Search box, clipped to the constraint maxima.
    pub fn search_spec(&self) -> SearchSpec<f64> {
        let d = &self.design;
        let t_hi = d.t0_max.min(self.constraints.max_t0);
        let g_hi = d.grad_max.min(self.constraints.max_grad_b);
        SearchSpec {
            spin: (d.spin_min, d.spin_max),
            t0: (d.t0_min.min(t_hi), t_hi),
            grad_b: (d.grad_min.min(g_hi), g_hi),
            shell_outer: d.shell.as_ref().map(|_| (d.shell_min, d.shell_max)),
        }
    }

    pub fn fig2_spins(&self) -> Vec<u32> {
        let f = &self.fig2;
        (f.spin_min..=f.spin_max).step_by(f.spin_step.max(1) as usize).collect()
    }

    /// Two identical core-shell particles for the force comparison.
    pub fn gravity_particle(&self) -> Result<ParticleSpec<f64>> {
        let db = self.database()?;
        let core = db.get(&self.particle.material)?.clone();
        let shell = db.shell(&self.gravity.shell)?.clone();
        let mut spec = ParticleSpec::core_shell(core, self.particle.radius, shell, self.gravity.shell_radius);
        spec.spin_override = self.particle.spin;
        spec.validate()?;
        Ok(spec)
    }

    /// Cross-field checks that single keys cannot catch.
    pub fn validate(&self) -> Result<()> {
        self.protocol_config()?;
        self.environment.validate()?;
        self.constraints.validate()?;
        let d = &self.design;
        if d.spin_min == 0 || d.spin_min > d.spin_max {
            return Err(Error::invalid("design spin range must satisfy 0 < spin_min <= spin_max"));
        }
        if !(d.t0_min > 0.0 && d.t0_min <= d.t0_max) {
            return Err(Error::invalid("design t0 range must satisfy 0 < t0_min <= t0_max"));
        }
        if !(d.grad_min >= 0.0 && d.grad_min <= d.grad_max) {
            return Err(Error::invalid("design gradient range must satisfy 0 <= gradB_min <= gradB_max"));
        }
        if d.shell.is_some() && !(d.shell_min > 0.0 && d.shell_min <= d.shell_max) {
            return Err(Error::invalid("design shell range must satisfy 0 < shell_min <= shell_max"));
        }
        self.design_problem()?;
        let f = &self.fig2;
        if f.spin_min == 0 || f.spin_min > f.spin_max || f.spin_step == 0 {
            return Err(Error::invalid("fig2 needs 0 < spin_min <= spin_max and spin_step > 0"));
        }
        if !(self.gravity.distance > 0.0) {
            return Err(Error::invalid("gravity distance must be positive"));
        }
        self.gravity_particle()?;
        Ok(())
    }
}

/// A config together with the keys that were left at their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// `section.key` (root keys without a dot).
    pub defaulted: BTreeSet<String>,
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Parses and validates a run config.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let doc = kvfile::parse(text)?;
    let mut cfg = RunConfig::default();
    let mut explicit = BTreeSet::new();
    let mut seen_sections = BTreeSet::new();
    for section in &doc.sections {
        match section.kind.as_str() {
            "material" => {
                let name = section.name.clone().unwrap_or_default();
                let db = cfg.database()?;
                let base = db.get(&name).ok();
                let m = material_with_overrides(base, section)?;
                cfg.materials.retain(|x| x.name != m.name);
                cfg.materials.push(m);
            }
            "shell" => {
                let s = shell_from_section(section)?;
                cfg.shells.retain(|x| x.name != s.name);
                cfg.shells.push(s);
            }
            kind => apply_section(&mut cfg, &mut explicit, &mut seen_sections, kind, section)?,
        }
    }
    cfg.validate()?;
    let defaulted = KEYS
        .iter()
        .map(|(s, k, _)| qualified(s, k))
        .filter(|q| !explicit.contains(q))
        .collect();
    Ok(LoadedConfig { config: cfg, defaulted })
}

fn apply_section(
    cfg: &mut RunConfig,
    explicit: &mut BTreeSet<String>,
    seen: &mut BTreeSet<String>,
    kind: &str,
    section: &Section,
) -> Result<()> {
    if !KEYS.iter().any(|(s, _, _)| *s == kind) {
        return Err(Error::Parse {
            line: section.line,
            message: format!("unknown section [{}]", section.label()),
        });
    }
    if section.name.is_some() {
        return Err(Error::Parse {
            line: section.line,
            message: format!("section [{kind}] takes no name"),
        });
    }
    if !seen.insert(kind.to_string()) {
        return Err(Error::Parse {
            line: section.line,
            message: format!("section [{kind}] appears twice"),
        });
    }
    for e in &section.entries {
        let (_, _, spec) = KEYS
            .iter()
            .find(|(s, k, _)| *s == kind && *k == e.key)
            .ok_or_else(|| Error::UnknownKey {
                section: section.label(),
                key: e.key.clone(),
                line: e.line,
            })?;
        let value = parse_value(*spec, &e.key, &e.value, e.line)?;
        cfg.set(kind, &e.key, value, e.line)?;
        explicit.insert(qualified(kind, &e.key));
    }
    Ok(())
}

/// Prints the full config in its own syntax. Keys left at their defaults
/// carry a `# defaulted: true` marker.
pub fn echo(loaded: &LoadedConfig) -> String {
    let cfg = &loaded.config;
    let mut out = format!("# spincat config schema_version={CONFIG_SCHEMA_VERSION}\n");
    let mut current = None;
    for (section, key, _) in KEYS {
        if current != Some(*section) {
            if !section.is_empty() {
                let _ = writeln!(out, "\n[{section}]");
            }
            current = Some(*section);
        }
        let q = qualified(section, key);
        let marker = if loaded.defaulted.contains(&q) { "  # defaulted: true" } else { "" };
        let _ = writeln!(out, "{key} = {}{marker}", cfg.get(section, key));
    }
    for m in &cfg.materials {
        out.push('\n');
        out.push_str(&format_material(m));
    }
    for s in &cfg.shells {
        let _ = write!(out, "\n[shell {}]\nrho = {}\n", s.name, s.rho);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_scenario() {
        let l = parse_config("").unwrap();
        let c = &l.config;
        assert_eq!(c.particle.spin, Some(500));
        assert_eq!(c.protocol.t0, 1e-5);
        assert_eq!(c.protocol.grad_b, 1e6);
        assert!((c.environment.pressure - 1e-7).abs() < 1e-20);
        assert_eq!(c.environment.gas_temperature, 0.3);
        assert_eq!(l.defaulted.len(), KEYS.len());
        assert_eq!(*c, RunConfig::default());
    }

    #[test]
    fn units_are_converted_and_checked() {
        let l = parse_config("[protocol]\nt0 = 20 us\ngradB = 1e6 T/m\n[environment]\npressure = 1e-9 mbar\n").unwrap();
        assert!((l.config.protocol.t0 - 2e-5).abs() < 1e-18);
        assert!((l.config.environment.pressure - 1e-7).abs() < 1e-20);
        assert!(!l.defaulted.contains("protocol.t0"));
        assert!(l.defaulted.contains("protocol.theta"));
        let err = parse_config("[protocol]\nt0 = 3 m\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(err.to_string().contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn negative_t0_rejected() {
        let err = parse_config("[protocol]\nt0 = -1e-6\n").unwrap_err();
        assert!(err.to_string().contains("t0 must be positive"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        match parse_config("[protocol]\nt0 = 1e-5\ncolour = red\n") {
            Err(Error::UnknownKey { key, line, section }) => {
                assert_eq!(key, "colour");
                assert_eq!(line, 3);
                assert_eq!(section, "protocol");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("[laser]\npower = 1\n").is_err());
        assert!(parse_config("bogus = 1\n").is_err());
        assert!(parse_config("[protocol]\n[protocol]\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "seed = 7\n[protocol]\ngradB = 1e6 T/m\ntheta = 0.3\n[particle]\nspin = auto\nshell = silica\nshell_radius = 2 um\n[design]\nshell = silica\n[material yig]\nK_x = 6e4\n[shell glass]\nrho = 2500\n";
        let l = parse_config(text).unwrap();
        let e = echo(&l);
        assert!(e.contains("gradB = 1000000 T/m\n"), "{e}");
        assert!(e.contains("t0 = 0.00001 s  # defaulted: true"), "{e}");
        let again = parse_config(&e).unwrap();
        assert_eq!(again.config, l.config);
        assert_eq!(echo(&LoadedConfig { defaulted: l.defaulted.clone(), ..again }), e);
        assert_eq!(l.config.database().unwrap().get("yig").unwrap().k_x, 6e4);
    }

    #[test]
    fn inline_material_definition() {
        let text = "[material foo]\nrho = 4000\na_lattice = 1 nm\nspins_per_cell = 2\ns_ion = 2.5\nK_x = 1e4\nanisotropy_ratio = 0.02\nomega0 = 1e12 Hz\nT_blocking = 10 K\ngilbert_alpha = 1e-4\ngamma_r = 1.76e11\n[particle]\nmaterial = foo\n";
        let l = parse_config(text).unwrap();
        assert_eq!(l.config.particle_spec().unwrap().core.name, "foo");
        let bad = "[particle]\nmaterial = unobtainium\n";
        assert!(matches!(parse_config(bad), Err(Error::UnknownMaterial(_))));
    }

    #[test]
    fn derived_objects() {
        let c = RunConfig::default();
        let p = c.protocol_config().unwrap();
        assert_eq!(p.spin_z, 500.0);
        let spins = c.fig2_spins();
        assert_eq!(spins.first(), Some(&100));
        assert_eq!(spins.last(), Some(&2000));
        assert!(spins.contains(&500));
        let s = c.search_spec();
        assert_eq!(s.t0.1, 1e-5);
        assert_eq!(s.grad_b.1, 1e6);
        assert!(s.shell_outer.is_none());
        let g = c.gravity_particle().unwrap();
        assert_eq!(g.shell_outer_radius, 2e-6);
    }
}
