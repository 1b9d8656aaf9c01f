//! Material database and particle geometry.
//!
//! A particle is a magnetic sphere, optionally wrapped in a non-magnetic
//! shell. From that we derive mass, moment of inertia, surface area, and the
//! total uncompensated spin `S` of the core.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kvfile::{self, Section};
use crate::scalar::{round_to_even, Real};
use crate::units::{parse_si, Dimension};

/// Version of the shipped database file. Bumped whenever its values change.
pub const MATERIAL_DB_VERSION: u32 = 1;

const BUILTIN_DB: &str = include_str!("../data/materials.db");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialParams<T> {
    pub name: String,
    /// Mass density (kg/m^3).
    pub rho: T,
    /// Unit-cell edge (m).
    pub a_lattice: T,
    /// Uncompensated magnetic ions per unit cell.
    pub spins_per_cell: u32,
    /// Spin of one ion (half-integer).
    pub s_ion: T,
    /// Easy-axis anisotropy constant (J/m^3).
    pub k_x: T,
    /// sqrt(K_y/K_x).
    pub anisotropy_ratio: T,
    /// Characteristic attempt frequency (rad/s).
    pub omega0: T,
    pub g_l: T,
    pub gilbert_alpha: T,
    /// Gyromagnetic ratio (rad s^-1 T^-1).
    pub gamma_r: T,
    pub t_blocking: T,
    /// Exchange coupling (J). Informational only.
    pub j_exchange: T,
    /// Surface lattice layers without ordered spins.
    pub dead_layers: u32,
}

impl<T: Real> MaterialParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("a_lattice", self.a_lattice),
            ("K_x", self.k_x),
            ("omega0", self.omega0),
        ];
        for (what, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "material '{}': {what} must be positive, got {v}",
                    self.name
                )));
            }
        }
        if !(self.anisotropy_ratio > T::zero() && self.anisotropy_ratio < T::one()) {
            return Err(Error::OutOfRange {
                what: "anisotropy_ratio",
                value: self.anisotropy_ratio.to_string(),
                range: "(0, 1)".into(),
            });
        }
        let twice = self.s_ion * T::lit(2.0);
        if !(self.s_ion > T::zero()) || twice.fract() != T::zero() {
            return Err(Error::invalid(format!(
                "material '{}': s_ion must be a positive half-integer, got {}",
                self.name, self.s_ion
            )));
        }
        for (what, v) in [
            ("g_L", self.g_l),
            ("gilbert_alpha", self.gilbert_alpha),
            ("gamma_r", self.gamma_r),
            ("T_blocking", self.t_blocking),
            ("J_exchange", self.j_exchange),
        ] {
            if !(v >= T::zero()) {
                return Err(Error::invalid(format!(
                    "material '{}': {what} must be non-negative, got {v}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn is_magnetic(&self) -> bool {
        self.spins_per_cell > 0 && self.s_ion > T::zero()
    }

    /// Thickness of the dead surface shell (m).
    pub fn dead_thickness(&self) -> T {
        T::from_count(self.dead_layers as u64) * self.a_lattice
    }

    /// Spin carried per unit volume of live material (1/m^3).
    pub fn spin_density(&self) -> T {
        self.s_ion * T::from_count(self.spins_per_cell as u64) / self.a_lattice.powi(3)
    }

    pub fn cast<U: Real>(&self) -> MaterialParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        MaterialParams {
            name: self.name.clone(),
            rho: c(self.rho),
            a_lattice: c(self.a_lattice),
            spins_per_cell: self.spins_per_cell,
            s_ion: c(self.s_ion),
            k_x: c(self.k_x),
            anisotropy_ratio: c(self.anisotropy_ratio),
            omega0: c(self.omega0),
            g_l: c(self.g_l),
            gilbert_alpha: c(self.gilbert_alpha),
            gamma_r: c(self.gamma_r),
            t_blocking: c(self.t_blocking),
            j_exchange: c(self.j_exchange),
            dead_layers: self.dead_layers,
        }
    }
}

/// Non-magnetic shell material.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellMaterial<T> {
    pub name: String,
    pub rho: T,
}

const MATERIAL_KEYS: [(&str, Dimension); 14] = [
    ("rho", Dimension::DENSITY),
    ("a_lattice", Dimension::LENGTH),
    ("spins_per_cell", Dimension::NONE),
    ("s_ion", Dimension::NONE),
    ("K_x", Dimension::ENERGY_DENSITY),
    ("anisotropy_ratio", Dimension::NONE),
    ("omega0", Dimension::FREQUENCY),
    ("g_L", Dimension::NONE),
    ("gilbert_alpha", Dimension::NONE),
    ("gamma_r", Dimension::GYROMAGNETIC),
    ("T_blocking", Dimension::TEMPERATURE),
    ("J_exchange", Dimension::ENERGY),
    ("dead_layers", Dimension::NONE),
    ("name", Dimension::NONE),
];

fn parse_count(text: &str, key: &str, line: usize) -> Result<u32> {
    text.trim().parse::<u32>().map_err(|_| Error::Parse {
        line,
        message: format!("{key} must be a non-negative integer, got '{text}'"),
    })
}

/// Applies `key = value` overrides onto a material. Used by both the
/// database loader and inline config definitions.
pub(crate) fn apply_material_key(
    m: &mut MaterialParams<f64>,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<()> {
    let dim = MATERIAL_KEYS
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
            line,
        })?;
    let num = |v: &str| {
        parse_si(v, dim).map_err(|e| Error::Parse {
            line,
            message: format!("{key}: {e}"),
        })
    };
    match key {
        "name" => m.name = value.to_string(),
        "rho" => m.rho = num(value)?,
        "a_lattice" => m.a_lattice = num(value)?,
        "spins_per_cell" => m.spins_per_cell = parse_count(value, key, line)?,
        "s_ion" => m.s_ion = num(value)?,
        "K_x" => m.k_x = num(value)?,
        "anisotropy_ratio" => m.anisotropy_ratio = num(value)?,
        "omega0" => m.omega0 = num(value)?,
        "g_L" => m.g_l = num(value)?,
        "gilbert_alpha" => m.gilbert_alpha = num(value)?,
        "gamma_r" => m.gamma_r = num(value)?,
        "T_blocking" => m.t_blocking = num(value)?,
        "J_exchange" => m.j_exchange = num(value)?,
        "dead_layers" => m.dead_layers = parse_count(value, key, line)?,
        _ => unreachable!(),
    }
    Ok(())
}

/// Prints a material in database syntax.
pub fn format_material(m: &MaterialParams<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[material {}]", m.name);
    let _ = writeln!(out, "rho = {}", m.rho);
    let _ = writeln!(out, "a_lattice = {}", m.a_lattice);
    let _ = writeln!(out, "spins_per_cell = {}", m.spins_per_cell);
    let _ = writeln!(out, "s_ion = {}", m.s_ion);
    let _ = writeln!(out, "K_x = {}", m.k_x);
    let _ = writeln!(out, "anisotropy_ratio = {}", m.anisotropy_ratio);
    let _ = writeln!(out, "omega0 = {}", m.omega0);
    let _ = writeln!(out, "g_L = {}", m.g_l);
    let _ = writeln!(out, "gilbert_alpha = {}", m.gilbert_alpha);
    let _ = writeln!(out, "gamma_r = {}", m.gamma_r);
    let _ = writeln!(out, "T_blocking = {}", m.t_blocking);
    let _ = writeln!(out, "J_exchange = {}", m.j_exchange);
    let _ = writeln!(out, "dead_layers = {}", m.dead_layers);
    out
}

fn material_from_section(section: &Section) -> Result<MaterialParams<f64>> {
    let name = section.name.clone().ok_or_else(|| Error::Parse {
        line: section.line,
        message: "material section needs a name: [material <name>]".into(),
    })?;
    let mut m = MaterialParams {
        name,
        rho: f64::NAN,
        a_lattice: f64::NAN,
        spins_per_cell: 0,
        s_ion: 0.0,
        k_x: f64::NAN,
        anisotropy_ratio: f64::NAN,
        omega0: f64::NAN,
        g_l: 2.0,
        gilbert_alpha: 0.0,
        gamma_r: 0.0,
        t_blocking: 0.0,
        j_exchange: 0.0,
        dead_layers: 0,
    };
    for e in &section.entries {
        if e.key == "name" {
            return Err(Error::UnknownKey {
                section: section.label(),
                key: e.key.clone(),
                line: e.line,
            });
        }
        apply_material_key(&mut m, &section.label(), &e.key, &e.value, e.line)?;
    }
    for required in ["rho", "a_lattice", "K_x", "anisotropy_ratio", "omega0"] {
        if section.get(required).is_none() {
            return Err(Error::Parse {
                line: section.line,
                message: format!("material '{}' is missing required key '{required}'", m.name),
            });
        }
    }
    m.validate()?;
    Ok(m)
}

pub(crate) fn shell_from_section(section: &Section) -> Result<ShellMaterial<f64>> {
    let name = section.name.clone().ok_or_else(|| Error::Parse {
        line: section.line,
        message: "shell section needs a name: [shell <name>]".into(),
    })?;
    let mut rho = None;
    for e in &section.entries {
        if e.key != "rho" {
            return Err(Error::UnknownKey {
                section: section.label(),
                key: e.key.clone(),
                line: e.line,
            });
        }
        rho = Some(parse_si(&e.value, Dimension::DENSITY).map_err(|err| Error::Parse {
            line: e.line,
            message: format!("rho: {err}"),
        })?);
    }
    let rho = rho.ok_or_else(|| Error::Parse {
        line: section.line,
        message: format!("shell '{name}' is missing 'rho'"),
    })?;
    Ok(ShellMaterial { name, rho })
}

/// Material from a config section: overrides on top of `base` when the name
/// is already known, otherwise a complete definition.
pub(crate) fn material_with_overrides(
    base: Option<&MaterialParams<f64>>,
    section: &Section,
) -> Result<MaterialParams<f64>> {
    let Some(base) = base else {
        return material_from_section(section);
    };
    let mut m = base.clone();
    for e in &section.entries {
        if e.key == "name" {
            return Err(Error::UnknownKey {
                section: section.label(),
                key: e.key.clone(),
                line: e.line,
            });
        }
        apply_material_key(&mut m, &section.label(), &e.key, &e.value, e.line)?;
    }
    m.validate()?;
    Ok(m)
}

/// In-memory material database. Immutable once built; cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct MaterialDb {
    pub version: u32,
    materials: BTreeMap<String, MaterialParams<f64>>,
    shells: BTreeMap<String, ShellMaterial<f64>>,
}

impl MaterialDb {
    /// The database shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_DB).expect("built-in material database is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = kvfile::parse(text)?;
        let mut db = MaterialDb::default();
        for section in &doc.sections {
            match section.kind.as_str() {
                "" => {
                    for e in &section.entries {
                        if e.key != "version" {
                            return Err(Error::UnknownKey {
                                section: String::new(),
                                key: e.key.clone(),
                                line: e.line,
                            });
                        }
                        db.version = e.value.parse().map_err(|_| Error::Parse {
                            line: e.line,
                            message: format!("version must be an integer, got '{}'", e.value),
                        })?;
                    }
                }
                "material" => {
                    let m = material_from_section(section)?;
                    db.register(m)?;
                }
                "shell" => db.register_shell(shell_from_section(section)?)?,
                other => {
                    return Err(Error::Parse {
                        line: section.line,
                        message: format!("unknown section kind '{other}'"),
                    })
                }
            }
        }
        Ok(db)
    }

    pub fn register(&mut self, material: MaterialParams<f64>) -> Result<()> {
        material.validate()?;
        self.materials.insert(material.name.clone(), material);
        Ok(())
    }

    pub fn register_shell(&mut self, shell: ShellMaterial<f64>) -> Result<()> {
        if !(shell.rho >= 0.0) {
            return Err(Error::invalid(format!(
                "shell '{}': rho must be non-negative",
                shell.name
            )));
        }
        self.shells.insert(shell.name.clone(), shell);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&MaterialParams<f64>> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn shell(&self, name: &str) -> Result<&ShellMaterial<f64>> {
        self.shells
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }

    pub fn shell_names(&self) -> impl Iterator<Item = &str> {
        self.shells.keys().map(String::as_str)
    }
}

/// Particle geometry: magnetic core plus optional shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSpec<T> {
    pub core: MaterialParams<T>,
    pub core_radius: T,
    pub shell: Option<ShellMaterial<T>>,
    /// Equals `core_radius` when there is no shell.
    pub shell_outer_radius: T,
    /// Explicit spin, bypassing lattice counting.
    pub spin_override: Option<u32>,
}

impl<T: Real> ParticleSpec<T> {
    pub fn sphere(core: MaterialParams<T>, radius: T) -> Self {
        Self {
            core,
            core_radius: radius,
            shell: None,
            shell_outer_radius: radius,
            spin_override: None,
        }
    }

    pub fn core_shell(
        core: MaterialParams<T>,
        core_radius: T,
        shell: ShellMaterial<T>,
        outer_radius: T,
    ) -> Self {
        Self {
            core,
            core_radius,
            shell: Some(shell),
            shell_outer_radius: outer_radius,
            spin_override: None,
        }
    }

    pub fn with_spin(mut self, spin: u32) -> Self {
        self.spin_override = Some(spin);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.core_radius > T::zero()) || !self.core_radius.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "core radius must be positive, got {}",
                self.core_radius
            )));
        }
        if !(self.shell_outer_radius >= self.core_radius) {
            return Err(Error::DegenerateGeometry(format!(
                "shell outer radius {} is smaller than core radius {}",
                self.shell_outer_radius, self.core_radius
            )));
        }
        if self.shell.is_none() && self.shell_outer_radius != self.core_radius {
            return Err(Error::DegenerateGeometry(
                "shell outer radius given without a shell material".into(),
            ));
        }
        Ok(())
    }

    pub fn outer_radius(&self) -> T {
        self.shell_outer_radius
    }

    /// Physical core volume, dead layers included.
    pub fn core_volume(&self) -> T {
        sphere_volume(self.core_radius)
    }

    pub fn core_mass(&self) -> T {
        self.core.rho * self.core_volume()
    }

    pub fn shell_mass(&self) -> T {
        match &self.shell {
            Some(s) => s.rho * (sphere_volume(self.shell_outer_radius) - self.core_volume()),
            None => T::zero(),
        }
    }

    pub fn mass(&self) -> T {
        self.core_mass() + self.shell_mass()
    }

    /// Spin used by the physics: explicit override, else lattice count.
    pub fn spin(&self) -> Result<u32> {
        match self.spin_override {
            Some(s) => Ok(s),
            None => total_spin(self),
        }
    }

    /// True when an explicit spin disagrees with the lattice count.
    pub fn spin_count_discrepancy(&self) -> Option<(u32, u32)> {
        let explicit = self.spin_override?;
        let counted = total_spin(self).ok()?;
        (explicit != counted).then_some((explicit, counted))
    }

    pub fn cast<U: Real>(&self) -> ParticleSpec<U> {
        ParticleSpec {
            core: self.core.cast(),
            core_radius: U::lit(self.core_radius.as_f64()),
            shell: self.shell.as_ref().map(|s| ShellMaterial {
                name: s.name.clone(),
                rho: U::lit(s.rho.as_f64()),
            }),
            shell_outer_radius: U::lit(self.shell_outer_radius.as_f64()),
            spin_override: self.spin_override,
        }
    }
}

pub fn sphere_volume<T: Real>(r: T) -> T {
    T::lit(4.0 / 3.0) * T::PI() * r.powi(3)
}

/// Lattice count of uncompensated spin in the live (non-dead) core,
/// rounded to the nearest even integer.
pub fn total_spin<T: Real>(spec: &ParticleSpec<T>) -> Result<u32> {
    SpinCounting::Geometric.count(&spec.core, spec.core_radius)
}

/// Mass (kg) and moment of inertia (kg m^2) about a diameter.
pub fn mass_and_inertia<T: Real>(spec: &ParticleSpec<T>) -> Result<(T, T)> {
    spec.validate()?;
    let two_fifths = T::lit(0.4);
    let rc = spec.core_radius;
    let ro = spec.shell_outer_radius;
    let mut inertia = two_fifths * spec.core_mass() * rc * rc;
    let m_shell = spec.shell_mass();
    if m_shell > T::zero() && ro > rc {
        inertia += two_fifths * m_shell * (ro.powi(5) - rc.powi(5)) / (ro.powi(3) - rc.powi(3));
    }
    Ok((spec.mass(), inertia))
}

pub fn surface_area<T: Real>(spec: &ParticleSpec<T>) -> T {
    T::lit(4.0) * T::PI() * spec.shell_outer_radius.powi(2)
}

/// How core radius maps to total spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpinCounting<T> {
    /// s_ion * spins_per_cell * V_live / a^3.
    Geometric,
    /// Geometric count rescaled by a constant so that a reference core
    /// radius carries exactly the reference spin.
    Anchored { spin: T, radius: T },
}

impl<T: Real> SpinCounting<T> {
    /// Conventional pairing used to reproduce the published spectrum:
    /// S = 500 in a 10 nm radius core.
    pub fn reference() -> Self {
        SpinCounting::Anchored {
            spin: T::lit(500.0),
            radius: T::lit(10e-9),
        }
    }

    fn scale(&self, material: &MaterialParams<T>) -> Result<T> {
        match *self {
            SpinCounting::Geometric => Ok(T::one()),
            SpinCounting::Anchored { spin, radius } => {
                let raw = raw_spin(material, radius)?;
                if !(raw > T::zero()) || !(spin > T::zero()) {
                    return Err(Error::DegenerateGeometry(format!(
                        "anchor (S = {spin}, R = {radius}) leaves no live core"
                    )));
                }
                Ok(spin / raw)
            }
        }
    }

    /// Unrounded spin for a core radius.
    pub fn continuous(&self, material: &MaterialParams<T>, core_radius: T) -> Result<T> {
        Ok(self.scale(material)? * raw_spin(material, core_radius)?)
    }

    pub fn count(&self, material: &MaterialParams<T>, core_radius: T) -> Result<u32> {
        let s = round_to_even(self.continuous(material, core_radius)?);
        s.to_u32()
            .ok_or_else(|| Error::Numeric(format!("spin count {s} does not fit in u32")))
    }

    /// Core radius carrying `spin` under this convention.
    pub fn radius_for_spin(&self, material: &MaterialParams<T>, spin: T) -> Result<T> {
        if !material.is_magnetic() {
            return Err(Error::invalid(format!(
                "material '{}' carries no spin",
                material.name
            )));
        }
        if !(spin > T::zero()) {
            return Err(Error::DegenerateGeometry(
                "cannot invert a spin of zero to a radius".into(),
            ));
        }
        let per_volume = self.scale(material)? * material.spin_density();
        let live = (spin / (per_volume * T::lit(4.0 / 3.0) * T::PI())).cbrt();
        Ok(live + material.dead_thickness())
    }
}

fn raw_spin<T: Real>(material: &MaterialParams<T>, core_radius: T) -> Result<T> {
    if !material.is_magnetic() {
        return Err(Error::invalid(format!(
            "material '{}' carries no spin",
            material.name
        )));
    }
    let live = core_radius - material.dead_thickness();
    if !(live > T::zero()) {
        return Err(Error::DegenerateGeometry(format!(
            "live radius {live} m is not positive (core {core_radius} m, {} dead layers)",
            material.dead_layers
        )));
    }
    Ok(material.spin_density() * sphere_volume(live))
}
