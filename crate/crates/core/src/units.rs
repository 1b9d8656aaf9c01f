//! Dimensioned quantities over the (kg, m, s, K, A) basis.
//!
//! Only what the simulator needs: a runtime dimension vector, checked
//! arithmetic, a small unit-string parser for config files, and the handful
//! of non-SI conversions that appear at I/O boundaries.

use std::fmt;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exponents of (kg, m, s, K, A).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Dimension(pub [i8; 5]);

impl Dimension {
    pub const NONE: Self = Self([0, 0, 0, 0, 0]);
    pub const MASS: Self = Self([1, 0, 0, 0, 0]);
    pub const LENGTH: Self = Self([0, 1, 0, 0, 0]);
    pub const TIME: Self = Self([0, 0, 1, 0, 0]);
    pub const TEMPERATURE: Self = Self([0, 0, 0, 1, 0]);
    pub const CURRENT: Self = Self([0, 0, 0, 0, 1]);
    pub const AREA: Self = Self([0, 2, 0, 0, 0]);
    pub const VOLUME: Self = Self([0, 3, 0, 0, 0]);
    pub const FREQUENCY: Self = Self([0, 0, -1, 0, 0]);
    pub const VELOCITY: Self = Self([0, 1, -1, 0, 0]);
    pub const MOMENTUM: Self = Self([1, 1, -1, 0, 0]);
    pub const FORCE: Self = Self([1, 1, -2, 0, 0]);
    pub const ENERGY: Self = Self([1, 2, -2, 0, 0]);
    pub const PRESSURE: Self = Self([1, -1, -2, 0, 0]);
    pub const DENSITY: Self = Self([1, -3, 0, 0, 0]);
    pub const ENERGY_DENSITY: Self = Self::PRESSURE;
    pub const FIELD: Self = Self([1, 0, -2, 0, -1]);
    pub const FIELD_GRADIENT: Self = Self([1, -1, -2, 0, -1]);
    pub const GYROMAGNETIC: Self = Self([-1, 0, 1, 0, 1]);

    pub fn mul(self, other: Self) -> Self {
        let mut out = [0i8; 5];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i] + other.0[i];
        }
        Self(out)
    }

    pub fn div(self, other: Self) -> Self {
        self.mul(other.powi(-1))
    }

    pub fn powi(self, n: i8) -> Self {
        let mut out = self.0;
        for o in out.iter_mut() {
            *o *= n;
        }
        Self(out)
    }

    pub fn is_dimensionless(self) -> bool {
        self == Self::NONE
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let names = ["kg", "m", "s", "K", "A"];
        let mut first = true;
        for (name, &e) in names.iter().zip(self.0.iter()) {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A value with its dimension. Addition and subtraction are fallible;
/// multiplication and division combine dimension vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity<T> {
    pub value: T,
    pub dim: Dimension,
}

impl<T: Real> Quantity<T> {
    pub fn new(value: T, dim: Dimension) -> Self {
        Self { value, dim }
    }

    pub fn dimensionless(value: T) -> Self {
        Self::new(value, Dimension::NONE)
    }

    pub fn try_add(self, rhs: Self) -> Result<Self> {
        self.check(rhs.dim)?;
        Ok(Self::new(self.value + rhs.value, self.dim))
    }

    pub fn try_sub(self, rhs: Self) -> Result<Self> {
        self.check(rhs.dim)?;
        Ok(Self::new(self.value - rhs.value, self.dim))
    }

    /// Returns the raw SI value if the dimension is the expected one.
    pub fn value_in(self, expected: Dimension) -> Result<T> {
        if self.dim == expected {
            Ok(self.value)
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.dim,
            })
        }
    }

    fn check(&self, other: Dimension) -> Result<()> {
        if self.dim == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other,
            })
        }
    }
}

impl<T: Real> Mul for Quantity<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.value * rhs.value, self.dim.mul(rhs.dim))
    }
}

impl<T: Real> Div for Quantity<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::new(self.value / rhs.value, self.dim.div(rhs.dim))
    }
}

/// A parsed unit: SI scale factor plus dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub scale: f64,
    pub dim: Dimension,
}

const ELECTRON_VOLT: f64 = 1.602_176_634e-19;

fn base_symbol(sym: &str) -> Option<Unit> {
    let u = |scale: f64, dim: [i8; 5]| Some(Unit {
        scale,
        dim: Dimension(dim),
    });
    match sym {
        "kg" => u(1.0, [1, 0, 0, 0, 0]),
        "g" => u(1e-3, [1, 0, 0, 0, 0]),
        "m" => u(1.0, [0, 1, 0, 0, 0]),
        "s" => u(1.0, [0, 0, 1, 0, 0]),
        "K" => u(1.0, [0, 0, 0, 1, 0]),
        "A" => u(1.0, [0, 0, 0, 0, 1]),
        "N" => u(1.0, [1, 1, -2, 0, 0]),
        "J" => u(1.0, [1, 2, -2, 0, 0]),
        "W" => u(1.0, [1, 2, -3, 0, 0]),
        "Pa" => u(1.0, [1, -1, -2, 0, 0]),
        "bar" => u(1e5, [1, -1, -2, 0, 0]),
        "T" => u(1.0, [1, 0, -2, 0, -1]),
        "Hz" => u(1.0, [0, 0, -1, 0, 0]),
        "eV" => u(ELECTRON_VOLT, [1, 2, -2, 0, 0]),
        "rad" | "1" => u(1.0, [0, 0, 0, 0, 0]),
        _ => None,
    }
}

fn prefix(c: char) -> Option<f64> {
    Some(match c {
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' | 'μ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'M' => 1e6,
        'G' => 1e9,
        _ => return None,
    })
}

fn parse_factor(tok: &str) -> Result<Unit> {
    let (sym, exp) = match tok.split_once('^') {
        Some((s, e)) => {
            let e: i8 = e
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad exponent in unit factor '{tok}'")))?;
            (s.trim(), e)
        }
        None => (tok, 1),
    };
    let unit = base_symbol(sym)
        .or_else(|| {
            let mut chars = sym.chars();
            let p = prefix(chars.next()?)?;
            let rest = chars.as_str();
            // "kg" is already a base symbol; prefixed grams would double count.
            base_symbol(rest)
                .filter(|_| rest != "kg" && rest != "1" && rest != "rad")
                .map(|b| Unit {
                    scale: b.scale * p,
                    dim: b.dim,
                })
        })
        .ok_or_else(|| Error::invalid(format!("unknown unit symbol '{sym}'")))?;
    Ok(Unit {
        scale: unit.scale.powi(exp as i32),
        dim: unit.dim.powi(exp),
    })
}

/// Parses strings like `T/m`, `J/m^3`, `kg·m/s^2`, `mbar`, `us`.
/// Each `/` divides by the product that follows it.
pub fn parse_unit(text: &str) -> Result<Unit> {
    let text = text.trim();
    let mut acc = Unit {
        scale: 1.0,
        dim: Dimension::NONE,
    };
    if text.is_empty() {
        return Ok(acc);
    }
    for (i, part) in text.split('/').enumerate() {
        let part = part.trim();
        if part.is_empty() {
            return Err(Error::invalid(format!("malformed unit '{text}'")));
        }
        for tok in part
            .split(|c: char| c == '*' || c == '·' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let f = parse_factor(tok)?;
            if i == 0 {
                acc.scale *= f.scale;
                acc.dim = acc.dim.mul(f.dim);
            } else {
                acc.scale /= f.scale;
                acc.dim = acc.dim.div(f.dim);
            }
        }
    }
    Ok(acc)
}

/// Parses `"<number> [unit]"` into an SI quantity.
pub fn parse_quantity(text: &str) -> Result<Quantity<f64>> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::invalid(format!("'{num}' is not a number")))?;
    let unit = parse_unit(unit)?;
    Ok(Quantity::new(value * unit.scale, unit.dim))
}

/// Parses a config value expected to carry `expected` dimension. A bare
/// number is read as SI; a number with a unit must match.
pub fn parse_si(text: &str, expected: Dimension) -> Result<f64> {
    let text = text.trim();
    if let Ok(v) = text.parse::<f64>() {
        return Ok(v);
    }
    parse_quantity(text)?.value_in(expected)
}

/// Pressure in mbar to Pa.
pub fn convert_pressure<T: Real>(p_mbar: T) -> Result<T> {
    if !(p_mbar >= T::zero()) {
        return Err(Error::invalid(format!(
            "pressure must be non-negative, got {p_mbar} mbar"
        )));
    }
    Ok(p_mbar * T::lit(100.0))
}

/// Pressure in Pa back to mbar.
pub fn pressure_to_mbar<T: Real>(p_pa: T) -> T {
    p_pa / T::lit(100.0)
}

/// Energy in eV to J.
pub fn ev_to_joule<T: Real>(ev: T) -> T {
    ev * T::lit(ELECTRON_VOLT)
}

/// k_B T in joules.
pub fn thermal_energy<T: Real>(temperature: T) -> Result<T> {
    if !(temperature >= T::zero()) {
        return Err(Error::invalid(format!(
            "temperature must be non-negative, got {temperature} K"
        )));
    }
    Ok(temperature * T::lit(BOLTZMANN))
}

/// Energy in J expressed as an equivalent temperature.
pub fn joule_to_kelvin<T: Real>(energy: T) -> T {
    energy / T::lit(BOLTZMANN)
}
