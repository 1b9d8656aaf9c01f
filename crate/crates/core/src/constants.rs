//! Fundamental constants, SI units throughout.
//!
//! CODATA 2018 values except for the Wien displacement constant, which is
//! kept at three digits (2.89e-3 m K) so that the blackbody estimates
//! reproduce the published arithmetic.

use crate::scalar::Real;

/// Planck constant (J s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability (T m/A).
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
/// Newtonian constant of gravitation (m^3 kg^-1 s^-2).
pub const GRAVITATIONAL: f64 = 6.674_30e-11;
/// Gravitational acceleration used by the interferometer (m/s^2).
pub const STANDARD_GRAVITY: f64 = 9.81;
/// Stefan-Boltzmann constant (W m^-2 K^-4).
pub const STEFAN_BOLTZMANN: f64 = 5.670_374_419e-8;
/// Speed of light (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Electron mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Wien displacement constant (m K), three-digit value.
pub const WIEN_B: f64 = 2.89e-3;

/// Constants table in the working scalar type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub hbar: T,
    pub h: T,
    pub k_b: T,
    pub mu_b: T,
    pub mu_0: T,
    pub big_g: T,
    pub g_acc: T,
    pub sigma_sb: T,
    pub c: T,
    pub m_e: T,
    pub amu: T,
    pub wien_b: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn codata() -> Self {
        Self {
            hbar: T::lit(HBAR),
            h: T::lit(PLANCK),
            k_b: T::lit(BOLTZMANN),
            mu_b: T::lit(BOHR_MAGNETON),
            mu_0: T::lit(VACUUM_PERMEABILITY),
            big_g: T::lit(GRAVITATIONAL),
            g_acc: T::lit(STANDARD_GRAVITY),
            sigma_sb: T::lit(STEFAN_BOLTZMANN),
            c: T::lit(SPEED_OF_LIGHT),
            m_e: T::lit(ELECTRON_MASS),
            amu: T::lit(ATOMIC_MASS_UNIT),
            wien_b: T::lit(WIEN_B),
        }
    }

    /// Named entries in a fixed order, for reports and golden checks.
    pub fn table(&self) -> [(&'static str, T); 12] {
        [
            ("hbar", self.hbar),
            ("h", self.h),
            ("k_B", self.k_b),
            ("mu_B", self.mu_b),
            ("mu_0", self.mu_0),
            ("G", self.big_g),
            ("g_acc", self.g_acc),
            ("sigma_SB", self.sigma_sb),
            ("c", self.c),
            ("m_e", self.m_e),
            ("amu", self.amu),
            ("wien_b", self.wien_b),
        ]
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive() {
        for (name, v) in PhysicalConstants::<f64>::codata().table() {
            assert!(v > 0.0, "{name}");
        }
        for (name, v) in PhysicalConstants::<f32>::codata().table() {
            assert!(v > 0.0, "{name}");
        }
    }

    #[test]
    fn hbar_consistent_with_h() {
        let c = PhysicalConstants::<f64>::codata();
        let derived = c.h / (2.0 * std::f64::consts::PI);
        assert!((derived - c.hbar).abs() / c.hbar < 1e-9);
    }

    #[test]
    fn wien_kept_at_three_digits() {
        assert_eq!(PhysicalConstants::<f64>::codata().wien_b, 2.89e-3);
    }
}
