//! Giant-spin double-well model.
//!
//! The particle's exchange-locked spins act as one spin `S` with uniaxial
//! anisotropy `-D Sz^2`, `D = K_x V / S^2`. Two routes to the ground-doublet
//! tunnel splitting are provided: the closed-form WKB law
//! `hbar omega0 exp(-S sqrt(K_y/K_x))`, and exact diagonalization of a
//! biaxial giant-spin Hamiltonian used as an independent oracle.

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::eigen::SymmetricMatrix;
use crate::error::{Error, Result};
use crate::materials::{MaterialParams, ParticleSpec, SpinCounting};
use crate::scalar::Real;

/// Largest spin diagonalized exactly unless overridden.
pub const DEFAULT_ED_CAP: u32 = 60;

/// Hard-axis strength of the oracle Hamiltonian in units of `D`.
///
/// Keeps the ground doublet well separated from the next level while the
/// splitting stays above double-precision resolution for S up to 50.
pub const ED_TRANSVERSE_RATIO: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleWellModel<T> {
    pub spin: u32,
    /// Uniaxial anisotropy energy (J).
    pub d: T,
    /// sqrt(K_y/K_x).
    pub ratio: T,
    /// Attempt frequency (rad/s).
    pub omega0: T,
    /// Physical core volume (m^3).
    pub v_phys: T,
    /// Hard-axis coefficient of the oracle Hamiltonian (J).
    pub transverse_e: T,
    /// Field along the easy axis (T).
    pub b_long: T,
    /// Field along the medium axis (T).
    pub b_trans: T,
    pub g_l: T,
}

impl<T: Real> DoubleWellModel<T> {
    pub fn new(spin: u32, d: T, ratio: T, omega0: T, g_l: T) -> Result<Self> {
        if spin == 0 {
            return Err(Error::invalid("double-well model needs S >= 1"));
        }
        if !(d > T::zero()) {
            return Err(Error::invalid(format!(
                "anisotropy energy D must be positive, got {d}"
            )));
        }
        Ok(Self {
            spin,
            d,
            ratio,
            omega0,
            v_phys: T::zero(),
            transverse_e: T::lit(ED_TRANSVERSE_RATIO) * d,
            b_long: T::zero(),
            b_trans: T::zero(),
            g_l,
        })
    }

    /// Model for a particle with the given spin. The barrier uses the full
    /// physical core volume, dead layers included.
    pub fn for_particle(spec: &ParticleSpec<T>, spin: u32) -> Result<Self> {
        spec.validate()?;
        let v = spec.core_volume();
        Self::for_volume(&spec.core, spin, v)
    }

    pub fn from_particle(spec: &ParticleSpec<T>) -> Result<Self> {
        Self::for_particle(spec, spec.spin()?)
    }

    pub fn for_volume(material: &MaterialParams<T>, spin: u32, v_phys: T) -> Result<Self> {
        if spin == 0 {
            return Err(Error::invalid("double-well model needs S >= 1"));
        }
        let s = T::from_count(spin as u64);
        let d = material.k_x * v_phys / (s * s);
        let mut model = Self::new(spin, d, material.anisotropy_ratio, material.omega0, material.g_l)?;
        model.v_phys = v_phys;
        Ok(model)
    }

    pub fn with_fields(mut self, b_long: T, b_trans: T) -> Self {
        self.b_long = b_long;
        self.b_trans = b_trans;
        self
    }

    pub fn with_transverse(mut self, e: T) -> Self {
        self.transverse_e = e;
        self
    }

    fn spin_t(&self) -> T {
        T::from_count(self.spin as u64)
    }

    /// Gap between consecutive levels `m` and `m - 1` in one well, `D (2m - 1)`.
    pub fn barrier_gap(&self, m: u32) -> Result<T> {
        if m == 0 || m > self.spin {
            return Err(Error::OutOfRange {
                what: "level index m",
                value: m.to_string(),
                range: format!("1..={}", self.spin),
            });
        }
        Ok(self.d * (T::lit(2.0) * T::from_count(m as u64) - T::one()))
    }

    /// Ground-to-first gap within one well (the m = S rung).
    pub fn delta_u(&self) -> T {
        self.d * (T::lit(2.0) * self.spin_t() - T::one())
    }

    /// WKB tunnel splitting, valid at zero longitudinal field.
    pub fn wkb_splitting(&self, hbar: T) -> Result<T> {
        if self.b_long != T::zero() {
            return Err(Error::invalid(
                "WKB splitting assumes zero longitudinal field",
            ));
        }
        Ok(wkb_formula(hbar, self.omega0, self.spin_t(), self.ratio))
    }

    /// `(hbar S)^2 / (dE I)` with the WKB splitting. Returns infinity when
    /// the splitting vanishes.
    pub fn rotation_parameter(&self, inertia: T, hbar: T) -> Result<T> {
        if !(inertia > T::zero()) {
            return Err(Error::invalid(format!(
                "moment of inertia must be positive, got {inertia}"
            )));
        }
        let de = self.wkb_splitting(hbar)?;
        Ok(rotation_from_splitting(self.spin_t(), de, inertia, hbar))
    }

    /// Giant-spin Hamiltonian in the |m> basis, index i <-> m = S - i:
    /// `-D Sz^2 + E Sy^2 + g mu_B (B_long Sz + B_trans Sx)`.
    pub fn hamiltonian(&self, mu_b: T) -> SymmetricMatrix<T> {
        let s = self.spin_t();
        let n = 2 * self.spin as usize + 1;
        let ss1 = s * (s + T::one());
        let m_of = |i: usize| s - T::from_count(i as u64);
        // <m+1|S+|m>
        let c_plus = |m: T| (ss1 - m * (m + T::one())).max(T::zero()).sqrt();
        let zeeman = self.g_l * mu_b;
        let quarter = T::lit(0.25);
        let half = T::lit(0.5);

        let mut h = SymmetricMatrix::zeros(n);
        for i in 0..n {
            let m = m_of(i);
            let diag = -self.d * m * m
                + self.transverse_e * half * (ss1 - m * m)
                + zeeman * self.b_long * m;
            h.set_sym(i, i, diag);
            if i >= 1 {
                // Sx couples m and m + 1.
                h.set_sym(i - 1, i, zeeman * self.b_trans * half * c_plus(m));
            }
            if i >= 2 {
                // Sy^2 couples m and m + 2.
                let v = -quarter * c_plus(m) * c_plus(m + T::one());
                h.set_sym(i - 2, i, self.transverse_e * v);
            }
        }
        h
    }

    pub fn ed_spectrum(&self, mu_b: T) -> Result<WellSpectrum<T>> {
        self.ed_spectrum_capped(mu_b, DEFAULT_ED_CAP)
    }

    pub fn ed_spectrum_capped(&self, mu_b: T, cap: u32) -> Result<WellSpectrum<T>> {
        if self.spin > cap {
            return Err(Error::EdCapExceeded {
                spin: self.spin,
                cap,
            });
        }
        let h = self.hamiltonian(mu_b);
        let asym = h.max_asymmetry();
        assert!(
            asym == T::zero(),
            "Hamiltonian assembly produced an asymmetric matrix ({asym})"
        );
        let eig = h.eigh()?;
        let n = eig.values.len();
        let threshold = T::lit(0.5);
        let levels = (0..n)
            .map(|k| {
                let v = eig.vector(k);
                let overlap = v
                    .iter()
                    .zip(v.iter().rev())
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                let parity = if overlap > threshold {
                    Parity::Symmetric
                } else if overlap < -threshold {
                    Parity::Antisymmetric
                } else {
                    Parity::Mixed
                };
                Level {
                    index: k,
                    energy: eig.values[k],
                    parity,
                }
            })
            .collect::<Vec<_>>();
        let e = &eig.values;
        let delta_e = (e[1] - e[0]).max(T::zero());
        let ground_center = (e[0] + e[1]) * T::lit(0.5);
        let delta_u = if n >= 4 {
            (e[2] + e[3]) * T::lit(0.5) - ground_center
        } else {
            e[2] - ground_center
        };
        Ok(WellSpectrum {
            levels,
            delta_e,
            delta_u,
            orthonormality_residual: eig.orthonormality_residual(),
        })
    }
}

/// `hbar omega0 exp(-S ratio)`.
pub fn wkb_formula<T: Real>(hbar: T, omega0: T, spin: T, ratio: T) -> T {
    hbar * omega0 * (-spin * ratio).exp()
}

/// `(hbar S)^2 / (dE I)`, evaluated as a product of two ratios so that the
/// intermediate values stay representable in single precision.
pub fn rotation_from_splitting<T: Real>(spin: T, delta_e: T, inertia: T, hbar: T) -> T {
    if delta_e <= T::zero() {
        return T::infinity();
    }
    let l = hbar * spin;
    (l / delta_e) * (l / inertia)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Symmetric,
    Antisymmetric,
    /// Reflection overlap between -0.5 and 0.5, e.g. with a longitudinal field.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level<T> {
    pub index: usize,
    pub energy: T,
    pub parity: Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellSpectrum<T> {
    /// Ascending.
    pub levels: Vec<Level<T>>,
    /// E1 - E0.
    pub delta_e: T,
    /// Centre of the first excited doublet above the ground doublet centre.
    pub delta_u: T,
    pub orthonormality_residual: T,
}

/// One row of the spectrum-versus-spin table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row<T> {
    pub spin: u32,
    pub radius: T,
    pub du_joule: T,
    pub du_kelvin: T,
    pub de_joule: T,
    pub de_ghz: T,
    /// Set when the row could not be computed; numeric fields are NaN.
    pub error: Option<String>,
}

/// Barrier gap and WKB splitting as functions of S, with the core radius
/// for each S obtained by inverting the spin-counting convention.
pub fn sweep_fig2<T: Real>(
    material: &MaterialParams<T>,
    spins: &[u32],
    counting: SpinCounting<T>,
    consts: &PhysicalConstants<T>,
) -> Result<Vec<Fig2Row<T>>> {
    if spins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("spin values must be strictly ascending"));
    }
    let row = |s: u32| -> Result<Fig2Row<T>> {
        let radius = counting.radius_for_spin(material, T::from_count(s as u64))?;
        let spec = ParticleSpec::sphere(material.clone(), radius);
        let model = DoubleWellModel::for_particle(&spec, s)?;
        let du = model.barrier_gap(s)?;
        let de = model.wkb_splitting(consts.hbar)?;
        Ok(Fig2Row {
            spin: s,
            radius,
            du_joule: du,
            du_kelvin: du / consts.k_b,
            de_joule: de,
            de_ghz: de / consts.h / T::lit(1e9),
            error: None,
        })
    };
    Ok(spins
        .par_iter()
        .map(|&s| {
            row(s).unwrap_or_else(|e| Fig2Row {
                spin: s,
                radius: T::nan(),
                du_joule: T::nan(),
                du_kelvin: T::nan(),
                de_joule: T::nan(),
                de_ghz: T::nan(),
                error: Some(e.to_string()),
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialDb;

    fn consts() -> PhysicalConstants<f64> {
        PhysicalConstants::codata()
    }

    fn reference_model() -> DoubleWellModel<f64> {
        let yig = MaterialDb::builtin().get("yig").unwrap().clone();
        let spec = ParticleSpec::sphere(yig, 10e-9).with_spin(500);
        DoubleWellModel::from_particle(&spec).unwrap()
    }

    #[test]
    fn barrier_gap_at_s500() {
        let m = reference_model();
        let du_k = m.barrier_gap(500).unwrap() / consts().k_b;
        // K_x V (2S-1)/S^2 / k_B by hand: 67.2 K
        assert!((du_k - 67.2).abs() < 0.1, "{du_k}");
        assert!(du_k / 50.0 < 1.5 && 50.0 / du_k < 1.5);
        assert_eq!(m.barrier_gap(1).unwrap(), m.d);
        assert!(m.barrier_gap(0).is_err());
        assert!(m.barrier_gap(501).is_err());
    }

    #[test]
    fn barrier_gaps_scale_with_d() {
        let m = reference_model();
        let mut m2 = m.clone();
        m2.d *= 2.0;
        for k in [1, 7, 500] {
            assert!((m2.barrier_gap(k).unwrap() - 2.0 * m.barrier_gap(k).unwrap()).abs() < 1e-35);
        }
    }

    #[test]
    fn barrier_gaps_sum_to_full_barrier() {
        let m = reference_model();
        let total: f64 = (1..=m.spin).map(|k| m.barrier_gap(k).unwrap()).sum();
        let yig = MaterialDb::builtin().get("yig").unwrap().clone();
        let barrier = yig.k_x * m.v_phys;
        assert!((total - barrier).abs() / barrier < 1e-12);
    }

    #[test]
    fn wkb_examples() {
        let c = consts();
        let m = reference_model();
        let de_ghz = m.wkb_splitting(c.hbar).unwrap() / c.h / 1e9;
        // 1e12 * exp(-5) Hz
        assert!((de_ghz - 6.7379).abs() < 1e-3, "{de_ghz}");
        let w0 = 2.0 * std::f64::consts::PI * 1e12;
        assert_eq!(wkb_formula(c.hbar, w0, 0.0, 0.01), c.hbar * w0);
        let one = wkb_formula(c.hbar, w0, 300.0, 0.01) / (c.hbar * w0);
        let two = wkb_formula(c.hbar, w0, 600.0, 0.01) / (c.hbar * w0);
        assert!((two - one * one).abs() / two < 1e-12);
        assert!(m.clone().with_fields(1e-3, 0.0).wkb_splitting(c.hbar).is_err());
    }

    #[test]
    fn rotation_parameter_examples() {
        let c = consts();
        let m = reference_model();
        let yig = MaterialDb::builtin().get("yig").unwrap().clone();
        let (_, inertia) =
            crate::materials::mass_and_inertia(&ParticleSpec::sphere(yig, 10e-9)).unwrap();
        let alpha = m.rotation_parameter(inertia, c.hbar).unwrap();
        assert!((alpha - 7.43e-4).abs() / 7.43e-4 < 0.01, "{alpha}");
        assert!(alpha / 5e-4 < 2.0);
        let heavy = m.rotation_parameter(inertia * 1e30, c.hbar).unwrap();
        assert!(heavy < 1e-30);
        let de = m.wkb_splitting(c.hbar).unwrap();
        let half = rotation_from_splitting(500.0, de / 2.0, inertia, c.hbar);
        assert!((half / alpha - 2.0).abs() < 1e-12);
        assert!(rotation_from_splitting(500.0, 0.0, inertia, c.hbar).is_infinite());
        assert!(m.rotation_parameter(0.0, c.hbar).is_err());
    }

    #[test]
    fn ed_spin_one_by_hand() {
        // Levels of -D Sz^2 + E Sy^2 for S = 1: {-D, -D + E, E}
        let d = 1.0;
        let e = 0.1;
        let model = DoubleWellModel::new(1, d, 0.01, 1.0, 2.0).unwrap().with_transverse(e);
        let spec = model.ed_spectrum(consts().mu_b).unwrap();
        let energies: Vec<f64> = spec.levels.iter().map(|l| l.energy).collect();
        assert!((energies[0] + d).abs() < 1e-14);
        assert!((energies[1] - (-d + e)).abs() < 1e-14);
        assert!((energies[2] - e).abs() < 1e-14);
        assert!((spec.delta_e - e).abs() < 1e-10);
        assert_eq!(spec.levels[0].parity, Parity::Symmetric);
        assert_eq!(spec.levels[1].parity, Parity::Antisymmetric);
    }

    #[test]
    fn ed_without_transverse_term_is_degenerate() {
        let model = DoubleWellModel::new(7, 1.0, 0.01, 1.0, 2.0).unwrap().with_transverse(0.0);
        let spec = model.ed_spectrum(consts().mu_b).unwrap();
        assert_eq!(spec.delta_e, 0.0);
        // delta_u: m = 7 to m = 6 rung, D (2S - 1)
        assert!((spec.delta_u - 13.0).abs() < 1e-12);
    }

    #[test]
    fn ed_ground_state_symmetric() {
        for s in [2, 3, 10, 25] {
            let model = DoubleWellModel::new(s, 1.0, 0.01, 1.0, 2.0).unwrap();
            let spec = model.ed_spectrum(consts().mu_b).unwrap();
            assert_eq!(spec.levels[0].parity, Parity::Symmetric, "S = {s}");
            assert_eq!(spec.levels[1].parity, Parity::Antisymmetric, "S = {s}");
            assert!(spec.orthonormality_residual < 1e-10);
        }
    }

    #[test]
    fn ed_zeeman_dominated_at_large_longitudinal_field() {
        // S = 2, E = 0.01 D; g mu_B B S = 0.5 D >> dE. Perturbatively the
        // doublet splits by g mu_B B (2S) up to a correction of order dE^2.
        let c = consts();
        let d = 1.0;
        let model = DoubleWellModel::new(2, d, 0.01, 1.0, 2.0).unwrap().with_transverse(0.01);
        let zero = model.ed_spectrum(c.mu_b).unwrap().delta_e;
        let b = 0.25 * d / (2.0 * c.mu_b);
        let biased = model.clone().with_fields(b, 0.0).ed_spectrum(c.mu_b).unwrap();
        let zeeman = 2.0 * c.mu_b * b * 4.0;
        assert!((biased.delta_e - zeeman).abs() / zeeman < 1e-3);
        assert!(biased.delta_e > 100.0 * zero);
        assert_eq!(biased.levels[0].parity, Parity::Mixed);
    }

    #[test]
    fn ed_cap_enforced() {
        let model = DoubleWellModel::new(61, 1.0, 0.01, 1.0, 2.0).unwrap();
        assert!(matches!(
            model.ed_spectrum(consts().mu_b),
            Err(Error::EdCapExceeded { spin: 61, cap: 60 })
        ));
        assert!(model.ed_spectrum_capped(consts().mu_b, 61).is_ok());
    }

    #[test]
    fn zero_barrier_rejected() {
        assert!(DoubleWellModel::new(10, 0.0, 0.01, 1.0, 2.0).is_err());
        assert!(DoubleWellModel::new(0, 1.0, 0.01, 1.0, 2.0).is_err());
    }

    #[test]
    fn fig2_row_at_reference_point() {
        let c = consts();
        let yig = MaterialDb::builtin().get("yig").unwrap().clone();
        let rows = sweep_fig2(&yig, &[100, 500, 2000], SpinCounting::reference(), &c).unwrap();
        let r = &rows[1];
        assert!((r.radius - 10e-9).abs() < 1e-18);
        assert!((r.du_kelvin - 67.2).abs() < 0.1);
        assert!(r.de_ghz > 5.0 && r.de_ghz < 15.0);
        assert!(rows[0].de_joule > rows[1].de_joule && rows[1].de_joule > rows[2].de_joule);
        assert!(rows[0].du_kelvin > rows[1].du_kelvin && rows[1].du_kelvin > rows[2].du_kelvin);
        assert!(sweep_fig2(&yig, &[500, 100], SpinCounting::reference(), &c).is_err());
    }

    #[test]
    fn fig2_flags_bad_rows() {
        let c = consts();
        let mut inert = MaterialDb::builtin().get("yig").unwrap().clone();
        inert.spins_per_cell = 0;
        let rows = sweep_fig2(&inert, &[10, 20], SpinCounting::Geometric, &c).unwrap();
        assert!(rows.iter().all(|r| r.error.is_some() && r.du_joule.is_nan()));
    }
}
