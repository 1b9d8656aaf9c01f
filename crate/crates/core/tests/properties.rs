use proptest::prelude::*;

use spincat::config::{echo, parse_config};
use spincat::constants::PhysicalConstants;
use spincat::decoherence::{csl_geometry_factor, macroscopicity, overall_verdict, EnvironmentConfig};
use spincat::feasibility::{evaluate, DesignCandidate, DesignConstraints, Objective};
use spincat::materials::{MaterialDb, ParticleSpec};
use spincat::protocol::{
    fringe_probabilities, gravity_phase, run_protocol, sample_fringe, wrap_phase, ProtocolConfig,
};
use spincat::report::{budget_for, SectionId};
use spincat::spinmodel::DoubleWellModel;
use spincat::units::{parse_si, Dimension};
use spincat::{Constants, Particle};

fn yig(radius: f64) -> Particle {
    let db = MaterialDb::builtin();
    ParticleSpec::sphere(db.get("yig").unwrap().clone(), radius).with_spin(500)
}

fn protocol(t0: f64, grad: f64, spin_z: f64) -> ProtocolConfig<f64> {
    let mut c = ProtocolConfig::new(yig(10e-9), spin_z, grad, t0);
    c.samples = 0;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn separation_scales_as_t0_squared_and_linear_in_gradient(
        t0 in 1e-7f64..1e-4, grad in 1e2f64..1e7, k in 1.1f64..10.0,
    ) {
        let c = Constants::codata();
        let base = run_protocol(&protocol(t0, grad, 500.0), &c).unwrap().delta_z_max;
        let t_scaled = run_protocol(&protocol(k * t0, grad, 500.0), &c).unwrap().delta_z_max;
        let g_scaled = run_protocol(&protocol(t0, k * grad, 500.0), &c).unwrap().delta_z_max;
        prop_assert!((t_scaled / base / (k * k) - 1.0).abs() < 1e-12);
        prop_assert!((g_scaled / base / k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_scales_as_t0_cubed(t0 in 1e-7f64..1e-4, k in 1.1f64..10.0) {
        let c = Constants::codata();
        let b1 = gravity_phase(&protocol(t0, 1e6, 500.0), &c);
        let b2 = gravity_phase(&protocol(k * t0, 1e6, 500.0), &c);
        let slope = (b2 / b1).ln() / k.ln();
        prop_assert!((slope - 3.0).abs() < 1e-6);
    }

    #[test]
    fn probabilities_normalised(beta in -1e6f64..1e6) {
        let (p, m) = fringe_probabilities(beta);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&m));
        prop_assert_eq!(p + m, 1.0);
        let w = wrap_phase(beta);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
    }

    #[test]
    fn initial_momentum_is_common_mode(p0 in -1e-22f64..1e-22, theta in 0.0f64..1.5) {
        let c = Constants::codata();
        let mut still = protocol(1e-5, 1e6, 500.0);
        still.theta = theta;
        still.samples = 11;
        let mut moving = still.clone();
        moving.p0 = p0;
        let a = run_protocol(&still, &c).unwrap();
        let b = run_protocol(&moving, &c).unwrap();
        prop_assert!((a.delta_z_max - b.delta_z_max).abs() <= 1e-12 * a.delta_z_max);
        prop_assert!((a.beta_g - b.beta_g).abs() <= 1e-12 * a.beta_g.abs().max(1e-300));
        for (u, d) in b.trajectory_up.iter().zip(&b.trajectory_down) {
            let sep_b = u.z - d.z;
            let i = b.trajectory_up.iter().position(|x| x.t == u.t).unwrap();
            let sep_a = a.trajectory_up[i].z - a.trajectory_down[i].z;
            prop_assert!((sep_a - sep_b).abs() <= 1e-9 * a.delta_z_max);
        }
    }

    #[test]
    fn ramped_runs_stay_close_to_ideal(ramp in 0.001f64..0.19) {
        let c = Constants::codata();
        let mut cfg = protocol(1e-5, 1e6, 500.0);
        cfg.steps = 4000;
        let ideal = run_protocol(&cfg, &c).unwrap();
        cfg.ramp_fraction = ramp;
        let ramped = run_protocol(&cfg, &c).unwrap();
        // Ramps only remove impulse near the switching times.
        prop_assert!(ramped.delta_z_max <= ideal.delta_z_max * (1.0 + 1e-9));
        prop_assert!(ramped.delta_z_max >= ideal.delta_z_max * (1.0 - 2.0 * ramp));
        prop_assert!((ramped.p_plus + ramped.p_minus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampler_conserves_shots_and_is_deterministic(p in 0.0f64..=1.0, n in 0u64..100_000, seed in any::<u64>()) {
        let a = sample_fringe(p, n, seed).unwrap();
        prop_assert_eq!(a.0 + a.1, n);
        prop_assert_eq!(a, sample_fringe(p, n, seed).unwrap());
    }

    #[test]
    fn barrier_gaps_rebuild_full_barrier(s in 1u32..400, d in 1e-26f64..1e-20) {
        let m = DoubleWellModel::new(s, d, 0.01, 1e10, 2.0).unwrap();
        let total: f64 = (1..=s).map(|k| m.barrier_gap(k).unwrap()).sum();
        let expect = d * (s as f64) * (s as f64);
        prop_assert!((total - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn ed_spectrum_even_in_longitudinal_field(s in 1u32..20, b in 0.0f64..0.5, e in 0.0f64..0.5) {
        let c = Constants::codata();
        let base = DoubleWellModel::new(s, 1.0, 0.01, 1.0, 2.0).unwrap().with_transverse(e);
        let field = b / (2.0 * c.mu_b);
        let plus = base.clone().with_fields(field, 0.0).ed_spectrum(c.mu_b).unwrap();
        let minus = base.clone().with_fields(-field, 0.0).ed_spectrum(c.mu_b).unwrap();
        for (x, y) in plus.levels.iter().zip(&minus.levels) {
            prop_assert!((x.energy - y.energy).abs() < 1e-9 * (1.0 + x.energy.abs()));
        }
        prop_assert!(plus.orthonormality_residual < 1e-10);
        let zero = base.ed_spectrum(c.mu_b).unwrap().delta_e;
        prop_assert!(zero <= plus.delta_e + 1e-12);
    }

    #[test]
    fn csl_form_factor_bounded_and_decreasing(x in 1e-3f64..50.0, dx in 1e-3f64..1.0) {
        let f = csl_geometry_factor(x);
        prop_assert!(f > 0.0 && f <= 1.0);
        prop_assert!(csl_geometry_factor(x + dx) < f);
    }

    #[test]
    fn macroscopicity_is_log_linear(m in 1e-24f64..1e-12, tau in 1e-8f64..10.0) {
        let c = Constants::codata();
        let mu = macroscopicity(m, tau, &c).unwrap();
        let mu10 = macroscopicity(10.0 * m, tau, &c).unwrap();
        let tau10 = macroscopicity(m, 10.0 * tau, &c).unwrap();
        prop_assert!((mu10 - mu - 2.0).abs() < 1e-9);
        prop_assert!((tau10 - mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_verdict_ignores_channel_order(rot in 0usize..7, pressure in 1e-9f64..1e-4) {
        let mut cfg = parse_config("").unwrap().config;
        cfg.environment.pressure = pressure;
        let b = budget_for(&cfg, &Constants::codata()).unwrap();
        let mut ch = b.channels.clone();
        ch.rotate_left(rot);
        prop_assert_eq!(overall_verdict(&ch), b.overall);
    }

    #[test]
    fn tightening_constraints_never_creates_feasibility(
        s in 200u32..900, t0 in 1e-6f64..1e-5, grad in 1e4f64..1e6, shrink in 0.1f64..1.0,
    ) {
        let c = Constants::codata();
        let db = MaterialDb::builtin();
        let material = db.get("yig").unwrap().clone();
        let radius = spincat::materials::SpinCounting::reference().radius_for_spin(&material, s as f64).unwrap();
        let cand = DesignCandidate::new(ParticleSpec::sphere(material, radius), s, t0, grad, Objective::DeltaZ);
        let env = EnvironmentConfig::default();
        let loose = DesignConstraints::default();
        let mut tight = loose.clone();
        tight.max_grad_b *= shrink;
        tight.max_t0 *= shrink;
        tight.min_du_over_kt /= shrink;
        let a = evaluate(&cand, &loose, &env, &c);
        let b = evaluate(&cand, &tight, &env, &c);
        prop_assert!(!b.feasible || a.feasible);
    }

    #[test]
    fn config_echo_round_trips(
        t0 in 1e-8f64..1e-3, grad in 1.0f64..1e7, theta in 0.0f64..1.5, p in 1e-12f64..1e3,
        spin in 2u32..5000, seed in any::<u64>(),
    ) {
        let text = format!(
            "seed = {seed}\n[particle]\nspin = {spin}\n[protocol]\nt0 = {t0}\ngradB = {grad} T/m\ntheta = {theta}\n[environment]\npressure = {p} Pa\n"
        );
        let loaded = parse_config(&text).unwrap();
        let again = parse_config(&echo(&loaded)).unwrap();
        prop_assert_eq!(&again.config, &loaded.config);
    }

    #[test]
    fn si_prefixes_scale(v in 1e-3f64..1e3) {
        let um = parse_si(&format!("{v} um"), Dimension::LENGTH).unwrap();
        let nm = parse_si(&format!("{v} nm"), Dimension::LENGTH).unwrap();
        prop_assert!((um / nm - 1e3).abs() < 1e-9);
        let mbar = parse_si(&format!("{v} mbar"), Dimension::PRESSURE).unwrap();
        prop_assert!((mbar / v - 100.0).abs() < 1e-9);
    }
}

#[test]
fn single_precision_tracks_double() {
    let c64 = Constants::codata();
    let c32: PhysicalConstants<f32> = PhysicalConstants::codata();
    let p64 = protocol(1e-5, 1e6, 500.0);
    let p32 = ProtocolConfig::<f32> {
        particle: p64.particle.cast(),
        spin_z: 500.0,
        g_l: p64.g_l as f32,
        grad_b: 1e6,
        t0: 1e-5,
        theta: 0.0,
        p0: 0.0,
        ramp_fraction: 0.0,
        samples: 0,
        steps: p64.steps,
    };
    let a = run_protocol(&p64, &c64).unwrap();
    let b = run_protocol(&p32, &c32).unwrap();
    assert!(((b.delta_z_max as f64) / a.delta_z_max - 1.0).abs() < 1e-5);
    assert!(((b.beta_g as f64) / a.beta_g - 1.0).abs() < 1e-4);
    let m64 = DoubleWellModel::from_particle(&p64.particle).unwrap();
    let m32 = DoubleWellModel::from_particle(&p32.particle).unwrap();
    let r = m32.wkb_splitting(c32.hbar).unwrap() as f64 / m64.wkb_splitting(c64.hbar).unwrap();
    assert!((r - 1.0).abs() < 1e-4);
}

#[test]
fn section_filter_runs_one_section() {
    let loaded = parse_config("").unwrap();
    let b = spincat::report::run_all(&loaded, &[SectionId::Gravity]);
    assert_eq!(b.outcomes.len(), 1);
    assert!(b.files.contains_key("gravity.json"));
    assert!(!b.files.contains_key("fig2.csv"));
}
