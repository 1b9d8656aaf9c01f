//! Channel formulas against hand-written evaluations, and the shape of the
//! machine-readable outputs.

use std::f64::consts::PI;

use serde_json::Value;
use spincat::config::parse_config;
use spincat::decoherence::{
    assemble_budget, gilbert_coherence_time, magnetic_noise_frequency, magnon_cutoff, EnvironmentConfig,
};
use spincat::materials::{MaterialDb, ParticleSpec};
use spincat::report::{run_all, SCHEMA_VERSION};
use spincat::Constants;

const KB: f64 = 1.380_649e-23;
const H: f64 = 6.626_070_15e-34;
const MU_B: f64 = 9.274_010_078_3e-24;
const C: f64 = 299_792_458.0;
const SIGMA: f64 = 5.670_374_419e-8;

fn close(a: f64, b: f64, tol: f64) -> bool {
    ((a - b) / b).abs() < tol
}

fn reference() -> ParticleSpec<f64> {
    let db = MaterialDb::builtin();
    ParticleSpec::sphere(db.get("yig").unwrap().clone(), 10e-9).with_spin(500)
}

#[test]
fn gas_and_blackbody_channels_match_hand_evaluation() {
    let p = reference();
    let env = EnvironmentConfig::default();
    let b = assemble_budget(&env, &p, 1e-24, 1e-5, 5e-6, &Constants::codata()).unwrap();

    let m_he = env.gas_mass;
    let kt = KB * 0.3;
    let v = (kt / m_he).sqrt();
    let rate = PI * 1e-7 * v * 1e-16 / kt;
    let recoil = 2.0 * m_he * v / p.mass();
    let gas = b.channel("gas").unwrap();
    assert!(close(gas.rate, rate, 1e-12), "{} vs {rate}", gas.rate);
    assert!(close(gas.recoil_velocity.unwrap(), recoil, 1e-12));
    assert!(close(gas.position_noise, recoil * 1e-5, 1e-12));
    assert!(close(gas.events, rate * 1e-5, 1e-12));

    let wien = 2.89e-3;
    let area = 4.0 * PI * 1e-16;
    let bb_rate = wien * SIGMA * area * 0.3f64.powi(3) / (H * C);
    let bb_recoil = H * 0.3 / wien / p.mass();
    let bb = b.channel("blackbody_emission").unwrap();
    assert!(close(bb.rate, bb_rate, 1e-12));
    assert!(close(bb.recoil_velocity.unwrap(), bb_recoil, 1e-12));

    let absorption = b.channel("blackbody_absorption").unwrap();
    assert_eq!(absorption.rate, 0.0);
    assert!(!absorption.notes.is_empty());
}

#[test]
fn field_noise_magnons_and_damping() {
    let c = Constants::codata();
    let f = magnetic_noise_frequency(2.0, 500.0, 1e-12, &c);
    assert!(close(f, 2.0 * 2.0 * MU_B * 500.0 * 1e-12 / H, 1e-12));

    let p = reference();
    let fc = magnon_cutoff(&p, &c).unwrap();
    assert!(close(fc, 0.02 * C / 10e-9, 1e-12));
    // 6e14 Hz against a 0.3 K thermal scale of about 6e9 Hz.
    assert!(fc > 10.0 * KB * 0.3 / H);

    let t = gilbert_coherence_time(1e-5, 1.76e11, 1e-2).unwrap();
    assert!(close(t, 1.0 / (1e-5 * 1.76e11 * 1e-2), 1e-12));
    assert!(gilbert_coherence_time(0.0f64, 1.76e11, 1e-2).unwrap().is_infinite());
}

#[test]
fn csv_outputs_have_fixed_headers() {
    let loaded = parse_config("").unwrap();
    let b = run_all(&loaded, &[]);
    let header = |name: &str| -> (String, String) {
        let body = &b.files[name];
        let mut lines = body.lines();
        (lines.next().unwrap().to_string(), lines.next().unwrap().to_string())
    };
    let (schema, cols) = header("fig2.csv");
    assert_eq!(schema, format!("# fig2 schema_version={SCHEMA_VERSION}"));
    assert_eq!(cols, "S,dU_joule,dU_kelvin,dE_joule,dE_ghz,radius_m,error");
    assert_eq!(header("trajectory.csv").1, "t_s,z_up_m,v_up_ms,z_down_m,v_down_ms");
    assert_eq!(
        header("designs.csv").1,
        "rank,S,R_m,R_out_m,t0_s,gradB_Tpm,delta_z_m,mu_m,feasible,binding_constraint"
    );
    for body in b.files.values() {
        assert!(!body.contains('\r'));
        assert!(body.ends_with('\n'));
    }
    // No thousands separators or locale commas inside numbers.
    for line in b.files["fig2.csv"].lines().skip(2) {
        assert_eq!(line.split(',').count(), 7, "{line}");
    }
}

#[test]
fn json_outputs_carry_schema_and_fields() {
    let loaded = parse_config("").unwrap();
    let b = run_all(&loaded, &[]);
    for name in ["protocol.json", "budget.json", "gravity.json", "summary.json", "spectrum.json"] {
        let v: Value = serde_json::from_str(&b.files[name]).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION, "{name}");
    }
    let budget: Value = serde_json::from_str(&b.files["budget.json"]).unwrap();
    for ch in budget["channels"].as_array().unwrap() {
        for key in ["name", "rate_hz", "events", "position_noise_m", "verdict", "notes"] {
            assert!(ch.get(key).is_some(), "{key} missing in {ch}");
        }
    }
    let protocol: Value = serde_json::from_str(&b.files["protocol.json"]).unwrap();
    for key in ["delta_z_max", "beta_g", "beta_g_mod_2pi", "p_plus", "p_minus", "closure_error_pos", "common_mode_fall"] {
        assert!(protocol["result"].get(key).is_some(), "{key}");
    }
    let summary: Value = serde_json::from_str(&b.files["summary.json"]).unwrap();
    assert_eq!(summary["exit_code"], 0);
    let anchors = summary["anchors"].as_array().unwrap();
    assert!(anchors.iter().all(|a| a["status"] != "mismatch"), "{anchors:?}");
    assert!(b.files["config.echo"].contains("# defaulted: true"));
}

#[test]
fn anchors_flag_mismatches() {
    // Doubling t0 quadruples the separation, out of the headline window.
    let loaded = parse_config("[protocol]\nt0 = 20 us\n").unwrap();
    let b = run_all(&loaded, &[spincat::report::SectionId::Protocol]);
    let a = b.anchor("delta_z_m").unwrap();
    assert_eq!(a.status, spincat::report::AnchorStatus::Mismatch);
    assert_eq!(b.exit_code(), 0);
}

#[test]
fn failing_budget_sets_exit_code_one() {
    let loaded = parse_config("[environment]\npressure = 1e-3 mbar\n").unwrap();
    let b = run_all(&loaded, &[spincat::report::SectionId::Budget]);
    assert_eq!(b.exit_code(), 1);
}
