//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Built without the libtest harness so the lines always print.

use std::time::{Duration, Instant};

use spincat::config::parse_config;
use spincat::decoherence::{csl_rate, CslMode, CslParams};
use spincat::materials::{MaterialDb, SpinCounting};
use spincat::protocol::{integrate_numeric, run_protocol, sample_fringe};
use spincat::report::{run_all, SectionId};
use spincat::spinmodel::{sweep_fig2, DoubleWellModel};
use spincat::{Constants, Model};

// Independent constant values for the oracles.
const HBAR: f64 = 1.054_571_817e-34;
const MU_B: f64 = 9.274_010_078_3e-24;
const G: f64 = 9.81;

struct Harness {
    failures: usize,
}

impl Harness {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        println!("[{}] {id:<4} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn main() {
    let mut h = Harness { failures: 0 };
    let consts = Constants::codata();

    // 1
    let start = Instant::now();
    let loaded = parse_config("").expect("default config");
    let pc = loaded.config.protocol_config().expect("protocol config");
    let result = run_protocol(&pc, &consts).expect("protocol");
    let elapsed = start.elapsed();
    let dz = result.delta_z_max;
    h.check(
        "1",
        "headline separation",
        within(dz, 4.4e-6, 6.6e-6) && elapsed < Duration::from_secs(1),
        format!("delta_z = {:.4} um in [4.4, 6.6], runtime {:.1} ms < 1 s", dz * 1e6, elapsed.as_secs_f64() * 1e3),
    );

    // 2, 3, 4
    let bundle = run_all(&loaded, &[SectionId::Spectrum]);
    let val = |name: &str| bundle.anchor(name).map(|a| a.value).unwrap_or(f64::NAN);
    let (du, de, de_mk) = (val("delta_u_kelvin"), val("delta_e_ghz"), val("delta_e_mk"));
    h.check(
        "2",
        "spectrum at S = 500",
        within(du, 33.0, 100.0) && within(de, 3.0, 15.0),
        format!("dU/kB = {du:.2} K in [33, 100], dE/h = {de:.3} GHz in [3, 15], dE/kB = {de_mk:.1} mK (quoted 500 mK)"),
    );
    let alpha = val("rotation_alpha");
    h.check(
        "3",
        "rotation parameter",
        within(alpha, 2.5e-4, 1.5e-3),
        format!("alpha = {alpha:.3e} in [2.5e-4, 1.5e-3]"),
    );
    let mass = val("mass_kg");
    h.check(
        "4",
        "mass of 10 nm YIG sphere",
        rel(mass, 2e-20) <= 0.05,
        format!("m = {mass:.4e} kg, {:.2}% from 2e-20", rel(mass, 2e-20) * 100.0),
    );

    // 5, 6
    let bundle = run_all(&loaded, &[SectionId::Budget]);
    let val = |name: &str| bundle.anchor(name).map(|a| a.value).unwrap_or(f64::NAN);
    let (rate, recoil, noise, bb, fmag) = (
        val("gas_rate_hz"),
        val("gas_recoil_ms"),
        val("gas_position_noise_m"),
        val("blackbody_recoil_ms"),
        val("magnetic_noise_hz"),
    );
    h.check(
        "5",
        "decoherence anchors",
        within(rate, 140.0, 260.0)
            && rel(recoil, 2e-5) <= 0.3
            && rel(noise, 2e-10) <= 0.3
            && rel(bb, 3e-12) <= 0.3
            && rel(fmag, 30.0) <= 0.2,
        format!(
            "gas {rate:.1}/s, recoil {recoil:.3e} m/s, noise {:.3} nm, blackbody recoil {bb:.3e} m/s, field noise {fmag:.2} Hz",
            noise * 1e9
        ),
    );
    let (mu, mu_shell) = (val("mu_m"), val("mu_m_core_shell"));
    h.check(
        "6",
        "macroscopicity",
        (mu - 16.0).abs() <= 0.5 && (mu_shell - 29.0).abs() <= 0.5,
        format!("bare {mu:.3} (16 +- 0.5), 2 um silica shell {mu_shell:.3} (29 +- 0.5)"),
    );

    // 7
    let particle = loaded.config.particle_spec().unwrap();
    let grw_n = csl_rate(&particle, CslParams::grw(), CslMode::Naive, &consts).unwrap();
    let adler_n = csl_rate(&particle, CslParams::adler(), CslMode::Naive, &consts).unwrap();
    let grw_c = csl_rate(&particle, CslParams::grw(), CslMode::Calibrated, &consts).unwrap();
    let adler_c = csl_rate(&particle, CslParams::adler(), CslMode::Calibrated, &consts).unwrap();
    h.check(
        "7",
        "CSL rates",
        rel(adler_n / grw_n, 1e8) < 1e-12 && rel(adler_c / grw_c, 1e8) < 1e-12 && rel(grw_c, 8.5e4) <= 0.01,
        format!(
            "Adler/GRW = {:.6e} (naive), {:.6e} (calibrated); calibrated GRW {grw_c:.4e} Hz",
            adler_n / grw_n,
            adler_c / grw_c
        ),
    );

    // 8
    let bundle = run_all(&loaded, &[SectionId::Gravity]);
    let ratio = bundle.anchor("gravity_ratio").map_or(f64::NAN, |a| a.value);
    h.check(
        "8",
        "gravity dominance at 500 um",
        within(ratio, 600.0, 6000.0),
        format!("F_grav/F_mag = {ratio:.1} in [600, 6000]"),
    );

    // 9a: closed-form separation from independent constants.
    let m = pc.particle.mass();
    let oracle = pc.g_l * MU_B * pc.spin_z * pc.t0 * pc.t0 * pc.grad_b / (8.0 * m);
    h.check(
        "9a",
        "separation identity",
        rel(dz, oracle) < 1e-12,
        format!("relative error {:.2e} < 1e-12", rel(dz, oracle)),
    );

    // 9b: numeric closure with the ideal schedule.
    let run = integrate_numeric(&pc, &consts).unwrap();
    let zs = run.final_up.0.abs().max(run.final_down.0.abs());
    let vs = run.final_up.1.abs().max(run.final_down.1.abs());
    h.check(
        "9b",
        "numeric closure",
        zs < 1e-6 * run.delta_z_max && vs < 1e-6 * run.max_speed,
        format!(
            "|z(t0)|/dz = {:.2e}, |v(t0)|/v_max = {:.2e} (both < 1e-6)",
            zs / run.delta_z_max,
            vs / run.max_speed
        ),
    );

    // 9c: path phase against the closed form.
    let beta_oracle = G * pc.t0.powi(3) * pc.g_l * pc.spin_z * MU_B * pc.grad_b * pc.theta.cos() / (16.0 * HBAR);
    let (e_path, e_num) = (rel(result.beta_g_path, beta_oracle), rel(run.phase, beta_oracle));
    h.check(
        "9c",
        "gravity phase along paths",
        e_path < 1e-9 && e_num < 1e-9 && rel(result.beta_g, beta_oracle) < 1e-12,
        format!("analytic paths {e_path:.2e}, RK4 paths {e_num:.2e} (< 1e-9)"),
    );

    // 9d: for S = 1 the levels are {-D, -D + E, E}.
    let e = 0.05;
    let s1 = DoubleWellModel::new(1, 1.0, 0.01, 1.0, 2.0).unwrap().with_transverse(e);
    let sp = s1.ed_spectrum(MU_B).unwrap();
    h.check(
        "9d",
        "S = 1 splitting equals E",
        (sp.delta_e - e).abs() < 1e-10,
        format!("dE = {:.15}, E = {e}", sp.delta_e),
    );

    // 9e: exponential decay of the ED splitting.
    let spins: Vec<f64> = (10..=50).map(f64::from).collect();
    let logs: Vec<f64> = (10..=50)
        .map(|s| Model::new(s, 1.0, 0.01, 1.0, 2.0).unwrap().ed_spectrum(MU_B).unwrap().delta_e.ln())
        .collect();
    let r = pearson(&spins, &logs);
    let slope_negative = logs.windows(2).all(|w| w[1] < w[0]);
    h.check(
        "9e",
        "ln dE affine in S over [10, 50]",
        r.abs() > 0.999 && slope_negative,
        format!("Pearson r = {r:.6}, strictly decreasing: {slope_negative}"),
    );

    // 9f: transverse field opens the gap; zero field and zero E restores degeneracy.
    let base = Model::new(10, 1.0, 0.01, 1.0, 2.0).unwrap();
    let bmax = 0.1 * base.d / (base.g_l * MU_B);
    let gaps: Vec<f64> = (0..=20)
        .map(|k| base.clone().with_fields(0.0, bmax * k as f64 / 20.0).ed_spectrum(MU_B).unwrap().delta_e)
        .collect();
    let monotone = gaps.windows(2).all(|w| w[1] > w[0]);
    let degenerate = base.clone().with_transverse(0.0).ed_spectrum(MU_B).unwrap().delta_e;
    h.check(
        "9f",
        "transverse field control",
        monotone && degenerate.abs() < 1e-12,
        format!("monotone over 21 fields: {monotone}, dE(E = 0, B = 0) = {degenerate:e}"),
    );

    // 9g: binomial sampler.
    let n = 1_000_000u64;
    let mut worst: f64 = 0.0;
    for (seed, p) in [(1u64, 0.5), (2, 0.3), (3, 0.9), (4, 0.01)] {
        let (plus, minus) = sample_fringe(p, n, seed).unwrap();
        assert_eq!(plus + minus, n);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        worst = worst.max((plus as f64 - n as f64 * p).abs() / sigma);
    }
    h.check("9g", "sampler mean", worst < 3.0, format!("worst deviation {worst:.2} sigma over 4 seeds (< 3)"));

    // 9h: determinism.
    let a = run_all(&loaded, &[]);
    let b = run_all(&loaded, &[]);
    h.check(
        "9h",
        "byte-identical repeated runs",
        a.files == b.files && !a.files.is_empty(),
        format!("{} output files compared", a.files.len()),
    );

    // 10
    let db = MaterialDb::builtin();
    let yig = db.get("yig").unwrap();
    let spins: Vec<u32> = (100..=2000).collect();
    let start = Instant::now();
    let rows = sweep_fig2(yig, &spins, SpinCounting::reference(), &consts).unwrap();
    let elapsed = start.elapsed();
    let ok_rows = rows.iter().all(|r| r.error.is_none());
    let decreasing = rows.windows(2).all(|w| w[1].de_joule < w[0].de_joule);
    let at500 = rows.iter().find(|r| r.spin == 500).unwrap();
    h.check(
        "10",
        "spectrum sweep S = 100..2000",
        ok_rows && decreasing && within(at500.du_kelvin, 33.0, 100.0) && within(at500.de_ghz, 3.0, 15.0)
            && elapsed < Duration::from_secs(5),
        format!(
            "{} rows, dE strictly decreasing: {decreasing}, S = 500: dU/kB = {:.2} K, dE/h = {:.3} GHz, runtime {:.1} ms",
            rows.len(),
            at500.du_kelvin,
            at500.de_ghz,
            elapsed.as_secs_f64() * 1e3
        ),
    );

    println!("{} criteria failed", h.failures);
    if h.failures > 0 {
        std::process::exit(1);
    }
}
