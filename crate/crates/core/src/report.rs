//! Machine-readable outputs and the full `run` pipeline.
//!
//! All renderers return strings so callers decide where bytes go. Tables
//! are CSV with a leading `# schema_version=N` comment line, floats in `{:e}`
//! form; reports are pretty JSON with sorted keys. Both use LF endings, and
//! equal inputs always give equal bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::constants::PhysicalConstants;
use crate::decoherence::{assemble_budget, macroscopicity, DecoherenceBudget, Overall};
use crate::error::{Error, Result};
use crate::feasibility::{gravity_test_check, optimize, GravityTest, OptimizeResult};
use crate::materials::{mass_and_inertia, MaterialDb};
use crate::protocol::{
    fringe_scan, run_protocol, sample_fringe, Integration, ProtocolConfig, ProtocolResult, ScanParameter, ScanRow,
};
use crate::spinmodel::{sweep_fig2, DoubleWellModel, Fig2Row};

pub const SCHEMA_VERSION: u32 = 1;

/// One independently failing part of a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionId {
    Spectrum,
    Fig2,
    Protocol,
    Budget,
    Design,
    Gravity,
}

impl SectionId {
    pub const ALL: [SectionId; 6] = [
        Self::Spectrum,
        Self::Fig2,
        Self::Protocol,
        Self::Budget,
        Self::Design,
        Self::Gravity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Fig2 => "fig2",
            Self::Protocol => "protocol",
            Self::Budget => "budget",
            Self::Design => "design",
            Self::Gravity => "gravity",
        }
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown section '{s}'")))
    }
}

/// Ordered by severity; the process exit code is the worst one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Fail,
    InputError,
    NumericError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::Fail => 1,
            Self::InputError => 2,
            Self::NumericError => 3,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        if e.is_input_error() {
            Self::InputError
        } else {
            Self::NumericError
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionOutcome {
    pub section: SectionId,
    pub status: Status,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Match,
    Mismatch,
    /// No acceptance window; value shown for comparison only.
    Reported,
}

/// A headline number next to its published counterpart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub name: &'static str,
    pub section: SectionId,
    pub value: f64,
    pub unit: &'static str,
    pub quoted: f64,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub status: AnchorStatus,
}

impl Anchor {
    fn window(name: &'static str, section: SectionId, value: f64, unit: &'static str, quoted: f64, low: f64, high: f64) -> Self {
        let status = if value >= low && value <= high {
            AnchorStatus::Match
        } else {
            AnchorStatus::Mismatch
        };
        Self { name, section, value, unit, quoted, low: Some(low), high: Some(high), status }
    }

    fn relative(name: &'static str, section: SectionId, value: f64, unit: &'static str, quoted: f64, tol: f64) -> Self {
        Self::window(name, section, value, unit, quoted, quoted * (1.0 - tol), quoted * (1.0 + tol))
    }

    fn reported(name: &'static str, section: SectionId, value: f64, unit: &'static str, quoted: f64) -> Self {
        Self { name, section, value, unit, quoted, low: None, high: None, status: AnchorStatus::Reported }
    }
}

/// Spin-model numbers for the configured particle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub spin: u32,
    pub core_radius_m: f64,
    pub mass_kg: f64,
    pub inertia_kg_m2: f64,
    pub d_joule: f64,
    pub delta_u_joule: f64,
    pub delta_u_kelvin: f64,
    pub delta_e_joule: f64,
    pub delta_e_ghz: f64,
    pub delta_e_mk: f64,
    pub rotation_alpha: f64,
    pub blocking_temperature_k: f64,
}

pub fn spectrum_report(cfg: &RunConfig, consts: &PhysicalConstants<f64>) -> Result<SpectrumReport> {
    let particle = cfg.particle_spec()?;
    let spin = particle.spin()?;
    let model = DoubleWellModel::for_particle(&particle, spin)?;
    let (mass, inertia) = mass_and_inertia(&particle)?;
    let du = model.delta_u();
    let de = model.wkb_splitting(consts.hbar)?;
    Ok(SpectrumReport {
        spin,
        core_radius_m: particle.core_radius,
        mass_kg: mass,
        inertia_kg_m2: inertia,
        d_joule: model.d,
        delta_u_joule: du,
        delta_u_kelvin: du / consts.k_b,
        delta_e_joule: de,
        delta_e_ghz: de / consts.h / 1e9,
        delta_e_mk: de / consts.k_b * 1e3,
        rotation_alpha: model.rotation_parameter(inertia, consts.hbar)?,
        blocking_temperature_k: particle.core.t_blocking,
    })
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

fn csv_table(kind: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut buf = format!("# {kind} schema_version={SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv_writer(&mut buf);
        let io = |e: csv::Error| Error::Numeric(format!("csv encoding failed: {e}"));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv encoding failed: {e}")))?;
    }
    String::from_utf8(buf).map_err(|e| Error::Numeric(e.to_string()))
}

fn e(v: f64) -> String {
    format!("{v:e}")
}

/// Wraps a serialisable value in a JSON object tagged with kind and schema.
pub fn json_document<S: Serialize>(kind: &str, body: &S) -> Result<String> {
    let mut value = serde_json::to_value(body).map_err(|e| Error::Numeric(e.to_string()))?;
    let obj = match &mut value {
        Value::Object(map) => map,
        _ => return Err(Error::Numeric("report body must be a JSON object".into())),
    };
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("kind".into(), json!(kind));
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn fig2_csv(rows: &[Fig2Row<f64>]) -> Result<String> {
    csv_table(
        "fig2",
        &["S", "dU_joule", "dU_kelvin", "dE_joule", "dE_ghz", "radius_m", "error"],
        rows.iter().map(|r| {
            vec![
                r.spin.to_string(),
                e(r.du_joule),
                e(r.du_kelvin),
                e(r.de_joule),
                e(r.de_ghz),
                e(r.radius),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn trajectory_csv(result: &ProtocolResult<f64>) -> Result<String> {
    csv_table(
        "trajectory",
        &["t_s", "z_up_m", "v_up_ms", "z_down_m", "v_down_ms"],
        result.trajectory_up.iter().zip(&result.trajectory_down).map(|(u, d)| {
            vec![e(u.t), e(u.z), e(u.v), e(d.z), e(d.v)]
        }),
    )
}

pub fn scan_csv(parameter: ScanParameter, rows: &[ScanRow<f64>]) -> Result<String> {
    let name = match parameter {
        ScanParameter::Theta => "theta_rad",
        ScanParameter::T0 => "t0_s",
    };
    csv_table(
        "fringe_scan",
        &[name, "beta_g_rad", "beta_g_mod_2pi_rad", "p_plus", "error"],
        rows.iter().map(|r| {
            vec![e(r.value), e(r.beta_g), e(r.beta_g_mod_2pi), e(r.p_plus), r.error.clone().unwrap_or_default()]
        }),
    )
}

pub fn designs_csv(result: &OptimizeResult<f64>, top: usize) -> Result<String> {
    csv_table(
        "designs",
        &["rank", "S", "R_m", "R_out_m", "t0_s", "gradB_Tpm", "delta_z_m", "mu_m", "feasible", "binding_constraint"],
        result.ranked.iter().take(top).enumerate().map(|(i, c)| {
            let metrics = c.metrics.as_ref();
            vec![
                (i + 1).to_string(),
                c.spin.to_string(),
                e(c.particle.core_radius),
                e(c.particle.shell_outer_radius),
                e(c.t0),
                e(c.grad_b),
                metrics.map_or(String::new(), |m| e(m.delta_z)),
                metrics.and_then(|m| m.macroscopicity).map_or(String::new(), e),
                c.feasible.to_string(),
                c.binding_constraint().unwrap_or("").to_string(),
            ]
        }),
    )
}

/// Protocol result plus the inputs that produced it and a sampled fringe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub t0_s: f64,
    pub grad_b_tpm: f64,
    pub theta_rad: f64,
    pub p0_kg_ms: f64,
    pub spin_z: f64,
    pub g_l: f64,
    pub mass_kg: f64,
    pub ramp_fraction: f64,
    pub result: ProtocolResult<f64>,
    pub shots: u64,
    pub seed: u64,
    pub count_plus: u64,
    pub count_minus: u64,
}

pub fn protocol_report(
    config: &ProtocolConfig<f64>,
    shots: u64,
    seed: u64,
    consts: &PhysicalConstants<f64>,
) -> Result<ProtocolReport> {
    let result = run_protocol(config, consts)?;
    let (count_plus, count_minus) = sample_fringe(result.p_plus, shots, seed)?;
    Ok(ProtocolReport {
        t0_s: config.t0,
        grad_b_tpm: config.grad_b,
        theta_rad: config.theta,
        p0_kg_ms: config.p0,
        spin_z: config.spin_z,
        g_l: config.g_l,
        mass_kg: config.particle.mass(),
        ramp_fraction: config.ramp_fraction,
        result,
        shots,
        seed,
        count_plus,
        count_minus,
    })
}

/// Runs a fringe scan over `steps` evenly spaced values.
pub fn linear_scan(
    config: &ProtocolConfig<f64>,
    parameter: ScanParameter,
    from: f64,
    to: f64,
    steps: usize,
    consts: &PhysicalConstants<f64>,
) -> Result<Vec<ScanRow<f64>>> {
    if steps == 0 {
        return Err(Error::invalid("scan needs at least one step"));
    }
    let values: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        (0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect()
    };
    fringe_scan(config, parameter, &values, consts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GravityReport {
    pub distance_m: f64,
    pub core_radius_m: f64,
    pub shell_outer_radius_m: f64,
    pub mass_kg: f64,
    pub spin: u32,
    pub f_grav_n: f64,
    pub f_mag_n: f64,
    pub ratio: f64,
}

pub fn gravity_report(cfg: &RunConfig, consts: &PhysicalConstants<f64>) -> Result<GravityReport> {
    let p = cfg.gravity_particle()?;
    let GravityTest { f_grav, f_mag, ratio } = gravity_test_check(&p, &p, cfg.gravity.distance, consts)?;
    Ok(GravityReport {
        distance_m: cfg.gravity.distance,
        core_radius_m: p.core_radius,
        shell_outer_radius_m: p.shell_outer_radius,
        mass_kg: p.mass(),
        spin: p.spin()?,
        f_grav_n: f_grav,
        f_mag_n: f_mag,
        ratio,
    })
}

/// Budget for the configured experiment, with the separation taken from
/// the protocol and the splitting from the spin model.
pub fn budget_for(cfg: &RunConfig, consts: &PhysicalConstants<f64>) -> Result<DecoherenceBudget<f64>> {
    let pc = cfg.protocol_config()?;
    let particle = &pc.particle;
    let model = DoubleWellModel::for_particle(particle, particle.spin()?)?;
    let de = model.wkb_splitting(consts.hbar)?;
    let dz = run_protocol(&ProtocolConfig { samples: 0, ..pc.clone() }, consts)?.delta_z_max;
    assemble_budget(&cfg.environment, particle, de, pc.t0, dz, consts)
}

pub fn design_run(cfg: &RunConfig, consts: &PhysicalConstants<f64>) -> Result<OptimizeResult<f64>> {
    optimize(&cfg.design_problem()?, &cfg.search_spec(), consts)
}

/// Every output of one `run`, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
    pub outcomes: Vec<SectionOutcome>,
    pub anchors: Vec<Anchor>,
    pub notes: Vec<String>,
}

impl ReportBundle {
    pub fn worst(&self) -> Status {
        self.outcomes.iter().map(|o| o.status).max().unwrap_or(Status::Ok)
    }

    pub fn exit_code(&self) -> i32 {
        self.worst().exit_code()
    }

    pub fn anchor(&self, name: &str) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.name == name)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    consts: PhysicalConstants<f64>,
    bundle: ReportBundle,
}

impl Runner<'_> {
    fn section(&mut self, id: SectionId, f: impl FnOnce(&mut Self) -> Result<Status>) {
        let (status, message) = match f(self) {
            Ok(s) => (s, None),
            Err(e) => (Status::from_error(&e), Some(e.to_string())),
        };
        self.bundle.outcomes.push(SectionOutcome { section: id, status, message });
    }

    fn file(&mut self, name: &str, body: String) {
        self.bundle.files.insert(name.to_string(), body);
    }

    fn spectrum(&mut self) -> Result<Status> {
        let r = spectrum_report(self.cfg, &self.consts)?;
        let s = SectionId::Spectrum;
        let a = &mut self.bundle.anchors;
        a.push(Anchor::window("delta_u_kelvin", s, r.delta_u_kelvin, "K", 50.0, 33.0, 100.0));
        a.push(Anchor::window("delta_e_ghz", s, r.delta_e_ghz, "GHz", 10.0, 3.0, 15.0));
        a.push(Anchor::reported("delta_e_mk", s, r.delta_e_mk, "mK", 500.0));
        a.push(Anchor::window("rotation_alpha", s, r.rotation_alpha, "", 5e-4, 2.5e-4, 1.5e-3));
        a.push(Anchor::relative("mass_kg", s, r.mass_kg, "kg", 2e-20, 0.05));
        if r.blocking_temperature_k <= self.cfg.constraints.t_exp {
            self.bundle.notes.push(format!(
                "experiment temperature {} K is not below the blocking temperature {} K",
                self.cfg.constraints.t_exp, r.blocking_temperature_k
            ));
        }
        let name = "spectrum.json".to_string();
        self.file(&name, json_document("spectrum", &r)?);
        Ok(Status::Ok)
    }

    fn fig2(&mut self) -> Result<Status> {
        let db = self.cfg.database()?;
        let material = db.get(&self.cfg.particle.material)?;
        let rows = sweep_fig2(material, &self.cfg.fig2_spins(), self.cfg.counting(), &self.consts)?;
        let name = self.cfg.output.fig2.clone();
        self.file(&name, fig2_csv(&rows)?);
        let bad = rows.iter().filter(|r| r.error.is_some()).count();
        if bad > 0 {
            self.bundle.notes.push(format!("fig2: {bad} rows could not be computed"));
            return Ok(Status::Fail);
        }
        Ok(Status::Ok)
    }

    fn protocol(&mut self) -> Result<Status> {
        let pc = self.cfg.protocol_config()?;
        let report = protocol_report(&pc, self.cfg.protocol.shots, self.cfg.seed, &self.consts)?;
        let r = &report.result;
        self.bundle.anchors.push(Anchor::window(
            "delta_z_m",
            SectionId::Protocol,
            r.delta_z_max,
            "m",
            5e-6,
            4.4e-6,
            6.6e-6,
        ));
        if r.method == Integration::Numeric && !r.closure_ok {
            self.bundle.notes.push(format!(
                "ramped schedule leaves closure error {:e} m / {:e} m/s",
                r.closure_error_pos, r.closure_error_vel
            ));
        }
        let status = if r.closure_ok { Status::Ok } else { Status::Fail };
        let (p, t) = (self.cfg.output.protocol.clone(), self.cfg.output.trajectory.clone());
        self.file(&t, trajectory_csv(r)?);
        self.file(&p, json_document("protocol", &report)?);
        Ok(status)
    }

    fn budget(&mut self) -> Result<Status> {
        let b = budget_for(self.cfg, &self.consts)?;
        let s = SectionId::Budget;
        let a = &mut self.bundle.anchors;
        if let Some(gas) = b.channel("gas") {
            a.push(Anchor::window("gas_rate_hz", s, gas.rate, "1/s", 200.0, 140.0, 260.0));
            if let Some(v) = gas.recoil_velocity {
                a.push(Anchor::relative("gas_recoil_ms", s, v, "m/s", 2e-5, 0.3));
            }
            a.push(Anchor::relative("gas_position_noise_m", s, gas.position_noise, "m", 2e-10, 0.3));
        }
        if let Some(v) = b.channel("blackbody_emission").and_then(|c| c.recoil_velocity) {
            a.push(Anchor::relative("blackbody_recoil_ms", s, v, "m/s", 3e-12, 0.3));
        }
        if let Some(f) = b.channel("magnetic_noise").and_then(|c| c.frequency) {
            a.push(Anchor::relative("magnetic_noise_hz", s, f, "Hz", 30.0, 0.2));
        }
        if let (Some(g), Some(ad)) = (b.channel("csl_grw"), b.channel("csl_adler")) {
            a.push(Anchor::relative("csl_adler_over_grw", s, ad.rate / g.rate, "", 1e8, 1e-9));
            if b.csl_mode == crate::decoherence::CslMode::Calibrated {
                a.push(Anchor::relative("csl_grw_rate_hz", s, g.rate, "Hz", 8.5e4, 0.01));
            }
        }
        let particle = self.cfg.particle_spec()?;
        let t0 = self.cfg.protocol.t0;
        let mu = macroscopicity(particle.mass(), t0, &self.consts)?;
        self.bundle.anchors.push(Anchor::window("mu_m", s, mu, "", 16.0, 15.5, 16.5));
        let shelled = self.cfg.gravity_particle()?;
        let mu_shell = macroscopicity(shelled.mass(), t0, &self.consts)?;
        self.bundle.anchors.push(Anchor::window("mu_m_core_shell", s, mu_shell, "", 29.0, 28.5, 29.5));
        if t0 > b.gilbert_time {
            self.bundle.notes.push(format!(
                "t0 = {t0:e} s exceeds the damping-limited coherence time {:e} s",
                b.gilbert_time
            ));
        }
        for n in &b.notes {
            if !self.bundle.notes.contains(n) {
                self.bundle.notes.push(n.clone());
            }
        }
        let name = self.cfg.output.budget.clone();
        self.file(&name, json_document("budget", &b)?);
        Ok(match b.overall {
            Overall::Pass => Status::Ok,
            Overall::Fail => Status::Fail,
            Overall::Indeterminate => Status::NumericError,
        })
    }

    fn design(&mut self) -> Result<Status> {
        let r = design_run(self.cfg, &self.consts)?;
        let name = self.cfg.output.designs.clone();
        self.file(&name, designs_csv(&r, self.cfg.design.top)?);
        Ok(if r.best().is_some() { Status::Ok } else { Status::Fail })
    }

    fn gravity(&mut self) -> Result<Status> {
        let g = gravity_report(self.cfg, &self.consts)?;
        self.bundle.anchors.push(Anchor::window("gravity_ratio", SectionId::Gravity, g.ratio, "", 1757.0, 600.0, 6000.0));
        let name = self.cfg.output.gravity.clone();
        self.file(&name, json_document("gravity", &g)?);
        Ok(if g.ratio > 1.0 { Status::Ok } else { Status::Fail })
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    material_db_version: u32,
    sections: &'a [SectionOutcome],
    anchors: &'a [Anchor],
    notes: &'a [String],
    exit_code: i32,
}

/// Runs the selected sections (all when empty) and renders every output,
/// including `summary.json` and the config echo. A failing section never
/// stops the others.
pub fn run_all(loaded: &crate::config::LoadedConfig, sections: &[SectionId]) -> ReportBundle {
    let cfg = &loaded.config;
    let mut run = Runner {
        cfg,
        consts: PhysicalConstants::codata(),
        bundle: ReportBundle { files: BTreeMap::new(), outcomes: Vec::new(), anchors: Vec::new(), notes: Vec::new() },
    };
    let wanted = |id: SectionId| sections.is_empty() || sections.contains(&id);
    for id in SectionId::ALL.into_iter().filter(|&id| wanted(id)) {
        match id {
            SectionId::Spectrum => run.section(id, Runner::spectrum),
            SectionId::Fig2 => run.section(id, Runner::fig2),
            SectionId::Protocol => run.section(id, Runner::protocol),
            SectionId::Budget => run.section(id, Runner::budget),
            SectionId::Design => run.section(id, Runner::design),
            SectionId::Gravity => run.section(id, Runner::gravity),
        }
    }
    if let Ok(p) = cfg.particle_spec() {
        if let Some((anchored, geometric)) = p.spin_count_discrepancy() {
            run.bundle.notes.push(format!(
                "spin override S = {anchored} differs from the lattice count {geometric}"
            ));
        }
    }
    if cfg.environment.csl_mode == crate::decoherence::CslMode::Naive && wanted(SectionId::Budget) {
        run.bundle.notes.push(
            "CSL rates use the naive amplification; set csl_mode = calibrated to reproduce quoted rates".into(),
        );
    }
    let mut bundle = run.bundle;
    let db = MaterialDb::builtin();
    let summary = Summary {
        seed: cfg.seed,
        material_db_version: db.version,
        sections: &bundle.outcomes,
        anchors: &bundle.anchors,
        notes: &bundle.notes,
        exit_code: bundle.exit_code(),
    };
    let body = json_document("summary", &summary).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}\n"));
    bundle.files.insert(cfg.output.summary.clone(), body);
    bundle.files.insert(cfg.output.config.clone(), crate::config::echo(loaded));
    bundle
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn csv_has_schema_comment_and_lf() {
        let s = csv_table("t", &["a", "b"], vec![vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(s, "# t schema_version=1\na,b\n1,\"x,y\"\n");
    }

    #[test]
    fn json_document_is_tagged() {
        #[derive(Serialize)]
        struct B {
            x: f64,
        }
        let s = json_document("demo", &B { x: 1.5 }).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "demo");
        assert_eq!(v["x"], 1.5);
        assert!(s.ends_with("}\n") && !s.contains('\r'));
    }

    #[test]
    fn section_ids_parse() {
        for id in SectionId::ALL {
            assert_eq!(id.as_str().parse::<SectionId>().unwrap(), id);
        }
        assert!("laser".parse::<SectionId>().is_err());
    }

    #[test]
    fn status_severity() {
        assert!(Status::NumericError > Status::InputError);
        assert!(Status::InputError > Status::Fail);
        assert_eq!(Status::from_error(&Error::Numeric("x".into())), Status::NumericError);
        assert_eq!(Status::from_error(&Error::invalid("x")), Status::InputError);
    }

    #[test]
    fn protocol_only_run() {
        let l = parse_config("").unwrap();
        let b = run_all(&l, &[SectionId::Protocol]);
        assert_eq!(b.outcomes.len(), 1);
        assert_eq!(b.outcomes[0].status, Status::Ok);
        assert!(b.files.contains_key("protocol.json"));
        assert!(b.files.contains_key("trajectory.csv"));
        assert!(!b.files.contains_key("budget.json"));
        assert_eq!(b.anchor("delta_z_m").unwrap().status, AnchorStatus::Match);
    }

    #[test]
    fn failing_section_is_isolated() {
        // A gravity pair that cannot be built does not stop the protocol.
        let l = parse_config("[gravity]\nshell = unobtainium\n");
        assert!(l.is_err());
        let mut l = parse_config("").unwrap();
        l.config.gravity.shell = "unobtainium".into();
        let b = run_all(&l, &[SectionId::Protocol, SectionId::Gravity]);
        assert_eq!(b.outcomes[0].status, Status::Ok);
        assert_eq!(b.outcomes[1].status, Status::InputError);
        assert_eq!(b.exit_code(), 2);
        assert!(b.files.contains_key("summary.json"));
    }
}
