use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spincat::config::{parse_config, LoadedConfig};
use spincat::decoherence::Overall;
use spincat::materials::{format_material, MaterialDb};
use spincat::protocol::ScanParameter;
use spincat::report::{self, json_document, SectionId, Status};
use spincat::{Constants, Error};

#[derive(Parser)]
#[command(name = "spincat", about = "Spin superposition simulator and feasibility engine", disable_version_flag = true)]
struct Cli {
    /// Run config file (sectioned key = value). Defaults reproduce the reference scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for `run`. Stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the human-readable log on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print tool and material database versions.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the material database.
    Materials {
        #[command(subcommand)]
        action: MaterialsCmd,
    },
    /// Barrier gap, tunnel splitting and rotation parameter for the configured particle.
    Splitting {
        /// Spin to use instead of the configured one.
        #[arg(long)]
        spin: Option<u32>,
    },
    /// Stern-Gerlach interferometer.
    Protocol {
        #[command(subcommand)]
        action: ProtocolCmd,
    },
    /// Decoherence budget.
    Budget,
    /// Design-space search.
    Design {
        #[command(subcommand)]
        action: DesignCmd,
    },
    /// Gravity versus magnetic dipole force for two core-shell particles.
    GravityTest {
        /// Centre separation (SI, or with unit, e.g. "500 um").
        #[arg(long)]
        d: Option<String>,
    },
    /// Every section, written into the --out directory.
    Run {
        /// Restrict to these sections (repeatable).
        #[arg(long, value_delimiter = ',')]
        section: Vec<String>,
    },
}

#[derive(Subcommand)]
enum MaterialsCmd {
    List,
    Show { name: String },
}

#[derive(Subcommand)]
enum ProtocolCmd {
    Run {
        /// Also write the sampled trajectories as CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    Scan {
        #[arg(long)]
        vary: Vary,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Vary {
    Theta,
    T0,
}

#[derive(Subcommand)]
enum DesignCmd {
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    material: Option<String>,
    /// delta_z or macroscopicity.
    #[arg(long)]
    objective: Option<String>,
    /// Rows to write.
    #[arg(long)]
    top: Option<usize>,
}

/// Failure with its exit status.
struct Fail(Status, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(Status::from_error(&e), e.to_string())
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Fail {
    Fail(Status::InputError, format!("{}: {e}", path.display()))
}

struct Ctx {
    out: Option<PathBuf>,
    quiet: bool,
    loaded: LoadedConfig,
    consts: Constants,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, body: &str) -> Result<(), Fail> {
        match &self.out {
            Some(p) => std::fs::write(p, body).map_err(|e| io_fail(p, e)),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }
}

fn load(cli: &Cli) -> Result<LoadedConfig, Fail> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| io_fail(p, e))?,
        None => String::new(),
    };
    let mut loaded = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
        loaded.defaulted.remove("seed");
    }
    Ok(loaded)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.version {
        println!(
            "spincat {} (material database v{})",
            env!("CARGO_PKG_VERSION"),
            MaterialDb::builtin().version
        );
        return ExitCode::SUCCESS;
    }
    let status = match execute(&cli) {
        Ok(s) => s,
        Err(Fail(s, msg)) => {
            eprintln!("error: {msg}");
            s
        }
    };
    ExitCode::from(status.exit_code() as u8)
}

fn execute(cli: &Cli) -> Result<Status, Fail> {
    let Some(command) = &cli.command else {
        return Err(Fail(Status::InputError, "no command given; see --help".into()));
    };
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
        loaded: load(cli)?,
        consts: Constants::codata(),
    };
    let cfg = &ctx.loaded.config;
    match command {
        Command::Materials { action } => {
            let db = cfg.database()?;
            match action {
                MaterialsCmd::List => {
                    let mut s = String::new();
                    for n in db.names() {
                        s.push_str(&format!("material {n}\n"));
                    }
                    for n in db.shell_names() {
                        s.push_str(&format!("shell {n}\n"));
                    }
                    ctx.emit(&s)?;
                }
                MaterialsCmd::Show { name } => {
                    let body = match db.get(name) {
                        Ok(m) => format_material(m),
                        Err(e) => match db.shell(name) {
                            Ok(s) => format!("[shell {}]\nrho = {}\n", s.name, s.rho),
                            Err(_) => return Err(e.into()),
                        },
                    };
                    ctx.emit(&body)?;
                }
            }
            Ok(Status::Ok)
        }
        Command::Splitting { spin } => {
            let mut c = cfg.clone();
            if spin.is_some() {
                c.particle.spin = *spin;
            }
            let r = report::spectrum_report(&c, &ctx.consts)?;
            ctx.log(format!(
                "S = {}: dU/kB = {:.3} K, dE/h = {:.3} GHz, alpha = {:.3e}",
                r.spin, r.delta_u_kelvin, r.delta_e_ghz, r.rotation_alpha
            ));
            ctx.emit(&json_document("spectrum", &r)?)?;
            Ok(Status::Ok)
        }
        Command::Protocol { action } => {
            let pc = cfg.protocol_config()?;
            match action {
                ProtocolCmd::Run { trajectory } => {
                    let r = report::protocol_report(&pc, cfg.protocol.shots, cfg.seed, &ctx.consts)?;
                    ctx.log(format!(
                        "delta_z = {:.4e} m, beta_g = {:.4e} rad, P(+) = {:.6}",
                        r.result.delta_z_max, r.result.beta_g, r.result.p_plus
                    ));
                    if let Some(p) = trajectory {
                        let body = report::trajectory_csv(&r.result)?;
                        std::fs::write(p, body).map_err(|e| io_fail(p, e))?;
                    }
                    ctx.emit(&json_document("protocol", &r)?)?;
                    Ok(if r.result.closure_ok { Status::Ok } else { Status::Fail })
                }
                ProtocolCmd::Scan { vary, from, to, steps } => {
                    let param = match vary {
                        Vary::Theta => ScanParameter::Theta,
                        Vary::T0 => ScanParameter::T0,
                    };
                    let rows = report::linear_scan(&pc, param, *from, *to, *steps, &ctx.consts)?;
                    ctx.emit(&report::scan_csv(param, &rows)?)?;
                    let bad = rows.iter().any(|r| r.error.is_some());
                    Ok(if bad { Status::InputError } else { Status::Ok })
                }
            }
        }
        Command::Budget => {
            let b = report::budget_for(cfg, &ctx.consts)?;
            for c in &b.channels {
                ctx.log(format!("{:<22} rate {:>11.4e} Hz  {:?}", c.name, c.rate, c.verdict));
            }
            ctx.log(format!("overall: {:?}", b.overall));
            ctx.emit(&json_document("budget", &b)?)?;
            Ok(match b.overall {
                Overall::Pass => Status::Ok,
                Overall::Fail => Status::Fail,
                Overall::Indeterminate => Status::NumericError,
            })
        }
        Command::Design { action: DesignCmd::Optimize(args) } => {
            let mut c = cfg.clone();
            if let Some(m) = &args.material {
                c.particle.material = m.clone();
            }
            if let Some(o) = &args.objective {
                c.design.objective = o.parse()?;
            }
            if let Some(t) = args.top {
                c.design.top = t;
            }
            let r = report::design_run(&c, &ctx.consts)?;
            ctx.log(format!("{} candidates evaluated, {} feasible", r.evaluated, r.feasible));
            ctx.emit(&report::designs_csv(&r, c.design.top)?)?;
            Ok(if r.best().is_some() { Status::Ok } else { Status::Fail })
        }
        Command::GravityTest { d } => {
            let mut c = cfg.clone();
            if let Some(d) = d {
                c.gravity.distance = spincat::units::parse_si(d, spincat::units::Dimension::LENGTH)?;
            }
            let g = report::gravity_report(&c, &ctx.consts)?;
            ctx.log(format!("F_grav / F_mag = {:.4e}", g.ratio));
            ctx.emit(&json_document("gravity", &g)?)?;
            Ok(if g.ratio > 1.0 { Status::Ok } else { Status::Fail })
        }
        Command::Run { section } => {
            let ids = section
                .iter()
                .map(|s| s.parse::<SectionId>())
                .collect::<Result<Vec<_>, _>>()?;
            let bundle = report::run_all(&ctx.loaded, &ids);
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("spincat-out"));
            bundle.write_to(&dir).map_err(|e| io_fail(&dir, e))?;
            for o in &bundle.outcomes {
                ctx.log(format!(
                    "{:<9} {:?}{}",
                    o.section.as_str(),
                    o.status,
                    o.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
                ));
            }
            for a in &bundle.anchors {
                ctx.log(format!("  {:<22} {:>12.4e} {:<4} {:?}", a.name, a.value, a.unit, a.status));
            }
            ctx.log(format!("wrote {} files to {}", bundle.files.len(), dir.display()));
            Ok(bundle.worst())
        }
    }
}
