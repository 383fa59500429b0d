//! The `cartan` command line: scene files in, CSV or JSON out.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure,
//! 64 usage error.

pub mod commands;
pub mod output;
pub mod scene;

use std::ffi::OsString;

use clap::{Args, Parser, Subcommand};

use commands::{run_task, Ctx};
use output::{format_of, render, Format, Report};
use scene::{Failure, Res, Scene, TASKS};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "cartan", version, about = "Numerical coframings and Cartan geometries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scene file (JSON)
    #[arg(long)]
    scene: Option<String>,
    /// Output path; the extension (.csv or .json) picks the format
    #[arg(long)]
    out: Option<String>,
    /// Integration and comparison tolerance [default: scene defaults.tol, else 1e-8]
    #[arg(long)]
    tol: Option<f64>,
    /// Offset into the low-discrepancy sampling sequence
    #[arg(long, default_value_t = 0)]
    seed: usize,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Flow a constant or time-dependent field of a coframing or gauge
    Flow(Common),
    /// Develop a curve into a second coframing or Cartan geometry
    Develop(Common),
    /// Search for escaping flows (incompleteness witnesses)
    Probe(Common),
    /// Torsion tower and iterated brackets at a point
    Torsion(Common),
    /// Test whether one point hits another to finite order
    Hit(Common),
    /// Curvature tower of a Cartan gauge
    Curvature(Common),
    /// Jacobi fields and conjugate points along a projective geodesic
    Jacobi(Common),
    /// Growth ranks and characteristics of the rolling distribution
    Roll(Common),
    /// Freeness of cyclic actions on the two G2 homogeneous spaces
    Lens {
        #[arg(long, default_value_t = 30)]
        qmax: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Check a scene without running numerics
    Validate(Common),
}

fn emit(report: &Report, out: Option<&str>) -> Res<()> {
    match out {
        Some(path) => {
            let text = render(report, format_of(path)?);
            std::fs::write(path, text).map_err(|e| Failure::Invalid(format!("{path}: {e}")))
        }
        None => {
            print!("{}", render(report, Format::Json));
            Ok(())
        }
    }
}

fn ctx(c: &Common, scene: &Scene) -> Res<Ctx> {
    let tol = c.tol.or(scene.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
    }
    Ok(Ctx { tol, seed: c.seed })
}

fn load(c: &Common) -> Res<Scene> {
    let path = c.scene.as_deref().ok_or_else(|| Failure::Usage("--scene is required".into()))?;
    Scene::load(path)
}

fn scene_task(name: &str, c: &Common) -> Res<()> {
    if let Some(o) = &c.out {
        format_of(o)?;
    }
    let scene = load(c)?;
    let ctx = ctx(c, &scene)?;
    let report = run_task(name, &scene, ctx, false)?.expect("full runs report");
    emit(&report, c.out.as_deref())?;
    match report.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn validate(c: &Common) -> Res<()> {
    let scene = load(c)?;
    let ctx = ctx(c, &scene)?;
    scene.check_objects()?;
    let mut tasks = Vec::new();
    for t in TASKS {
        if scene.top().has(t) {
            run_task(t, &scene, ctx, true)?;
            tasks.push(t);
        }
    }
    let report = Report { json: serde_json::json!({ "valid": true, "tasks": tasks }), table: commands::flatten(&serde_json::json!({ "valid": true, "tasks": tasks })), failure: None };
    emit(&report, c.out.as_deref())
}

fn dispatch(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Flow(c) => scene_task("flow", &c),
        Cmd::Develop(c) => scene_task("develop", &c),
        Cmd::Probe(c) => scene_task("probe", &c),
        Cmd::Torsion(c) => scene_task("torsion", &c),
        Cmd::Hit(c) => scene_task("hit", &c),
        Cmd::Curvature(c) => scene_task("curvature", &c),
        Cmd::Jacobi(c) => scene_task("jacobi", &c),
        Cmd::Roll(c) => scene_task("roll", &c),
        Cmd::Lens { qmax, out } => {
            if let Some(o) = &out {
                format_of(o)?;
            }
            emit(&commands::lens_cmd(qmax)?, out.as_deref())
        }
        Cmd::Validate(c) => validate(&c),
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("cartan: {f}");
            f.code()
        }
    }
}
