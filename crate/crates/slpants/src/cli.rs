//! Command-line verbs. Each returns its exit code; see [`crate::exit`].

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use slpants_core::grid::Field;
use slpants_core::topology::{classify_total_space, QuotientTopology};

use crate::config::{MeshFormat, RunConfig};
use crate::error::{exit, CliError};
use crate::pipeline::{self, Problem};
use crate::report::{Check, RunReport, SolveSummary};

#[derive(Debug, Parser)]
#[command(name = "slpants", version, about = "Special Lagrangian pairs of pants from the Monge-Ampère equation")]
pub struct Cli {
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Mesh format; overrides `output.mesh_format`.
    #[arg(long, value_enum)]
    pub format: Option<MeshFormat>,
    /// Use this solution CSV instead of solving.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and write the solution CSV and report.
    Solve(Common),
    /// Recheck a solution CSV against the config.
    Verify(Common),
    /// Solve for every `family.offsets` entry and cross-check translations.
    Family(Common),
    /// Compare fitted edge decay rates with the edge eigenproblem.
    Asymptotics(Common),
    /// Classify the total space, from a solution or from `--genus`,
    /// `--boundaries` and `--ends`.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires_all = ["boundaries", "ends"], allow_negative_numbers = true)]
        genus: Option<i64>,
        #[arg(long, requires_all = ["genus", "ends"], allow_negative_numbers = true)]
        boundaries: Option<i64>,
        #[arg(long, requires_all = ["genus", "boundaries"], allow_negative_numbers = true)]
        ends: Option<i64>,
    },
    /// Write the gradient-graph mesh.
    Export(Common),
}

struct Ctx {
    quiet: bool,
    start: Instant,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let ctx = Ctx { quiet: cli.quiet, start: Instant::now() };
    let result = match &cli.command {
        Command::Solve(c) => cmd_solve(&ctx, c),
        Command::Verify(c) => cmd_verify(&ctx, c),
        Command::Family(c) => cmd_family(&ctx, c),
        Command::Asymptotics(c) => cmd_asymptotics(&ctx, c),
        Command::Classify { common, genus, boundaries, ends } => match (genus, boundaries, ends) {
            (Some(g), Some(b), Some(n)) => cmd_classify_counts(&ctx, *g, *b, *n),
            _ => cmd_classify(&ctx, common),
        },
        Command::Export(c) => cmd_export(&ctx, c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    match &c.config {
        Some(p) => RunConfig::load(p),
        None => Err(CliError::Config { key: "--config".into(), message: "a config file is required".into() }),
    }
}

fn out_path(c: &Common, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&c.out).map_err(|e| CliError::io(&c.out, e))?;
    Ok(c.out.join(name))
}

fn write_report(ctx: &Ctx, c: &Common, mut r: RunReport) -> Result<RunReport, CliError> {
    r.timing.wall_time_s = ctx.start.elapsed().as_secs_f64();
    let path = out_path(c, &r.config.output.report.clone())?;
    std::fs::write(&path, r.to_json()).map_err(|e| CliError::io(&path, e))?;
    for ch in &r.checks {
        ctx.say(format!(
            "{} {} = {:.6e} ({} {:e})",
            if ch.pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.value,
            ch.comparison,
            ch.threshold
        ));
    }
    for w in &r.warnings {
        ctx.say(format!("WARN {w}"));
    }
    ctx.say(format!("report: {}", path.display()));
    Ok(r)
}

/// The field from `--solution` or from a fresh solve, plus the solve summary
/// when one ran. Non-convergence is reported with the last iterate.
fn obtain(ctx: &Ctx, c: &Common, p: &Problem, r: &mut RunReport) -> Result<Result<Field, i32>, CliError> {
    if let Some(path) = &c.solution {
        let rows = crate::io::read_solution(path)?;
        let values = crate::io::match_grid(&p.grid, &rows)?;
        return Ok(Ok(p.field(values)?));
    }
    match pipeline::solve(p) {
        Ok(s) => {
            r.solve = Some(s.summary(&p.grid));
            ctx.say(format!(
                "converged: {} nodes, {} Newton iterations, residual {:.3e}",
                p.grid.len(),
                s.report.iterations,
                s.report.residual
            ));
            Ok(Ok(s.phi))
        }
        Err(slpants_core::Error::NonConvergence(b)) => {
            let (phi, rep) = *b;
            r.solve = Some(SolveSummary::new(&rep, p.grid.len(), false, false));
            r.pass = false;
            let path = out_path(c, &p.config.output.solution)?;
            crate::io::write_solution(&path, &p.grid, &phi)?;
            ctx.say(format!("no convergence after {} iterations (residual {:.3e})", rep.iterations, rep.residual));
            Ok(Err(exit::NON_CONVERGENCE))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_solve(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    let p = Problem::new(&cfg)?;
    let mut r = RunReport::new("solve", &cfg);
    let phi = match obtain(ctx, c, &p, &mut r)? {
        Ok(phi) => phi,
        Err(code) => {
            write_report(ctx, c, r)?;
            return Ok(code);
        }
    };
    let path = out_path(c, &cfg.output.solution)?;
    crate::io::write_solution(&path, &p.grid, &phi)?;
    ctx.say(format!("solution: {}", path.display()));
    let v = pipeline::verify(&p, &phi, used_scheme(&r, &cfg))?;
    v.record(&mut r);
    r.topology = Some(pipeline::topology(&v.mesh, p.polygon.len())?);
    write_report(ctx, c, r)?;
    Ok(exit::OK)
}

fn used_scheme(r: &RunReport, cfg: &RunConfig) -> slpants_core::scheme::Scheme {
    match &r.solve {
        Some(s) if s.fell_back_to_monotone => slpants_core::scheme::Scheme::Monotone,
        _ => cfg.scheme(),
    }
}

fn cmd_verify(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    if c.solution.is_none() {
        return Err(CliError::Config { key: "--solution".into(), message: "verify needs a solution CSV".into() });
    }
    let p = Problem::new(&cfg)?;
    let mut r = RunReport::new("verify", &cfg);
    let phi = match obtain(ctx, c, &p, &mut r)? {
        Ok(phi) => phi,
        Err(code) => return Ok(code),
    };
    let v = pipeline::verify(&p, &phi, cfg.scheme())?;
    v.record(&mut r);
    let r = write_report(ctx, c, r)?;
    Ok(if r.pass { exit::OK } else { exit::VERIFICATION })
}

fn cmd_family(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    let offsets = if cfg.family.offsets.is_empty() { vec![cfg.offsets()] } else { cfg.family.offsets.clone() };
    let mut r = RunReport::new("family", &cfg);
    let (members, pairs, _) = pipeline::family(&cfg, &offsets)?;
    let bound = 10.0 * cfg.solver.tol;
    let mut code = exit::OK;
    for (k, m) in members.iter().enumerate() {
        match &m.solve {
            Some(s) => ctx.say(format!("member {k}: converged in {} iterations", s.iterations)),
            None => {
                ctx.say(format!("member {k}: {}", m.error.as_deref().unwrap_or("failed")));
                r.pass = false;
                code = exit::NON_CONVERGENCE;
            }
        }
    }
    for pr in &pairs {
        match pr.affine_deviation {
            Some(d) => r.check(Check::at_most(&format!("family[{},{}].affine_deviation", pr.first, pr.second), d, bound)),
            None if pr.no_translation_match => {
                ctx.say(format!("members {} and {}: no translation relates the offsets", pr.first, pr.second))
            }
            None => {}
        }
    }
    r.family = members;
    r.family_pairs = pairs;
    let r = write_report(ctx, c, r)?;
    if code == exit::OK && !r.pass {
        code = exit::VERIFICATION;
    }
    Ok(code)
}

fn cmd_asymptotics(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    let p = Problem::new(&cfg)?;
    let mut r = RunReport::new("asymptotics", &cfg);
    let phi = match obtain(ctx, c, &p, &mut r)? {
        Ok(phi) => phi,
        Err(code) => {
            write_report(ctx, c, r)?;
            return Ok(code);
        }
    };
    let mesh = slpants_core::reconstruction::build_graph_mesh(&p.grid, &phi)?;
    let edges = pipeline::edge_rates(&p, &mesh)?;
    for e in &edges {
        ctx.say(format!(
            "edge {}: lambda_sl {:.6} lambda_fit {:.6} rel_error {:.4} r2 {:.5}",
            e.edge, e.lambda_sl, e.lambda_fit, e.rel_error, e.r2
        ));
    }
    pipeline::record_rates(&mut r, edges);
    let r = write_report(ctx, c, r)?;
    Ok(if r.pass { exit::OK } else { exit::VERIFICATION })
}

fn cmd_classify_counts(ctx: &Ctx, g: i64, b: i64, n: i64) -> Result<i32, CliError> {
    let s = classify_total_space(&QuotientTopology::new(g, b, n)?)?;
    ctx.say(format!("{} (Raymond count {})", s.descriptor, s.raymond_count));
    Ok(exit::OK)
}

fn cmd_classify(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    let p = Problem::new(&cfg)?;
    let mut r = RunReport::new("classify", &cfg);
    let phi = match obtain(ctx, c, &p, &mut r)? {
        Ok(phi) => phi,
        Err(code) => {
            write_report(ctx, c, r)?;
            return Ok(code);
        }
    };
    let mesh = slpants_core::reconstruction::build_graph_mesh(&p.grid, &phi)?;
    let t = pipeline::topology(&mesh, p.polygon.len())?;
    ctx.say(format!("chi = {}, boundary cycles = {}: {}", t.euler_characteristic, t.boundary_cycles, t.descriptor));
    r.check(Check::at_most("topology.summands", (2 * t.g + t.b) as f64, 0.0));
    r.topology = Some(t);
    let r = write_report(ctx, c, r)?;
    Ok(if r.pass { exit::OK } else { exit::VERIFICATION })
}

fn cmd_export(ctx: &Ctx, c: &Common) -> Result<i32, CliError> {
    let cfg = load(c)?;
    let p = Problem::new(&cfg)?;
    let mut r = RunReport::new("export", &cfg);
    let phi = match obtain(ctx, c, &p, &mut r)? {
        Ok(phi) => phi,
        Err(code) => return Ok(code),
    };
    let mesh = slpants_core::reconstruction::build_graph_mesh(&p.grid, &phi)?;
    let format = c.format.unwrap_or(cfg.output.mesh_format);
    let path = out_path(c, &format!("{}.{}", cfg.output.mesh, format.extension()))?;
    crate::io::export_mesh(&mesh, format, &path)?;
    ctx.say(format!("mesh: {} ({} triangles)", path.display(), mesh.triangles.len()));
    Ok(exit::OK)
}

/// Parses `args` and runs; for tests and embedding.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            }
        }
    }
}
