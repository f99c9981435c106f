//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use noether_core::pmp::{self, ActiveSet};
use noether_core::registry;
use noether_core::symmetry::{self, linearized_residuals, pointwise_invariance};
use noether_core::{conservation_report, shoot, Error, Extremal, Params, ShootConfig, SymmetryFamily};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::problem_file::ProblemFile;
use crate::report::{
    self, ArcSummary, ChargeSummary, HamiltonianSummary, InvarianceSummary, LinearizedSummary, Tolerances,
};
use crate::target::{write_json, Target};

#[derive(Debug, Parser)]
#[command(
    name = "noether",
    version,
    about = "Noether invariance and conserved quantities of constrained optimal control problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Names of the built-in problems.
    List,
    /// Problem summary and symmetry families.
    Describe(TargetArgs),
    /// Invariance residuals at random feasible points, or along an arc.
    Verify(VerifyArgs),
    /// Compute an extremal by shooting.
    Solve(SolveArgs),
    /// Conserved quantity along an arc.
    Charge(ChargeArgs),
    /// Solve, verify along the arc and check conservation.
    Report(ReportArgs),
    /// Write a built-in problem as a problem file.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct TargetArgs {
    /// Built-in problem name or path to a problem file.
    target: String,
    /// Parameter override, `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

impl TargetArgs {
    fn resolve(&self) -> Result<Target> {
        let overrides: Params = self.params.iter().cloned().collect();
        Target::resolve(&self.target, &overrides)
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Values of `s`; defaults to ±0.1, ±0.25, ±0.5 within the family's interval.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    s_samples: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = registry::DEFAULT_SEED)]
    seed: u64,
    /// Check along this arc instead of at random points.
    #[arg(long)]
    arc: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// `C` in the `C·h²` allowance for checks along an arc.
    #[arg(long, default_value_t = 10.0)]
    grid_constant: f64,
}

#[derive(Debug, Args)]
struct ShootArgs {
    /// Initial costate guess at `t = a`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    psi_a: Option<Vec<f64>>,
    /// Number of grid steps.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Boundary mismatch tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 30)]
    halvings: usize,
    #[arg(long, default_value_t = 1e-6)]
    jacobian_step: f64,
    /// Inequality indices held active along the whole arc.
    #[arg(long, value_delimiter = ',')]
    active: Option<Vec<usize>>,
}

impl ShootArgs {
    fn config(&self, t: &Target) -> ShootConfig {
        let mut cfg = ShootConfig::new(&t.problem).with_steps(self.grid);
        cfg.seeds = t.seeds.clone();
        cfg.active = match &self.active {
            Some(idx) => ActiveSet::from_indices(idx.clone()),
            None => t.active.clone(),
        };
        cfg.boundary_tolerance = self.tol;
        cfg.max_iterations = self.max_iter;
        cfg.max_halvings = self.halvings;
        cfg.jacobian_step = self.jacobian_step;
        cfg
    }

    fn run(&self, t: &Target) -> Result<Extremal> {
        let guess = self.psi_a.as_ref().unwrap_or(&t.psi_a_guess);
        if guess.len() != t.problem.n {
            return Err(CliError::Usage(format!(
                "--psi-a has {} entries, the problem has {} states",
                guess.len(),
                t.problem.n
            )));
        }
        Ok(shoot(&t.problem, guess, &self.config(t))?)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    shoot: ShootArgs,
    /// Write the arc here and print only a summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChargeArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long)]
    arc: PathBuf,
    #[arg(long)]
    family: String,
    /// Relative drift tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write `t, charge, drift` here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    shoot: ShootArgs,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = registry::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    drift_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    invariance_tol: f64,
    #[arg(long, default_value_t = 10.0)]
    grid_constant: f64,
    #[arg(long, default_value_t = 1e-8)]
    dhdt_tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write `t, H, dhdt` and per-family charge and drift here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the computed arc.
    #[arg(long)]
    arc_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => print_json(value),
    }
}

/// `Ok(false)` when some check missed its tolerance.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::List => {
            for name in registry::list() {
                let e = registry::get(name)?;
                println!("{name}\t{}", e.summary);
            }
            Ok(true)
        }
        Command::Describe(a) => describe(&a.resolve()?),
        Command::Verify(a) => verify(&a),
        Command::Solve(a) => {
            let t = a.target.resolve()?;
            let arc = a.shoot.run(&t)?;
            match &a.out {
                Some(path) => {
                    write_json(path, &arc)?;
                    print_json(&ArcSummary::new(&arc, &Tolerances::default()))?;
                }
                None => print_json(&arc)?,
            }
            Ok(true)
        }
        Command::Charge(a) => charge(&a),
        Command::Report(a) => full_report(&a),
        Command::Export(a) => {
            let e = registry::get(&a.name)?;
            emit(&ProblemFile::from_entry(&e), a.out.as_deref())?;
            Ok(true)
        }
    }
}

#[derive(Serialize)]
struct FamilyDescription<'a> {
    name: &'a str,
    time: &'a str,
    state: Vec<&'a str>,
    control: Vec<&'a str>,
    epsilon: Option<f64>,
    generator: symmetry::GeneratorSource,
}

#[derive(Serialize)]
struct Description<'a> {
    name: &'a str,
    n: usize,
    r: usize,
    m: usize,
    m_ineq: usize,
    sense: noether_core::Sense,
    interval: [f64; 2],
    x_a: &'a [f64],
    x_b: &'a [f64],
    autonomous: bool,
    cost: &'a str,
    dynamics: Vec<&'a str>,
    constraints: Vec<&'a str>,
    families: Vec<FamilyDescription<'a>>,
    documented_laws: &'a [String],
}

fn describe(t: &Target) -> Result<bool> {
    let p = &t.problem;
    let src = |f: &'_ noether_core::ScalarField| f.source().to_string();
    let dynamics: Vec<String> = p.dynamics.iter().map(src).collect();
    let constraints: Vec<String> = p.constraints.iter().map(src).collect();
    let family_src: Vec<(String, Vec<String>, Vec<String>)> = t
        .families
        .iter()
        .map(|f| {
            (
                src(&f.time),
                f.state.iter().map(src).collect(),
                f.control.iter().map(src).collect(),
            )
        })
        .collect();
    let cost = src(&p.cost);
    let d = Description {
        name: &t.name,
        n: p.n,
        r: p.r,
        m: p.m,
        m_ineq: p.m_ineq,
        sense: p.sense,
        interval: [p.a, p.b],
        x_a: &p.x_a,
        x_b: &p.x_b,
        autonomous: p.is_autonomous(),
        cost: &cost,
        dynamics: dynamics.iter().map(String::as_str).collect(),
        constraints: constraints.iter().map(String::as_str).collect(),
        families: t
            .families
            .iter()
            .zip(&family_src)
            .map(|(f, (time, state, control))| FamilyDescription {
                name: &f.name,
                time,
                state: state.iter().map(String::as_str).collect(),
                control: control.iter().map(String::as_str).collect(),
                epsilon: f.epsilon.is_finite().then_some(f.epsilon),
                generator: f.generator().source(),
            })
            .collect(),
        documented_laws: &t.laws,
    };
    print_json(&d)?;
    Ok(true)
}

fn s_samples(f: &SymmetryFamily, requested: &Option<Vec<f64>>) -> Vec<f64> {
    requested.clone().unwrap_or_else(|| f.default_samples())
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let t = a.target.resolve()?;
    let families = t.families_named(a.family.as_deref())?;
    let tol = Tolerances {
        invariance: a.tol,
        grid_constant: a.grid_constant,
        ..Tolerances::default()
    };
    let mut out = Vec::new();
    match &a.arc {
        Some(path) => {
            let arc = t.read_arc(path)?;
            let bound = tol.on_grid(tol.invariance, report::max_step(&arc.trajectory.grid));
            for f in families {
                let r = symmetry::invariance_residuals(&t.problem, f, &arc.trajectory, &s_samples(f, &a.s_samples))?;
                out.push(InvarianceSummary::new(&r, bound));
            }
        }
        None => {
            let points = t.sample_points(a.points, a.seed)?;
            for f in families {
                let r = pointwise_invariance(&t.problem, f, &points, &s_samples(f, &a.s_samples))?;
                out.push(InvarianceSummary::new(&r, tol.invariance));
            }
        }
    }
    print_json(&out)?;
    Ok(out.iter().all(|s| s.pass))
}

fn charge(a: &ChargeArgs) -> Result<bool> {
    let t = a.target.resolve()?;
    let f = t.family(&a.family)?;
    let arc = t.read_arc(&a.arc)?;
    let r = conservation_report(&t.problem, &f.generator(), &arc);
    if let Some(path) = &a.csv {
        report::write_series(path, &r.grid, &report::charge_columns("", &r))?;
    }
    let s = ChargeSummary::new(&f.name, &r, a.tol);
    print_json(&s)?;
    Ok(s.pass)
}

#[derive(Serialize)]
struct Skipped {
    family: String,
    reason: String,
}

#[derive(Serialize)]
struct FullReport {
    target: String,
    seed: u64,
    points: usize,
    arc: ArcSummary,
    hamiltonian: HamiltonianSummary,
    pointwise: Vec<InvarianceSummary>,
    pointwise_skipped: Vec<Skipped>,
    along_arc: Vec<InvarianceSummary>,
    linearized: Vec<LinearizedSummary>,
    conservation: Vec<ChargeSummary>,
    pass: bool,
}

fn full_report(a: &ReportArgs) -> Result<bool> {
    let t = a.target.resolve()?;
    let tol = Tolerances {
        invariance: a.invariance_tol,
        grid_constant: a.grid_constant,
        drift: a.drift_tol,
        dhdt: a.dhdt_tol,
        boundary: a.shoot.tol,
        ..Tolerances::default()
    };
    let arc = a.shoot.run(&t)?;
    if let Some(path) = &a.arc_out {
        write_json(path, &arc)?;
    }
    let p = &t.problem;
    let h = report::max_step(&arc.trajectory.grid);
    let on_grid = tol.on_grid(tol.invariance, h);
    let points = t.sample_points(a.points, a.seed)?;

    let mut pointwise = Vec::new();
    let mut pointwise_skipped = Vec::new();
    let mut along_arc = Vec::new();
    let mut linearized = Vec::new();
    let mut conservation = Vec::new();
    let mut columns = Vec::new();
    for f in &t.families {
        let samples = f.default_samples();
        match pointwise_invariance(p, f, &points, &samples) {
            Ok(r) => pointwise.push(InvarianceSummary::new(&r, tol.invariance)),
            Err(e @ Error::ControlDependentMap(_)) => pointwise_skipped.push(Skipped {
                family: f.name.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
        let r = symmetry::invariance_residuals(p, f, &arc.trajectory, &samples)?;
        along_arc.push(InvarianceSummary::new(&r, on_grid));
        let gen = f.generator();
        let lin = linearized_residuals(p, &gen, &arc)?;
        linearized.push(LinearizedSummary::new(&f.name, &lin, on_grid));
        let c = conservation_report(p, &gen, &arc);
        columns.extend(report::charge_columns(&f.name, &c));
        conservation.push(ChargeSummary::new(&f.name, &c, tol.drift));
    }

    let hamiltonian = HamiltonianSummary::new(p, &arc, &tol);
    if let Some(path) = &a.csv {
        let ham: Vec<Option<f64>> = (0..arc.len())
            .map(|k| pmp::hamiltonian(p, &arc.point(k), &arc.multipliers(k)).ok())
            .collect();
        let res = pmp::dhdt_residual(p, &arc);
        let mut dhdt = vec![None; arc.len()];
        for (k, v) in res.into_iter().enumerate() {
            dhdt[k + 1] = Some(v).filter(|v| !v.is_nan());
        }
        let mut all = vec![("H".to_string(), ham), ("dhdt".to_string(), dhdt)];
        all.extend(columns);
        report::write_series(path, &arc.trajectory.grid, &all)?;
    }

    let arc_summary = ArcSummary::new(&arc, &tol);
    let pass = arc_summary.pass
        && hamiltonian.pass
        && pointwise.iter().all(|s| s.pass)
        && along_arc.iter().all(|s| s.pass)
        && linearized.iter().all(|s| s.pass)
        && conservation.iter().all(|s| s.pass);
    let doc = FullReport {
        target: t.name.clone(),
        seed: a.seed,
        points: a.points,
        arc: arc_summary,
        hamiltonian,
        pointwise,
        pointwise_skipped,
        along_arc,
        linearized,
        conservation,
        pass,
    };
    emit(&doc, a.json.as_deref())?;
    Ok(pass)
}
