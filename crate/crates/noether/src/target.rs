//! Resolving a command-line target (registry name or problem file) and
//! reading and writing arcs.

use std::fs;
use std::path::Path;

use noether_core::pmp::ActiveSet;
use noether_core::registry::{self, ExampleEntry};
use noether_core::sampling::{self, SampleBox};
use noether_core::solver::Seeds;
use noether_core::{Extremal, Params, Problem, Sample, SymmetryFamily};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::problem_file::ProblemFile;

#[derive(Debug, Clone)]
enum Sampler {
    Registry(Box<ExampleEntry>),
    Box(SampleBox),
}

#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub problem: Problem,
    pub families: Vec<SymmetryFamily>,
    pub laws: Vec<String>,
    pub psi_a_guess: Vec<f64>,
    pub seeds: Seeds,
    pub active: ActiveSet,
    sampler: Sampler,
}

impl Target {
    /// A registry name, otherwise a path to a problem file.
    pub fn resolve(target: &str, overrides: &Params) -> Result<Self> {
        if registry::NAMES.contains(&target) {
            let e = registry::get_with(target, overrides)?;
            e.self_test(registry::DEFAULT_SEED)?;
            return Ok(Target {
                name: e.name.to_string(),
                problem: e.problem.clone(),
                families: e.families.clone(),
                laws: e.laws.iter().map(|l| format!("{}: {}", l.family, l.display)).collect(),
                psi_a_guess: e.psi_a_guess.clone(),
                seeds: e.seeds.clone(),
                active: ActiveSet::none(),
                sampler: Sampler::Registry(Box::new(e)),
            });
        }
        let path = Path::new(target);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "`{target}` is neither a built-in problem ({}) nor an existing file",
                registry::NAMES.join(", ")
            )));
        }
        let file: ProblemFile = read_json(path)?;
        let built = file.build(overrides).map_err(|failures| CliError::InvalidFile {
            path: path.display().to_string(),
            failures,
        })?;
        Ok(Target {
            name: target.to_string(),
            problem: built.problem,
            families: built.families,
            laws: built.laws,
            psi_a_guess: built.psi_a_guess,
            seeds: built.seeds,
            active: built.active,
            sampler: Sampler::Box(built.sample_box),
        })
    }

    pub fn family(&self, name: &str) -> Result<&SymmetryFamily> {
        self.families.iter().find(|f| f.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.families.iter().map(|f| f.name.as_str()).collect();
            CliError::Usage(format!("no family `{name}`; known: {}", known.join(", ")))
        })
    }

    /// Selected families, or all of them.
    pub fn families_named(&self, name: Option<&str>) -> Result<Vec<&SymmetryFamily>> {
        match name {
            Some(n) => Ok(vec![self.family(n)?]),
            None => Ok(self.families.iter().collect()),
        }
    }

    /// Random feasible points, reproducible from `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<Sample>> {
        match &self.sampler {
            Sampler::Registry(e) => Ok(e.sample_points(count, seed)),
            Sampler::Box(b) => Ok(sampling::feasible_points(&self.problem, count, seed, *b)?),
        }
    }

    /// Shape checks so that arc data can be indexed safely.
    pub fn check_arc(&self, arc: &Extremal, path: &str) -> Result<()> {
        let p = &self.problem;
        let len = arc.trajectory.grid.len();
        let mut failures = Vec::new();
        if len < 3 {
            failures.push(format!("grid has {len} nodes, at least 3 are needed"));
        }
        if arc.trajectory.grid.windows(2).any(|w| !(w[1] > w[0])) {
            failures.push("grid is not strictly increasing".into());
        }
        let mut rows = |what: &str, v: &[Vec<f64>], width: usize| {
            if v.len() != len {
                failures.push(format!("{what} has {} rows for {len} grid nodes", v.len()));
            } else if let Some(k) = v.iter().position(|row| row.len() != width) {
                failures.push(format!("{what}[{k}] has {} entries, expected {width}", v[k].len()));
            }
        };
        rows("x", &arc.trajectory.x, p.n);
        rows("u", &arc.trajectory.u, p.r);
        rows("psi", &arc.psi, p.n);
        rows("lambda", &arc.lambda, p.constraints.len());
        if failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::InvalidFile {
                path: path.to_string(),
                failures,
            })
        }
    }

    pub fn read_arc(&self, path: &Path) -> Result<Extremal> {
        let arc: Extremal = read_json(path)?;
        self.check_arc(&arc, &path.display().to_string())?;
        Ok(arc)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
