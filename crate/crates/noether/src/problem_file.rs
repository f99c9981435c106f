//! JSON problem format.
//!
//! ```json
//! {
//!   "n": 1, "r": 1, "m": 0, "m_ineq": 0, "sense": "minimize",
//!   "interval": {"a": 0, "b": 1},
//!   "boundary": {"x_a": [0], "x_b": [1]},
//!   "params": {},
//!   "cost": "u1^2",
//!   "dynamics": ["u1"],
//!   "constraints": [],
//!   "families": [{"name": "translation", "T": "t", "X": ["x1 + s"], "U": ["u1"]}],
//!   "documented_laws": ["translation: psi = constant"]
//! }
//! ```

use std::collections::BTreeMap;

use noether_core::pmp::ActiveSet;
use noether_core::registry::{ExampleEntry, DEFAULT_SEED};
use noether_core::sampling::{self, SampleBox};
use noether_core::solver::Seeds;
use noether_core::{Params, Problem, ScalarField, Sense, SymmetryFamily};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    #[serde(default)]
    pub m_ineq: usize,
    pub sense: Sense,
    pub interval: Interval,
    pub boundary: Boundary,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub cost: String,
    pub dynamics: Vec<String>,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub families: Vec<FamilySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documented_laws: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverHints>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(rename = "T")]
    pub time: String,
    #[serde(rename = "X")]
    pub state: Vec<String>,
    #[serde(rename = "U")]
    pub control: Vec<String>,
    /// Half-width of the parameter interval; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub tau: String,
    pub xi: Vec<String>,
    pub upsilon: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverHints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<usize>>,
    /// `[lo, hi]` box for random points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<[f64; 2]>,
}

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct Built {
    pub problem: Problem,
    pub families: Vec<SymmetryFamily>,
    pub laws: Vec<String>,
    pub psi_a_guess: Vec<f64>,
    pub seeds: Seeds,
    pub active: ActiveSet,
    pub sample_box: SampleBox,
}

/// Points used for the identity check at load.
const IDENTITY_POINTS: usize = 20;

impl ProblemFile {
    pub fn from_entry(e: &ExampleEntry) -> Self {
        let p = &e.problem;
        let src = |f: &ScalarField| f.source().to_string();
        let families = e
            .families
            .iter()
            .map(|f| FamilySpec {
                name: f.name.clone(),
                time: src(&f.time),
                state: f.state.iter().map(src).collect(),
                control: f.control.iter().map(src).collect(),
                epsilon: f.epsilon.is_finite().then_some(f.epsilon),
                generator: f.generator.as_ref().map(|g| GeneratorSpec {
                    tau: src(&g.tau),
                    xi: g.xi.iter().map(src).collect(),
                    upsilon: g.upsilon.iter().map(src).collect(),
                }),
            })
            .collect();
        ProblemFile {
            n: p.n,
            r: p.r,
            m: p.m,
            m_ineq: p.m_ineq,
            sense: p.sense,
            interval: Interval { a: p.a, b: p.b },
            boundary: Boundary {
                x_a: p.x_a.clone(),
                x_b: p.x_b.clone(),
            },
            params: e.params.clone(),
            cost: src(&p.cost),
            dynamics: p.dynamics.iter().map(src).collect(),
            constraints: p.constraints.iter().map(src).collect(),
            families,
            documented_laws: e.laws.iter().map(|l| format!("{}: {}", l.family, l.display)).collect(),
            solver: Some(SolverHints {
                psi_a: Some(e.psi_a_guess.clone()),
                seed_u: Some(e.seeds.u.clone()),
                seed_lambda: Some(e.seeds.lambda.clone()),
                active: None,
                sample_box: None,
            }),
        }
    }

    /// Builds the problem and families, collecting every failure.
    pub fn build(&self, overrides: &Params) -> Result<Built, Vec<String>> {
        let mut errors = Vec::new();
        let mut params: Params = self.params.clone();
        for (k, v) in overrides {
            if params.insert(k.clone(), *v).is_none() {
                errors.push(format!("params: no parameter `{k}` to override"));
            }
        }
        let (n, r) = (self.n, self.r);
        let mut field = |what: String, src: &str| match ScalarField::parse(src, n, r, &params) {
            Ok(f) => Some(f),
            Err(e) => {
                errors.push(format!("{what}: {e}"));
                None
            }
        };
        let cost = field("cost".into(), &self.cost);
        let dynamics: Vec<_> = self
            .dynamics
            .iter()
            .enumerate()
            .map(|(i, s)| field(format!("dynamics[{i}]"), s))
            .collect();
        let constraints: Vec<_> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, s)| field(format!("constraints[{i}]"), s))
            .collect();

        let mut problem = None;
        if let (Some(cost), Some(dynamics), Some(constraints)) = (
            cost,
            dynamics.into_iter().collect::<Option<Vec<_>>>(),
            constraints.into_iter().collect::<Option<Vec<_>>>(),
        ) {
            let p = Problem {
                n,
                r,
                m: self.m,
                m_ineq: self.m_ineq,
                cost,
                dynamics,
                constraints,
                a: self.interval.a,
                b: self.interval.b,
                x_a: self.boundary.x_a.clone(),
                x_b: self.boundary.x_b.clone(),
                sense: self.sense,
            };
            let diagnostics = p.validate();
            errors.extend(diagnostics.iter().map(|d| format!("problem: {d}")));
            if diagnostics.is_empty() {
                problem = Some(p);
            }
        } else {
            if self.dynamics.len() != n {
                errors.push(format!("dynamics: expected {n} entries, found {}", self.dynamics.len()));
            }
            if self.constraints.len() != self.m {
                errors.push(format!(
                    "constraints: expected m = {} entries, found {}",
                    self.m,
                    self.constraints.len()
                ));
            }
        }

        let mut families = Vec::new();
        for (i, spec) in self.families.iter().enumerate() {
            let what = format!("families[{i}] `{}`", spec.name);
            if self.families[..i].iter().any(|f| f.name == spec.name) {
                errors.push(format!("{what}: duplicate name"));
            }
            let epsilon = spec.epsilon.unwrap_or(f64::INFINITY);
            if !(epsilon > 0.0) {
                errors.push(format!("{what}: epsilon must be positive"));
                continue;
            }
            let state: Vec<&str> = spec.state.iter().map(String::as_str).collect();
            let control: Vec<&str> = spec.control.iter().map(String::as_str).collect();
            let mut family =
                match SymmetryFamily::parse(&spec.name, &spec.time, &state, &control, n, r, &params, epsilon) {
                    Ok(f) => f,
                    Err(e) => {
                        errors.push(format!("{what}: {e}"));
                        continue;
                    }
                };
            if let Some(g) = &spec.generator {
                let xi: Vec<&str> = g.xi.iter().map(String::as_str).collect();
                let upsilon: Vec<&str> = g.upsilon.iter().map(String::as_str).collect();
                match family.with_generator(&g.tau, &xi, &upsilon, &params) {
                    Ok(f) => family = f,
                    Err(e) => {
                        errors.push(format!("{what} generator: {e}"));
                        continue;
                    }
                }
            }
            families.push(family);
        }

        let hints = self.solver.clone().unwrap_or_default();
        let sample_box = match hints.sample_box {
            Some([lo, hi]) => SampleBox { lo, hi },
            None => SampleBox::default(),
        };
        let psi_a_guess = hints.psi_a.unwrap_or_else(|| vec![0.0; n]);
        if psi_a_guess.len() != n {
            errors.push(format!(
                "solver.psi_a: expected {n} values, found {}",
                psi_a_guess.len()
            ));
        }
        let seeds = Seeds {
            u: hints.seed_u.unwrap_or_else(|| vec![1.0; r]),
            lambda: hints.seed_lambda.unwrap_or_else(|| vec![0.0; self.constraints.len()]),
        };
        if seeds.u.len() != r {
            errors.push(format!("solver.seed_u: expected {r} values, found {}", seeds.u.len()));
        }
        if seeds.lambda.len() != self.constraints.len() {
            errors.push(format!(
                "solver.seed_lambda: expected {} values, found {}",
                self.constraints.len(),
                seeds.lambda.len()
            ));
        }
        let active = ActiveSet::from_indices(hints.active.unwrap_or_default());
        if let Some(p) = &problem {
            if let Some(j) = active.indices().iter().find(|j| !p.is_inequality(**j) || **j >= p.m) {
                errors.push(format!("solver.active: {j} is not an inequality index"));
            }
            match sampling::feasible_points(p, IDENTITY_POINTS, DEFAULT_SEED, sample_box) {
                Ok(points) => {
                    for f in &families {
                        match f.identity_defect(&points) {
                            Ok(d) if d <= 1e-12 => {}
                            Ok(d) => errors.push(format!(
                                "family `{}`: h at s = 0 is not the identity (defect {d:e})",
                                f.name
                            )),
                            Err(e) => errors.push(format!("family `{}`: {e}", f.name)),
                        }
                    }
                }
                Err(e) => errors.push(format!("sampling: {e}")),
            }
        }

        match problem {
            Some(problem) if errors.is_empty() => Ok(Built {
                problem,
                families,
                laws: self.documented_laws.clone(),
                psi_a_guess,
                seeds,
                active,
                sample_box,
            }),
            _ => Err(errors),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use noether_core::registry;

    #[test]
    fn exported_entries_rebuild() {
        for name in registry::NAMES {
            let e = registry::get(name).unwrap();
            let file = ProblemFile::from_entry(&e);
            let text = serde_json::to_string_pretty(&file).unwrap();
            let back: ProblemFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back, file);
            let built = back.build(&Params::new()).unwrap();
            assert_eq!(built.problem, e.problem);
            assert_eq!(built.families, e.families);
        }
    }

    #[test]
    fn every_failure_is_listed() {
        let e = registry::get("exhaustible-resource").unwrap();
        let mut file = ProblemFile::from_entry(&e);
        file.cost = "u1^".into();
        file.dynamics.push("u3".into());
        file.families[0].time = "t + 1".into();
        file.families[1].state.clear();
        let errors = file.build(&Params::new()).unwrap_err();
        assert!(errors.iter().any(|e| e.starts_with("cost:")), "{errors:?}");
        assert!(errors.iter().any(|e| e.starts_with("dynamics[1]:")), "{errors:?}");
        assert!(errors.iter().any(|e| e.contains("families[1]")), "{errors:?}");
    }

    #[test]
    fn non_identity_family_is_rejected() {
        let e = registry::get("quadratic-translation").unwrap();
        let mut file = ProblemFile::from_entry(&e);
        file.families[0].state = vec!["x1 + s + 1".into()];
        let errors = file.build(&Params::new()).unwrap_err();
        assert!(errors.iter().any(|e| e.contains("not the identity")), "{errors:?}");
    }

    #[test]
    fn structural_errors_are_reported() {
        let e = registry::get("quadratic-translation").unwrap();
        let mut file = ProblemFile::from_entry(&e);
        file.interval = Interval { a: 1.0, b: 0.0 };
        file.boundary.x_b = vec![1.0, 2.0];
        let errors = file.build(&Params::new()).unwrap_err();
        assert_eq!(errors.len(), 2, "{errors:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"n": 1, "r": 1, "m": 0, "sense": "minimize", "interval": {"a": 0, "b": 1},
            "boundary": {"x_a": [0], "x_b": [1]}, "cost": "u1^2", "dynamics": ["u1"], "extra": 1}"#;
        assert!(serde_json::from_str::<ProblemFile>(text).is_err());
    }
}
