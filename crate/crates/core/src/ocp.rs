//! The constrained optimal control problem and its structural checks.
//!
//! Minimize or maximize `∫ L(t, x, u) dt` over `[a, b]` subject to
//! `ẋ = φ(t, x, u)`, mixed constraints `c_i(t, x, u) = 0` for the first
//! `m - m_ineq` indices and `c_j(t, x, u) ≥ 0` for the rest, and fixed
//! endpoints `x(a) = x_a`, `x(b) = x_b`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::expr::{control_vars, Point, ScalarField, Var};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub n: usize,
    pub r: usize,
    /// Declared constraint count; must equal `constraints.len()`.
    pub m: usize,
    pub m_ineq: usize,
    pub cost: ScalarField,
    pub dynamics: Vec<ScalarField>,
    /// Equalities first, then the `m_ineq` inequalities.
    pub constraints: Vec<ScalarField>,
    pub a: f64,
    pub b: f64,
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub sense: Sense,
}

/// A structural problem defect found by [`Problem::validate`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Diagnostic {
    IntervalReversed {
        a: f64,
        b: f64,
    },
    NonFiniteData(String),
    TooManyConstraints {
        m: usize,
        r: usize,
    },
    TooManyInequalities {
        m_ineq: usize,
        m: usize,
    },
    ConstraintCount {
        declared: usize,
        found: usize,
    },
    DynamicsCount {
        n: usize,
        found: usize,
    },
    BoundaryDimension {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    FieldArity {
        field: String,
        n: usize,
        r: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::IntervalReversed { a, b } => write!(f, "interval [{a}, {b}] is empty or reversed"),
            Diagnostic::NonFiniteData(what) => write!(f, "{what} is not finite"),
            Diagnostic::TooManyConstraints { m, r } => {
                write!(f, "{m} constraints cannot have full rank in {r} controls")
            }
            Diagnostic::TooManyInequalities { m_ineq, m } => {
                write!(f, "{m_ineq} inequalities exceed the {m} constraints")
            }
            Diagnostic::ConstraintCount { declared, found } => {
                write!(f, "declared {declared} constraints, found {found}")
            }
            Diagnostic::DynamicsCount { n, found } => {
                write!(f, "state dimension {n} but {found} dynamics components")
            }
            Diagnostic::BoundaryDimension { which, expected, found } => {
                write!(f, "{which} has {found} components, expected {expected}")
            }
            Diagnostic::FieldArity { field, n, r } => {
                write!(f, "{field} declared over (n={n}, r={r}), problem has different arity")
            }
        }
    }
}

/// An owned sample `(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl Sample {
    pub fn new(t: f64, x: Vec<f64>, u: Vec<f64>) -> Self {
        Sample { t, x, u }
    }

    pub fn point(&self) -> Point<'_> {
        Point::new(self.t, &self.x, &self.u)
    }
}

/// A sampled `(t, x(t), u(t))` on a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn point(&self, k: usize) -> Point<'_> {
        Point::new(self.grid[k], &self.x[k], &self.u[k])
    }
}

impl Problem {
    pub fn equality_count(&self) -> usize {
        self.m.saturating_sub(self.m_ineq)
    }

    pub fn is_inequality(&self, j: usize) -> bool {
        j >= self.equality_count()
    }

    pub fn inequality_indices(&self) -> core::ops::Range<usize> {
        self.equality_count()..self.constraints.len()
    }

    /// No field references `t` explicitly.
    pub fn is_autonomous(&self) -> bool {
        self.fields().all(|f| !f.depends_on(Var::T))
    }

    /// Cost, dynamics, then constraints.
    pub fn fields(&self) -> impl Iterator<Item = &ScalarField> {
        core::iter::once(&self.cost)
            .chain(&self.dynamics)
            .chain(&self.constraints)
    }

    /// One diagnostic per violated structural invariant; empty when valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if !(self.a.is_finite() && self.b.is_finite()) {
            out.push(Diagnostic::NonFiniteData("interval".into()));
        } else if self.a >= self.b {
            out.push(Diagnostic::IntervalReversed { a: self.a, b: self.b });
        }
        if self.m_ineq > self.m {
            out.push(Diagnostic::TooManyInequalities {
                m_ineq: self.m_ineq,
                m: self.m,
            });
        }
        if self.m > self.r {
            out.push(Diagnostic::TooManyConstraints { m: self.m, r: self.r });
        }
        if self.constraints.len() != self.m {
            out.push(Diagnostic::ConstraintCount {
                declared: self.m,
                found: self.constraints.len(),
            });
        }
        if self.dynamics.len() != self.n {
            out.push(Diagnostic::DynamicsCount {
                n: self.n,
                found: self.dynamics.len(),
            });
        }
        for (which, v) in [("x_a", &self.x_a), ("x_b", &self.x_b)] {
            if v.len() != self.n {
                out.push(Diagnostic::BoundaryDimension {
                    which,
                    expected: self.n,
                    found: v.len(),
                });
            } else if v.iter().any(|c| !c.is_finite()) {
                out.push(Diagnostic::NonFiniteData(which.into()));
            }
        }
        let named = core::iter::once((String::from("cost"), &self.cost))
            .chain(
                self.dynamics
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (alloc::format!("dynamics[{i}]"), f)),
            )
            .chain(
                self.constraints
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (alloc::format!("constraints[{i}]"), f)),
            );
        for (name, f) in named {
            let ar = f.arity();
            if ar.n != self.n || ar.r != self.r || ar.with_s {
                out.push(Diagnostic::FieldArity {
                    field: name,
                    n: ar.n,
                    r: ar.r,
                });
            }
        }
        out
    }

    /// `validate` as a `Result`.
    pub fn check(&self) -> Result<()> {
        let d = self.validate();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(d))
        }
    }

    /// The `m × r` constraint Jacobian `∂c/∂u`, row-major.
    pub fn constraint_jacobian(&self, pt: &Point<'_>) -> Result<Vec<f64>> {
        let wrt = control_vars(self.r);
        let mut jac = Vec::with_capacity(self.constraints.len() * self.r);
        for c in &self.constraints {
            jac.extend(c.grad(pt, &wrt)?);
        }
        Ok(jac)
    }

    /// Numerical rank of `∂c/∂u` at each sample.
    pub fn rank_check(&self, points: &[Sample]) -> Result<RankReport> {
        let m = self.constraints.len();
        let mut entries = Vec::new();
        if m == 0 {
            return Ok(RankReport { required: 0, entries });
        }
        for (k, s) in points.iter().enumerate() {
            let jac = self.constraint_jacobian(&s.point()).map_err(|e| e.at(k, None))?;
            let singular = linalg::singular_values(&jac, m, self.r);
            let rank = linalg::numerical_rank(&singular, RANK_TOLERANCE);
            entries.push(RankEntry {
                index: k,
                rank,
                singular_values: singular,
            });
        }
        Ok(RankReport { required: m, entries })
    }
}

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankEntry {
    pub index: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RankReport {
    pub required: usize,
    pub entries: Vec<RankEntry>,
}

impl RankReport {
    /// Sample indices where the rank falls short of the constraint count.
    pub fn deficient(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.rank < self.required)
            .map(|e| e.index)
            .collect()
    }

    pub fn is_full_rank(&self) -> bool {
        self.entries.iter().all(|e| e.rank >= self.required)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use alloc::vec;

    fn field(src: &str, n: usize, r: usize) -> ScalarField {
        let p: Params = [("alpha", 0.25), ("beta", 0.25), ("gamma", 0.5)]
            .iter()
            .map(|(k, v)| (String::from(*k), *v))
            .collect();
        ScalarField::parse(src, n, r, &p).unwrap()
    }

    fn resource() -> Problem {
        Problem {
            n: 1,
            r: 2,
            m: 1,
            m_ineq: 0,
            cost: field("u1^gamma", 1, 2),
            dynamics: vec![field("-u2", 1, 2)],
            constraints: vec![field("x1^(alpha*gamma) * u2^(beta*gamma) - u1^gamma", 1, 2)],
            a: 0.0,
            b: 1.0,
            x_a: vec![1.0],
            x_b: vec![0.5],
            sense: Sense::Maximize,
        }
    }

    #[test]
    fn resource_problem_is_valid() {
        let p = resource();
        assert!(p.validate().is_empty());
        assert!(p.is_autonomous());
        assert!(p.check().is_ok());
        // idempotent
        assert_eq!(p.validate(), p.validate());
    }

    #[test]
    fn reversed_interval() {
        let mut p = resource();
        p.a = 1.0;
        p.b = 0.0;
        assert_eq!(p.validate(), vec![Diagnostic::IntervalReversed { a: 1.0, b: 0.0 }]);
    }

    #[test]
    fn too_many_constraints() {
        let mut p = resource();
        p.m = 3;
        let c = p.constraints[0].clone();
        p.constraints = vec![c.clone(), c.clone(), c];
        assert_eq!(p.validate(), vec![Diagnostic::TooManyConstraints { m: 3, r: 2 }]);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut p = resource();
        p.m_ineq = 2;
        p.x_b = vec![];
        p.dynamics.push(field("u1", 2, 2));
        let d = p.validate();
        assert_eq!(d.len(), 4, "{d:?}");
        assert!(matches!(p.check(), Err(Error::InvalidProblem(ref v)) if v.len() == 4));
    }

    #[test]
    fn rank_of_resource_constraint() {
        let p = resource();
        let pt = Sample::new(0.0, vec![1.0], vec![1.0, 1.0]);
        let jac = p.constraint_jacobian(&pt.point()).unwrap();
        assert!((jac[0] + 0.5).abs() < 1e-15 && (jac[1] - 0.125).abs() < 1e-15);
        let report = p.rank_check(&[pt]).unwrap();
        assert_eq!(report.entries[0].rank, 1);
        assert!(report.is_full_rank());
    }

    #[test]
    fn vanishing_constraint_is_rank_deficient() {
        let mut p = resource();
        p.constraints = vec![field("u1 - u1", 1, 2)];
        let pts = vec![
            Sample::new(0.0, vec![1.0], vec![1.0, 1.0]),
            Sample::new(0.5, vec![2.0], vec![3.0, 0.5]),
        ];
        let report = p.rank_check(&pts).unwrap();
        assert_eq!(report.deficient(), vec![0, 1]);
    }

    #[test]
    fn unconstrained_problem_is_vacuously_full_rank() {
        let mut p = resource();
        p.m = 0;
        p.constraints.clear();
        let report = p.rank_check(&[Sample::new(0.0, vec![1.0], vec![1.0, 1.0])]).unwrap();
        assert!(report.entries.is_empty() && report.is_full_rank());
    }

    #[test]
    fn rank_check_propagates_domain_errors_with_location() {
        let p = resource();
        let pts = vec![
            Sample::new(0.0, vec![1.0], vec![1.0, 1.0]),
            Sample::new(0.0, vec![-1.0], vec![1.0, 1.0]),
        ];
        let e = p.rank_check(&pts).unwrap_err();
        assert!(matches!(e, Error::AtNode { node: 1, .. }));
        assert!(matches!(e.root(), Error::Domain { .. }));
    }
}
