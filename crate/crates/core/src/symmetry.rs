//! One-parameter families `h^s = (T, X, U)` and the invariance conditions
//!
//! ```text
//! L(t, x, u)        = L(h^s) · dT/dt
//! dX/dt             = φ(h^s) · dT/dt
//! c(t, x, u)        = c(h^s) · dT/dt
//! ```
//!
//! checked per `s` (exact form) and at first order in `s` (linearized form).
//! Total time derivatives along an arc are differences of the composed
//! signals `T(t_k, x_k, u_k, s)`, never chain rules through `u̇`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{Dual, Params, Point, ScalarField};
use crate::grid;
use crate::ocp::{Problem, Sample, Trajectory};
use crate::pmp::{self, ACTIVE_THRESHOLD};
use crate::solver::Extremal;

pub const DEFAULT_S_SAMPLES: [f64; 6] = [-0.5, -0.25, -0.1, 0.1, 0.25, 0.5];

/// Step in `s` for finite-difference generators.
pub const GENERATOR_FD_STEP: f64 = 1e-5;

/// Closed-form generator `(τ, ξ, υ)` as expressions over `(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorFields {
    pub tau: ScalarField,
    pub xi: Vec<ScalarField>,
    pub upsilon: Vec<ScalarField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryFamily {
    pub name: String,
    pub time: ScalarField,
    pub state: Vec<ScalarField>,
    pub control: Vec<ScalarField>,
    /// Declared half-width of the parameter interval `(-ε, ε)`.
    pub epsilon: f64,
    pub generator: Option<GeneratorFields>,
}

impl SymmetryFamily {
    #[allow(clippy::too_many_arguments)]
    pub fn parse(
        name: &str,
        time: &str,
        state: &[&str],
        control: &[&str],
        n: usize,
        r: usize,
        params: &Params,
        epsilon: f64,
    ) -> Result<Self> {
        if state.len() != n {
            return Err(Error::ArityMismatch {
                what: alloc::format!("family `{name}` state maps"),
                expected: n,
                found: state.len(),
            });
        }
        if control.len() != r {
            return Err(Error::ArityMismatch {
                what: alloc::format!("family `{name}` control maps"),
                expected: r,
                found: control.len(),
            });
        }
        let map = |src: &str| ScalarField::parse_family_map(src, n, r, params);
        Ok(SymmetryFamily {
            name: name.into(),
            time: map(time)?,
            state: state.iter().map(|s| map(s)).collect::<Result<_>>()?,
            control: control.iter().map(|s| map(s)).collect::<Result<_>>()?,
            epsilon,
            generator: None,
        })
    }

    /// Attaches a closed-form generator.
    pub fn with_generator(mut self, tau: &str, xi: &[&str], upsilon: &[&str], params: &Params) -> Result<Self> {
        let (n, r) = (self.state.len(), self.control.len());
        if xi.len() != n || upsilon.len() != r {
            return Err(Error::ArityMismatch {
                what: alloc::format!("generator of `{}`", self.name),
                expected: n + r,
                found: xi.len() + upsilon.len(),
            });
        }
        let f = |src: &str| ScalarField::parse(src, n, r, params);
        self.generator = Some(GeneratorFields {
            tau: f(tau)?,
            xi: xi.iter().map(|s| f(s)).collect::<Result<_>>()?,
            upsilon: upsilon.iter().map(|s| f(s)).collect::<Result<_>>()?,
        });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.state.len()
    }

    pub fn r(&self) -> usize {
        self.control.len()
    }

    /// `h^s(t, x, u)`.
    pub fn apply(&self, pt: &Point<'_>, s: f64) -> Result<Sample> {
        let q = pt.with_s(s);
        Ok(Sample {
            t: self.time.eval(&q)?,
            x: self.state.iter().map(|f| f.eval(&q)).collect::<Result<_>>()?,
            u: self.control.iter().map(|f| f.eval(&q)).collect::<Result<_>>()?,
        })
    }

    /// `max |h⁰(p) - p|` over the samples.
    pub fn identity_defect(&self, points: &[Sample]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, s) in points.iter().enumerate() {
            let img = self.apply(&s.point(), 0.0).map_err(|e| e.at(k, Some(0.0)))?;
            worst = worst.max((img.t - s.t).abs());
            for (a, b) in img.x.iter().zip(&s.x).chain(img.u.iter().zip(&s.u)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// True when `T` or some `X_i` reads the control, which makes their total
    /// time derivative depend on `u̇`.
    pub fn time_or_state_map_reads_control(&self) -> Option<&ScalarField> {
        core::iter::once(&self.time)
            .chain(&self.state)
            .find(|f| f.depends_on_control())
    }

    /// The exact generator: closed form when attached, otherwise dual-number
    /// differentiation of the maps in `s`.
    pub fn generator(&self) -> Generator {
        match &self.generator {
            Some(g) => Generator::Closed(g.clone()),
            None => Generator::Automatic(self.clone()),
        }
    }

    /// Whether `s` lies in the declared interval.
    pub fn admits(&self, s: f64) -> bool {
        s.abs() < self.epsilon
    }

    /// `DEFAULT_S_SAMPLES` restricted to the declared interval.
    pub fn default_samples(&self) -> Vec<f64> {
        DEFAULT_S_SAMPLES.iter().copied().filter(|s| self.admits(*s)).collect()
    }
}

/// Central difference in `s` (step `1e-5`) of each map at `s = 0`.
pub fn generator_of(f: &SymmetryFamily) -> Generator {
    Generator::FiniteDifference {
        family: f.clone(),
        step: GENERATOR_FD_STEP,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GeneratorSource {
    Closed,
    Automatic,
    FiniteDifference,
    Zero,
}

/// `(τ, ξ, υ) = ∂/∂s (T, X, U)` at `s = 0`, evaluable at `(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Closed(GeneratorFields),
    Automatic(SymmetryFamily),
    FiniteDifference { family: SymmetryFamily, step: f64 },
    Zero { n: usize, r: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorValue {
    pub tau: f64,
    pub xi: Vec<f64>,
    pub upsilon: Vec<f64>,
}

impl core::ops::Add for &GeneratorValue {
    type Output = GeneratorValue;
    fn add(self, o: &GeneratorValue) -> GeneratorValue {
        GeneratorValue {
            tau: self.tau + o.tau,
            xi: self.xi.iter().zip(&o.xi).map(|(a, b)| a + b).collect(),
            upsilon: self.upsilon.iter().zip(&o.upsilon).map(|(a, b)| a + b).collect(),
        }
    }
}

impl GeneratorValue {
    /// The generator as a tangent direction `(τ, ξ, υ)`.
    pub fn direction(&self) -> Point<'_> {
        Point::new(self.tau, &self.xi, &self.upsilon)
    }
}

impl Generator {
    pub fn source(&self) -> GeneratorSource {
        match self {
            Generator::Closed(_) => GeneratorSource::Closed,
            Generator::Automatic(_) => GeneratorSource::Automatic,
            Generator::FiniteDifference { .. } => GeneratorSource::FiniteDifference,
            Generator::Zero { .. } => GeneratorSource::Zero,
        }
    }

    pub fn eval(&self, pt: &Point<'_>) -> Result<GeneratorValue> {
        match self {
            Generator::Closed(g) => Ok(GeneratorValue {
                tau: g.tau.eval(pt)?,
                xi: g.xi.iter().map(|f| f.eval(pt)).collect::<Result<_>>()?,
                upsilon: g.upsilon.iter().map(|f| f.eval(pt)).collect::<Result<_>>()?,
            }),
            Generator::Automatic(f) => {
                let q = pt.with_s(0.0);
                let dx = vec![0.0; pt.x.len()];
                let du = vec![0.0; pt.u.len()];
                let dir = Point::new(0.0, &dx, &du).with_s(1.0);
                let d = |m: &ScalarField| m.eval_dual(&q, &dir).map(|v| v.deriv);
                Ok(GeneratorValue {
                    tau: d(&f.time)?,
                    xi: f.state.iter().map(d).collect::<Result<_>>()?,
                    upsilon: f.control.iter().map(d).collect::<Result<_>>()?,
                })
            }
            Generator::FiniteDifference { family, step } => {
                let plus = family.apply(pt, *step)?;
                let minus = family.apply(pt, -*step)?;
                let cd = |a: f64, b: f64| (a - b) / (2.0 * step);
                Ok(GeneratorValue {
                    tau: cd(plus.t, minus.t),
                    xi: plus.x.iter().zip(&minus.x).map(|(a, b)| cd(*a, *b)).collect(),
                    upsilon: plus.u.iter().zip(&minus.u).map(|(a, b)| cd(*a, *b)).collect(),
                })
            }
            Generator::Zero { n, r } => Ok(GeneratorValue {
                tau: 0.0,
                xi: vec![0.0; *n],
                upsilon: vec![0.0; *r],
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CheckMode {
    /// Random points; `d/dt` by the chain rule with `ẋ = φ`.
    Pointwise,
    /// Along an arc; `d/dt` by differencing composed signals.
    Arc,
}

/// Residuals of the three conditions at one value of `s`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SResiduals {
    pub s: f64,
    /// `L - L(h^s)·dT/dt` per node.
    pub cost: Vec<f64>,
    /// `dX/dt - φ(h^s)·dT/dt` per node, per state component.
    pub dynamics: Vec<Vec<f64>>,
    /// `c - c(h^s)·dT/dt` per node, per constraint.
    pub constraints: Vec<Vec<f64>>,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    /// Like `max_constraints`, over equality rows and inequality rows with
    /// `c_j < 1e-8` at the node only.
    pub max_active_constraints: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct InvarianceReport {
    pub family: String,
    pub mode: CheckMode,
    pub nodes: usize,
    pub per_s: Vec<SResiduals>,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    pub max_active_constraints: f64,
}

impl InvarianceReport {
    /// Largest residual over all three conditions and all `s`.
    pub fn max_norm(&self) -> f64 {
        self.max_cost.max(self.max_dynamics).max(self.max_constraints)
    }

    pub fn at_s(&self, s: f64) -> Option<&SResiduals> {
        self.per_s.iter().find(|r| r.s == s)
    }

    fn assemble(family: &str, mode: CheckMode, nodes: usize, per_s: Vec<SResiduals>) -> Self {
        let fold = |f: fn(&SResiduals) -> f64| per_s.iter().map(f).fold(0.0, f64::max);
        InvarianceReport {
            family: family.into(),
            mode,
            nodes,
            max_cost: fold(|r| r.max_cost),
            max_dynamics: fold(|r| r.max_dynamics),
            max_constraints: fold(|r| r.max_constraints),
            max_active_constraints: fold(|r| r.max_active_constraints),
            per_s,
        }
    }
}

fn check_samples(f: &SymmetryFamily, s_samples: &[f64]) -> Result<()> {
    match s_samples.iter().find(|s| !f.admits(**s) || !s.is_finite()) {
        Some(s) => Err(Error::Invalid(alloc::format!(
            "s = {s} lies outside (-{e}, {e}) declared for `{}`",
            f.name,
            e = f.epsilon
        ))),
        None => Ok(()),
    }
}

fn check_family(p: &Problem, f: &SymmetryFamily) -> Result<()> {
    if f.n() != p.n || f.r() != p.r {
        return Err(Error::ArityMismatch {
            what: alloc::format!("family `{}`", f.name),
            expected: p.n + p.r,
            found: f.n() + f.r(),
        });
    }
    Ok(())
}

struct NodeResiduals {
    cost: f64,
    dynamics: Vec<f64>,
    constraints: Vec<f64>,
    active: Vec<bool>,
}

fn node_residuals(
    p: &Problem,
    f: &SymmetryFamily,
    pt: &Point<'_>,
    s: f64,
    dt_dt: f64,
    dx_dt: &[f64],
) -> Result<NodeResiduals> {
    let img = f.apply(pt, s)?;
    let q = img.point();
    let cost = p.cost.eval(pt)? - p.cost.eval(&q)? * dt_dt;
    let dynamics = p
        .dynamics
        .iter()
        .zip(dx_dt)
        .map(|(phi, dx)| Ok(dx - phi.eval(&q)? * dt_dt))
        .collect::<Result<Vec<_>>>()?;
    let mut constraints = Vec::with_capacity(p.constraints.len());
    let mut active = Vec::with_capacity(p.constraints.len());
    for (j, c) in p.constraints.iter().enumerate() {
        let here = c.eval(pt)?;
        constraints.push(here - c.eval(&q)? * dt_dt);
        active.push(!p.is_inequality(j) || here < ACTIVE_THRESHOLD);
    }
    Ok(NodeResiduals {
        cost,
        dynamics,
        constraints,
        active,
    })
}

fn collect_s(s: f64, nodes: Vec<NodeResiduals>) -> SResiduals {
    let max_cost = grid::max_abs(nodes.iter().map(|r| r.cost));
    let max_dynamics = grid::max_abs(nodes.iter().flat_map(|r| r.dynamics.iter().copied()));
    let max_constraints = grid::max_abs(nodes.iter().flat_map(|r| r.constraints.iter().copied()));
    let max_active_constraints = grid::max_abs(nodes.iter().flat_map(|r| {
        r.constraints
            .iter()
            .zip(&r.active)
            .filter(|(_, a)| **a)
            .map(|(v, _)| *v)
    }));
    SResiduals {
        s,
        cost: nodes.iter().map(|r| r.cost).collect(),
        dynamics: nodes.iter().map(|r| r.dynamics.clone()).collect(),
        constraints: nodes.into_iter().map(|r| r.constraints).collect(),
        max_cost,
        max_dynamics,
        max_constraints,
        max_active_constraints,
    }
}

/// Invariance residuals at isolated points. Total derivatives use
/// `d/dt = ∂/∂t + ∂/∂x · φ(t, x, u)`, which requires `T` and `X` to be
/// independent of the control.
pub fn pointwise_invariance(
    p: &Problem,
    f: &SymmetryFamily,
    points: &[Sample],
    s_samples: &[f64],
) -> Result<InvarianceReport> {
    check_family(p, f)?;
    check_samples(f, s_samples)?;
    if let Some(m) = f.time_or_state_map_reads_control() {
        return Err(Error::ControlDependentMap(m.source().into()));
    }
    let mut per_s = Vec::with_capacity(s_samples.len());
    for &s in s_samples {
        let mut nodes = Vec::with_capacity(points.len());
        for (k, sample) in points.iter().enumerate() {
            let r = (|| {
                let pt = sample.point();
                let phi = pmp::dynamics(p, &pt)?;
                let du = vec![0.0; p.r];
                let dir = Point::new(1.0, &phi, &du);
                let q = pt.with_s(s);
                let dt_dt = f.time.eval_dual(&q, &dir)?.deriv;
                let dx_dt = f
                    .state
                    .iter()
                    .map(|m| m.eval_dual(&q, &dir).map(|d: Dual| d.deriv))
                    .collect::<Result<Vec<_>>>()?;
                node_residuals(p, f, &pt, s, dt_dt, &dx_dt)
            })()
            .map_err(|e| e.at(k, Some(s)))?;
            nodes.push(r);
        }
        per_s.push(collect_s(s, nodes));
    }
    Ok(InvarianceReport::assemble(
        &f.name,
        CheckMode::Pointwise,
        points.len(),
        per_s,
    ))
}

/// Invariance residuals along an arc, with `dT/dt` and `dX/dt` taken as
/// second-order differences of the composed signals over the grid.
pub fn invariance_residuals(
    p: &Problem,
    f: &SymmetryFamily,
    arc: &Trajectory,
    s_samples: &[f64],
) -> Result<InvarianceReport> {
    check_family(p, f)?;
    check_samples(f, s_samples)?;
    let len = arc.len();
    if len < 3 {
        return Err(Error::Invalid("arc needs at least three nodes".into()));
    }
    let mut per_s = Vec::with_capacity(s_samples.len());
    for &s in s_samples {
        let mut t_sig = Vec::with_capacity(len);
        let mut x_sig = vec![Vec::with_capacity(len); p.n];
        for k in 0..len {
            let img = f.apply(&arc.point(k), s).map_err(|e| e.at(k, Some(s)))?;
            t_sig.push(img.t);
            for (i, v) in img.x.into_iter().enumerate() {
                x_sig[i].push(v);
            }
        }
        let dt_dt = grid::derivative(&arc.grid, &t_sig);
        let dx_dt: Vec<Vec<f64>> = x_sig.iter().map(|sig| grid::derivative(&arc.grid, sig)).collect();
        let mut nodes = Vec::with_capacity(len);
        for k in 0..len {
            let dxk: Vec<f64> = dx_dt.iter().map(|d| d[k]).collect();
            let r = node_residuals(p, f, &arc.point(k), s, dt_dt[k], &dxk).map_err(|e| e.at(k, Some(s)))?;
            nodes.push(r);
        }
        per_s.push(collect_s(s, nodes));
    }
    Ok(InvarianceReport::assemble(&f.name, CheckMode::Arc, len, per_s))
}

/// First-order (in `s`) invariance identities along an extremal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LinearizedResiduals {
    /// `∂L·(τ, ξ, υ) + L·dτ/dt`.
    pub cost: Vec<f64>,
    /// `dξ/dt - ∂φ·(τ, ξ, υ) - φ·dτ/dt`.
    pub dynamics: Vec<Vec<f64>>,
    /// `∂c·(τ, ξ, υ) + c·dτ/dt`.
    pub constraints: Vec<Vec<f64>>,
    /// `ψ₀·cost - ψ·dynamics + λ·constraints`.
    pub combined: Vec<f64>,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    pub max_combined: f64,
}

pub fn linearized_residuals(p: &Problem, gen: &Generator, arc: &Extremal) -> Result<LinearizedResiduals> {
    let len = arc.len();
    if len < 3 {
        return Err(Error::Invalid("arc needs at least three nodes".into()));
    }
    let gens: Vec<GeneratorValue> = (0..len)
        .map(|k| gen.eval(&arc.point(k)).map_err(|e| e.at(k, None)))
        .collect::<Result<_>>()?;
    let g = &arc.trajectory.grid;
    let tau: Vec<f64> = gens.iter().map(|v| v.tau).collect();
    let dtau = grid::derivative(g, &tau);
    let dxi: Vec<Vec<f64>> = (0..p.n)
        .map(|i| grid::derivative(g, &gens.iter().map(|v| v.xi[i]).collect::<Vec<_>>()))
        .collect();

    let mut out = LinearizedResiduals {
        cost: Vec::with_capacity(len),
        dynamics: Vec::with_capacity(len),
        constraints: Vec::with_capacity(len),
        combined: Vec::with_capacity(len),
        max_cost: 0.0,
        max_dynamics: 0.0,
        max_constraints: 0.0,
        max_combined: 0.0,
    };
    for k in 0..len {
        let pt = arc.point(k);
        let dir = gens[k].direction();
        let lin = |f: &ScalarField| -> Result<f64> {
            let d = f.eval_dual(&pt, &dir)?;
            Ok(d.deriv + d.value * dtau[k])
        };
        let node = (|| -> Result<(f64, Vec<f64>, Vec<f64>)> {
            let cost = lin(&p.cost)?;
            let dynamics = p
                .dynamics
                .iter()
                .enumerate()
                .map(|(i, f)| Ok(dxi[i][k] - lin(f)?))
                .collect::<Result<Vec<_>>>()?;
            let constraints = p.constraints.iter().map(lin).collect::<Result<Vec<_>>>()?;
            Ok((cost, dynamics, constraints))
        })()
        .map_err(|e| e.at(k, None))?;
        let (cost, dynamics, constraints) = node;
        let combined = arc.psi0 * cost - arc.psi[k].iter().zip(&dynamics).map(|(a, b)| a * b).sum::<f64>()
            + arc.lambda[k].iter().zip(&constraints).map(|(a, b)| a * b).sum::<f64>();
        out.cost.push(cost);
        out.dynamics.push(dynamics);
        out.constraints.push(constraints);
        out.combined.push(combined);
    }
    out.max_cost = grid::max_abs(out.cost.iter().copied());
    out.max_dynamics = grid::max_abs(out.dynamics.iter().flatten().copied());
    out.max_constraints = grid::max_abs(out.constraints.iter().flatten().copied());
    out.max_combined = grid::max_abs(out.combined.iter().copied());
    Ok(out)
}
