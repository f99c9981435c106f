//! Maximum-principle quantities: the Hamiltonian
//! `H = ψ₀·L + ψ·φ + λ·c`, its adjoint and stationarity residuals, and the
//! pointwise resolution of `(u, λ)` from `∂H/∂u = 0` plus the constraints.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{Dual, Point, Var};
use crate::grid;
use crate::linalg;
use crate::ocp::Problem;
use crate::solver::Extremal;

/// `(ψ₀, ψ, λ)` at one instant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Multipliers {
    /// Abnormal multiplier, `≤ 0`.
    pub psi0: f64,
    pub psi: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Multipliers {
    pub fn new(psi0: f64, psi: Vec<f64>, lambda: Vec<f64>) -> Self {
        Multipliers { psi0, psi, lambda }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Multipliers::new(0.0, vec![0.0; n], vec![0.0; m])
    }

    /// `(ψ₀, ψ)` not identically zero.
    pub fn is_nontrivial(&self) -> bool {
        self.psi0 != 0.0 || self.psi.iter().any(|&v| v != 0.0)
    }

    fn check(&self, p: &Problem) -> Result<()> {
        if self.psi.len() != p.n {
            return Err(Error::ArityMismatch {
                what: "costate".into(),
                expected: p.n,
                found: self.psi.len(),
            });
        }
        if self.lambda.len() != p.constraints.len() {
            return Err(Error::ArityMismatch {
                what: "constraint multipliers".into(),
                expected: p.constraints.len(),
                found: self.lambda.len(),
            });
        }
        Ok(())
    }
}

/// Value and directional derivative of `H` along `dir`.
pub fn hamiltonian_dual(p: &Problem, pt: &Point<'_>, dir: &Point<'_>, c: &Multipliers) -> Result<Dual> {
    c.check(p)?;
    let mut h = Dual::constant(0.0);
    if c.psi0 != 0.0 {
        h = h + Dual::constant(c.psi0) * p.cost.eval_dual(pt, dir)?;
    }
    for (f, &w) in p.dynamics.iter().zip(&c.psi) {
        h = h + Dual::constant(w) * f.eval_dual(pt, dir)?;
    }
    for (f, &w) in p.constraints.iter().zip(&c.lambda) {
        h = h + Dual::constant(w) * f.eval_dual(pt, dir)?;
    }
    Ok(h)
}

pub fn hamiltonian(p: &Problem, pt: &Point<'_>, c: &Multipliers) -> Result<f64> {
    c.check(p)?;
    let mut h = 0.0;
    if c.psi0 != 0.0 {
        h += c.psi0 * p.cost.eval(pt)?;
    }
    for (f, &w) in p.dynamics.iter().zip(&c.psi) {
        h += w * f.eval(pt)?;
    }
    for (f, &w) in p.constraints.iter().zip(&c.lambda) {
        h += w * f.eval(pt)?;
    }
    Ok(h)
}

/// `∂H/∂var` at fixed multipliers.
pub fn hamiltonian_partial(p: &Problem, pt: &Point<'_>, c: &Multipliers, var: Var) -> Result<f64> {
    let mut dx = vec![0.0; pt.x.len()];
    let mut du = vec![0.0; pt.u.len()];
    let mut dt = 0.0;
    match var {
        Var::T => dt = 1.0,
        Var::X(i) => dx[i] = 1.0,
        Var::U(i) => du[i] = 1.0,
        Var::S => return Ok(0.0),
    }
    let dir = Point::new(dt, &dx, &du);
    Ok(hamiltonian_dual(p, pt, &dir, c)?.deriv)
}

/// `ψ̇ = -∂H/∂x`.
pub fn adjoint_rhs(p: &Problem, pt: &Point<'_>, c: &Multipliers) -> Result<Vec<f64>> {
    (0..p.n)
        .map(|i| hamiltonian_partial(p, pt, c, Var::X(i)).map(|d| -d))
        .collect()
}

/// `∂H/∂u`.
pub fn stationarity_residual(p: &Problem, pt: &Point<'_>, c: &Multipliers) -> Result<Vec<f64>> {
    (0..p.r).map(|i| hamiltonian_partial(p, pt, c, Var::U(i))).collect()
}

/// `φ(t, x, u)`.
pub fn dynamics(p: &Problem, pt: &Point<'_>) -> Result<Vec<f64>> {
    p.dynamics.iter().map(|f| f.eval(pt)).collect()
}

pub fn constraint_values(p: &Problem, pt: &Point<'_>) -> Result<Vec<f64>> {
    p.constraints.iter().map(|f| f.eval(pt)).collect()
}

/// Inequality constraints treated as holding with equality.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActiveSet(Vec<usize>);

/// Threshold below which an inequality is a candidate for the active set.
pub const ACTIVE_THRESHOLD: f64 = 1e-8;

impl ActiveSet {
    pub fn none() -> Self {
        ActiveSet(Vec::new())
    }

    pub fn from_indices(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        ActiveSet(idx)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Inequalities with `c_j < 1e-8` at the point.
    pub fn detect(p: &Problem, pt: &Point<'_>) -> Result<Self> {
        let mut idx = Vec::new();
        for j in p.inequality_indices() {
            if p.constraints[j].eval(pt)? < ACTIVE_THRESHOLD {
                idx.push(j);
            }
        }
        Ok(ActiveSet(idx))
    }

    fn check(&self, p: &Problem) -> Result<()> {
        match self
            .0
            .iter()
            .find(|&&j| !p.is_inequality(j) || j >= p.constraints.len())
        {
            Some(j) => Err(Error::Invalid(alloc::format!(
                "active index {j} is not an inequality constraint"
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            tolerance: 1e-12,
            max_iterations: 50,
            fd_step: 1e-7,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct Algebraic<'a> {
    p: &'a Problem,
    t: f64,
    x: &'a [f64],
    psi0: f64,
    psi: &'a [f64],
    active: &'a ActiveSet,
}

impl Algebraic<'_> {
    fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (u, lambda) = z.split_at(self.p.r);
        let pt = Point::new(self.t, self.x, u);
        let c = Multipliers::new(self.psi0, self.psi.to_vec(), lambda.to_vec());
        let mut out = stationarity_residual(self.p, &pt, &c)?;
        for (j, f) in self.p.constraints.iter().enumerate() {
            if self.p.is_inequality(j) && !self.active.contains(j) {
                out.push(lambda[j]);
            } else {
                out.push(f.eval(&pt)?);
            }
        }
        Ok(out)
    }

    /// Forward differences, falling back to backward ones on domain errors.
    fn jacobian(&self, z: &[f64], f: &[f64], fd_step: f64) -> Result<Vec<f64>> {
        let dim = z.len();
        let mut jac = vec![0.0; dim * dim];
        for col in 0..dim {
            let h = fd_step * z[col].abs().max(1.0);
            let mut zp = z.to_vec();
            zp[col] += h;
            let (fp, h) = match self.residual(&zp) {
                Ok(fp) => (fp, h),
                Err(_) => {
                    zp[col] = z[col] - h;
                    (self.residual(&zp)?, -h)
                }
            };
            for row in 0..dim {
                jac[row * dim + col] = (fp[row] - f[row]) / h;
            }
        }
        Ok(jac)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    grid::max_abs(v.iter().copied())
}

/// Chord steps taken after convergence while the residual keeps falling.
const POLISH_STEPS: usize = 3;

/// Newton on `∂H/∂u = 0`, `c_i = 0` (equalities and active inequalities),
/// `λ_j = 0` (inactive inequalities) for the unknowns `(u, λ)`, with a
/// forward-difference Jacobian and step halving on domain errors or residual
/// growth. Once within tolerance, chord steps drive the residual down to
/// round-off.
#[allow(clippy::too_many_arguments)]
pub fn resolve_algebraic(
    p: &Problem,
    t: f64,
    x: &[f64],
    psi0: f64,
    psi: &[f64],
    guess_u: &[f64],
    guess_lambda: &[f64],
    active: &ActiveSet,
    opts: &ResolveOptions,
) -> Result<Resolved> {
    active.check(p)?;
    if guess_u.len() != p.r || guess_lambda.len() != p.constraints.len() {
        return Err(Error::ArityMismatch {
            what: "algebraic guess".into(),
            expected: p.r + p.constraints.len(),
            found: guess_u.len() + guess_lambda.len(),
        });
    }
    let sys = Algebraic {
        p,
        t,
        x,
        psi0,
        psi,
        active,
    };
    let mut z: Vec<f64> = guess_u.iter().chain(guess_lambda).copied().collect();
    let mut f = sys.residual(&z)?;
    let mut norm = inf_norm(&f);
    let mut last_jac: Option<Vec<f64>> = None;
    for it in 0..=opts.max_iterations {
        if norm <= opts.tolerance {
            let jac = match last_jac {
                Some(j) => Some(j),
                None if norm > 0.0 => sys.jacobian(&z, &f, opts.fd_step).ok(),
                None => None,
            };
            if let Some(jac) = jac {
                for _ in 0..POLISH_STEPS {
                    let Ok(step) = linalg::solve(jac.clone(), f.iter().map(|v| -v).collect()) else {
                        break;
                    };
                    let trial: Vec<f64> = z.iter().zip(&step).map(|(a, d)| a + d).collect();
                    match sys.residual(&trial) {
                        Ok(ft) if inf_norm(&ft) < norm => {
                            norm = inf_norm(&ft);
                            z = trial;
                            f = ft;
                        }
                        _ => break,
                    }
                }
            }
            let lambda = z.split_off(p.r);
            return Ok(Resolved {
                u: z,
                lambda,
                iterations: it,
                residual: norm,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let jac = sys.jacobian(&z, &f, opts.fd_step)?;
        let step = linalg::solve(jac.clone(), f.iter().map(|v| -v).collect())?;
        last_jac = Some(jac);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            if let Ok(ft) = sys.residual(&trial) {
                let tn = inf_norm(&ft);
                if tn < norm {
                    z = trial;
                    f = ft;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: norm,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

/// `dH/dt - ∂H/∂t` at the interior nodes of an arc, with `dH/dt` a central
/// difference of the composed signal `H(t_k, x_k, u_k, ψ₀, ψ_k, λ_k)`.
///
/// Nodes where `H` cannot be evaluated yield `NaN`.
pub fn dhdt_residual(p: &Problem, arc: &Extremal) -> Vec<f64> {
    let n = arc.len();
    if n < 3 {
        return Vec::new();
    }
    let h: Vec<f64> = (0..n)
        .map(|k| hamiltonian(p, &arc.point(k), &arc.multipliers(k)).unwrap_or(f64::NAN))
        .collect();
    let g = &arc.trajectory.grid;
    (1..n - 1)
        .map(|k| {
            let dh = (h[k + 1] - h[k - 1]) / (g[k + 1] - g[k - 1]);
            let partial = hamiltonian_partial(p, &arc.point(k), &arc.multipliers(k), Var::T).unwrap_or(f64::NAN);
            dh - partial
        })
        .collect()
}

/// Worst-case maximum-principle residuals over an arc.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmpResiduals {
    /// `max |∂H/∂u|`.
    pub stationarity: f64,
    /// `max |c_i|` over equalities, `max(0, -c_j)` over inequalities.
    pub constraint_violation: f64,
    /// `min λ_j` over inequality indices; `None` without inequalities.
    pub min_inequality_multiplier: Option<f64>,
    /// `max |λ_j · c_j|` over inequality indices.
    pub complementarity: f64,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmpTolerances {
    pub stationarity: f64,
    pub constraint: f64,
    /// Lower bound on inequality multipliers.
    pub multiplier: f64,
    pub complementarity: f64,
}

impl Default for PmpTolerances {
    fn default() -> Self {
        PmpTolerances {
            stationarity: 1e-8,
            constraint: 1e-8,
            multiplier: -1e-10,
            complementarity: 1e-8,
        }
    }
}

impl PmpResiduals {
    pub fn of(p: &Problem, arc: &Extremal) -> Result<Self> {
        let mut out = PmpResiduals {
            stationarity: 0.0,
            constraint_violation: 0.0,
            min_inequality_multiplier: None,
            complementarity: 0.0,
            nontrivial: true,
        };
        for k in 0..arc.len() {
            let pt = arc.point(k);
            let c = arc.multipliers(k);
            let st = stationarity_residual(p, &pt, &c).map_err(|e| e.at(k, None))?;
            out.stationarity = out.stationarity.max(inf_norm(&st));
            let values = constraint_values(p, &pt).map_err(|e| e.at(k, None))?;
            for (j, &v) in values.iter().enumerate() {
                if p.is_inequality(j) {
                    out.constraint_violation = out.constraint_violation.max((-v).max(0.0));
                    let l = c.lambda[j];
                    out.min_inequality_multiplier = Some(out.min_inequality_multiplier.map_or(l, |m: f64| m.min(l)));
                    out.complementarity = out.complementarity.max((l * v).abs());
                } else {
                    out.constraint_violation = out.constraint_violation.max(v.abs());
                }
            }
            out.nontrivial &= c.is_nontrivial();
        }
        Ok(out)
    }

    /// First violated bound, if any.
    pub fn check(&self, tol: &PmpTolerances) -> Result<()> {
        let fail = |what, value, tolerance| Err(Error::ToleranceExceeded { what, value, tolerance });
        if !(self.stationarity <= tol.stationarity) {
            return fail("stationarity residual", self.stationarity, tol.stationarity);
        }
        if !(self.constraint_violation <= tol.constraint) {
            return fail("constraint violation", self.constraint_violation, tol.constraint);
        }
        if let Some(m) = self.min_inequality_multiplier {
            if !(m >= tol.multiplier) {
                return fail("negative inequality multiplier", -m, -tol.multiplier);
            }
        }
        if !(self.complementarity <= tol.complementarity) {
            return fail("complementarity", self.complementarity, tol.complementarity);
        }
        if !self.nontrivial {
            return Err(Error::Invalid("trivial multipliers (ψ₀, ψ) = 0".into()));
        }
        Ok(())
    }
}
