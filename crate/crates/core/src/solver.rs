//! Indirect single shooting for constrained extremals.
//!
//! The state–costate system `ẋ = φ`, `ψ̇ = -∂H/∂x` is integrated with classic
//! RK4, re-resolving `(u, λ)` at every stage. Newton on the initial costate
//! drives `x(b)` to the target.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Point;
use crate::grid;
use crate::linalg;
use crate::ocp::{Problem, Trajectory};
use crate::pmp::{self, ActiveSet, Multipliers, PmpResiduals, PmpTolerances, ResolveOptions};

/// A discretized extremal `(x, u, ψ₀, ψ, λ)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Extremal {
    pub trajectory: Trajectory,
    pub psi0: f64,
    pub psi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub pmp: PmpResiduals,
    /// `max |x(b) - x_b|`.
    pub boundary_mismatch: f64,
    pub shooting_iterations: usize,
}

impl Extremal {
    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn point(&self, k: usize) -> Point<'_> {
        self.trajectory.point(k)
    }

    pub fn multipliers(&self, k: usize) -> Multipliers {
        Multipliers::new(self.psi0, self.psi[k].clone(), self.lambda[k].clone())
    }

    /// Grid spacing (uniform grids).
    pub fn step(&self) -> f64 {
        let g = &self.trajectory.grid;
        (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64
    }

    /// Recomputes the residual diagnostics against `p`, keeping the
    /// shooting iteration count.
    pub fn rediagnose(&mut self, p: &Problem) -> Result<()> {
        self.diagnostics.pmp = PmpResiduals::of(p, self)?;
        self.diagnostics.boundary_mismatch = boundary_mismatch(p, self);
        Ok(())
    }
}

fn boundary_mismatch(p: &Problem, arc: &Extremal) -> f64 {
    let last = &arc.trajectory.x[arc.len() - 1];
    grid::max_abs(last.iter().zip(&p.x_b).map(|(a, b)| a - b))
}

/// Initial guesses for `(u, λ)` at `t = a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Seeds {
    /// `u = 1`, `λ = 0`.
    pub fn default_for(p: &Problem) -> Self {
        Seeds {
            u: vec![1.0; p.r],
            lambda: vec![0.0; p.constraints.len()],
        }
    }
}

struct Stage {
    dx: Vec<f64>,
    dpsi: Vec<f64>,
    u: Vec<f64>,
    lambda: Vec<f64>,
}

struct Canonical<'a> {
    p: &'a Problem,
    psi0: f64,
    active: &'a ActiveSet,
    opts: &'a ResolveOptions,
}

impl Canonical<'_> {
    fn resolve(&self, t: f64, x: &[f64], psi: &[f64], warm_u: &[f64], warm_l: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = pmp::resolve_algebraic(self.p, t, x, self.psi0, psi, warm_u, warm_l, self.active, self.opts)?;
        Ok((r.u, r.lambda))
    }

    fn rhs(&self, t: f64, x: &[f64], psi: &[f64], u: Vec<f64>, lambda: Vec<f64>) -> Result<Stage> {
        let pt = Point::new(t, x, &u);
        let dx = pmp::dynamics(self.p, &pt)?;
        let c = Multipliers::new(self.psi0, psi.to_vec(), lambda);
        let dpsi = pmp::adjoint_rhs(self.p, &pt, &c)?;
        Ok(Stage {
            dx,
            dpsi,
            u,
            lambda: c.lambda,
        })
    }

    fn stage(&self, t: f64, x: &[f64], psi: &[f64], warm: &Stage) -> Result<Stage> {
        let (u, l) = self.resolve(t, x, psi, &warm.u, &warm.lambda)?;
        self.rhs(t, x, psi, u, l)
    }
}

fn axpy(y: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    y.iter().zip(d).map(|(y, d)| y + a * d).collect()
}

/// Integrates the canonical system from `(x_a, ψ_a)` over `steps` uniform
/// RK4 steps. Any failure aborts with the node index; no partial arc is
/// returned.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    p: &Problem,
    psi0: f64,
    psi_a: &[f64],
    seeds: &Seeds,
    active: &ActiveSet,
    steps: usize,
    opts: &ResolveOptions,
) -> Result<Extremal> {
    p.check()?;
    if psi_a.len() != p.n {
        return Err(Error::ArityMismatch {
            what: "initial costate".into(),
            expected: p.n,
            found: psi_a.len(),
        });
    }
    if steps < 2 {
        return Err(Error::Invalid("at least two integration steps are required".into()));
    }
    let sys = Canonical { p, psi0, active, opts };
    let grid = grid::uniform(p.a, p.b, steps);
    let h = (p.b - p.a) / steps as f64;

    let mut xs = Vec::with_capacity(steps + 1);
    let mut psis = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut lambdas = Vec::with_capacity(steps + 1);

    let mut x = p.x_a.clone();
    let mut psi = psi_a.to_vec();
    let (u0, l0) = sys
        .resolve(grid[0], &x, &psi, &seeds.u, &seeds.lambda)
        .map_err(|e| e.at(0, None))?;
    let mut node = sys.rhs(grid[0], &x, &psi, u0, l0).map_err(|e| e.at(0, None))?;
    let mut x_comp = vec![0.0; p.n];
    let mut psi_comp = vec![0.0; p.n];

    for k in 0..steps {
        xs.push(x.clone());
        psis.push(psi.clone());
        us.push(node.u.clone());
        lambdas.push(node.lambda.clone());

        let t = grid[k];
        let at = |e: Error| e.at(k, None);
        let k1 = &node;
        let k2 = sys
            .stage(
                t + 0.5 * h,
                &axpy(&x, 0.5 * h, &k1.dx),
                &axpy(&psi, 0.5 * h, &k1.dpsi),
                k1,
            )
            .map_err(at)?;
        let k3 = sys
            .stage(
                t + 0.5 * h,
                &axpy(&x, 0.5 * h, &k2.dx),
                &axpy(&psi, 0.5 * h, &k2.dpsi),
                &k2,
            )
            .map_err(at)?;
        let k4 = sys
            .stage(grid[k + 1], &axpy(&x, h, &k3.dx), &axpy(&psi, h, &k3.dpsi), &k3)
            .map_err(at)?;
        // Kahan-compensated update; on fine grids the increments are tiny
        // next to the state and plain summation loses their low bits.
        let combine = |y: &[f64], comp: &mut [f64], d1: &[f64], d2: &[f64], d3: &[f64], d4: &[f64]| -> Vec<f64> {
            (0..y.len())
                .map(|i| {
                    let inc = h / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]) - comp[i];
                    let next = y[i] + inc;
                    comp[i] = (next - y[i]) - inc;
                    next
                })
                .collect()
        };
        let x_next = combine(&x, &mut x_comp, &k1.dx, &k2.dx, &k3.dx, &k4.dx);
        let psi_next = combine(&psi, &mut psi_comp, &k1.dpsi, &k2.dpsi, &k3.dpsi, &k4.dpsi);
        node = sys
            .stage(grid[k + 1], &x_next, &psi_next, &k4)
            .map_err(|e| e.at(k + 1, None))?;
        x = x_next;
        psi = psi_next;
    }
    xs.push(x);
    psis.push(psi);
    us.push(node.u);
    lambdas.push(node.lambda);

    let mut arc = Extremal {
        trajectory: Trajectory { grid, x: xs, u: us },
        psi0,
        psi: psis,
        lambda: lambdas,
        diagnostics: Diagnostics {
            pmp: PmpResiduals {
                stationarity: 0.0,
                constraint_violation: 0.0,
                min_inequality_multiplier: None,
                complementarity: 0.0,
                nontrivial: true,
            },
            boundary_mismatch: 0.0,
            shooting_iterations: 0,
        },
    };
    arc.rediagnose(p)?;
    Ok(arc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootConfig {
    /// Number of uniform steps; the grid has `steps + 1` nodes.
    pub steps: usize,
    pub psi0: f64,
    pub active: ActiveSet,
    pub seeds: Seeds,
    pub boundary_tolerance: f64,
    pub max_iterations: usize,
    pub jacobian_step: f64,
    pub max_halvings: usize,
    pub resolve: ResolveOptions,
    pub pmp: PmpTolerances,
}

impl ShootConfig {
    pub fn new(p: &Problem) -> Self {
        ShootConfig {
            steps: 1000,
            psi0: -1.0,
            active: ActiveSet::none(),
            seeds: Seeds::default_for(p),
            boundary_tolerance: 1e-8,
            max_iterations: 50,
            jacobian_step: 1e-6,
            max_halvings: 30,
            resolve: ResolveOptions::default(),
            pmp: PmpTolerances::default(),
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_seeds(mut self, u: Vec<f64>, lambda: Vec<f64>) -> Self {
        self.seeds = Seeds { u, lambda };
        self
    }
}

/// Scalings tried, in order, when the initial guess cannot be integrated.
const GUESS_SCALES: [f64; 10] = [1.25, 0.8, 1.5, 2.0 / 3.0, 2.0, 0.5, 3.0, 1.0 / 3.0, 4.0, 0.25];

fn mismatch(p: &Problem, arc: &Extremal) -> Vec<f64> {
    arc.trajectory.x[arc.len() - 1]
        .iter()
        .zip(&p.x_b)
        .map(|(a, b)| a - b)
        .collect()
}

/// Newton on `ψ_a ↦ x(b) - x_b` with a forward-difference Jacobian and step
/// halving, plus one chord step once within tolerance. The returned arc satisfies the boundary and maximum-principle
/// tolerances of `cfg`.
pub fn shoot(p: &Problem, psi_a_guess: &[f64], cfg: &ShootConfig) -> Result<Extremal> {
    let run = |psi_a: &[f64], seeds: &Seeds| integrate(p, cfg.psi0, psi_a, seeds, &cfg.active, cfg.steps, &cfg.resolve);

    let (mut psi_a, mut arc) = match run(psi_a_guess, &cfg.seeds) {
        Ok(arc) => (psi_a_guess.to_vec(), arc),
        Err(first) => {
            if matches!(
                first.root(),
                Error::InvalidProblem(_) | Error::ArityMismatch { .. } | Error::Invalid(_)
            ) {
                return Err(first);
            }
            GUESS_SCALES
                .iter()
                .find_map(|k| {
                    let g: Vec<f64> = psi_a_guess.iter().map(|v| v * k).collect();
                    run(&g, &cfg.seeds).ok().map(|a| (g, a))
                })
                .ok_or(first)?
        }
    };
    let mut res = mismatch(p, &arc);
    let mut norm = grid::max_abs(res.iter().copied());
    let mut last_jac: Option<(Vec<f64>, Seeds)> = None;

    for it in 0..=cfg.max_iterations {
        if norm <= cfg.boundary_tolerance {
            let mut steps = it;
            // One chord step with the last Jacobian, kept only if it helps.
            if let Some((jac, seeds)) = last_jac {
                if let Ok(step) = linalg::solve(jac, res.iter().map(|v| -v).collect()) {
                    let trial: Vec<f64> = psi_a.iter().zip(&step).map(|(a, d)| a + d).collect();
                    if let Ok(a) = run(&trial, &seeds) {
                        if grid::max_abs(mismatch(p, &a)) < norm {
                            arc = a;
                            steps += 1;
                        }
                    }
                }
            }
            arc.diagnostics.shooting_iterations = steps;
            arc.diagnostics.pmp.check(&cfg.pmp)?;
            return Ok(arc);
        }
        if it == cfg.max_iterations {
            break;
        }
        let seeds = Seeds {
            u: arc.trajectory.u[0].clone(),
            lambda: arc.lambda[0].clone(),
        };
        let n = p.n;
        let mut jac = vec![0.0; n * n];
        for col in 0..n {
            let h = cfg.jacobian_step;
            let mut probe = psi_a.clone();
            probe[col] += h;
            let (arc_h, h) = match run(&probe, &seeds) {
                Ok(a) => (a, h),
                Err(_) => {
                    probe[col] = psi_a[col] - h;
                    match run(&probe, &seeds) {
                        Ok(a) => (a, -h),
                        Err(_) => {
                            return Err(Error::NoConvergence {
                                iterations: it,
                                residual: norm,
                            })
                        }
                    }
                }
            };
            let rh = mismatch(p, &arc_h);
            for row in 0..n {
                jac[row * n + col] = (rh[row] - res[row]) / h;
            }
        }
        let step = match linalg::solve(jac.clone(), res.iter().map(|v| -v).collect()) {
            Ok(s) => s,
            Err(_) => {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: norm,
                })
            }
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = psi_a.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            if let Ok(a) = run(&trial, &seeds) {
                let r = mismatch(p, &a);
                let rn = grid::max_abs(r.iter().copied());
                if rn < norm {
                    last_jac = Some((jac.clone(), seeds.clone()));
                    psi_a = trial;
                    arc = a;
                    res = r;
                    norm = rn;
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
        iterations: cfg.max_iterations,
        residual: norm,
    })
}

/// Re-solves on a grid `factor` times finer, warm-started from `arc`.
pub fn refine(p: &Problem, arc: &Extremal, factor: usize, cfg: &ShootConfig) -> Result<Extremal> {
    if factor == 0 {
        return Err(Error::Invalid("refinement factor must be positive".into()));
    }
    let mut cfg = cfg.clone();
    cfg.steps = (arc.len() - 1) * factor;
    cfg.psi0 = arc.psi0;
    cfg.seeds = Seeds {
        u: arc.trajectory.u[0].clone(),
        lambda: arc.lambda[0].clone(),
    };
    shoot(p, &arc.psi[0], &cfg)
}
