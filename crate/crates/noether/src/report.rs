//! Machine-readable summaries and time series.

use std::path::Path;

use noether_core::pmp::{self, PmpResiduals, PmpTolerances};
use noether_core::symmetry::{CheckMode, GeneratorSource, LinearizedResiduals};
use noether_core::{ConservationReport, Extremal, InvarianceReport, Problem};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Default tolerances of the checks the front end gates on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Pointwise invariance residuals.
    pub invariance: f64,
    /// `C` in the grid-error allowance `C·h²` for arc-based checks.
    pub grid_constant: f64,
    /// Relative drift of a conserved quantity.
    pub drift: f64,
    /// Floor for `dH/dt - ∂H/∂t`.
    pub dhdt: f64,
    pub pmp: PmpTolerances,
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            invariance: 1e-9,
            grid_constant: 10.0,
            drift: 1e-6,
            dhdt: 1e-8,
            pmp: PmpTolerances::default(),
            boundary: 1e-8,
        }
    }
}

impl Tolerances {
    /// `max(floor, C·h²)`.
    pub fn on_grid(&self, floor: f64, h: f64) -> f64 {
        floor.max(self.grid_constant * h * h)
    }
}

/// Largest spacing of a grid.
pub fn max_step(grid: &[f64]) -> f64 {
    grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SSummary {
    pub s: f64,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    pub max_active_constraints: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceSummary {
    pub family: String,
    pub mode: CheckMode,
    pub nodes: usize,
    pub per_s: Vec<SSummary>,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    pub max_active_constraints: f64,
    pub max_norm: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvarianceSummary {
    pub fn new(r: &InvarianceReport, tolerance: f64) -> Self {
        InvarianceSummary {
            family: r.family.clone(),
            mode: r.mode,
            nodes: r.nodes,
            per_s: r
                .per_s
                .iter()
                .map(|s| SSummary {
                    s: s.s,
                    max_cost: s.max_cost,
                    max_dynamics: s.max_dynamics,
                    max_constraints: s.max_constraints,
                    max_active_constraints: s.max_active_constraints,
                })
                .collect(),
            max_cost: r.max_cost,
            max_dynamics: r.max_dynamics,
            max_constraints: r.max_constraints,
            max_active_constraints: r.max_active_constraints,
            max_norm: r.max_norm(),
            tolerance,
            pass: r.max_norm() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChargeSummary {
    pub family: String,
    pub generator: GeneratorSource,
    pub reference: f64,
    pub max_abs_drift: f64,
    pub rel_drift: f64,
    pub grid_size: usize,
    pub missing: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ChargeSummary {
    pub fn new(family: &str, r: &ConservationReport, tolerance: f64) -> Self {
        ChargeSummary {
            family: family.to_string(),
            generator: r.generator,
            reference: r.reference,
            max_abs_drift: r.max_abs_drift,
            rel_drift: r.rel_drift,
            grid_size: r.grid_size,
            missing: r.missing.clone(),
            tolerance,
            pass: r.rel_drift <= tolerance && r.missing.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizedSummary {
    pub family: String,
    pub max_cost: f64,
    pub max_dynamics: f64,
    pub max_constraints: f64,
    pub max_combined: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl LinearizedSummary {
    pub fn new(family: &str, r: &LinearizedResiduals, tolerance: f64) -> Self {
        let worst = r
            .max_cost
            .max(r.max_dynamics)
            .max(r.max_constraints)
            .max(r.max_combined);
        LinearizedSummary {
            family: family.to_string(),
            max_cost: r.max_cost,
            max_dynamics: r.max_dynamics,
            max_constraints: r.max_constraints,
            max_combined: r.max_combined,
            tolerance,
            pass: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianSummary {
    /// `max |dH/dt - ∂H/∂t|` over interior nodes.
    pub max_residual: f64,
    /// `max_residual / h²`.
    pub constant: f64,
    pub step: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl HamiltonianSummary {
    pub fn new(p: &Problem, arc: &Extremal, tol: &Tolerances) -> Self {
        let r = pmp::dhdt_residual(p, arc);
        let max_residual = r
            .iter()
            .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
        let step = max_step(&arc.trajectory.grid);
        let tolerance = tol.on_grid(tol.dhdt, step);
        HamiltonianSummary {
            max_residual,
            constant: max_residual / (step * step),
            step,
            tolerance,
            pass: max_residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcSummary {
    pub steps: usize,
    pub psi0: f64,
    pub psi_a: Vec<f64>,
    pub shooting_iterations: usize,
    pub boundary_mismatch: f64,
    pub pmp: PmpResiduals,
    pub pass: bool,
}

impl ArcSummary {
    pub fn new(arc: &Extremal, tol: &Tolerances) -> Self {
        let d = &arc.diagnostics;
        ArcSummary {
            steps: arc.len() - 1,
            psi0: arc.psi0,
            psi_a: arc.psi[0].clone(),
            shooting_iterations: d.shooting_iterations,
            boundary_mismatch: d.boundary_mismatch,
            pmp: d.pmp,
            pass: d.boundary_mismatch <= tol.boundary && d.pmp.check(&tol.pmp).is_ok(),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// Writes `t` and one column per named series.
pub fn write_series(path: &Path, grid: &[f64], columns: &[(String, Vec<Option<f64>>)]) -> Result<()> {
    let err = |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let header: Vec<&str> = std::iter::once("t")
        .chain(columns.iter().map(|(h, _)| h.as_str()))
        .collect();
    w.write_record(&header).map_err(err)?;
    for (k, t) in grid.iter().enumerate() {
        let row: Vec<String> = std::iter::once(cell(Some(*t)))
            .chain(columns.iter().map(|(_, v)| cell(v.get(k).copied().flatten())))
            .collect();
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `charge` and `drift` columns for a conservation report.
pub fn charge_columns(prefix: &str, r: &ConservationReport) -> Vec<(String, Vec<Option<f64>>)> {
    let name = |s: &str| {
        if prefix.is_empty() {
            s.to_string()
        } else {
            format!("{prefix}_{s}")
        }
    };
    vec![(name("charge"), r.charge.clone()), (name("drift"), r.drift())]
}
