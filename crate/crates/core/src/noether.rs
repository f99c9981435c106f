//! The conserved quantity `ψ·ξ - H·τ` and its drift along extremals.

use alloc::vec::Vec;

use crate::error::Result;
use crate::expr::Point;
use crate::ocp::Problem;
use crate::pmp::{self, Multipliers};
use crate::solver::Extremal;
use crate::symmetry::{Generator, GeneratorSource, GeneratorValue};

/// `ψ·ξ - H·τ` for an already evaluated generator.
pub fn charge_at(p: &Problem, g: &GeneratorValue, pt: &Point<'_>, c: &Multipliers) -> Result<f64> {
    let h = pmp::hamiltonian(p, pt, c)?;
    let psi_xi: f64 = c.psi.iter().zip(&g.xi).map(|(a, b)| a * b).sum();
    Ok(psi_xi - h * g.tau)
}

pub fn charge(p: &Problem, gen: &Generator, pt: &Point<'_>, c: &Multipliers) -> Result<f64> {
    charge_at(p, &gen.eval(pt)?, pt, c)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConservationReport {
    pub grid: Vec<f64>,
    /// `None` where the charge could not be evaluated.
    pub charge: Vec<Option<f64>>,
    /// Charge at the first evaluable node (normally `t = a`).
    pub reference: f64,
    pub max_abs_drift: f64,
    /// `max_abs_drift / max(1, |reference|)`.
    pub rel_drift: f64,
    pub grid_size: usize,
    pub missing: Vec<usize>,
    pub generator: GeneratorSource,
}

impl ConservationReport {
    /// `charge_k - reference`, `None` at missing nodes.
    pub fn drift(&self) -> Vec<Option<f64>> {
        self.charge.iter().map(|c| c.map(|c| c - self.reference)).collect()
    }
}

/// Charge series and drift statistics along an arc. Evaluation failures are
/// recorded as missing nodes; if every node fails the drift is `NaN`.
pub fn conservation_report(p: &Problem, gen: &Generator, arc: &Extremal) -> ConservationReport {
    let charge: Vec<Option<f64>> = (0..arc.len())
        .map(|k| charge(p, gen, &arc.point(k), &arc.multipliers(k)).ok())
        .collect();
    let missing: Vec<usize> = charge
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(k, _)| k)
        .collect();
    let reference = charge.iter().flatten().next().copied().unwrap_or(f64::NAN);
    let max_abs_drift = if reference.is_nan() {
        f64::NAN
    } else {
        charge
            .iter()
            .flatten()
            .fold(0.0, |m: f64, c| m.max((c - reference).abs()))
    };
    ConservationReport {
        grid: arc.trajectory.grid.clone(),
        rel_drift: max_abs_drift / reference.abs().max(1.0),
        charge,
        reference,
        max_abs_drift,
        grid_size: arc.len(),
        missing,
        generator: gen.source(),
    }
}
