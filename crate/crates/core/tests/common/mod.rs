#![allow(dead_code)]

pub mod oracle;

use noether_core::registry::{self, ExampleEntry};
use noether_core::{shoot, Extremal, Params, Problem, ScalarField, Sense, ShootConfig};

pub fn field(src: &str, n: usize, r: usize) -> ScalarField {
    ScalarField::parse(src, n, r, &Params::new()).unwrap()
}

/// Scalar problem with fixed endpoints on `[0, 1]`.
pub fn scalar_problem(cost: &str, dynamics: &str, constraints: &[&str], m_ineq: usize, r: usize, x_b: f64) -> Problem {
    Problem {
        n: 1,
        r,
        m: constraints.len(),
        m_ineq,
        cost: field(cost, 1, r),
        dynamics: vec![field(dynamics, 1, r)],
        constraints: constraints.iter().map(|c| field(c, 1, r)).collect(),
        a: 0.0,
        b: 1.0,
        x_a: vec![0.0],
        x_b: vec![x_b],
        sense: Sense::Minimize,
    }
}

/// `min ∫ u² + t·x`, `ẋ = u`, `x(0) = 0`, `x(1) = 1`: `H` varies along the arc.
pub fn time_varying() -> Problem {
    scalar_problem("u1^2 + t*x1", "u1", &[], 0, 1, 1.0)
}

pub fn config(e: &ExampleEntry, steps: usize) -> ShootConfig {
    ShootConfig::new(&e.problem)
        .with_steps(steps)
        .with_seeds(e.seeds.u.clone(), e.seeds.lambda.clone())
}

pub fn solve(name: &str, steps: usize) -> (ExampleEntry, Extremal) {
    let e = registry::get(name).unwrap();
    let arc = shoot(&e.problem, &e.psi_a_guess, &config(&e, steps)).unwrap();
    (e, arc)
}

pub fn resource(steps: usize) -> (ExampleEntry, Extremal) {
    solve("exhaustible-resource", steps)
}

/// `max_k |a_k - b_k| / max_k |b_k|`.
pub fn rel_sup(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    num / b.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

pub fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}
