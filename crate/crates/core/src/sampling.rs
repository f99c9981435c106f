//! Random points on the constraint surface of an arbitrary problem.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{control_vars, Point};
use crate::grid;
use crate::linalg;
use crate::ocp::{Problem, Sample};

/// Draw attempts per requested point before giving up.
const ATTEMPTS_PER_POINT: usize = 100;

const PROJECTION_TOLERANCE: f64 = 1e-13;
const PROJECTION_ITERATIONS: usize = 50;

/// Box for state and control coordinates. With `lo > 0` coordinates are
/// log-uniform, otherwise uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { lo: 0.1, hi: 10.0 }
    }
}

impl SampleBox {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo > 0.0 {
            libm::exp(rng.gen_range(libm::log(self.lo)..libm::log(self.hi)))
        } else {
            rng.gen_range(self.lo..self.hi)
        }
    }
}

/// `count` points with `t` uniform in `[a, b]`, `x` and `u` drawn from the
/// box, then `u` projected onto the equality constraints by minimum-norm
/// Gauss–Newton. Points violating an inequality, or where some field cannot
/// be evaluated, are redrawn.
pub fn feasible_points(p: &Problem, count: usize, seed: u64, bounds: SampleBox) -> Result<Vec<Sample>> {
    p.check()?;
    if !(bounds.lo < bounds.hi) || !bounds.lo.is_finite() || !bounds.hi.is_finite() {
        return Err(Error::Invalid(alloc::format!(
            "sample box [{}, {}] is empty",
            bounds.lo,
            bounds.hi
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * ATTEMPTS_PER_POINT {
        if out.len() == count {
            break;
        }
        let t = rng.gen_range(p.a..p.b);
        let x: Vec<f64> = (0..p.n).map(|_| bounds.draw(&mut rng)).collect();
        let u: Vec<f64> = (0..p.r).map(|_| bounds.draw(&mut rng)).collect();
        if let Some(u) = project(p, t, &x, u) {
            out.push(Sample::new(t, x, u));
        }
    }
    if out.len() < count {
        return Err(Error::Invalid(alloc::format!(
            "found only {} of {count} feasible points",
            out.len()
        )));
    }
    Ok(out)
}

fn equality_residual(p: &Problem, pt: &Point<'_>) -> Result<Vec<f64>> {
    p.constraints[..p.equality_count()].iter().map(|c| c.eval(pt)).collect()
}

fn project(p: &Problem, t: f64, x: &[f64], mut u: Vec<f64>) -> Option<Vec<f64>> {
    let m = p.equality_count();
    let wrt = control_vars(p.r);
    for _ in 0..PROJECTION_ITERATIONS {
        let pt = Point::new(t, x, &u);
        let res = equality_residual(p, &pt).ok()?;
        if grid::max_abs(res.iter().copied()) <= PROJECTION_TOLERANCE {
            break;
        }
        let jac: Vec<Vec<f64>> = p.constraints[..m]
            .iter()
            .map(|c| c.grad(&pt, &wrt))
            .collect::<Result<_>>()
            .ok()?;
        let mut jjt = Vec::with_capacity(m * m);
        for a in &jac {
            for b in &jac {
                jjt.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
            }
        }
        let w = linalg::solve(jjt, res.iter().map(|v| -v).collect()).ok()?;
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += (0..m).map(|j| jac[j][i] * w[j]).sum::<f64>();
        }
    }
    let pt = Point::new(t, x, &u);
    let res = equality_residual(p, &pt).ok()?;
    if !(grid::max_abs(res.iter().copied()) <= PROJECTION_TOLERANCE * 1e3) {
        return None;
    }
    for c in &p.constraints[m..] {
        if !(c.eval(&pt).ok()? >= 0.0) {
            return None;
        }
    }
    if p.fields().any(|f| f.eval(&pt).is_err()) {
        return None;
    }
    Some(u)
}
