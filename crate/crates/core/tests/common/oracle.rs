//! Reference solution of the resource extraction problem, built without the
//! library. Eliminating `u1 = x^α u2^β` and `u2 = -ẋ` leaves
//!
//! ```text
//! max ∫ x^a (-ẋ)^b dt,   a = αγ, b = βγ
//! ```
//!
//! whose Euler–Lagrange equation is `ẍ = -(a/b) ẋ² / x`. The two-point
//! problem is solved by bisection on `ẋ(0)` with an adaptive Dormand–Prince
//! integrator; multipliers follow from stationarity.

use ode_solvers::{Dopri5, OutputType, System, Vector2};

#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub x_t: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub t: f64,
    pub x: f64,
    pub u1: f64,
    pub u2: f64,
    pub psi: f64,
    pub lambda: f64,
}

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-14;

struct EulerLagrange {
    ratio: f64,
    floor: f64,
}

impl System<f64, Vector2<f64>> for EulerLagrange {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1];
        dy[1] = -self.ratio * y[1] * y[1] / y[0];
    }

    fn solout(&mut self, _t: f64, y: &Vector2<f64>, _dy: &Vector2<f64>) -> bool {
        y[0] <= self.floor
    }
}

impl Instance {
    pub fn acceptance() -> Self {
        Instance {
            gamma: 0.5,
            alpha: 0.25,
            beta: 0.25,
            x0: 1.0,
            x_t: 0.5,
            t_end: 1.0,
        }
    }

    fn a(&self) -> f64 {
        self.alpha * self.gamma
    }

    fn b(&self) -> f64 {
        self.beta * self.gamma
    }

    fn system(&self) -> EulerLagrange {
        // x decreases monotonically, so falling below x_T/2 means overshoot.
        EulerLagrange {
            ratio: self.a() / self.b(),
            floor: 0.5 * self.x_t,
        }
    }

    /// `(x, ẋ)` at `t1` starting from `(x, ẋ)` at `t0`; `None` on overshoot.
    fn advance(&self, t0: f64, t1: f64, y: Vector2<f64>) -> Option<Vector2<f64>> {
        // Sparse output: the last accepted step lands exactly on `t1`.
        let span = t1 - t0;
        let mut s = Dopri5::from_param(
            self.system(),
            t0,
            t1,
            span,
            y,
            RTOL,
            ATOL,
            0.9,
            0.04,
            0.2,
            10.0,
            span,
            0.0,
            100_000,
            1000,
            OutputType::Sparse,
        );
        s.integrate().ok()?;
        let (t, y) = (*s.x_out().last()?, *s.y_out().last()?);
        ((t - t1).abs() <= 1e-12 * t1.abs().max(1.0) && y[0] > 0.5 * self.x_t).then_some(y)
    }

    /// True when `ẋ(0) = v0` ends above the target.
    fn too_high(&self, v0: f64) -> bool {
        match self.advance(0.0, self.t_end, Vector2::new(self.x0, v0)) {
            Some(y) => y[0] > self.x_t,
            None => false,
        }
    }

    pub fn initial_slope(&self) -> f64 {
        let mut hi = -1e-9;
        let mut lo = -1.0;
        assert!(self.too_high(hi), "target not reachable from a slow start");
        while self.too_high(lo) {
            lo *= 2.0;
            assert!(lo > -1e6, "no overshooting slope found");
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.too_high(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn node(&self, t: f64, y: Vector2<f64>) -> Node {
        let (x, u2) = (y[0], -y[1]);
        let lambda = -1.0;
        Node {
            t,
            x,
            u1: x.powf(self.alpha) * u2.powf(self.beta),
            u2,
            psi: lambda * self.b() * x.powf(self.a()) * u2.powf(self.b() - 1.0),
            lambda,
        }
    }

    /// The reference extremal at each grid time (grid starts at 0).
    pub fn sample(&self, grid: &[f64]) -> Vec<Node> {
        let mut y = Vector2::new(self.x0, self.initial_slope());
        let mut out = vec![self.node(grid[0], y)];
        for w in grid.windows(2) {
            y = self.advance(w[0], w[1], y).expect("reference arc leaves the domain");
            out.push(self.node(w[1], y));
        }
        out
    }
}
