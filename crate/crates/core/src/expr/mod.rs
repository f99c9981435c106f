//! Scalar expressions over `(t, x, u)` (and `s` for transformation maps)
//! with forward-mode first derivatives.
//!
//! Grammar: real literals; variables `t`, `x1..xn`, `u1..ur` (plus `s` when
//! parsing family maps); parameter names; binary `+ - * / ^`; unary `-`;
//! `exp(a)`, `log(a)`, `pow(a, b)`; parentheses. `^` is right-associative and
//! binds tighter than unary minus.

mod dual;
mod parser;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use dual::Dual;
use dual::Number;

use crate::error::{Error, Result};

/// Named real parameters bound into an expression at parse time.
pub type Params = BTreeMap<String, f64>;

/// An independent variable of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    /// Zero-based state index.
    X(usize),
    /// Zero-based control index.
    U(usize),
    S,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::U(i) => write!(f, "u{}", i + 1),
            Var::S => f.write_str("s"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub n: usize,
    pub r: usize,
    /// Whether the group parameter `s` is admitted.
    pub with_s: bool,
}

/// A point `(t, x, u)` with an optional group parameter `s`.
///
/// Also used as a tangent direction for [`ScalarField::eval_dual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub u: &'a [f64],
    pub s: f64,
}

impl<'a> Point<'a> {
    pub fn new(t: f64, x: &'a [f64], u: &'a [f64]) -> Self {
        Point { t, x, u, s: 0.0 }
    }

    pub fn with_s(self, s: f64) -> Self {
        Point { s, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Param { name: String, value: f64 },
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(v) => write!(f, "{v}"),
            Node::Param { name, .. } => f.write_str(name),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
        }
    }
}

impl Node {
    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Node::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Node::Const(_) | Node::Param { .. } => {}
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) => a.visit_vars(out),
            Node::Binary(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
        }
    }
}

struct Env<'a, N> {
    t: N,
    x: &'a [N],
    u: &'a [N],
    s: N,
}

fn domain(node: &Node, reason: &'static str) -> Error {
    Error::Domain {
        expr: node.to_string(),
        reason,
    }
}

fn finite<N: Number>(node: &Node, v: N) -> Result<N> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(node, "non-finite result"))
    }
}

fn eval_node<N: Number>(node: &Node, env: &Env<'_, N>) -> Result<N> {
    match node {
        Node::Const(v) => Ok(N::constant(*v)),
        Node::Param { value, .. } => Ok(N::constant(*value)),
        Node::Var(Var::T) => Ok(env.t),
        Node::Var(Var::S) => Ok(env.s),
        Node::Var(Var::X(i)) => Ok(env.x[*i]),
        Node::Var(Var::U(i)) => Ok(env.u[*i]),
        Node::Neg(a) => Ok(-eval_node(a, env)?),
        Node::Exp(a) => finite(node, eval_node(a, env)?.exp()),
        Node::Log(a) => {
            let a = eval_node(a, env)?;
            if a.value() <= 0.0 {
                return Err(domain(node, "logarithm of a non-positive number"));
            }
            finite(node, a.ln())
        }
        Node::Binary(op, a, b) => {
            let a = eval_node(a, env)?;
            let b = eval_node(b, env)?;
            match op {
                BinOp::Add => finite(node, a + b),
                BinOp::Sub => finite(node, a - b),
                BinOp::Mul => finite(node, a * b),
                BinOp::Div => {
                    if b.value() == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    finite(node, a / b)
                }
                BinOp::Pow => power(node, a, b),
            }
        }
    }
}

fn power<N: Number>(node: &Node, base: N, exponent: N) -> Result<N> {
    let (bv, ev) = (base.value(), exponent.value());
    if bv > 0.0 {
        return finite(node, base.pow_positive(exponent));
    }
    if libm::trunc(ev) != ev {
        return Err(domain(node, "non-integer power of a non-positive base"));
    }
    if exponent.has_tangent() {
        return Err(domain(node, "exponent derivative undefined for a non-positive base"));
    }
    if bv == 0.0 && ev < 0.0 {
        return Err(domain(node, "negative power of zero"));
    }
    finite(node, base.pow_integer(ev))
}

/// A parsed, differentiable scalar expression.
///
/// Immutable after construction: parameters are substituted at parse time,
/// so re-parameterizing means parsing again.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    source: String,
    arity: Arity,
    params: Params,
    root: Node,
}

impl ScalarField {
    /// Parses an expression over `(t, x1..xn, u1..ur)`.
    pub fn parse(text: &str, n: usize, r: usize, params: &Params) -> Result<Self> {
        Self::parse_with(text, Arity { n, r, with_s: false }, params)
    }

    /// Parses a transformation map over `(t, x, u, s)`.
    pub fn parse_family_map(text: &str, n: usize, r: usize, params: &Params) -> Result<Self> {
        Self::parse_with(text, Arity { n, r, with_s: true }, params)
    }

    pub fn parse_with(text: &str, arity: Arity, params: &Params) -> Result<Self> {
        if let Some(name) = params.keys().find(|k| parser::is_reserved(k, arity)) {
            return Err(Error::ReservedParameter(name.clone()));
        }
        let root = parser::Parser::new(text, arity, params)?.parse()?;
        Ok(ScalarField {
            source: text.to_string(),
            arity,
            params: params.clone(),
            root,
        })
    }

    /// A constant field.
    pub fn constant(value: f64, n: usize, r: usize) -> Self {
        ScalarField {
            source: alloc::format!("{value}"),
            arity: Arity { n, r, with_s: false },
            params: Params::new(),
            root: Node::Const(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Canonical, fully parenthesized text that re-parses to the same field.
    pub fn print(&self) -> String {
        self.root.to_string()
    }

    /// Variables the expression references, in first-occurrence order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.root.visit_vars(&mut out);
        out
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.variables().contains(&var)
    }

    pub fn depends_on_control(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::U(_)))
    }

    fn check_point(&self, pt: &Point<'_>) -> Result<()> {
        if pt.x.len() != self.arity.n {
            return Err(Error::ArityMismatch {
                what: "state".to_string(),
                expected: self.arity.n,
                found: pt.x.len(),
            });
        }
        if pt.u.len() != self.arity.r {
            return Err(Error::ArityMismatch {
                what: "control".to_string(),
                expected: self.arity.r,
                found: pt.u.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, pt: &Point<'_>) -> Result<f64> {
        self.check_point(pt)?;
        let env = Env {
            t: pt.t,
            x: pt.x,
            u: pt.u,
            s: pt.s,
        };
        eval_node(&self.root, &env)
    }

    /// Value and directional derivative along `dir` in one dual pass.
    pub fn eval_dual(&self, pt: &Point<'_>, dir: &Point<'_>) -> Result<Dual> {
        self.check_point(pt)?;
        self.check_point(dir)?;
        let x: Vec<Dual> = pt.x.iter().zip(dir.x).map(|(&v, &d)| Dual::new(v, d)).collect();
        let u: Vec<Dual> = pt.u.iter().zip(dir.u).map(|(&v, &d)| Dual::new(v, d)).collect();
        let env = Env {
            t: Dual::new(pt.t, dir.t),
            x: &x,
            u: &u,
            s: Dual::new(pt.s, dir.s),
        };
        eval_node(&self.root, &env)
    }

    /// Partial derivative with respect to a single variable.
    pub fn partial(&self, pt: &Point<'_>, var: Var) -> Result<f64> {
        let mut dx = alloc::vec![0.0; pt.x.len()];
        let mut du = alloc::vec![0.0; pt.u.len()];
        let mut dir = Point {
            t: 0.0,
            x: &[],
            u: &[],
            s: 0.0,
        };
        match var {
            Var::T => dir.t = 1.0,
            Var::S => dir.s = 1.0,
            Var::X(i) => {
                if i >= dx.len() {
                    return Err(out_of_range(var));
                }
                dx[i] = 1.0
            }
            Var::U(i) => {
                if i >= du.len() {
                    return Err(out_of_range(var));
                }
                du[i] = 1.0
            }
        }
        dir.x = &dx;
        dir.u = &du;
        Ok(self.eval_dual(pt, &dir)?.deriv)
    }

    /// Partial derivatives with respect to each variable in `wrt`, one dual
    /// pass per variable.
    pub fn grad(&self, pt: &Point<'_>, wrt: &[Var]) -> Result<Vec<f64>> {
        wrt.iter().map(|&v| self.partial(pt, v)).collect()
    }
}

fn out_of_range(var: Var) -> Error {
    Error::UnknownIdentifier {
        name: var.to_string(),
        position: 0,
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

/// All `x` variables of an `n`-dimensional state.
pub fn state_vars(n: usize) -> Vec<Var> {
    (0..n).map(Var::X).collect()
}

/// All `u` variables of an `r`-dimensional control.
pub fn control_vars(r: usize) -> Vec<Var> {
    (0..r).map(Var::U).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn at(f: &ScalarField, t: f64, x: &[f64], u: &[f64]) -> Result<f64> {
        f.eval(&Point::new(t, x, u))
    }

    #[test]
    fn square_root_of_control() {
        let f = ScalarField::parse("u1^0.5", 1, 2, &Params::new()).unwrap();
        assert_eq!(at(&f, 0.0, &[1.0], &[4.0, 0.0]).unwrap(), 2.0);
        assert_eq!(at(&f, 0.0, &[0.0], &[9.0, 0.0]).unwrap(), 3.0);
        let g = f.grad(&Point::new(0.0, &[1.0], &[4.0, 0.0]), &[Var::U(0)]).unwrap();
        assert_eq!(g, vec![0.25]);
    }

    #[test]
    fn resource_constraint_vanishes_on_unit_point() {
        let p = params(&[("a", 0.25), ("b", 0.25), ("g", 0.5)]);
        let f = ScalarField::parse("x1^(a*g) * u2^(b*g) - u1^g", 1, 2, &p).unwrap();
        assert_eq!(at(&f, 0.0, &[1.0], &[1.0, 1.0]).unwrap(), 0.0);
        let h = ScalarField::parse("x1^0.125 * u2^0.125", 1, 2, &Params::new()).unwrap();
        let g = h
            .grad(&Point::new(0.0, &[1.0], &[0.3, 1.0]), &[Var::X(0), Var::U(1)])
            .unwrap();
        assert_eq!(g, vec![0.125, 0.125]);
    }

    #[test]
    fn out_of_arity_variable_is_unknown() {
        let e = ScalarField::parse("x2 + 1", 1, 1, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::UnknownIdentifier { ref name, position: 0 } if name == "x2"));
        let e = ScalarField::parse("u3", 1, 2, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::UnknownIdentifier { .. }));
        let e = ScalarField::parse("s * t", 1, 1, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::UnknownIdentifier { ref name, .. } if name == "s"));
        assert!(ScalarField::parse_family_map("s * t", 1, 1, &Params::new()).is_ok());
    }

    #[test]
    fn syntax_errors_report_position_and_token() {
        let e = ScalarField::parse("1 + * 2", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 4, ref token, .. } if token == "*"));
        let e = ScalarField::parse("(t + 1", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 6, .. }));
        let e = ScalarField::parse("t $ 2", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 2, .. }));
        let e = ScalarField::parse("t 2", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 2, .. }));
        let e = ScalarField::parse("pow(t)", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(
            e,
            Error::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
        let e = ScalarField::parse("sin(t)", 0, 0, &Params::new()).unwrap_err();
        assert!(matches!(e, Error::UnknownIdentifier { .. }));
    }

    #[test]
    fn reserved_parameter_names_are_rejected() {
        let e = ScalarField::parse("t", 1, 0, &params(&[("x1", 1.0)])).unwrap_err();
        assert_eq!(e, Error::ReservedParameter("x1".into()));
        // `s` is an ordinary parameter name outside family maps
        assert!(ScalarField::parse("s*t", 0, 0, &params(&[("s", 2.0)])).is_ok());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Params::new();
        let cases = [
            ("2^3^2", 512.0),
            ("-2^2", -4.0),
            ("2^-1", 0.5),
            ("1 - 2 - 3", -4.0),
            ("8 / 4 / 2", 1.0),
            ("1 + 2 * 3", 7.0),
            ("pow(2, pow(3, 2))", 512.0),
            ("-(-3)", 3.0),
            ("exp(0) + log(1)", 1.0),
            ("1.5e1 + .5", 15.5),
            ("(-2)^3", -8.0),
        ];
        for (src, want) in cases {
            let f = ScalarField::parse(src, 0, 0, &e).unwrap();
            assert_eq!(at(&f, 0.0, &[], &[]).unwrap(), want, "{src}");
        }
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let f = ScalarField::parse("1 + log(u1)", 0, 1, &Params::new()).unwrap();
        let e = at(&f, 0.0, &[], &[0.0]).unwrap_err();
        assert!(matches!(e, Error::Domain { ref expr, .. } if expr == "log(u1)"));
        let f = ScalarField::parse("x1^0.5", 1, 0, &Params::new()).unwrap();
        assert!(matches!(at(&f, 0.0, &[-1.0], &[]), Err(Error::Domain { .. })));
        assert!(matches!(at(&f, 0.0, &[0.0], &[]), Err(Error::Domain { .. })));
        let f = ScalarField::parse("1/x1", 1, 0, &Params::new()).unwrap();
        assert!(matches!(at(&f, 0.0, &[0.0], &[]), Err(Error::Domain { .. })));
        let f = ScalarField::parse("exp(x1)", 1, 0, &Params::new()).unwrap();
        assert!(matches!(at(&f, 0.0, &[1000.0], &[]), Err(Error::Domain { .. })));
    }

    #[test]
    fn integer_exponent_on_negative_base() {
        let f = ScalarField::parse("x1^2", 1, 0, &Params::new()).unwrap();
        let pt = Point::new(0.0, &[-3.0], &[]);
        assert_eq!(f.eval(&pt).unwrap(), 9.0);
        assert_eq!(f.partial(&pt, Var::X(0)).unwrap(), -6.0);
        // exponent carries a derivative: undefined for a negative base
        let g = ScalarField::parse("x1^t", 1, 0, &Params::new()).unwrap();
        let pt = Point::new(2.0, &[-3.0], &[]);
        assert_eq!(g.eval(&pt).unwrap(), 9.0);
        assert!(g.partial(&pt, Var::T).is_err());
    }

    #[test]
    fn point_arity_is_checked() {
        let f = ScalarField::parse("x1", 1, 1, &Params::new()).unwrap();
        let e = at(&f, 0.0, &[1.0, 2.0], &[0.0]).unwrap_err();
        assert!(matches!(
            e,
            Error::ArityMismatch {
                expected: 1,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn variables_and_printing() {
        let f = ScalarField::parse_family_map("exp(-0.25*s)*t + x1", 1, 1, &Params::new()).unwrap();
        assert_eq!(f.variables(), vec![Var::S, Var::T, Var::X(0)]);
        assert!(!f.depends_on_control());
        let g = ScalarField::parse_family_map(&f.print(), 1, 1, &Params::new()).unwrap();
        let pt = Point::new(0.7, &[2.0], &[1.0]).with_s(0.3);
        assert_eq!(f.eval(&pt).unwrap(), g.eval(&pt).unwrap());
    }

    #[test]
    fn parameters_are_bound_at_parse_time() {
        let mut p = params(&[("k", 2.0)]);
        let f = ScalarField::parse("k*x1", 1, 0, &p).unwrap();
        p.insert("k".into(), 5.0);
        assert_eq!(at(&f, 0.0, &[3.0], &[]).unwrap(), 6.0);
        assert_eq!(f.print(), "(k * x1)");
    }
}
