//! Built-in problems with their symmetry families and conservation laws.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Params, Point, ScalarField};
use crate::noether;
use crate::ocp::{Problem, Sample, Sense};
use crate::pmp::{self, Multipliers};
use crate::solver::Seeds;
use crate::symmetry::{self, SymmetryFamily};

pub const NAMES: [&str; 3] = ["exhaustible-resource", "quadratic-translation", "autonomous-energy"];

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_2004;

/// Points drawn by the load-time self test.
pub const SELF_TEST_POINTS: usize = 100;

/// Invariance residual bound enforced at load.
pub const SELF_TEST_TOLERANCE: f64 = 1e-9;

type Sampler = fn(&mut ChaCha8Rng, &Problem, &Params) -> Sample;
type LawFn = fn(&Params, &Point<'_>, &Multipliers, f64) -> f64;

/// A closed-form conserved quantity, kept as documentation and as an
/// independent evaluation of the charge.
#[derive(Debug, Clone)]
pub struct DocumentedLaw {
    pub family: String,
    pub display: String,
    params: Params,
    charge: LawFn,
}

impl DocumentedLaw {
    /// The law's quantity at a node; `H` is computed from `p`.
    pub fn evaluate(&self, p: &Problem, pt: &Point<'_>, c: &Multipliers) -> Result<f64> {
        let h = pmp::hamiltonian(p, pt, c)?;
        Ok((self.charge)(&self.params, pt, c, h))
    }
}

#[derive(Debug, Clone)]
pub struct ExampleEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Params,
    pub problem: Problem,
    pub families: Vec<SymmetryFamily>,
    pub laws: Vec<DocumentedLaw>,
    /// Initial costate guess for shooting.
    pub psi_a_guess: Vec<f64>,
    pub seeds: Seeds,
    sampler: Sampler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub identity_defect: f64,
    /// Worst invariance residual per family, in family order.
    pub invariance: Vec<(String, f64)>,
}

impl ExampleEntry {
    pub fn family(&self, name: &str) -> Option<&SymmetryFamily> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn law_for(&self, family: &str) -> Option<&DocumentedLaw> {
        self.laws.iter().find(|l| l.family == family)
    }

    /// Random feasible points, reproducible from `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (self.sampler)(&mut rng, &self.problem, &self.params))
            .collect()
    }

    /// `h⁰ = id` and pointwise invariance for every family.
    pub fn self_test(&self, seed: u64) -> Result<SelfTest> {
        let pts = self.sample_points(SELF_TEST_POINTS, seed);
        let mut identity_defect: f64 = 0.0;
        let mut invariance = Vec::new();
        for f in &self.families {
            let d = f.identity_defect(&pts)?;
            if !(d <= 1e-12) {
                return Err(Error::ToleranceExceeded {
                    what: "identity defect at s = 0",
                    value: d,
                    tolerance: 1e-12,
                });
            }
            identity_defect = identity_defect.max(d);
            let report = symmetry::pointwise_invariance(&self.problem, f, &pts, &f.default_samples())?;
            let worst = report.max_norm();
            if !(worst <= SELF_TEST_TOLERANCE) {
                return Err(Error::ToleranceExceeded {
                    what: "invariance residual",
                    value: worst,
                    tolerance: SELF_TEST_TOLERANCE,
                });
            }
            invariance.push((f.name.clone(), worst));
        }
        Ok(SelfTest {
            identity_defect,
            invariance,
        })
    }

    /// Checks that a documented law agrees with `ψ·ξ - H·τ` at a node.
    pub fn law_matches_charge(&self, family: &str, pt: &Point<'_>, c: &Multipliers) -> Result<f64> {
        let f = self.family(family).ok_or_else(|| Error::NotFound(family.to_string()))?;
        let law = self
            .law_for(family)
            .ok_or_else(|| Error::NotFound(alloc::format!("law for `{family}`")))?;
        let q = noether::charge(&self.problem, &f.generator(), pt, c)?;
        Ok((law.evaluate(&self.problem, pt, c)? - q).abs())
    }
}

pub fn list() -> Vec<&'static str> {
    NAMES.to_vec()
}

pub fn get(name: &str) -> Result<ExampleEntry> {
    get_with(name, &Params::new())
}

/// Looks up an entry, overriding some of its default parameters.
pub fn get_with(name: &str, overrides: &Params) -> Result<ExampleEntry> {
    let (defaults, build): (Params, fn(Params) -> Result<ExampleEntry>) = match name {
        "exhaustible-resource" => (resource_defaults(), exhaustible_resource),
        "autonomous-energy" => (resource_defaults(), autonomous_energy),
        "quadratic-translation" => (quadratic_defaults(), quadratic_translation),
        _ => return Err(Error::NotFound(name.to_string())),
    };
    let mut params = defaults;
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::Invalid(alloc::format!("`{name}` has no parameter `{k}`")));
        }
        params.insert(k.clone(), *v);
    }
    build(params)
}

/// Every entry, each passing its self test.
pub fn load() -> Result<Vec<ExampleEntry>> {
    NAMES
        .iter()
        .map(|n| {
            let e = get(n)?;
            e.self_test(DEFAULT_SEED)?;
            Ok(e)
        })
        .collect()
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    libm::exp(rng.gen_range(libm::log(lo)..libm::log(hi)))
}

fn resource_defaults() -> Params {
    params(&[
        ("gamma", 0.5),
        ("alpha", 0.25),
        ("beta", 0.25),
        ("x0", 1.0),
        ("xT", 0.5),
        ("T", 1.0),
    ])
}

fn resource_problem(p: &Params) -> Result<Problem> {
    let f = |src: &str| ScalarField::parse(src, 1, 2, p);
    Ok(Problem {
        n: 1,
        r: 2,
        m: 1,
        m_ineq: 0,
        cost: f("u1^gamma")?,
        dynamics: vec![f("-u2")?],
        constraints: vec![f("x1^(alpha*gamma) * u2^(beta*gamma) - u1^gamma")?],
        a: 0.0,
        b: p["T"],
        x_a: vec![p["x0"]],
        x_b: vec![p["xT"]],
        sense: Sense::Maximize,
    })
}

/// `x, u2` log-uniform in `[0.1, 10]`, `u1` on the constraint surface.
fn resource_sampler(rng: &mut ChaCha8Rng, prob: &Problem, p: &Params) -> Sample {
    let t = rng.gen_range(prob.a..prob.b);
    let x = log_uniform(rng, 0.1, 10.0);
    let u2 = log_uniform(rng, 0.1, 10.0);
    let u1 = libm::pow(x, p["alpha"]) * libm::pow(u2, p["beta"]);
    Sample::new(t, vec![x], vec![u1, u2])
}

fn time_translation(n: usize, r: usize, p: &Params) -> Result<SymmetryFamily> {
    let xs: Vec<String> = (1..=n).map(|i| alloc::format!("x{i}")).collect();
    let us: Vec<String> = (1..=r).map(|i| alloc::format!("u{i}")).collect();
    let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
    let us: Vec<&str> = us.iter().map(String::as_str).collect();
    SymmetryFamily::parse("time-translation", "t + s", &xs, &us, n, r, p, f64::INFINITY)?.with_generator(
        "1",
        &vec!["0"; n],
        &vec!["0"; r],
        p,
    )
}

fn energy_law(p: &Params) -> DocumentedLaw {
    DocumentedLaw {
        family: "time-translation".into(),
        display: "H = constant".into(),
        params: p.clone(),
        charge: |_, _, _, h| -h,
    }
}

fn exhaustible_resource(p: Params) -> Result<ExampleEntry> {
    let problem = resource_problem(&p)?;
    let scaling = SymmetryFamily::parse(
        "scaling",
        "exp(-gamma*(alpha+beta)*s) * t",
        &["exp((1-beta*gamma)*s) * x1"],
        &["exp((alpha+beta)*s) * u1", "exp((alpha*gamma+1)*s) * u2"],
        1,
        2,
        &p,
        f64::INFINITY,
    )?
    .with_generator(
        "-gamma*(alpha+beta)*t",
        &["(1-beta*gamma)*x1"],
        &["(alpha+beta)*u1", "(alpha*gamma+1)*u2"],
        &p,
    )?;
    let law = DocumentedLaw {
        family: "scaling".into(),
        display: "(1-beta*gamma)*psi(t)*x(t) + gamma*H*(alpha+beta)*t = constant".into(),
        params: p.clone(),
        charge: |p, pt, c, h| {
            let (g, a, b) = (p["gamma"], p["alpha"], p["beta"]);
            (1.0 - b * g) * c.psi[0] * pt.x[0] + g * h * (a + b) * pt.t
        },
    };
    Ok(ExampleEntry {
        name: "exhaustible-resource",
        summary: "max ∫ u1^γ dt, ẋ = -u2, x^(αγ) u2^(βγ) = u1^γ, fixed endpoints",
        families: vec![scaling, time_translation(1, 2, &p)?],
        laws: vec![law, energy_law(&p)],
        psi_a_guess: vec![-0.2],
        seeds: Seeds {
            u: vec![1.0, 1.0],
            lambda: vec![-1.0],
        },
        sampler: resource_sampler,
        problem,
        params: p,
    })
}

fn autonomous_energy(p: Params) -> Result<ExampleEntry> {
    let base = exhaustible_resource(p)?;
    Ok(ExampleEntry {
        name: "autonomous-energy",
        summary: "the exhaustible-resource problem under time translation T = t + s",
        families: vec![time_translation(1, 2, &base.params)?],
        laws: vec![energy_law(&base.params)],
        ..base
    })
}

fn quadratic_defaults() -> Params {
    params(&[("x0", 0.0), ("xT", 1.0), ("T", 1.0)])
}

fn quadratic_translation(p: Params) -> Result<ExampleEntry> {
    let f = |src: &str| ScalarField::parse(src, 1, 1, &p);
    let problem = Problem {
        n: 1,
        r: 1,
        m: 0,
        m_ineq: 0,
        cost: f("u1^2")?,
        dynamics: vec![f("u1")?],
        constraints: vec![],
        a: 0.0,
        b: p["T"],
        x_a: vec![p["x0"]],
        x_b: vec![p["xT"]],
        sense: Sense::Minimize,
    };
    let translation = SymmetryFamily::parse("translation", "t", &["x1 + s"], &["u1"], 1, 1, &p, f64::INFINITY)?
        .with_generator("0", &["1"], &["0"], &p)?;
    let law = DocumentedLaw {
        family: "translation".into(),
        display: "psi = constant".into(),
        params: p.clone(),
        charge: |_, _, c, _| c.psi[0],
    };
    Ok(ExampleEntry {
        name: "quadratic-translation",
        summary: "min ∫ u² dt, ẋ = u, x(0) = 0, x(1) = 1",
        families: vec![translation, time_translation(1, 1, &p)?],
        laws: vec![law, energy_law(&p)],
        psi_a_guess: vec![0.0],
        seeds: Seeds {
            u: vec![0.0],
            lambda: vec![],
        },
        sampler: |rng, prob, _| {
            let t = rng.gen_range(prob.a..prob.b);
            Sample::new(t, vec![rng.gen_range(-2.0..2.0)], vec![rng.gen_range(-2.0..2.0)])
        },
        problem,
        params: p,
    })
}
