use rand::Rng;

use crate::error::{Error, Result};
use crate::library::{TermDescriptor, UnaryKind};
use crate::seed;

pub const SYSTEM_NAMES: [&str; 7] = [
    "lorenz",
    "thomas",
    "rossler",
    "dadras",
    "aizawa",
    "sprott",
    "halvorsen",
];

/// An autonomous polynomial/trigonometric vector field written as a sparse
/// combination of library terms, one term list per equation.
#[derive(Debug, Clone)]
pub struct DynamicalSystem {
    pub name: String,
    pub dim: usize,
    pub params: Vec<(String, f64)>,
    pub equations: Vec<Vec<(TermDescriptor, f64)>>,
    pub ic_ranges: Vec<(f64, f64)>,
    /// Sampling step used by the benchmark experiments.
    pub default_dt: f64,
}

impl DynamicalSystem {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Ground-truth term set of every equation.
    pub fn truth(&self) -> Vec<Vec<TermDescriptor>> {
        self.equations
            .iter()
            .map(|eq| {
                eq.iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|(t, _)| t.clone())
                    .collect()
            })
            .collect()
    }

    /// True coefficient of `term` in equation `eq` (0 when absent).
    pub fn coefficient(&self, eq: usize, term: &TermDescriptor) -> f64 {
        self.equations[eq]
            .iter()
            .filter(|(t, _)| t == term)
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        for (out, eq) in dx.iter_mut().zip(&self.equations) {
            *out = eq.iter().map(|(t, c)| c * t.eval(x)).sum();
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dim];
        self.rhs(x, &mut dx);
        dx
    }

    /// Lorenz with arbitrary parameters.
    pub fn lorenz(sigma: f64, rho: f64, zeta: f64) -> Self {
        let x = |j| TermDescriptor::power(3, j, 1);
        let xx = |a, b| TermDescriptor::product(3, &[a, b]);
        Self {
            name: "lorenz".into(),
            dim: 3,
            params: vec![
                ("sigma".into(), sigma),
                ("rho".into(), rho),
                ("zeta".into(), zeta),
            ],
            equations: vec![
                vec![(x(0), -sigma), (x(1), sigma)],
                vec![(x(0), rho), (x(1), -1.0), (xx(0, 2), -1.0)],
                vec![(xx(0, 1), 1.0), (x(2), -zeta)],
            ],
            ic_ranges: vec![(-15.0, 15.0), (-15.0, 15.0), (10.0, 40.0)],
            default_dt: 0.001,
        }
    }
}

fn x(j: usize) -> TermDescriptor {
    TermDescriptor::power(3, j, 1)
}

fn prod(vars: &[usize]) -> TermDescriptor {
    TermDescriptor::product(3, vars)
}

fn one() -> TermDescriptor {
    TermDescriptor::constant(3)
}

fn sys(
    name: &str,
    params: &[(&str, f64)],
    equations: Vec<Vec<(TermDescriptor, f64)>>,
    ic_ranges: [(f64, f64); 3],
) -> DynamicalSystem {
    DynamicalSystem {
        name: name.into(),
        dim: 3,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        equations,
        ic_ranges: ic_ranges.to_vec(),
        default_dt: 0.01,
    }
}

/// One of the seven benchmark systems by name.
pub fn builtin_system(name: &str) -> Result<DynamicalSystem> {
    let s = match name.to_ascii_lowercase().as_str() {
        "lorenz" => DynamicalSystem::lorenz(10.0, 28.0, 8.0 / 3.0),
        "thomas" => {
            let a = 0.208186;
            let sin = |j| TermDescriptor::unary(3, UnaryKind::Sin, j);
            sys(
                "thomas",
                &[("a", a)],
                vec![
                    vec![(sin(1), 1.0), (x(0), -a)],
                    vec![(sin(2), 1.0), (x(1), -a)],
                    vec![(sin(0), 1.0), (x(2), -a)],
                ],
                [(-1.0, 1.0); 3],
            )
        }
        "rossler" | "rössler" => {
            let (a, b, c) = (0.2, 0.2, 5.7);
            sys(
                "rossler",
                &[("a", a), ("b", b), ("c", c)],
                vec![
                    vec![(x(1), -1.0), (x(2), -1.0)],
                    vec![(x(0), 1.0), (x(1), a)],
                    vec![(one(), b), (prod(&[0, 2]), 1.0), (x(2), -c)],
                ],
                [(-10.0, 10.0), (-10.0, 10.0), (0.0, 20.0)],
            )
        }
        "dadras" => {
            let (a, b, c, d, e) = (3.0, 2.7, 1.7, 2.0, 9.0);
            sys(
                "dadras",
                &[("a", a), ("b", b), ("c", c), ("d", d), ("e", e)],
                vec![
                    vec![(x(1), 1.0), (x(0), -a), (prod(&[1, 2]), b)],
                    vec![(x(1), c), (prod(&[0, 2]), -1.0), (x(2), 1.0)],
                    vec![(prod(&[0, 1]), d), (x(2), -e)],
                ],
                [(-4.0, 4.0); 3],
            )
        }
        "aizawa" => {
            let (a, b, c, d, e, f) = (0.95, 0.7, 0.65, 3.5, 0.25, 0.1);
            sys(
                "aizawa",
                &[("a", a), ("b", b), ("c", c), ("d", d), ("e", e), ("f", f)],
                vec![
                    vec![(x(1), -d), (x(0), -b), (prod(&[0, 2]), 1.0)],
                    vec![(x(0), d), (x(1), -b), (prod(&[1, 2]), 1.0)],
                    vec![
                        (x(2), a),
                        (one(), c),
                        (prod(&[0, 0, 0, 2]), f),
                        (prod(&[2, 2, 2]), -1.0 / 3.0),
                        (prod(&[0, 0, 2]), -e),
                        (prod(&[1, 1, 2]), -e),
                        (prod(&[0, 0]), -1.0),
                        (prod(&[1, 1]), -1.0),
                    ],
                ],
                [(-2.0, 2.0), (-2.0, 2.0), (-1.0, 2.0)],
            )
        }
        "sprott" => {
            let (a, b) = (2.07, 1.79);
            sys(
                "sprott",
                &[("a", a), ("b", b)],
                vec![
                    vec![(x(1), 1.0), (prod(&[0, 1]), a), (prod(&[0, 2]), 1.0)],
                    vec![(one(), 1.0), (prod(&[0, 0]), -b), (prod(&[1, 2]), 1.0)],
                    vec![(x(0), 1.0), (prod(&[0, 0]), -1.0), (prod(&[1, 1]), -1.0)],
                ],
                [(-1.0, 1.0); 3],
            )
        }
        "halvorsen" => {
            let a = 1.89;
            sys(
                "halvorsen",
                &[("a", a)],
                vec![
                    vec![
                        (x(0), -a),
                        (x(1), -4.0),
                        (x(2), -4.0),
                        (prod(&[1, 1]), -1.0),
                    ],
                    vec![
                        (x(1), -a),
                        (x(2), -4.0),
                        (x(0), -4.0),
                        (prod(&[2, 2]), -1.0),
                    ],
                    vec![
                        (x(2), -a),
                        (x(0), -4.0),
                        (x(1), -4.0),
                        (prod(&[0, 0]), -1.0),
                    ],
                ],
                [(-4.0, 4.0); 3],
            )
        }
        _ => {
            return Err(Error::UnknownSystem {
                name: name.to_string(),
                valid: SYSTEM_NAMES.join(", "),
            })
        }
    };
    Ok(s)
}

/// Initial state drawn uniformly from the system's ranges.
pub fn sample_initial_condition(sys: &DynamicalSystem, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    sys.ic_ranges
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..hi))
        .collect()
}
