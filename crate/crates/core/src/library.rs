//! Candidate function libraries.
//!
//! Columns are ordered: intercept, monomials by total degree then
//! lexicographic variable order, `sin(x_j)` for every variable, then
//! `cos(x_j)` for every variable.

use std::fmt;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sample_sd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryKind {
    Sin,
    Cos,
}

impl UnaryKind {
    fn label(self) -> &'static str {
        match self {
            UnaryKind::Sin => "sin",
            UnaryKind::Cos => "cos",
        }
    }
}

/// One column of a candidate library: a monomial, or a unary function of a
/// single state variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermDescriptor {
    exponents: Vec<u32>,
    func: Option<(UnaryKind, usize)>,
    name: String,
}

impl TermDescriptor {
    pub fn constant(dim: usize) -> Self {
        Self::monomial(vec![0; dim])
    }

    pub fn monomial(exponents: Vec<u32>) -> Self {
        let name = monomial_name(&exponents);
        Self {
            exponents,
            func: None,
            name,
        }
    }

    /// `x_{var+1}` raised to `power`.
    pub fn power(dim: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; dim];
        e[var] = power;
        Self::monomial(e)
    }

    /// Product of the listed (zero-based) variables, repeats allowed.
    pub fn product(dim: usize, vars: &[usize]) -> Self {
        let mut e = vec![0; dim];
        for &v in vars {
            e[v] += 1;
        }
        Self::monomial(e)
    }

    pub fn unary(dim: usize, kind: UnaryKind, var: usize) -> Self {
        Self {
            exponents: vec![0; dim],
            func: Some((kind, var)),
            name: format!("{}(x{})", kind.label(), var + 1),
        }
    }

    /// Parses a canonical name such as `1`, `x1^2*x3` or `sin(x2)`.
    pub fn parse(name: &str, dim: usize) -> Result<Self> {
        let s = name.trim();
        let bad = || Error::Parse(format!("bad term name `{name}` for {dim} variables"));
        let var_index = |v: &str| -> Result<usize> {
            let idx: usize = v
                .strip_prefix('x')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            if idx == 0 || idx > dim {
                return Err(bad());
            }
            Ok(idx - 1)
        };
        if s == "1" {
            return Ok(Self::constant(dim));
        }
        for kind in [UnaryKind::Sin, UnaryKind::Cos] {
            if let Some(inner) = s
                .strip_prefix(kind.label())
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
            {
                return Ok(Self::unary(dim, kind, var_index(inner)?));
            }
        }
        let mut e = vec![0u32; dim];
        for factor in s.split('*') {
            let (v, p) = match factor.split_once('^') {
                Some((v, p)) => (v, p.parse::<u32>().map_err(|_| bad())?),
                None => (factor, 1),
            };
            e[var_index(v)?] += p;
        }
        let t = Self::monomial(e);
        if t.name != s {
            return Err(bad());
        }
        Ok(t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn unary_fn(&self) -> Option<(UnaryKind, usize)> {
        self.func
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_constant(&self) -> bool {
        self.func.is_none() && self.exponents.iter().all(|&e| e == 0)
    }

    /// Total degree; unary terms count as degree 1.
    pub fn degree(&self) -> u32 {
        match self.func {
            Some(_) => 1,
            None => self.exponents.iter().sum(),
        }
    }

    pub fn eval(&self, state: &[f64]) -> f64 {
        match self.func {
            Some((UnaryKind::Sin, v)) => state[v].sin(),
            Some((UnaryKind::Cos, v)) => state[v].cos(),
            None => self
                .exponents
                .iter()
                .zip(state)
                .filter(|(e, _)| **e > 0)
                .map(|(e, x)| x.powi(*e as i32))
                .product(),
        }
    }
}

impl fmt::Display for TermDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn monomial_name(exponents: &[u32]) -> String {
    let factors: Vec<String> = exponents
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(j, &e)| match e {
            1 => format!("x{}", j + 1),
            _ => format!("x{}^{}", j + 1, e),
        })
        .collect();
    if factors.is_empty() {
        "1".to_string()
    } else {
        factors.join("*")
    }
}

/// The ordered term list of a full library.
pub fn library_terms(dim: usize, degree: u32, trig: bool) -> Vec<TermDescriptor> {
    let mut terms = vec![TermDescriptor::constant(dim)];
    for d in 1..=degree {
        for vars in (0..dim).combinations_with_replacement(d as usize) {
            terms.push(TermDescriptor::product(dim, &vars));
        }
    }
    if trig {
        for kind in [UnaryKind::Sin, UnaryKind::Cos] {
            terms.extend((0..dim).map(|j| TermDescriptor::unary(dim, kind, j)));
        }
    }
    terms
}

/// Binomial coefficient C(n, k).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Design matrix with its column descriptors and column standard deviations.
#[derive(Debug, Clone)]
pub struct CandidateLibrary {
    pub theta: DMatrix<f64>,
    pub terms: Vec<TermDescriptor>,
    /// Sample standard deviation of each column ((n - 1) denominator).
    pub scales: Vec<f64>,
    pub degree: u32,
    pub trig: bool,
}

impl CandidateLibrary {
    /// All monomials of total degree `<= degree` in the columns of `x`,
    /// plus `sin`/`cos` of each variable when `trig` is set.
    pub fn build(x: &DMatrix<f64>, degree: u32, trig: bool) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument("library degree must be >= 1".into()));
        }
        if x.nrows() < 1 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let terms = library_terms(x.ncols(), degree, trig);
        let mut lib = Self::from_terms(x, terms)?;
        lib.degree = degree;
        lib.trig = trig;
        Ok(lib)
    }

    /// Library with an explicit term list, evaluated on `x`.
    pub fn from_terms(x: &DMatrix<f64>, terms: Vec<TermDescriptor>) -> Result<Self> {
        let (n, m) = x.shape();
        if let Some(t) = terms.iter().find(|t| t.dim() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: t.dim(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
        let theta = DMatrix::from_fn(n, terms.len(), |i, k| terms[k].eval(&rows[i]));
        let scales = theta
            .column_iter()
            .map(|c| sample_sd(c.as_slice()))
            .collect();
        let degree = terms.iter().map(|t| t.degree()).max().unwrap_or(0);
        let trig = terms.iter().any(|t| t.unary_fn().is_some());
        Ok(Self {
            theta,
            terms,
            scales,
            degree,
            trig,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name().to_string()).collect()
    }

    pub fn index_of(&self, term: &TermDescriptor) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn intercept_index(&self) -> Option<usize> {
        self.terms.iter().position(|t| t.is_constant())
    }

    /// Library restricted to the given columns, in the given order.
    pub fn subset(&self, cols: &[usize]) -> Self {
        let theta = crate::linalg::select_columns(&self.theta, cols);
        let terms: Vec<_> = cols.iter().map(|&k| self.terms[k].clone()).collect();
        let scales = cols.iter().map(|&k| self.scales[k]).collect();
        let degree = terms.iter().map(|t| t.degree()).max().unwrap_or(0);
        Self {
            theta,
            terms,
            scales,
            degree,
            trig: self.trig,
        }
    }

    /// Rebuilds the library up to the highest degree present in `support`
    /// (unary terms count as degree 1), keeping the unary terms if this
    /// library has them.
    pub fn refine(&self, support: &[TermDescriptor], x: &DMatrix<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        if let Some(t) = support.iter().find(|t| self.index_of(t).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "term `{t}` is not in the library"
            )));
        }
        let d1 = support.iter().map(|t| t.degree()).max().unwrap_or(1).max(1);
        Self::build(x, d1, self.trig)
    }

    /// Ordered term names as a JSON array.
    pub fn names_json(&self) -> String {
        serde_json::to_string(&self.names()).expect("strings always serialise")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |i, j| {
            ((i * 7 + j * 3) as f64 * 0.37).sin() * 2.0 + j as f64
        })
    }

    #[test]
    fn lorenz_sized_libraries() {
        let x = data(30, 3);
        assert_eq!(CandidateLibrary::build(&x, 5, false).unwrap().n_terms(), 56);
        assert_eq!(CandidateLibrary::build(&x, 5, true).unwrap().n_terms(), 62);
    }

    #[test]
    fn smallest_library() {
        let lib = CandidateLibrary::build(&data(5, 1), 1, false).unwrap();
        assert_eq!(lib.names(), vec!["1", "x1"]);
        assert_eq!(lib.scales[0], 0.0);
    }

    #[test]
    fn ordering_is_degree_then_lex() {
        let names: Vec<_> = library_terms(3, 2, true)
            .into_iter()
            .map(|t| t.name().to_string())
            .collect();
        assert_eq!(
            names,
            [
                "1", "x1", "x2", "x3", "x1^2", "x1*x2", "x1*x3", "x2^2", "x2*x3", "x3^2",
                "sin(x1)", "sin(x2)", "sin(x3)", "cos(x1)", "cos(x2)", "cos(x3)"
            ]
        );
    }

    #[test]
    fn counts_match_closed_form() {
        for m in 1..=4usize {
            for d in 1..=6u32 {
                for trig in [false, true] {
                    let p = library_terms(m, d, trig).len() as u64;
                    let unary = if trig { 2 * m as u64 } else { 0 };
                    assert_eq!(p, binomial((m as u64) + d as u64, d as u64) + unary);
                }
            }
        }
    }

    #[test]
    fn refine_to_support_degree() {
        let x = data(40, 3);
        let lib = CandidateLibrary::build(&x, 5, false).unwrap();
        let support = [
            TermDescriptor::product(3, &[0, 1]),
            TermDescriptor::power(3, 2, 1),
        ];
        let refined = lib.refine(&support, &x).unwrap();
        assert_eq!(refined.n_terms(), 10);

        let trig = CandidateLibrary::build(&x, 5, true).unwrap();
        let support = [
            TermDescriptor::unary(3, UnaryKind::Sin, 1),
            TermDescriptor::power(3, 0, 1),
        ];
        let refined = trig.refine(&support, &x).unwrap();
        let by_enumeration = library_terms(3, 1, false).len() + 2 * 3;
        assert_eq!(refined.n_terms(), by_enumeration);
        assert_eq!(refined.n_terms(), 10);

        let support = [TermDescriptor::product(3, &[0, 0, 1, 2, 2])];
        let refined = lib.refine(&support, &x).unwrap();
        assert_eq!(refined.names(), lib.names());

        assert!(matches!(lib.refine(&[], &x), Err(Error::EmptySupport)));
    }

    #[test]
    fn names_parse_back() {
        for t in library_terms(3, 4, true) {
            assert_eq!(TermDescriptor::parse(t.name(), 3).unwrap(), t);
        }
        assert!(TermDescriptor::parse("x4", 3).is_err());
        assert!(TermDescriptor::parse("x3*x1", 3).is_err());
    }

    #[test]
    fn columns_match_descriptors() {
        let x = data(25, 3);
        let lib = CandidateLibrary::build(&x, 3, true).unwrap();
        for (k, t) in lib.terms.iter().enumerate() {
            for i in 0..x.nrows() {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                assert_eq!(lib.theta[(i, k)], t.eval(&row));
            }
        }
    }
}
