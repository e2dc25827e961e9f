//! Concrete instances: the Mermin–Peres magic square with its Pauli operator
//! solution, linear systems over `Z_p`, and bounded-width fixture languages
//! with a random instance generator.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::csp::{Constraint, CspError, Instance, Language, Relation, ValueSet};
use crate::operators::{CMatrix, OperatorAssignment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GapError {
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("equation {0} references an unknown variable index")]
    BadIndex(usize),
    #[error(transparent)]
    Csp(#[from] CspError),
}

/// `R_{3,a} = {(x,y,z) : x + y + z = a (mod p)}`.
pub fn r3(p: usize, a: usize) -> Relation {
    Relation::from_predicate(p, 3, |t| t.iter().sum::<usize>() % p == a % p)
}

/// `R_{p+2} = {(a_1..a_{p+2}) : Σ a_i = 0 (mod p)}`.
pub fn r_p_plus_2(p: usize) -> Relation {
    Relation::from_predicate(p, p + 2, |t| t.iter().sum::<usize>() % p == 0)
}

/// The magic square: rows multiply to `+1`, columns to `+1` except the last, which multiplies to `-1`.
/// Index `k` encodes the sign `(-1)^k`.
pub fn magic_square() -> Instance {
    let lang = Language::new(2)
        .with("R+", r3(2, 0))
        .unwrap()
        .with("R-", r3(2, 1))
        .unwrap();
    let vars: Vec<String> = (1..=9).map(|i| format!("x{i}")).collect();
    let c = |a: usize, b: usize, e: usize, rel: &str| Constraint {
        scope: [a, b, e].iter().map(|i| format!("x{i}")).collect(),
        rel: rel.to_string(),
    };
    let constraints = vec![
        c(1, 2, 3, "R+"),
        c(4, 5, 6, "R+"),
        c(7, 8, 9, "R+"),
        c(1, 4, 7, "R+"),
        c(2, 5, 8, "R+"),
        c(3, 6, 9, "R-"),
    ];
    Instance::new(lang, vars, constraints).expect("magic square is well formed")
}

fn pauli(name: char) -> CMatrix {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match name {
        'I' => [o, z, z, o],
        'X' => [z, o, o, z],
        'Y' => [z, -i, i, z],
        'Z' => [o, z, z, -o],
        _ => unreachable!("unknown Pauli matrix"),
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// The standard 4-dimensional operator solution of the magic square.
pub fn pauli_fixture() -> OperatorAssignment {
    let table = [
        ("x1", "ZI"),
        ("x2", "IZ"),
        ("x3", "ZZ"),
        ("x4", "IX"),
        ("x5", "XI"),
        ("x6", "XX"),
        ("x7", "ZX"),
        ("x8", "XZ"),
        ("x9", "YY"),
    ];
    let mut ops = OperatorAssignment::new(4);
    for (var, word) in table {
        let mut chars = word.chars();
        let (a, b) = (chars.next().unwrap(), chars.next().unwrap());
        ops.insert(var, pauli(a).kronecker(&pauli(b))).unwrap();
    }
    ops
}

/// One equation `Σ coeffs[i]·x_{vars[i]} = rhs` over `Z_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub vars: Vec<usize>,
    pub coeffs: Vec<usize>,
    pub rhs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    pub p: usize,
    pub variables: Vec<String>,
    pub equations: Vec<Equation>,
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|k| k * k <= p).all(|k| !p.is_multiple_of(k))
}

impl LinearSystem {
    /// Parses one equation per line, e.g. `x1 + x2 + 2*x3 = 1`; `#` starts a comment.
    pub fn parse(p: usize, text: &str) -> Result<Self, GapError> {
        if !is_prime(p) {
            return Err(GapError::NotPrime(p));
        }
        let mut variables: Vec<String> = Vec::new();
        let mut equations = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| GapError::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| err("missing '='"))?;
            let rhs: i64 = rhs.trim().parse().map_err(|_| err("right-hand side must be an integer"))?;
            let mut eq = Equation {
                vars: Vec::new(),
                coeffs: Vec::new(),
                rhs: rhs.rem_euclid(p as i64) as usize,
            };
            let normalized = lhs.replace('-', "+-");
            for term in normalized.split('+').map(str::trim).filter(|t| !t.is_empty()) {
                let (neg, term) = match term.strip_prefix('-') {
                    Some(rest) => (true, rest.trim()),
                    None => (false, term),
                };
                let (coeff, name) = match term.split_once('*') {
                    Some((c, v)) => (c.trim().parse::<i64>().map_err(|_| err("bad coefficient"))?, v.trim()),
                    None => (1, term),
                };
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(err("bad variable name"));
                }
                let coeff = if neg { -coeff } else { coeff };
                let idx = match variables.iter().position(|v| v == name) {
                    Some(i) => i,
                    None => {
                        variables.push(name.to_string());
                        variables.len() - 1
                    }
                };
                eq.vars.push(idx);
                eq.coeffs.push(coeff.rem_euclid(p as i64) as usize);
            }
            equations.push(eq);
        }
        Ok(LinearSystem { p, variables, equations })
    }

    /// All solutions by exhaustive enumeration, in lexicographic order.
    pub fn solutions(&self) -> Vec<Vec<usize>> {
        crate::csp::all_tuples(self.p, self.variables.len())
            .filter(|x| {
                self.equations.iter().all(|e| {
                    e.vars.iter().zip(&e.coeffs).map(|(&v, &c)| c * x[v]).sum::<usize>() % self.p == e.rhs % self.p
                })
            })
            .collect()
    }
}

struct LinsysBuilder {
    p: usize,
    variables: Vec<String>,
    constraints: Vec<Constraint>,
    relations: BTreeMap<String, Relation>,
    zero: Option<String>,
    fresh: usize,
}

impl LinsysBuilder {
    fn rel(&mut self, name: String, make: impl FnOnce() -> Relation) -> String {
        self.relations.entry(name.clone()).or_insert_with(make);
        name
    }

    fn r3(&mut self, a: usize) -> String {
        let p = self.p;
        self.rel(format!("R3_{a}"), || r3(p, a))
    }

    fn rwide(&mut self) -> String {
        let p = self.p;
        self.rel(format!("R{}", p + 2), || r_p_plus_2(p))
    }

    fn fresh(&mut self, tag: &str) -> String {
        self.fresh += 1;
        let name = format!("_{tag}{}", self.fresh);
        self.variables.push(name.clone());
        name
    }

    /// A variable constrained to 0.
    fn zero(&mut self) -> String {
        if let Some(z) = &self.zero {
            return z.clone();
        }
        let z = "_zero".to_string();
        self.variables.push(z.clone());
        // 3z = 0 forces z = 0 unless p = 3, where 5z = 2z = 0 does.
        let (rel, arity) = if self.p == 3 { (self.rwide(), 5) } else { (self.r3(0), 3) };
        self.constraints.push(Constraint {
            scope: vec![z.clone(); arity],
            rel,
        });
        self.zero = Some(z.clone());
        z
    }

    fn push(&mut self, scope: Vec<String>, rel: String) {
        self.constraints.push(Constraint { scope, rel });
    }

    fn equation(&mut self, mut terms: Vec<String>, a: usize) {
        let p = self.p;
        if terms.is_empty() {
            if a != 0 {
                let z = self.zero();
                let rel = self.r3(a);
                self.push(vec![z; 3], rel);
            }
            return;
        }
        if terms.len() <= 3 {
            while terms.len() < 3 {
                terms.push(self.zero());
            }
            let rel = self.r3(a);
            self.push(terms, rel);
            return;
        }
        if a == 0 && terms.len() <= p + 2 {
            while terms.len() < p + 2 {
                terms.push(self.zero());
            }
            let rel = self.rwide();
            self.push(terms, rel);
            return;
        }
        // Chain partial sums: n = -(acc + t), s = -n, so s = acc + t.
        let mut acc = terms[0].clone();
        let last_two = terms.len() - 2;
        for t in terms[1..last_two].iter().cloned() {
            let n = self.fresh("n");
            let s = self.fresh("s");
            let z = self.zero();
            let rel = self.r3(0);
            self.push(vec![acc.clone(), t, n.clone()], rel.clone());
            self.push(vec![n, s.clone(), z], rel);
            acc = s;
        }
        let rel = self.r3(a);
        self.push(vec![acc, terms[last_two].clone(), terms[last_two + 1].clone()], rel);
    }
}

/// Encodes a linear system over `Z_p` with `R_{3,a}` and `R_{p+2}`.
///
/// A coefficient `c` becomes `c` copies of its variable; equations with more
/// than three terms use `R_{p+2}` when homogeneous and short enough, and
/// otherwise a chain of partial sums through auxiliary variables.
pub fn linear_system_instance(sys: &LinearSystem) -> Result<Instance, GapError> {
    let p = sys.p;
    if !is_prime(p) {
        return Err(GapError::NotPrime(p));
    }
    let mut b = LinsysBuilder {
        p,
        variables: sys.variables.clone(),
        constraints: Vec::new(),
        relations: BTreeMap::new(),
        zero: None,
        fresh: 0,
    };
    for (ei, eq) in sys.equations.iter().enumerate() {
        let mut coeff: BTreeMap<usize, usize> = BTreeMap::new();
        if eq.vars.len() != eq.coeffs.len() {
            return Err(GapError::BadIndex(ei));
        }
        for (&v, &c) in eq.vars.iter().zip(&eq.coeffs) {
            if v >= sys.variables.len() {
                return Err(GapError::BadIndex(ei));
            }
            *coeff.entry(v).or_default() += c % p;
        }
        // Keep first-occurrence order for readability.
        let mut order: Vec<usize> = Vec::new();
        for &v in &eq.vars {
            if !order.contains(&v) {
                order.push(v);
            }
        }
        let terms: Vec<String> = order
            .iter()
            .flat_map(|v| std::iter::repeat_n(sys.variables[*v].clone(), coeff[v] % p))
            .collect();
        b.equation(terms, eq.rhs % p);
    }
    let mut lang = Language::new(p);
    for (name, rel) in b.relations {
        lang.insert(&name, rel)?;
    }
    Ok(Instance::new(lang, b.variables, b.constraints)?)
}

/// Boolean language of all 2-clauses plus both constants (value 1 = true).
pub fn two_clause_language() -> Language {
    let mut lang = Language::new(2);
    for (name, na, nb) in [("OR", false, false), ("IMP", true, false), ("RIMP", false, true), ("NAND", true, true)] {
        let rel = Relation::from_predicate(2, 2, move |t| ((t[0] == 1) != na) || ((t[1] == 1) != nb));
        lang.insert(name, rel).unwrap();
    }
    lang.insert("F", Relation::unary(2, ValueSet::singleton(0))).unwrap();
    lang.insert("T", Relation::unary(2, ValueSet::singleton(1))).unwrap();
    lang
}

/// Boolean Horn language: `x ∧ y → z`, `x → y`, `¬x ∨ ¬y` and both constants.
pub fn horn_language() -> Language {
    let mut lang = Language::new(2);
    lang.insert("HORN3", Relation::from_predicate(2, 3, |t| !(t[0] == 1 && t[1] == 1) || t[2] == 1))
        .unwrap();
    lang.insert("IMP", Relation::from_predicate(2, 2, |t| t[0] <= t[1])).unwrap();
    lang.insert("NAND", Relation::from_predicate(2, 2, |t| !(t[0] == 1 && t[1] == 1)))
        .unwrap();
    lang.insert("F", Relation::unary(2, ValueSet::singleton(0))).unwrap();
    lang.insert("T", Relation::unary(2, ValueSet::singleton(1))).unwrap();
    lang
}

/// Max-closed language over `{0,1,2}`: `x ≤ y`, `x ≤ max(y, z)`, `x < y` and unary subsets.
pub fn max_closed_language() -> Language {
    let mut lang = Language::new(3);
    lang.insert("LE", Relation::from_predicate(3, 2, |t| t[0] <= t[1])).unwrap();
    lang.insert("LT", Relation::from_predicate(3, 2, |t| t[0] < t[1])).unwrap();
    lang.insert("LEMAX", Relation::from_predicate(3, 3, |t| t[0] <= t[1].max(t[2])))
        .unwrap();
    for (name, set) in [("U0", vec![0]), ("U2", vec![2]), ("U01", vec![0, 1]), ("U12", vec![1, 2])] {
        lang.insert(name, Relation::unary(3, set.into_iter().collect())).unwrap();
    }
    lang
}

/// The bundled bounded-width languages.
pub fn bounded_width_languages() -> Vec<(&'static str, Language)> {
    vec![
        ("two-clause", two_clause_language()),
        ("horn", horn_language()),
        ("max-closed", max_closed_language()),
    ]
}

/// Uniformly random constraints over `lang` on variables `v0..v{n-1}`.
pub fn random_instance<R: Rng + ?Sized>(lang: &Language, n_vars: usize, n_constraints: usize, rng: &mut R) -> Instance {
    let names: Vec<&str> = lang.names().collect();
    let vars: Vec<String> = (0..n_vars).map(|i| format!("v{i}")).collect();
    let constraints = (0..n_constraints)
        .map(|_| {
            let rel = *names.choose(rng).expect("language is nonempty");
            let arity = lang.get(rel).unwrap().arity();
            Constraint {
                scope: (0..arity).map(|_| vars[rng.random_range(0..n_vars)].clone()).collect(),
                rel: rel.to_string(),
            }
        })
        .collect();
    Instance::new(lang.clone(), vars, constraints).expect("generated instance is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{brute_force_solve, enumerate_solutions, validate_assignment};
    use crate::operators::{frobenius, identity, verify_assignment};

    #[test]
    fn magic_square_shape_and_unsat() {
        let p = magic_square();
        assert_eq!(p.variables().len(), 9);
        assert_eq!(p.constraints().len(), 6);
        let r = brute_force_solve(&p).unwrap();
        assert!(!r.is_sat());
        assert_eq!(r.assignments, 512);
        let zeros = p.named_assignment(&[0; 9]);
        assert!(!validate_assignment(&p, &zeros).unwrap());
    }

    #[test]
    fn pauli_fixture_solves_magic_square() {
        let ops = pauli_fixture();
        for m in ops.assign.values() {
            assert!(frobenius(&(m - m.adjoint())) < 1e-15);
            assert!(frobenius(&(m * m - identity(4))) < 1e-15);
        }
        let report = verify_assignment(&magic_square(), &ops, 1e-8).unwrap();
        assert!(report.is_satisfying());
        assert!(report.max_residual < 1e-9);
        // Row 3 multiplies to I, column 3 to -I.
        let g = |v: &str| ops.get(v).unwrap().clone();
        assert!(frobenius(&(g("x7") * g("x8") * g("x9") - identity(4))) < 1e-12);
        assert!(frobenius(&(g("x3") * g("x6") * g("x9") + identity(4))) < 1e-12);
    }

    #[test]
    fn all_identity_assignment_violates() {
        let mut ops = OperatorAssignment::new(4);
        for i in 1..=9 {
            ops.insert(&format!("x{i}"), identity(4)).unwrap();
        }
        let report = verify_assignment(&magic_square(), &ops, 1e-8).unwrap();
        assert!(!report.is_satisfying());
        assert!((report.max_residual - 4.0).abs() < 1e-12, "‖-I - I‖_F = 2·√4");
    }

    #[test]
    fn r3_cardinality() {
        for p in [2, 3, 5] {
            for a in 0..p {
                assert_eq!(r3(p, a).len(), p * p);
            }
        }
    }

    #[test]
    fn single_homogeneous_triple() {
        let sys = LinearSystem::parse(2, "x + y + z = 0").unwrap();
        let inst = linear_system_instance(&sys).unwrap();
        assert_eq!(inst.constraints().len(), 1);
        assert_eq!(inst.constraints()[0].rel, "R3_0");
        assert_eq!(inst.variables().len(), 3);
    }

    #[test]
    fn magic_square_as_linear_system() {
        let text = "x1 + x2 + x3 = 0\nx4 + x5 + x6 = 0\nx7 + x8 + x9 = 0\n\
                    x1 + x4 + x7 = 0\nx2 + x5 + x8 = 0\nx3 + x6 + x9 = 1\n";
        let sys = LinearSystem::parse(2, text).unwrap();
        let inst = linear_system_instance(&sys).unwrap();
        assert!(!brute_force_solve(&inst).unwrap().is_sat());
        assert_eq!(inst.constraints().len(), 6);
    }

    #[test]
    fn four_term_parity_uses_wide_relation() {
        let sys = LinearSystem::parse(2, "a + b + c + e = 0").unwrap();
        let inst = linear_system_instance(&sys).unwrap();
        assert_eq!(inst.constraints()[0].rel, "R4");
        let sols: Vec<Vec<usize>> = enumerate_solutions(&inst, usize::MAX).unwrap();
        let even: Vec<Vec<usize>> = crate::csp::all_tuples(2, 4).filter(|t| t.iter().sum::<usize>() % 2 == 0).collect();
        assert_eq!(sols, even);
    }

    #[test]
    fn general_coefficients_and_chains_match_enumeration() {
        for (p, text) in [
            (3, "2*x + y = 1\nx + y + z + w = 2"),
            (5, "2*a - b = 3"),
            (2, "x1 + x2 + x3 + x4 + x5 = 1"),
            (3, "0*q = 1"),
        ] {
            let sys = LinearSystem::parse(p, text).unwrap();
            let inst = linear_system_instance(&sys).unwrap();
            let n = sys.variables.len();
            let mut projected: Vec<Vec<usize>> = enumerate_solutions(&inst, usize::MAX)
                .unwrap()
                .into_iter()
                .map(|s| s[..n].to_vec())
                .collect();
            projected.dedup();
            assert_eq!(projected, sys.solutions(), "p={p} {text}");
        }
    }

    #[test]
    fn parse_errors() {
        assert_eq!(LinearSystem::parse(4, "x = 1"), Err(GapError::NotPrime(4)));
        assert!(matches!(LinearSystem::parse(3, "x + y"), Err(GapError::Parse { line: 1, .. })));
    }
}
