//! Polynomial encodings over roots of unity: relation characteristic
//! polynomials `P_R`, domain polynomials `Dom_S`, rule polynomials and the
//! Bézout witnesses used to chain domain statements together.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::csp::{all_tuples, Relation, ValueSet};
use crate::cyclotomic::{poly_ext_gcd, AlgebraError, CycNum, UniPoly};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FourierError {
    #[error("position {pos} out of range for arity {arity}")]
    PositionOutOfRange { pos: usize, arity: usize },
    #[error("rule positions must differ, both are {0}")]
    SamePosition(usize),
    #[error("set {0} must be a proper nonempty subset of the domain")]
    ImproperSet(ValueSet),
    #[error("expected a point with {expected} coordinates, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// `λ_k = e^{2πik/d}` as an exact cyclotomic number.
pub fn lambda(k: usize, d: usize) -> CycNum {
    CycNum::embed(k as u32, d as u32)
}

/// Multivariate polynomial over `U_d` with exponents reduced modulo `d`.
#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    d: usize,
    vars: Vec<String>,
    terms: BTreeMap<Vec<usize>, CycNum>,
}

impl MultiPoly {
    pub fn zero(d: usize, vars: Vec<String>) -> Self {
        MultiPoly {
            d,
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, vars: Vec<String>, c: CycNum) -> Self {
        let mut p = Self::zero(d, vars);
        let n = p.vars.len();
        p.add_term(vec![0; n], c);
        p
    }

    /// The univariate polynomial `f` placed in variable `var`, exponents reduced mod `d`.
    pub fn from_unipoly(d: usize, vars: Vec<String>, var: usize, f: &UniPoly) -> Self {
        let mut p = Self::zero(d, vars);
        let n = p.vars.len();
        for (e, c) in f.coeffs().iter().enumerate() {
            let mut exp = vec![0; n];
            exp[var] = e % d;
            p.add_term(exp, c.clone());
        }
        p
    }

    pub fn variable(d: usize, vars: Vec<String>, var: usize) -> Self {
        Self::from_unipoly(d, vars, var, &UniPoly::x())
    }

    /// Default variable names `x1..xn`.
    pub fn default_vars(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Nonzero terms keyed by exponent vector, in lexicographic order.
    pub fn terms(&self) -> &BTreeMap<Vec<usize>, CycNum> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: &[usize]) -> CycNum {
        self.terms.get(exp).cloned().unwrap_or_else(CycNum::zero)
    }

    fn add_term(&mut self, mut exp: Vec<usize>, c: CycNum) {
        for e in exp.iter_mut() {
            *e %= self.d;
        }
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.remove(&exp) {
            Some(old) => &old + &c,
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(exp, sum);
        }
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(self.d, other.d, "domain sizes differ");
        assert_eq!(self.vars.len(), other.vars.len(), "variable lists differ");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&CycNum::from_int(-1)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut out = Self::zero(self.d, self.vars.clone());
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let exp = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(exp, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &CycNum) -> Self {
        let mut out = Self::zero(self.d, self.vars.clone());
        for (e, a) in &self.terms {
            out.add_term(e.clone(), a * c);
        }
        out
    }

    /// Re-expresses the polynomial over `new_vars`, sending old variable `i`
    /// to `mapping[i]`. Merged variables multiply, so exponents add.
    pub fn substitute_vars(&self, new_vars: Vec<String>, mapping: &[usize]) -> Self {
        assert_eq!(mapping.len(), self.vars.len());
        let mut out = Self::zero(self.d, new_vars);
        let n = out.vars.len();
        for (e, c) in &self.terms {
            let mut exp = vec![0; n];
            for (i, &k) in e.iter().enumerate() {
                exp[mapping[i]] += k;
            }
            out.add_term(exp, c.clone());
        }
        out
    }

    /// Remainder after dividing, in variable `var`, by a univariate polynomial `g`
    /// (other variables act as coefficients).
    pub fn reduce_univariate(&self, var: usize, g: &UniPoly) -> Result<Self, AlgebraError> {
        let mut groups: BTreeMap<Vec<usize>, Vec<CycNum>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            let k = std::mem::replace(&mut rest[var], 0);
            let slot = groups.entry(rest).or_default();
            if slot.len() <= k {
                slot.resize(k + 1, CycNum::zero());
            }
            slot[k] = &slot[k] + c;
        }
        let mut out = Self::zero(self.d, self.vars.clone());
        for (rest, coeffs) in groups {
            let r = UniPoly::from_coeffs(coeffs).rem(g)?;
            for (k, c) in r.coeffs().iter().enumerate() {
                let mut exp = rest.clone();
                exp[var] = k;
                out.add_term(exp, c.clone());
            }
        }
        Ok(out)
    }

    /// Exact evaluation at a point of `(Q(ζ))^n`.
    pub fn eval(&self, point: &[CycNum]) -> Result<CycNum, FourierError> {
        if point.len() != self.vars.len() {
            return Err(FourierError::LengthMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        let mut acc = CycNum::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (x, &k) in point.iter().zip(e) {
                if k > 0 {
                    term = &term * &x.pow(k as u64);
                }
            }
            acc = &acc + &term;
        }
        Ok(acc)
    }

    /// Evaluation at the `U_d` point with the given indices (`λ_{idx[i]}`).
    pub fn eval_indices(&self, idx: &[usize]) -> Result<CycNum, FourierError> {
        let point: Vec<CycNum> = idx.iter().map(|&k| lambda(k, self.d)).collect();
        self.eval(&point)
    }
}

/// `c * x1^2 * x3`-style monomials, sorted by exponent vector.
impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{:?}  ({})", e, c)?;
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    if k == 1 {
                        self.vars[i].clone()
                    } else {
                        format!("{}^{}", self.vars[i], k)
                    }
                })
                .collect();
            if !mono.is_empty() {
                write!(f, " * {}", mono.join(" * "))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly(d={}, vars={:?}, terms={:?})", self.d, self.vars, self.terms)
    }
}

/// The characteristic polynomial `P_R` over variables `x1..xr`.
pub fn relation_polynomial(r: &Relation) -> MultiPoly {
    relation_polynomial_with_vars(r, MultiPoly::default_vars(r.arity()))
}

/// `P_R` with `P_R(a) = λ_0` on `R` and `λ_1` elsewhere, via the normalized inverse DFT
/// `c_b = d^{-r} Σ_a f(a) λ_1^{-a·b}`.
///
/// Writing `f = 1 + (λ_1 - 1)·[a ∉ R]` and using `Σ_a λ_1^{-a·b} = d^r [b = 0]`
/// gives `c_b = λ_1 [b = 0] + (1 - λ_1) d^{-r} Σ_{a∈R} λ_1^{-a·b}`, so only the
/// tuples of `R` need to be visited.
pub fn relation_polynomial_with_vars(r: &Relation, vars: Vec<String>) -> MultiPoly {
    let d = r.d();
    let arity = r.arity();
    assert_eq!(vars.len(), arity);
    let mut out = MultiPoly::zero(d, vars);
    let one_minus_zeta = &CycNum::one() - &lambda(1, d);
    let norm = BigRational::new(BigInt::from(1), BigInt::from(d).pow(arity as u32));
    for b in all_tuples(d, arity) {
        let mut tally = vec![0i64; d];
        for a in r.tuples() {
            let dot: usize = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            tally[(d - dot % d) % d] += 1;
        }
        let sum = CycNum::from_coeffs(
            d as u32,
            tally
                .iter()
                .map(|&n| BigRational::from_integer(BigInt::from(n)))
                .collect(),
        )
        .expect("positive order");
        let mut c = (&one_minus_zeta * &sum).scale(&norm);
        if b.iter().all(|&x| x == 0) {
            c = &c + &lambda(1, d);
        }
        out.add_term(b, c);
    }
    out
}

/// `G_S(x) = ∏_{k∈S} (λ_k - x)`; vanishes on `U_d` exactly at `S`.
pub fn vanishing_polynomial(s: ValueSet, d: usize) -> UniPoly {
    let roots: Vec<CycNum> = s.iter().filter(|&k| k < d).map(|k| lambda(k, d)).collect();
    UniPoly::product_of_differences(&roots)
}

/// `Dom_S(x) = ∏_{k∈S} (λ_k - x) + 1`; equals 1 on `U_d` exactly at `S`.
pub fn dom_polynomial(s: ValueSet, d: usize) -> UniPoly {
    &vanishing_polynomial(s, d) + &UniPoly::one()
}

/// `Rule_{S,R,S'} = (Dom_{S̄}(x_i) - 1)(P_R - λ_1)(Dom_{S'}(x_j) - 1)` over `x1..xr`.
pub fn rule_polynomial(
    s: ValueSet,
    r: &Relation,
    s_prime: ValueSet,
    i: usize,
    j: usize,
) -> Result<MultiPoly, FourierError> {
    let arity = r.arity();
    for pos in [i, j] {
        if pos >= arity {
            return Err(FourierError::PositionOutOfRange { pos, arity });
        }
    }
    if i == j {
        return Err(FourierError::SamePosition(i));
    }
    let d = r.d();
    let vars = MultiPoly::default_vars(arity);
    let left = MultiPoly::from_unipoly(d, vars.clone(), i, &vanishing_polynomial(s.complement(d), d));
    let right = MultiPoly::from_unipoly(d, vars.clone(), j, &vanishing_polynomial(s_prime, d));
    let middle = relation_polynomial(r).sub(&MultiPoly::constant(d, vars, lambda(1, d)));
    Ok(left.mul(&middle).mul(&right))
}

/// `p_S(x) = ∏_{k∈S}(x - λ_k) - ∏_{k∉S}(x - λ_k)`, which has no root in `U_d`.
pub fn gap_polynomial(s: ValueSet, d: usize) -> UniPoly {
    let roots = |set: ValueSet| -> Vec<CycNum> { set.iter().map(|k| lambda(k, d)).collect() };
    &UniPoly::from_roots(&roots(s)) - &UniPoly::from_roots(&roots(s.complement(d)))
}

/// `(q, c)` with `p_S·q ≡ c (mod x^d - 1)` and `c ≠ 0`.
///
/// When `p_S` is already constant the witness is `(1, p_S)`; otherwise
/// extended Euclid against `x^d - 1` yields `q` with `c = 1`.
pub fn dom_gap_inverse(s: ValueSet, d: usize) -> Result<(UniPoly, CycNum), FourierError> {
    if s.is_empty() || ValueSet::full(d).is_subset(s) || !s.is_subset(ValueSet::full(d)) {
        return Err(FourierError::ImproperSet(s));
    }
    let p = gap_polynomial(s, d);
    if p.degree() == Some(0) {
        return Ok((UniPoly::one(), p.coeff(0)));
    }
    let (g, u, _) = poly_ext_gcd(&p, &UniPoly::x_pow_minus_one(d))?;
    debug_assert_eq!(g, UniPoly::one(), "gap polynomial shares a root with x^d - 1");
    Ok((u, CycNum::one()))
}
