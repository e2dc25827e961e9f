//! Exact arithmetic in cyclotomic fields `Q(ζ_L)` and univariate polynomials
//! with cyclotomic coefficients.
//!
//! An element of `Q(ζ_L)` is stored as its coefficient vector in the power
//! basis `1, ζ_L, …, ζ_L^{φ(L)-1}`, i.e. as a polynomial reduced modulo the
//! cyclotomic polynomial `Φ_L`. Because `Φ_L` is irreducible this is a field
//! and the representation is canonical for a fixed `L`. Operands of different
//! orders are lifted to the least common multiple of their orders.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("cyclotomic order must be positive")]
    ZeroOrder,
    #[error("gcd of two zero polynomials is undefined")]
    BothZero,
    #[error("interpolation nodes must be pairwise distinct")]
    RepeatedNode,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed cyclotomic number: {0}")]
    Malformed(String),
}

/// Integer coefficients of `Φ_L`, lowest degree first. Cached per order.
fn phi_coeffs(order: u32) -> Arc<Vec<i64>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Vec<i64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(found) = cache.lock().unwrap().get(&order) {
        return Arc::clone(found);
    }
    let computed = Arc::new(compute_phi(order));
    cache
        .lock()
        .unwrap()
        .entry(order)
        .or_insert_with(|| Arc::clone(&computed));
    computed
}

fn compute_phi(order: u32) -> Vec<i64> {
    assert!(order > 0);
    let n = order as usize;
    let mut num = vec![0i64; n + 1];
    num[0] = -1;
    num[n] = 1;
    for e in 1..order {
        if order.is_multiple_of(e) {
            num = exact_div_monic(&num, &phi_coeffs(e));
        }
    }
    num
}

/// Exact division of integer polynomials by a monic divisor.
fn exact_div_monic(num: &[i64], den: &[i64]) -> Vec<i64> {
    let dn = den.len() - 1;
    let mut rem = num.to_vec();
    let mut quot = vec![0i64; num.len() - dn];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dn];
        quot[i] = c;
        if c != 0 {
            for (j, &dj) in den.iter().enumerate() {
                rem[i + j] -= c * dj;
            }
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0), "non-exact cyclotomic division");
    quot
}

/// Euler's totient, equal to the degree of `Φ_L`.
pub fn totient(order: u32) -> usize {
    phi_coeffs(order).len() - 1
}

/// Reduces a rational coefficient vector modulo `Φ_L` in place.
fn reduce_mod_phi(order: u32, v: &mut Vec<BigRational>) {
    let phi = phi_coeffs(order);
    let n = phi.len() - 1;
    for i in (n..v.len()).rev() {
        if v[i].is_zero() {
            continue;
        }
        let c = std::mem::replace(&mut v[i], BigRational::zero());
        for (j, &pj) in phi.iter().enumerate().take(n) {
            if pj != 0 {
                v[i - n + j] -= &c * BigRational::from_integer(BigInt::from(pj));
            }
        }
    }
    v.resize(n, BigRational::zero());
}

/// An exact element of the cyclotomic field `Q(ζ_L)`.
#[derive(Clone)]
pub struct CycNum {
    order: u32,
    coeffs: Vec<BigRational>,
}

impl CycNum {
    pub fn zero() -> Self {
        Self::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        CycNum { order: 1, coeffs: vec![q] }
    }

    pub fn from_fraction(num: i64, den: i64) -> Result<Self, AlgebraError> {
        if den == 0 {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(Self::from_rational(BigRational::new(num.into(), den.into())))
    }

    /// `ζ_L^k`.
    pub fn root_of_unity(order: u32, k: i64) -> Result<Self, AlgebraError> {
        if order == 0 {
            return Err(AlgebraError::ZeroOrder);
        }
        let e = k.rem_euclid(order as i64) as usize;
        let mut v = vec![BigRational::zero(); e.max(totient(order)) + 1];
        v[e] = BigRational::one();
        reduce_mod_phi(order, &mut v);
        Ok(CycNum { order, coeffs: v })
    }

    /// The domain value `λ_k = e^{2πik/d}`.
    pub fn embed(k: u32, d: u32) -> Self {
        Self::root_of_unity(d, k as i64).expect("domain size must be positive")
    }

    /// Builds a number from its power-basis coefficients in `Q(ζ_L)`.
    pub fn from_coeffs(order: u32, coeffs: Vec<BigRational>) -> Result<Self, AlgebraError> {
        if order == 0 {
            return Err(AlgebraError::ZeroOrder);
        }
        let mut v = coeffs;
        reduce_mod_phi(order, &mut v);
        Ok(CycNum { order, coeffs: v })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(Zero::is_zero)
    }

    /// Returns the rational value if the number lies in `Q`.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    /// Re-expresses the number in `Q(ζ_target)`; `target` must be a multiple of the order.
    pub fn lift(&self, target: u32) -> Self {
        assert!(
            target.is_multiple_of(self.order),
            "cannot lift order {} to {}",
            self.order,
            target
        );
        if target == self.order {
            return self.clone();
        }
        let step = (target / self.order) as usize;
        let n = totient(target);
        let mut v = vec![BigRational::zero(); (self.coeffs.len().saturating_sub(1) * step + 1).max(n)];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                v[i * step] = c.clone();
            }
        }
        reduce_mod_phi(target, &mut v);
        CycNum { order: target, coeffs: v }
    }

    fn unify(&self, other: &Self) -> (Self, Self) {
        if self.order == other.order {
            return (self.clone(), other.clone());
        }
        let l = self.order.lcm(&other.order);
        (self.lift(l), other.lift(l))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&BigRational, &BigRational) -> BigRational) -> Self {
        let (a, b) = if self.order == other.order {
            return CycNum {
                order: self.order,
                coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| f(x, y)).collect(),
            };
        } else {
            self.unify(other)
        };
        CycNum {
            order: a.order,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(x, y)).collect(),
        }
    }

    fn mul_ref(&self, other: &Self) -> Self {
        if self.order == 1 {
            return other.scale(&self.coeffs[0]);
        }
        if other.order == 1 {
            return self.scale(&other.coeffs[0]);
        }
        let (a, b) = self.unify(other);
        let mut v = vec![BigRational::zero(); a.coeffs.len() + b.coeffs.len() - 1];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if !y.is_zero() {
                    v[i + j] += x * y;
                }
            }
        }
        reduce_mod_phi(a.order, &mut v);
        CycNum { order: a.order, coeffs: v }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        CycNum {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    /// Multiplicative inverse, via extended Euclid against `Φ_L` over `Q`.
    pub fn inv(&self) -> Result<Self, AlgebraError> {
        if self.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        if let Some(q) = self.as_rational() {
            return Ok(CycNum {
                order: self.order,
                coeffs: {
                    let mut v = vec![BigRational::zero(); self.coeffs.len()];
                    v[0] = q.recip();
                    v
                },
            });
        }
        let phi: Vec<BigRational> = phi_coeffs(self.order)
            .iter()
            .map(|&c| BigRational::from_integer(BigInt::from(c)))
            .collect();
        let s = ratpoly::inverse_mod(&self.coeffs, &phi);
        CycNum::from_coeffs(self.order, s)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, AlgebraError> {
        Ok(self * &other.inv()?)
    }

    /// Complex conjugation: `ζ ↦ ζ^{-1}`.
    pub fn conj(&self) -> Self {
        let l = self.order as usize;
        let mut v = vec![BigRational::zero(); l.max(self.coeffs.len())];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                v[(l - i) % l] += c;
            }
        }
        reduce_mod_phi(self.order, &mut v);
        CycNum { order: self.order, coeffs: v }
    }

    pub fn pow(&self, exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = CycNum::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Numerical value, evaluating the power basis in double precision.
    pub fn to_complex(&self) -> Complex64 {
        let l = self.order as f64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| {
                let angle = 2.0 * std::f64::consts::PI * (i as f64) / l;
                Complex64::from_polar(rational_to_f64(c), angle)
            })
            .sum()
    }
}

pub(crate) fn rational_to_f64(q: &BigRational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale both parts down to fit the f64 exponent range.
            let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
            let n = (q.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (q.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

impl PartialEq for CycNum {
    fn eq(&self, other: &Self) -> bool {
        if self.order == other.order {
            return self.coeffs == other.coeffs;
        }
        let (a, b) = self.unify(other);
        a.coeffs == b.coeffs
    }
}

impl Eq for CycNum {}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycNum({})", self)
    }
}

impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if i == 0 {
                write!(f, "{}", c)?;
            } else if c.is_one() {
                write!(f, "z{}^{}", self.order, i)?;
            } else {
                write!(f, "({})*z{}^{}", c, self.order, i)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<'a> $trait<&'a CycNum> for &'a CycNum {
            type Output = CycNum;
            fn $method(self, rhs: &'a CycNum) -> CycNum {
                let f: fn(&CycNum, &CycNum) -> CycNum = $body;
                f(self, rhs)
            }
        }
        impl $trait<CycNum> for CycNum {
            type Output = CycNum;
            fn $method(self, rhs: CycNum) -> CycNum {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
forward_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
forward_binop!(Mul, mul, |a, b| a.mul_ref(b));

impl Neg for &CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        CycNum {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        -&self
    }
}

/// JSON integer that falls back to a decimal string when it does not fit in `i64`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonInt {
    Small(i64),
    Big(String),
}

impl JsonInt {
    fn from_big(n: &BigInt) -> Self {
        match n.to_i64() {
            Some(v) => JsonInt::Small(v),
            None => JsonInt::Big(n.to_string()),
        }
    }

    fn to_big(&self) -> Result<BigInt, AlgebraError> {
        match self {
            JsonInt::Small(v) => Ok(BigInt::from(*v)),
            JsonInt::Big(s) => s
                .parse()
                .map_err(|_| AlgebraError::Malformed(format!("bad integer {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CycNumDoc {
    order: u32,
    coeffs: Vec<(JsonInt, JsonInt)>,
}

impl Serialize for CycNum {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CycNumDoc {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| (JsonInt::from_big(c.numer()), JsonInt::from_big(c.denom())))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CycNum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = CycNumDoc::deserialize(deserializer)?;
        if doc.order == 0 {
            return Err(D::Error::custom(AlgebraError::ZeroOrder));
        }
        if doc.coeffs.len() != totient(doc.order) {
            return Err(D::Error::custom(format!(
                "order {} needs {} coefficients, got {}",
                doc.order,
                totient(doc.order),
                doc.coeffs.len()
            )));
        }
        let mut coeffs = Vec::with_capacity(doc.coeffs.len());
        for (n, d) in &doc.coeffs {
            let n = n.to_big().map_err(D::Error::custom)?;
            let d = d.to_big().map_err(D::Error::custom)?;
            if d.is_zero() {
                return Err(D::Error::custom(AlgebraError::DivisionByZero));
            }
            coeffs.push(BigRational::new(n, d));
        }
        Ok(CycNum { order: doc.order, coeffs })
    }
}

/// Dense rational polynomial helpers used for field inversion.
mod ratpoly {
    use super::*;

    fn trim(v: &mut Vec<BigRational>) {
        while v.len() > 1 && v.last().is_some_and(Zero::is_zero) {
            v.pop();
        }
    }

    fn degree(v: &[BigRational]) -> Option<usize> {
        v.iter().rposition(|c| !c.is_zero())
    }

    fn div_rem(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
        let db = degree(b).expect("division by zero polynomial");
        let mut rem = a.to_vec();
        let Some(da) = degree(a) else {
            return (vec![BigRational::zero()], rem);
        };
        if da < db {
            return (vec![BigRational::zero()], rem);
        }
        let lead_inv = b[db].recip();
        let mut quot = vec![BigRational::zero(); da - db + 1];
        for i in (0..=da - db).rev() {
            let c = &rem[i + db] * &lead_inv;
            if c.is_zero() {
                continue;
            }
            for j in 0..=db {
                rem[i + j] -= &c * &b[j];
            }
            quot[i] = c;
        }
        trim(&mut rem);
        (quot, rem)
    }

    fn mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        let n = a.len().max(b.len());
        let mut out = vec![BigRational::zero(); n];
        for (i, x) in a.iter().enumerate() {
            out[i] += x;
        }
        for (i, y) in b.iter().enumerate() {
            out[i] -= y;
        }
        trim(&mut out);
        out
    }

    /// `s` with `s·a ≡ 1 (mod m)`; requires `gcd(a, m) = 1`.
    pub(super) fn inverse_mod(a: &[BigRational], m: &[BigRational]) -> Vec<BigRational> {
        let mut r0 = m.to_vec();
        let mut r1 = a.to_vec();
        trim(&mut r1);
        let mut s0 = vec![BigRational::zero()];
        let mut s1 = vec![BigRational::one()];
        while degree(&r1).is_some() {
            let (q, r) = div_rem(&r0, &r1);
            let s2 = sub(&s0, &mul(&q, &s1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s2);
        }
        let g = degree(&r0).map(|_| r0[0].clone());
        assert!(
            degree(&r0) == Some(0),
            "element not invertible modulo cyclotomic polynomial"
        );
        let g = g.unwrap().recip();
        s0.iter().map(|c| c * &g).collect()
    }
}

/// Univariate polynomial with [`CycNum`] coefficients, lowest degree first.
///
/// The zero polynomial has no coefficients; otherwise the leading coefficient
/// is nonzero.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UniPoly {
    coeffs: Vec<CycNum>,
}

impl UniPoly {
    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: CycNum) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(CycNum::one())
    }

    /// The polynomial `x`.
    pub fn x() -> Self {
        Self::from_coeffs(vec![CycNum::zero(), CycNum::one()])
    }

    pub fn monomial(c: CycNum, degree: usize) -> Self {
        let mut coeffs = vec![CycNum::zero(); degree + 1];
        coeffs[degree] = c;
        Self::from_coeffs(coeffs)
    }

    pub fn from_coeffs(mut coeffs: Vec<CycNum>) -> Self {
        while coeffs.last().is_some_and(CycNum::is_zero) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| CycNum::from_int(c)).collect())
    }

    /// `x^d - 1`.
    pub fn x_pow_minus_one(d: usize) -> Self {
        let mut coeffs = vec![CycNum::zero(); d + 1];
        coeffs[0] = CycNum::from_int(-1);
        coeffs[d] = CycNum::one();
        Self::from_coeffs(coeffs)
    }

    /// `∏ (root - x)` over the given roots; the empty product is `1`.
    pub fn product_of_differences<'a>(roots: impl IntoIterator<Item = &'a CycNum>) -> Self {
        roots.into_iter().fold(UniPoly::one(), |acc, r| {
            &acc * &UniPoly::from_coeffs(vec![r.clone(), CycNum::from_int(-1)])
        })
    }

    /// `∏ (x - root)` over the given roots; the empty product is `1`.
    pub fn from_roots<'a>(roots: impl IntoIterator<Item = &'a CycNum>) -> Self {
        roots.into_iter().fold(UniPoly::one(), |acc, r| {
            &acc * &UniPoly::from_coeffs(vec![-r, CycNum::one()])
        })
    }

    pub fn coeffs(&self) -> &[CycNum] {
        &self.coeffs
    }

    /// Coefficient of `x^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> CycNum {
        self.coeffs.get(i).cloned().unwrap_or_else(CycNum::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&CycNum> {
        self.coeffs.last()
    }

    pub fn scale(&self, c: &CycNum) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn eval(&self, at: &CycNum) -> CycNum {
        self.coeffs
            .iter()
            .rev()
            .fold(CycNum::zero(), |acc, c| &(&acc * at) + c)
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self), AlgebraError> {
        let db = divisor.degree().ok_or(AlgebraError::DivisionByZero)?;
        let lead_inv = divisor.coeffs[db].inv()?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= db {
            return Ok((UniPoly::zero(), self.clone()));
        }
        let mut quot = vec![CycNum::zero(); rem.len() - db];
        for i in (0..quot.len()).rev() {
            if rem[i + db].is_zero() {
                continue;
            }
            let c = &rem[i + db] * &lead_inv;
            for j in 0..=db {
                rem[i + j] = &rem[i + j] - &(&c * &divisor.coeffs[j]);
            }
            quot[i] = c;
        }
        Ok((UniPoly::from_coeffs(quot), UniPoly::from_coeffs(rem)))
    }

    pub fn rem(&self, divisor: &Self) -> Result<Self, AlgebraError> {
        Ok(self.div_rem(divisor)?.1)
    }

    /// Scales to leading coefficient one; the zero polynomial stays zero.
    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some(lc) => self.scale(&lc.inv().expect("leading coefficient is nonzero")),
        }
    }

    /// Lagrange interpolation through `(nodes[i], values[i])`.
    pub fn interpolate(nodes: &[CycNum], values: &[CycNum]) -> Result<Self, AlgebraError> {
        if nodes.len() != values.len() {
            return Err(AlgebraError::LengthMismatch {
                expected: nodes.len(),
                got: values.len(),
            });
        }
        let mut acc = UniPoly::zero();
        for (k, (nk, vk)) in nodes.iter().zip(values).enumerate() {
            let mut basis = UniPoly::one();
            let mut denom = CycNum::one();
            for (j, nj) in nodes.iter().enumerate() {
                if j == k {
                    continue;
                }
                let diff = nk - nj;
                if diff.is_zero() {
                    return Err(AlgebraError::RepeatedNode);
                }
                basis = &basis * &UniPoly::from_coeffs(vec![-nj, CycNum::one()]);
                denom = &denom * &diff;
            }
            acc = &acc + &basis.scale(&vk.checked_div(&denom)?);
        }
        Ok(acc)
    }
}

impl fmt::Debug for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UniPoly[{}]", self)
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "({})", c)?,
                1 => write!(f, "({})*x", c)?,
                _ => write!(f, "({})*x^{}", c, i)?,
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a UniPoly> for &'a UniPoly {
    type Output = UniPoly;
    fn add(self, rhs: &'a UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::from_coeffs((0..n).map(|i| &self.coeff(i) + &rhs.coeff(i)).collect())
    }
}

impl<'a> Sub<&'a UniPoly> for &'a UniPoly {
    type Output = UniPoly;
    fn sub(self, rhs: &'a UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::from_coeffs((0..n).map(|i| &self.coeff(i) - &rhs.coeff(i)).collect())
    }
}

impl<'a> Mul<&'a UniPoly> for &'a UniPoly {
    type Output = UniPoly;
    fn mul(self, rhs: &'a UniPoly) -> UniPoly {
        if self.is_zero() || rhs.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![CycNum::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] = &out[i + j] + &(a * b);
                }
            }
        }
        UniPoly::from_coeffs(out)
    }
}

impl Neg for &UniPoly {
    type Output = UniPoly;
    fn neg(self) -> UniPoly {
        UniPoly::from_coeffs(self.coeffs.iter().map(|c| -c).collect())
    }
}

/// The cyclotomic polynomial `Φ_L`, obtained by dividing `x^L - 1` by `Φ_e`
/// for every proper divisor `e` of `L`.
pub fn cyclotomic_polynomial(order: u32) -> Result<UniPoly, AlgebraError> {
    if order == 0 {
        return Err(AlgebraError::ZeroOrder);
    }
    Ok(UniPoly::from_ints(&phi_coeffs(order)))
}

/// Extended Euclid: returns `(g, u, v)` with `u·p + v·m = g` and `g` the monic gcd.
pub fn poly_ext_gcd(p: &UniPoly, m: &UniPoly) -> Result<(UniPoly, UniPoly, UniPoly), AlgebraError> {
    if p.is_zero() && m.is_zero() {
        return Err(AlgebraError::BothZero);
    }
    let (mut r0, mut r1) = (p.clone(), m.clone());
    let (mut u0, mut u1) = (UniPoly::one(), UniPoly::zero());
    let (mut v0, mut v1) = (UniPoly::zero(), UniPoly::one());
    while !r1.is_zero() {
        let (q, r) = r0.div_rem(&r1)?;
        let u2 = &u0 - &(&q * &u1);
        let v2 = &v0 - &(&q * &v1);
        r0 = std::mem::replace(&mut r1, r);
        u0 = std::mem::replace(&mut u1, u2);
        v0 = std::mem::replace(&mut v1, v2);
    }
    let lc_inv = r0.leading().expect("gcd is nonzero").inv()?;
    Ok((r0.scale(&lc_inv), u0.scale(&lc_inv), v0.scale(&lc_inv)))
}

/// Horner evaluation of `p` at `a`.
pub fn poly_eval(p: &UniPoly, a: &CycNum) -> CycNum {
    p.eval(a)
}

/// Parses rationals like `-3/4` or `5`; used by tests and fixtures.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}
