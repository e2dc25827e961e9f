//! Exact certificates that a SLAC-refuted instance has no satisfying operator
//! assignment, and an independent checker for them.
//!
//! Write `G_S(x) = ∏_{k∈S}(λ_k - x)` and `H_S = G_{S̄}`. A certificate is an
//! ordered list of *lemmas*, each concluding `G_T(A_z) = 0` for a variable `z`
//! and a kept set `T`; the last lemma has `T = ∅`, i.e. `I = 0`.
//!
//! * A **section** for the pin `v = a` sets `F = G_{D∖{a}}(A_v)` and follows a
//!   linear chain `(w_0 ∈ S_0) → … → (w_m ∈ ∅)`, maintaining
//!   `F·G_{S_i}(A_{w_i}) = 0`. Each step is licensed by a constraint `R`: the
//!   polynomial `H_{S_i}(w_i)(P_R - λ_1)G_{S_{i+1}}(w_{i+1})` reduces to zero
//!   modulo the cited domain polynomials of the scope, and the Bézout witness
//!   `p·q = c + r(x^d - 1)` for `p = ±G_{S_i} ∓ H_{S_i}` telescopes the two
//!   statements into `c·F·G_{S_{i+1}}(A_{w_{i+1}}) = 0`. At `∅` this gives `F = 0`.
//! * A **combination** subtracts `G_{T∪{r}} - G_{T∪{r'}} = (λ_r - λ_{r'})G_T`
//!   to shrink two kept sets of the same variable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consistency::{RefutationChain, SlacResult};
use crate::csp::{distinct_in_order, Instance, ValueSet};
use crate::cyclotomic::{AlgebraError, CycNum, UniPoly};
use crate::fourier::{dom_gap_inverse, gap_polynomial, lambda, relation_polynomial_with_vars, vanishing_polynomial, MultiPoly};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertError {
    #[error("slac consistent: no refutation to certify")]
    Consistent,
    #[error("missing chain for {var} = {value}")]
    MissingChain { var: String, value: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Bézout witness `p·q = c + r·(x^d - 1)` for the gap polynomial of a source set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bezout {
    pub q: UniPoly,
    pub c: CycNum,
    pub r: UniPoly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertStep {
    pub constraint: usize,
    pub source_pos: usize,
    pub target_pos: usize,
    /// Witness for the previous link's set; absent when that set is the whole domain.
    pub bezout: Option<Bezout>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertLink {
    pub var: String,
    pub set: ValueSet,
    /// Absent on the first (axiom) link.
    pub step: Option<CertStep>,
}

/// A domain fact used by a section: `G_{set}(A_var) = 0` by an earlier lemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCitation {
    pub var: String,
    pub lemma: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lemma {
    Section {
        var: String,
        value: usize,
        kept: ValueSet,
        domains: Vec<DomainCitation>,
        links: Vec<CertLink>,
    },
    Combine {
        var: String,
        kept: ValueSet,
        left: usize,
        right: usize,
        dropped: usize,
        dropped_other: usize,
        coeff: CycNum,
    },
}

impl Lemma {
    pub fn var(&self) -> &str {
        match self {
            Lemma::Section { var, .. } | Lemma::Combine { var, .. } => var,
        }
    }

    pub fn kept(&self) -> ValueSet {
        match self {
            Lemma::Section { kept, .. } | Lemma::Combine { kept, .. } => *kept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapCertificate {
    /// SHA-256 of the instance document.
    pub digest: String,
    pub d: usize,
    /// Variable whose operator is shown to satisfy `I = 0`.
    pub target: String,
    pub lemmas: Vec<Lemma>,
}

impl GapCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Hex SHA-256 of the canonical instance document.
pub fn instance_digest(p: &Instance) -> String {
    Sha256::digest(p.to_json().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Builder<'a> {
    p: &'a Instance,
    slac: &'a SlacResult,
    lemmas: Vec<Lemma>,
    by_removed: HashMap<(usize, ValueSet), usize>,
    bezout: HashMap<ValueSet, Bezout>,
}

impl Builder<'_> {
    fn name(&self, v: usize) -> String {
        self.p.variables()[v].clone()
    }

    /// Index of a lemma concluding `G_{D∖removed}(A_z) = 0`.
    fn ensure_lemma(&mut self, z: usize, removed: ValueSet) -> Result<usize, CertError> {
        if let Some(&i) = self.by_removed.get(&(z, removed)) {
            return Ok(i);
        }
        let d = self.p.d();
        let idx = if removed.len() == 1 {
            self.section(z, removed.max().unwrap())?
        } else {
            let x = removed.max().unwrap();
            let y = removed.minus(ValueSet::singleton(x)).max().unwrap();
            let left = self.ensure_lemma(z, removed.minus(ValueSet::singleton(x)))?;
            let right = self.ensure_lemma(z, removed.minus(ValueSet::singleton(y)))?;
            self.lemmas.push(Lemma::Combine {
                var: self.name(z),
                kept: removed.complement(d),
                left,
                right,
                dropped: x,
                dropped_other: y,
                coeff: &lambda(x, d) - &lambda(y, d),
            });
            self.lemmas.len() - 1
        };
        self.by_removed.insert((z, removed), idx);
        Ok(idx)
    }

    fn witness(&mut self, s: ValueSet) -> Result<Bezout, CertError> {
        if let Some(b) = self.bezout.get(&s) {
            return Ok(b.clone());
        }
        let d = self.p.d();
        let (q, c) = dom_gap_inverse(s, d).map_err(|e| match e {
            crate::fourier::FourierError::Algebra(a) => CertError::Algebra(a),
            other => panic!("source sets are proper: {other}"),
        })?;
        let lhs = &(&gap_polynomial(s, d) * &q) - &UniPoly::constant(c.clone());
        let (r, rem) = lhs.div_rem(&UniPoly::x_pow_minus_one(d))?;
        debug_assert!(rem.is_zero());
        let b = Bezout { q, c, r };
        self.bezout.insert(s, b.clone());
        Ok(b)
    }

    fn section(&mut self, v: usize, a: usize) -> Result<usize, CertError> {
        let removal = self
            .slac
            .removals
            .iter()
            .find(|r| r.var == v && r.value == a)
            .ok_or_else(|| CertError::MissingChain {
                var: self.name(v),
                value: a,
            })?;
        let chain: &RefutationChain = &removal.chain;
        let d = self.p.d();

        // Domains of every variable the chain's rules or axiom touch.
        let mut needed = vec![chain.links[0].var];
        for link in &chain.links[1..] {
            let rule = link.rule.expect("non-axiom links carry a rule");
            needed.extend(distinct_in_order(self.p.scope(rule.constraint)));
        }
        let needed = distinct_in_order(&needed);
        let mut domains = Vec::new();
        for y in needed {
            let dom = removal.domains[y];
            if y == v || dom == ValueSet::full(d) {
                continue;
            }
            let lemma = self.ensure_lemma(y, dom.complement(d))?;
            domains.push(DomainCitation {
                var: self.name(y),
                lemma,
            });
        }
        domains.sort_by_key(|c| self.p.var_index(&c.var));

        let mut links = Vec::with_capacity(chain.links.len());
        for (i, link) in chain.links.iter().enumerate() {
            let step = match link.rule {
                None => None,
                Some(rule) => {
                    let prev = chain.links[i - 1].set;
                    let bezout = if prev == ValueSet::full(d) {
                        None
                    } else {
                        Some(self.witness(prev)?)
                    };
                    Some(CertStep {
                        constraint: rule.constraint,
                        source_pos: rule.source_pos,
                        target_pos: rule.target_pos,
                        bezout,
                    })
                }
            };
            links.push(CertLink {
                var: self.name(link.var),
                set: link.set,
                step,
            });
        }
        self.lemmas.push(Lemma::Section {
            var: self.name(v),
            value: a,
            kept: ValueSet::singleton(a).complement(d),
            domains,
            links,
        });
        Ok(self.lemmas.len() - 1)
    }
}

/// Compiles a SLAC refutation into a certificate that `I = 0` follows from
/// any satisfying operator assignment.
pub fn build_certificate(p: &Instance, slac: &SlacResult) -> Result<GapCertificate, CertError> {
    if slac.consistent {
        return Err(CertError::Consistent);
    }
    let target = slac.emptied_var().ok_or(CertError::Consistent)?;
    let mut b = Builder {
        p,
        slac,
        lemmas: Vec::new(),
        by_removed: HashMap::new(),
        bezout: HashMap::new(),
    };
    b.ensure_lemma(target, ValueSet::full(p.d()))?;
    Ok(GapCertificate {
        digest: instance_digest(p),
        d: p.d(),
        target: p.variables()[target].clone(),
        lemmas: b.lemmas,
    })
}

/// Which family of checks failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStep {
    /// A step is not licensed by a constraint of the instance.
    License,
    /// A Bézout witness does not give a nonzero constant modulo `x^d - 1`.
    Bezout,
    /// Exact telescoping, rule reduction or combination algebra fails.
    Algebra,
    /// The lemma list does not end in `I = 0`.
    Conclusion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject {
        step: CheckStep,
        lemma: Option<usize>,
        link: Option<usize>,
        reason: String,
    },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

struct Checker<'a> {
    p: &'a Instance,
    d: usize,
    rel_polys: HashMap<String, MultiPoly>,
}

type CheckResult = Result<(), (CheckStep, Option<usize>, String)>;

fn fail<T>(step: CheckStep, link: Option<usize>, reason: impl Into<String>) -> Result<T, (CheckStep, Option<usize>, String)> {
    Err((step, link, reason.into()))
}

impl Checker<'_> {
    fn var(&self, name: &str, link: Option<usize>) -> Result<usize, (CheckStep, Option<usize>, String)> {
        self.p
            .var_index(name)
            .ok_or_else(|| (CheckStep::License, link, format!("unknown variable {name:?}")))
    }

    fn relation_poly(&mut self, name: &str) -> MultiPoly {
        let rel = self.p.language().get(name).expect("instance relations exist");
        self.rel_polys
            .entry(name.to_string())
            .or_insert_with(|| {
                let vars = (0..rel.arity()).map(|i| format!("p{i}")).collect();
                relation_polynomial_with_vars(rel, vars)
            })
            .clone()
    }

    fn check_lemma(&mut self, idx: usize, lemmas: &[Lemma]) -> CheckResult {
        let d = self.d;
        let full = ValueSet::full(d);
        match &lemmas[idx] {
            Lemma::Combine {
                var,
                kept,
                left,
                right,
                dropped,
                dropped_other,
                coeff,
            } => {
                self.var(var, None)?;
                if *left >= idx || *right >= idx {
                    return fail(CheckStep::Conclusion, None, "combination cites a later lemma");
                }
                let (l, r) = (&lemmas[*left], &lemmas[*right]);
                if l.var() != var || r.var() != var {
                    return fail(CheckStep::Conclusion, None, "combination mixes variables");
                }
                if !kept.is_subset(full)
                    || *dropped >= d
                    || *dropped_other >= d
                    || l.kept() != kept.union(ValueSet::singleton(*dropped))
                    || r.kept() != kept.union(ValueSet::singleton(*dropped_other))
                {
                    return fail(CheckStep::Conclusion, None, "combined kept sets do not match");
                }
                if coeff.is_zero() {
                    return fail(CheckStep::Algebra, None, "zero combination coefficient");
                }
                let lhs = &vanishing_polynomial(l.kept(), d) - &vanishing_polynomial(r.kept(), d);
                let rhs = vanishing_polynomial(*kept, d).scale(coeff);
                if lhs != rhs {
                    return fail(CheckStep::Algebra, None, "combination identity fails");
                }
                Ok(())
            }
            Lemma::Section {
                var,
                value,
                kept,
                domains,
                links,
            } => {
                let v = self.var(var, None)?;
                if *value >= d || *kept != ValueSet::singleton(*value).complement(d) {
                    return fail(CheckStep::Conclusion, None, "section conclusion does not match its pin");
                }
                // Domain generator per variable: the pin for v, cited lemmas, else x^d - 1.
                let mut dom_of: HashMap<usize, ValueSet> = HashMap::new();
                dom_of.insert(v, ValueSet::singleton(*value));
                for c in domains {
                    let z = self.var(&c.var, None)?;
                    if c.lemma >= idx || lemmas[c.lemma].var() != c.var || z == v {
                        return fail(CheckStep::License, None, format!("bad domain citation for {:?}", c.var));
                    }
                    dom_of.insert(z, lemmas[c.lemma].kept());
                }
                let dom = |z: usize| dom_of.get(&z).copied().unwrap_or(full);

                let Some(first) = links.first() else {
                    return fail(CheckStep::Conclusion, None, "section without links");
                };
                let w0 = self.var(&first.var, Some(0))?;
                if first.step.is_some() || !dom(w0).is_subset(first.set) {
                    return fail(CheckStep::License, Some(0), "first link is not an axiom");
                }
                for i in 1..links.len() {
                    let (prev, next) = (&links[i - 1], &links[i]);
                    let w = self.var(&prev.var, Some(i))?;
                    let y = self.var(&next.var, Some(i))?;
                    let Some(step) = &next.step else {
                        return fail(CheckStep::License, Some(i), "missing rule");
                    };
                    self.check_step(w, prev.set, y, next.set, step, &dom, i)?;
                }
                if !links.last().unwrap().set.is_empty() {
                    return fail(CheckStep::Conclusion, Some(links.len() - 1), "chain does not end in the empty set");
                }
                Ok(())
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_step(
        &mut self,
        w: usize,
        s: ValueSet,
        y: usize,
        s_next: ValueSet,
        step: &CertStep,
        dom: &dyn Fn(usize) -> ValueSet,
        link: usize,
    ) -> CheckResult {
        let d = self.d;
        let at = Some(link);
        // (i) the rule is licensed by a constraint and the claimed set covers the image.
        if step.constraint >= self.p.constraints().len() {
            return fail(CheckStep::License, at, "no such constraint");
        }
        let scope = self.p.scope(step.constraint).to_vec();
        if scope.get(step.source_pos) != Some(&w) || scope.get(step.target_pos) != Some(&y) {
            return fail(CheckStep::License, at, "rule positions do not hold the chained variables");
        }
        let rel = self.p.relation(step.constraint);
        let image: ValueSet = rel
            .tuples()
            .iter()
            .filter(|t| {
                t.iter().enumerate().all(|(pos, &val)| {
                    let z = scope[pos];
                    dom(z).contains(val)
                        && (z != w || s.contains(val))
                        && scope.iter().enumerate().all(|(q, &u)| u != z || t[q] == val)
                })
            })
            .map(|t| t[step.target_pos])
            .collect();
        if !image.is_subset(s_next) {
            return fail(CheckStep::License, at, format!("claimed set {s_next} misses part of the image {image}"));
        }

        // (ii) and (iii): Bézout witness for the source set.
        match (&step.bezout, s == ValueSet::full(d)) {
            (None, true) => {}
            (None, false) => return fail(CheckStep::Bezout, at, "missing Bézout witness"),
            (Some(_), true) => return fail(CheckStep::Bezout, at, "unexpected Bézout witness"),
            (Some(b), false) => {
                if b.c.is_zero() {
                    return fail(CheckStep::Bezout, at, "zero Bézout constant");
                }
                let pq = &gap_polynomial(s, d) * &b.q;
                let modulus = UniPoly::x_pow_minus_one(d);
                let rem = pq.rem(&modulus).map_err(|e| (CheckStep::Bezout, at, e.to_string()))?;
                if rem != UniPoly::constant(b.c.clone()) {
                    return fail(CheckStep::Bezout, at, "p·q is not the stated constant modulo x^d - 1");
                }
                if pq != &UniPoly::constant(b.c.clone()) + &(&b.r * &modulus) {
                    return fail(CheckStep::Algebra, at, "p·q ≠ c + r·(x^d - 1)");
                }
            }
        }

        // (iii) H_S(w)·(P_R - λ_1)·G_{S'}(y) lies in the ideal of the scope's domain polynomials.
        let vars = distinct_in_order(&scope);
        let names: Vec<String> = vars.iter().map(|&u| self.p.variables()[u].clone()).collect();
        let mapping: Vec<usize> = scope.iter().map(|u| vars.iter().position(|x| x == u).unwrap()).collect();
        let slot = |u: usize| vars.iter().position(|&x| x == u).unwrap();
        let rel_name = self.p.constraints()[step.constraint].rel.clone();
        let pr = self.relation_poly(&rel_name).substitute_vars(names.clone(), &mapping);
        let middle = pr.sub(&MultiPoly::constant(d, names.clone(), lambda(1, d)));
        let left = MultiPoly::from_unipoly(d, names.clone(), slot(w), &vanishing_polynomial(s.complement(d), d));
        let right = MultiPoly::from_unipoly(d, names.clone(), slot(y), &vanishing_polynomial(s_next, d));
        let mut t = left.mul(&middle).mul(&right);
        for (k, &u) in vars.iter().enumerate() {
            let g = vanishing_polynomial(dom(u), d);
            t = t
                .reduce_univariate(k, &g)
                .map_err(|e| (CheckStep::Algebra, at, e.to_string()))?;
        }
        if !t.is_zero() {
            return fail(CheckStep::Algebra, at, "rule polynomial does not reduce to zero");
        }
        Ok(())
    }
}

/// Re-verifies a certificate against `p` using exact arithmetic only.
pub fn check_certificate(p: &Instance, cert: &GapCertificate) -> Verdict {
    let reject = |step, lemma, link, reason: String| Verdict::Reject {
        step,
        lemma,
        link,
        reason,
    };
    if cert.digest != instance_digest(p) {
        return reject(CheckStep::License, None, None, "certificate is for a different instance".into());
    }
    if cert.d != p.d() {
        return reject(CheckStep::License, None, None, "domain size mismatch".into());
    }
    let mut checker = Checker {
        p,
        d: p.d(),
        rel_polys: HashMap::new(),
    };
    for idx in 0..cert.lemmas.len() {
        if let Err((step, link, reason)) = checker.check_lemma(idx, &cert.lemmas) {
            return reject(step, Some(idx), link, reason);
        }
    }
    match cert.lemmas.last() {
        Some(last) if last.var() == cert.target && last.kept().is_empty() => Verdict::Accept,
        _ => reject(
            CheckStep::Conclusion,
            cert.lemmas.len().checked_sub(1),
            None,
            "final lemma does not conclude I = 0".into(),
        ),
    }
}

/// Number of single algebraic coefficients that [`perturb`] can alter.
pub fn perturbation_count(cert: &GapCertificate) -> usize {
    let mut n = 0;
    visit_coefficients(&mut cert.clone(), &mut |_| n += 1);
    n
}

/// Copy of the certificate with its `index`-th algebraic coefficient increased by one.
pub fn perturb(cert: &GapCertificate, index: usize) -> Option<GapCertificate> {
    let mut out = cert.clone();
    let mut seen = 0;
    let mut hit = false;
    visit_coefficients(&mut out, &mut |c| {
        if seen == index {
            *c = &*c + &CycNum::one();
            hit = true;
        }
        seen += 1;
    });
    hit.then_some(out)
}

/// Visits every `q`, `c`, `r` and combination coefficient in canonical order.
fn visit_coefficients(cert: &mut GapCertificate, f: &mut dyn FnMut(&mut CycNum)) {
    let bump_poly = |p: &mut UniPoly, f: &mut dyn FnMut(&mut CycNum)| {
        let mut coeffs = p.coeffs().to_vec();
        for c in coeffs.iter_mut() {
            f(c);
        }
        *p = UniPoly::from_coeffs(coeffs);
    };
    for lemma in cert.lemmas.iter_mut() {
        match lemma {
            Lemma::Combine { coeff, .. } => f(coeff),
            Lemma::Section { links, .. } => {
                for link in links.iter_mut() {
                    if let Some(CertStep { bezout: Some(b), .. }) = &mut link.step {
                        bump_poly(&mut b.q, f);
                        f(&mut b.c);
                        bump_poly(&mut b.r, f);
                    }
                }
            }
        }
    }
}
