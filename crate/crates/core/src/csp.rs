//! Relations, languages and CSP instances over the roots-of-unity domain `U_d`,
//! plus the brute-force classical oracle.
//!
//! Domain values are indices `0..d`; index `k` stands for `λ_k = e^{2πik/d}`.
//! The translation to field elements only happens at algebra boundaries.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CspError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("domain size must be between 1 and 64, got {0}")]
    BadDomain(usize),
    #[error("relation {name:?}: tuple {tuple:?} does not fit arity {arity} over domain {d}")]
    BadTuple {
        name: String,
        tuple: Vec<usize>,
        arity: usize,
        d: usize,
    },
    #[error("relation {name:?} is over domain {found}, language is over {expected}")]
    DomainMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("arity mismatch: constraint {index} applies {rel:?} (arity {arity}) to a scope of length {scope_len}")]
    ArityMismatch {
        index: usize,
        rel: String,
        arity: usize,
        scope_len: usize,
    },
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("duplicate variable {0:?}")]
    DuplicateVariable(String),
    #[error("partial assignment: variable {0:?} has no value")]
    PartialAssignment(String),
    #[error("assignment gives {var:?} the value {value}, outside the domain of size {d}")]
    ValueOutOfRange { var: String, value: usize, d: usize },
    #[error("search space of {0} assignments exceeds the brute-force guard")]
    TooLarge(f64),
}

/// Upper bound on the number of assignments any exhaustive search may visit.
pub const SEARCH_GUARD: f64 = 1e8;

/// A subset of `{0..d}` as a bitmask (`d ≤ 64`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ValueSet(u64);

impl ValueSet {
    pub const EMPTY: ValueSet = ValueSet(0);

    pub fn full(d: usize) -> Self {
        if d >= 64 {
            ValueSet(u64::MAX)
        } else {
            ValueSet((1u64 << d) - 1)
        }
    }

    pub fn singleton(a: usize) -> Self {
        ValueSet(1u64 << a)
    }

    pub fn from_bits(bits: u64) -> Self {
        ValueSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, a: usize) -> bool {
        a < 64 && self.0 >> a & 1 == 1
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1u64 << a;
    }

    pub fn remove(&mut self, a: usize) {
        self.0 &= !(1u64 << a);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        ValueSet(self.0 | other.0)
    }

    pub fn intersect(self, other: Self) -> Self {
        ValueSet(self.0 & other.0)
    }

    pub fn minus(self, other: Self) -> Self {
        ValueSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Complement within `{0..d}`.
    pub fn complement(self, d: usize) -> Self {
        ValueSet::full(d).minus(self)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&a| self.contains(a))
    }

    pub fn max(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }
}

impl FromIterator<usize> for ValueSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ValueSet::EMPTY;
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

impl Serialize for ValueSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ValueSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = items.iter().find(|&&a| a >= 64) {
            return Err(serde::de::Error::custom(format!("value {bad} out of range")));
        }
        Ok(items.into_iter().collect())
    }
}

/// A finite relation of fixed arity over `{0..d}`; tuples are sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    d: usize,
    arity: usize,
    tuples: Vec<Vec<usize>>,
}

impl Relation {
    pub fn new(d: usize, arity: usize, tuples: Vec<Vec<usize>>) -> Result<Self, CspError> {
        Self::named("<anonymous>", d, arity, tuples)
    }

    fn named(name: &str, d: usize, arity: usize, mut tuples: Vec<Vec<usize>>) -> Result<Self, CspError> {
        if d == 0 || d > 64 {
            return Err(CspError::BadDomain(d));
        }
        if let Some(t) = tuples.iter().find(|t| t.len() != arity || t.iter().any(|&a| a >= d)) {
            return Err(CspError::BadTuple {
                name: name.to_string(),
                tuple: t.clone(),
                arity,
                d,
            });
        }
        tuples.sort();
        tuples.dedup();
        Ok(Relation { d, arity, tuples })
    }

    /// All tuples satisfying `pred`, enumerated in lexicographic order.
    pub fn from_predicate(d: usize, arity: usize, pred: impl Fn(&[usize]) -> bool) -> Self {
        let tuples = all_tuples(d, arity).filter(|t| pred(t)).collect();
        Relation::new(d, arity, tuples).expect("generated tuples are in range")
    }

    pub fn full(d: usize, arity: usize) -> Self {
        Self::from_predicate(d, arity, |_| true)
    }

    pub fn equality(d: usize) -> Self {
        Self::from_predicate(d, 2, |t| t[0] == t[1])
    }

    pub fn unary(d: usize, values: ValueSet) -> Self {
        Self::from_predicate(d, 1, |t| values.contains(t[0]))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[usize]) -> bool {
        self.tuples
            .binary_search_by(|probe| probe.as_slice().cmp(t))
            .is_ok()
    }

    /// Values occurring at position `i`.
    pub fn projection(&self, i: usize) -> ValueSet {
        self.tuples.iter().map(|t| t[i]).collect()
    }

    /// Image of the relation under a map applied coordinatewise, over a new domain.
    pub fn map_values(&self, d_to: usize, f: impl Fn(usize) -> usize) -> Self {
        let tuples = self
            .tuples
            .iter()
            .map(|t| t.iter().map(|&a| f(a)).collect())
            .collect();
        Relation::new(d_to, self.arity, tuples).expect("mapped values are in range")
    }
}

/// Every tuple of `{0..d}^arity` in lexicographic order.
pub fn all_tuples(d: usize, arity: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = d.checked_pow(arity as u32).expect("tuple space overflow");
    (0..total).map(move |mut idx| {
        let mut t = vec![0; arity];
        for slot in t.iter_mut().rev() {
            *slot = idx % d;
            idx /= d;
        }
        t
    })
}

/// A named set of relations over a common domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Language {
    d: usize,
    relations: BTreeMap<String, Relation>,
}

impl Language {
    pub fn new(d: usize) -> Self {
        assert!((1..=64).contains(&d), "domain size out of range");
        Language {
            d,
            relations: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, rel: Relation) -> Result<Self, CspError> {
        self.insert(name, rel)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: &str, rel: Relation) -> Result<(), CspError> {
        if rel.d != self.d {
            return Err(CspError::DomainMismatch {
                name: name.to_string(),
                expected: self.d,
                found: rel.d,
            });
        }
        self.relations.insert(name.to_string(), rel);
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> &BTreeMap<String, Relation> {
        &self.relations
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub scope: Vec<String>,
    pub rel: String,
}

impl Constraint {
    pub fn new(scope: &[&str], rel: &str) -> Self {
        Constraint {
            scope: scope.iter().map(|s| s.to_string()).collect(),
            rel: rel.to_string(),
        }
    }
}

/// Map from variable name to domain index.
pub type ClassicalAssignment = BTreeMap<String, usize>;

/// A validated CSP instance `(V, U_d, C)` with precomputed variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    language: Language,
    variables: Vec<String>,
    constraints: Vec<Constraint>,
    var_index: HashMap<String, usize>,
    scopes: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationDoc {
    arity: usize,
    tuples: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    d: usize,
    relations: BTreeMap<String, RelationDoc>,
    variables: Vec<String>,
    constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(
        language: Language,
        variables: Vec<String>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, CspError> {
        let mut var_index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if var_index.insert(v.clone(), i).is_some() {
                return Err(CspError::DuplicateVariable(v.clone()));
            }
        }
        let mut scopes = Vec::with_capacity(constraints.len());
        for (index, c) in constraints.iter().enumerate() {
            let rel = language
                .get(&c.rel)
                .ok_or_else(|| CspError::UnknownRelation(c.rel.clone()))?;
            if rel.arity != c.scope.len() {
                return Err(CspError::ArityMismatch {
                    index,
                    rel: c.rel.clone(),
                    arity: rel.arity,
                    scope_len: c.scope.len(),
                });
            }
            let idx = c
                .scope
                .iter()
                .map(|v| {
                    var_index
                        .get(v)
                        .copied()
                        .ok_or_else(|| CspError::UnknownVariable(v.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            scopes.push(idx);
        }
        Ok(Instance {
            language,
            variables,
            constraints,
            var_index,
            scopes,
        })
    }

    /// Convenience constructor from string slices.
    pub fn build(language: Language, variables: &[&str], constraints: Vec<Constraint>) -> Result<Self, CspError> {
        Self::new(
            language,
            variables.iter().map(|s| s.to_string()).collect(),
            constraints,
        )
    }

    pub fn d(&self) -> usize {
        self.language.d
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    /// Variable indices of constraint `ci`'s scope.
    pub fn scope(&self, ci: usize) -> &[usize] {
        &self.scopes[ci]
    }

    pub fn relation(&self, ci: usize) -> &Relation {
        &self.language.relations[&self.constraints[ci].rel]
    }

    /// Parses and validates an instance document.
    pub fn from_json(text: &str) -> Result<Self, CspError> {
        let doc: InstanceDoc =
            serde_json::from_str(text).map_err(|e| CspError::Malformed(e.to_string()))?;
        if doc.d == 0 || doc.d > 64 {
            return Err(CspError::BadDomain(doc.d));
        }
        let mut language = Language::new(doc.d);
        for (name, r) in doc.relations {
            let rel = Relation::named(&name, doc.d, r.arity, r.tuples)?;
            language.insert(&name, rel)?;
        }
        Instance::new(language, doc.variables, doc.constraints)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            d: self.d(),
            relations: self
                .language
                .relations
                .iter()
                .map(|(k, r)| {
                    (
                        k.clone(),
                        RelationDoc {
                            arity: r.arity,
                            tuples: r.tuples.clone(),
                        },
                    )
                })
                .collect(),
            variables: self.variables.clone(),
            constraints: self.constraints.clone(),
        }
    }

    /// Dense assignment (indexed by variable position) to a named map.
    pub fn named_assignment(&self, values: &[usize]) -> ClassicalAssignment {
        self.variables.iter().cloned().zip(values.iter().copied()).collect()
    }

    /// Named map to a dense assignment, checking totality and range.
    pub fn dense_assignment(&self, s: &ClassicalAssignment) -> Result<Vec<usize>, CspError> {
        self.variables
            .iter()
            .map(|v| {
                let value = *s.get(v).ok_or_else(|| CspError::PartialAssignment(v.clone()))?;
                if value >= self.d() {
                    return Err(CspError::ValueOutOfRange {
                        var: v.clone(),
                        value,
                        d: self.d(),
                    });
                }
                Ok(value)
            })
            .collect()
    }

    pub(crate) fn satisfies_dense(&self, values: &[usize]) -> bool {
        (0..self.constraints.len()).all(|ci| {
            let t: Vec<usize> = self.scopes[ci].iter().map(|&v| values[v]).collect();
            self.relation(ci).contains(&t)
        })
    }

    /// Size of the full assignment space `d^|V|` as a float.
    pub fn search_space(&self) -> f64 {
        (self.d() as f64).powi(self.variables.len() as i32)
    }
}

/// Outcome of exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceResult {
    /// Lexicographically first satisfying assignment, if any.
    pub witness: Option<ClassicalAssignment>,
    /// Number of assignments settled by the search: the full space `d^|V|`
    /// when unsatisfiable, the lexicographic rank of the witness plus one otherwise.
    pub assignments: u64,
}

impl BruteForceResult {
    pub fn is_sat(&self) -> bool {
        self.witness.is_some()
    }
}

/// Depth-first search over assignments in lexicographic order (first variable
/// most significant), pruning on constraints whose scope is fully assigned.
struct Search<'a> {
    inst: &'a Instance,
    /// Constraints indexed by the last scope variable in declaration order.
    closing: Vec<Vec<usize>>,
    values: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance) -> Self {
        let mut closing = vec![Vec::new(); inst.variables.len()];
        for (ci, scope) in inst.scopes.iter().enumerate() {
            if let Some(&last) = scope.iter().max() {
                closing[last].push(ci);
            }
        }
        Search {
            inst,
            closing,
            values: vec![0; inst.variables.len()],
        }
    }

    fn nullary_ok(&self) -> bool {
        self.inst
            .scopes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_empty())
            .all(|(ci, _)| self.inst.relation(ci).contains(&[]))
    }

    fn consistent_at(&self, var: usize) -> bool {
        self.closing[var].iter().all(|&ci| {
            let t: Vec<usize> = self.inst.scopes[ci].iter().map(|&v| self.values[v]).collect();
            self.inst.relation(ci).contains(&t)
        })
    }

    /// Visits solutions in lexicographic order until `visit` returns false.
    fn run(&mut self, visit: &mut dyn FnMut(&[usize]) -> bool) {
        if !self.nullary_ok() {
            return;
        }
        self.descend(0, visit);
    }

    fn descend(&mut self, var: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if var == self.values.len() {
            return visit(&self.values);
        }
        for a in 0..self.inst.d() {
            self.values[var] = a;
            if self.consistent_at(var) && !self.descend(var + 1, visit) {
                return false;
            }
        }
        true
    }
}

fn check_guard(p: &Instance) -> Result<(), CspError> {
    let space = p.search_space();
    if space > SEARCH_GUARD {
        return Err(CspError::TooLarge(space));
    }
    Ok(())
}

/// Decides classical satisfiability exhaustively, returning the lexicographically first witness.
pub fn brute_force_solve(p: &Instance) -> Result<BruteForceResult, CspError> {
    check_guard(p)?;
    let mut witness = None;
    Search::new(p).run(&mut |values| {
        witness = Some(values.to_vec());
        false
    });
    let d = p.d() as u64;
    let assignments = match &witness {
        None => d.pow(p.variables.len() as u32),
        Some(w) => w.iter().fold(0u64, |acc, &a| acc * d + a as u64) + 1,
    };
    Ok(BruteForceResult {
        witness: witness.map(|w| p.named_assignment(&w)),
        assignments,
    })
}

/// Up to `limit` satisfying assignments in lexicographic order, as dense vectors.
pub fn enumerate_solutions(p: &Instance, limit: usize) -> Result<Vec<Vec<usize>>, CspError> {
    check_guard(p)?;
    let mut out = Vec::new();
    if limit == 0 {
        return Ok(out);
    }
    Search::new(p).run(&mut |values| {
        out.push(values.to_vec());
        out.len() < limit
    });
    Ok(out)
}

/// True iff every constraint's scope tuple lies in its relation.
pub fn validate_assignment(p: &Instance, s: &ClassicalAssignment) -> Result<bool, CspError> {
    let values = p.dense_assignment(s)?;
    Ok(p.satisfies_dense(&values))
}

/// Names that occur in scopes, deduplicated in first-occurrence order.
pub fn distinct_in_order(items: &[usize]) -> Vec<usize> {
    let mut seen = HashSet::new();
    items.iter().copied().filter(|x| seen.insert(*x)).collect()
}
