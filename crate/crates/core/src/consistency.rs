//! Arc consistency, Linear Arc-Consistency with provenance, and Singleton
//! Linear Arc-Consistency (SLAC).
//!
//! Linear AC is the unary Datalog program whose rules have one IDB atom and one
//! constraint in the body: from `T_S(w)` and a constraint `R(u_1..u_r)` with `w`
//! in its scope, derive `T_{S'}(y)` for each scope variable `y`, where `S'` is the
//! set of values `y` takes over tuples of `R` that put `w` in `S` and every scope
//! variable in its current domain. Each derived fact remembers the single fact
//! it came from, so refutations are linear chains.

use std::collections::VecDeque;

use serde::Serialize;

use crate::csp::{distinct_in_order, Instance, ValueSet};

/// Current domain of each variable, indexed by variable position.
pub type DomainMap = Vec<ValueSet>;

pub type FactId = usize;

/// Where a derived fact came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// `T_{{a}}(v)` from pinning `v = a`.
    Pin { var: usize, value: usize },
    /// `T_{D_v}(v)` from the current domain of `v`.
    Domain { var: usize },
    /// One rule firing through `constraint`, reading the scope position
    /// `source_pos` (holding the source fact's variable) and writing `target_pos`.
    Rule {
        constraint: usize,
        source_pos: usize,
        source: FactId,
        target_pos: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedFact {
    pub var: usize,
    pub set: ValueSet,
    pub provenance: Provenance,
}

/// All facts of one propagation run in derivation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactStore {
    facts: Vec<DerivedFact>,
}

impl FactStore {
    pub fn facts(&self) -> &[DerivedFact] {
        &self.facts
    }

    pub fn get(&self, id: FactId) -> Option<&DerivedFact> {
        self.facts.get(id)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Appends a fact without checking it; used to build stores by hand.
    pub fn push(&mut self, fact: DerivedFact) -> FactId {
        self.facts.push(fact);
        self.facts.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearAcOutcome {
    Consistent { domains: DomainMap, facts: FactStore },
    /// Some fact derived the empty set; `contradiction` is its id.
    Inconsistent { facts: FactStore, contradiction: FactId },
}

impl LinearAcOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, LinearAcOutcome::Consistent { .. })
    }

    pub fn facts(&self) -> &FactStore {
        match self {
            LinearAcOutcome::Consistent { facts, .. } | LinearAcOutcome::Inconsistent { facts, .. } => facts,
        }
    }
}

/// A rule application as recorded in a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RuleRef {
    pub constraint: usize,
    pub source_pos: usize,
    pub target_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainLink {
    pub var: usize,
    pub set: ValueSet,
    /// `None` for the first link, which is an axiom.
    pub rule: Option<RuleRef>,
}

/// Linear derivation `(w_0 ∈ S_0) → (w_1 ∈ S_1) → …`, each step licensed by one constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefutationChain {
    /// The pinned pair of the run the chain came from, if any.
    pub pin: Option<(usize, usize)>,
    pub links: Vec<ChainLink>,
}

impl RefutationChain {
    /// Number of rule steps.
    pub fn len(&self) -> usize {
        self.links.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last(&self) -> &ChainLink {
        self.links.last().expect("chains have an axiom link")
    }

    /// True if the chain starts from the pinned axiom rather than a domain axiom.
    pub fn starts_at_pin(&self) -> bool {
        match (self.pin, self.links.first()) {
            (Some((v, a)), Some(first)) => first.var == v && first.set == ValueSet::singleton(a),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("fact {0} is not in the store")]
    MissingFact(FactId),
    #[error("fact {fact} cites source {source_fact}, which does not precede it")]
    BrokenProvenance { fact: FactId, source_fact: FactId },
}

/// Values each distinct scope variable takes over the tuples of constraint `ci`
/// that are compatible with `domains`, repeated variables, and
/// `source_var ∈ source_set`.
pub fn rule_images(
    p: &Instance,
    ci: usize,
    source_var: usize,
    source_set: ValueSet,
    domains: &[ValueSet],
) -> Vec<(usize, ValueSet)> {
    let scope = p.scope(ci);
    let vars = distinct_in_order(scope);
    let mut images = vec![ValueSet::EMPTY; vars.len()];
    let slot: Vec<usize> = scope
        .iter()
        .map(|v| vars.iter().position(|u| u == v).unwrap())
        .collect();
    'tuples: for t in p.relation(ci).tuples() {
        let mut chosen = vec![usize::MAX; vars.len()];
        for (pos, &val) in t.iter().enumerate() {
            let v = scope[pos];
            let k = slot[pos];
            if chosen[k] == usize::MAX {
                if !domains[v].contains(val) || (v == source_var && !source_set.contains(val)) {
                    continue 'tuples;
                }
                chosen[k] = val;
            } else if chosen[k] != val {
                continue 'tuples;
            }
        }
        for (k, &val) in chosen.iter().enumerate() {
            images[k].insert(val);
        }
    }
    vars.into_iter().zip(images).collect()
}

/// Linear Arc-Consistency from `domains`, optionally pinning `var = value`.
///
/// Seeds are the pin (if any) followed by one domain axiom per other variable,
/// processed breadth-first. A fact is dropped when an earlier fact about the
/// same variable already has a subset of its set. Propagation stops at the
/// first empty set.
pub fn linear_ac(p: &Instance, domains: &[ValueSet], pin: Option<(usize, usize)>) -> LinearAcOutcome {
    let n = p.variables().len();
    assert_eq!(domains.len(), n, "one domain per variable");
    let mut eff = domains.to_vec();
    if let Some((v, a)) = pin {
        eff[v] = ValueSet::singleton(a);
    }
    let mut touching = vec![Vec::new(); n];
    for ci in 0..p.constraints().len() {
        for v in distinct_in_order(p.scope(ci)) {
            touching[v].push(ci);
        }
    }

    let mut store = FactStore::default();
    let mut per_var: Vec<Vec<ValueSet>> = vec![Vec::new(); n];
    let mut queue = VecDeque::new();
    let add = |store: &mut FactStore, per_var: &mut Vec<Vec<ValueSet>>, fact: DerivedFact| -> Option<FactId> {
        if per_var[fact.var].iter().any(|s| s.is_subset(fact.set)) {
            return None;
        }
        per_var[fact.var].push(fact.set);
        Some(store.push(fact))
    };

    if let Some((v, a)) = pin {
        let id = add(&mut store, &mut per_var, DerivedFact {
            var: v,
            set: ValueSet::singleton(a),
            provenance: Provenance::Pin { var: v, value: a },
        });
        queue.extend(id);
    }
    for v in 0..n {
        if pin.is_some_and(|(pv, _)| pv == v) {
            continue;
        }
        let set = eff[v];
        if let Some(id) = add(&mut store, &mut per_var, DerivedFact {
            var: v,
            set,
            provenance: Provenance::Domain { var: v },
        }) {
            if set.is_empty() {
                return LinearAcOutcome::Inconsistent { facts: store, contradiction: id };
            }
            queue.push_back(id);
        }
    }

    while let Some(fid) = queue.pop_front() {
        let DerivedFact { var: w, set: s, .. } = store.facts[fid].clone();
        for &ci in &touching[w] {
            let scope = p.scope(ci);
            let source_pos = scope.iter().position(|&u| u == w).unwrap();
            for (y, image) in rule_images(p, ci, w, s, &eff) {
                let target_pos = scope.iter().position(|&u| u == y).unwrap();
                let fact = DerivedFact {
                    var: y,
                    set: image,
                    provenance: Provenance::Rule {
                        constraint: ci,
                        source_pos,
                        source: fid,
                        target_pos,
                    },
                };
                if let Some(id) = add(&mut store, &mut per_var, fact) {
                    if image.is_empty() {
                        return LinearAcOutcome::Inconsistent { facts: store, contradiction: id };
                    }
                    queue.push_back(id);
                }
            }
        }
    }

    let domains = (0..n)
        .map(|v| per_var[v].iter().fold(eff[v], |acc, s| acc.intersect(*s)))
        .collect();
    LinearAcOutcome::Consistent { domains, facts: store }
}

/// Walks single-source provenance from `target` back to its axiom.
pub fn extract_chain(
    facts: &FactStore,
    target: FactId,
    pin: Option<(usize, usize)>,
) -> Result<RefutationChain, ChainError> {
    let mut links = Vec::new();
    let mut cur = target;
    loop {
        let fact = facts.get(cur).ok_or(ChainError::MissingFact(cur))?;
        match fact.provenance {
            Provenance::Pin { .. } | Provenance::Domain { .. } => {
                links.push(ChainLink {
                    var: fact.var,
                    set: fact.set,
                    rule: None,
                });
                break;
            }
            Provenance::Rule {
                constraint,
                source_pos,
                source,
                target_pos,
            } => {
                if source >= cur {
                    return Err(ChainError::BrokenProvenance { fact: cur, source_fact: source });
                }
                links.push(ChainLink {
                    var: fact.var,
                    set: fact.set,
                    rule: Some(RuleRef {
                        constraint,
                        source_pos,
                        target_pos,
                    }),
                });
                cur = source;
            }
        }
    }
    links.reverse();
    Ok(RefutationChain { pin, links })
}

/// Re-derives every step of `chain` under `domains` (with the pin applied) and
/// checks that each recorded set contains the recomputed image.
pub fn replay_chain(p: &Instance, chain: &RefutationChain, domains: &[ValueSet]) -> bool {
    let mut eff = domains.to_vec();
    if let Some((v, a)) = chain.pin {
        eff[v] = ValueSet::singleton(a);
    }
    let Some(first) = chain.links.first() else {
        return false;
    };
    if first.rule.is_some() || !eff[first.var].is_subset(first.set) {
        return false;
    }
    chain.links.windows(2).all(|w| {
        let (prev, next) = (&w[0], &w[1]);
        let Some(rule) = next.rule else { return false };
        if rule.constraint >= p.constraints().len() {
            return false;
        }
        let scope = p.scope(rule.constraint);
        if scope.get(rule.source_pos) != Some(&prev.var) || scope.get(rule.target_pos) != Some(&next.var) {
            return false;
        }
        rule_images(p, rule.constraint, prev.var, prev.set, &eff)
            .into_iter()
            .any(|(y, image)| y == next.var && image.is_subset(next.set))
    })
}

/// One value removed by SLAC, with the refutation of its pin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub var: usize,
    pub value: usize,
    pub chain: RefutationChain,
    /// Domains in force when the pin was probed.
    pub domains: DomainMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlacResult {
    pub domains: DomainMap,
    pub consistent: bool,
    /// Removals in the order they happened.
    pub removals: Vec<Removal>,
}

impl SlacResult {
    pub fn chain(&self, var: usize, value: usize) -> Option<&RefutationChain> {
        self.removals
            .iter()
            .find(|r| r.var == var && r.value == value)
            .map(|r| &r.chain)
    }

    /// A variable whose domain was emptied, if any.
    pub fn emptied_var(&self) -> Option<usize> {
        self.domains.iter().position(|s| s.is_empty())
    }

    /// Structured trace with variable names.
    pub fn to_trace_json(&self, p: &Instance) -> String {
        #[derive(Serialize)]
        struct LinkDoc<'a> {
            var: &'a str,
            set: ValueSet,
            rule: Option<RuleRef>,
        }
        #[derive(Serialize)]
        struct RemovalDoc<'a> {
            var: &'a str,
            value: usize,
            chain: Vec<LinkDoc<'a>>,
        }
        #[derive(Serialize)]
        struct TraceDoc<'a> {
            consistent: bool,
            domains: Vec<(&'a str, ValueSet)>,
            removals: Vec<RemovalDoc<'a>>,
        }
        let names = p.variables();
        let doc = TraceDoc {
            consistent: self.consistent,
            domains: names.iter().map(String::as_str).zip(self.domains.iter().copied()).collect(),
            removals: self
                .removals
                .iter()
                .map(|r| RemovalDoc {
                    var: &names[r.var],
                    value: r.value,
                    chain: r
                        .chain
                        .links
                        .iter()
                        .map(|l| LinkDoc {
                            var: &names[l.var],
                            set: l.set,
                            rule: l.rule,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("trace serializes")
    }
}

/// Singleton Linear Arc-Consistency: repeatedly remove any value whose pin
/// makes Linear AC inconsistent, sweeping variables in declaration order until
/// a full pass removes nothing or some domain empties.
pub fn slac(p: &Instance) -> SlacResult {
    let n = p.variables().len();
    let mut domains = vec![ValueSet::full(p.d()); n];
    let mut removals = Vec::new();
    loop {
        let mut changed = false;
        for v in 0..n {
            let values: Vec<usize> = domains[v].iter().collect();
            for a in values {
                if let LinearAcOutcome::Inconsistent { facts, contradiction } = linear_ac(p, &domains, Some((v, a))) {
                    let chain = extract_chain(&facts, contradiction, Some((v, a))).expect("store is well formed");
                    removals.push(Removal {
                        var: v,
                        value: a,
                        chain,
                        domains: domains.clone(),
                    });
                    domains[v].remove(a);
                    changed = true;
                    if domains[v].is_empty() {
                        return SlacResult {
                            domains,
                            consistent: false,
                            removals,
                        };
                    }
                }
            }
        }
        if !changed {
            return SlacResult {
                domains,
                consistent: true,
                removals,
            };
        }
    }
}

/// Generalized arc consistency to a fixpoint; `None` if some domain empties.
pub fn full_ac(p: &Instance, domains: &[ValueSet]) -> Option<DomainMap> {
    let mut doms = domains.to_vec();
    if doms.iter().any(|s| s.is_empty()) {
        return None;
    }
    loop {
        let mut changed = false;
        for ci in 0..p.constraints().len() {
            // Any scope variable works as the "source" with its full current domain.
            let Some(&first) = p.scope(ci).first() else {
                if p.relation(ci).is_empty() {
                    return None;
                }
                continue;
            };
            for (y, image) in rule_images(p, ci, first, doms[first], &doms) {
                if image != doms[y] {
                    doms[y] = doms[y].intersect(image);
                    changed = true;
                    if doms[y].is_empty() {
                        return None;
                    }
                }
            }
        }
        if !changed {
            return Some(doms);
        }
    }
}
