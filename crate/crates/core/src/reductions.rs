//! Gap-preserving reductions between CSP instances, together with the maps that
//! carry classical solutions and operator assignments across them.
//!
//! * pp-formulas, the gadget construction and equality collapse;
//! * the commutativity gadget `RT` (a full binary relation forcing commutation);
//! * endomorphisms, cores and the relation `R_Γ` used to eliminate constants;
//! * restriction to a subalgebra `B` and factoring by a congruence `θ`.
//!
//! Operator transports apply a univariate polynomial to every operator
//! (functional calculus); the polynomial interpolates the relabeling map on the
//! roots of unity, so diagonalizable operators are relabeled eigenvalue by eigenvalue.

use std::borrow::Cow;
use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csp::{all_tuples, Constraint, CspError, Instance, Language, Relation, ValueSet, SEARCH_GUARD};
use crate::cyclotomic::{AlgebraError, CycNum, UniPoly};
use crate::operators::{apply_unipoly_matrix, simultaneous_diagonalize, CMatrix, OpError, OperatorAssignment};

/// Name of the equality relation introduced by gadgets and the constants reduction.
pub const EQUALITY: &str = "EQ";
/// Name of the commutativity-gadget relation (the full binary relation).
pub const RT: &str = "RT";
/// Name of the relation `R_Γ` built by [`constants_reduction`].
pub const R_GAMMA: &str = "RGAMMA";

/// Largest domain for which all `d^d` unary maps are enumerated.
pub const ENDO_GUARD: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("search space of {0:.3e} exceeds the guard")]
    TooLarge(f64),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("malformed pp-formula: {0}")]
    BadFormula(String),
    #[error("pp-formula does not define {0:?}")]
    FormulaMismatch(String),
    #[error("language has no relation {RT:?}")]
    MissingRt,
    #[error("relation {RT:?} is not the full binary relation")]
    RtNotFull,
    #[error("language is not a core: endomorphism {0:?} is not a permutation")]
    NotCore(Vec<usize>),
    #[error("map {0:?} is not injective")]
    NotInjective(Vec<usize>),
    #[error("malformed map: {0}")]
    BadMap(String),
    #[error("malformed partition: {0}")]
    BadPartition(String),
    #[error("relation {0:?} is not a constant (singleton unary) relation")]
    NotConstant(String),
    #[error("domain mismatch: expected {expected}, got {got}")]
    DomainMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Op(#[from] OpError),
}

/// One atom of a pp-formula. Argument `i < arity` is `x_i`, otherwise `y_{i - arity}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PPAtom {
    pub rel: String,
    pub args: Vec<usize>,
}

/// `φ(x_1..x_r) = ∃ y_1..y_s ⋀ atoms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PPFormula {
    pub arity: usize,
    pub exists: usize,
    pub atoms: Vec<PPAtom>,
}

impl PPFormula {
    pub fn new(arity: usize, exists: usize, atoms: Vec<(&str, Vec<usize>)>) -> Self {
        PPFormula {
            arity,
            exists,
            atoms: atoms
                .into_iter()
                .map(|(rel, args)| PPAtom {
                    rel: rel.to_string(),
                    args,
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ReductionError> {
        serde_json::from_str(text).map_err(|e| ReductionError::BadFormula(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("formula serializes")
    }

    fn width(&self) -> usize {
        self.arity + self.exists
    }

    /// Resolves atoms against `lang`, checking indices and arities. `EQ`
    /// always means equality, whether or not the language lists it.
    fn resolve<'a>(&'a self, lang: &'a Language) -> Result<Vec<(Cow<'a, Relation>, &'a [usize])>, ReductionError> {
        if self.atoms.is_empty() {
            return Err(ReductionError::BadFormula("no atoms".into()));
        }
        let mut out = Vec::with_capacity(self.atoms.len());
        for atom in &self.atoms {
            let rel = if atom.rel == EQUALITY {
                Cow::Owned(Relation::equality(lang.d()))
            } else {
                Cow::Borrowed(
                    lang.get(&atom.rel)
                        .ok_or_else(|| ReductionError::UnknownRelation(atom.rel.clone()))?,
                )
            };
            if rel.arity() != atom.args.len() {
                return Err(ReductionError::BadFormula(format!("atom {} has wrong arity", atom.rel)));
            }
            if atom.args.iter().any(|&i| i >= self.width()) {
                return Err(ReductionError::BadFormula(format!("atom {} index out of range", atom.rel)));
            }
            out.push((rel, atom.args.as_slice()));
        }
        Ok(out)
    }
}

fn guard(d: usize, n: usize) -> Result<(), ReductionError> {
    let size = (d as f64).powi(n as i32);
    if size > SEARCH_GUARD {
        return Err(ReductionError::TooLarge(size));
    }
    Ok(())
}

/// Lexicographically first witness `y` with `φ(x, y)`, if any.
fn pp_witness(atoms: &[(Cow<'_, Relation>, &[usize])], d: usize, x: &[usize], exists: usize) -> Option<Vec<usize>> {
    let r = x.len();
    let mut full = x.to_vec();
    full.resize(r + exists, 0);
    let holds = |full: &[usize]| {
        atoms.iter().all(|(rel, args)| {
            let t: Vec<usize> = args.iter().map(|&i| full[i]).collect();
            rel.contains(&t)
        })
    };
    for y in all_tuples(d, exists) {
        full[r..].copy_from_slice(&y);
        if holds(&full) {
            return Some(y);
        }
    }
    None
}

/// The relation defined by `φ` over `lang`, by brute force.
pub fn pp_evaluate(phi: &PPFormula, lang: &Language) -> Result<Relation, ReductionError> {
    let d = lang.d();
    guard(d, phi.width())?;
    let atoms = phi.resolve(lang)?;
    let tuples = all_tuples(d, phi.arity)
        .filter(|x| pp_witness(&atoms, d, x, phi.exists).is_some())
        .collect();
    Ok(Relation::new(d, phi.arity, tuples)?)
}

fn language_without(lang: &Language, drop: &[&str]) -> Language {
    let mut out = Language::new(lang.d());
    for (name, rel) in lang.relations() {
        if !drop.contains(&name.as_str()) {
            out.insert(name, rel.clone()).expect("same domain");
        }
    }
    out
}

/// Name of the `k`-th fresh variable (1-based) of gadget block `block`.
pub fn block_var(first_scope_var: &str, block: usize, k: usize) -> String {
    format!("{first_scope_var}-b{block}-t{k}")
}

/// Replaces every `rel`-constraint by the atoms of `φ`, with fresh existential
/// variables per constraint. The block index is the constraint's position.
pub fn gadgetize(p: &Instance, rel: &str, phi: &PPFormula) -> Result<Instance, ReductionError> {
    let target = p
        .language()
        .get(rel)
        .ok_or_else(|| ReductionError::UnknownRelation(rel.to_string()))?;
    if pp_evaluate(phi, p.language())? != *target {
        return Err(ReductionError::FormulaMismatch(rel.to_string()));
    }
    if !p.constraints().iter().any(|c| c.rel == rel) {
        return Ok(p.clone());
    }
    let mut lang = language_without(p.language(), &[rel]);
    if phi.atoms.iter().any(|a| a.rel == EQUALITY) && lang.get(EQUALITY).is_none() {
        lang.insert(EQUALITY, Relation::equality(p.d()))?;
    }
    let mut vars = p.variables().to_vec();
    let mut cons = Vec::new();
    for (ci, c) in p.constraints().iter().enumerate() {
        if c.rel != rel {
            cons.push(c.clone());
            continue;
        }
        let fresh: Vec<String> = (1..=phi.exists).map(|k| block_var(&c.scope[0], ci, k)).collect();
        vars.extend(fresh.iter().cloned());
        for atom in &phi.atoms {
            let scope = atom
                .args
                .iter()
                .map(|&i| if i < phi.arity { c.scope[i].clone() } else { fresh[i - phi.arity].clone() })
                .collect();
            cons.push(Constraint {
                scope,
                rel: atom.rel.clone(),
            });
        }
    }
    Ok(Instance::new(lang, vars, cons)?)
}

/// Extends an operator assignment of `p` to `gadgetize(p, rel, φ)`.
///
/// For each `rel`-constraint the scope operators are simultaneously
/// diagonalized; on each joint eigenvector the block variables take the
/// lexicographically first witness of `φ`. Requires scope operators to commute
/// and to have spectra in `U_d`.
pub fn lift_gadget_assignment(
    p: &Instance,
    rel: &str,
    phi: &PPFormula,
    ops: &OperatorAssignment,
    tol: f64,
) -> Result<OperatorAssignment, ReductionError> {
    let d = p.d();
    guard(d, phi.exists)?;
    let atoms = phi.resolve(p.language())?;
    let mut out = ops.clone();
    for (ci, c) in p.constraints().iter().enumerate() {
        if c.rel != rel {
            continue;
        }
        let mats: Vec<CMatrix> = c
            .scope
            .iter()
            .map(|v| ops.get(v).cloned().ok_or_else(|| OpError::MissingVariable(v.clone())))
            .collect::<Result<_, _>>()?;
        let (u, diags) = simultaneous_diagonalize(&mats, tol)?;
        let n = ops.dim;
        let mut columns: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n); phi.exists];
        for i in 0..n {
            let x: Vec<usize> = diags.iter().map(|m| nearest_root(m[(i, i)], d)).collect();
            let y = pp_witness(&atoms, d, &x, phi.exists).ok_or_else(|| {
                OpError::Precondition(format!("joint eigenvalue {x:?} of constraint {ci} is outside {rel}"))
            })?;
            for (k, yk) in y.into_iter().enumerate() {
                columns[k].push(crate::operators::root(yk, d));
            }
        }
        for (k, diag) in columns.into_iter().enumerate() {
            let m = u.adjoint() * CMatrix::from_diagonal(&DVector::from_vec(diag)) * &u;
            out.insert(&block_var(&c.scope[0], ci, k + 1), m)?;
        }
    }
    Ok(out)
}

fn nearest_root(z: Complex64, d: usize) -> usize {
    let step = 2.0 * std::f64::consts::PI / d as f64;
    (z.arg() / step).round().rem_euclid(d as f64) as usize % d
}

/// Representative (smallest index) of each variable's equality class.
pub fn equality_classes(p: &Instance) -> Vec<usize> {
    let n = p.variables().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for (ci, c) in p.constraints().iter().enumerate() {
        if c.rel != EQUALITY {
            continue;
        }
        let scope = p.scope(ci);
        for w in scope.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
        }
    }
    (0..n).map(|v| find(&mut parent, v)).collect()
}

/// Identifies variables joined by `EQ` constraints and drops those constraints.
pub fn collapse_equalities(p: &Instance) -> Instance {
    let rep = equality_classes(p);
    let names = p.variables();
    let vars: Vec<String> = (0..names.len()).filter(|&v| rep[v] == v).map(|v| names[v].clone()).collect();
    let cons = p
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.rel != EQUALITY)
        .map(|(ci, c)| Constraint {
            scope: p.scope(ci).iter().map(|&v| names[rep[v]].clone()).collect(),
            rel: c.rel.clone(),
        })
        .collect();
    let lang = language_without(p.language(), &[EQUALITY]);
    Instance::new(lang, vars, cons).expect("collapse preserves well-formedness")
}

/// Operators of the collapsed instance pulled back to every original variable.
pub fn expand_collapsed_assignment(p: &Instance, ops: &OperatorAssignment) -> Result<OperatorAssignment, ReductionError> {
    let rep = equality_classes(p);
    let names = p.variables();
    let mut out = OperatorAssignment::new(ops.dim);
    for (v, name) in names.iter().enumerate() {
        let src = &names[rep[v]];
        let m = ops.get(src).ok_or_else(|| OpError::MissingVariable(src.clone()))?;
        out.insert(name, m.clone())?;
    }
    Ok(out)
}

/// `lang` with `RT` added as the full binary relation.
pub fn with_rt(lang: &Language) -> Language {
    let mut out = lang.clone();
    out.insert(RT, Relation::full(lang.d(), 2)).expect("same domain");
    out
}

/// Adds `RT(u_i, u_j)` for every pair `i < j` of positions in every constraint scope.
pub fn add_commutativity_gadget(p: &Instance) -> Result<Instance, ReductionError> {
    let pairs: Vec<(String, String)> = p
        .constraints()
        .iter()
        .flat_map(|c| {
            let s = &c.scope;
            (0..s.len()).flat_map(move |i| (i + 1..s.len()).map(move |j| (s[i].clone(), s[j].clone())))
        })
        .collect();
    add_commutativity_pairs(p, &pairs)
}

/// Adds `RT(a, b)` for each given pair of variables.
pub fn add_commutativity_pairs(p: &Instance, pairs: &[(String, String)]) -> Result<Instance, ReductionError> {
    let rt = p.language().get(RT).ok_or(ReductionError::MissingRt)?;
    if *rt != Relation::full(p.d(), 2) {
        return Err(ReductionError::RtNotFull);
    }
    let mut cons = p.constraints().to_vec();
    cons.extend(pairs.iter().map(|(a, b)| Constraint {
        scope: vec![a.clone(), b.clone()],
        rel: RT.to_string(),
    }));
    Ok(Instance::new(p.language().clone(), p.variables().to_vec(), cons)?)
}

/// Keeps only the operators of `vars`.
pub fn restrict_assignment(ops: &OperatorAssignment, vars: &[String]) -> Result<OperatorAssignment, ReductionError> {
    let mut out = OperatorAssignment::new(ops.dim);
    for v in vars {
        let m = ops.get(v).ok_or_else(|| OpError::MissingVariable(v.clone()))?;
        out.insert(v, m.clone())?;
    }
    Ok(out)
}

/// A total map `U_{d_from} → U_{d_to}` on indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnaryMap {
    pub d_from: usize,
    pub d_to: usize,
    pub table: Vec<usize>,
}

impl UnaryMap {
    pub fn new(d_to: usize, table: Vec<usize>) -> Result<Self, ReductionError> {
        if let Some(&bad) = table.iter().find(|&&k| k >= d_to) {
            return Err(ReductionError::BadMap(format!("value {bad} outside U_{d_to}")));
        }
        Ok(UnaryMap {
            d_from: table.len(),
            d_to,
            table,
        })
    }

    pub fn identity(d: usize) -> Self {
        UnaryMap {
            d_from: d,
            d_to: d,
            table: (0..d).collect(),
        }
    }

    pub fn apply(&self, k: usize) -> usize {
        self.table[k]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &UnaryMap) -> UnaryMap {
        assert_eq!(inner.d_to, self.d_from, "composition domain mismatch");
        UnaryMap {
            d_from: inner.d_from,
            d_to: self.d_to,
            table: inner.table.iter().map(|&k| self.table[k]).collect(),
        }
    }

    pub fn image(&self) -> ValueSet {
        self.table.iter().copied().collect()
    }

    pub fn is_injective(&self) -> bool {
        self.image().len() == self.d_from
    }

    pub fn is_idempotent(&self) -> bool {
        self.d_from == self.d_to && self.compose(self) == *self
    }

    /// Image of a relation, tuple by tuple.
    pub fn map_relation(&self, r: &Relation) -> Relation {
        assert_eq!(r.d(), self.d_from, "relation domain mismatch");
        r.map_values(self.d_to, |k| self.table[k])
    }

    /// Full preimage `{t : self(t) ∈ r}` of a relation over `U_{d_to}`.
    pub fn preimage_relation(&self, r: &Relation) -> Relation {
        assert_eq!(r.d(), self.d_to, "relation domain mismatch");
        Relation::from_predicate(self.d_from, r.arity(), |t| {
            let img: Vec<usize> = t.iter().map(|&k| self.table[k]).collect();
            r.contains(&img)
        })
    }
}

/// Whether `rho` maps every relation of `lang` into itself.
pub fn is_endomorphism(rho: &UnaryMap, lang: &Language) -> bool {
    lang.relations().values().all(|r| {
        r.tuples().iter().all(|t| {
            let img: Vec<usize> = t.iter().map(|&k| rho.table[k]).collect();
            r.contains(&img)
        })
    })
}

/// All endomorphisms of `lang`, tables in lexicographic order.
pub fn endomorphisms(lang: &Language) -> Result<Vec<UnaryMap>, ReductionError> {
    let d = lang.d();
    if d > ENDO_GUARD {
        return Err(ReductionError::TooLarge((d as f64).powi(d as i32)));
    }
    Ok(all_tuples(d, d)
        .map(|table| UnaryMap {
            d_from: d,
            d_to: d,
            table,
        })
        .filter(|rho| is_endomorphism(rho, lang))
        .collect())
}

/// The core of a language: an idempotent endomorphism `ρ` of minimum image,
/// and `ρ(Γ)` relabeled onto `U_e` by the order-preserving bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    pub rho: UnaryMap,
    pub language: Language,
    /// Order-preserving bijection `Im ρ → U_e`, as a partial table over `U_d`.
    pub relabel: Vec<Option<usize>>,
    /// Inverse of `relabel`: the embedding `U_e → Im ρ ⊆ U_d`.
    pub embed: UnaryMap,
}

impl Core {
    pub fn e(&self) -> usize {
        self.embed.d_from
    }

    /// `π′ ∘ ρ : U_d → U_e`.
    pub fn retraction(&self) -> UnaryMap {
        UnaryMap {
            d_from: self.rho.d_from,
            d_to: self.e(),
            table: self.rho.table.iter().map(|&k| self.relabel[k].expect("image element")).collect(),
        }
    }
}

pub fn core(lang: &Language) -> Result<Core, ReductionError> {
    let d = lang.d();
    let endos = endomorphisms(lang)?;
    let min = endos.iter().map(|r| r.image().len()).min().expect("identity is an endomorphism");
    let mut rho = endos.into_iter().find(|r| r.image().len() == min).unwrap();
    // Endomorphisms are closed under composition; on its image a minimum-image
    // endomorphism is a permutation, so some power is idempotent.
    while !rho.is_idempotent() {
        rho = rho.compose(&rho);
    }
    let image: Vec<usize> = rho.image().iter().collect();
    let mut relabel = vec![None; d];
    for (j, &k) in image.iter().enumerate() {
        relabel[k] = Some(j);
    }
    let e = image.len();
    let embed = UnaryMap {
        d_from: e,
        d_to: d,
        table: image,
    };
    let mut core_lang = Language::new(e);
    for (name, r) in lang.relations() {
        let mapped = r.map_values(e, |k| relabel[rho.table[k]].unwrap());
        core_lang.insert(name, mapped)?;
    }
    Ok(Core {
        rho,
        language: core_lang,
        relabel,
        embed,
    })
}

/// The same constraints, read over the core language.
pub fn core_instance(p: &Instance, c: &Core) -> Result<Instance, ReductionError> {
    Ok(Instance::new(c.language.clone(), p.variables().to_vec(), p.constraints().to_vec())?)
}

/// `R_Γ = {(ρ(0), …, ρ(d−1)) : ρ endomorphism}`; every tuple must be a permutation.
pub fn r_gamma(lang: &Language) -> Result<Relation, ReductionError> {
    let d = lang.d();
    let mut tuples = Vec::new();
    for rho in endomorphisms(lang)? {
        if rho.image().len() != d {
            return Err(ReductionError::NotCore(rho.table));
        }
        tuples.push(rho.table);
    }
    Ok(Relation::new(d, d, tuples)?)
}

/// Name of the variable standing for the constant `a`.
pub fn constant_var(a: usize) -> String {
    format!("_c{a}")
}

/// Replaces constant relations by equalities with fresh variables `_c0.._c{d-1}`
/// tied together by `R_Γ`. `constants` lists the relation names to eliminate;
/// each must be a singleton unary relation and the rest must form a core.
pub fn constants_reduction(p: &Instance, constants: &[&str]) -> Result<Instance, ReductionError> {
    let d = p.d();
    let mut value_of: BTreeMap<&str, usize> = BTreeMap::new();
    for &name in constants {
        let r = p
            .language()
            .get(name)
            .ok_or_else(|| ReductionError::UnknownRelation(name.to_string()))?;
        if r.arity() != 1 || r.len() != 1 {
            return Err(ReductionError::NotConstant(name.to_string()));
        }
        value_of.insert(name, r.tuples()[0][0]);
    }
    let gamma = language_without(p.language(), constants);
    let rg = r_gamma(&gamma)?;
    let mut lang = gamma;
    lang.insert(R_GAMMA, rg)?;
    if lang.get(EQUALITY).is_none() {
        lang.insert(EQUALITY, Relation::equality(d))?;
    }
    let mut vars = p.variables().to_vec();
    let consts: Vec<String> = (0..d).map(constant_var).collect();
    vars.extend(consts.iter().cloned());
    let mut cons = vec![Constraint {
        scope: consts.clone(),
        rel: R_GAMMA.to_string(),
    }];
    for c in p.constraints() {
        match value_of.get(c.rel.as_str()) {
            Some(&a) => cons.push(Constraint {
                scope: vec![c.scope[0].clone(), consts[a].clone()],
                rel: EQUALITY.to_string(),
            }),
            None => cons.push(c.clone()),
        }
    }
    Ok(Instance::new(lang, vars, cons)?)
}

/// Turns a solution of the constants-reduced instance into one of the original:
/// the constant variables carry an automorphism `σ`, and `σ^{-1}` is applied.
/// `n` is the number of original variables (they come first).
pub fn untwist(d: usize, n: usize, solution: &[usize]) -> Vec<usize> {
    let sigma = &solution[n..n + d];
    let mut inv = vec![0; d];
    for (a, &s) in sigma.iter().enumerate() {
        inv[s] = a;
    }
    solution[..n].iter().map(|&k| inv[k]).collect()
}

/// Extends an operator assignment with the scalars `_c_a = λ_a·I`.
pub fn constants_assignment(ops: &OperatorAssignment, d: usize) -> Result<OperatorAssignment, ReductionError> {
    let mut out = ops.clone();
    for a in 0..d {
        let m = CMatrix::identity(ops.dim, ops.dim) * crate::operators::root(a, d);
        out.insert(&constant_var(a), m)?;
    }
    Ok(out)
}

/// Lagrange interpolant of an arbitrary map: `p(λ_k^{(d_from)}) = λ_{f(k)}^{(d_to)}`.
pub fn interpolate_function(f: &UnaryMap) -> Result<UniPoly, ReductionError> {
    let nodes: Vec<CycNum> = (0..f.d_from).map(|k| CycNum::embed(k as u32, f.d_from as u32)).collect();
    let values: Vec<CycNum> = f.table.iter().map(|&k| CycNum::embed(k as u32, f.d_to as u32)).collect();
    Ok(UniPoly::interpolate(&nodes, &values)?)
}

/// Interpolant of an injective relabeling map.
pub fn interpolate_map(pi: &UnaryMap) -> Result<UniPoly, ReductionError> {
    if !pi.is_injective() {
        return Err(ReductionError::NotInjective(pi.table.clone()));
    }
    interpolate_function(pi)
}

/// Applies a fixed polynomial to every operator of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct OpTransport {
    pub map: UnaryMap,
    pub poly: UniPoly,
}

impl OpTransport {
    pub fn new(map: UnaryMap) -> Result<Self, ReductionError> {
        let poly = interpolate_function(&map)?;
        Ok(OpTransport { map, poly })
    }

    pub fn apply(&self, ops: &OperatorAssignment) -> Result<OperatorAssignment, ReductionError> {
        let mut out = OperatorAssignment::new(ops.dim);
        for (v, m) in &ops.assign {
            out.insert(v, apply_unipoly_matrix(&self.poly, m)?)?;
        }
        Ok(out)
    }

    /// Relabels a classical solution through the map.
    pub fn apply_classical(&self, solution: &[usize]) -> Vec<usize> {
        solution.iter().map(|&k| self.map.apply(k)).collect()
    }
}

fn relabel_instance(p: &Instance, d: usize, f: impl Fn(&Relation) -> Relation) -> Result<Instance, ReductionError> {
    let mut lang = Language::new(d);
    for (name, r) in p.language().relations() {
        lang.insert(name, f(r))?;
    }
    Ok(Instance::new(lang, p.variables().to_vec(), p.constraints().to_vec())?)
}

/// Subalgebra step: `P` over `U_e` becomes `P^π` over `U_d` with relations
/// `π(R)`; operators are transported by `A ↦ p_π(A)`.
pub fn restrict_transport(p: &Instance, pi: &UnaryMap) -> Result<(Instance, OpTransport), ReductionError> {
    if pi.d_from != p.d() {
        return Err(ReductionError::DomainMismatch {
            expected: p.d(),
            got: pi.d_from,
        });
    }
    if !pi.is_injective() {
        return Err(ReductionError::NotInjective(pi.table.clone()));
    }
    let out = relabel_instance(p, pi.d_to, |r| pi.map_relation(r))?;
    Ok((out, OpTransport::new(pi.clone())?))
}

/// The order-preserving bijection `U_e → B` for `B ⊆ U_d`.
pub fn subalgebra_map(b: ValueSet, d: usize) -> Result<UnaryMap, ReductionError> {
    UnaryMap::new(d, b.iter().collect())
}

/// A partition of `U_d` into classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Congruence {
    pub d: usize,
    pub classes: Vec<Vec<usize>>,
}

impl Congruence {
    /// Validates and normalizes: classes sorted internally and ordered by smallest element.
    pub fn new(d: usize, mut classes: Vec<Vec<usize>>) -> Result<Self, ReductionError> {
        let mut seen = ValueSet::EMPTY;
        for class in &mut classes {
            if class.is_empty() {
                return Err(ReductionError::BadPartition("empty class".into()));
            }
            class.sort_unstable();
            for &k in class.iter() {
                if k >= d || seen.contains(k) {
                    return Err(ReductionError::BadPartition(format!("element {k} out of range or repeated")));
                }
                seen.insert(k);
            }
        }
        if seen.len() != d {
            return Err(ReductionError::BadPartition("classes do not cover the domain".into()));
        }
        classes.sort_by_key(|c| c[0]);
        Ok(Congruence { d, classes })
    }

    pub fn discrete(d: usize) -> Self {
        Congruence {
            d,
            classes: (0..d).map(|k| vec![k]).collect(),
        }
    }

    /// The quotient map `π : U_d → U_e`, `k ↦` index of its class.
    pub fn quotient(&self) -> UnaryMap {
        let mut table = vec![0; self.d];
        for (j, class) in self.classes.iter().enumerate() {
            for &k in class {
                table[k] = j;
            }
        }
        UnaryMap {
            d_from: self.d,
            d_to: self.classes.len(),
            table,
        }
    }

    /// The section `π* : U_e → U_d` picking the smallest element of each class.
    pub fn section(&self) -> UnaryMap {
        UnaryMap {
            d_from: self.classes.len(),
            d_to: self.d,
            table: self.classes.iter().map(|c| c[0]).collect(),
        }
    }
}

/// Homomorphic-image step: `P` over `U_e = U_d/θ` becomes `P^π` over `U_d`
/// with full preimages `π^{-1}(R)`; operators are transported through `π*`.
pub fn factor_transport(p: &Instance, theta: &Congruence) -> Result<(Instance, OpTransport), ReductionError> {
    let pi = theta.quotient();
    if pi.d_to != p.d() {
        return Err(ReductionError::DomainMismatch {
            expected: p.d(),
            got: pi.d_to,
        });
    }
    let out = relabel_instance(p, theta.d, |r| pi.preimage_relation(r))?;
    Ok((out, OpTransport::new(theta.section())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::brute_force_solve;
    use crate::cyclotomic::rational;
    use crate::gap_instances::r3;
    use crate::operators::{embed_classical, verify_assignment};

    fn z2() -> Language {
        Language::new(2).with("R30", r3(2, 0)).unwrap()
    }

    #[test]
    fn equality_composition() {
        let phi = PPFormula::new(2, 1, vec![(EQUALITY, vec![0, 2]), (EQUALITY, vec![2, 1])]);
        assert_eq!(pp_evaluate(&phi, &z2()).unwrap(), Relation::equality(2));
    }

    #[test]
    fn diagonal_of_equality_is_full() {
        let lang = Language::new(3).with("E", Relation::equality(3)).unwrap();
        let phi = PPFormula::new(1, 0, vec![("E", vec![0, 0])]);
        assert_eq!(pp_evaluate(&phi, &lang).unwrap(), Relation::full(3, 1));
    }

    #[test]
    fn parity_composition() {
        // ∃w x+y+w = 0 ∧ w+z+w = 0 over Z_2 forces z = 0 and leaves x, y free.
        let phi = PPFormula::new(3, 1, vec![("R30", vec![0, 1, 3]), ("R30", vec![3, 2, 3])]);
        let rel = pp_evaluate(&phi, &z2()).unwrap();
        let expected = Relation::from_predicate(2, 3, |t| t[2] == 0);
        assert_eq!(rel, expected);
    }

    #[test]
    fn bad_formulas() {
        let phi = PPFormula::new(2, 0, vec![("NOPE", vec![0, 1])]);
        assert_eq!(pp_evaluate(&phi, &z2()), Err(ReductionError::UnknownRelation("NOPE".into())));
        let phi = PPFormula::new(2, 0, vec![(EQUALITY, vec![0, 5])]);
        assert!(matches!(pp_evaluate(&phi, &z2()), Err(ReductionError::BadFormula(_))));
        let phi = PPFormula::new(2, 0, vec![]);
        assert!(matches!(pp_evaluate(&phi, &z2()), Err(ReductionError::BadFormula(_))));
    }

    #[test]
    fn gadget_counts() {
        // R(x,y) = ∃t EQ(x,t) ∧ EQ(t,y).
        let lang = Language::new(2).with("R", Relation::equality(2)).unwrap();
        let p = Instance::build(lang, &["a", "b"], vec![Constraint::new(&["a", "b"], "R")]).unwrap();
        let phi = PPFormula::new(2, 1, vec![(EQUALITY, vec![0, 2]), (EQUALITY, vec![2, 1])]);
        let g = gadgetize(&p, "R", &phi).unwrap();
        assert_eq!(g.variables(), &["a", "b", "a-b0-t1"]);
        assert_eq!(g.constraints().len(), 2);
        let collapsed = collapse_equalities(&g);
        assert_eq!(collapsed.variables(), &["a"]);
        assert!(collapsed.constraints().is_empty());
    }

    #[test]
    fn gadget_without_target_is_identity_and_mismatch_errors() {
        let lang = z2().with("R", Relation::equality(2)).unwrap();
        let p = Instance::build(lang, &["a", "b", "c"], vec![Constraint::new(&["a", "b", "c"], "R30")]).unwrap();
        let phi = PPFormula::new(2, 1, vec![(EQUALITY, vec![0, 2]), (EQUALITY, vec![2, 1])]);
        assert_eq!(gadgetize(&p, "R", &phi).unwrap(), p);
        let wrong = PPFormula::new(2, 0, vec![("R30", vec![0, 1, 1])]);
        assert_eq!(gadgetize(&p, "R", &wrong), Err(ReductionError::FormulaMismatch("R".into())));
    }

    #[test]
    fn collapse_chain() {
        let lang = Language::new(2).with(EQUALITY, Relation::equality(2)).unwrap();
        let p = Instance::build(
            lang,
            &["x", "y", "z"],
            vec![Constraint::new(&["y", "z"], EQUALITY), Constraint::new(&["x", "y"], EQUALITY)],
        )
        .unwrap();
        assert_eq!(equality_classes(&p), vec![0, 0, 0]);
        assert_eq!(collapse_equalities(&p).variables(), &["x"]);
    }

    #[test]
    fn commutativity_gadget_counts() {
        let p = Instance::build(with_rt(&z2()), &["a", "b", "c"], vec![Constraint::new(&["a", "b", "c"], "R30")]).unwrap();
        let g = add_commutativity_gadget(&p).unwrap();
        assert_eq!(g.constraints().len(), 4);
        assert_eq!(brute_force_solve(&g).unwrap().is_sat(), brute_force_solve(&p).unwrap().is_sat());
        let bare = Instance::build(z2(), &["a"], vec![]).unwrap();
        assert_eq!(add_commutativity_gadget(&bare), Err(ReductionError::MissingRt));
    }

    #[test]
    fn endomorphism_counts() {
        let eq = Language::new(2).with("E", Relation::equality(2)).unwrap();
        assert_eq!(endomorphisms(&eq).unwrap().len(), 4);
        let b = Language::new(3).with("B", Relation::unary(3, [0, 1].into_iter().collect())).unwrap();
        // Hand count: ρ(0), ρ(1) ∈ {0,1}, ρ(2) free.
        assert_eq!(endomorphisms(&b).unwrap().len(), 12);
        let full = Language::new(3).with("F", Relation::full(3, 2)).unwrap();
        assert_eq!(endomorphisms(&full).unwrap().len(), 27);
    }

    #[test]
    fn cores() {
        let b = Language::new(3).with("B", Relation::unary(3, [0, 1].into_iter().collect())).unwrap();
        let c = core(&b).unwrap();
        assert_eq!(c.e(), 1);
        assert_eq!(c.rho.table, vec![0, 0, 0]);
        let lt = Language::new(3).with("LT", Relation::from_predicate(3, 2, |t| t[0] < t[1])).unwrap();
        let c = core(&lt).unwrap();
        assert_eq!(c.rho, UnaryMap::identity(3));
        assert_eq!(c.language, lt);
    }

    #[test]
    fn r_gamma_cases() {
        let lt = Language::new(3).with("LT", Relation::from_predicate(3, 2, |t| t[0] < t[1])).unwrap();
        assert_eq!(r_gamma(&lt).unwrap().tuples(), &[vec![0, 1, 2]]);
        let cyc = Language::new(4).with("S", Relation::from_predicate(4, 2, |t| t[1] == (t[0] + 1) % 4)).unwrap();
        assert_eq!(r_gamma(&cyc).unwrap().len(), 4);
        let b = Language::new(3).with("B", Relation::unary(3, [0, 1].into_iter().collect())).unwrap();
        assert!(matches!(r_gamma(&b), Err(ReductionError::NotCore(_))));
    }

    #[test]
    fn constants_counts_and_untwist() {
        let lang = Language::new(2)
            .with("NE", Relation::from_predicate(2, 2, |t| t[0] != t[1]))
            .unwrap()
            .with("C0", Relation::unary(2, ValueSet::singleton(0)))
            .unwrap();
        let p = Instance::build(
            lang,
            &["x", "y"],
            vec![Constraint::new(&["x", "y"], "NE"), Constraint::new(&["x"], "C0")],
        )
        .unwrap();
        let q = constants_reduction(&p, &["C0"]).unwrap();
        assert_eq!(q.variables().len(), 4);
        assert_eq!(q.constraints().len(), 3);
        assert_eq!(q.language().get(R_GAMMA).unwrap().len(), 2);
        // A twisted solution: constants swapped, x = 1.
        assert_eq!(untwist(2, 2, &[1, 0, 1, 0]), vec![0, 1]);
        assert!(matches!(constants_reduction(&p, &["NE"]), Err(ReductionError::NotConstant(_))));
    }

    #[test]
    fn interpolation_examples() {
        let id = interpolate_map(&UnaryMap::identity(5)).unwrap();
        assert_eq!(id, UniPoly::x());
        // U_2 → U_4 with 1 ↦ 1, -1 ↦ i.
        let p = interpolate_map(&UnaryMap::new(4, vec![0, 1]).unwrap()).unwrap();
        let i = CycNum::root_of_unity(4, 1).unwrap();
        let half = CycNum::from_rational(rational(1, 2));
        let c0 = &(&half + &(&half * &i)) + &CycNum::zero();
        let c1 = &half - &(&half * &i);
        assert_eq!(p, UniPoly::from_coeffs(vec![c0, c1]));
        assert_eq!(p.eval(&CycNum::one()), CycNum::one());
        assert_eq!(p.eval(&CycNum::from_int(-1)), i);
        let s = interpolate_map(&UnaryMap::new(3, vec![0]).unwrap()).unwrap();
        assert_eq!(s, UniPoly::one());
        assert!(matches!(
            interpolate_map(&UnaryMap::new(2, vec![0, 0]).unwrap()),
            Err(ReductionError::NotInjective(_))
        ));
    }

    #[test]
    fn restrict_operator_transport() {
        // P over U_2: x ≠ y. π : U_2 → {0,1} ⊆ U_3.
        let lang = Language::new(2).with("NE", Relation::from_predicate(2, 2, |t| t[0] != t[1])).unwrap();
        let p = Instance::build(lang, &["x", "y"], vec![Constraint::new(&["x", "y"], "NE")]).unwrap();
        let pi = subalgebra_map([0, 1].into_iter().collect(), 3).unwrap();
        let (q, tr) = restrict_transport(&p, &pi).unwrap();
        assert_eq!(q.d(), 3);
        let sols: Vec<_> = [[0, 1], [1, 0]].iter().map(|s| p.named_assignment(s)).collect();
        let ops = embed_classical(&sols, 2).unwrap();
        assert!(verify_assignment(&p, &ops, 1e-8).unwrap().is_satisfying());
        let moved = tr.apply(&ops).unwrap();
        let report = verify_assignment(&q, &moved, 1e-8).unwrap();
        assert!(report.is_satisfying() && report.max_residual < 1e-9);
    }

    #[test]
    fn factor_parity() {
        let lang = Language::new(2).with("R30", r3(2, 0)).unwrap().with("R31", r3(2, 1)).unwrap();
        let p = crate::gap_instances::magic_square();
        let p = Instance::new(
            lang,
            p.variables().to_vec(),
            p.constraints()
                .iter()
                .map(|c| Constraint {
                    scope: c.scope.clone(),
                    rel: if c.rel == "R+" { "R30".into() } else { "R31".into() },
                })
                .collect(),
        )
        .unwrap();
        let theta = Congruence::new(4, vec![vec![2, 0], vec![1, 3]]).unwrap();
        assert_eq!(theta.quotient().compose(&theta.section()), UnaryMap::identity(2));
        let (q, _) = factor_transport(&p, &theta).unwrap();
        let rel = q.language().get("R30").unwrap();
        assert!(rel.contains(&[2, 3, 1]) && !rel.contains(&[2, 3, 0]));
        assert!(!brute_force_solve(&q).unwrap().is_sat());
        assert!(Congruence::new(3, vec![vec![0, 1]]).is_err());
        assert!(Congruence::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    }
}
