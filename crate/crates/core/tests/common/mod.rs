//! Random generators shared by the reduction suites and the acceptance run.
#![allow(dead_code)]

use opcsp::csp::{all_tuples, enumerate_solutions, Constraint, Instance, Language, Relation};
use opcsp::operators::{embed_classical, random_unitary, OperatorAssignment};
use opcsp::reductions::{pp_evaluate, PPFormula, UnaryMap, EQUALITY};
use rand::Rng;
use opcsp::csp::{brute_force_solve, validate_assignment, ValueSet};
use opcsp::operators::verify_assignment;
use opcsp::reductions::{
    add_commutativity_gadget, collapse_equalities, constants_assignment, constants_reduction, core, core_instance,
    factor_transport, gadgetize, lift_gadget_assignment, restrict_assignment, restrict_transport, subalgebra_map,
    untwist, with_rt, Congruence, OpTransport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_relation<R: Rng>(rng: &mut R, d: usize, arity: usize, density: f64) -> Relation {
    let tuples = all_tuples(d, arity).filter(|_| rng.random_bool(density)).collect();
    Relation::new(d, arity, tuples).unwrap()
}

pub fn random_language<R: Rng>(rng: &mut R, d: usize, count: usize, max_arity: usize) -> Language {
    let mut lang = Language::new(d);
    for i in 0..count {
        let arity = rng.random_range(1..=max_arity);
        let density = rng.random_range(0.3..0.85);
        lang.insert(&format!("G{i}"), random_relation(rng, d, arity, density)).unwrap();
    }
    lang
}

/// Random constraints over every relation of `lang`.
pub fn random_instance_over<R: Rng>(rng: &mut R, lang: &Language, n: usize, m: usize) -> Instance {
    let names: Vec<String> = lang.names().map(str::to_string).collect();
    let vars: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let cons = (0..m)
        .map(|_| {
            let rel = names[rng.random_range(0..names.len())].clone();
            let arity = lang.get(&rel).unwrap().arity();
            Constraint {
                scope: (0..arity).map(|_| vars[rng.random_range(0..n)].clone()).collect(),
                rel,
            }
        })
        .collect();
    Instance::new(lang.clone(), vars, cons).unwrap()
}

/// A random pp-formula over `lang` (which may include `EQ` atoms) and the
/// relation it defines.
pub fn random_pp<R: Rng>(rng: &mut R, lang: &Language) -> (PPFormula, Relation) {
    let names: Vec<String> = lang.names().map(str::to_string).collect();
    let arity = rng.random_range(1..=2);
    let exists = rng.random_range(0..=2);
    let width = arity + exists;
    let atoms = (0..rng.random_range(1..=3))
        .map(|_| {
            let (rel, k) = if rng.random_bool(0.25) {
                (EQUALITY.to_string(), 2)
            } else {
                let rel = names[rng.random_range(0..names.len())].clone();
                let k = lang.get(&rel).unwrap().arity();
                (rel, k)
            };
            opcsp::reductions::PPAtom {
                rel,
                args: (0..k).map(|_| rng.random_range(0..width)).collect(),
            }
        })
        .collect();
    let phi = PPFormula { arity, exists, atoms };
    let rel = pp_evaluate(&phi, lang).unwrap();
    (phi, rel)
}

/// A random idempotent map on `U_d`: a random image set, everything else sent into it.
pub fn random_retraction<R: Rng>(rng: &mut R, d: usize) -> UnaryMap {
    let keep: Vec<usize> = loop {
        let k: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.6)).collect();
        if !k.is_empty() {
            break k;
        }
    };
    let table = (0..d)
        .map(|k| if keep.contains(&k) { k } else { keep[rng.random_range(0..keep.len())] })
        .collect();
    UnaryMap::new(d, table).unwrap()
}

/// Random language over `U_d`, often closed under a random retraction so that
/// its core is proper.
pub fn random_language_with_retraction<R: Rng>(rng: &mut R, d: usize, count: usize) -> Language {
    let rho = random_retraction(rng, d);
    let closed = rng.random_bool(0.7);
    let mut lang = Language::new(d);
    for i in 0..count {
        let (arity, density) = (rng.random_range(1..=2), rng.random_range(0.3..0.7));
        let r = random_relation(rng, d, arity, density);
        let r = if closed {
            let mut tuples = r.tuples().to_vec();
            tuples.extend(rho.map_relation(&r).tuples().iter().cloned());
            Relation::new(d, r.arity(), tuples).unwrap()
        } else {
            r
        };
        lang.insert(&format!("G{i}"), r).unwrap();
    }
    lang
}

/// Up to `max` classical solutions embedded diagonally and conjugated by one
/// random unitary, or `None` if `p` is unsatisfiable.
pub fn conjugated_solutions<R: Rng>(rng: &mut R, p: &Instance, max: usize) -> Option<OperatorAssignment> {
    let count = rng.random_range(1..=max);
    let sols = enumerate_solutions(p, 64).unwrap();
    if sols.is_empty() {
        return None;
    }
    let picked: Vec<_> = (0..count).map(|_| p.named_assignment(&sols[rng.random_range(0..sols.len())])).collect();
    let diag = embed_classical(&picked, p.d()).unwrap();
    let u = random_unitary(diag.dim, rng);
    let mut out = OperatorAssignment::new(diag.dim);
    for (v, m) in &diag.assign {
        out.insert(v, &u * m * u.adjoint()).unwrap();
    }
    Some(out)
}

/// Outcome of a reduction suite: cases run, satisfiable cases whose operator
/// transport was verified, and the largest residual seen.
#[derive(Debug, Default, Clone, Copy)]
pub struct SuiteStats {
    pub cases: usize,
    pub transported: usize,
    pub max_residual: f64,
}

impl SuiteStats {
    fn record(&mut self, p: &Instance, ops: &OperatorAssignment, what: &str) -> Result<(), String> {
        let report = verify_assignment(p, ops, 1e-8).map_err(|e| format!("{what}: {e}"))?;
        if !report.is_satisfying() || report.max_residual >= 1e-8 {
            return Err(format!("{what}: residual {:.3e} ({})", report.max_residual, report.worst));
        }
        self.max_residual = self.max_residual.max(report.max_residual);
        Ok(())
    }
}

fn sat(p: &Instance) -> bool {
    brute_force_solve(p).unwrap().is_sat()
}

fn check_equiv(a: &Instance, b: &Instance, what: &str, case: usize) -> Result<(), String> {
    if sat(a) != sat(b) {
        return Err(format!("{what} case {case}: satisfiability differs\n{}", a.to_json()));
    }
    Ok(())
}

/// gadgetize ∘ collapse preserves satisfiability; with commutativity gadgets,
/// diagonal satisfying assignments lift to the gadget instance and restrict back.
pub fn gadget_suite(seed: u64, cases: usize) -> Result<SuiteStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats::default();
    while stats.cases < cases {
        let d = rng.random_range(2..=3);
        let gamma = random_language(&mut rng, d, 2, 2);
        let (phi, r) = random_pp(&mut rng, &gamma);
        if r.is_empty() {
            continue;
        }
        let mut lang = gamma.clone();
        lang.insert("R", r).unwrap();
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=4);
        let mut p = random_instance_over(&mut rng, &lang, n, m);
        if !p.constraints().iter().any(|c| c.rel == "R") {
            continue;
        }
        let g = gadgetize(&p, "R", &phi).map_err(|e| e.to_string())?;
        check_equiv(&p, &collapse_equalities(&g), "gadget", stats.cases)?;
        check_equiv(&p, &g, "gadget (uncollapsed)", stats.cases)?;

        p = Instance::new(with_rt(p.language()), p.variables().to_vec(), p.constraints().to_vec()).unwrap();
        let pc = add_commutativity_gadget(&p).map_err(|e| e.to_string())?;
        if let Some(ops) = conjugated_solutions(&mut rng, &pc, 3) {
            stats.record(&pc, &ops, "commutativity gadget")?;
            let lifted = lift_gadget_assignment(&pc, "R", &phi, &ops, 1e-8).map_err(|e| e.to_string())?;
            let gc = gadgetize(&pc, "R", &phi).map_err(|e| e.to_string())?;
            stats.record(&gc, &lifted, "lift")?;
            let back = restrict_assignment(&lifted, p.variables()).map_err(|e| e.to_string())?;
            stats.record(&p, &back, "restriction")?;
            stats.transported += 1;
        }
        stats.cases += 1;
    }
    Ok(stats)
}

/// Core relabeling both ways: P over Γ vs the same constraints over core(Γ).
pub fn core_suite(seed: u64, cases: usize) -> Result<SuiteStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats::default();
    while stats.cases < cases {
        let d = rng.random_range(2..=4);
        let lang = random_language_with_retraction(&mut rng, d, 2);
        let c = core(&lang).map_err(|e| e.to_string())?;
        if !c.rho.is_idempotent() {
            return Err("core retraction is not idempotent".into());
        }
        let (n, m) = (rng.random_range(2..=5), rng.random_range(1..=5));
        let p = random_instance_over(&mut rng, &lang, n, m);
        let q = core_instance(&p, &c).map_err(|e| e.to_string())?;
        check_equiv(&p, &q, "core", stats.cases)?;
        if let Some(ops) = conjugated_solutions(&mut rng, &p, 3) {
            let down = OpTransport::new(c.retraction()).map_err(|e| e.to_string())?;
            stats.record(&q, &down.apply(&ops).map_err(|e| e.to_string())?, "core retraction")?;
            let core_ops = conjugated_solutions(&mut rng, &q, 3).expect("core instance is satisfiable");
            let up = OpTransport::new(c.embed.clone()).map_err(|e| e.to_string())?;
            stats.record(&p, &up.apply(&core_ops).map_err(|e| e.to_string())?, "core embedding")?;
            stats.transported += 1;
        }
        stats.cases += 1;
    }
    Ok(stats)
}

/// Constants via R_Γ over core languages; twisted solutions are untwisted.
pub fn constants_suite(seed: u64, cases: usize) -> Result<SuiteStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats::default();
    while stats.cases < cases {
        let d = rng.random_range(2..=3);
        let base = random_language_with_retraction(&mut rng, d, 2);
        let gamma = core(&base).map_err(|e| e.to_string())?.language;
        let e = gamma.d();
        let mut lang = gamma.clone();
        let consts: Vec<String> = (0..e).map(|a| format!("C{a}")).collect();
        for (a, name) in consts.iter().enumerate() {
            lang.insert(name, Relation::unary(e, ValueSet::singleton(a))).unwrap();
        }
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=5));
        let p = random_instance_over(&mut rng, &lang, n, m);
        let names: Vec<&str> = consts.iter().map(String::as_str).collect();
        let q = constants_reduction(&p, &names).map_err(|e| e.to_string())?;
        check_equiv(&p, &q, "constants", stats.cases)?;
        let n = p.variables().len();
        for s in enumerate_solutions(&q, 16).unwrap() {
            let back = untwist(e, n, &s);
            if !validate_assignment(&p, &p.named_assignment(&back)).unwrap() {
                return Err(format!("constants case {}: untwisted solution fails", stats.cases));
            }
        }
        if let Some(ops) = conjugated_solutions(&mut rng, &p, 3) {
            stats.record(&q, &constants_assignment(&ops, e).map_err(|e| e.to_string())?, "constants")?;
            stats.transported += 1;
        }
        stats.cases += 1;
    }
    Ok(stats)
}

/// Subalgebra restriction: P over U_e relabeled onto B ⊆ U_d.
pub fn restrict_suite(seed: u64, cases: usize) -> Result<SuiteStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats::default();
    while stats.cases < cases {
        let e = rng.random_range(1..=3);
        let d = rng.random_range(e.max(2)..=4);
        let mut b: Vec<usize> = (0..d).collect();
        while b.len() > e {
            b.remove(rng.random_range(0..b.len()));
        }
        let pi = subalgebra_map(b.into_iter().collect(), d).map_err(|e| e.to_string())?;
        let lang = random_language(&mut rng, e, 2, 3);
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=5));
        let p = random_instance_over(&mut rng, &lang, n, m);
        let (q, t) = restrict_transport(&p, &pi).map_err(|e| e.to_string())?;
        check_equiv(&p, &q, "restrict", stats.cases)?;
        for s in enumerate_solutions(&p, 8).unwrap() {
            if !validate_assignment(&q, &q.named_assignment(&t.apply_classical(&s))).unwrap() {
                return Err(format!("restrict case {}: relabeled solution fails", stats.cases));
            }
        }
        if let Some(ops) = conjugated_solutions(&mut rng, &p, 3) {
            stats.record(&q, &t.apply(&ops).map_err(|e| e.to_string())?, "restrict")?;
            stats.transported += 1;
        }
        stats.cases += 1;
    }
    Ok(stats)
}

fn random_partition<R: Rng>(rng: &mut R, d: usize) -> Congruence {
    let k = rng.random_range(1..=d);
    let mut classes: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
    for x in k..d {
        classes[rng.random_range(0..k)].push(x);
    }
    Congruence::new(d, classes).unwrap()
}

/// Homomorphic images: P over U_d/θ pulled back to U_d via full preimages.
pub fn factor_suite(seed: u64, cases: usize) -> Result<SuiteStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats::default();
    while stats.cases < cases {
        let d = rng.random_range(2..=4);
        let theta = random_partition(&mut rng, d);
        if theta.quotient().compose(&theta.section()) != UnaryMap::identity(theta.classes.len()) {
            return Err("section property fails".into());
        }
        let e = theta.classes.len();
        let lang = random_language(&mut rng, e, 2, 3);
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=5));
        let p = random_instance_over(&mut rng, &lang, n, m);
        let (q, t) = factor_transport(&p, &theta).map_err(|e| e.to_string())?;
        check_equiv(&p, &q, "factor", stats.cases)?;
        if let Some(ops) = conjugated_solutions(&mut rng, &p, 3) {
            stats.record(&q, &t.apply(&ops).map_err(|e| e.to_string())?, "factor")?;
            stats.transported += 1;
        }
        stats.cases += 1;
    }
    Ok(stats)
}
