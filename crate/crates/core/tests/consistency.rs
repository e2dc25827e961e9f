use num_complex::Complex64;
use opcsp::certificates::{build_certificate, check_certificate, perturb, perturbation_count, GapCertificate};
use opcsp::consistency::{linear_ac, replay_chain, slac, SlacResult};
use opcsp::csp::{all_tuples, brute_force_solve, enumerate_solutions, Constraint, Instance, Language, Relation, ValueSet};
use opcsp::fourier::vanishing_polynomial;
use opcsp::gap_instances::{bounded_width_languages, magic_square, random_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with freshly drawn relations (not tied to any language class).
fn random_wild_instance(rng: &mut ChaCha8Rng) -> Instance {
    let d = rng.random_range(2..=3);
    let n = rng.random_range(1..=5);
    let mut lang = Language::new(d);
    for r in 0..3 {
        let arity = rng.random_range(1..=3);
        let density = rng.random_range(0.3..0.9);
        let tuples = all_tuples(d, arity).filter(|_| rng.random_bool(density)).collect();
        lang.insert(&format!("R{r}"), Relation::new(d, arity, tuples).unwrap()).unwrap();
    }
    let vars: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let m = rng.random_range(1..=6);
    let cons = (0..m)
        .map(|_| {
            let name = format!("R{}", rng.random_range(0..3));
            let arity = lang.get(&name).unwrap().arity();
            Constraint {
                scope: (0..arity).map(|_| vars[rng.random_range(0..n)].clone()).collect(),
                rel: name,
            }
        })
        .collect();
    Instance::new(lang, vars, cons).unwrap()
}

fn restrict_to_domains(p: &Instance, r: &SlacResult) -> Instance {
    let mut lang = p.language().clone();
    let mut cons = p.constraints().to_vec();
    for (v, s) in r.domains.iter().enumerate() {
        let name = format!("_dom{v}");
        lang.insert(&name, Relation::unary(p.d(), *s)).unwrap();
        cons.push(Constraint {
            scope: vec![p.variables()[v].clone()],
            rel: name,
        });
    }
    Instance::new(lang, p.variables().to_vec(), cons).unwrap()
}

#[test]
fn slac_is_sound_and_preserves_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = random_wild_instance(&mut rng);
        let r = slac(&p);
        let sols = enumerate_solutions(&p, usize::MAX).unwrap();
        for s in &sols {
            for (v, &k) in s.iter().enumerate() {
                assert!(r.domains[v].contains(k), "removed a value used by a solution");
            }
        }
        let restricted = restrict_to_domains(&p, &r);
        assert_eq!(brute_force_solve(&restricted).unwrap().is_sat(), !sols.is_empty());
        for removal in &r.removals {
            assert!(replay_chain(&p, &removal.chain, &removal.domains), "chain fails to replay");
            assert_eq!(removal.chain.pin, Some((removal.var, removal.value)));
        }
        assert_eq!(slac(&p), r, "slac is deterministic");
    }
}

#[test]
fn slac_refutes_unsat_bounded_width_instances() {
    let langs = bounded_width_languages();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut refuted, mut total) = (0, 0);
    for i in 0..210 {
        let (_, lang) = &langs[i % langs.len()];
        let n = rng.random_range(2..=10);
        let m = rng.random_range(n / 2..=2 * n);
        let p = random_instance(lang, n, m, &mut rng);
        let sat = brute_force_solve(&p).unwrap().is_sat();
        let r = slac(&p);
        assert_eq!(r.consistent, sat, "instance {i}: {}", p.to_json());
        total += 1;
        if !r.consistent {
            refuted += 1;
        }
    }
    assert!(refuted > 20 && refuted < total - 20, "corpus is unbalanced: {refuted}/{total}");
}

#[test]
fn certificates_for_refuted_instances() {
    let langs = bounded_width_languages();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut certified = 0;
    for i in 0..90 {
        let (_, lang) = &langs[i % langs.len()];
        let n = rng.random_range(2..=7);
        let p = random_instance(lang, n, 2 * n, &mut rng);
        let r = slac(&p);
        if r.consistent {
            assert!(build_certificate(&p, &r).is_err());
            continue;
        }
        let cert = build_certificate(&p, &r).unwrap();
        assert!(check_certificate(&p, &cert).is_accept(), "{}", p.to_json());
        assert!(!brute_force_solve(&p).unwrap().is_sat());
        let back = GapCertificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        let count = perturbation_count(&cert);
        for k in (0..count).step_by((count / 10).max(1)) {
            let bad = perturb(&cert, k).unwrap();
            assert!(!check_certificate(&p, &bad).is_accept(), "perturbation {k} accepted");
        }
        certified += 1;
    }
    assert!(certified >= 10);
}

#[test]
fn certificate_does_not_transfer_to_other_instances() {
    let langs = bounded_width_languages();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (_, lang) = &langs[1];
    let refuted: Vec<(Instance, GapCertificate)> = (0..60)
        .filter_map(|_| {
            let p = random_instance(lang, 4, 8, &mut rng);
            let r = slac(&p);
            (!r.consistent).then(|| {
                let c = build_certificate(&p, &r).unwrap();
                (p, c)
            })
        })
        .take(2)
        .collect();
    assert_eq!(refuted.len(), 2);
    assert!(!check_certificate(&refuted[0].0, &refuted[1].1).is_accept());
    assert!(!check_certificate(&magic_square(), &refuted[0].1).is_accept());
}

fn g_at(s: ValueSet, d: usize, k: usize) -> Complex64 {
    vanishing_polynomial(s, d).eval(&opcsp::fourier::lambda(k, d)).to_complex()
}

/// Every Linear AC fact derived under a pin `v = a` annihilates, against the pin,
/// on diagonal assignments assembled from classical solutions.
#[test]
fn derived_facts_hold_on_diagonal_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    for _ in 0..150 {
        let p = random_wild_instance(&mut rng);
        let sols = enumerate_solutions(&p, 3).unwrap();
        if sols.is_empty() {
            continue;
        }
        let d = p.d();
        let full = vec![ValueSet::full(d); p.variables().len()];
        for v in 0..p.variables().len() {
            for a in 0..d {
                let outcome = linear_ac(&p, &full, Some((v, a)));
                let not_a = ValueSet::full(d).minus(ValueSet::singleton(a));
                for fact in outcome.facts().facts() {
                    // Diagonal product of (Dom_{D∖a}(A_v) − I)(Dom_S(A_w) − I), slot by slot.
                    let worst = sols
                        .iter()
                        .map(|s| (g_at(not_a, d, s[v]) * g_at(fact.set, d, s[fact.var])).norm())
                        .fold(0.0, f64::max);
                    assert!(worst < 1e-8, "fact {:?} fails on a solution", fact);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100);
}
