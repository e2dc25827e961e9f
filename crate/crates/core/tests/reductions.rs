mod common;

use common::{constants_suite, core_suite, factor_suite, gadget_suite, restrict_suite, SuiteStats};

fn run(name: &str, result: Result<SuiteStats, String>) {
    let stats = result.unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(stats.cases >= 100, "{name}: only {} cases", stats.cases);
    assert!(stats.transported >= 20, "{name}: only {} operator transports", stats.transported);
    assert!(stats.max_residual < 1e-8);
}

#[test]
fn gadget_and_collapse_preserve_satisfiability() {
    run("gadget", gadget_suite(31, 100));
}

#[test]
fn core_relabeling_preserves_satisfiability() {
    run("core", core_suite(32, 100));
}

#[test]
fn constants_reduction_preserves_satisfiability() {
    run("constants", constants_suite(33, 100));
}

#[test]
fn subalgebra_restriction_preserves_satisfiability() {
    run("restrict", restrict_suite(34, 100));
}

#[test]
fn factor_preimages_preserve_satisfiability() {
    run("factor", factor_suite(35, 100));
}
