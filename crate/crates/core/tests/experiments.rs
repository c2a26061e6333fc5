//! End-to-end experiments at reduced size.

use smplab_core::forward::{PathEnsemble, TensorStep};
use smplab_core::scenario::{load_scenario, parse_scenario, Scenario};
use smplab_core::verification::{smp_experiment, tensor_identity};
use smplab_core::Execution;

fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> Scenario {
    load_scenario(fixture_path(name)).unwrap()
}

#[test]
fn maximum_principle_on_the_tiny_instance() {
    let s = fixture("tiny.cfg");
    let exec = Execution::default();
    let e = PathEnsemble::generate(s.seed, s.run.paths, s.n_t, s.k(), s.dt(), exec).unwrap();
    let x = smp_experiment(&s, &e, 8, exec).unwrap();
    assert!(x.brute.locally_optimal(2.0));
    assert!(x.at_optimum.normalized_minimum() >= -0.05, "{}", x.at_optimum.normalized_minimum());
    assert!(x.perturbed.passes(0.2, 2.0), "{:?}", x.perturbed.worst);
}

#[test]
fn tensor_process_tracks_the_outer_product_as_the_step_shrinks() {
    let text = std::fs::read_to_string(fixture_path("bilinear16.cfg")).unwrap();
    let exec = Execution::default();
    let run = |steps: usize| {
        let s = parse_scenario(&text.replace("steps = 128", &format!("steps = {steps}"))).unwrap();
        let e = PathEnsemble::generate(s.seed, 200, s.n_t, s.k(), s.dt(), exec).unwrap();
        tensor_identity(&s, &e, &TensorStep::factored(&s).unwrap(), exec).unwrap()
    };
    let (coarse, fine) = (run(128), run(2048));
    assert!(coarse.max_asymmetry < 1e-12 && fine.max_asymmetry < 1e-12);
    assert!(fine.in_mean < 0.05, "{fine:?}");
    // strong order one half: sixteen times more steps gain about 4
    assert!(fine.pathwise < coarse.pathwise / 2.5, "{coarse:?} {fine:?}");
}
