//! Builds one benchmark case from the bundled financial scenario and
//! grades three candidate scripts against it.
//!
//! ```bash
//! cargo run --example grade_script
//! ```

use complygen_core::evaluator::{evaluate_candidate, render_call_script, CandidateSolution};
use complygen_core::fixtures::FINANCIAL;
use complygen_core::fuzzer::FuzzConfig;
use complygen_core::testgen::{build_benchmark, Typology};

fn main() {
    let toolset = FINANCIAL.toolset().expect("bundled schema loads");
    let oracles = FINANCIAL.oracles().expect("bundled oracles load");

    let configs = vec![FuzzConfig {
        target_length: 8,
        seed: 3,
        ..FuzzConfig::default()
    }];
    let (bundle, _report) =
        build_benchmark(&toolset, &oracles, &configs, &[Typology::Goal], None)
            .expect("generation succeeds");
    let case = &bundle.cases[0];

    println!("instruction:\n  {}\n", case.instruction);
    println!("reference solution:\n{}", render_call_script(&case.ground_truth));

    let candidates = [
        ("the reference solution", render_call_script(&case.ground_truth)),
        ("the masked business trace", render_call_script(&case.business_trace)),
        ("a script that does not parse", "pay_invoice(invoice=".to_string()),
    ];
    for (label, script) in candidates {
        let outcome =
            evaluate_candidate(case, &CandidateSolution::script(script, "example"), &toolset);
        println!(
            "{label}: {:?} / {:?} (functional {}, safety {})",
            outcome.outcome_class,
            outcome.failure_category,
            outcome.functional_pass,
            outcome.safety_pass
        );
    }
}
