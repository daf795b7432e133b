//! Randomized invariants: parser round-trips, monitor/evaluator agreement,
//! permanent-verdict soundness, and the masking subsequence law.

use proptest::prelude::*;

use complygen_core::ltl::{
    evaluate, monitor_finalize, monitor_init, monitor_step, parse_formula, pretty_print,
    LtlFormula, SafetyOracle, TemplateKind, Verdict,
};
use complygen_core::schema::{Args, Trace};
use complygen_core::testgen::mask_trace;

const ATOMS: [&str; 3] = ["alpha", "beta", "gamma"];

fn atom_strategy() -> impl Strategy<Value = LtlFormula> {
    prop_oneof![
        Just(LtlFormula::True),
        Just(LtlFormula::False),
        proptest::sample::select(&ATOMS[..]).prop_map(LtlFormula::atom),
    ]
}

fn formula_strategy() -> impl Strategy<Value = LtlFormula> {
    atom_strategy().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| LtlFormula::Not(Box::new(f))),
            inner.clone().prop_map(|f| LtlFormula::Next(Box::new(f))),
            inner
                .clone()
                .prop_map(|f| LtlFormula::Eventually(Box::new(f))),
            inner.clone().prop_map(|f| LtlFormula::Always(Box::new(f))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| LtlFormula::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| LtlFormula::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| LtlFormula::Implies(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| LtlFormula::Until(Box::new(a), Box::new(b))),
        ]
    })
}

fn trace_strategy() -> impl Strategy<Value = Trace> {
    proptest::collection::vec(proptest::sample::select(&ATOMS[..]), 0..=8).prop_map(|names| {
        Trace::from_calls(
            names
                .into_iter()
                .map(|n| (n.to_string(), Args::new()))
                .collect(),
        )
    })
}

fn as_oracle(f: &LtlFormula) -> SafetyOracle {
    SafetyOracle {
        id: "prop".into(),
        template: TemplateKind::Freeform,
        formula: f.clone(),
        provenance: String::new(),
    }
}

fn fold_monitor(f: &LtlFormula, trace: &Trace) -> complygen_core::ltl::MonitorState {
    let mut m = monitor_init(std::slice::from_ref(&as_oracle(f)));
    for action in &trace.actions {
        m = monitor_step(&m, action);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn pretty_print_reparses_to_the_same_ast(f in formula_strategy()) {
        let printed = pretty_print(&f);
        let reparsed = parse_formula(&printed)
            .unwrap_or_else(|e| panic!("`{printed}` does not reparse: {e}"));
        prop_assert_eq!(f, reparsed);
    }

    #[test]
    fn monitor_agrees_with_full_trace_evaluation(
        f in formula_strategy(),
        t in trace_strategy(),
    ) {
        prop_assert_eq!(monitor_finalize(&fold_monitor(&f, &t)), evaluate(&f, &t));
    }

    #[test]
    fn absorbing_verdicts_never_change(
        f in formula_strategy(),
        t in trace_strategy(),
        extra in proptest::sample::select(&ATOMS[..]),
    ) {
        let m = fold_monitor(&f, &t);
        let verdict = m.entries[0].verdict;
        if verdict.is_absorbing() {
            let next = monitor_step(
                &m,
                &complygen_core::schema::Invocation {
                    step: t.len(),
                    api: extra.to_string(),
                    args: Args::new(),
                },
            );
            prop_assert_eq!(next.entries[0].verdict, verdict);
        }
    }

    /// A permanent violation on a prefix dooms every extension.
    #[test]
    fn violated_prefixes_are_unrecoverable(
        f in formula_strategy(),
        t in trace_strategy(),
    ) {
        let m = fold_monitor(&f, &t);
        if m.entries[0].verdict == Verdict::Violated {
            // exhaustive extensions up to length 2
            let mut extensions: Vec<Vec<&str>> = vec![vec![]];
            for a in ATOMS {
                extensions.push(vec![a]);
                for b in ATOMS {
                    extensions.push(vec![a, b]);
                }
            }
            for ext in extensions {
                let mut names: Vec<&str> = t.actions.iter().map(|a| a.api.as_str()).collect();
                names.extend(ext);
                let full = Trace::from_calls(
                    names.into_iter().map(|n| (n.to_string(), Args::new())).collect(),
                );
                prop_assert!(!evaluate(&f, &full));
            }
        }
    }

    /// Masking is an order-preserving safety-free subsequence and is
    /// idempotent.
    #[test]
    fn masking_subsequence_law(
        picks in proptest::collection::vec(0usize..20, 0..=12),
    ) {
        let ts = complygen_core::fixtures::SMARTHOME.toolset().unwrap();
        let calls: Vec<(String, Args)> = picks
            .iter()
            .map(|i| {
                let api = &ts.apis[i % ts.apis.len()];
                let args: Args = api
                    .params
                    .iter()
                    .map(|p| (p.name.clone(), p.domain.values()[0].clone()))
                    .collect();
                (api.name.clone(), args)
            })
            .collect();
        let trace = Trace::from_calls(calls);
        let masked = mask_trace(&trace, &ts).unwrap();
        // subsequence: the masked actions appear in order in the original
        let mut cursor = 0usize;
        for m in &masked.actions {
            let found = trace.actions[cursor..]
                .iter()
                .position(|a| a.api == m.api && a.args == m.args);
            prop_assert!(found.is_some(), "masked action not found in order");
            cursor += found.unwrap() + 1;
        }
        prop_assert!(masked
            .actions
            .iter()
            .all(|a| !ts.api(&a.api).unwrap().safety_critical));
        let twice = mask_trace(&masked, &ts).unwrap();
        prop_assert_eq!(masked, twice);
    }
}
