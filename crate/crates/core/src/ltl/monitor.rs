//! Incremental monitoring by formula progression.
//!
//! Each observed action rewrites every oracle's formula so that the
//! remainder constrains the trace suffix. Progressed formulas are
//! simplified with a fixed, documented rule set (constant folding, double
//! negation, flattened idempotence, absorption) so reaching the constants
//! `true`/`false` — the absorbing verdicts — is deterministic.
//!
//! For every formula `f`, action `a`, and suffix `t`:
//! `evaluate(f, [a] ++ t) == evaluate(progress(f, a), t)`. Folding a whole
//! trace therefore ends with `evaluate(f, trace) == evaluate(residual, [])`,
//! which is what `monitor_finalize` reads off.

use serde::{Deserialize, Serialize};

use super::{evaluate, LtlFormula, SafetyOracle};
use crate::schema::{Invocation, Trace};

/// Four-valued verdict. `Satisfied` and `Violated` are permanent: once
/// entered, further steps never change them. The `Currently*` verdicts
/// report what finalizing on the trace seen so far would yield.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    CurrentlyTrue,
    CurrentlyFalse,
}

impl Verdict {
    pub fn is_absorbing(self) -> bool {
        matches!(self, Verdict::Satisfied | Verdict::Violated)
    }
}

/// Monitor entry for one oracle: its progressed formula and verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMonitor {
    pub oracle_id: String,
    pub formula: LtlFormula,
    pub verdict: Verdict,
}

/// Monitor over a set of oracles. Stepping is functional: it returns a new
/// state and leaves the input untouched.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MonitorState {
    pub entries: Vec<OracleMonitor>,
}

impl MonitorState {
    pub fn any_violated(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Violated)
    }

    /// Ids of oracles that would fail if the trace ended now.
    pub fn pending_or_violated(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| matches!(e.verdict, Verdict::Violated | Verdict::CurrentlyFalse))
            .map(|e| e.oracle_id.as_str())
            .collect()
    }
}

// ---- simplification -------------------------------------------------------

fn flatten_and(f: LtlFormula, out: &mut Vec<LtlFormula>) {
    match f {
        LtlFormula::And(a, b) => {
            flatten_and(*a, out);
            flatten_and(*b, out);
        }
        other => out.push(other),
    }
}

fn flatten_or(f: LtlFormula, out: &mut Vec<LtlFormula>) {
    match f {
        LtlFormula::Or(a, b) => {
            flatten_or(*a, out);
            flatten_or(*b, out);
        }
        other => out.push(other),
    }
}

fn rebuild(mut parts: Vec<LtlFormula>, is_and: bool) -> LtlFormula {
    let last = parts.pop().expect("non-empty");
    parts.into_iter().rev().fold(last, |acc, f| {
        if is_and {
            LtlFormula::And(Box::new(f), Box::new(acc))
        } else {
            LtlFormula::Or(Box::new(f), Box::new(acc))
        }
    })
}

fn smart_not(f: LtlFormula) -> LtlFormula {
    match f {
        LtlFormula::True => LtlFormula::False,
        LtlFormula::False => LtlFormula::True,
        LtlFormula::Not(inner) => *inner,
        other => LtlFormula::Not(Box::new(other)),
    }
}

fn smart_and(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    let mut parts = Vec::new();
    flatten_and(a, &mut parts);
    flatten_and(b, &mut parts);
    let mut kept: Vec<LtlFormula> = Vec::new();
    for p in parts {
        match p {
            LtlFormula::False => return LtlFormula::False,
            LtlFormula::True => {}
            p if kept.contains(&p) => {}
            p => kept.push(p),
        }
    }
    // absorption: f & (f | g) == f
    let snapshot = kept.clone();
    kept.retain(|p| match p {
        LtlFormula::Or(_, _) => {
            let mut djs = Vec::new();
            flatten_or(p.clone(), &mut djs);
            !djs.iter()
                .any(|d| snapshot.iter().any(|k| k == d && k != p))
        }
        _ => true,
    });
    if kept.is_empty() {
        LtlFormula::True
    } else {
        rebuild(kept, true)
    }
}

fn smart_or(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    let mut parts = Vec::new();
    flatten_or(a, &mut parts);
    flatten_or(b, &mut parts);
    let mut kept: Vec<LtlFormula> = Vec::new();
    for p in parts {
        match p {
            LtlFormula::True => return LtlFormula::True,
            LtlFormula::False => {}
            p if kept.contains(&p) => {}
            p => kept.push(p),
        }
    }
    // absorption: f | (f & g) == f
    let snapshot = kept.clone();
    kept.retain(|p| match p {
        LtlFormula::And(_, _) => {
            let mut cjs = Vec::new();
            flatten_and(p.clone(), &mut cjs);
            !cjs.iter()
                .any(|c| snapshot.iter().any(|k| k == c && k != p))
        }
        _ => true,
    });
    if kept.is_empty() {
        LtlFormula::False
    } else {
        rebuild(kept, false)
    }
}

fn smart_implies(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    match (&a, &b) {
        (LtlFormula::False, _) => LtlFormula::True,
        (LtlFormula::True, _) => b,
        (_, LtlFormula::True) => LtlFormula::True,
        (_, LtlFormula::False) => smart_not(a),
        _ if a == b => LtlFormula::True,
        _ => LtlFormula::Implies(Box::new(a), Box::new(b)),
    }
}

// ---- progression ----------------------------------------------------------

/// Rewrites `f` by one observed step so the result constrains the suffix.
pub(crate) fn progress(f: &LtlFormula, api_name: &str) -> LtlFormula {
    match f {
        LtlFormula::True => LtlFormula::True,
        LtlFormula::False => LtlFormula::False,
        LtlFormula::Atom(a) => {
            if a == api_name {
                LtlFormula::True
            } else {
                LtlFormula::False
            }
        }
        LtlFormula::Not(x) => smart_not(progress(x, api_name)),
        LtlFormula::And(a, b) => smart_and(progress(a, api_name), progress(b, api_name)),
        LtlFormula::Or(a, b) => smart_or(progress(a, api_name), progress(b, api_name)),
        LtlFormula::Implies(a, b) => smart_implies(progress(a, api_name), progress(b, api_name)),
        // X f: the suffix must be non-empty (strong next) and satisfy f.
        // "non-empty" is expressible as F true.
        LtlFormula::Next(x) => smart_and(
            LtlFormula::Eventually(Box::new(LtlFormula::True)),
            (**x).clone(),
        ),
        LtlFormula::Until(a, b) => smart_or(
            progress(b, api_name),
            smart_and(progress(a, api_name), f.clone()),
        ),
        LtlFormula::Eventually(x) => smart_or(progress(x, api_name), f.clone()),
        LtlFormula::Always(x) => smart_and(progress(x, api_name), f.clone()),
    }
}

fn verdict_for(formula: &LtlFormula) -> Verdict {
    match formula {
        LtlFormula::True => Verdict::Satisfied,
        LtlFormula::False => Verdict::Violated,
        f => {
            if evaluate(f, &Trace::default()) {
                Verdict::CurrentlyTrue
            } else {
                Verdict::CurrentlyFalse
            }
        }
    }
}

/// Starts monitoring: each formula is its own residual, and verdicts
/// reflect the empty trace.
pub fn monitor_init(oracles: &[SafetyOracle]) -> MonitorState {
    MonitorState {
        entries: oracles
            .iter()
            .map(|o| OracleMonitor {
                oracle_id: o.id.clone(),
                formula: o.formula.clone(),
                verdict: verdict_for(&o.formula),
            })
            .collect(),
    }
}

/// Advances every non-absorbing entry by one action.
pub fn monitor_step(m: &MonitorState, action: &Invocation) -> MonitorState {
    MonitorState {
        entries: m
            .entries
            .iter()
            .map(|e| {
                if e.verdict.is_absorbing() {
                    return e.clone();
                }
                let next = progress(&e.formula, &action.api);
                let verdict = verdict_for(&next);
                OracleMonitor {
                    oracle_id: e.oracle_id.clone(),
                    formula: next,
                    verdict,
                }
            })
            .collect(),
    }
}

/// End-of-trace reading: true iff every oracle is `Satisfied` or
/// `CurrentlyTrue`. Equals `evaluate(oracle.formula, full_trace)` for each
/// oracle.
pub fn monitor_finalize(m: &MonitorState) -> bool {
    m.entries
        .iter()
        .all(|e| matches!(e.verdict, Verdict::Satisfied | Verdict::CurrentlyTrue))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{instantiate_template, parse_formula, TemplateKind};
    use crate::schema::Args;

    fn inv(name: &str) -> Invocation {
        Invocation {
            step: 0,
            api: name.into(),
            args: Args::new(),
        }
    }

    fn restriction() -> SafetyOracle {
        instantiate_template(TemplateKind::OperationalRestriction, "p1", "p2").unwrap()
    }

    fn adherence() -> SafetyOracle {
        instantiate_template(TemplateKind::InstructionAdherence, "p1", "p2").unwrap()
    }

    #[test]
    fn init_verdicts_reflect_empty_trace() {
        let m = monitor_init(&[adherence()]);
        assert_eq!(m.entries[0].verdict, Verdict::CurrentlyTrue);
        let f = SafetyOracle {
            id: "f".into(),
            template: TemplateKind::Freeform,
            formula: parse_formula("F p2").unwrap(),
            provenance: String::new(),
        };
        let m = monitor_init(&[f]);
        assert_eq!(m.entries[0].verdict, Verdict::CurrentlyFalse);
        let empty = monitor_init(&[]);
        assert!(monitor_finalize(&empty));
    }

    #[test]
    fn restriction_violated_permanently_by_unchecked_action() {
        let m = monitor_init(&[restriction()]);
        let m = monitor_step(&m, &inv("p2"));
        assert_eq!(m.entries[0].verdict, Verdict::Violated);
        // absorbing
        let m = monitor_step(&m, &inv("p1"));
        assert_eq!(m.entries[0].verdict, Verdict::Violated);
        assert!(!monitor_finalize(&m));
    }

    #[test]
    fn restriction_satisfied_permanently_once_checked() {
        let m = monitor_init(&[restriction()]);
        let m = monitor_step(&m, &inv("p1"));
        assert_eq!(m.entries[0].verdict, Verdict::Satisfied);
        let m = monitor_step(&m, &inv("p2"));
        assert_eq!(m.entries[0].verdict, Verdict::Satisfied);
        assert!(monitor_finalize(&m));
    }

    #[test]
    fn adherence_pending_obligation_is_currently_false() {
        let m = monitor_init(&[adherence()]);
        let m = monitor_step(&m, &inv("p1"));
        assert_eq!(m.entries[0].verdict, Verdict::CurrentlyFalse);
        let m = monitor_step(&m, &inv("p2"));
        assert_eq!(m.entries[0].verdict, Verdict::CurrentlyTrue);
        assert!(monitor_finalize(&m));
    }

    #[test]
    fn mixed_satisfied_and_currently_true_finalizes_true() {
        let m = monitor_init(&[restriction(), adherence()]);
        let m = monitor_step(&m, &inv("p1"));
        assert_eq!(m.entries[0].verdict, Verdict::Satisfied);
        let m = monitor_step(&m, &inv("p2"));
        assert!(monitor_finalize(&m));
    }

    #[test]
    fn repeated_triggers_do_not_grow_the_residual() {
        let m = monitor_init(&[adherence()]);
        let m1 = monitor_step(&m, &inv("p1"));
        let m2 = monitor_step(&m1, &inv("p1"));
        let m3 = monitor_step(&m2, &inv("p1"));
        assert_eq!(m2.entries[0].formula, m3.entries[0].formula);
    }

    #[test]
    fn strong_next_requires_a_next_position() {
        let f = SafetyOracle {
            id: "x".into(),
            template: TemplateKind::Freeform,
            formula: parse_formula("X (G p1)").unwrap(),
            provenance: String::new(),
        };
        // trace [p1]: X (G p1) is false (no position 1)
        let m = monitor_init(std::slice::from_ref(&f));
        let m = monitor_step(&m, &inv("p1"));
        assert!(!monitor_finalize(&m));
        // trace [p1, p1]: position 1 exists and G p1 holds there
        let m = monitor_step(&m, &inv("p1"));
        assert!(monitor_finalize(&m));
    }

    #[test]
    fn monitor_agrees_with_evaluate_on_small_traces() {
        use crate::ltl::evaluate;
        use crate::schema::Trace;
        let formulas = [
            "!(!a U b)",
            "G (a -> F b)",
            "a U (b U c)",
            "X a",
            "X X a",
            "F a & G !c | b",
            "!(a -> F c)",
        ];
        let alphabet = ["a", "b", "c"];
        // enumerate traces up to length 4
        let mut traces: Vec<Vec<&str>> = vec![vec![]];
        let mut frontier: Vec<Vec<&str>> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for t in &frontier {
                for s in alphabet {
                    let mut t2 = t.clone();
                    t2.push(s);
                    next.push(t2);
                }
            }
            traces.extend(next.iter().cloned());
            frontier = next;
        }
        for text in formulas {
            let f = parse_formula(text).unwrap();
            let oracle = SafetyOracle {
                id: text.into(),
                template: TemplateKind::Freeform,
                formula: f.clone(),
                provenance: String::new(),
            };
            for t in &traces {
                let trace =
                    Trace::from_calls(t.iter().map(|n| (n.to_string(), Args::new())).collect());
                let mut m = monitor_init(std::slice::from_ref(&oracle));
                for a in &trace.actions {
                    m = monitor_step(&m, a);
                }
                assert_eq!(
                    monitor_finalize(&m),
                    evaluate(&f, &trace),
                    "formula `{text}` on {t:?}"
                );
            }
        }
    }
}
