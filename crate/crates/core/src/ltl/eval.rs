//! Full-trace LTL_f evaluation by direct recursion over positions.

use super::LtlFormula;
use crate::schema::Trace;

fn holds(f: &LtlFormula, names: &[&str], i: usize) -> bool {
    let n = names.len();
    match f {
        LtlFormula::True => true,
        LtlFormula::False => false,
        LtlFormula::Atom(a) => i < n && names[i] == a,
        LtlFormula::Not(x) => !holds(x, names, i),
        LtlFormula::And(a, b) => holds(a, names, i) && holds(b, names, i),
        LtlFormula::Or(a, b) => holds(a, names, i) || holds(b, names, i),
        LtlFormula::Implies(a, b) => !holds(a, names, i) || holds(b, names, i),
        // strong next: there must BE a next position
        LtlFormula::Next(x) => i + 1 < n && holds(x, names, i + 1),
        LtlFormula::Eventually(x) => (i..n).any(|j| holds(x, names, j)),
        LtlFormula::Always(x) => (i..n).all(|j| holds(x, names, j)),
        // strong until: the right-hand side must eventually hold
        LtlFormula::Until(a, b) => {
            for j in i..n {
                if holds(b, names, j) {
                    return true;
                }
                if !holds(a, names, j) {
                    return false;
                }
            }
            false
        }
    }
}

/// Standard LTL_f semantics over the trace's sequence of API names. On the
/// empty trace `G` is true and `F`, `U`, `X`, and atoms are false.
pub fn evaluate(formula: &LtlFormula, trace: &Trace) -> bool {
    let names = trace.api_names();
    holds(formula, &names, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{instantiate_template, parse_formula, TemplateKind};
    use crate::schema::{Args, Trace};

    fn trace(names: &[&str]) -> Trace {
        Trace::from_calls(names.iter().map(|n| (n.to_string(), Args::new())).collect())
    }

    fn restriction() -> LtlFormula {
        instantiate_template(TemplateKind::OperationalRestriction, "p1", "p2")
            .unwrap()
            .formula
    }

    fn adherence() -> LtlFormula {
        instantiate_template(TemplateKind::InstructionAdherence, "p1", "p2")
            .unwrap()
            .formula
    }

    #[test]
    fn restriction_check_before_action_holds() {
        assert!(evaluate(&restriction(), &trace(&["p1", "p2"])));
    }

    #[test]
    fn restriction_unchecked_action_fails() {
        assert!(!evaluate(&restriction(), &trace(&["p2"])));
    }

    #[test]
    fn adherence_undischarged_trigger_fails() {
        // the last p1 is never followed by p2
        assert!(!evaluate(&adherence(), &trace(&["p1", "x", "p2", "p1"])));
        assert!(evaluate(&adherence(), &trace(&["p1", "x", "p2"])));
    }

    #[test]
    fn empty_trace_semantics() {
        let e = Trace::default();
        assert!(evaluate(&parse_formula("G a").unwrap(), &e));
        assert!(!evaluate(&parse_formula("F a").unwrap(), &e));
        assert!(!evaluate(&parse_formula("a U b").unwrap(), &e));
        assert!(!evaluate(&parse_formula("X a").unwrap(), &e));
        assert!(!evaluate(&parse_formula("a").unwrap(), &e));
        assert!(evaluate(&parse_formula("true").unwrap(), &e));
    }

    #[test]
    fn next_is_false_at_last_position() {
        // X a: needs a second position
        let f = parse_formula("X a").unwrap();
        assert!(!evaluate(&f, &trace(&["a"])));
        assert!(evaluate(&f, &trace(&["b", "a"])));
    }

    #[test]
    fn one_atom_true_per_position() {
        let f = parse_formula("G (a -> !b)").unwrap();
        assert!(evaluate(&f, &trace(&["a", "b", "a"])));
    }

    /// Independent closed-form oracles for the two templates, checked by
    /// exhaustive enumeration over a 3-symbol alphabet.
    mod closed_forms {
        use super::*;

        fn op_restriction_oracle(names: &[&str], p1: &str, p2: &str) -> bool {
            match names.iter().position(|n| *n == p2) {
                None => true,
                Some(first_p2) => names[..first_p2].contains(&p1),
            }
        }

        fn adherence_oracle(names: &[&str], p1: &str, p2: &str) -> bool {
            names
                .iter()
                .enumerate()
                .filter(|(_, n)| **n == p1)
                .all(|(i, _)| names[i..].contains(&p2))
        }

        fn all_traces(alphabet: &[&'static str], max_len: usize) -> Vec<Vec<&'static str>> {
            let mut out: Vec<Vec<&'static str>> = vec![vec![]];
            let mut frontier: Vec<Vec<&'static str>> = vec![vec![]];
            for _ in 0..max_len {
                let mut next = Vec::new();
                for t in &frontier {
                    for s in alphabet {
                        let mut t2 = t.clone();
                        t2.push(s);
                        next.push(t2);
                    }
                }
                out.extend(next.iter().cloned());
                frontier = next;
            }
            out
        }

        #[test]
        fn templates_match_closed_forms_exhaustively() {
            let alphabet = ["a", "b", "c"];
            let traces = all_traces(&alphabet, 6);
            for p1 in alphabet {
                for p2 in alphabet {
                    if p1 == p2 {
                        continue;
                    }
                    let restr = instantiate_template(TemplateKind::OperationalRestriction, p1, p2)
                        .unwrap()
                        .formula;
                    let adh = instantiate_template(TemplateKind::InstructionAdherence, p1, p2)
                        .unwrap()
                        .formula;
                    for t in &traces {
                        let tr = trace(t);
                        assert_eq!(
                            evaluate(&restr, &tr),
                            op_restriction_oracle(t, p1, p2),
                            "restriction({p1},{p2}) on {t:?}"
                        );
                        assert_eq!(
                            evaluate(&adh, &tr),
                            adherence_oracle(t, p1, p2),
                            "adherence({p1},{p2}) on {t:?}"
                        );
                    }
                }
            }
        }
    }
}
