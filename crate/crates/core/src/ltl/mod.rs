//! Linear temporal logic over finite traces: formula AST, concrete syntax,
//! full-trace evaluation, an incremental progression monitor, and the two
//! compliance templates.
//!
//! Semantics are fixed as follows. Exactly one atom is true per trace
//! position: the name of the API invoked at that step. On the empty trace,
//! `G` is true, `F` is false, `U` is false (strong until), and `X` is false
//! (strong next).

mod eval;
mod monitor;
mod parser;

pub use eval::evaluate;
pub use monitor::{
    monitor_finalize, monitor_init, monitor_step, MonitorState, OracleMonitor, Verdict,
};
pub use parser::{parse_formula, pretty_print};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::schema::Toolset;

#[derive(Debug, Error)]
pub enum LtlError {
    #[error("parse error at offset {pos}: expected {expected}")]
    Parse { pos: usize, expected: String },
    #[error("template instantiation with p1 == p2 (`{name}`) is degenerate and rejected")]
    DegenerateTemplate { name: String },
    #[error("oracle `{id}`: formula does not match the `{template}` template shape")]
    TemplateShapeMismatch { id: String, template: String },
    #[error("oracle file line {line}: {msg}")]
    OracleFile { line: usize, msg: String },
}

/// Formula AST. Atoms name APIs; an atom holds at a position iff that
/// position's invocation has the same name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LtlFormula {
    True,
    False,
    Atom(String),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Implies(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Always(Box<LtlFormula>),
}

impl LtlFormula {
    pub fn atom(name: impl Into<String>) -> Self {
        LtlFormula::Atom(name.into())
    }

    /// All atom names in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            LtlFormula::True | LtlFormula::False => {}
            LtlFormula::Atom(a) => {
                out.insert(a.clone());
            }
            LtlFormula::Not(f)
            | LtlFormula::Next(f)
            | LtlFormula::Eventually(f)
            | LtlFormula::Always(f) => f.collect_atoms(out),
            LtlFormula::And(a, b)
            | LtlFormula::Or(a, b)
            | LtlFormula::Implies(a, b)
            | LtlFormula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_print(self))
    }
}

impl Serialize for LtlFormula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&pretty_print(self))
    }
}

impl<'de> Deserialize<'de> for LtlFormula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

/// The two compliance templates plus an escape hatch for hand-written
/// formulas. Extraction only ever emits the two templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// `!((!p1) U p2)`: the sensitive action `p2` is forbidden until the
    /// check `p1` has occurred.
    OperationalRestriction,
    /// `G (p1 -> F p2)`: the trigger `p1` obliges a later `p2`.
    InstructionAdherence,
    Freeform,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::OperationalRestriction => "operational_restriction",
            TemplateKind::InstructionAdherence => "instruction_adherence",
            TemplateKind::Freeform => "freeform",
        }
    }
}

/// A grounded compliance rule: formula, template, and the policy text span
/// it was distilled from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyOracle {
    pub id: String,
    pub template: TemplateKind,
    pub formula: LtlFormula,
    /// Verbatim excerpt of the source regulation.
    #[serde(default)]
    pub provenance: String,
}

impl SafetyOracle {
    /// Checks the structural invariant: a non-freeform oracle's formula must
    /// have exactly its template's shape.
    pub fn matches_template(&self) -> bool {
        match self.template {
            TemplateKind::Freeform => true,
            TemplateKind::OperationalRestriction => template_params(&self.formula)
                .is_some_and(|(k, _, _)| k == TemplateKind::OperationalRestriction),
            TemplateKind::InstructionAdherence => template_params(&self.formula)
                .is_some_and(|(k, _, _)| k == TemplateKind::InstructionAdherence),
        }
    }
}

/// Recognizes a template instance, returning `(kind, p1, p2)`.
pub fn template_params(f: &LtlFormula) -> Option<(TemplateKind, &str, &str)> {
    use LtlFormula::*;
    match f {
        Not(u) => match u.as_ref() {
            Until(np1, p2) => match (np1.as_ref(), p2.as_ref()) {
                (Not(p1), Atom(a2)) => match p1.as_ref() {
                    Atom(a1) => Some((TemplateKind::OperationalRestriction, a1, a2)),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        },
        Always(imp) => match imp.as_ref() {
            Implies(p1, fp2) => match (p1.as_ref(), fp2.as_ref()) {
                (Atom(a1), Eventually(p2)) => match p2.as_ref() {
                    Atom(a2) => Some((TemplateKind::InstructionAdherence, a1, a2)),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

/// Builds one of the two template formulas. `p1 == p2` is rejected: under
/// one-atom-per-step semantics the restriction template would then be
/// unsatisfiable by any trace containing the atom.
pub fn instantiate_template(
    kind: TemplateKind,
    p1: &str,
    p2: &str,
) -> Result<SafetyOracle, LtlError> {
    if p1 == p2 {
        return Err(LtlError::DegenerateTemplate { name: p1.into() });
    }
    use LtlFormula::*;
    let formula = match kind {
        TemplateKind::OperationalRestriction => Not(Box::new(Until(
            Box::new(Not(Box::new(Atom(p1.into())))),
            Box::new(Atom(p2.into())),
        ))),
        TemplateKind::InstructionAdherence => Always(Box::new(Implies(
            Box::new(Atom(p1.into())),
            Box::new(Eventually(Box::new(Atom(p2.into())))),
        ))),
        TemplateKind::Freeform => {
            return Err(LtlError::TemplateShapeMismatch {
                id: String::new(),
                template: "freeform (not instantiable)".into(),
            })
        }
    };
    Ok(SafetyOracle {
        id: format!("{}:{}:{}", kind.name(), p1, p2),
        template: kind,
        formula,
        provenance: String::new(),
    })
}

/// Result of the signature check: either every atom names an API in the
/// toolset, or the full list of unknown atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ValidationResult {
    Accept,
    Reject { unknown_atoms: Vec<String> },
}

impl ValidationResult {
    pub fn is_accept(&self) -> bool {
        matches!(self, ValidationResult::Accept)
    }
}

/// Deterministic signature validator: rejects any oracle whose formula
/// mentions an API absent from the schema.
pub fn validate_signature(oracle: &SafetyOracle, toolset: &Toolset) -> ValidationResult {
    let unknown: Vec<String> = oracle
        .formula
        .atoms()
        .into_iter()
        .filter(|a| toolset.api(a).is_none())
        .collect();
    if unknown.is_empty() {
        ValidationResult::Accept
    } else {
        ValidationResult::Reject {
            unknown_atoms: unknown,
        }
    }
}

/// Parses an oracle file: one JSON record per non-blank line.
pub fn parse_oracle_file(text: &str) -> Result<Vec<SafetyOracle>, LtlError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let oracle: SafetyOracle =
            serde_json::from_str(line).map_err(|e| LtlError::OracleFile {
                line: i + 1,
                msg: e.to_string(),
            })?;
        if !oracle.matches_template() {
            return Err(LtlError::TemplateShapeMismatch {
                id: oracle.id,
                template: oracle.template.name().into(),
            });
        }
        out.push(oracle);
    }
    Ok(out)
}

/// Renders oracles as one JSON record per line.
pub fn render_oracle_file(oracles: &[SafetyOracle]) -> String {
    let mut out = String::new();
    for o in oracles {
        out.push_str(&serde_json::to_string(o).expect("oracle serializes"));
        out.push('\n');
    }
    out
}
