//! Policy-to-oracle extraction.
//!
//! A completion client distills policy text into candidate rules using a
//! strict line-oriented reply format; anything unparseable is rejected
//! per item and recorded, never aborting the pipeline. Surviving
//! candidates pass through scope alignment (the quoted excerpt must occur
//! verbatim in the policy), deduplication, template instantiation, and
//! the signature validator. Human review happens on the emitted report,
//! outside this code.

mod client;

pub use client::{
    Cassette, ClientError, CompletionClient, GenerationParams, HttpClient, Interaction, MockClient,
    RecordingClient, ReplayClient, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{
    instantiate_template, validate_signature, SafetyOracle, TemplateKind, ValidationResult,
};
use crate::schema::Toolset;

/// Default extraction prompt; also shipped at `fixtures/prompts/extract.txt`.
pub const EXTRACT_PROMPT: &str = include_str!("../../fixtures/prompts/extract.txt");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// A rule as extracted, before grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRule {
    pub template: TemplateKind,
    pub p1: String,
    pub p2: String,
    /// Verbatim span of the policy that justifies the rule.
    pub provenance: String,
    pub rationale: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub blocks_seen: usize,
    /// Per-block parse rejections, with reasons.
    pub parse_rejections: Vec<String>,
    /// Rules whose excerpt is not a substring of the policy.
    pub out_of_scope: Vec<CandidateRule>,
    pub duplicates_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub rules: Vec<CandidateRule>,
    pub report: ExtractionReport,
}

/// Builds the extraction prompt from a template with `{{policy}}` and
/// `{{apis}}` placeholders.
pub fn build_prompt(template: &str, policy: &str, toolset: &Toolset) -> String {
    let api_list = toolset
        .apis
        .iter()
        .map(|a| format!("- {}", a.name))
        .collect::<Vec<_>>()
        .join("\n");
    template
        .replace("{{apis}}", &api_list)
        .replace("{{policy}}", policy)
}

fn parse_blocks(completion: &str) -> (Vec<CandidateRule>, usize, Vec<String>) {
    let mut rules = Vec::new();
    let mut rejections = Vec::new();
    let mut blocks = 0usize;
    let mut lines = completion.lines().peekable();
    while let Some(line) = lines.next() {
        if line.trim() != "RULE" {
            continue;
        }
        blocks += 1;
        let mut template = None;
        let mut p1 = None;
        let mut p2 = None;
        let mut excerpt = None;
        let mut rationale = String::new();
        let mut closed = false;
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "END" {
                closed = true;
                break;
            }
            if line == "RULE" {
                break; // unterminated block; treat the new RULE as a fresh start
            }
            match line.split_once(':') {
                Some((key, value)) => {
                    let value = value.trim();
                    match key.trim() {
                        "template" => template = Some(value.to_string()),
                        "p1" => p1 = Some(value.to_string()),
                        "p2" => p2 = Some(value.to_string()),
                        "excerpt" => excerpt = Some(value.trim_matches('"').to_string()),
                        "rationale" => rationale = value.to_string(),
                        other => {
                            rejections.push(format!("block {blocks}: unknown key `{other}`"));
                        }
                    }
                }
                None if line.is_empty() => {}
                None => rejections.push(format!("block {blocks}: unparseable line `{line}`")),
            }
        }
        if !closed {
            rejections.push(format!("block {blocks}: missing END"));
            continue;
        }
        let template = match template.as_deref() {
            Some("operational_restriction") => TemplateKind::OperationalRestriction,
            Some("instruction_adherence") => TemplateKind::InstructionAdherence,
            Some(other) => {
                rejections.push(format!("block {blocks}: unknown template `{other}`"));
                continue;
            }
            None => {
                rejections.push(format!("block {blocks}: missing template"));
                continue;
            }
        };
        let (Some(p1), Some(p2), Some(excerpt)) = (p1, p2, excerpt) else {
            rejections.push(format!("block {blocks}: missing p1, p2, or excerpt"));
            continue;
        };
        rules.push(CandidateRule {
            template,
            p1,
            p2,
            provenance: excerpt,
            rationale,
        });
    }
    (rules, blocks, rejections)
}

/// Scope alignment and deduplication. Idempotent: filtering an already
/// filtered list changes nothing.
fn post_filter(
    rules: Vec<CandidateRule>,
    policy: &str,
) -> (Vec<CandidateRule>, Vec<CandidateRule>, usize) {
    let mut kept: Vec<CandidateRule> = Vec::new();
    let mut out_of_scope = Vec::new();
    let mut duplicates = 0usize;
    for rule in rules {
        if !policy.contains(rule.provenance.as_str()) {
            out_of_scope.push(rule);
            continue;
        }
        let dup = kept
            .iter()
            .any(|k| k.template == rule.template && k.p1 == rule.p1 && k.p2 == rule.p2);
        if dup {
            duplicates += 1;
            continue;
        }
        kept.push(rule);
    }
    (kept, out_of_scope, duplicates)
}

/// Prompts the client, parses the structured reply into candidate rules,
/// drops out-of-scope excerpts and exact duplicates, and reports every
/// rejection. With a replay client this is a pure function of its inputs.
pub fn extract_rules(
    policy: &str,
    toolset: &Toolset,
    client: &dyn CompletionClient,
    prompt_template: Option<&str>,
) -> Result<Extraction, IngestError> {
    let prompt = build_prompt(prompt_template.unwrap_or(EXTRACT_PROMPT), policy, toolset);
    let completion = client.complete(&prompt, &GenerationParams::default())?;
    let (raw, blocks_seen, parse_rejections) = parse_blocks(&completion);
    let (rules, out_of_scope, duplicates_dropped) = post_filter(raw, policy);
    Ok(Extraction {
        rules,
        report: ExtractionReport {
            blocks_seen,
            parse_rejections,
            out_of_scope,
            duplicates_dropped,
        },
    })
}

/// A candidate that did not ground, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRule {
    pub rule: CandidateRule,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub accepted: Vec<SafetyOracle>,
    pub rejected: Vec<RejectedRule>,
}

/// Instantiates each candidate's template and applies the signature
/// validator. Accepted oracles carry their provenance excerpt; rejection
/// reasons name every unknown predicate.
pub fn ground_rules(candidates: &[CandidateRule], toolset: &Toolset) -> Grounding {
    let mut out = Grounding::default();
    for rule in candidates {
        let oracle = match instantiate_template(rule.template, &rule.p1, &rule.p2) {
            Ok(o) => o,
            Err(e) => {
                out.rejected.push(RejectedRule {
                    rule: rule.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let oracle = SafetyOracle {
            id: format!("{}-{:03}", toolset.scenario_name, out.accepted.len() + 1),
            provenance: rule.provenance.clone(),
            ..oracle
        };
        match validate_signature(&oracle, toolset) {
            ValidationResult::Accept => out.accepted.push(oracle),
            ValidationResult::Reject { unknown_atoms } => out.rejected.push(RejectedRule {
                rule: rule.clone(),
                reason: format!("unknown predicates: {}", unknown_atoms.join(", ")),
            }),
        }
    }
    out
}

/// Human-review rendering of an extraction run: accepted oracles with
/// their provenance, followed by everything that was dropped and why.
pub fn render_review(extraction: &Extraction, grounding: &Grounding) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "accepted oracles: {}\n==================\n",
        grounding.accepted.len()
    ));
    for o in &grounding.accepted {
        out.push_str(&format!(
            "[{}] {} :: {}\n    source: \"{}\"\n",
            o.id,
            o.template.name(),
            o.formula,
            o.provenance
        ));
    }
    if !grounding.rejected.is_empty() {
        out.push_str(&format!(
            "\nrejected candidates: {}\n--------------------\n",
            grounding.rejected.len()
        ));
        for r in &grounding.rejected {
            out.push_str(&format!(
                "({}, {}, {}): {}\n",
                r.rule.template.name(),
                r.rule.p1,
                r.rule.p2,
                r.reason
            ));
        }
    }
    let rep = &extraction.report;
    out.push_str(&format!(
        "\nextraction: {} blocks, {} parse rejections, {} out of scope, {} duplicates dropped\n",
        rep.blocks_seen,
        rep.parse_rejections.len(),
        rep.out_of_scope.len(),
        rep.duplicates_dropped
    ));
    for r in &rep.parse_rejections {
        out.push_str(&format!("  parse: {r}\n"));
    }
    for r in &rep.out_of_scope {
        out.push_str(&format!(
            "  out of scope: ({}, {}, {}) excerpt \"{}\"\n",
            r.template.name(),
            r.p1,
            r.p2,
            r.provenance
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_toolset;

    fn toolset() -> Toolset {
        load_toolset("scenario bank\napi check_auth { }\napi transfer { }\napi audit_log { }")
            .unwrap()
    }

    fn rule_block(template: &str, p1: &str, p2: &str, excerpt: &str) -> String {
        format!(
            "RULE\ntemplate: {template}\np1: {p1}\np2: {p2}\nexcerpt: \"{excerpt}\"\nrationale: test\nEND\n"
        )
    }

    const POLICY: &str = "Providers must verify customer identity before executing transfers. \
         All account access must be recorded in an audit log.";

    #[test]
    fn identical_rules_deduplicate_to_one() {
        let block = rule_block(
            "operational_restriction",
            "check_auth",
            "transfer",
            "verify customer identity before executing transfers",
        );
        let client = MockClient::fixed(format!("{block}{block}"));
        let ex = extract_rules(POLICY, &toolset(), &client, None).unwrap();
        assert_eq!(ex.rules.len(), 1);
        assert_eq!(ex.report.duplicates_dropped, 1);
        assert_eq!(ex.report.blocks_seen, 2);
    }

    #[test]
    fn out_of_scope_excerpt_is_dropped() {
        let block = rule_block(
            "operational_restriction",
            "check_auth",
            "transfer",
            "must verify biometrics",
        );
        let client = MockClient::fixed(block);
        let ex = extract_rules(POLICY, &toolset(), &client, None).unwrap();
        assert!(ex.rules.is_empty());
        assert_eq!(ex.report.out_of_scope.len(), 1);
    }

    #[test]
    fn malformed_blocks_reject_per_item() {
        let good = rule_block(
            "instruction_adherence",
            "transfer",
            "audit_log",
            "recorded in an audit log",
        );
        let bad = "RULE\ntemplate: nonsense\np1: a\np2: b\nexcerpt: \"x\"\nEND\n";
        let worse = "RULE\ntemplate: instruction_adherence\np1: a\nEND\n";
        let client = MockClient::fixed(format!("{bad}{good}{worse}"));
        let ex = extract_rules(POLICY, &toolset(), &client, None).unwrap();
        assert_eq!(ex.rules.len(), 1);
        assert_eq!(ex.report.parse_rejections.len(), 2);
    }

    #[test]
    fn post_filter_is_idempotent() {
        let rules = vec![
            CandidateRule {
                template: TemplateKind::OperationalRestriction,
                p1: "check_auth".into(),
                p2: "transfer".into(),
                provenance: "verify customer identity".into(),
                rationale: String::new(),
            },
            CandidateRule {
                template: TemplateKind::OperationalRestriction,
                p1: "check_auth".into(),
                p2: "transfer".into(),
                provenance: "verify customer identity".into(),
                rationale: String::new(),
            },
        ];
        let (once, _, dropped) = post_filter(rules, POLICY);
        assert_eq!(dropped, 1);
        let (twice, oos, dropped2) = post_filter(once.clone(), POLICY);
        assert_eq!(once, twice);
        assert!(oos.is_empty());
        assert_eq!(dropped2, 0);
    }

    #[test]
    fn grounding_accepts_known_and_rejects_unknown() {
        let candidates = vec![
            CandidateRule {
                template: TemplateKind::OperationalRestriction,
                p1: "check_auth".into(),
                p2: "transfer".into(),
                provenance: "p".into(),
                rationale: String::new(),
            },
            CandidateRule {
                template: TemplateKind::OperationalRestriction,
                p1: "verify_user".into(),
                p2: "transfer".into(),
                provenance: "p".into(),
                rationale: String::new(),
            },
        ];
        let g = ground_rules(&candidates, &toolset());
        assert_eq!(g.accepted.len(), 1);
        assert_eq!(g.rejected.len(), 1);
        assert!(g.rejected[0].reason.contains("verify_user"));
        assert_eq!(g.accepted[0].provenance, "p");
    }

    #[test]
    fn grounding_empty_is_empty() {
        let g = ground_rules(&[], &toolset());
        assert!(g.accepted.is_empty() && g.rejected.is_empty());
    }

    #[test]
    fn degenerate_template_candidates_are_rejected_as_data() {
        let candidates = vec![CandidateRule {
            template: TemplateKind::InstructionAdherence,
            p1: "transfer".into(),
            p2: "transfer".into(),
            provenance: "p".into(),
            rationale: String::new(),
        }];
        let g = ground_rules(&candidates, &toolset());
        assert!(g.accepted.is_empty());
        assert_eq!(g.rejected.len(), 1);
    }

    #[test]
    fn replayed_extraction_is_deterministic() {
        let block = rule_block(
            "instruction_adherence",
            "transfer",
            "audit_log",
            "recorded in an audit log",
        );
        let cassette = Cassette {
            interactions: vec![Interaction {
                seq: 0,
                prompt: String::new(),
                params: GenerationParams::default(),
                completion: block,
            }],
        };
        let run = |cassette: &Cassette| {
            let client = ReplayClient::new(cassette.clone());
            extract_rules(POLICY, &toolset(), &client, None).unwrap()
        };
        assert_eq!(run(&cassette), run(&cassette));
    }
}
