//! Batch pipeline driver: one command per stage, file formats in between.
//!
//! Every command reads and writes only the documented formats, so any
//! stage can be rerun in isolation and humans can review artifacts between
//! stages. Outputs land under `--out` together with a `manifest.json`
//! listing inputs (with content hashes) and outputs. Nothing here embeds
//! timestamps or machine identity: rerunning a stage with the same inputs
//! produces byte-identical files.
//!
//! Exit codes: 0 success (for `eval`: all candidates pass), 1 eval found
//! failing candidates, 2 usage/configuration/harness error, 3 empty
//! result (no oracles accepted, or every search exhausted).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::coverage_report;
use crate::evaluator::{
    aggregate, evaluate_candidate, render_report_text, CandidateSolution, EvalRecord, OutcomeClass,
    ResultsFile,
};
use crate::fuzzer::{synthesize_trace, FuzzConfig, FuzzError, TraceFile};
use crate::ingest::{
    extract_rules, ground_rules, render_review, CompletionClient, HttpClient, RecordingClient,
    ReplayClient,
};
use crate::ltl::{parse_oracle_file, render_oracle_file};
use crate::schema::{load_toolset, Toolset};
use crate::testgen::{build_benchmark_from_traces, BenchmarkBundle, Typology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EVAL_FAILURES: i32 = 1;
pub const EXIT_HARNESS: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    BadInput { path: String, msg: String },
    #[error(transparent)]
    Client(#[from] crate::ingest::ClientError),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    #[default]
    Off,
    Replay,
    Live,
}

impl std::str::FromStr for ClientMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(ClientMode::Off),
            "replay" => Ok(ClientMode::Replay),
            "live" => Ok(ClientMode::Live),
            other => Err(format!("unknown client mode `{other}` (off|replay|live)")),
        }
    }
}

// ---- shared plumbing --------------------------------------------------------

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn load_schema(path: &Path) -> Result<Toolset, CliError> {
    let text = read_file(path)?;
    load_toolset(&text).map_err(|e| CliError::BadInput {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn load_oracles(path: &Path) -> Result<Vec<crate::ltl::SafetyOracle>, CliError> {
    let text = read_file(path)?;
    parse_oracle_file(&text).map_err(|e| CliError::BadInput {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn fnv1a(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    command: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    tool_version: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    entries: Vec<ManifestEntry>,
}

fn record_manifest(
    out: &Path,
    command: &str,
    inputs: &[(&Path, &str)],
    outputs: &[String],
) -> Result<(), CliError> {
    let path = out.join("manifest.json");
    let mut manifest: Manifest = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => Manifest::default(),
    };
    manifest.entries.retain(|e| e.command != command);
    manifest.entries.push(ManifestEntry {
        command: command.to_string(),
        // keyed by file name, not full path, so identical runs into
        // different directories stay byte-identical
        inputs: inputs
            .iter()
            .map(|(p, content)| {
                let name = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                (name, fnv1a(content.as_bytes()))
            })
            .collect(),
        outputs: outputs.to_vec(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    });
    manifest.entries.sort_by(|a, b| a.command.cmp(&b.command));
    write_file(
        out,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

/// Files of a directory with the given extension, name-sorted so every run
/// sees the same order.
fn dir_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Read {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    out.sort();
    Ok(out)
}

fn make_client(
    mode: ClientMode,
    cassette: Option<&Path>,
    record: Option<&Path>,
) -> Result<Option<Box<dyn CompletionClient>>, CliError> {
    match mode {
        ClientMode::Off => Ok(None),
        ClientMode::Replay => {
            let path = cassette.ok_or_else(|| {
                CliError::Usage("client mode `replay` requires --cassette <file>".into())
            })?;
            Ok(Some(Box::new(ReplayClient::from_path(path)?)))
        }
        ClientMode::Live => {
            let inner = HttpClient::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
            match record {
                Some(path) => Ok(Some(Box::new(RecordingClient::new(inner, path)))),
                None => Ok(Some(Box::new(inner))),
            }
        }
    }
}

// ---- extract ----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExtractArgs {
    pub policy: PathBuf,
    pub schema: PathBuf,
    pub client: ClientMode,
    pub cassette: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub prompt: Option<PathBuf>,
    pub out: PathBuf,
}

/// Policy text -> grounded oracle file plus a review report.
pub fn cmd_extract(args: &ExtractArgs) -> Result<i32, CliError> {
    let policy = read_file(&args.policy)?;
    let schema_text = read_file(&args.schema)?;
    let toolset = load_schema(&args.schema)?;
    let prompt_text = match &args.prompt {
        Some(p) => Some(read_file(p)?),
        None => None,
    };
    let client = make_client(
        args.client,
        args.cassette.as_deref(),
        args.record.as_deref(),
    )?
    .ok_or_else(|| CliError::Usage("extract needs a client: pass --client replay|live".into()))?;
    let extraction = extract_rules(&policy, &toolset, client.as_ref(), prompt_text.as_deref())?;
    let grounding = ground_rules(&extraction.rules, &toolset);

    write_file(
        &args.out,
        "oracles.jsonl",
        &render_oracle_file(&grounding.accepted),
    )?;
    let report = serde_json::json!({
        "extraction": extraction.report,
        "accepted": grounding.accepted.len(),
        "rejected": grounding.rejected,
    });
    write_file(
        &args.out,
        "extract_report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_file(
        &args.out,
        "review.txt",
        &render_review(&extraction, &grounding),
    )?;
    record_manifest(
        &args.out,
        "extract",
        &[(&args.policy, &policy), (&args.schema, &schema_text)],
        &[
            "oracles.jsonl".into(),
            "extract_report.json".into(),
            "review.txt".into(),
        ],
    )?;
    Ok(if grounding.accepted.is_empty() {
        EXIT_EMPTY
    } else {
        EXIT_OK
    })
}

// ---- fuzz -------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FuzzArgs {
    pub schema: PathBuf,
    pub oracles: PathBuf,
    pub lengths: Vec<usize>,
    pub seeds: u64,
    pub seed_start: u64,
    pub max_backtracks: usize,
    pub max_candidates: usize,
    pub require_business: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FuzzRunReport {
    scenario: String,
    produced: usize,
    exhausted: Vec<serde_json::Value>,
    stats: Vec<serde_json::Value>,
}

/// Synthesizes one trace per (seed, length) pair; each trace lands in its
/// own file under `--out/traces/`.
pub fn cmd_fuzz(args: &FuzzArgs) -> Result<i32, CliError> {
    if args.lengths.is_empty() || args.seeds == 0 {
        return Err(CliError::Usage(
            "fuzz needs at least one --length and --seeds >= 1".into(),
        ));
    }
    let schema_text = read_file(&args.schema)?;
    let oracle_text = read_file(&args.oracles)?;
    let toolset = load_schema(&args.schema)?;
    let oracles = load_oracles(&args.oracles)?;
    let traces_dir = args.out.join("traces");
    let mut produced = 0usize;
    let mut outputs = Vec::new();
    let mut exhausted = Vec::new();
    let mut stats = Vec::new();
    for i in 0..args.seeds {
        let seed = args.seed_start + i;
        let target_length = args.lengths[(i % args.lengths.len() as u64) as usize];
        let config = FuzzConfig {
            target_length,
            seed,
            max_backtracks: args.max_backtracks,
            max_candidates_per_step: args.max_candidates,
            require_business_action: args.require_business,
        };
        match synthesize_trace(&toolset, &oracles, &config) {
            Ok(result) => {
                let name = format!("trace-s{seed:04}-len{target_length:02}.json");
                let file = TraceFile::new(&toolset, &config, &result.trace);
                write_file(&traces_dir, &name, &file.to_json())?;
                outputs.push(format!("traces/{name}"));
                stats.push(serde_json::json!({
                    "seed": seed,
                    "target_length": target_length,
                    "stats": result.stats,
                }));
                produced += 1;
            }
            Err(FuzzError::Exhausted { stats: s }) => {
                exhausted.push(serde_json::json!({
                    "seed": seed,
                    "target_length": target_length,
                    "stats": s,
                }));
            }
            Err(other) => {
                return Err(CliError::BadInput {
                    path: args.oracles.display().to_string(),
                    msg: other.to_string(),
                })
            }
        }
    }
    let report = FuzzRunReport {
        scenario: toolset.scenario_name.clone(),
        produced,
        exhausted,
        stats,
    };
    write_file(
        &args.out,
        "fuzz_report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    outputs.push("fuzz_report.json".into());
    record_manifest(
        &args.out,
        "fuzz",
        &[(&args.schema, &schema_text), (&args.oracles, &oracle_text)],
        &outputs,
    )?;
    Ok(if produced == 0 { EXIT_EMPTY } else { EXIT_OK })
}

// ---- genbench ---------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GenbenchArgs {
    pub schema: PathBuf,
    pub oracles: PathBuf,
    pub traces: PathBuf,
    pub typologies: Vec<Typology>,
    pub client: ClientMode,
    pub cassette: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub out: PathBuf,
}

/// Trace files -> benchmark bundle (instructions, targets, oracles).
pub fn cmd_genbench(args: &GenbenchArgs) -> Result<i32, CliError> {
    if args.typologies.is_empty() {
        return Err(CliError::Usage(
            "genbench needs at least one --typology".into(),
        ));
    }
    let schema_text = read_file(&args.schema)?;
    let oracle_text = read_file(&args.oracles)?;
    let toolset = load_schema(&args.schema)?;
    let oracles = load_oracles(&args.oracles)?;
    let mut trace_files = Vec::new();
    for path in dir_files(&args.traces, "json")? {
        let text = read_file(&path)?;
        let file = TraceFile::from_json(&text).map_err(|e| CliError::BadInput {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        trace_files.push(file);
    }
    if trace_files.is_empty() {
        return Err(CliError::Usage(format!(
            "no trace files (*.json) under {}",
            args.traces.display()
        )));
    }
    let client = make_client(
        args.client,
        args.cassette.as_deref(),
        args.record.as_deref(),
    )?;
    let (bundle, report) = build_benchmark_from_traces(
        &toolset,
        &oracles,
        &trace_files,
        &args.typologies,
        client.as_deref(),
    )
    .map_err(|e| CliError::BadInput {
        path: args.traces.display().to_string(),
        msg: e.to_string(),
    })?;
    write_file(&args.out, "bundle.json", &bundle.to_json())?;
    write_file(
        &args.out,
        "genbench_report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let mut outputs = vec![
        "bundle.json".to_string(),
        "genbench_report.json".to_string(),
    ];
    // reference candidates: the compliant solution and the masked
    // (non-compliant) business trace for every case
    for case in &bundle.cases {
        let name = format!("{}.calls", case.id);
        write_file(
            &args.out.join("solutions"),
            &name,
            &crate::evaluator::render_call_script(&case.ground_truth),
        )?;
        write_file(
            &args.out.join("masked"),
            &name,
            &crate::evaluator::render_call_script(&case.business_trace),
        )?;
        outputs.push(format!("solutions/{name}"));
        outputs.push(format!("masked/{name}"));
    }
    record_manifest(
        &args.out,
        "genbench",
        &[(&args.schema, &schema_text), (&args.oracles, &oracle_text)],
        &outputs,
    )?;
    Ok(if bundle.cases.is_empty() {
        EXIT_EMPTY
    } else {
        EXIT_OK
    })
}

// ---- eval -------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub bundle: PathBuf,
    pub schema: PathBuf,
    pub candidates: PathBuf,
    pub source: String,
    pub out: PathBuf,
}

/// Grades one candidate script per case: `<case-id>.calls` files in the
/// candidate directory are matched to bundle cases by file stem.
pub fn cmd_eval(args: &EvalArgs) -> Result<i32, CliError> {
    let bundle_text = read_file(&args.bundle)?;
    let bundle = BenchmarkBundle::from_json(&bundle_text).map_err(|e| CliError::BadInput {
        path: args.bundle.display().to_string(),
        msg: e.to_string(),
    })?;
    let schema_text = read_file(&args.schema)?;
    let toolset = load_schema(&args.schema)?;
    let mut records = Vec::new();
    let mut unmatched = Vec::new();
    for path in dir_files(&args.candidates, "calls")? {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let Some(case) = bundle.cases.iter().find(|c| c.id == stem) else {
            unmatched.push(stem);
            continue;
        };
        let text = read_file(&path)?;
        let candidate = CandidateSolution::script(text, args.source.clone());
        let outcome = evaluate_candidate(case, &candidate, &toolset);
        records.push(EvalRecord {
            case_id: case.id.clone(),
            scenario: case.toolset_ref.clone(),
            typology: case.typology,
            source: args.source.clone(),
            outcome,
        });
    }
    let results = ResultsFile { records };
    let report = aggregate(&results.records);
    write_file(&args.out, "results.json", &results.to_json())?;
    write_file(
        &args.out,
        "report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let mut text = render_report_text(&report);
    if !unmatched.is_empty() {
        text.push_str(&format!(
            "\nunmatched candidate files (no case with that id): {}\n",
            unmatched.join(", ")
        ));
    }
    write_file(&args.out, "report.txt", &text)?;
    record_manifest(
        &args.out,
        "eval",
        &[(&args.bundle, &bundle_text), (&args.schema, &schema_text)],
        &[
            "results.json".into(),
            "report.json".into(),
            "report.txt".into(),
        ],
    )?;
    if results.records.is_empty() {
        return Ok(EXIT_HARNESS);
    }
    let any_failure = results
        .records
        .iter()
        .any(|r| r.outcome.outcome_class != OutcomeClass::Pass);
    Ok(if any_failure {
        EXIT_EVAL_FAILURES
    } else {
        EXIT_OK
    })
}

// ---- coverage ---------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CoverageArgs {
    pub schema: PathBuf,
    pub traces: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_coverage(args: &CoverageArgs) -> Result<i32, CliError> {
    let schema_text = read_file(&args.schema)?;
    let toolset = load_schema(&args.schema)?;
    let mut traces = Vec::new();
    for path in dir_files(&args.traces, "json")? {
        let text = read_file(&path)?;
        let file = TraceFile::from_json(&text).map_err(|e| CliError::BadInput {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        traces.push(file.trace());
    }
    let report = coverage_report(&traces, &toolset).map_err(|e| CliError::BadInput {
        path: args.traces.display().to_string(),
        msg: e.to_string(),
    })?;
    write_file(
        &args.out,
        "coverage.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let text = format!(
        "scenario: {}\ntraces: {}\nATC: {:.3} ({} of {} ordered pairs)\nS.C. Cov: {:.3} ({} of {} safety apis)\n",
        report.scenario,
        traces.len(),
        report.atc,
        report.pair_count,
        report.api_count * report.api_count,
        report.sc_cov,
        report.covered_safety_apis.len(),
        report.safety_subset_size,
    );
    write_file(&args.out, "coverage.txt", &text)?;
    record_manifest(
        &args.out,
        "coverage",
        &[(&args.schema, &schema_text)],
        &["coverage.json".into(), "coverage.txt".into()],
    )?;
    Ok(EXIT_OK)
}

// ---- report -----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub results: PathBuf,
    pub out: PathBuf,
}

/// Re-renders aggregates from a results file.
pub fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    let text = read_file(&args.results)?;
    let results = ResultsFile::from_json(&text).map_err(|e| CliError::BadInput {
        path: args.results.display().to_string(),
        msg: e.to_string(),
    })?;
    let report = aggregate(&results.records);
    write_file(
        &args.out,
        "report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_file(&args.out, "report.txt", &render_report_text(&report))?;
    record_manifest(
        &args.out,
        "report",
        &[(&args.results, &text)],
        &["report.json".into(), "report.txt".into()],
    )?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_mode_parses() {
        assert_eq!("replay".parse::<ClientMode>().unwrap(), ClientMode::Replay);
        assert!("other".parse::<ClientMode>().is_err());
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a(b""), "cbf29ce484222325");
        assert_eq!(fnv1a(b"a"), fnv1a(b"a"));
        assert_ne!(fnv1a(b"a"), fnv1a(b"b"));
    }

    #[test]
    fn replay_mode_requires_cassette() {
        match make_client(ClientMode::Replay, None, None) {
            Err(CliError::Usage(_)) => {}
            Err(other) => panic!("unexpected error: {other}"),
            Ok(_) => panic!("expected a usage error"),
        }
    }

    #[test]
    fn off_mode_yields_no_client() {
        assert!(make_client(ClientMode::Off, None, None).unwrap().is_none());
    }
}
