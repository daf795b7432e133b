//! `complygen`: schema + policy in, compliance test cases and gradings out.
//!
//! One subcommand per pipeline stage. A JSON config file given with
//! `--config` overrides the flags of the invoked subcommand; environment
//! variables are used only for remote-client credentials.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use complygen_core::cli::{
    cmd_coverage, cmd_eval, cmd_extract, cmd_fuzz, cmd_genbench, cmd_report, ClientMode,
    CoverageArgs, EvalArgs, ExtractArgs, FuzzArgs, GenbenchArgs, ReportArgs, EXIT_HARNESS,
};
use complygen_core::testgen::Typology;

#[derive(Parser)]
#[command(
    name = "complygen",
    version,
    about = "Synthesizes and grades tool-call compliance test cases"
)]
struct Cli {
    /// JSON file whose entries override the invoked subcommand's flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Turn a policy document into grounded safety oracles
    Extract {
        /// Policy text file
        #[arg(long)]
        policy: PathBuf,
        /// Schema document
        #[arg(long)]
        schema: PathBuf,
        /// Completion client: off | replay | live
        #[arg(long, default_value = "replay")]
        client: ClientMode,
        /// Cassette file (required for --client replay)
        #[arg(long)]
        cassette: Option<PathBuf>,
        /// Record live interactions into this cassette file
        #[arg(long)]
        record: Option<PathBuf>,
        /// Override the bundled extraction prompt template
        #[arg(long)]
        prompt: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize compliant ground-truth traces
    Fuzz {
        #[arg(long)]
        schema: PathBuf,
        /// Oracle file (one JSON record per line)
        #[arg(long)]
        oracles: PathBuf,
        /// Trace lengths, cycled across seeds
        #[arg(long, value_delimiter = ',', default_value = "6,8,10")]
        lengths: Vec<usize>,
        /// Number of seeds (seed_start..seed_start+seeds)
        #[arg(long, default_value_t = 40)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed_start: u64,
        #[arg(long, default_value_t = 10_000)]
        max_backtracks: usize,
        #[arg(long, default_value_t = 64)]
        max_candidates: usize,
        /// Require at least one non-safety action per trace
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        require_business: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a benchmark bundle from fuzzed traces
    Genbench {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        oracles: PathBuf,
        /// Directory of trace files from `fuzz`
        #[arg(long)]
        traces: PathBuf,
        /// Instruction typologies to emit per trace
        #[arg(long, value_delimiter = ',', default_value = "goal,workflow")]
        typologies: Vec<Typology>,
        /// Optional instruction-refinement client: off | replay | live
        #[arg(long, default_value = "off")]
        client: ClientMode,
        #[arg(long)]
        cassette: Option<PathBuf>,
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grade candidate call scripts against a bundle
    Eval {
        /// Benchmark bundle (bundle.json)
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Directory of `<case-id>.calls` files
        #[arg(long)]
        candidates: PathBuf,
        /// Label for the candidate source (model name, "file", ...)
        #[arg(long, default_value = "file")]
        source: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute trace-set coverage metrics
    Coverage {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render aggregates from a results file
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

// ---- config-file overrides ----------------------------------------------

fn load_config(path: &PathBuf) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}

fn ov_path(v: &serde_json::Value, key: &str, field: &mut PathBuf) {
    if let Some(s) = v.get(key).and_then(|x| x.as_str()) {
        *field = PathBuf::from(s);
    }
}

fn ov_opt_path(v: &serde_json::Value, key: &str, field: &mut Option<PathBuf>) {
    if let Some(s) = v.get(key).and_then(|x| x.as_str()) {
        *field = Some(PathBuf::from(s));
    }
}

fn ov_string(v: &serde_json::Value, key: &str, field: &mut String) {
    if let Some(s) = v.get(key).and_then(|x| x.as_str()) {
        *field = s.to_string();
    }
}

fn ov_u64(v: &serde_json::Value, key: &str, field: &mut u64) {
    if let Some(n) = v.get(key).and_then(|x| x.as_u64()) {
        *field = n;
    }
}

fn ov_usize(v: &serde_json::Value, key: &str, field: &mut usize) {
    if let Some(n) = v.get(key).and_then(|x| x.as_u64()) {
        *field = n as usize;
    }
}

fn ov_bool(v: &serde_json::Value, key: &str, field: &mut bool) {
    if let Some(b) = v.get(key).and_then(|x| x.as_bool()) {
        *field = b;
    }
}

fn ov_lengths(v: &serde_json::Value, key: &str, field: &mut Vec<usize>) {
    if let Some(arr) = v.get(key).and_then(|x| x.as_array()) {
        let parsed: Vec<usize> = arr
            .iter()
            .filter_map(|x| x.as_u64().map(|n| n as usize))
            .collect();
        if !parsed.is_empty() {
            *field = parsed;
        }
    }
}

fn ov_client(v: &serde_json::Value, key: &str, field: &mut ClientMode) {
    if let Some(s) = v.get(key).and_then(|x| x.as_str()) {
        if let Ok(mode) = s.parse() {
            *field = mode;
        }
    }
}

fn ov_typologies(v: &serde_json::Value, key: &str, field: &mut Vec<Typology>) {
    if let Some(arr) = v.get(key).and_then(|x| x.as_array()) {
        let parsed: Vec<Typology> = arr
            .iter()
            .filter_map(|x| x.as_str().and_then(|s| s.parse().ok()))
            .collect();
        if !parsed.is_empty() {
            *field = parsed;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(v) => Some(v),
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_HARNESS as u8);
            }
        },
        None => None,
    };
    let null = serde_json::Value::Null;
    let cfg = config.as_ref().unwrap_or(&null);

    let result = match cli.cmd {
        Cmd::Extract {
            mut policy,
            mut schema,
            mut client,
            mut cassette,
            mut record,
            mut prompt,
            mut out,
        } => {
            ov_path(cfg, "policy", &mut policy);
            ov_path(cfg, "schema", &mut schema);
            ov_client(cfg, "client", &mut client);
            ov_opt_path(cfg, "cassette", &mut cassette);
            ov_opt_path(cfg, "record", &mut record);
            ov_opt_path(cfg, "prompt", &mut prompt);
            ov_path(cfg, "out", &mut out);
            cmd_extract(&ExtractArgs {
                policy,
                schema,
                client,
                cassette,
                record,
                prompt,
                out,
            })
        }
        Cmd::Fuzz {
            mut schema,
            mut oracles,
            mut lengths,
            mut seeds,
            mut seed_start,
            mut max_backtracks,
            mut max_candidates,
            mut require_business,
            mut out,
        } => {
            ov_path(cfg, "schema", &mut schema);
            ov_path(cfg, "oracles", &mut oracles);
            ov_lengths(cfg, "lengths", &mut lengths);
            ov_u64(cfg, "seeds", &mut seeds);
            ov_u64(cfg, "seed_start", &mut seed_start);
            ov_usize(cfg, "max_backtracks", &mut max_backtracks);
            ov_usize(cfg, "max_candidates", &mut max_candidates);
            ov_bool(cfg, "require_business", &mut require_business);
            ov_path(cfg, "out", &mut out);
            cmd_fuzz(&FuzzArgs {
                schema,
                oracles,
                lengths,
                seeds,
                seed_start,
                max_backtracks,
                max_candidates,
                require_business,
                out,
            })
        }
        Cmd::Genbench {
            mut schema,
            mut oracles,
            mut traces,
            mut typologies,
            mut client,
            mut cassette,
            mut record,
            mut out,
        } => {
            ov_path(cfg, "schema", &mut schema);
            ov_path(cfg, "oracles", &mut oracles);
            ov_path(cfg, "traces", &mut traces);
            ov_typologies(cfg, "typologies", &mut typologies);
            ov_client(cfg, "client", &mut client);
            ov_opt_path(cfg, "cassette", &mut cassette);
            ov_opt_path(cfg, "record", &mut record);
            ov_path(cfg, "out", &mut out);
            cmd_genbench(&GenbenchArgs {
                schema,
                oracles,
                traces,
                typologies,
                client,
                cassette,
                record,
                out,
            })
        }
        Cmd::Eval {
            mut bundle,
            mut schema,
            mut candidates,
            mut source,
            mut out,
        } => {
            ov_path(cfg, "bundle", &mut bundle);
            ov_path(cfg, "schema", &mut schema);
            ov_path(cfg, "candidates", &mut candidates);
            ov_string(cfg, "source", &mut source);
            ov_path(cfg, "out", &mut out);
            cmd_eval(&EvalArgs {
                bundle,
                schema,
                candidates,
                source,
                out,
            })
        }
        Cmd::Coverage {
            mut schema,
            mut traces,
            mut out,
        } => {
            ov_path(cfg, "schema", &mut schema);
            ov_path(cfg, "traces", &mut traces);
            ov_path(cfg, "out", &mut out);
            cmd_coverage(&CoverageArgs {
                schema,
                traces,
                out,
            })
        }
        Cmd::Report {
            mut results,
            mut out,
        } => {
            ov_path(cfg, "results", &mut results);
            ov_path(cfg, "out", &mut out);
            cmd_report(&ReportArgs { results, out })
        }
    };

    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_HARNESS as u8)
        }
    }
}
