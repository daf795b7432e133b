//! Ground-truth trace synthesis: seeded bottom-up depth-first search with
//! dual-constraint pruning and backtracking.
//!
//! At each step the search enumerates every fully-bound call that is
//! executable in the current state (the schema check), shuffles the
//! candidates from the seeded stream, and extends the trace with the first
//! one the incremental LTL monitor does not reject (the safety check). A
//! candidate that drives any oracle to a permanent violation is pruned on
//! the spot; pending liveness obligations are allowed mid-trace and only
//! fail a branch at the target depth. Dead ends backtrack.
//!
//! The result is a deterministic function of `(toolset, oracles, config)`:
//! same inputs, bit-identical trace.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{monitor_finalize, monitor_init, monitor_step, MonitorState, SafetyOracle};
use crate::schema::{
    apply_effects, check_precondition, Args, Invocation, Toolset, Trace, WorldState,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub target_length: usize,
    pub seed: u64,
    pub max_backtracks: usize,
    pub max_candidates_per_step: usize,
    /// Require at least one non-safety-critical action in the trace.
    pub require_business_action: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            target_length: 8,
            seed: 0,
            max_backtracks: 10_000,
            max_candidates_per_step: 64,
            require_business_action: true,
        }
    }
}

impl FuzzConfig {
    fn validate(&self) -> Result<(), FuzzError> {
        if self.target_length == 0 {
            return Err(FuzzError::InvalidConfig(
                "target_length must be >= 1".into(),
            ));
        }
        if self.max_backtracks == 0 || self.max_candidates_per_step == 0 {
            return Err(FuzzError::InvalidConfig(
                "max_backtracks and max_candidates_per_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzStats {
    /// Candidate extensions attempted (monitor steps).
    pub nodes_explored: u64,
    /// Nodes that exhausted their candidate list.
    pub backtracks: u64,
    /// Bindings rejected because the precondition failed.
    pub prunes_schema: u64,
    /// Candidates rejected because an oracle became permanently violated.
    pub prunes_safety: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzResult {
    pub trace: Trace,
    pub final_state: WorldState,
    /// `state_sequence[0]` is the initial state.
    pub state_sequence: Vec<WorldState>,
    pub stats: FuzzStats,
}

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("search exhausted after {} backtracks ({} nodes)", stats.backtracks, stats.nodes_explored)]
    Exhausted { stats: FuzzStats },
    #[error("invalid fuzz config: {0}")]
    InvalidConfig(String),
    #[error("oracle `{oracle_id}` fails the signature check; unknown atoms: {unknown:?}")]
    SignatureRejected {
        oracle_id: String,
        unknown: Vec<String>,
    },
}

/// Enumerates `(api, full argument binding)` pairs executable in `state`,
/// shuffled from the seeded stream and truncated at `max`. Bindings are
/// drawn from the finite parameter domains in declaration order before the
/// shuffle, so the same seed always yields the same candidate order.
pub fn enumerate_candidates<'a>(
    toolset: &'a Toolset,
    state: &WorldState,
    rng: &mut ChaCha8Rng,
    max: usize,
) -> Vec<(&'a crate::schema::ApiSpec, Args)> {
    enumerate_with_prune_count(toolset, state, rng, max).0
}

fn enumerate_with_prune_count<'a>(
    toolset: &'a Toolset,
    state: &WorldState,
    rng: &mut ChaCha8Rng,
    max: usize,
) -> (Vec<(&'a crate::schema::ApiSpec, Args)>, u64) {
    let mut executable = Vec::new();
    let mut pruned = 0u64;
    for api in &toolset.apis {
        for args in bindings(api) {
            if matches!(check_precondition(api, &args, state), Ok(true)) {
                executable.push((api, args));
            } else {
                pruned += 1;
            }
        }
    }
    executable.shuffle(rng);
    executable.truncate(max);
    (executable, pruned)
}

/// All full argument bindings of an API, in domain declaration order.
fn bindings(api: &crate::schema::ApiSpec) -> Vec<Args> {
    let mut out = vec![Args::new()];
    for p in &api.params {
        let mut next = Vec::with_capacity(out.len() * p.domain.len() as usize);
        for partial in &out {
            for v in p.domain.values() {
                let mut b = partial.clone();
                b.insert(p.name.clone(), v);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

struct Search<'a> {
    toolset: &'a Toolset,
    config: &'a FuzzConfig,
    rng: ChaCha8Rng,
    stats: FuzzStats,
    out_of_budget: bool,
}

enum Explore {
    Found,
    DeadEnd,
}

impl<'a> Search<'a> {
    fn explore(
        &mut self,
        state: &WorldState,
        monitor: &MonitorState,
        depth: usize,
        has_business: bool,
        trace: &mut Vec<Invocation>,
        states: &mut Vec<WorldState>,
    ) -> Explore {
        if depth == self.config.target_length {
            // Pending obligations or a missing business action fail here;
            // the caller backtracks into alternative branches.
            let business_ok = !self.config.require_business_action || has_business;
            return if monitor_finalize(monitor) && business_ok {
                Explore::Found
            } else {
                Explore::DeadEnd
            };
        }
        let (candidates, pruned) = enumerate_with_prune_count(
            self.toolset,
            state,
            &mut self.rng,
            self.config.max_candidates_per_step,
        );
        self.stats.prunes_schema += pruned;
        for (api, args) in candidates {
            if self.out_of_budget {
                return Explore::DeadEnd;
            }
            self.stats.nodes_explored += 1;
            let inv = Invocation {
                step: depth,
                api: api.name.clone(),
                args,
            };
            let next_monitor = monitor_step(monitor, &inv);
            if next_monitor.any_violated() {
                self.stats.prunes_safety += 1;
                continue;
            }
            let next_state = match apply_effects(api, &inv.args, state) {
                Ok(s) => s,
                // executable candidates have validated arguments
                Err(_) => continue,
            };
            trace.push(inv);
            states.push(next_state.clone());
            match self.explore(
                &next_state,
                &next_monitor,
                depth + 1,
                has_business || !api.safety_critical,
                trace,
                states,
            ) {
                Explore::Found => return Explore::Found,
                Explore::DeadEnd => {
                    trace.pop();
                    states.pop();
                }
            }
        }
        self.stats.backtracks += 1;
        if self.stats.backtracks > self.config.max_backtracks as u64 {
            self.out_of_budget = true;
        }
        Explore::DeadEnd
    }
}

/// Synthesizes a trace of exactly `config.target_length` actions such that
/// every prefix is executable and no prefix permanently violates any
/// oracle, and the full trace satisfies them all.
///
/// Oracles must pass the signature check against `toolset` first. The
/// search fails with [`FuzzError::Exhausted`] when the backtrack budget is
/// spent or the space is fully pruned.
pub fn synthesize_trace(
    toolset: &Toolset,
    oracles: &[SafetyOracle],
    config: &FuzzConfig,
) -> Result<FuzzResult, FuzzError> {
    config.validate()?;
    for o in oracles {
        if let crate::ltl::ValidationResult::Reject { unknown_atoms } =
            crate::ltl::validate_signature(o, toolset)
        {
            return Err(FuzzError::SignatureRejected {
                oracle_id: o.id.clone(),
                unknown: unknown_atoms,
            });
        }
    }
    let initial = toolset.initial_state();
    let monitor = monitor_init(oracles);
    let mut search = Search {
        toolset,
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        stats: FuzzStats::default(),
        out_of_budget: false,
    };
    let mut actions = Vec::with_capacity(config.target_length);
    let mut states = vec![initial.clone()];
    match search.explore(&initial, &monitor, 0, false, &mut actions, &mut states) {
        Explore::Found => {
            let final_state = states.last().expect("non-empty").clone();
            Ok(FuzzResult {
                trace: Trace { actions },
                final_state,
                state_sequence: states,
                stats: search.stats,
            })
        }
        Explore::DeadEnd => Err(FuzzError::Exhausted {
            stats: search.stats,
        }),
    }
}

/// On-disk trace record: the actions plus enough context to replay and
/// re-verify the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    pub toolset: String,
    pub seed: u64,
    pub config: FuzzConfig,
    pub actions: Vec<Invocation>,
}

impl TraceFile {
    pub fn new(toolset: &Toolset, config: &FuzzConfig, trace: &Trace) -> Self {
        TraceFile {
            toolset: toolset.scenario_name.clone(),
            seed: config.seed,
            config: config.clone(),
            actions: trace.actions.clone(),
        }
    }

    pub fn trace(&self) -> Trace {
        Trace {
            actions: self.actions.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        use serde::de::Error as _;
        let file: TraceFile = serde_json::from_str(text)?;
        if !file.trace().steps_contiguous() {
            return Err(serde_json::Error::custom(
                "trace step indices are not contiguous from 0",
            ));
        }
        Ok(file)
    }
}
