//! Trace-set diversity metrics: adjacent transition coverage and
//! safety-critical API coverage.
//!
//! Both metrics aggregate over the whole trace set. The transition
//! denominator is |A|^2 with A the APIs declared in the schema (not the
//! APIs seen in traces), so numbers are comparable across generators on
//! the same scenario.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Toolset, Trace};

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("trace references unknown api `{0}`")]
    UnknownApi(String),
    #[error("toolset declares no safety-critical apis; the metric is undefined")]
    EmptySafetySubset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub atc: f64,
    pub pair_count: usize,
    pub api_count: usize,
    pub pairs: Vec<(String, String)>,
    pub sc_cov: f64,
    pub covered_safety_apis: Vec<String>,
    pub safety_subset_size: usize,
}

fn check_known(traces: &[Trace], toolset: &Toolset) -> Result<(), CoverageError> {
    for t in traces {
        for a in &t.actions {
            if toolset.api(&a.api).is_none() {
                return Err(CoverageError::UnknownApi(a.api.clone()));
            }
        }
    }
    Ok(())
}

/// Adjacent transition coverage: the union of ordered adjacent pairs
/// `(a_i, a_{i+1})` across all traces, over |A|^2. Traces shorter than two
/// actions contribute no pairs; self-pairs `(a, a)` count.
pub fn atc(
    traces: &[Trace],
    toolset: &Toolset,
) -> Result<(f64, BTreeSet<(String, String)>), CoverageError> {
    check_known(traces, toolset)?;
    let mut pairs = BTreeSet::new();
    for t in traces {
        for w in t.actions.windows(2) {
            pairs.insert((w[0].api.clone(), w[1].api.clone()));
        }
    }
    let n = toolset.apis.len();
    let ratio = pairs.len() as f64 / ((n * n) as f64);
    Ok((ratio, pairs))
}

/// Fraction of the declared safety-critical subset that appears in at
/// least one trace.
pub fn safety_coverage(
    traces: &[Trace],
    toolset: &Toolset,
) -> Result<(f64, BTreeSet<String>), CoverageError> {
    check_known(traces, toolset)?;
    let subset: BTreeSet<String> = toolset.safety_apis().map(|a| a.name.clone()).collect();
    if subset.is_empty() {
        return Err(CoverageError::EmptySafetySubset);
    }
    let seen: BTreeSet<String> = traces
        .iter()
        .flat_map(|t| t.actions.iter().map(|a| a.api.clone()))
        .filter(|a| subset.contains(a))
        .collect();
    let ratio = seen.len() as f64 / subset.len() as f64;
    Ok((ratio, seen))
}

/// Computes both metrics into one per-scenario record.
pub fn coverage_report(
    traces: &[Trace],
    toolset: &Toolset,
) -> Result<CoverageReport, CoverageError> {
    let (atc_ratio, pairs) = atc(traces, toolset)?;
    let (sc, covered) = safety_coverage(traces, toolset)?;
    Ok(CoverageReport {
        scenario: toolset.scenario_name.clone(),
        atc: atc_ratio,
        pair_count: pairs.len(),
        api_count: toolset.apis.len(),
        pairs: pairs.into_iter().collect(),
        sc_cov: sc,
        covered_safety_apis: covered.into_iter().collect(),
        safety_subset_size: toolset.safety_apis().count(),
    })
}
