//! Pure state-transition semantics: precondition checks, effect application,
//! and whole-trace replay. Replaying never mutates inputs, so executing the
//! same trace twice yields identical results.

use super::{
    ApiSpec, Args, CmpOp, EffectValue, Operand, PredExpr, SchemaError, Toolset, Trace, Value,
    WorldState,
};

/// Why a step could not execute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecFailure {
    UnknownApi { name: String },
    BadArgs { detail: String },
    PreconditionFalse,
}

impl std::fmt::Display for ExecFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExecFailure::UnknownApi { name } => write!(f, "unknown api `{name}`"),
            ExecFailure::BadArgs { detail } => write!(f, "bad arguments: {detail}"),
            ExecFailure::PreconditionFalse => write!(f, "precondition false"),
        }
    }
}

/// Outcome of replaying a trace. Failures are data, not errors: graders
/// consume them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutionResult {
    Success {
        final_state: WorldState,
        /// `states[0]` is the initial state; `states[i+1]` follows action `i`.
        states: Vec<WorldState>,
    },
    Failure {
        /// Index of the action that failed.
        step: usize,
        reason: ExecFailure,
        /// States reached before the failure (initial state first).
        states: Vec<WorldState>,
    },
}

impl ExecutionResult {
    pub fn is_success(&self) -> bool {
        matches!(self, ExecutionResult::Success { .. })
    }

    /// Number of actions that executed.
    pub fn executed_len(&self) -> usize {
        match self {
            ExecutionResult::Success { states, .. } => states.len() - 1,
            ExecutionResult::Failure { step, .. } => *step,
        }
    }

    pub fn last_state(&self) -> &WorldState {
        match self {
            ExecutionResult::Success { states, .. } | ExecutionResult::Failure { states, .. } => {
                states
                    .last()
                    .expect("state sequence includes the initial state")
            }
        }
    }
}

fn validate_args(api: &ApiSpec, args: &Args) -> Result<(), SchemaError> {
    for p in &api.params {
        match args.get(&p.name) {
            None => {
                return Err(SchemaError::DomainViolation {
                    name: p.name.clone(),
                    detail: format!("missing argument for api `{}`", api.name),
                })
            }
            Some(v) if !p.domain.contains(v) => {
                return Err(SchemaError::DomainViolation {
                    name: p.name.clone(),
                    detail: format!("value {v} not in declared domain"),
                })
            }
            Some(_) => {}
        }
    }
    for k in args.keys() {
        if api.param(k).is_none() {
            return Err(SchemaError::DomainViolation {
                name: k.clone(),
                detail: format!("api `{}` declares no such parameter", api.name),
            });
        }
    }
    Ok(())
}

fn operand_value(op: &Operand, state: &WorldState, args: &Args) -> Result<Value, SchemaError> {
    match op {
        Operand::Literal { value } => Ok(value.clone()),
        Operand::StateVar { name } => {
            state
                .get(name)
                .cloned()
                .ok_or_else(|| SchemaError::UnknownReference {
                    kind: "state variable",
                    name: name.clone(),
                    context: " at evaluation time".into(),
                })
        }
        Operand::Param { name } => {
            args.get(name)
                .cloned()
                .ok_or_else(|| SchemaError::UnknownReference {
                    kind: "parameter",
                    name: name.clone(),
                    context: " at evaluation time".into(),
                })
        }
    }
}

fn eval_pred(expr: &PredExpr, state: &WorldState, args: &Args) -> Result<bool, SchemaError> {
    match expr {
        PredExpr::Const { value } => Ok(*value),
        PredExpr::Not { inner } => Ok(!eval_pred(inner, state, args)?),
        PredExpr::And { lhs, rhs } => {
            Ok(eval_pred(lhs, state, args)? && eval_pred(rhs, state, args)?)
        }
        PredExpr::Or { lhs, rhs } => {
            Ok(eval_pred(lhs, state, args)? || eval_pred(rhs, state, args)?)
        }
        PredExpr::Cmp { lhs, op, rhs } => {
            let l = operand_value(lhs, state, args)?;
            let r = operand_value(rhs, state, args)?;
            match op {
                CmpOp::Eq => Ok(l == r),
                CmpOp::Ne => Ok(l != r),
                CmpOp::Lt | CmpOp::Le => match (&l, &r) {
                    (Value::Int(a), Value::Int(b)) => {
                        Ok(if *op == CmpOp::Lt { a < b } else { a <= b })
                    }
                    _ => Err(SchemaError::Invalid(format!(
                        "ordered comparison on non-integer values {l} and {r}"
                    ))),
                },
            }
        }
    }
}

/// True iff `api`'s precondition holds in `state` under `args`.
///
/// Arguments are validated against declared domains first; an out-of-domain
/// or missing argument is an error, not `false`.
pub fn check_precondition(
    api: &ApiSpec,
    args: &Args,
    state: &WorldState,
) -> Result<bool, SchemaError> {
    validate_args(api, args)?;
    eval_pred(&api.precondition, state, args)
}

/// Applies `api`'s effects to a copy of `state`, in declaration order.
/// Later assignments to the same variable win. The input is untouched.
pub fn apply_effects(
    api: &ApiSpec,
    args: &Args,
    state: &WorldState,
) -> Result<WorldState, SchemaError> {
    validate_args(api, args)?;
    let mut next = state.clone();
    for eff in &api.effects {
        let v = match &eff.value {
            EffectValue::Literal { value } => value.clone(),
            EffectValue::Param { name } => {
                args.get(name)
                    .cloned()
                    .ok_or_else(|| SchemaError::UnknownReference {
                        kind: "parameter",
                        name: name.clone(),
                        context: " at effect application".into(),
                    })?
            }
        };
        next.set(&eff.var, v);
    }
    Ok(next)
}

/// Replays `trace` from `initial`, step by step. Any invalid step stops the
/// replay and is reported in the result; nothing is thrown past this
/// boundary.
pub fn execute_trace(toolset: &Toolset, initial: &WorldState, trace: &Trace) -> ExecutionResult {
    let mut states = vec![initial.clone()];
    for (idx, action) in trace.actions.iter().enumerate() {
        let fail = |reason: ExecFailure, states: Vec<WorldState>| ExecutionResult::Failure {
            step: idx,
            reason,
            states,
        };
        let Some(api) = toolset.api(&action.api) else {
            return fail(
                ExecFailure::UnknownApi {
                    name: action.api.clone(),
                },
                states,
            );
        };
        let current = states.last().expect("non-empty state sequence").clone();
        match check_precondition(api, &action.args, &current) {
            Ok(true) => {}
            Ok(false) => return fail(ExecFailure::PreconditionFalse, states),
            Err(e) => {
                return fail(
                    ExecFailure::BadArgs {
                        detail: e.to_string(),
                    },
                    states,
                )
            }
        }
        match apply_effects(api, &action.args, &current) {
            Ok(next) => states.push(next),
            Err(e) => {
                return fail(
                    ExecFailure::BadArgs {
                        detail: e.to_string(),
                    },
                    states,
                )
            }
        }
    }
    ExecutionResult::Success {
        final_state: states.last().expect("non-empty").clone(),
        states,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_toolset;
    use std::collections::BTreeMap;

    fn toolset() -> Toolset {
        load_toolset(
            r#"
scenario exec_test
state verified : bool = false
state amount   : int[0..9] = 0
state mode     : enum { idle, busy } = "idle"

api verify safety {
  pre !verified
  effect verified = true
}
api transfer {
  param amt : int[1..5]
  pre verified
  effect amount = amt
}
api noop { }
api double_write {
  pre true
  effect mode = "busy"
  effect mode = "idle"
}
"#,
        )
        .unwrap()
    }

    fn args(pairs: &[(&str, Value)]) -> Args {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn vacuous_precondition_is_true() {
        let ts = toolset();
        let ok = check_precondition(
            ts.api("noop").unwrap(),
            &BTreeMap::new(),
            &ts.initial_state(),
        )
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn state_gated_precondition_false_then_true() {
        let ts = toolset();
        let s0 = ts.initial_state();
        let transfer = ts.api("transfer").unwrap();
        let a = args(&[("amt", Value::Int(3))]);
        assert!(!check_precondition(transfer, &a, &s0).unwrap());
        let s1 = apply_effects(ts.api("verify").unwrap(), &BTreeMap::new(), &s0).unwrap();
        assert!(check_precondition(transfer, &a, &s1).unwrap());
    }

    #[test]
    fn out_of_domain_argument_is_an_error() {
        let ts = toolset();
        let transfer = ts.api("transfer").unwrap();
        let a = args(&[("amt", Value::Int(7))]);
        let err = check_precondition(transfer, &a, &ts.initial_state()).unwrap_err();
        assert!(matches!(err, SchemaError::DomainViolation { .. }));
    }

    #[test]
    fn apply_effects_does_not_mutate_input() {
        let ts = toolset();
        let s0 = ts.initial_state();
        let s1 = apply_effects(ts.api("verify").unwrap(), &BTreeMap::new(), &s0).unwrap();
        assert_eq!(s0.get("verified"), Some(&Value::Bool(false)));
        assert_eq!(s1.get("verified"), Some(&Value::Bool(true)));
    }

    #[test]
    fn empty_effects_yield_identical_state() {
        let ts = toolset();
        let s0 = ts.initial_state();
        let s1 = apply_effects(ts.api("noop").unwrap(), &BTreeMap::new(), &s0).unwrap();
        assert_eq!(s0, s1);
    }

    #[test]
    fn last_assignment_wins() {
        let ts = toolset();
        let s1 = apply_effects(
            ts.api("double_write").unwrap(),
            &BTreeMap::new(),
            &ts.initial_state(),
        )
        .unwrap();
        assert_eq!(s1.get("mode"), Some(&Value::Str("idle".into())));
    }

    #[test]
    fn empty_trace_is_identity() {
        let ts = toolset();
        let r = execute_trace(&ts, &ts.initial_state(), &Trace::default());
        match r {
            ExecutionResult::Success {
                final_state,
                states,
            } => {
                assert_eq!(final_state, ts.initial_state());
                assert_eq!(states.len(), 1);
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn unknown_api_fails_at_its_step() {
        let ts = toolset();
        let trace = Trace::from_calls(vec![
            ("noop".into(), BTreeMap::new()),
            ("nonsense".into(), BTreeMap::new()),
        ]);
        let r = execute_trace(&ts, &ts.initial_state(), &trace);
        match r {
            ExecutionResult::Failure { step, reason, .. } => {
                assert_eq!(step, 1);
                assert_eq!(
                    reason,
                    ExecFailure::UnknownApi {
                        name: "nonsense".into()
                    }
                );
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn execution_is_compositional() {
        let ts = toolset();
        let full = Trace::from_calls(vec![
            ("verify".into(), BTreeMap::new()),
            ("transfer".into(), args(&[("amt", Value::Int(2))])),
            ("noop".into(), BTreeMap::new()),
        ]);
        let r_full = execute_trace(&ts, &ts.initial_state(), &full);
        assert!(r_full.is_success());

        let head = Trace::from_calls(vec![("verify".into(), BTreeMap::new())]);
        let r_head = execute_trace(&ts, &ts.initial_state(), &head);
        let tail = Trace::from_calls(vec![
            ("transfer".into(), args(&[("amt", Value::Int(2))])),
            ("noop".into(), BTreeMap::new()),
        ]);
        let r_tail = execute_trace(&ts, r_head.last_state(), &tail);
        assert!(r_tail.is_success());
        assert_eq!(r_full.last_state(), r_tail.last_state());
    }

    #[test]
    fn effect_locality_leaves_other_vars_alone() {
        let ts = toolset();
        let s0 = ts.initial_state();
        let s1 = apply_effects(ts.api("verify").unwrap(), &BTreeMap::new(), &s0).unwrap();
        assert_eq!(s0.get("amount"), s1.get("amount"));
        assert_eq!(s0.get("mode"), s1.get("mode"));
    }
}
