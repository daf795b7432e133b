//! Tool/API schema model and the deterministic sandbox executor.
//!
//! A [`Toolset`] declares a finite world state (booleans, bounded integers,
//! string enums) and a set of APIs with parameters, a precondition over the
//! state, and effects that assign state variables. Traces of invocations are
//! replayed by [`execute_trace`], which never panics on bad input: failures
//! (unknown API, bad arguments, false precondition) are encoded in the
//! result so graders can consume them.

mod exec;
mod parser;

pub use exec::{apply_effects, check_precondition, execute_trace, ExecFailure, ExecutionResult};
pub use parser::{load_toolset, render_toolset};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest allowed span of an integer domain. Keeps candidate enumeration in
/// the fuzzer finite at a sane size.
pub const MAX_INT_SPAN: i64 = 4096;

/// Largest allowed number of argument bindings for a single API.
pub const MAX_BINDINGS_PER_API: u64 = 65_536;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("reference error: unknown {kind} `{name}`{context}")]
    UnknownReference {
        kind: &'static str,
        name: String,
        context: String,
    },
    #[error("invalid schema: {0}")]
    Invalid(String),
    #[error("argument `{name}` is outside its declared domain: {detail}")]
    DomainViolation { name: String, detail: String },
}

/// Value of a state variable or argument. Enum members are carried as strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "enum",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Str(v) => s.serialize_str(v),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Bool(b) => Ok(Value::Bool(b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| D::Error::custom("expected an integer value")),
            serde_json::Value::String(s) => Ok(Value::Str(s)),
            other => Err(D::Error::custom(format!(
                "expected bool, integer, or string, got {other}"
            ))),
        }
    }
}

/// Finite domain of a state variable or parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Bool,
    Int { lo: i64, hi: i64 },
    Enum { members: Vec<String> },
}

impl Domain {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Int { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Enum { members }, Value::Str(s)) => members.iter().any(|m| m == s),
            _ => false,
        }
    }

    /// Every value of `other` is a value of `self`.
    pub fn accepts_all_of(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::Bool, Domain::Bool) => true,
            (Domain::Int { lo, hi }, Domain::Int { lo: olo, hi: ohi }) => lo <= olo && ohi <= hi,
            (Domain::Enum { members }, Domain::Enum { members: om }) => {
                om.iter().all(|m| members.contains(m))
            }
            _ => false,
        }
    }

    /// Enumerates the whole domain in declaration order.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Domain::Enum { members } => members.iter().cloned().map(Value::Str).collect(),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            Domain::Bool => 2,
            Domain::Int { lo, hi } => (hi - lo + 1) as u64,
            Domain::Enum { members } => members.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Declaration of one state variable with its initial value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVar {
    pub name: String,
    pub domain: Domain,
    pub init: Value,
}

/// The environment state: one value per declared variable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldState {
    vars: BTreeMap<String, Value>,
}

impl WorldState {
    pub fn new(vars: BTreeMap<String, Value>) -> Self {
        WorldState { vars }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    pub fn set(&mut self, name: &str, value: Value) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.vars.iter()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Projection onto a set of variable names. Names absent from the state
    /// are silently dropped; callers compare like with like.
    pub fn restrict(&self, names: &BTreeSet<String>) -> WorldState {
        WorldState {
            vars: self
                .vars
                .iter()
                .filter(|(k, _)| names.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// One side of a comparison in a precondition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operand {
    StateVar { name: String },
    Param { name: String },
    Literal { value: Value },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        }
    }
}

/// Boolean precondition over state variables and call arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredExpr {
    Const {
        value: bool,
    },
    Cmp {
        lhs: Operand,
        op: CmpOp,
        rhs: Operand,
    },
    Not {
        inner: Box<PredExpr>,
    },
    And {
        lhs: Box<PredExpr>,
        rhs: Box<PredExpr>,
    },
    Or {
        lhs: Box<PredExpr>,
        rhs: Box<PredExpr>,
    },
}

/// Right-hand side of an effect assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectValue {
    Literal { value: Value },
    Param { name: String },
}

/// One effect: `var <- literal | param`, applied in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub var: String,
    pub value: EffectValue,
}

/// Declaration of one API parameter with a finite domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
}

/// One callable API of the sandbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub precondition: PredExpr,
    pub effects: Vec<Effect>,
    pub safety_critical: bool,
    /// Lexical markers for the masking leak check, beyond the API name.
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl ApiSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Number of distinct full argument bindings.
    pub fn binding_count(&self) -> u64 {
        self.params
            .iter()
            .map(|p| p.domain.len())
            .try_fold(1u64, |acc, n| acc.checked_mul(n))
            .unwrap_or(u64::MAX)
    }
}

/// A complete scenario: state declarations plus the API surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolset {
    pub scenario_name: String,
    pub state_decl: Vec<StateVar>,
    pub apis: Vec<ApiSpec>,
}

impl Toolset {
    pub fn api(&self, name: &str) -> Option<&ApiSpec> {
        self.apis.iter().find(|a| a.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_decl.iter().find(|v| v.name == name)
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState {
            vars: self
                .state_decl
                .iter()
                .map(|v| (v.name.clone(), v.init.clone()))
                .collect(),
        }
    }

    pub fn safety_apis(&self) -> impl Iterator<Item = &ApiSpec> {
        self.apis.iter().filter(|a| a.safety_critical)
    }

    pub fn api_names(&self) -> Vec<String> {
        self.apis.iter().map(|a| a.name.clone()).collect()
    }

    /// Structural validation: unique names, resolvable references, typed
    /// preconditions and effects, bounded domains.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.apis.is_empty() {
            return Err(SchemaError::Invalid(
                "a toolset must declare at least one api".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for v in &self.state_decl {
            if !seen.insert(v.name.clone()) {
                return Err(SchemaError::Invalid(format!(
                    "duplicate state variable `{}`",
                    v.name
                )));
            }
            validate_domain(&v.domain, &v.name)?;
            if !v.domain.contains(&v.init) {
                return Err(SchemaError::Invalid(format!(
                    "initial value {} of `{}` is outside its domain",
                    v.init, v.name
                )));
            }
        }
        let mut api_names = BTreeSet::new();
        for api in &self.apis {
            if !api_names.insert(api.name.clone()) {
                return Err(SchemaError::Invalid(format!(
                    "duplicate api `{}`",
                    api.name
                )));
            }
            let mut param_names = BTreeSet::new();
            for p in &api.params {
                if self.state_var(&p.name).is_some() {
                    return Err(SchemaError::Invalid(format!(
                        "api `{}`: parameter `{}` shadows a state variable",
                        api.name, p.name
                    )));
                }
                if !param_names.insert(p.name.clone()) {
                    return Err(SchemaError::Invalid(format!(
                        "api `{}`: duplicate parameter `{}`",
                        api.name, p.name
                    )));
                }
                validate_domain(&p.domain, &p.name)?;
            }
            if api.binding_count() > MAX_BINDINGS_PER_API {
                return Err(SchemaError::Invalid(format!(
                    "api `{}` has more than {MAX_BINDINGS_PER_API} argument bindings",
                    api.name
                )));
            }
            self.typecheck_pred(api, &api.precondition)?;
            for eff in &api.effects {
                let var =
                    self.state_var(&eff.var)
                        .ok_or_else(|| SchemaError::UnknownReference {
                            kind: "state variable",
                            name: eff.var.clone(),
                            context: format!(" in effects of api `{}`", api.name),
                        })?;
                match &eff.value {
                    EffectValue::Literal { value } => {
                        if !var.domain.contains(value) {
                            return Err(SchemaError::Invalid(format!(
                                "api `{}`: effect assigns {} to `{}`, outside its domain",
                                api.name, value, eff.var
                            )));
                        }
                    }
                    EffectValue::Param { name } => {
                        let p = api
                            .param(name)
                            .ok_or_else(|| SchemaError::UnknownReference {
                                kind: "parameter",
                                name: name.clone(),
                                context: format!(" in effects of api `{}`", api.name),
                            })?;
                        if !var.domain.accepts_all_of(&p.domain) {
                            return Err(SchemaError::Invalid(format!(
                                "api `{}`: parameter `{}` can take values outside the domain of `{}`",
                                api.name, name, eff.var
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn operand_domain<'a>(
        &'a self,
        api: &'a ApiSpec,
        op: &'a Operand,
    ) -> Result<Option<&'a Domain>, SchemaError> {
        match op {
            Operand::StateVar { name } => Ok(Some(
                &self
                    .state_var(name)
                    .ok_or_else(|| SchemaError::UnknownReference {
                        kind: "state variable",
                        name: name.clone(),
                        context: format!(" in precondition of api `{}`", api.name),
                    })?
                    .domain,
            )),
            Operand::Param { name } => Ok(Some(
                &api.param(name)
                    .ok_or_else(|| SchemaError::UnknownReference {
                        kind: "parameter",
                        name: name.clone(),
                        context: format!(" in precondition of api `{}`", api.name),
                    })?
                    .domain,
            )),
            Operand::Literal { .. } => Ok(None),
        }
    }

    fn typecheck_pred(&self, api: &ApiSpec, expr: &PredExpr) -> Result<(), SchemaError> {
        match expr {
            PredExpr::Const { .. } => Ok(()),
            PredExpr::Not { inner } => self.typecheck_pred(api, inner),
            PredExpr::And { lhs, rhs } | PredExpr::Or { lhs, rhs } => {
                self.typecheck_pred(api, lhs)?;
                self.typecheck_pred(api, rhs)
            }
            PredExpr::Cmp { lhs, op, rhs } => {
                let ld = self.operand_domain(api, lhs)?;
                let rd = self.operand_domain(api, rhs)?;
                let lt = operand_type(lhs, ld);
                let rt = operand_type(rhs, rd);
                if let (Some(a), Some(b)) = (lt, rt) {
                    if a != b {
                        return Err(SchemaError::Invalid(format!(
                            "api `{}`: comparison mixes {a} and {b}",
                            api.name
                        )));
                    }
                    if matches!(op, CmpOp::Lt | CmpOp::Le) && a != "int" {
                        return Err(SchemaError::Invalid(format!(
                            "api `{}`: ordered comparison on non-integer operands",
                            api.name
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn operand_type(op: &Operand, domain: Option<&Domain>) -> Option<&'static str> {
    match op {
        Operand::Literal { value } => Some(value.type_name()),
        _ => domain.map(|d| match d {
            Domain::Bool => "bool",
            Domain::Int { .. } => "int",
            Domain::Enum { .. } => "enum",
        }),
    }
}

fn validate_domain(d: &Domain, name: &str) -> Result<(), SchemaError> {
    match d {
        Domain::Bool => Ok(()),
        Domain::Int { lo, hi } => {
            if lo > hi {
                Err(SchemaError::Invalid(format!(
                    "`{name}`: empty integer domain [{lo}..{hi}]"
                )))
            } else if hi - lo + 1 > MAX_INT_SPAN {
                Err(SchemaError::Invalid(format!(
                    "`{name}`: integer domain wider than {MAX_INT_SPAN} values"
                )))
            } else {
                Ok(())
            }
        }
        Domain::Enum { members } => {
            if members.is_empty() {
                return Err(SchemaError::Invalid(format!("`{name}`: empty enum domain")));
            }
            let mut seen = BTreeSet::new();
            for m in members {
                if !seen.insert(m) {
                    return Err(SchemaError::Invalid(format!(
                        "`{name}`: duplicate enum member `{m}`"
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Argument binding for one call: param name -> value.
pub type Args = BTreeMap<String, Value>;

/// A single tool invocation at a fixed trace position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub step: usize,
    pub api: String,
    #[serde(default)]
    pub args: Args,
}

/// An ordered sequence of invocations with contiguous step indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub actions: Vec<Invocation>,
}

impl Trace {
    /// Builds a trace from `(api, args)` pairs, assigning step indices.
    pub fn from_calls(calls: Vec<(String, Args)>) -> Self {
        Trace {
            actions: calls
                .into_iter()
                .enumerate()
                .map(|(step, (api, args))| Invocation { step, api, args })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// API name at each position, in order.
    pub fn api_names(&self) -> Vec<&str> {
        self.actions.iter().map(|a| a.api.as_str()).collect()
    }

    /// Renumbers step indices to 0..n-1.
    pub fn reindex(mut self) -> Self {
        for (i, a) in self.actions.iter_mut().enumerate() {
            a.step = i;
        }
        self
    }

    pub fn steps_contiguous(&self) -> bool {
        self.actions.iter().enumerate().all(|(i, a)| a.step == i)
    }
}
