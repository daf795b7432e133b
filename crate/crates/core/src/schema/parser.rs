//! Text format for schema documents.
//!
//! The grammar is line-insensitive; `#` starts a comment that runs to the
//! end of the line. Identifiers declare names; values are `true`/`false`,
//! integers, or double-quoted strings (enum members). See
//! `docs/formats.md` for the full grammar. `render_toolset` produces the
//! canonical form; parsing it back yields a structurally equal toolset.

use super::{
    ApiSpec, CmpOp, Domain, Effect, EffectValue, Operand, ParamSpec, PredExpr, SchemaError,
    StateVar, Toolset, Value,
};

const KEYWORDS: &[&str] = &[
    "scenario", "state", "api", "safety", "param", "pre", "effect", "keywords", "bool", "int",
    "enum", "true", "false",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> SchemaError {
        SchemaError::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let b = *self.src.get(self.pos)?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, SchemaError> {
        let mut out = Vec::new();
        loop {
            while let Some(b) = self.peek() {
                if b == b'#' {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if b.is_ascii_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(b) = self.peek() else { break };
            let tok = match b {
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let mut s = String::new();
                    while let Some(b) = self.peek() {
                        if b.is_ascii_alphanumeric() || b == b'_' {
                            s.push(b as char);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                b'0'..=b'9' => Tok::Int(self.lex_int(false)?),
                b'-' => {
                    self.bump();
                    if self.peek().is_some_and(|b| b.is_ascii_digit()) {
                        Tok::Int(self.lex_int(true)?)
                    } else {
                        return Err(self.err("expected digit after `-`"));
                    }
                }
                b'"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some(b'"') => break,
                            Some(b'\\') => match self.bump() {
                                Some(b'"') => s.push('"'),
                                Some(b'\\') => s.push('\\'),
                                _ => return Err(self.err("invalid escape in string")),
                            },
                            Some(b'\n') | None => {
                                return Err(self.err("unterminated string literal"))
                            }
                            Some(b) => s.push(b as char),
                        }
                    }
                    Tok::Str(s)
                }
                _ => {
                    let two = |a: u8, b: u8| -> bool {
                        self.peek() == Some(a) && self.peek2() == Some(b)
                    };
                    let p: &'static str = if two(b'=', b'=') {
                        "=="
                    } else if two(b'!', b'=') {
                        "!="
                    } else if two(b'<', b'=') {
                        "<="
                    } else if two(b'&', b'&') {
                        "&&"
                    } else if two(b'|', b'|') {
                        "||"
                    } else if two(b'.', b'.') {
                        ".."
                    } else {
                        match b {
                            b':' => ":",
                            b'=' => "=",
                            b'{' => "{",
                            b'}' => "}",
                            b'[' => "[",
                            b']' => "]",
                            b'(' => "(",
                            b')' => ")",
                            b',' => ",",
                            b'<' => "<",
                            b'!' => "!",
                            _ => {
                                return Err(
                                    self.err(format!("unexpected character `{}`", b as char))
                                )
                            }
                        }
                    };
                    for _ in 0..p.len() {
                        self.bump();
                    }
                    Tok::Punct(p)
                }
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }

    fn lex_int(&mut self, neg: bool) -> Result<i64, SchemaError> {
        let mut n: i64 = 0;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() {
                n = n
                    .checked_mul(10)
                    .and_then(|n| n.checked_add((b - b'0') as i64))
                    .ok_or_else(|| self.err("integer literal out of range"))?;
                self.bump();
            } else {
                break;
            }
        }
        Ok(if neg { -n } else { n })
    }
}

/// Expression with unresolved names; resolution needs the full document.
#[derive(Debug, Clone)]
enum RawExpr {
    Const(bool),
    Cmp(RawOperand, CmpOp, RawOperand),
    Bare(String),
    Not(Box<RawExpr>),
    And(Box<RawExpr>, Box<RawExpr>),
    Or(Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug, Clone)]
enum RawOperand {
    Name(String),
    Literal(Value),
}

struct RawApi {
    name: String,
    safety: bool,
    params: Vec<ParamSpec>,
    pre: Option<RawExpr>,
    effects: Vec<(String, RawRValue)>,
    keywords: Vec<String>,
}

enum RawRValue {
    Literal(Value),
    Name(String),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn err_at(&self, msg: impl Into<String>) -> SchemaError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .or_else(|| self.toks.last().map(|t| (t.line, t.col + 1)))
            .unwrap_or((1, 1));
        SchemaError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> Result<(), SchemaError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.err_at(format!("expected `{p}`, found {}", describe(other)))),
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn at_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn eat_keyword(&mut self, k: &str) -> Result<(), SchemaError> {
        if self.at_keyword(k) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_at(format!("expected `{k}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SchemaError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Ident(s)) => {
                Err(self.err_at(format!("`{s}` is a reserved word and cannot name a {what}")))
            }
            other => Err(self.err_at(format!("expected {what} name, found {}", describe(other)))),
        }
    }

    fn int(&mut self) -> Result<i64, SchemaError> {
        match self.next() {
            Some(Tok::Int(n)) => Ok(n),
            other => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at(format!(
                    "expected integer, found {}",
                    describe(other.as_ref())
                )))
            }
        }
    }

    fn string(&mut self) -> Result<String, SchemaError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => Err(self.err_at(format!("expected string, found {}", describe(other)))),
        }
    }

    fn domain(&mut self) -> Result<Domain, SchemaError> {
        if self.at_keyword("bool") {
            self.pos += 1;
            Ok(Domain::Bool)
        } else if self.at_keyword("int") {
            self.pos += 1;
            self.eat_punct("[")?;
            let lo = self.int()?;
            self.eat_punct("..")?;
            let hi = self.int()?;
            self.eat_punct("]")?;
            Ok(Domain::Int { lo, hi })
        } else if self.at_keyword("enum") {
            self.pos += 1;
            self.eat_punct("{")?;
            let mut members = vec![self.ident("enum member")?];
            while self.at_punct(",") {
                self.pos += 1;
                members.push(self.ident("enum member")?);
            }
            self.eat_punct("}")?;
            Ok(Domain::Enum { members })
        } else {
            Err(self.err_at(format!(
                "expected a domain (`bool`, `int[lo..hi]`, `enum {{...}}`), found {}",
                describe(self.peek())
            )))
        }
    }

    fn literal(&mut self) -> Result<Value, SchemaError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Value::Int(n))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Value::Str(s))
            }
            Some(Tok::Ident(s)) if s == "true" => {
                self.pos += 1;
                Ok(Value::Bool(true))
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.pos += 1;
                Ok(Value::Bool(false))
            }
            other => Err(self.err_at(format!("expected a value, found {}", describe(other)))),
        }
    }

    // expr := and ("||" and)* ; and := unary ("&&" unary)* ;
    // unary := "!" unary | "(" expr ")" | atom ; atom := operand (cmp operand)?
    fn expr(&mut self) -> Result<RawExpr, SchemaError> {
        let mut lhs = self.and_expr()?;
        while self.at_punct("||") {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = RawExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<RawExpr, SchemaError> {
        let mut lhs = self.unary()?;
        while self.at_punct("&&") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = RawExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawExpr, SchemaError> {
        if self.at_punct("!") {
            self.pos += 1;
            return Ok(RawExpr::Not(Box::new(self.unary()?)));
        }
        if self.at_punct("(") {
            self.pos += 1;
            let e = self.expr()?;
            self.eat_punct(")")?;
            return Ok(e);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<RawExpr, SchemaError> {
        if self.at_keyword("true") {
            self.pos += 1;
            return self.maybe_cmp(RawOperand::Literal(Value::Bool(true)), true);
        }
        if self.at_keyword("false") {
            self.pos += 1;
            return self.maybe_cmp(RawOperand::Literal(Value::Bool(false)), true);
        }
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let name = s.clone();
                self.pos += 1;
                self.maybe_cmp(RawOperand::Name(name), false)
            }
            Some(Tok::Int(_)) | Some(Tok::Str(_)) => {
                let lit = self.literal()?;
                self.maybe_cmp(RawOperand::Literal(lit), true)
            }
            other => Err(self.err_at(format!(
                "expected an operand or `(`, found {}",
                describe(other)
            ))),
        }
    }

    fn maybe_cmp(&mut self, lhs: RawOperand, lhs_is_literal: bool) -> Result<RawExpr, SchemaError> {
        let op = match self.peek() {
            Some(Tok::Punct("==")) => Some(CmpOp::Eq),
            Some(Tok::Punct("!=")) => Some(CmpOp::Ne),
            Some(Tok::Punct("<")) => Some(CmpOp::Lt),
            Some(Tok::Punct("<=")) => Some(CmpOp::Le),
            _ => None,
        };
        match op {
            Some(op) => {
                self.pos += 1;
                let rhs = self.operand()?;
                Ok(RawExpr::Cmp(lhs, op, rhs))
            }
            None => match lhs {
                RawOperand::Name(n) => Ok(RawExpr::Bare(n)),
                RawOperand::Literal(Value::Bool(b)) => Ok(RawExpr::Const(b)),
                RawOperand::Literal(v) if lhs_is_literal => {
                    Err(self.err_at(format!("bare literal {v} is not a boolean expression")))
                }
                RawOperand::Literal(_) => unreachable!(),
            },
        }
    }

    fn operand(&mut self) -> Result<RawOperand, SchemaError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(RawOperand::Name(s))
            }
            _ => Ok(RawOperand::Literal(self.literal()?)),
        }
    }

    fn api_decl(&mut self) -> Result<RawApi, SchemaError> {
        self.eat_keyword("api")?;
        let name = self.ident("api")?;
        let safety = if self.at_keyword("safety") {
            self.pos += 1;
            true
        } else {
            false
        };
        self.eat_punct("{")?;
        let mut api = RawApi {
            name,
            safety,
            params: Vec::new(),
            pre: None,
            effects: Vec::new(),
            keywords: Vec::new(),
        };
        loop {
            if self.at_punct("}") {
                self.pos += 1;
                break;
            }
            if self.at_keyword("param") {
                self.pos += 1;
                let pname = self.ident("parameter")?;
                self.eat_punct(":")?;
                let domain = self.domain()?;
                api.params.push(ParamSpec {
                    name: pname,
                    domain,
                });
            } else if self.at_keyword("pre") {
                self.pos += 1;
                if api.pre.is_some() {
                    return Err(self.err_at(format!("api `{}` declares `pre` twice", api.name)));
                }
                api.pre = Some(self.expr()?);
            } else if self.at_keyword("effect") {
                self.pos += 1;
                let var = self.ident("state variable")?;
                self.eat_punct("=")?;
                let rv = match self.peek() {
                    Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                        let s = s.clone();
                        self.pos += 1;
                        RawRValue::Name(s)
                    }
                    _ => RawRValue::Literal(self.literal()?),
                };
                api.effects.push((var, rv));
            } else if self.at_keyword("keywords") {
                self.pos += 1;
                api.keywords.push(self.string()?);
                while self.at_punct(",") {
                    self.pos += 1;
                    api.keywords.push(self.string()?);
                }
            } else {
                return Err(self.err_at(format!(
                    "expected `param`, `pre`, `effect`, `keywords`, or `}}`, found {}",
                    describe(self.peek())
                )));
            }
        }
        Ok(api)
    }
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".to_string(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Int(n)) => format!("`{n}`"),
        Some(Tok::Str(s)) => format!("\"{s}\""),
        Some(Tok::Punct(p)) => format!("`{p}`"),
    }
}

fn resolve_expr(
    raw: &RawExpr,
    api_name: &str,
    params: &[ParamSpec],
    state: &[StateVar],
) -> Result<PredExpr, SchemaError> {
    let resolve_name = |name: &str| -> Result<Operand, SchemaError> {
        if state.iter().any(|v| v.name == name) {
            Ok(Operand::StateVar { name: name.into() })
        } else if params.iter().any(|p| p.name == name) {
            Ok(Operand::Param { name: name.into() })
        } else {
            Err(SchemaError::UnknownReference {
                kind: "symbol",
                name: name.into(),
                context: format!(" in api `{api_name}`"),
            })
        }
    };
    let resolve_operand = |o: &RawOperand| -> Result<Operand, SchemaError> {
        match o {
            RawOperand::Name(n) => resolve_name(n),
            RawOperand::Literal(v) => Ok(Operand::Literal { value: v.clone() }),
        }
    };
    Ok(match raw {
        RawExpr::Const(b) => PredExpr::Const { value: *b },
        RawExpr::Bare(name) => PredExpr::Cmp {
            lhs: resolve_name(name)?,
            op: CmpOp::Eq,
            rhs: Operand::Literal {
                value: Value::Bool(true),
            },
        },
        RawExpr::Cmp(l, op, r) => PredExpr::Cmp {
            lhs: resolve_operand(l)?,
            op: *op,
            rhs: resolve_operand(r)?,
        },
        RawExpr::Not(e) => PredExpr::Not {
            inner: Box::new(resolve_expr(e, api_name, params, state)?),
        },
        RawExpr::And(l, r) => PredExpr::And {
            lhs: Box::new(resolve_expr(l, api_name, params, state)?),
            rhs: Box::new(resolve_expr(r, api_name, params, state)?),
        },
        RawExpr::Or(l, r) => PredExpr::Or {
            lhs: Box::new(resolve_expr(l, api_name, params, state)?),
            rhs: Box::new(resolve_expr(r, api_name, params, state)?),
        },
    })
}

/// Parses and validates a schema document.
pub fn load_toolset(doc: &str) -> Result<Toolset, SchemaError> {
    let toks = Lexer::new(doc).tokenize()?;
    let mut p = Parser { toks, pos: 0 };
    p.eat_keyword("scenario")?;
    let scenario_name = p.ident("scenario")?;
    let mut state_decl: Vec<StateVar> = Vec::new();
    let mut raw_apis: Vec<RawApi> = Vec::new();
    while p.peek().is_some() {
        if p.at_keyword("state") {
            p.pos += 1;
            let name = p.ident("state variable")?;
            p.eat_punct(":")?;
            let domain = p.domain()?;
            p.eat_punct("=")?;
            let init = p.literal()?;
            state_decl.push(StateVar { name, domain, init });
        } else if p.at_keyword("api") {
            raw_apis.push(p.api_decl()?);
        } else {
            return Err(p.err_at(format!(
                "expected `state` or `api`, found {}",
                describe(p.peek())
            )));
        }
    }

    let mut apis = Vec::with_capacity(raw_apis.len());
    for raw in &raw_apis {
        let precondition = match &raw.pre {
            Some(e) => resolve_expr(e, &raw.name, &raw.params, &state_decl)?,
            None => PredExpr::Const { value: true },
        };
        let mut effects = Vec::with_capacity(raw.effects.len());
        for (var, rv) in &raw.effects {
            let value = match rv {
                RawRValue::Literal(v) => EffectValue::Literal { value: v.clone() },
                RawRValue::Name(n) => {
                    if raw.params.iter().any(|p| &p.name == n) {
                        EffectValue::Param { name: n.clone() }
                    } else {
                        return Err(SchemaError::UnknownReference {
                            kind: "parameter",
                            name: n.clone(),
                            context: format!(
                                " in effects of api `{}` (enum members must be quoted)",
                                raw.name
                            ),
                        });
                    }
                }
            };
            effects.push(Effect {
                var: var.clone(),
                value,
            });
        }
        apis.push(ApiSpec {
            name: raw.name.clone(),
            params: raw.params.clone(),
            precondition,
            effects,
            safety_critical: raw.safety,
            keywords: raw.keywords.clone(),
        });
    }

    let toolset = Toolset {
        scenario_name,
        state_decl,
        apis,
    };
    toolset.validate()?;
    Ok(toolset)
}

fn render_domain(d: &Domain) -> String {
    match d {
        Domain::Bool => "bool".to_string(),
        Domain::Int { lo, hi } => format!("int[{lo}..{hi}]"),
        Domain::Enum { members } => format!("enum {{ {} }}", members.join(", ")),
    }
}

fn render_operand(o: &Operand) -> String {
    match o {
        Operand::StateVar { name } | Operand::Param { name } => name.clone(),
        Operand::Literal { value } => value.to_string(),
    }
}

fn render_expr(e: &PredExpr) -> String {
    match e {
        PredExpr::Const { value } => value.to_string(),
        PredExpr::Cmp { lhs, op, rhs } => {
            // `x == true` is the desugared form of a bare boolean atom.
            if let (
                Operand::Literal {
                    value: Value::Bool(true),
                },
                CmpOp::Eq,
            ) = (rhs, op)
            {
                if !matches!(lhs, Operand::Literal { .. }) {
                    return render_operand(lhs);
                }
            }
            format!(
                "{} {} {}",
                render_operand(lhs),
                op.symbol(),
                render_operand(rhs)
            )
        }
        PredExpr::Not { inner } => match inner.as_ref() {
            PredExpr::Cmp { .. } => {
                let s = render_expr(inner);
                if s.contains(' ') {
                    format!("!({s})")
                } else {
                    format!("!{s}")
                }
            }
            PredExpr::Const { .. } | PredExpr::Not { .. } => format!("!{}", render_expr(inner)),
            _ => format!("!({})", render_expr(inner)),
        },
        PredExpr::And { lhs, rhs } => {
            let l = match lhs.as_ref() {
                PredExpr::Or { .. } => format!("({})", render_expr(lhs)),
                _ => render_expr(lhs),
            };
            let r = match rhs.as_ref() {
                PredExpr::Or { .. } | PredExpr::And { .. } => format!("({})", render_expr(rhs)),
                _ => render_expr(rhs),
            };
            format!("{l} && {r}")
        }
        PredExpr::Or { lhs, rhs } => {
            let l = render_expr(lhs);
            let r = match rhs.as_ref() {
                PredExpr::Or { .. } => format!("({})", render_expr(rhs)),
                _ => render_expr(rhs),
            };
            format!("{l} || {r}")
        }
    }
}

/// Canonical text form. `load_toolset(render_toolset(t))` equals `t`.
pub fn render_toolset(t: &Toolset) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario {}\n\n", t.scenario_name));
    for v in &t.state_decl {
        out.push_str(&format!(
            "state {} : {} = {}\n",
            v.name,
            render_domain(&v.domain),
            v.init
        ));
    }
    for api in &t.apis {
        out.push('\n');
        out.push_str(&format!(
            "api {}{} {{\n",
            api.name,
            if api.safety_critical { " safety" } else { "" }
        ));
        for p in &api.params {
            out.push_str(&format!(
                "  param {} : {}\n",
                p.name,
                render_domain(&p.domain)
            ));
        }
        out.push_str(&format!("  pre {}\n", render_expr(&api.precondition)));
        for e in &api.effects {
            let rv = match &e.value {
                EffectValue::Literal { value } => value.to_string(),
                EffectValue::Param { name } => name.clone(),
            };
            out.push_str(&format!("  effect {} = {}\n", e.var, rv));
        }
        if !api.keywords.is_empty() {
            let kws: Vec<String> = api.keywords.iter().map(|k| format!("\"{k}\"")).collect();
            out.push_str(&format!("  keywords {}\n", kws.join(", ")));
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_doc_one_api_no_state() {
        let ts = load_toolset("scenario s\napi ping { }").unwrap();
        assert_eq!(ts.apis.len(), 1);
        assert!(ts.state_decl.is_empty());
        assert_eq!(ts.apis[0].precondition, PredExpr::Const { value: true });
    }

    #[test]
    fn undeclared_state_var_in_precondition_is_named() {
        let err = load_toolset("scenario s\napi a { pre foo }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("foo"), "got: {msg}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = load_toolset("scenario s\napi a { pre (x }").unwrap_err();
        match err {
            SchemaError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn bare_bool_atom_desugars_to_eq_true() {
        let ts = load_toolset("scenario s\nstate on : bool = false\napi a { pre on }").unwrap();
        assert_eq!(
            ts.apis[0].precondition,
            PredExpr::Cmp {
                lhs: Operand::StateVar { name: "on".into() },
                op: CmpOp::Eq,
                rhs: Operand::Literal {
                    value: Value::Bool(true)
                },
            }
        );
    }

    #[test]
    fn negation_binds_looser_than_comparison() {
        let ts = load_toolset("scenario s\nstate n : int[0..5] = 0\napi a { pre !n < 3 }").unwrap();
        assert_eq!(
            ts.apis[0].precondition,
            PredExpr::Not {
                inner: Box::new(PredExpr::Cmp {
                    lhs: Operand::StateVar { name: "n".into() },
                    op: CmpOp::Lt,
                    rhs: Operand::Literal {
                        value: Value::Int(3)
                    },
                })
            }
        );
    }

    #[test]
    fn enum_members_are_quoted_in_value_positions() {
        let ts = load_toolset(
            r#"scenario s
state mode : enum { idle, busy } = "idle"
api go {
  param m : enum { idle, busy }
  pre mode == "idle"
  effect mode = m
}"#,
        )
        .unwrap();
        assert_eq!(ts.apis[0].effects.len(), 1);
        assert_eq!(
            ts.apis[0].effects[0].value,
            EffectValue::Param { name: "m".into() }
        );
    }

    #[test]
    fn param_shadowing_state_var_rejected() {
        let err = load_toolset("scenario s\nstate x : bool = false\napi a { param x : bool }")
            .unwrap_err();
        assert!(err.to_string().contains("shadows"));
    }

    #[test]
    fn renders_and_reparses_structurally_equal() {
        let src = r#"
scenario demo
state locked : bool = true
state tries : int[0..3] = 0
state mode : enum { off, eco, max } = "off"

api set_mode {
  param m : enum { off, eco, max }
  pre !locked && (tries < 2 || mode == "eco")
  effect mode = m
  effect tries = 1
  keywords "mode"
}
api reset safety {
  pre true
  effect tries = 0
  effect locked = true
}
"#;
        let t1 = load_toolset(src).unwrap();
        let rendered = render_toolset(&t1);
        let t2 = load_toolset(&rendered).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn comments_are_skipped() {
        let ts = load_toolset("# header\nscenario s # trailing\napi a { } # end").unwrap();
        assert_eq!(ts.scenario_name, "s");
    }
}
