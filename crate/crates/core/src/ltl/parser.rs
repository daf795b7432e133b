//! Concrete formula syntax.
//!
//! Atoms are API identifiers. Operators, loosest to tightest: `->` (right
//! associative), `|`, `&`, `U` (right associative), then the unary `!`,
//! `X`, `F`, `G`. `true` and `false` are constants; `U`, `X`, `F`, `G`,
//! `true`, `false` are reserved and cannot be atoms. Whitespace is
//! insignificant.

use super::{LtlError, LtlFormula};

struct P<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> P<'a> {
    fn skip_ws(&mut self) {
        while self
            .src
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s.as_bytes()) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn err(&self, expected: &str) -> LtlError {
        LtlError::Parse {
            pos: self.pos,
            expected: expected.into(),
        }
    }

    fn word(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
        }
    }

    fn formula(&mut self) -> Result<LtlFormula, LtlError> {
        let lhs = self.or_level()?;
        if self.eat("->") {
            let rhs = self.formula()?;
            Ok(LtlFormula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or_level(&mut self) -> Result<LtlFormula, LtlError> {
        let mut lhs = self.and_level()?;
        loop {
            // `|` but not the start of `->`-like leftovers; single char is fine
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'|') {
                self.pos += 1;
                let rhs = self.and_level()?;
                lhs = LtlFormula::Or(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn and_level(&mut self) -> Result<LtlFormula, LtlError> {
        let mut lhs = self.until_level()?;
        loop {
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'&') {
                self.pos += 1;
                let rhs = self.until_level()?;
                lhs = LtlFormula::And(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn until_level(&mut self) -> Result<LtlFormula, LtlError> {
        let lhs = self.unary()?;
        let save = self.pos;
        self.skip_ws();
        if let Some(w) = self.word_at_cursor() {
            if w == "U" {
                self.pos += 1;
                let rhs = self.until_level()?;
                return Ok(LtlFormula::Until(Box::new(lhs), Box::new(rhs)));
            }
        }
        self.pos = save;
        Ok(lhs)
    }

    /// Reads the identifier at the cursor without consuming it.
    fn word_at_cursor(&self) -> Option<String> {
        let mut end = self.pos;
        while self
            .src
            .get(end)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            end += 1;
        }
        if end == self.pos {
            None
        } else {
            Some(String::from_utf8_lossy(&self.src[self.pos..end]).into_owned())
        }
    }

    fn unary(&mut self) -> Result<LtlFormula, LtlError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(LtlFormula::Not(Box::new(self.unary()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                if !self.eat(")") {
                    return Err(self.err("`)`"));
                }
                Ok(f)
            }
            _ => {
                let save = self.pos;
                let Some(w) = self.word() else {
                    return Err(self.err("`!`, `X`, `F`, `G`, `(`, `true`, `false`, or an atom"));
                };
                match w.as_str() {
                    "X" => Ok(LtlFormula::Next(Box::new(self.unary()?))),
                    "F" => Ok(LtlFormula::Eventually(Box::new(self.unary()?))),
                    "G" => Ok(LtlFormula::Always(Box::new(self.unary()?))),
                    "true" => Ok(LtlFormula::True),
                    "false" => Ok(LtlFormula::False),
                    "U" => {
                        self.pos = save;
                        Err(self.err("an operand (found operator `U`)"))
                    }
                    _ => Ok(LtlFormula::Atom(w)),
                }
            }
        }
    }
}

/// Parses the concrete syntax into an AST. Total over the documented
/// grammar; errors carry the byte offset and the expected-token set.
pub fn parse_formula(text: &str) -> Result<LtlFormula, LtlError> {
    let mut p = P {
        src: text.as_bytes(),
        pos: 0,
    };
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("end of input"));
    }
    Ok(f)
}

fn prec(f: &LtlFormula) -> u8 {
    match f {
        LtlFormula::Implies(_, _) => 1,
        LtlFormula::Or(_, _) => 2,
        LtlFormula::And(_, _) => 3,
        LtlFormula::Until(_, _) => 4,
        LtlFormula::Not(_)
        | LtlFormula::Next(_)
        | LtlFormula::Eventually(_)
        | LtlFormula::Always(_) => 5,
        LtlFormula::True | LtlFormula::False | LtlFormula::Atom(_) => 6,
    }
}

fn print_into(f: &LtlFormula, min_prec: u8, out: &mut String) {
    let p = prec(f);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match f {
        LtlFormula::True => out.push_str("true"),
        LtlFormula::False => out.push_str("false"),
        LtlFormula::Atom(a) => out.push_str(a),
        LtlFormula::Not(x) => {
            out.push('!');
            print_into(x, 5, out);
        }
        LtlFormula::Next(x) => {
            out.push_str("X ");
            print_into(x, 5, out);
        }
        LtlFormula::Eventually(x) => {
            out.push_str("F ");
            print_into(x, 5, out);
        }
        LtlFormula::Always(x) => {
            out.push_str("G ");
            print_into(x, 5, out);
        }
        LtlFormula::Until(a, b) => {
            // right associative: the left operand must bind tighter
            print_into(a, 5, out);
            out.push_str(" U ");
            print_into(b, 4, out);
        }
        LtlFormula::And(a, b) => {
            print_into(a, 3, out);
            out.push_str(" & ");
            print_into(b, 4, out);
        }
        LtlFormula::Or(a, b) => {
            print_into(a, 2, out);
            out.push_str(" | ");
            print_into(b, 3, out);
        }
        LtlFormula::Implies(a, b) => {
            print_into(a, 2, out);
            out.push_str(" -> ");
            print_into(b, 1, out);
        }
    }
    if parens {
        out.push(')');
    }
}

/// Renders a formula so that `parse_formula(pretty_print(f))` is
/// structurally equal to `f`.
pub fn pretty_print(f: &LtlFormula) -> String {
    let mut s = String::new();
    print_into(f, 0, &mut s);
    s
}
