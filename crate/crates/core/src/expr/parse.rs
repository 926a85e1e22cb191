//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := ("-")? unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" ("-")? power)?
//! atom  := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```

use thiserror::Error;

use super::{Expr, Func, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i128),
    Dec(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (t, at) = lx.next()?;
            let end = t == Tok::End;
            out.push((t, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[start];
        if c.is_ascii_digit() || (c == b'.' && bytes.get(start + 1).is_some_and(u8::is_ascii_digit)) {
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            let mut is_dec = false;
            if end < bytes.len() && bytes[end] == b'.' {
                is_dec = true;
                end += 1;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    is_dec = true;
                    end = k;
                }
            }
            self.pos = end;
            let text = &self.src[start..end];
            let tok = if is_dec {
                Tok::Dec(text.parse().map_err(|_| syntax(start, "malformed decimal literal"))?)
            } else {
                match text.parse::<i128>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => Tok::Dec(text.parse().map_err(|_| syntax(start, "malformed integer literal"))?),
                }
            };
            return Ok((tok, start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(syntax(start, &format!("unexpected character `{ch}`")))
    }
}

fn syntax(offset: usize, message: &str) -> ParseError {
    ParseError::Syntax { offset, message: message.to_string() }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, op: char) -> bool {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(-self.term()?);
            } else {
                return Ok(Expr::add_all(terms));
            }
        }
    }

    /// A leading minus negates the whole term: `-a/b` is `-(a/b)`.
    fn term(&mut self) -> Result<Expr, ParseError> {
        let negate = self.eat('-');
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.eat('/') {
                factors.push(self.unary()?.recip());
            } else {
                let t = Expr::mul_all(factors);
                return Ok(if negate { -t } else { t });
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = if self.eat('-') { -self.power()? } else { self.power()? };
            return Ok(Expr::pow(&base, &exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Int(v) => Ok(Expr::rational(Q::from_integer(v))),
            Tok::Dec(v) => Ok(Expr::float(v)),
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    self.bump();
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(syntax(self.offset(), "expected `)`"));
                    }
                    match name.as_str() {
                        "exp" => Ok(arg.exp()),
                        "log" => Ok(arg.ln()),
                        "sqrt" => Ok(arg.sqrt()),
                        "sin" => Ok(Expr::func(Func::Sin, &arg)),
                        "cos" => Ok(Expr::func(Func::Cos, &arg)),
                        _ => Err(ParseError::UnknownFunction { name, offset: at }),
                    }
                } else {
                    Ok(Expr::symbol(&name))
                }
            }
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(syntax(self.offset(), "expected `)`"));
                }
                Ok(e)
            }
            Tok::End => Err(syntax(at, "unexpected end of input")),
            Tok::Op(c) => Err(syntax(at, &format!("unexpected `{c}`"))),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn quarter_is_exact() {
        let e = parse("r^2/(1+(x^2+y^2)/4)^2").unwrap();
        let s = format!("{e}");
        assert!(s.contains("/4") || s.contains("1/4"), "{s}");
        let one_quarter = Expr::ratio(1, 4);
        let found = format!("{e:?}").contains(&format!("{:?}", one_quarter.node()));
        assert!(found);
    }

    #[test]
    fn einstein_profile_parses() {
        let e = parse("2*(-1/2 + m/r + L*r^2/6)").unwrap();
        let expected = Expr::int(-1) + Expr::int(2) * Expr::symbol("m") / Expr::symbol("r")
            + Expr::ratio(1, 3) * Expr::symbol("L") * Expr::symbol("r").powi(2);
        assert_eq!(e, expected);
    }

    #[test]
    fn unary_minus_is_looser_than_power() {
        assert_eq!(parse("-x^2").unwrap(), -(Expr::symbol("x").powi(2)));
        assert_eq!(parse("2^-1").unwrap(), Expr::ratio(1, 2));
        assert_eq!(parse("2^3^2").unwrap(), Expr::int(512));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse("1 + * 2"), Err(ParseError::Syntax { offset: 4, message: "unexpected `*`".into() }));
        assert!(matches!(parse("foo(x)"), Err(ParseError::UnknownFunction { offset: 0, .. })));
        assert!(matches!(parse("(x"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x $"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn decimals_are_floats() {
        assert!(matches!(parse("1.5").unwrap().node(), Node::Float(_)));
        assert!(matches!(parse("3/2").unwrap().node(), Node::Rational(_)));
    }
}
