//! Recursive-descent parser for expression lists.
//!
//! ```text
//! list   := expr (',' expr)*
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' '-'? number)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```

use super::ast::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(syntax(tl, tc + (j - start), "malformed exponent in number"));
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(tl, tc, format!("malformed number `{s}`")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(v),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                column: tc,
            });
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            Err(syntax(t.line, t.column, format!("expected {what}, found {:?}", t.tok)))
        }
    }

    fn list(&mut self) -> Result<Vec<Expr>> {
        let mut out = vec![self.expr()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            out.push(self.expr()?);
        }
        let t = self.peek();
        if t.tok != Tok::End {
            return Err(syntax(t.line, t.column, format!("unexpected {:?}", t.tok)));
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.next();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = lhs * self.unary()?;
                }
                Tok::Slash => {
                    self.next();
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(-self.unary()?);
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let negative = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(base.pow(if negative { -v } else { v })),
            other => Err(syntax(
                t.line,
                t.column,
                format!("exponent must be a numeric constant, found {other:?}"),
            )),
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| Error::UnknownFunction {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    })?;
                    self.next();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(arg.apply(func))
                } else {
                    Ok(Expr::var(name))
                }
            }
            other => Err(syntax(
                t.line,
                t.column,
                format!("expected a number, variable or `(`, found {other:?}"),
            )),
        }
    }
}

/// Parse a comma-separated list of expressions. Variable slots are not
/// bound yet.
pub fn parse_list(text: &str) -> Result<Vec<Expr>> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    p.list()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = &parse_list("a - b - c*d/e^2").unwrap()[0];
        let expected = (Expr::var("a") - Expr::var("b"))
            - (Expr::var("c") * Expr::var("d")) / Expr::var("e").pow(2.0);
        assert_eq!(e, &expected);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = &parse_list("-x^2").unwrap()[0];
        assert_eq!(e, &-(Expr::var("x").pow(2.0)));
        let e = &parse_list("2*-x").unwrap()[0];
        assert_eq!(e, &(Expr::Const(2.0) * -Expr::var("x")));
    }

    #[test]
    fn negative_and_scientific_exponents() {
        let e = &parse_list("x^-1.5 + 1e-3 + 2.5E+2").unwrap()[0];
        assert_eq!(
            e,
            &(Expr::var("x").pow(-1.5) + Expr::Const(1e-3) + Expr::Const(250.0))
        );
    }

    #[test]
    fn reports_line_and_column() {
        match parse_list("x +\n  * y") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_function_is_rejected() {
        match parse_list("tanh(x)") {
            Err(Error::UnknownFunction { name, line, column }) => {
                assert_eq!((name.as_str(), line, column), ("tanh", 1, 1))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_and_empty_input() {
        assert!(matches!(parse_list("x y"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_list(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_list("x^y"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_list("(x"), Err(Error::Syntax { .. })));
    }
}
