use super::{Expr, Func};
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

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
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
            out.push(Token { tok, line: l0, column: c0 });
            column += 1;
            i += 1;
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
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                line: l0,
                column: c0,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token { tok: Tok::Num(v), line: l0, column: c0 });
            column += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text), line: l0, column: c0 });
            column += i - start;
            continue;
        }
        return Err(Error::Syntax { line: l0, column: c0, message: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, t: &Token, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { line: t.line, column: t.column, message: message.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            self.syntax(&t, format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    acc = Expr::add(vec![acc, self.term()?]);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    acc = Expr::mul(vec![acc, self.factor()?]);
                }
                Tok::Slash => {
                    self.bump();
                    acc = Expr::div(acc, self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.base()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let negative = if self.peek().tok == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let t = self.bump();
            let k = match t.tok {
                Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
                _ => return self.syntax(&t, "exponent must be an integer literal"),
            };
            return Ok(Expr::powi(base, if negative { -k } else { k }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok.clone() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    if self.peek().tok == Tok::RParen {
                        return Err(Error::WrongArity { name, got: 0, line: t.line, column: t.column });
                    }
                    let arg = self.expr()?;
                    let mut extra = 0;
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        self.expr()?;
                        extra += 1;
                    }
                    if extra > 0 {
                        return Err(Error::WrongArity { name, got: 1 + extra, line: t.line, column: t.column });
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::call(func, arg));
                }
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                        let index: usize = digits.parse().unwrap_or(usize::MAX);
                        if index == 0 || index > self.n {
                            return Err(Error::VariableOutOfRange { index, n: self.n });
                        }
                        return Ok(Expr::Var(index - 1));
                    }
                }
                Err(Error::UnknownIdentifier { name, line: t.line, column: t.column })
            }
            Tok::End => self.syntax(&t, "unexpected end of input"),
            other => self.syntax(&t, format!("unexpected token {other:?}")),
        }
    }
}

/// Parses `source` as an expression in the variables `x1..xn`.
pub fn parse(source: &str, n: usize) -> Result<Expr> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, n };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.syntax(&t, "trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_factor_parses_with_depth_five() {
        let e = parse("4/(1+x1^2+x2^2)^2", 3).unwrap();
        assert_eq!(e.depth(), 5);
        assert!((e.eval(&[0.0, 0.0, 0.0]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn function_call() {
        let e = parse("exp(2*x1)", 3).unwrap();
        assert!((e.eval(&[0.3, 0.0, 0.0]) - 0.6f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn variable_out_of_range() {
        assert_eq!(parse("x0 + 1", 3), Err(Error::VariableOutOfRange { index: 0, n: 3 }));
        assert!(matches!(parse("x4", 3), Err(Error::VariableOutOfRange { index: 4, .. })));
    }

    #[test]
    fn error_positions() {
        match parse("x1 +\n  y", 3) {
            Err(Error::UnknownIdentifier { name, line, column }) => {
                assert_eq!((name.as_str(), line, column), ("y", 2, 3));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("sin(x1, x2)", 3), Err(Error::WrongArity { got: 2, .. })));
        assert!(matches!(parse("cos()", 3), Err(Error::WrongArity { got: 0, .. })));
        assert!(matches!(parse("x1 ^ 1.5", 3), Err(Error::Syntax { .. })));
        assert!(matches!(parse("(x1", 3), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 $", 3), Err(Error::Syntax { line: 1, column: 4, .. })));
    }

    #[test]
    fn negative_exponents_and_unary_minus() {
        let e = parse("-x1^-2", 3).unwrap();
        assert!((e.eval(&[2.0, 0.0, 0.0]) + 0.25).abs() < 1e-15);
        assert_eq!(parse(&e.to_string(), 3).unwrap(), e);
    }
}
