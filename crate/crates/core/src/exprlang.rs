//! A small expression language for scalar functions of `t`.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 't' | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sin | cos | abs
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-t^2`
//! is `-(t^2)` and `2^-1` is `0.5`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var => t,
            Expr::Neg(e) => -e.eval(t)?,
            Expr::Add(a, b) => a.eval(t)? + b.eval(t)?,
            Expr::Sub(a, b) => a.eval(t)? - b.eval(t)?,
            Expr::Mul(a, b) => a.eval(t)? * b.eval(t)?,
            Expr::Div(a, b) => {
                let num = a.eval(t)?;
                let den = b.eval(t)?;
                if den == 0.0 {
                    return Err(Error::Domain(format!(
                        "division by zero in `{self}` at t = {t}"
                    )));
                }
                num / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(t)?;
                let exponent = b.eval(t)?;
                let value = base.powf(exponent);
                if value.is_nan() {
                    return Err(Error::Domain(format!("`{self}` undefined at t = {t}")));
                }
                if base == 0.0 && exponent < 0.0 {
                    return Err(Error::Domain(format!(
                        "zero to a negative power in `{self}` at t = {t}"
                    )));
                }
                value
            }
            Expr::Call(func, arg) => {
                let x = arg.eval(t)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(Error::Domain(format!(
                                "log of {x} in `{self}` at t = {t}"
                            )));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Abs => x.abs(),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Overflow(format!("`{self}` at t = {t}")))
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var | Expr::Call(..) => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{:?}` is the shortest representation that parses back exactly.
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var => write!(f, "t"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_operand(f, e, 3)
            }
            Expr::Add(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " + ")?;
                write_operand(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " - ")?;
                write_operand(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, " * ")?;
                write_operand(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, " / ")?;
                write_operand(f, b, 3)
            }
            Expr::Pow(a, b) => {
                write_operand(f, a, 5)?;
                write!(f, "^")?;
                write_operand(f, b, 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// A parsed perturbation `r(t)` together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionExpr {
    ast: Expr,
    source: String,
}

impl FunctionExpr {
    pub fn zero() -> Self {
        FunctionExpr {
            ast: Expr::Const(0.0),
            source: "0".to_string(),
        }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.ast.eval(t)
    }

    /// True only for a literal constant zero; no simplification is attempted.
    pub fn is_identically_zero(&self) -> bool {
        matches!(self.ast, Expr::Const(c) if c == 0.0)
    }
}

/// Anything that can be sampled as a scalar function of `t`.
pub trait ScalarFn: Sync {
    fn at(&self, t: f64) -> Result<f64>;
}

impl ScalarFn for FunctionExpr {
    fn at(&self, t: f64) -> Result<f64> {
        self.eval(t)
    }
}

impl<F: Fn(f64) -> Result<f64> + Sync> ScalarFn for F {
    fn at(&self, t: f64) -> Result<f64> {
        self(t)
    }
}

impl fmt::Display for FunctionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

impl std::str::FromStr for FunctionExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos] as char;
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(token) = simple {
            tokens.push((token, start));
            pos += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                pos += 1;
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut look = pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    pos = look;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let literal = &text[start..pos];
            let value: f64 = literal.parse().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number `{literal}`"),
            })?;
            tokens.push((Token::Number(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            tokens.push((Token::Ident(text[start..pos].to_string()), start));
            continue;
        }
        return Err(Error::Syntax {
            position: start,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.cursor).map_or(self.end, |(_, p)| *p)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.position(),
            message: message.into(),
        }
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&token) {
            self.cursor += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.cursor += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.cursor += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.cursor += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.cursor += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Token::Minus) {
            self.cursor += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.cursor += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.position();
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.cursor += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::LParen) => {
                self.cursor += 1;
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.cursor += 1;
                if name == "t" {
                    return Ok(Expr::Var);
                }
                let func = Func::from_name(&name).ok_or(Error::UnknownIdentifier {
                    name: name.clone(),
                    position,
                })?;
                self.expect(Token::LParen, "`(` after function name")?;
                let arg = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.error("expected a number, `t`, a function or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

pub fn parse(text: &str) -> Result<FunctionExpr> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(Error::Syntax {
            position: 0,
            message: "empty expression".to_string(),
        });
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end: text.len(),
    };
    let ast = parser.expr()?;
    if parser.cursor != parser.tokens.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(FunctionExpr {
        ast,
        source: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn ast_shape() {
        let e = parse("0.001*exp(-t)").unwrap();
        assert_eq!(
            e.ast(),
            &Expr::Mul(
                b(Expr::Const(0.001)),
                b(Expr::Call(Func::Exp, b(Expr::Neg(b(Expr::Var)))))
            )
        );
        assert_eq!(e.source(), "0.001*exp(-t)");
    }

    #[test]
    fn precedence() {
        assert_eq!(parse("-t^2").unwrap().eval(3.0).unwrap(), -9.0);
        assert_eq!(parse("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
        assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        assert_eq!(parse("1 - 2 - 3").unwrap().eval(0.0).unwrap(), -4.0);
        assert_eq!(parse("8 / 4 / 2").unwrap().eval(0.0).unwrap(), 1.0);
        assert_eq!(parse("1 + 2 * 3").unwrap().eval(0.0).unwrap(), 7.0);
        assert_eq!(parse("2.5e-1 * t").unwrap().eval(4.0).unwrap(), 1.0);
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(parse("1/(1+t^2)").unwrap().eval(1.0).unwrap(), 0.5);
        assert_eq!(parse("0").unwrap().eval(123.4).unwrap(), 0.0);
        let half = parse("exp(-t)")
            .unwrap()
            .eval(std::f64::consts::LN_2)
            .unwrap();
        assert!((half - 0.5).abs() < 1e-16);
        assert_eq!(
            parse("abs(sin(t)) + cos(0)").unwrap().eval(0.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(
            parse("exp(").unwrap_err(),
            Error::Syntax {
                position: 4,
                message: "unexpected end of input".to_string()
            }
        );
        assert!(matches!(parse(""), Err(Error::Syntax { position: 0, .. })));
        assert!(matches!(
            parse("t t"),
            Err(Error::Syntax { position: 2, .. })
        ));
        assert!(matches!(
            parse("(t"),
            Err(Error::Syntax { position: 2, .. })
        ));
        assert!(matches!(
            parse("t # 2"),
            Err(Error::Syntax { position: 2, .. })
        ));
        assert_eq!(
            parse("2*x").unwrap_err(),
            Error::UnknownIdentifier {
                name: "x".to_string(),
                position: 2
            }
        );
    }

    #[test]
    fn evaluation_errors() {
        assert!(matches!(
            parse("1/t").unwrap().eval(0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse("log(t)").unwrap().eval(-1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse("(-1)^0.5").unwrap().eval(0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse("exp(t)").unwrap().eval(1000.0),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn display_parses_back() {
        for src in [
            "-t^2",
            "(-t)^2",
            "1 - (2 - t)",
            "2^-1",
            "-(-3)",
            "exp(-t)/(1+t)",
            "1e-300*t",
            "-2^t",
        ] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e.ast(), again.ast(), "{src} -> {e}");
        }
    }

    #[test]
    fn zero_detection() {
        assert!(parse("0").unwrap().is_identically_zero());
        assert!(parse("0.0").unwrap().is_identically_zero());
        assert!(!parse("0*t").unwrap().is_identically_zero());
    }
}
