use super::expr::{self, Expr, Func};
use super::FluxError;

const REJECTED: &[&str] = &["abs", "sign", "min", "max", "floor", "ceil", "heaviside", "step"];

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
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, FluxError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), FluxError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            return Ok((Tok::Ident(name), start));
        }
        Err(FluxError::Syntax {
            offset: start,
            message: format!("unexpected character `{}`", c as char),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), FluxError> {
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(FluxError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| FluxError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    dimension: usize,
    src: &'a str,
}

/// Parse one scalar component over `dimension` variables.
pub fn parse_expr(src: &str, dimension: usize) -> Result<Expr, FluxError> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        dimension,
        src,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected("end of input")),
    }
}

impl Parser<'_> {
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

    fn unexpected(&self, wanted: &str) -> FluxError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            _ => {
                let off = self.offset();
                let rest = &self.src[off..];
                format!("`{}`", rest.chars().next().unwrap_or(' '))
            }
        };
        FluxError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, FluxError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FluxError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // A leading minus is accepted as negation of the whole factor, so
    // `-u^2` reads as `-(u^2)`.
    fn factor(&mut self) -> Result<Expr, FluxError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let off = self.offset();
        match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                let k = v as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(FluxError::Syntax {
                offset: off,
                message: "expected integer exponent".into(),
            }),
        }
    }

    fn base(&mut self) -> Result<Expr, FluxError> {
        let off = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.close_paren()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected("`(`"));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.close_paren()?;
                    return Ok(expr::call(f, arg));
                }
                if REJECTED.contains(&name.as_str()) {
                    return Err(FluxError::NonDifferentiable { name, offset: off });
                }
                self.variable(&name)
                    .ok_or(FluxError::UnknownIdentifier { name, offset: off })
            }
            _ => Err(self.unexpected("operand")),
        }
    }

    fn close_paren(&mut self) -> Result<(), FluxError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected("`)`"))
        }
    }

    fn variable(&self, name: &str) -> Option<Expr> {
        if self.dimension == 1 {
            return (name == "u").then_some(Expr::Var(0));
        }
        let idx: usize = name.strip_prefix('u')?.parse().ok()?;
        (1..=self.dimension).contains(&idx).then(|| Expr::Var(idx - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2*u^2 - u/4", 1).unwrap();
        assert_eq!(e.eval(&[2.0]), 1.0 + 8.0 - 0.5);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expr("-u^2", 1).unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
    }

    #[test]
    fn trailing_operator_offset() {
        match parse_expr("u^2/", 1) {
            Err(FluxError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_abs_and_unknown() {
        assert!(matches!(
            parse_expr("abs(u)", 1),
            Err(FluxError::NonDifferentiable { .. })
        ));
        assert!(matches!(
            parse_expr("u + x", 1),
            Err(FluxError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(parse_expr("u3", 2), Err(FluxError::UnknownIdentifier { .. })));
    }

    #[test]
    fn fractional_exponent_rejected() {
        assert!(matches!(
            parse_expr("u^1.5", 1),
            Err(FluxError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expr("2.5e-1*u1 + 1E2*u2", 2).unwrap();
        assert_eq!(e.eval(&[4.0, 0.01]), 2.0);
    }
}
