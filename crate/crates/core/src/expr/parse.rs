//! Recursive-descent parser with byte offsets in every error.

use super::{BinOp, Exponent, Expr, ExprError, Func, Scope};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num { value: f64, text: String },
    Ident(String),
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn describe(token: Option<&(Token, usize)>) -> String {
    match token {
        None => "end of input".to_string(),
        Some((t, _)) => match t {
            Token::Num { text, .. } => format!("number `{text}`"),
            Token::Ident(name) => format!("`{name}`"),
            Token::Prime => "`'`".into(),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
        },
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'\'' => Some(Token::Prime),
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            b',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
            out.push((
                Token::Num {
                    value,
                    text: text.to_string(),
                },
                start,
            ));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Token::Ident(src[start..i].to_string()), start));
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(syntax(start, format!("unexpected character `{ch}`")));
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    scope: &'a Scope,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn unexpected(&self, expected: &str) -> ExprError {
        syntax(
            self.offset(),
            format!(
                "expected {expected}, found {}",
                describe(self.tokens.get(self.pos))
            ),
        )
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinOp::Add,
                Some(Token::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::binary(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinOp::Mul,
                Some(Token::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&Token::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let mut base = self.atom()?;
        while self.eat(&Token::Caret) {
            base = Expr::Pow(Box::new(base), self.exponent()?);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Exponent, ExprError> {
        let paren = self.eat(&Token::LParen);
        let negative = self.eat(&Token::Minus);
        let (value, text) = match self.peek() {
            Some(Token::Num { value, text }) => (*value, text.clone()),
            _ => return Err(self.unexpected("a numeric exponent")),
        };
        let offset = self.offset();
        self.pos += 1;
        if paren && !self.eat(&Token::RParen) {
            return Err(self.unexpected("`)`"));
        }
        let sign = if negative { -1.0 } else { 1.0 };
        if text.contains(['.', 'e', 'E']) {
            return Ok(Exponent::Real(sign * value));
        }
        let magnitude: i32 = text
            .parse()
            .map_err(|_| syntax(offset, format!("integer exponent `{text}` out of range")))?;
        Ok(Exponent::Int(if negative { -magnitude } else { magnitude }))
    }

    fn call_argument(&mut self, name: &str, offset: usize) -> Result<Expr, ExprError> {
        if !self.eat(&Token::LParen) {
            return Err(self.unexpected(&format!("`(` after `{name}`")));
        }
        if self.peek() == Some(&Token::RParen) {
            return Err(ExprError::Arity {
                name: name.to_string(),
                offset,
            });
        }
        let arg = self.sum()?;
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(arg)
            }
            Some(Token::Comma) => Err(ExprError::Arity {
                name: name.to_string(),
                offset,
            }),
            _ => Err(self.unexpected("`)`")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        let token = match self.tokens.get(self.pos) {
            Some((t, _)) => t.clone(),
            None => return Err(self.unexpected("an expression")),
        };
        match token {
            Token::Num { value, .. } => {
                self.pos += 1;
                Ok(Expr::Lit(value))
            }
            Token::LParen => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(&Token::RParen) {
                    return Err(self.unexpected("`)`"));
                }
                Ok(inner)
            }
            Token::Ident(name) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    let arg = self.call_argument(&name, offset)?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if let Some(index) = self.scope.slots.iter().position(|s| *s == name) {
                    let mut derivative: u8 = 0;
                    while self.eat(&Token::Prime) {
                        derivative = derivative
                            .checked_add(1)
                            .ok_or_else(|| syntax(offset, "too many derivative marks"))?;
                    }
                    let arg = self.call_argument(&name, offset)?;
                    return Ok(Expr::Slot {
                        index,
                        name,
                        derivative,
                        arg: Box::new(arg),
                    });
                }
                if let Some(index) = self.scope.coords.iter().position(|s| *s == name) {
                    return Ok(Expr::Coord { index, name });
                }
                if let Some(index) = self.scope.params.iter().position(|s| *s == name) {
                    return Ok(Expr::Param { index, name });
                }
                Err(ExprError::UnknownIdentifier { name, offset })
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Parses `src` against `scope`.
pub fn parse(src: &str, scope: &Scope) -> Result<Expr, ExprError> {
    let tokens = lex(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: src.len(),
        scope,
    };
    let expr = parser.sum()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(expr)
}
