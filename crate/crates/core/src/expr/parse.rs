use std::sync::Arc;

use super::{add, div, mul, neg, pow, sub, ExprError, Expression, Node, MAX_EXPONENT};

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

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax { offset, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let token = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
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
                let lexeme = &text[start..i];
                let value: f64 = lexeme.parse().map_err(|_| syntax(start, format!("malformed number `{lexeme}`")))?;
                tokens.push(Spanned { token: Token::Number(value), offset: start });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Spanned { token: Token::Ident(text[start..i].to_string()), offset: start });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        i += 1;
        tokens.push(Spanned { token, offset: start });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    end: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |s| s.offset)
    }

    fn bump(&mut self) -> Option<Spanned> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = add(lhs, self.term()?);
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = mul(lhs, self.unary()?);
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := ('-' | '+') unary | power
    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.bump();
                Ok(neg(self.unary()?))
            }
            Some(Token::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := primary ('^' integer)?
    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.bump();
        let exponent = self.integer_exponent()?;
        if self.peek() == Some(&Token::Caret) {
            return Err(syntax(self.offset(), "chained exponent; add parentheses"));
        }
        Ok(pow(base, exponent))
    }

    fn integer_exponent(&mut self) -> Result<i32, ExprError> {
        let start = self.offset();
        let parenthesized = self.peek() == Some(&Token::LParen);
        if parenthesized {
            self.bump();
        }
        let mut sign = 1i64;
        match self.peek() {
            Some(Token::Minus) => {
                sign = -1;
                self.bump();
            }
            Some(Token::Plus) => {
                self.bump();
            }
            _ => {}
        }
        let at = self.offset();
        let value = match self.bump().map(|s| s.token) {
            Some(Token::Number(v)) => v,
            _ => return Err(syntax(at, "expected integer exponent")),
        };
        if value.fract() != 0.0 || !value.is_finite() {
            return Err(syntax(at, "exponent must be an integer"));
        }
        if parenthesized {
            let close = self.offset();
            if self.bump().map(|s| s.token) != Some(Token::RParen) {
                return Err(syntax(close, "expected `)`"));
            }
        }
        let exponent = if value > 1e9 { i64::MAX } else { sign * value as i64 };
        if exponent.abs() > MAX_EXPONENT as i64 {
            return Err(ExprError::ExponentOutOfRange { exponent, offset: start });
        }
        Ok(exponent as i32)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let at = self.offset();
        match self.bump() {
            Some(Spanned { token: Token::Number(v), .. }) => Ok(Node::Const(v)),
            Some(Spanned { token: Token::Ident(name), offset }) => self
                .vars
                .iter()
                .position(|v| *v == name)
                .map(Node::Var)
                .ok_or(ExprError::UnknownIdentifier { name, offset }),
            Some(Spanned { token: Token::LParen, .. }) => {
                let inner = self.expr()?;
                let close = self.offset();
                match self.bump().map(|s| s.token) {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(syntax(close, "expected `)`")),
                }
            }
            Some(_) => Err(syntax(at, "expected number, identifier or `(`")),
            None => Err(syntax(at, "unexpected end of input")),
        }
    }
}

/// Parses infix `text` over the declared variables.
///
/// Precedence, from tightest: `^` (integer exponents only), unary minus,
/// `*` `/`, then `+` `-`. Whitespace is ignored.
pub fn parse(text: &str, vars: &[&str]) -> Result<Expression, ExprError> {
    let declared: Arc<[String]> = vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().into();
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut parser = Parser { tokens, pos: 0, end: text.len(), vars: &declared };
    let root = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(syntax(parser.offset(), "unexpected trailing input"));
    }
    Ok(Expression::from_parts(declared, root))
}
