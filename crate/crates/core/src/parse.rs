//! Infix expression parser.
//!
//! Precedence, tightest first: `^`, unary minus, `* /`, `+ -`. All binary
//! operators are left-associative. Functions use call syntax, `t` is time
//! unless a state variable of that name exists.

use thiserror::Error;

use crate::expr::{BinaryOp, Expr, UnaryOp, VarNames};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: unexpected end of input")]
    UnexpectedEnd { position: usize },
    #[error("syntax error at position {position}: unexpected '{found}'")]
    UnexpectedToken { position: usize, found: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("invalid number '{text}' at position {position}")]
    InvalidNumber { position: usize, text: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::UnexpectedEnd { position }
            | ParseError::UnexpectedToken { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::InvalidNumber { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    position: usize,
}

fn tokenize(text: &str) -> Result<(Vec<Spanned>, usize), ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let token = match c {
            '+' | '-' | '*' | '/' | '^' => {
                i += 1;
                Token::Op(c)
            }
            '·' => {
                i += 1;
                Token::Op('*')
            }
            '(' => {
                i += 1;
                Token::LParen
            }
            ')' => {
                i += 1;
                Token::RParen
            }
            c if c.is_ascii_digit() || c == '.' => {
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
                let literal: String = chars[start..i].iter().collect();
                match literal.parse::<f64>() {
                    Ok(v) if v.is_finite() => Token::Number(v),
                    _ => {
                        return Err(ParseError::InvalidNumber {
                            position: start,
                            text: literal,
                        })
                    }
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Token::Ident(chars[start..i].iter().collect())
            }
            other => {
                return Err(ParseError::UnexpectedToken {
                    position: start,
                    found: other.to_string(),
                })
            }
        };
        tokens.push(Spanned {
            token,
            position: start,
        });
    }
    Ok((tokens, chars.len()))
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    end: usize,
    names: &'a VarNames,
}

pub(crate) fn parse(text: &str, names: &VarNames) -> Result<Expr, ParseError> {
    let (tokens, end) = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
        names,
    };
    let expr = parser.sum()?;
    if let Some(extra) = parser.tokens.get(parser.pos) {
        return Err(unexpected(extra));
    }
    Ok(expr)
}

fn unexpected(s: &Spanned) -> ParseError {
    let found = match &s.token {
        Token::Number(v) => v.to_string(),
        Token::Ident(name) => name.clone(),
        Token::Op(c) => c.to_string(),
        Token::LParen => "(".into(),
        Token::RParen => ")".into(),
    };
    ParseError::UnexpectedToken {
        position: s.position,
        found,
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn next(&mut self) -> Result<Spanned, ParseError> {
        let s = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or(ParseError::UnexpectedEnd { position: self.end })?;
        self.pos += 1;
        Ok(s)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let s = self.next()?;
        if s.token == Token::RParen {
            Ok(())
        } else {
            Err(unexpected(&s))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.signed()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.signed()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn signed(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                let operand = self.signed()?;
                Ok(negate(operand))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.signed()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        while let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let rhs = self.exponent()?;
            lhs = Expr::pow(lhs, rhs);
        }
        Ok(lhs)
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(negate(self.exponent()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let s = self.next()?;
        match s.token {
            Token::Number(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(ref name) => {
                if let Some(index) = self.names.index_of(name) {
                    return Ok(Expr::Var(index));
                }
                if let Some(op) = UnaryOp::from_name(name) {
                    if self.peek() == Some(&Token::LParen) {
                        self.pos += 1;
                        let arg = self.sum()?;
                        self.expect_rparen()?;
                        return Ok(Expr::unary(op, arg));
                    }
                }
                if name == "t" {
                    return Ok(Expr::Time);
                }
                Err(ParseError::UnknownIdentifier {
                    position: s.position,
                    name: name.clone(),
                })
            }
            _ => Err(unexpected(&s)),
        }
    }
}

/// Negated literals fold into constants; anything else becomes `-1 * e`.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(-v),
        other => Expr::mul(Expr::Const(-1.0), other),
    }
}
