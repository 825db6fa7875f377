//! Infix text form.
//!
//! Variables are `v1..vN`, shared parameters `CS<j>`, parameters partially
//! shared on category `c` are `C<c>_<j>` (1-based `c`), non-shared parameters
//! `CI<j>`. Precedence is `^` over `*`,`/` over `+`,`-`; `+ - * /` associate to
//! the left and `^` to the right. Functions are written `name(arg)`.

use std::collections::HashMap;
use std::fmt;

use super::{BinaryOp, Expression, Node, ParamKind, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at position {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

pub(super) fn render(expr: &Expression) -> String {
    let tokens: Vec<String> = (0..expr.n_terminals()).map(|t| expr.terminal_token(t)).collect();
    let mut out = String::new();
    write_node(expr.root(), &tokens, &mut out);
    out
}

fn write_node(node: &Node, tokens: &[String], out: &mut String) {
    match node {
        Node::Binary { op, left, right } => {
            write_operand(*op, left, false, tokens, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            write_operand(*op, right, true, tokens, out);
        }
        Node::Unary { op, child } => {
            out.push_str(op.name());
            out.push('(');
            write_node(child, tokens, out);
            out.push(')');
        }
        Node::Variable(i) => {
            out.push('v');
            out.push_str(&(i + 1).to_string());
        }
        Node::Literal(v) => out.push_str(&format_literal(*v)),
        Node::Param { id, .. } => out.push_str(&tokens[*id]),
    }
}

fn write_operand(parent: BinaryOp, child: &Node, is_right: bool, tokens: &[String], out: &mut String) {
    let paren = match child {
        Node::Binary { op, .. } => {
            if parent == BinaryOp::Pow || *op == BinaryOp::Pow {
                true
            } else if is_right {
                op.precedence() <= parent.precedence()
            } else {
                op.precedence() < parent.precedence()
            }
        }
        Node::Literal(v) => v.is_sign_negative(),
        _ => false,
    };
    if paren {
        out.push('(');
        write_node(child, tokens, out);
        out.push(')');
    } else {
        write_node(child, tokens, out);
    }
}

fn format_literal(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() > 20 {
        format!("{v:e}")
    } else {
        plain
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

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let token = if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
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
            let value = lexeme.parse().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number '{lexeme}'"),
            })?;
            Token::Number(value)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Token::Ident(text[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Token::Op(c as char),
                b'(' => Token::LParen,
                b')' => Token::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError {
                        position: start,
                        message: format!("unexpected character '{ch}'"),
                    });
                }
            }
        };
        tokens.push((token, start));
    }
    Ok(tokens)
}

enum Leaf {
    Variable(usize),
    Param(ParamKind, usize),
}

fn classify_ident(name: &str) -> Option<Leaf> {
    fn index(digits: &str) -> Option<usize> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok().filter(|&n: &usize| n >= 1)
    }
    if let Some(rest) = name.strip_prefix('v') {
        return index(rest).map(|n| Leaf::Variable(n - 1));
    }
    if let Some(rest) = name.strip_prefix("CS") {
        return index(rest).map(|j| Leaf::Param(ParamKind::Shared, j));
    }
    if let Some(rest) = name.strip_prefix("CI") {
        return index(rest).map(|j| Leaf::Param(ParamKind::NonShared, j));
    }
    if let Some(rest) = name.strip_prefix('C') {
        let (cat, j) = rest.split_once('_')?;
        return Some(Leaf::Param(ParamKind::Partial(index(cat)? - 1), index(j)?));
    }
    None
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    n_categories: usize,
    aliases: HashMap<(ParamKind, usize), usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.position(),
            message: message.into(),
        })
    }

    fn expression(&mut self) -> Result<Node, ParseError> {
        let mut node = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            node = Node::binary(op, node, rhs);
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut node = self.power()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.power()?;
            node = Node::binary(op, node, rhs);
        }
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.signed()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.power()?;
            return Ok(Node::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn signed(&mut self) -> Result<Node, ParseError> {
        if let Some(Token::Op('-')) = self.peek() {
            if let Some((Token::Number(v), _)) = self.tokens.get(self.pos + 1) {
                let v = *v;
                self.pos += 2;
                return Ok(Node::Literal(-v));
            }
            return self.error("unary minus is only supported before a number");
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let Some((token, at)) = self.tokens.get(self.pos).cloned() else {
            return self.error("unexpected end of input");
        };
        match token {
            Token::Number(v) => {
                self.pos += 1;
                Ok(Node::Literal(v))
            }
            Token::LParen => {
                self.pos += 1;
                let inner = self.expression()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.pos += 1;
                let called = matches!(self.peek(), Some(Token::LParen));
                if let Some(op) = UnaryOp::from_name(&name) {
                    if !called {
                        return Err(ParseError {
                            position: at,
                            message: format!("function '{name}' takes one argument in parentheses"),
                        });
                    }
                    self.pos += 1;
                    let arg = self.expression()?;
                    self.expect_rparen()?;
                    return Ok(Node::unary(op, arg));
                }
                let leaf = classify_ident(&name).ok_or_else(|| ParseError {
                    position: at,
                    message: format!("unknown token '{name}'"),
                })?;
                if called {
                    return Err(ParseError {
                        position: at,
                        message: format!("'{name}' is not a function"),
                    });
                }
                match leaf {
                    Leaf::Variable(i) => Ok(Node::Variable(i)),
                    Leaf::Param(kind, j) => {
                        if let ParamKind::Partial(c) = kind {
                            if c >= self.n_categories {
                                return Err(ParseError {
                                    position: at,
                                    message: format!(
                                        "'{name}' refers to category {} but there are only {}",
                                        c + 1,
                                        self.n_categories
                                    ),
                                });
                            }
                        }
                        let next = self.aliases.len();
                        let id = *self.aliases.entry((kind, j)).or_insert(next);
                        Ok(Node::Param { kind, id })
                    }
                }
            }
            Token::RParen => self.error("unexpected ')'"),
            Token::Op(c) => self.error(format!("unexpected operator '{c}'")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error("expected ')'"),
        }
    }
}

pub(super) fn parse(text: &str, n_categories: usize) -> Result<Expression, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        n_categories,
        aliases: HashMap::new(),
    };
    let root = parser.expression()?;
    if parser.pos < parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    // ids come from distinct tokens, so kinds are always consistent
    Ok(Expression::new(root).expect("parser assigns one kind per id"))
}
