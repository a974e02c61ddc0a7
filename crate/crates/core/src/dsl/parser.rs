//! Hand-written lexer and recursive-descent parser.
//!
//! ```text
//! program   = { statement [ ";" ] } ;
//! statement = "load" string "as" ident
//!           | "scale" ident number
//!           | "place" ident "next_to" ident vector
//!           | "move" ident "to" vector
//!           | "physics" ident number
//!           | "destroy_all"
//!           | "primitive" shape "as" ident
//!           | "attach" ident "to" joint
//!           | "repeat" integer "{" { statement [ ";" ] } "}" ;
//! vector    = "(" number "," number "," number ")" ;
//! shape     = "cube" | "sphere" | "cylinder" | "plane" ;
//! ident     = /[a-z_][a-z0-9_]{0,31}/ ;
//! joint     = /[A-Za-z_][A-Za-z0-9_]*/ ;
//! number    = /[+-]?[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?/ ;
//! string    = '"' { char | '\"' | '\\' | '\n' } '"' ;
//! ```
//!
//! `#` and `//` start a comment that runs to the end of the line.

use thiserror::Error;

use super::ast::{Ident, Node, Program, Span, Statement};
use crate::math::Vec3;
use crate::scene::PrimitiveShape;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    /// What the parser was looking for, when it knows.
    pub expected: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
    end_line: u32,
    end_col: u32,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
        expected: None,
    };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, line: &mut u32, col: &mut u32| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        let tok = match c {
            '(' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::LParen
            }
            ')' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::RParen
            }
            '{' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::LBrace
            }
            '}' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::RBrace
            }
            ',' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::Comma
            }
            ';' => {
                advance(1, &mut i, &mut line, &mut col);
                Tok::Semi
            }
            '"' => {
                advance(1, &mut i, &mut line, &mut col);
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(start_line, start_col, "unterminated string".into())),
                        Some('"') => {
                            advance(1, &mut i, &mut line, &mut col);
                            break;
                        }
                        Some('\\') => match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                advance(2, &mut i, &mut line, &mut col);
                            }
                            Some('n') => {
                                s.push('\n');
                                advance(2, &mut i, &mut line, &mut col);
                            }
                            _ => return Err(err(line, col, "invalid escape in string".into())),
                        },
                        Some(&ch) => {
                            s.push(ch);
                            advance(1, &mut i, &mut line, &mut col);
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                let mut j = i;
                if chars[j] == '-' || chars[j] == '+' {
                    j += 1;
                }
                let digits_start = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == digits_start {
                    return Err(err(line, col, format!("unexpected character `{c}`")));
                }
                if j < chars.len() && chars[j] == '.' {
                    let f = j + 1;
                    let mut k = f;
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    if k == f {
                        return Err(err(line, col + (j - start) as u32, "expected digits after `.`".into()));
                    }
                    j = k;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '-' || chars[k] == '+') {
                        k += 1;
                    }
                    let e = k;
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    if k == e {
                        return Err(err(line, col + (j - start) as u32, "expected exponent digits".into()));
                    }
                    j = k;
                }
                let text: String = chars[start..j].iter().collect();
                advance(j - start, &mut i, &mut line, &mut col);
                Tok::Num(text)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let text: String = chars[start..j].iter().collect();
                advance(j - start, &mut i, &mut line, &mut col);
                Tok::Word(text)
            }
            other => return Err(err(line, col, format!("unexpected character `{other}`"))),
        };
        out.push(Token {
            tok,
            line: start_line,
            col: start_col,
            end_line: line,
            end_col: col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        end_line: line,
        end_col: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, expected: &str) -> ParseError {
        ParseError {
            line: t.line,
            column: t.col,
            message: format!("expected {expected}, found {}", t.tok.describe()),
            expected: Some(expected.to_owned()),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.error_at(self.peek(), what))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Token, ParseError> {
        match &self.peek().tok {
            Tok::Word(w) if w == kw => Ok(self.bump()),
            _ => Err(self.error_at(self.peek(), &format!("`{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Word(w) => {
                let id = Ident::new(w.clone()).map_err(|m| ParseError {
                    line: t.line,
                    column: t.col,
                    message: m,
                    expected: Some("binding name".into()),
                })?;
                self.bump();
                Ok(id)
            }
            _ => Err(self.error_at(&t, "binding name")),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(n) => {
                let v: f64 = n.parse().map_err(|_| self.error_at(&t, "number"))?;
                if !v.is_finite() {
                    return Err(ParseError {
                        line: t.line,
                        column: t.col,
                        message: format!("number {n} is out of range"),
                        expected: Some("finite number".into()),
                    });
                }
                self.bump();
                Ok(v)
            }
            _ => Err(self.error_at(&t, "number")),
        }
    }

    fn integer(&mut self) -> Result<u32, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(n) if n.chars().all(|c| c.is_ascii_digit()) => {
                let v = n.parse().map_err(|_| ParseError {
                    line: t.line,
                    column: t.col,
                    message: format!("repeat count {n} is too large"),
                    expected: Some("repeat count".into()),
                })?;
                self.bump();
                Ok(v)
            }
            _ => Err(self.error_at(&t, "repeat count")),
        }
    }

    fn vector(&mut self) -> Result<Vec3, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let x = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let y = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let z = self.number()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Vec3::new(x, y, z))
    }

    fn block(&mut self, terminator: &Tok) -> Result<Vec<Node>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.peek().tok == Tok::Semi {
                self.bump();
            }
            if &self.peek().tok == terminator {
                return Ok(out);
            }
            if self.peek().tok == Tok::Eof {
                return Err(self.error_at(self.peek(), "`}`"));
            }
            out.push(self.statement()?);
        }
    }

    fn statement(&mut self) -> Result<Node, ParseError> {
        let head = self.peek().clone();
        let Tok::Word(word) = &head.tok else {
            return Err(self.error_at(&head, "statement"));
        };
        self.bump();
        let stmt = match word.as_str() {
            "load" => {
                let t = self.peek().clone();
                let query = match &t.tok {
                    Tok::Str(s) => {
                        self.bump();
                        s.clone()
                    }
                    _ => return Err(self.error_at(&t, "quoted model name")),
                };
                self.keyword("as")?;
                Statement::Load {
                    query,
                    binding: self.ident()?,
                }
            }
            "scale" => Statement::Scale {
                binding: self.ident()?,
                target: self.number()?,
            },
            "place" => {
                let binding = self.ident()?;
                self.keyword("next_to")?;
                let anchor = self.ident()?;
                Statement::Place {
                    binding,
                    anchor,
                    direction: self.vector()?,
                }
            }
            "move" => {
                let binding = self.ident()?;
                self.keyword("to")?;
                Statement::Move {
                    binding,
                    position: self.vector()?,
                }
            }
            "physics" => Statement::Physics {
                binding: self.ident()?,
                mass: self.number()?,
            },
            "destroy_all" => Statement::DestroyAll,
            "primitive" => {
                let t = self.peek().clone();
                let shape = match &t.tok {
                    Tok::Word(w) => PrimitiveShape::from_keyword(w),
                    _ => None,
                }
                .ok_or_else(|| self.error_at(&t, "primitive shape (cube, sphere, cylinder, plane)"))?;
                self.bump();
                self.keyword("as")?;
                Statement::Primitive {
                    shape,
                    binding: self.ident()?,
                }
            }
            "attach" => {
                let binding = self.ident()?;
                self.keyword("to")?;
                let t = self.peek().clone();
                let joint = match &t.tok {
                    Tok::Word(w) => {
                        self.bump();
                        w.clone()
                    }
                    _ => return Err(self.error_at(&t, "joint name")),
                };
                Statement::Attach { binding, joint }
            }
            "repeat" => {
                let count = self.integer()?;
                self.expect(Tok::LBrace, "`{`")?;
                let body = self.block(&Tok::RBrace)?;
                self.expect(Tok::RBrace, "`}`")?;
                Statement::Repeat { count, body }
            }
            _ => {
                return Err(ParseError {
                    line: head.line,
                    column: head.col,
                    message: format!("unknown statement `{word}`"),
                    expected: Some("statement".into()),
                })
            }
        };
        let last = &self.toks[self.pos.saturating_sub(1)];
        Ok(Node {
            stmt,
            span: Span {
                start_line: head.line,
                start_col: head.col,
                end_line: last.end_line,
                end_col: last.end_col,
            },
        })
    }
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let statements = p.block(&Tok::Eof)?;
    Ok(Program {
        statements,
        source: Some(text.to_owned()),
    })
}
