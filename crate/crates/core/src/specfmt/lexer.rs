//! S-expression tokenizer for VNN-LIB and counterexample files.
//!
//! The token set is deliberately small: parentheses, symbols and numeric
//! literals. `;` starts a comment that runs to the end of the line. Quoted
//! symbols (`|...|`) and string literals (`"..."`) are recognised so that they
//! can be reported precisely by the parser, but no VNN-LIB construct we accept
//! uses them.

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    LParen,
    RParen,
    Symbol(String),
    /// Numeric literal; `text` is kept verbatim for diagnostics and
    /// re-serialisation.
    Number {
        value: f64,
        text: String,
    },
    /// A `"..."` literal. Never valid in the accepted grammar.
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

impl Token {
    /// The surface text of the token.
    pub fn text(&self) -> &str {
        match &self.kind {
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::Symbol(s) | TokenKind::Str(s) => s,
            TokenKind::Number { text, .. } => text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("{pos}: unterminated {what}")]
    UnterminatedToken { what: &'static str, pos: Pos },
    #[error("{pos}: invalid character {ch:?}")]
    InvalidCharacter { ch: char, pos: Pos },
}

impl LexError {
    pub fn pos(&self) -> Pos {
        match self {
            LexError::UnterminatedToken { pos, .. } | LexError::InvalidCharacter { pos, .. } => *pos,
        }
    }
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/:".contains(c)
}

/// Returns true when `s` is a decimal literal of the form
/// `[+-]? (digits [. digits?] | . digits) ([eE] [+-]? digits)?`.
pub fn is_numeric_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { chars: text.chars().peekable(), pos: Pos { line: 1, column: 1 } }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }
}

/// Splits `text` into tokens.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor::new(text);
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let pos = cur.pos;
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            ';' => {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' => {
                cur.bump();
                tokens.push(Token { kind: TokenKind::LParen, pos });
            }
            ')' => {
                cur.bump();
                tokens.push(Token { kind: TokenKind::RParen, pos });
            }
            '|' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('|') => break,
                        Some(c) => s.push(c),
                        None => return Err(LexError::UnterminatedToken { what: "quoted symbol", pos }),
                    }
                }
                tokens.push(Token { kind: TokenKind::Symbol(s), pos });
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        // SMT-LIB escapes a quote by doubling it.
                        Some('"') if cur.peek() == Some('"') => {
                            cur.bump();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(LexError::UnterminatedToken { what: "string literal", pos }),
                    }
                }
                tokens.push(Token { kind: TokenKind::Str(s), pos });
            }
            c if is_symbol_char(c) => {
                let mut s = String::new();
                while let Some(c) = cur.peek() {
                    if is_symbol_char(c) {
                        s.push(c);
                        cur.bump();
                    } else if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    } else {
                        return Err(LexError::InvalidCharacter { ch: c, pos: cur.pos });
                    }
                }
                let kind = if is_numeric_literal(&s) {
                    // The literal grammar above is a subset of what `f64::from_str` accepts.
                    let value = s.parse::<f64>().expect("validated numeric literal");
                    TokenKind::Number { value, text: s }
                } else {
                    TokenKind::Symbol(s)
                };
                tokens.push(Token { kind, pos });
            }
            other => return Err(LexError::InvalidCharacter { ch: other, pos }),
        }
    }
    Ok(tokens)
}
