use std::fmt;

use super::{is_identifier, Atom, AtomKind, ParseError, RESERVED};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Globally,
    Not,
    Arrow,
    Eventually,
    /// `F[<=`, the opening of a bounded eventuality.
    EventuallyWithin,
    Int(u32),
    CloseBracket,
    Until,
    And,
    Or,
    LParen,
    RParen,
    Atom(Atom),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Globally => f.write_str("`G`"),
            TokenKind::Not => f.write_str("`!`"),
            TokenKind::Arrow => f.write_str("`->`"),
            TokenKind::Eventually => f.write_str("`F`"),
            TokenKind::EventuallyWithin => f.write_str("`F[<=`"),
            TokenKind::Int(n) => write!(f, "integer {n}"),
            TokenKind::CloseBracket => f.write_str("`]`"),
            TokenKind::Until => f.write_str("`U`"),
            TokenKind::And => f.write_str("`AND`"),
            TokenKind::Or => f.write_str("`OR`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Atom(a) => write!(f, "atom `{a}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub offset: usize,
}

/// Splits a policy expression into tokens. Whitespace only separates tokens;
/// `tool:`, `action:` and `decision:` bind to the identifier that follows
/// them with no space in between.
pub fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'!' => {
                i += 1;
                TokenKind::Not
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b']' => {
                i += 1;
                TokenKind::CloseBracket
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                TokenKind::Arrow
            }
            b'0'..=b'9' => {
                let end = scan(bytes, i, |b| b.is_ascii_digit());
                let digits = &input[i..end];
                if digits.starts_with('0') {
                    return Err(ParseError::at(input, i, "a positive integer without leading zeros", format!("`{digits}`")));
                }
                let n = digits.parse::<u32>().map_err(|_| {
                    ParseError::at(input, i, "an integer that fits in 32 bits", format!("`{digits}`"))
                })?;
                i = end;
                TokenKind::Int(n)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let end = scan(bytes, i, |b| b.is_ascii_alphanumeric() || b == b'_');
                let word = &input[i..end];
                i = end;
                if bytes.get(i) == Some(&b':') {
                    let kind = AtomKind::from_prefix(word).ok_or_else(|| {
                        ParseError::at(input, start, "`tool:`, `action:` or `decision:` prefix", format!("`{word}:`"))
                    })?;
                    let name_end = scan(bytes, i + 1, |b| b.is_ascii_alphanumeric() || b == b'_');
                    let name = &input[i + 1..name_end];
                    if !is_identifier(name) {
                        return Err(ParseError::at(input, i + 1, format!("a name after `{word}:`"), found_at(input, i + 1)));
                    }
                    i = name_end;
                    TokenKind::Atom(Atom {
                        kind,
                        name: name.to_string(),
                    })
                } else if word == "F" && input[i..].starts_with('[') {
                    if !input[i..].starts_with("[<=") {
                        return Err(ParseError::at(input, i, "`[<=` after `F`", found_at(input, i)));
                    }
                    i += 3;
                    TokenKind::EventuallyWithin
                } else {
                    match word {
                        "G" => TokenKind::Globally,
                        "F" => TokenKind::Eventually,
                        "U" => TokenKind::Until,
                        "AND" => TokenKind::And,
                        "OR" => TokenKind::Or,
                        _ => {
                            debug_assert!(!RESERVED.contains(&word));
                            TokenKind::Atom(Atom {
                                kind: AtomKind::Tag,
                                name: word.to_string(),
                            })
                        }
                    }
                }
            }
            _ => {
                return Err(ParseError::at(input, i, "a policy token", found_at(input, i)));
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(tokens)
}

fn scan(bytes: &[u8], from: usize, accept: impl Fn(u8) -> bool) -> usize {
    let mut j = from;
    while j < bytes.len() && accept(bytes[j]) {
        j += 1;
    }
    j
}

fn found_at(input: &str, offset: usize) -> String {
    match input[offset..].chars().next() {
        Some(c) => format!("`{c}`"),
        None => "end of input".to_string(),
    }
}
