use super::lexer::{tokenize, Token, TokenKind};
use super::{Atom, ParseError, PolicyExpr};

/// Parses one policy expression. Boolean combinations must parenthesize
/// both operands; temporal operators do not nest.
pub fn parse(input: &str) -> Result<PolicyExpr, ParseError> {
    let tokens = tokenize(input)?;
    let mut p = Parser {
        input,
        tokens,
        pos: 0,
    };
    let expr = p.rule()?;
    if let Some(tok) = p.peek() {
        return Err(p.error_at(tok.offset, "end of input", tok.kind.to_string()));
    }
    Ok(expr)
}

struct Parser<'a> {
    input: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error_at(&self, offset: usize, expected: &str, found: String) -> ParseError {
        ParseError::at(self.input, offset, expected, found)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(tok) => self.error_at(tok.offset, expected, tok.kind.to_string()),
            None => self.error_at(self.input.len(), expected, "end of input".to_string()),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(tok) if tok.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Atom(a),
                ..
            }) => {
                let a = a.clone();
                self.pos += 1;
                Ok(a)
            }
            _ => Err(self.unexpected("an atom")),
        }
    }

    fn rule(&mut self) -> Result<PolicyExpr, ParseError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::LParen) => self.boolean(),
            Some(TokenKind::Globally) => {
                self.pos += 1;
                self.expect(TokenKind::Not, "`!` after `G`")?;
                Ok(PolicyExpr::Forbidden(self.atom()?))
            }
            Some(TokenKind::Atom(_)) => self.after_atom(),
            _ => Err(self.unexpected("`(`, `G` or an atom")),
        }
    }

    fn parenthesized(&mut self) -> Result<PolicyExpr, ParseError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let inner = self.rule()?;
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(inner)
    }

    fn boolean(&mut self) -> Result<PolicyExpr, ParseError> {
        let left = self.parenthesized()?;
        let and = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::And) => true,
            Some(TokenKind::Or) => false,
            _ => return Err(self.unexpected("`AND` or `OR`")),
        };
        self.pos += 1;
        let right = self.parenthesized()?;
        Ok(if and {
            PolicyExpr::and(left, right)
        } else {
            PolicyExpr::or(left, right)
        })
    }

    fn after_atom(&mut self) -> Result<PolicyExpr, ParseError> {
        let first = self.atom()?;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Until) => {
                self.pos += 1;
                Ok(PolicyExpr::Until {
                    holder: first,
                    release: self.atom()?,
                })
            }
            Some(TokenKind::Arrow) => {
                self.pos += 1;
                match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::Eventually) => self.chain(first),
                    Some(TokenKind::EventuallyWithin) => {
                        self.pos += 1;
                        let k = match self.peek() {
                            Some(Token {
                                kind: TokenKind::Int(k),
                                ..
                            }) => *k,
                            _ => return Err(self.unexpected("a step bound")),
                        };
                        self.pos += 1;
                        self.expect(TokenKind::CloseBracket, "`]`")?;
                        Ok(PolicyExpr::Bounded {
                            trigger: first,
                            obligation: self.atom()?,
                            k,
                        })
                    }
                    _ => Err(self.unexpected("`F` or `F[<=`")),
                }
            }
            _ => Err(self.unexpected("`U` or `->`")),
        }
    }

    fn chain(&mut self, trigger: Atom) -> Result<PolicyExpr, ParseError> {
        self.expect(TokenKind::Eventually, "`F`")?;
        let mut obligations = vec![self.atom()?];
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Arrow)) {
            self.pos += 1;
            self.expect(TokenKind::Eventually, "`F`")?;
            obligations.push(self.atom()?);
        }
        Ok(if obligations.len() == 1 {
            PolicyExpr::ImplFuture {
                trigger,
                obligation: obligations.pop().expect("one obligation"),
            }
        } else {
            PolicyExpr::Chain {
                trigger,
                obligations,
            }
        })
    }
}
