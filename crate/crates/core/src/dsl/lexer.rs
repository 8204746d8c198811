use thiserror::Error;

use super::token::{SourceSpan, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: unexpected character {found:?}")]
pub struct LexError {
    pub span: SourceSpan,
    pub found: char,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Split model source into tokens, comments included.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let (start, line, column) = (cur.pos, cur.line, cur.column);
        let kind = match c {
            '#' => {
                cur.bump();
                cur.eat_while(|c| c != '\n');
                let span = SourceSpan::new(line, column, start, cur.pos - start);
                tokens.push(Token {
                    kind: TokenKind::Comment,
                    text: source[start + 1..cur.pos].to_string(),
                    span,
                });
                continue;
            }
            c if is_ident_start(c) => {
                cur.eat_while(is_ident_continue);
                match &source[start..cur.pos] {
                    "model" => TokenKind::KeywordModel,
                    "for" => TokenKind::KeywordFor,
                    "in" => TokenKind::KeywordIn,
                    _ => TokenKind::Identifier,
                }
            }
            c if c.is_ascii_digit()
                || (c == '.' && cur.peek_nth(1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                lex_number(&mut cur);
                TokenKind::Number
            }
            '<' if cur.peek_nth(1) == Some('-') => {
                cur.bump();
                cur.bump();
                TokenKind::AssignArrow
            }
            _ => {
                let kind = match c {
                    '~' => TokenKind::Tilde,
                    '=' => TokenKind::Equals,
                    '+' => TokenKind::Plus,
                    '-' => TokenKind::Minus,
                    '*' => TokenKind::Star,
                    '/' => TokenKind::Slash,
                    '^' => TokenKind::Caret,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    ',' => TokenKind::Comma,
                    ':' => TokenKind::Colon,
                    other => {
                        return Err(LexError {
                            span: SourceSpan::new(line, column, start, other.len_utf8()),
                            found: other,
                        })
                    }
                };
                cur.bump();
                kind
            }
        };
        tokens.push(Token {
            kind,
            text: source[start..cur.pos].to_string(),
            span: SourceSpan::new(line, column, start, cur.pos - start),
        });
    }
    Ok(tokens)
}

// digits [. digits] [(e|E) [+|-] digits]; the exponent is only consumed when
// at least one digit follows it.
fn lex_number(cur: &mut Cursor<'_>) {
    cur.eat_while(|c| c.is_ascii_digit());
    if cur.peek() == Some('.') {
        cur.bump();
        cur.eat_while(|c| c.is_ascii_digit());
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = matches!(cur.peek_nth(1), Some('+' | '-'));
        let digit_at = if sign { 2 } else { 1 };
        if cur.peek_nth(digit_at).is_some_and(|d| d.is_ascii_digit()) {
            for _ in 0..digit_at {
                cur.bump();
            }
            cur.eat_while(|c| c.is_ascii_digit());
        }
    }
}
