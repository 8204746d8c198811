use std::fmt;

use serde::Serialize;

/// Location of a token or syntax node in model source text.
///
/// `line` and `column` are 1-based (column counts characters). `offset` and
/// `length` are in bytes so `&source[offset..offset + length]` recovers the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub offset: usize,
    pub length: usize,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, offset: usize, length: usize) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self {
            line,
            column,
            offset,
            length,
        }
    }

    /// Span covering `self` through the end of `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        let end = (other.offset + other.length).max(self.offset + self.length);
        SourceSpan {
            length: end - self.offset,
            ..self
        }
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        Self::new(1, 1, 0, 0)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Number,
    Tilde,
    AssignArrow,
    Equals,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    KeywordModel,
    KeywordFor,
    KeywordIn,
    Comment,
}

impl TokenKind {
    pub fn describe(self) -> &'static str {
        match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Number => "number",
            TokenKind::Tilde => "`~`",
            TokenKind::AssignArrow => "`<-`",
            TokenKind::Equals => "`=`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Caret => "`^`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::LBracket => "`[`",
            TokenKind::RBracket => "`]`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Comma => "`,`",
            TokenKind::Colon => "`:`",
            TokenKind::KeywordModel => "`model`",
            TokenKind::KeywordFor => "`for`",
            TokenKind::KeywordIn => "`in`",
            TokenKind::Comment => "comment",
        }
    }
}

/// A lexical token. For comments, `text` excludes the leading `#` while
/// `span` covers it.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: SourceSpan,
}

impl Token {
    pub fn is_trivia(&self) -> bool {
        self.kind == TokenKind::Comment
    }
}
