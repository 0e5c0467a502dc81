//! Tokenizer for COP-lite source text.

use crate::diag::Diagnostic;

/// A 1-based source position. Tokens and AST nodes carry one for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    FloatLiteral,
    StrLiteral,
    Punct,
    Eof,
}

/// One lexical token. For string literals the lexeme holds the decoded
/// content (escape sequences already resolved), not the source slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme == kw
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.lexeme == p
    }

    /// Human-readable description used in parse errors.
    pub fn describe(&self) -> String {
        match self.kind {
            TokenKind::Eof => "end of input".to_string(),
            TokenKind::StrLiteral => "string literal".to_string(),
            _ => format!("`{}`", self.lexeme),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "concept", "class", "reference", "in", "static", "if", "else", "return", "new", "context",
];

// `continue` is deliberately not a keyword: it is an ordinary method name
// (COP-lite has no loops, so there is no statement to collide with).

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            column: 1,
            tokens: Vec::new(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> u8 {
        self.src[self.pos]
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.src.get(self.pos + offset).copied()
    }

    fn advance(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        c
    }

    fn push(&mut self, kind: TokenKind, lexeme: String, span: Span) {
        self.tokens.push(Token { kind, lexeme, span });
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        while !self.at_end() {
            let span = Span::new(self.line, self.column);
            let c = self.peek();
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.advance();
                }
                b'/' if self.peek_at(1) == Some(b'/') => {
                    while !self.at_end() && self.peek() != b'\n' {
                        self.advance();
                    }
                }
                b'"' => self.string(span)?,
                b'0'..=b'9' => self.number(span),
                c if c == b'_' || c.is_ascii_alphabetic() => self.word(span),
                _ => self.punct(span)?,
            }
        }
        self.push(
            TokenKind::Eof,
            String::new(),
            Span::new(self.line, self.column),
        );
        Ok(self.tokens)
    }

    fn string(&mut self, span: Span) -> Result<(), Diagnostic> {
        self.advance(); // opening quote
        let mut value = String::new();
        loop {
            if self.at_end() || self.peek() == b'\n' {
                return Err(Diagnostic::new(span, "unterminated string literal"));
            }
            match self.advance() {
                b'"' => break,
                b'\\' => {
                    if self.at_end() {
                        return Err(Diagnostic::new(span, "unterminated string literal"));
                    }
                    let esc_span = Span::new(self.line, self.column - 1);
                    match self.advance() {
                        b'n' => value.push('\n'),
                        b'"' => value.push('"'),
                        b'\\' => value.push('\\'),
                        other => {
                            return Err(Diagnostic::new(
                                esc_span,
                                format!("unknown escape sequence `\\{}`", other as char),
                            ));
                        }
                    }
                }
                other => value.push(other as char),
            }
        }
        self.push(TokenKind::StrLiteral, value, span);
        Ok(())
    }

    fn number(&mut self, span: Span) {
        let mut text = String::new();
        while !self.at_end() && self.peek().is_ascii_digit() {
            text.push(self.advance() as char);
        }
        // A dot starts a fraction only when followed by a digit, so that
        // `42.foo` still lexes as integer, dot, identifier.
        if !self.at_end()
            && self.peek() == b'.'
            && self.peek_at(1).is_some_and(|c| c.is_ascii_digit())
        {
            text.push(self.advance() as char);
            while !self.at_end() && self.peek().is_ascii_digit() {
                text.push(self.advance() as char);
            }
            self.push(TokenKind::FloatLiteral, text, span);
        } else {
            self.push(TokenKind::IntLiteral, text, span);
        }
    }

    fn word(&mut self, span: Span) {
        let mut text = String::new();
        while !self.at_end() {
            let c = self.peek();
            if c == b'_' || c.is_ascii_alphanumeric() {
                text.push(self.advance() as char);
            } else {
                break;
            }
        }
        let kind = if KEYWORDS.contains(&text.as_str()) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, text, span);
    }

    fn punct(&mut self, span: Span) -> Result<(), Diagnostic> {
        let c = self.advance();
        let two = |lexer: &Lexer, second: u8| !lexer.at_end() && lexer.peek() == second;
        let lexeme = match c {
            b'{' | b'}' | b'(' | b')' | b';' | b',' | b'.' | b'@' => (c as char).to_string(),
            b'+' if two(self, b'+') => {
                self.advance();
                "++".to_string()
            }
            b'+' if two(self, b'=') => {
                self.advance();
                "+=".to_string()
            }
            b'+' => "+".to_string(),
            b'-' if two(self, b'-') => {
                self.advance();
                "--".to_string()
            }
            b'-' => "-".to_string(),
            b'=' if two(self, b'=') => {
                self.advance();
                "==".to_string()
            }
            b'=' => "=".to_string(),
            b'!' if two(self, b'=') => {
                self.advance();
                "!=".to_string()
            }
            b'<' => "<".to_string(),
            b'>' => ">".to_string(),
            other => {
                return Err(Diagnostic::new(
                    span,
                    format!("illegal character `{}`", other as char),
                ));
            }
        };
        self.push(TokenKind::Punct, lexeme, span);
        Ok(())
    }
}

/// Splits source text into tokens. The result always ends with an
/// end-of-input token; `//` comments and whitespace are skipped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer::new(source).run()
}
