//! Tokenizer for `.mdfy` source.
//!
//! Lexemes are exact source slices, so concatenating every token's lexeme
//! together with the skipped whitespace/comments reconstructs the input.
//! `//` line comments and `/* */` block comments are skipped.

use crate::diag::{Code, Diagnostic};
use crate::span::Span;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Method,
    Function,
    Returns,
    Requires,
    Ensures,
    Modifies,
    Reads,
    Decreases,
    Invariant,
    Assert,
    While,
    If,
    Then,
    Else,
    Var,
    Ghost,
    Class,
    Forall,
    Exists,
    True,
    False,
    Null,
    Break,
    New,
    Int,
    Nat,
    Bool,
    Array,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "method" => Keyword::Method,
            "function" => Keyword::Function,
            "returns" => Keyword::Returns,
            "requires" => Keyword::Requires,
            "ensures" => Keyword::Ensures,
            "modifies" => Keyword::Modifies,
            "reads" => Keyword::Reads,
            "decreases" => Keyword::Decreases,
            "invariant" => Keyword::Invariant,
            "assert" => Keyword::Assert,
            "while" => Keyword::While,
            "if" => Keyword::If,
            "then" => Keyword::Then,
            "else" => Keyword::Else,
            "var" => Keyword::Var,
            "ghost" => Keyword::Ghost,
            "class" => Keyword::Class,
            "forall" => Keyword::Forall,
            "exists" => Keyword::Exists,
            "true" => Keyword::True,
            "false" => Keyword::False,
            "null" => Keyword::Null,
            "break" => Keyword::Break,
            "new" => Keyword::New,
            "int" => Keyword::Int,
            "nat" => Keyword::Nat,
            "bool" => Keyword::Bool,
            "array" => Keyword::Array,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    IntLit,
    // operators and punctuation
    Assign,  // :=
    ColonColon,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Dot,
    Iff,     // <==>
    Implies, // ==>
    EqEq,
    NotEq,
    Le,
    Ge,
    Lt,
    Gt,
    AndAnd,
    OrOr,
    Not,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Keyword(_) => "keyword",
            TokenKind::Ident => "identifier",
            TokenKind::IntLit => "integer literal",
            TokenKind::Assign => "':='",
            TokenKind::ColonColon => "'::'",
            TokenKind::Colon => "':'",
            TokenKind::Semi => "';'",
            TokenKind::Comma => "','",
            TokenKind::LParen => "'('",
            TokenKind::RParen => "')'",
            TokenKind::LBrace => "'{'",
            TokenKind::RBrace => "'}'",
            TokenKind::LBracket => "'['",
            TokenKind::RBracket => "']'",
            TokenKind::Dot => "'.'",
            TokenKind::Iff => "'<==>'",
            TokenKind::Implies => "'==>'",
            TokenKind::EqEq => "'=='",
            TokenKind::NotEq => "'!='",
            TokenKind::Le => "'<='",
            TokenKind::Ge => "'>='",
            TokenKind::Lt => "'<'",
            TokenKind::Gt => "'>'",
            TokenKind::AndAnd => "'&&'",
            TokenKind::OrOr => "'||'",
            TokenKind::Not => "'!'",
            TokenKind::Plus => "'+'",
            TokenKind::Minus => "'-'",
            TokenKind::Star => "'*'",
            TokenKind::Slash => "'/'",
            TokenKind::Percent => "'%'",
            TokenKind::Eof => "end of file",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

struct Scanner<'s> {
    src: &'s [u8],
    pos: usize,
    line: u32,
    col: u32,
    file: Arc<String>,
}

impl<'s> Scanner<'s> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> (u32, u32) {
        (self.line, self.col)
    }

    fn span_from(&self, start: (u32, u32)) -> Span {
        Span::new(self.file.clone(), start, self.here())
    }
}

/// Tokenize `source`. On success the token list ends with an `Eof` token.
pub fn tokenize(file: &str, source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let file = Arc::new(file.to_string());
    let mut sc = Scanner {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        file: file.clone(),
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    loop {
        // skip whitespace and comments
        loop {
            match sc.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    sc.bump();
                }
                Some(b'/') if sc.peek2() == Some(b'/') => {
                    while let Some(c) = sc.peek() {
                        if c == b'\n' {
                            break;
                        }
                        sc.bump();
                    }
                }
                Some(b'/') if sc.peek2() == Some(b'*') => {
                    let start = sc.here();
                    sc.bump();
                    sc.bump();
                    let mut closed = false;
                    while let Some(c) = sc.bump() {
                        if c == b'*' && sc.peek() == Some(b'/') {
                            sc.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        diags.push(Diagnostic::error(
                            sc.span_from(start),
                            Code::UnterminatedComment,
                            "unterminated comment",
                        ));
                    }
                }
                _ => break,
            }
        }

        let start = sc.here();
        let start_pos = sc.pos;
        let Some(c) = sc.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                span: sc.span_from(start),
            });
            break;
        };

        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while let Some(c) = sc.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    sc.bump();
                } else {
                    break;
                }
            }
            let word = &source[start_pos..sc.pos];
            match Keyword::from_word(word) {
                Some(kw) => TokenKind::Keyword(kw),
                None => TokenKind::Ident,
            }
        } else if c.is_ascii_digit() {
            while let Some(c) = sc.peek() {
                if c.is_ascii_digit() {
                    sc.bump();
                } else {
                    break;
                }
            }
            TokenKind::IntLit
        } else {
            // operators, longest match first
            let rest = &source.as_bytes()[sc.pos..];
            let table: &[(&[u8], TokenKind)] = &[
                (b"<==>", TokenKind::Iff),
                (b"==>", TokenKind::Implies),
                (b":=", TokenKind::Assign),
                (b"::", TokenKind::ColonColon),
                (b"==", TokenKind::EqEq),
                (b"!=", TokenKind::NotEq),
                (b"<=", TokenKind::Le),
                (b">=", TokenKind::Ge),
                (b"&&", TokenKind::AndAnd),
                (b"||", TokenKind::OrOr),
                (b":", TokenKind::Colon),
                (b";", TokenKind::Semi),
                (b",", TokenKind::Comma),
                (b"(", TokenKind::LParen),
                (b")", TokenKind::RParen),
                (b"{", TokenKind::LBrace),
                (b"}", TokenKind::RBrace),
                (b"[", TokenKind::LBracket),
                (b"]", TokenKind::RBracket),
                (b".", TokenKind::Dot),
                (b"<", TokenKind::Lt),
                (b">", TokenKind::Gt),
                (b"!", TokenKind::Not),
                (b"+", TokenKind::Plus),
                (b"-", TokenKind::Minus),
                (b"*", TokenKind::Star),
                (b"/", TokenKind::Slash),
                (b"%", TokenKind::Percent),
            ];
            let mut matched = None;
            for (pat, kind) in table {
                if rest.starts_with(pat) {
                    for _ in 0..pat.len() {
                        sc.bump();
                    }
                    matched = Some(*kind);
                    break;
                }
            }
            match matched {
                Some(kind) => kind,
                None => {
                    // consume a whole UTF-8 scalar so the slice stays valid
                    sc.bump();
                    while sc.peek().map(|b| b & 0xC0 == 0x80).unwrap_or(false) {
                        sc.bump();
                    }
                    diags.push(Diagnostic::error(
                        sc.span_from(start),
                        Code::UnknownChar,
                        format!("unknown character {:?}", source[start_pos..sc.pos].to_string()),
                    ));
                    continue;
                }
            }
        };

        tokens.push(Token {
            kind,
            lexeme: source[start_pos..sc.pos].to_string(),
            span: sc.span_from(start),
        });
    }

    if diags.is_empty() {
        Ok(tokens)
    } else {
        Err(diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize("t.mdfy", src)
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .collect()
    }

    #[test]
    fn assignment_statement() {
        assert_eq!(
            kinds("x := 1;"),
            vec![
                TokenKind::Ident,
                TokenKind::Assign,
                TokenKind::IntLit,
                TokenKind::Semi,
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn chained_comparison() {
        assert_eq!(
            kinds("0 <= i < n"),
            vec![
                TokenKind::IntLit,
                TokenKind::Le,
                TokenKind::Ident,
                TokenKind::Lt,
                TokenKind::Ident,
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn unterminated_block_comment() {
        let err = tokenize("t.mdfy", "/* open").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].code, Code::UnterminatedComment);
        assert!(err[0].message.contains("unterminated comment"));
    }

    #[test]
    fn unknown_character() {
        let err = tokenize("t.mdfy", "x # y").unwrap_err();
        assert_eq!(err[0].code, Code::UnknownChar);
    }

    #[test]
    fn lexemes_are_source_slices() {
        let src = "method  M(a: nat) { /* c */ a[i] := a.Length <==> x; }";
        let toks = tokenize("t.mdfy", src).unwrap();
        // spans are strictly increasing and every lexeme is found in order
        let mut cursor = 0usize;
        for t in &toks {
            if t.kind == TokenKind::Eof {
                break;
            }
            let at = src[cursor..].find(&t.lexeme).expect("lexeme in source");
            cursor += at + t.lexeme.len();
        }
        assert_eq!(&src[cursor..].trim(), &"");
    }

    #[test]
    fn comments_and_iff_operator() {
        assert_eq!(
            kinds("// line\n/* block */ a <==> b ==> c"),
            vec![
                TokenKind::Ident,
                TokenKind::Iff,
                TokenKind::Ident,
                TokenKind::Implies,
                TokenKind::Ident,
                TokenKind::Eof
            ]
        );
    }
}
