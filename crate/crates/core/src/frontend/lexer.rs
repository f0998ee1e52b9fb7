use super::QueryError;
use crate::query::CompOp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Slash,
    DoubleSlash,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    At,
    Dot,
    DotDot,
    Star,
    Assign,
    ColonColon,
    Plus,
    Minus,
    Pipe,
    Cmp(CompOp),
    Var(String),
    Name(String),
    Str(String),
    Number(String),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Var(v) => format!("${v}"),
            Tok::Name(n) => format!("`{n}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Number(n) => format!("number {n}"),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of query".into(),
            other => {
                let s = match other {
                    Tok::Slash => "/",
                    Tok::DoubleSlash => "//",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Comma => ",",
                    Tok::At => "@",
                    Tok::Dot => ".",
                    Tok::DotDot => "..",
                    Tok::Star => "*",
                    Tok::Assign => ":=",
                    Tok::ColonColon => "::",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    _ => "|",
                };
                format!("`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn syntax(position: usize, message: impl Into<String>) -> QueryError {
    QueryError::SyntaxError {
        position,
        message: message.into(),
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let pos_of = |i: usize| chars.get(i).map_or(src.len(), |&(p, _)| p);
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // (: comment :), possibly nested
        if c == '(' && at(i + 1) == Some(':') {
            let mut depth = 1;
            i += 2;
            while depth > 0 {
                match (at(i), at(i + 1)) {
                    (None, _) => return Err(syntax(pos, "unterminated comment")),
                    (Some('('), Some(':')) => {
                        depth += 1;
                        i += 2;
                    }
                    (Some(':'), Some(')')) => {
                        depth -= 1;
                        i += 2;
                    }
                    _ => i += 1,
                }
            }
            continue;
        }
        let single = |t: Tok| Token { tok: t, pos };
        let (tok, len) = match c {
            '/' if at(i + 1) == Some('/') => (Tok::DoubleSlash, 2),
            '/' => (Tok::Slash, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            '@' => (Tok::At, 1),
            '*' => (Tok::Star, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '|' => (Tok::Pipe, 1),
            '.' if at(i + 1) == Some('.') => (Tok::DotDot, 2),
            '.' => (Tok::Dot, 1),
            ':' if at(i + 1) == Some('=') => (Tok::Assign, 2),
            ':' if at(i + 1) == Some(':') => (Tok::ColonColon, 2),
            '=' => (Tok::Cmp(CompOp::Eq), 1),
            '!' if at(i + 1) == Some('=') => (Tok::Cmp(CompOp::Ne), 2),
            '<' if at(i + 1) == Some('=') => (Tok::Cmp(CompOp::Le), 2),
            '<' => (Tok::Cmp(CompOp::Lt), 1),
            '>' if at(i + 1) == Some('=') => (Tok::Cmp(CompOp::Ge), 2),
            '>' => (Tok::Cmp(CompOp::Gt), 1),
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match at(j) {
                        None => return Err(syntax(pos, "unterminated string literal")),
                        Some(q) if q == quote && at(j + 1) == Some(quote) => {
                            s.push(quote);
                            j += 2;
                        }
                        Some(q) if q == quote => break,
                        Some(ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                out.push(single(Tok::Str(s)));
                i = j + 1;
                continue;
            }
            '$' => {
                let mut j = i + 1;
                if !at(j).is_some_and(is_name_start) {
                    return Err(syntax(pos, "expected a variable name after `$`"));
                }
                while at(j).is_some_and(is_name_char) {
                    j += 1;
                }
                out.push(single(Tok::Var(src[pos_of(i + 1)..pos_of(j)].to_owned())));
                i = j;
                continue;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while at(j).is_some_and(|c| c.is_ascii_digit()) {
                    j += 1;
                }
                if at(j) == Some('.') && at(j + 1).is_some_and(|c| c.is_ascii_digit()) {
                    j += 1;
                    while at(j).is_some_and(|c| c.is_ascii_digit()) {
                        j += 1;
                    }
                }
                if at(j).is_some_and(|c| is_name_start(c) || c == '.') {
                    return Err(syntax(pos_of(j), "malformed number"));
                }
                out.push(single(Tok::Number(src[pos..pos_of(j)].to_owned())));
                i = j;
                continue;
            }
            c if is_name_start(c) => {
                let mut j = i;
                while at(j).is_some_and(is_name_char) {
                    j += 1;
                }
                out.push(single(Tok::Name(src[pos..pos_of(j)].to_owned())));
                i = j;
                continue;
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        out.push(single(tok));
        i += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
    });
    Ok(out)
}
