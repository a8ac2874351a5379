use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    /// Numeric literal with its source text, so INT-ness can be checked.
    Num(f64, String),
    Geom,
    Attr,
    RightGeom,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Lt,
    Gt,
    Eq,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(_, text) => format!("number {text}"),
            Tok::Geom => "'.geom'".into(),
            Tok::Attr => "'.attr'".into(),
            Tok::RightGeom => "'..geom'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Lt => "'<'".into(),
            Tok::Gt => "'>'".into(),
            Tok::Eq => "'='".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

fn lex_err(offset: usize, message: String) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Lexical,
        offset,
        expected: Vec::new(),
        message,
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'<' => Some(Tok::Lt),
            b'>' => Some(Tok::Gt),
            b'=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Spanned { tok, offset: start });
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'.' {
            let rest = &text[i..];
            let (tok, len) = if rest.starts_with("..geom") {
                (Tok::RightGeom, 6)
            } else if rest.starts_with(".geom") {
                (Tok::Geom, 5)
            } else if rest.starts_with(".attr") {
                (Tok::Attr, 5)
            } else {
                return Err(lex_err(start, "expected '.geom', '.attr' or '..geom'".into()));
            };
            // `.geomx` is not `.geom` followed by `x`.
            if bytes.get(i + len).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_') {
                return Err(lex_err(start, "unknown attribute accessor".into()));
            }
            out.push(Spanned { tok, offset: start });
            i += len;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else if c.is_ascii_digit() || c == b'-' {
            i += 1;
            let digits = |i: &mut usize| {
                let s = *i;
                while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                    *i += 1;
                }
                *i > s
            };
            let mut ok = if c == b'-' {
                digits(&mut i)
            } else {
                digits(&mut i);
                true
            };
            if ok && i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                i += 1;
                digits(&mut i);
            }
            if ok && i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
                if !digits(&mut i) {
                    i = save;
                    ok = false;
                }
            }
            if !ok {
                return Err(lex_err(start, "malformed number".into()));
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| lex_err(start, format!("malformed number {lit:?}")))?;
            out.push(Spanned {
                tok: Tok::Num(v, lit.to_string()),
                offset: start,
            });
        } else if c == b'"' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(ch) = text[i..].chars().next() else {
                    return Err(lex_err(start, "unterminated string".into()));
                };
                i += ch.len_utf8();
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(esc) = text[i..].chars().next() else {
                            return Err(lex_err(start, "unterminated string".into()));
                        };
                        s.push(match esc {
                            '"' => '"',
                            '\\' => '\\',
                            'n' => '\n',
                            't' => '\t',
                            _ => return Err(lex_err(i - 1, format!("unknown escape \\{esc}"))),
                        });
                        i += esc.len_utf8();
                    }
                    _ => s.push(ch),
                }
            }
            out.push(Spanned {
                tok: Tok::Str(s),
                offset: start,
            });
        } else {
            let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
            return Err(lex_err(start, format!("unexpected character {ch:?}")));
        }
    }
    Ok(out)
}
