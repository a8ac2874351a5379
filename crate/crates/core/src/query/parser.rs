//! Recursive-descent parser for the grammar in `docs/query-language.md`.

use super::lexer::{tokenize, Spanned, Tok};
use super::{Cmp, JoinPred, Literal, ParseError, ParseErrorKind, Pipeline, Pred, Query, RefExpr, Source, SpatialOp, Stage, Terminal};

/// Maximum nesting of parenthesized sources.
pub const MAX_DEPTH: usize = 32;

const RESERVED: &[&str] = &[
    "query",
    "feed",
    "filter",
    "head",
    "distancescan",
    "symmjoin",
    "consume",
    "count",
    "intersects",
    "inside",
    "distance",
    "ref",
    "POINT",
];

const STAGE_OR_TERMINAL: &[&str] = &["filter", "head", "distancescan", "symmjoin", "consume", "count"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |s| s.offset)
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = self.peek().map_or("end of input".to_string(), Tok::describe);
        Err(ParseError {
            kind: ParseErrorKind::Syntax,
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: format!("unexpected {found}"),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&[&format!("'{kw}'")])
        }
    }

    fn punct(&mut self, tok: Tok) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&[&tok.describe()])
        }
    }

    fn num(&mut self) -> PResult<f64> {
        match self.peek() {
            Some(Tok::Num(v, _)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail(&["number"]),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        if let Some(Tok::Num(_, text)) = self.peek() {
            if let Ok(v) = text.parse::<u64>() {
                self.pos += 1;
                return Ok(v);
            }
        }
        self.fail(&["integer"])
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(&["string"]),
        }
    }

    fn table_name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(&["table name"]),
        }
    }

    fn source(&mut self, depth: usize) -> PResult<Source> {
        if self.peek() == Some(&Tok::LParen) {
            if depth >= MAX_DEPTH {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    offset: self.offset(),
                    expected: vec![],
                    message: format!("nesting deeper than {MAX_DEPTH}"),
                });
            }
            self.pos += 1;
            let inner = self.pipeline(depth + 1)?;
            self.punct(Tok::RParen)?;
            return Ok(Source::Nested(Box::new(inner)));
        }
        if !matches!(self.peek(), Some(Tok::Ident(s)) if !RESERVED.contains(&s.as_str())) {
            return self.fail(&["table name", "'('"]);
        }
        let name = self.table_name()?;
        self.keyword("feed")?;
        Ok(Source::Table(name))
    }

    fn pipeline(&mut self, depth: usize) -> PResult<Pipeline> {
        let source = self.source(depth)?;
        let mut stages = Vec::new();
        loop {
            let stage = if self.is_keyword("filter") {
                self.pos += 1;
                self.punct(Tok::LBracket)?;
                let p = self.pred()?;
                self.punct(Tok::RBracket)?;
                Stage::Filter(p)
            } else if self.is_keyword("head") {
                self.pos += 1;
                self.punct(Tok::LBracket)?;
                let n = self.int()?;
                self.punct(Tok::RBracket)?;
                Stage::Head(n)
            } else if self.is_keyword("distancescan") {
                self.pos += 1;
                self.punct(Tok::LBracket)?;
                let anchor = self.point_lit()?;
                self.punct(Tok::Comma)?;
                let k = self.int()?;
                self.punct(Tok::RBracket)?;
                Stage::DistanceScan { anchor, k }
            } else if self.is_keyword("symmjoin") {
                self.pos += 1;
                self.punct(Tok::LBracket)?;
                let pred = self.join_pred()?;
                self.punct(Tok::RBracket)?;
                let right = self.table_name()?;
                self.keyword("feed")?;
                Stage::SymmJoin { pred, right }
            } else {
                break;
            };
            stages.push(stage);
        }
        Ok(Pipeline { source, stages })
    }

    fn terminal(&mut self) -> PResult<Terminal> {
        if self.is_keyword("consume") {
            self.pos += 1;
            Ok(Terminal::Consume)
        } else if self.is_keyword("count") {
            self.pos += 1;
            Ok(Terminal::Count)
        } else {
            self.fail(STAGE_OR_TERMINAL)
        }
    }

    fn point_lit(&mut self) -> PResult<(f64, f64)> {
        self.keyword("POINT")?;
        self.punct(Tok::LParen)?;
        let x = self.num()?;
        let y = self.num()?;
        self.punct(Tok::RParen)?;
        Ok((x, y))
    }

    fn ref_expr(&mut self) -> PResult<RefExpr> {
        if self.is_keyword("ref") {
            self.pos += 1;
            self.punct(Tok::LParen)?;
            let name = self.string()?;
            self.punct(Tok::RParen)?;
            Ok(RefExpr::Ref(name))
        } else if self.is_keyword("POINT") {
            let (x, y) = self.point_lit()?;
            Ok(RefExpr::Point(x, y))
        } else {
            self.fail(&["'ref'", "'POINT'"])
        }
    }

    fn pred(&mut self) -> PResult<Pred> {
        match self.peek() {
            Some(Tok::Geom) => {
                self.pos += 1;
                let op = if self.is_keyword("intersects") {
                    SpatialOp::Intersects
                } else if self.is_keyword("inside") {
                    SpatialOp::Inside
                } else {
                    return self.fail(&["'intersects'", "'inside'"]);
                };
                self.pos += 1;
                Ok(Pred::Spatial {
                    op,
                    target: self.ref_expr()?,
                })
            }
            Some(Tok::Ident(s)) if s == "distance" => {
                self.pos += 1;
                self.punct(Tok::LParen)?;
                self.punct(Tok::Geom)?;
                self.punct(Tok::Comma)?;
                let target = self.ref_expr()?;
                self.punct(Tok::RParen)?;
                self.punct(Tok::Lt)?;
                Ok(Pred::DistanceLt {
                    target,
                    limit: self.num()?,
                })
            }
            Some(Tok::Attr) => {
                self.pos += 1;
                self.punct(Tok::LParen)?;
                let key = self.string()?;
                self.punct(Tok::RParen)?;
                let cmp = match self.peek() {
                    Some(Tok::Eq) => Cmp::Eq,
                    Some(Tok::Lt) => Cmp::Lt,
                    Some(Tok::Gt) => Cmp::Gt,
                    _ => return self.fail(&["'='", "'<'", "'>'"]),
                };
                self.pos += 1;
                let value = match self.bump() {
                    Some(Tok::Str(s)) => Literal::Str(s),
                    Some(Tok::Num(v, _)) => Literal::Num(v),
                    _ => {
                        self.pos -= 1;
                        return self.fail(&["string", "number"]);
                    }
                };
                Ok(Pred::Attr { key, cmp, value })
            }
            _ => self.fail(&["'.geom'", "'distance'", "'.attr'"]),
        }
    }

    fn join_pred(&mut self) -> PResult<JoinPred> {
        match self.peek() {
            Some(Tok::Geom) => {
                self.pos += 1;
                self.keyword("intersects")?;
                self.punct(Tok::RightGeom)?;
                Ok(JoinPred::Intersects)
            }
            Some(Tok::Ident(s)) if s == "distance" => {
                self.pos += 1;
                self.punct(Tok::LParen)?;
                self.punct(Tok::Geom)?;
                self.punct(Tok::Comma)?;
                self.punct(Tok::RightGeom)?;
                self.punct(Tok::RParen)?;
                self.punct(Tok::Lt)?;
                Ok(JoinPred::DistanceLt(self.num()?))
            }
            _ => self.fail(&["'.geom'", "'distance'"]),
        }
    }
}

pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    p.keyword("query")?;
    let pipeline = p.pipeline(0)?;
    let terminal = p.terminal()?;
    if p.pos < p.toks.len() {
        return Err(ParseError {
            kind: ParseErrorKind::Trailing,
            offset: p.offset(),
            expected: vec!["end of input".into()],
            message: format!("unexpected {}", p.toks[p.pos].tok.describe()),
        });
    }
    Ok(Query { pipeline, terminal })
}
