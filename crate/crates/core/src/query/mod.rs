//! The executable query language: a small pipeline language in the style
//! of `query Kinos feed filter[...] consume`.

mod check;
mod exec;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use check::{typecheck, CheckedQuery, TypeError};
pub use exec::{execute, validate_pair, ExecError, ResultSet, Stage as ValidationStage, Verdict, DEFAULT_ROW_CAP};
pub use parser::{parse_query, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the query text.
    pub offset: usize,
    pub expected: Vec<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Trailing => "trailing input",
        };
        write!(f, "{kind} at offset {}: {}", self.offset, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" | "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub pipeline: Pipeline,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub source: Source,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Table(String),
    Nested(Box<Pipeline>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Filter(Pred),
    Head(u64),
    DistanceScan { anchor: (f64, f64), k: u64 },
    SymmJoin { pred: JoinPred, right: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Consume,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialOp {
    Intersects,
    Inside,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefExpr {
    Ref(String),
    Point(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Lt,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Num(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Spatial { op: SpatialOp, target: RefExpr },
    DistanceLt { target: RefExpr, limit: f64 },
    Attr { key: String, cmp: Cmp, value: Literal },
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinPred {
    Intersects,
    DistanceLt(f64),
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for RefExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefExpr::Ref(name) => {
                f.write_str("ref(")?;
                write_str_lit(f, name)?;
                f.write_str(")")
            }
            RefExpr::Point(x, y) => write!(f, "POINT ({x} {y})"),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Spatial { op, target } => {
                let op = match op {
                    SpatialOp::Intersects => "intersects",
                    SpatialOp::Inside => "inside",
                };
                write!(f, ".geom {op} {target}")
            }
            Pred::DistanceLt { target, limit } => write!(f, "distance(.geom, {target}) < {limit}"),
            Pred::Attr { key, cmp, value } => {
                f.write_str(".attr(")?;
                write_str_lit(f, key)?;
                let cmp = match cmp {
                    Cmp::Eq => "=",
                    Cmp::Lt => "<",
                    Cmp::Gt => ">",
                };
                write!(f, ") {cmp} ")?;
                match value {
                    Literal::Str(s) => write_str_lit(f, s),
                    Literal::Num(n) => write!(f, "{n}"),
                }
            }
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Table(t) => write!(f, "{t} feed")?,
            Source::Nested(p) => write!(f, "({p})")?,
        }
        for stage in &self.stages {
            match stage {
                Stage::Filter(p) => write!(f, " filter[{p}]")?,
                Stage::Head(n) => write!(f, " head[{n}]")?,
                Stage::DistanceScan { anchor: (x, y), k } => {
                    write!(f, " distancescan[POINT ({x} {y}), {k}]")?
                }
                Stage::SymmJoin { pred, right } => {
                    match pred {
                        JoinPred::Intersects => f.write_str(" symmjoin[.geom intersects ..geom]")?,
                        JoinPred::DistanceLt(d) => write!(f, " symmjoin[distance(.geom, ..geom) < {d}]")?,
                    }
                    write!(f, " {right} feed")?
                }
            }
        }
        Ok(())
    }
}

/// Canonical text; `parse_query(q.to_string()) == q` for every parsed `q`.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.terminal {
            Terminal::Consume => "consume",
            Terminal::Count => "count",
        };
        write!(f, "query {} {t}", self.pipeline)
    }
}
