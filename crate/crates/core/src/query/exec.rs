use std::fmt;

use thiserror::Error;

use super::{parse_query, typecheck, Cmp, CheckedQuery, JoinPred, Literal, Pipeline, Pred, RefExpr, Source, SpatialOp, Stage as AstStage, Terminal};
use crate::dataset::{Dataset, Entity, EntityId};
use crate::geometry::{distance, inside, intersects, Geometry, Point};
use crate::index::StrTree;

pub const DEFAULT_ROW_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("result cap exceeded ({0} rows)")]
    RowCap(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultSet {
    /// One id per row, or a (left, right) pair for joins.
    Tuples(Vec<Vec<EntityId>>),
    Scalar(u64),
}

impl ResultSet {
    pub fn rows(&self) -> u64 {
        match self {
            ResultSet::Tuples(t) => t.len() as u64,
            ResultSet::Scalar(_) => 1,
        }
    }
}

enum Stream {
    Single(Vec<EntityId>),
    Pairs(Vec<(EntityId, EntityId)>),
}

impl Stream {
    fn len(&self) -> usize {
        match self {
            Stream::Single(v) => v.len(),
            Stream::Pairs(v) => v.len(),
        }
    }
}

struct Exec<'a> {
    d: &'a Dataset,
    tree: &'a StrTree,
    plan: &'a CheckedQuery,
    cap: usize,
}

impl<'a> Exec<'a> {
    fn entity(&self, id: EntityId) -> &'a Entity {
        self.d.entity(id).expect("ids come from the dataset")
    }

    fn target(&self, r: &RefExpr) -> Geometry {
        match r {
            RefExpr::Ref(name) => self.entity(self.plan.refs[name]).geometry.clone(),
            RefExpr::Point(x, y) => Geometry::Point(Point::new(*x, *y)),
        }
    }

    fn pred(&self, p: &Pred) -> Box<dyn Fn(&Entity) -> bool + 'a> {
        match p {
            Pred::Spatial { op, target } => {
                let t = self.target(target);
                match op {
                    SpatialOp::Intersects => Box::new(move |e| intersects(&e.geometry, &t)),
                    SpatialOp::Inside => Box::new(move |e| inside(&e.geometry, &t).unwrap_or(false)),
                }
            }
            Pred::DistanceLt { target, limit } => {
                let (t, limit) = (self.target(target), *limit);
                Box::new(move |e| distance(&e.geometry, &t) < limit)
            }
            Pred::Attr { key, cmp, value } => {
                let (key, cmp, value) = (key.clone(), *cmp, value.clone());
                Box::new(move |e| {
                    let Some(v) = e.attributes.get(&key) else {
                        return false;
                    };
                    let ord = match &value {
                        Literal::Str(s) => Some(v.as_str().cmp(s.as_str())),
                        Literal::Num(n) => v.trim().parse::<f64>().ok().and_then(|x| x.partial_cmp(n)),
                    };
                    ord.is_some_and(|o| match cmp {
                        Cmp::Eq => o.is_eq(),
                        Cmp::Lt => o.is_lt(),
                        Cmp::Gt => o.is_gt(),
                    })
                })
            }
        }
    }

    fn join(&self, left: &[EntityId], pred: &JoinPred, right: &str) -> Result<Vec<(EntityId, EntityId)>, ExecError> {
        let right_idx = self
            .d
            .tables()
            .iter()
            .position(|t| t.name == right)
            .expect("typechecked");
        let reach = match pred {
            JoinPred::Intersects => 0.0,
            JoinPred::DistanceLt(limit) => *limit,
        };
        let mut out = Vec::new();
        for &l in left {
            let lg = &self.entity(l).geometry;
            for r in self.tree.query_bbox(&lg.bbox().expand(reach)) {
                if self.d.table_index_of(r) != Some(right_idx) {
                    continue;
                }
                let rg = &self.entity(r).geometry;
                let hit = match pred {
                    JoinPred::Intersects => intersects(lg, rg),
                    JoinPred::DistanceLt(limit) => distance(lg, rg) < *limit,
                };
                if hit {
                    out.push((l, r));
                    if out.len() > self.cap {
                        return Err(ExecError::RowCap(self.cap));
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    fn pipeline(&self, p: &Pipeline) -> Result<Stream, ExecError> {
        let mut stream = match &p.source {
            Source::Table(t) => {
                let mut ids: Vec<EntityId> = self
                    .d
                    .table(t)
                    .expect("typechecked")
                    .entities
                    .iter()
                    .map(|e| e.id)
                    .collect();
                ids.sort_unstable();
                Stream::Single(ids)
            }
            Source::Nested(inner) => self.pipeline(inner)?,
        };
        for stage in &p.stages {
            stream = match (stage, stream) {
                (AstStage::Filter(pred), Stream::Single(ids)) => {
                    let keep = self.pred(pred);
                    Stream::Single(ids.into_iter().filter(|id| keep(self.entity(*id))).collect())
                }
                (AstStage::Head(n), Stream::Single(mut ids)) => {
                    ids.truncate(*n as usize);
                    Stream::Single(ids)
                }
                (AstStage::Head(n), Stream::Pairs(mut pairs)) => {
                    pairs.truncate(*n as usize);
                    Stream::Pairs(pairs)
                }
                (AstStage::DistanceScan { anchor: (x, y), k }, Stream::Single(ids)) => {
                    let origin = Geometry::Point(Point::new(*x, *y));
                    let mut scored: Vec<(f64, EntityId)> = ids
                        .into_iter()
                        .map(|id| (distance(&origin, &self.entity(id).geometry), id))
                        .collect();
                    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    scored.truncate(*k as usize);
                    Stream::Single(scored.into_iter().map(|(_, id)| id).collect())
                }
                (AstStage::SymmJoin { pred, right }, Stream::Single(ids)) => Stream::Pairs(self.join(&ids, pred, right)?),
                (_, Stream::Pairs(_)) => unreachable!("typecheck rejects single-entity stages after a join"),
            };
            if stream.len() > self.cap {
                return Err(ExecError::RowCap(self.cap));
            }
        }
        if stream.len() > self.cap {
            return Err(ExecError::RowCap(self.cap));
        }
        Ok(stream)
    }
}

/// Runs a checked query. `tree` must index exactly the entities of `d`.
pub fn execute(plan: &CheckedQuery, d: &Dataset, tree: &StrTree, row_cap: usize) -> Result<ResultSet, ExecError> {
    let exec = Exec {
        d,
        tree,
        plan,
        cap: row_cap,
    };
    let stream = exec.pipeline(&plan.query.pipeline)?;
    Ok(match plan.query.terminal {
        Terminal::Count => ResultSet::Scalar(stream.len() as u64),
        Terminal::Consume => ResultSet::Tuples(match stream {
            Stream::Single(ids) => ids.into_iter().map(|id| vec![id]).collect(),
            Stream::Pairs(pairs) => pairs.into_iter().map(|(l, r)| vec![l, r]).collect(),
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Typecheck,
    Execute,
    Result,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Typecheck => "typecheck",
            Stage::Execute => "execute",
            Stage::Result => "result",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub valid: bool,
    /// The stage that failed, for invalid verdicts.
    pub stage: Option<Stage>,
    pub reason: String,
    pub rows: u64,
}

impl Verdict {
    fn invalid(stage: Stage, reason: String) -> Self {
        Verdict {
            valid: false,
            stage: Some(stage),
            reason,
            rows: 0,
        }
    }
}

/// Valid iff the query parses, typechecks and executes, and either returns
/// at least one tuple or is a count.
pub fn validate_pair(exe: &str, d: &Dataset, tree: &StrTree, row_cap: usize) -> Verdict {
    let q = match parse_query(exe) {
        Ok(q) => q,
        Err(e) => return Verdict::invalid(Stage::Parse, e.to_string()),
    };
    let plan = match typecheck(&q, d) {
        Ok(p) => p,
        Err(e) => return Verdict::invalid(Stage::Typecheck, e.to_string()),
    };
    match execute(&plan, d, tree, row_cap) {
        Err(e) => Verdict::invalid(Stage::Execute, e.to_string()),
        Ok(ResultSet::Tuples(t)) if t.is_empty() => Verdict::invalid(Stage::Result, "empty result".into()),
        Ok(rs) => Verdict {
            valid: true,
            stage: None,
            reason: String::new(),
            rows: rs.rows(),
        },
    }
}
