use std::collections::HashMap;

use thiserror::Error;

use super::{JoinPred, Pipeline, Pred, Query, RefExpr, Source, SpatialOp, Stage};
use crate::dataset::{Dataset, EntityId};
use crate::geometry::GeomKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("unknown ref {0:?}")]
    UnknownRef(String),
    #[error("ambiguous ref {0:?} matches {1} entities")]
    AmbiguousRef(String, usize),
    #[error("kind mismatch at {token}: {message}")]
    KindMismatch { token: String, message: String },
    #[error("invalid literal {token}: {message}")]
    InvalidLiteral { token: String, message: String },
    #[error("unsupported at {token}: {message}")]
    Unsupported { token: String, message: String },
}

/// A query whose names all resolve against a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedQuery {
    pub query: Query,
    pub refs: HashMap<String, EntityId>,
}

struct Checker<'d> {
    d: &'d Dataset,
    refs: HashMap<String, EntityId>,
}

fn non_negative(v: f64, token: &str) -> Result<(), TypeError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(TypeError::InvalidLiteral {
            token: token.into(),
            message: format!("{v} must be finite and non-negative"),
        })
    }
}

fn finite_point(x: f64, y: f64) -> Result<(), TypeError> {
    if x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(TypeError::InvalidLiteral {
            token: format!("POINT ({x} {y})"),
            message: "coordinates must be finite".into(),
        })
    }
}

impl Checker<'_> {
    fn table(&self, name: &str) -> Result<(), TypeError> {
        self.d
            .table(name)
            .map(|_| ())
            .ok_or_else(|| TypeError::UnknownTable(name.into()))
    }

    fn resolve(&mut self, name: &str) -> Result<EntityId, TypeError> {
        match self.d.ids_named(name) {
            [] => Err(TypeError::UnknownRef(name.into())),
            [id] => {
                self.refs.insert(name.into(), *id);
                Ok(*id)
            }
            many => Err(TypeError::AmbiguousRef(name.into(), many.len())),
        }
    }

    fn ref_expr(&mut self, r: &RefExpr) -> Result<GeomKind, TypeError> {
        match r {
            RefExpr::Ref(name) => {
                let id = self.resolve(name)?;
                Ok(self.d.entity(id).expect("resolved").geometry.kind())
            }
            RefExpr::Point(x, y) => {
                finite_point(*x, *y)?;
                Ok(GeomKind::Point)
            }
        }
    }

    fn pred(&mut self, p: &Pred) -> Result<(), TypeError> {
        match p {
            Pred::Spatial { op, target } => {
                let kind = self.ref_expr(target)?;
                if *op == SpatialOp::Inside && kind != GeomKind::Region {
                    return Err(TypeError::KindMismatch {
                        token: target.to_string(),
                        message: format!("inside needs a region target, found a {kind}"),
                    });
                }
                Ok(())
            }
            Pred::DistanceLt { target, limit } => {
                self.ref_expr(target)?;
                non_negative(*limit, &format!("< {limit}"))
            }
            Pred::Attr { .. } => Ok(()),
        }
    }

    /// Returns whether the pipeline yields entity pairs.
    fn pipeline(&mut self, p: &Pipeline) -> Result<bool, TypeError> {
        let mut paired = match &p.source {
            Source::Table(t) => {
                self.table(t)?;
                false
            }
            Source::Nested(inner) => self.pipeline(inner)?,
        };
        for stage in &p.stages {
            let unsupported = |token: &str| TypeError::Unsupported {
                token: token.into(),
                message: "stage needs single-entity tuples but follows a join".into(),
            };
            match stage {
                Stage::Filter(pred) => {
                    if paired {
                        return Err(unsupported("filter"));
                    }
                    self.pred(pred)?;
                }
                Stage::Head(_) => {}
                Stage::DistanceScan { anchor: (x, y), k } => {
                    if paired {
                        return Err(unsupported("distancescan"));
                    }
                    finite_point(*x, *y)?;
                    if *k == 0 {
                        return Err(TypeError::InvalidLiteral {
                            token: "distancescan".into(),
                            message: "k must be at least 1".into(),
                        });
                    }
                }
                Stage::SymmJoin { pred, right } => {
                    if paired {
                        return Err(unsupported("symmjoin"));
                    }
                    self.table(right)?;
                    if let JoinPred::DistanceLt(limit) = pred {
                        non_negative(*limit, &format!("< {limit}"))?;
                    }
                    paired = true;
                }
            }
        }
        Ok(paired)
    }
}

pub fn typecheck(q: &Query, d: &Dataset) -> Result<CheckedQuery, TypeError> {
    let mut c = Checker {
        d,
        refs: HashMap::new(),
    };
    c.pipeline(&q.pipeline)?;
    Ok(CheckedQuery {
        query: q.clone(),
        refs: c.refs,
    })
}
