//! Composite quality scores and threshold filtering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EntityId, GeometryLookup};
use crate::extract::{RelationGroup, Witness};
use crate::geometry::{intersects, overlap_ratio, GeomKind, Geometry, GeometryError, EPSILON};
use crate::relation::{EntityRelation, Operator, QueryType, RelationRelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    /// Distance-decay length λ in meters.
    pub lambda_m: f64,
    pub w_distance: f64,
    pub w_overlap: f64,
    pub w_type: f64,
    pub threshold: f64,
    /// Weights of [mean member score, intersection rationality, distance rationality].
    pub multi_weights: [f64; 3],
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            lambda_m: 1000.0,
            w_distance: 0.5,
            w_overlap: 0.3,
            w_type: 0.2,
            threshold: 0.6,
            multi_weights: [0.4, 0.3, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("dangling relation: entity {0} not found")]
    Dangling(EntityId),
    #[error("unsupported relation: {0} has no witnesses")]
    Unsupported(String),
    #[error("invalid quality config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl QualityConfig {
    pub fn validate(&self) -> Result<(), QualityError> {
        let bad = |m: String| Err(QualityError::Config(m));
        if !(self.lambda_m.is_finite() && self.lambda_m > 0.0) {
            return bad("lambda_m must be positive and finite".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0,1]", self.threshold));
        }
        let groups: [(&str, &[f64]); 2] = [
            ("w_distance/w_overlap/w_type", &[self.w_distance, self.w_overlap, self.w_type]),
            ("multi_weights", &self.multi_weights),
        ];
        for (name, ws) in groups {
            if ws.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return bad(format!("{name}: each weight must lie in [0,1]"));
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("{name}: weights sum to {sum}, expected 1"));
            }
        }
        Ok(())
    }
}

/// (operator, subject kind, object kind) combinations that make sense;
/// `None` matches any kind.
pub const COMPATIBILITY: &[(Operator, Option<GeomKind>, Option<GeomKind>)] = &[
    (Operator::Intersects, None, None),
    (Operator::Inside, None, Some(GeomKind::Region)),
    (Operator::DistanceScan, None, None),
];

pub fn is_compatible(op: Operator, subject: GeomKind, object: GeomKind) -> bool {
    COMPATIBILITY.iter().any(|&(o, s, t)| {
        o == op && s.is_none_or(|s| s == subject) && t.is_none_or(|t| t == object)
    })
}

/// Overlap term: overlap ratio for two regions, 1 for other intersecting
/// pairs, 0 otherwise.
pub fn overlap_term(a: &Geometry, b: &Geometry) -> Result<f64, GeometryError> {
    match (a, b) {
        (Geometry::Region(ra), Geometry::Region(rb)) => {
            if a.bbox().intersects(&b.bbox()) {
                overlap_ratio(ra, rb)
            } else {
                Ok(0.0)
            }
        }
        _ => Ok(if intersects(a, b) { 1.0 } else { 0.0 }),
    }
}

pub fn score_entity_relation(
    r: &EntityRelation,
    geoms: &impl GeometryLookup,
    cfg: &QualityConfig,
) -> Result<f64, QualityError> {
    let a = geoms.geometry(r.subject_id).ok_or(QualityError::Dangling(r.subject_id))?;
    let b = geoms.geometry(r.object_id).ok_or(QualityError::Dangling(r.object_id))?;
    let o = overlap_term(a, b)?;
    let t = if is_compatible(r.operator, r.subject_kind, r.object_kind) { 1.0 } else { 0.0 };
    let s = cfg.w_distance * (-r.distance / cfg.lambda_m).exp() + cfg.w_overlap * o + cfg.w_type * t;
    Ok(s.clamp(0.0, 1.0))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn score_relation_relation(
    rr: &RelationRelation,
    witnesses: &[Witness],
    cfg: &QualityConfig,
) -> Result<f64, QualityError> {
    if witnesses.is_empty() {
        return Err(QualityError::Unsupported(format!(
            "{} {}/{}",
            rr.query_type, rr.relation1, rr.relation2
        )));
    }
    let n = witnesses.len() as f64;
    let mean = witnesses.iter().map(|w| w.score).sum::<f64>() / n;
    let touching = witnesses.iter().filter(|w| w.distance <= EPSILON).count() as f64 / n;
    let i = match rr.query_type {
        QueryType::DistanceJoin => 1.0 - touching,
        _ => touching,
    };
    let mut ds: Vec<f64> = witnesses.iter().map(|w| w.distance).collect();
    let d = (-(median(&mut ds) - rr.distance).abs() / cfg.lambda_m).exp();
    let [wa, wi, wd] = cfg.multi_weights;
    Ok((wa * mean + wi * i + wd * d).clamp(0.0, 1.0))
}

/// Anything carrying a score and an operator tag.
pub trait Scored {
    fn score(&self) -> f64;
    fn operator(&self) -> Operator;
}

impl Scored for EntityRelation {
    fn score(&self) -> f64 {
        self.score
    }
    fn operator(&self) -> Operator {
        self.operator
    }
}

impl Scored for RelationRelation {
    fn score(&self) -> f64 {
        self.score
    }
    fn operator(&self) -> Operator {
        self.operator
    }
}

impl Scored for RelationGroup {
    fn score(&self) -> f64 {
        self.relation.score
    }
    fn operator(&self) -> Operator {
        self.relation.operator
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: usize,
    pub rejected: usize,
    pub rejected_by_operator: BTreeMap<Operator, usize>,
}

/// Keeps items scoring strictly above the threshold, preserving order.
pub fn filter_by_threshold<T: Scored>(items: Vec<T>, cfg: &QualityConfig) -> (Vec<T>, FilterReport) {
    let mut report = FilterReport::default();
    let kept: Vec<T> = items
        .into_iter()
        .filter(|r| {
            let keep = r.score() > cfg.threshold;
            if !keep {
                report.rejected += 1;
                *report.rejected_by_operator.entry(r.operator()).or_default() += 1;
            }
            keep
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use std::collections::HashMap;

    fn lookup(pairs: Vec<(EntityId, Geometry)>) -> HashMap<EntityId, Geometry> {
        pairs.into_iter().collect()
    }

    fn rel(op: Operator, d: f64, sk: GeomKind, ok: GeomKind) -> EntityRelation {
        EntityRelation {
            subject_id: 1,
            object_id: 2,
            operator: op,
            distance: d,
            subject_kind: sk,
            object_kind: ok,
            score: 0.0,
        }
    }

    fn square() -> Geometry {
        Region::rect(0.0, 0.0, 1.0, 1.0).unwrap().into()
    }

    #[test]
    fn fully_overlapping_regions_score_one() {
        let g = lookup(vec![(1, square()), (2, square())]);
        let r = rel(Operator::Intersects, 0.0, GeomKind::Region, GeomKind::Region);
        assert_eq!(score_entity_relation(&r, &g, &QualityConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn decayed_distancescan() {
        let g = lookup(vec![
            (1, Geometry::point(0.0, 0.0).unwrap()),
            (2, Geometry::point(1000.0, 0.0).unwrap()),
        ]);
        let r = rel(Operator::DistanceScan, 1000.0, GeomKind::Point, GeomKind::Point);
        let s = score_entity_relation(&r, &g, &QualityConfig::default()).unwrap();
        assert!((s - (0.5 * (-1.0f64).exp() + 0.2)).abs() < 1e-12);
        assert!((s - 0.3839).abs() < 1e-4);
    }

    #[test]
    fn incompatible_pair() {
        let g = lookup(vec![(1, square()), (2, square())]);
        // `inside` against a line object is not in the compatibility table.
        let r = rel(Operator::Inside, 0.0, GeomKind::Region, GeomKind::Line);
        let s = score_entity_relation(&r, &g, &QualityConfig::default()).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dangling() {
        let g = lookup(vec![(1, square())]);
        let r = rel(Operator::Intersects, 0.0, GeomKind::Region, GeomKind::Region);
        assert_eq!(
            score_entity_relation(&r, &g, &QualityConfig::default()),
            Err(QualityError::Dangling(2))
        );
    }

    fn rr(qt: QueryType, distance: f64) -> RelationRelation {
        RelationRelation {
            query_type: qt,
            relation1: "A".into(),
            relation2: "B".into(),
            relation1_type: GeomKind::Point,
            relation2_type: GeomKind::Region,
            distance,
            operator: Operator::SymmJoin,
            support: 1,
            score: 0.0,
        }
    }

    fn w(score: f64, distance: f64) -> Witness {
        Witness { score, distance }
    }

    #[test]
    fn relation_scores() {
        let cfg = QualityConfig::default();
        let s = score_relation_relation(&rr(QueryType::SpatialJoin, 0.0), &[w(1.0, 0.0); 3], &cfg);
        assert_eq!(s.unwrap(), 1.0);

        let s = score_relation_relation(&rr(QueryType::DistanceJoin, 0.0), &[w(1.0, 0.0); 3], &cfg);
        assert!((s.unwrap() - 0.7).abs() < 1e-12);

        let s = score_relation_relation(
            &rr(QueryType::DistanceJoin, 300.0),
            &[w(0.8, 200.0), w(0.6, 400.0)],
            &cfg,
        );
        assert!((s.unwrap() - 0.88).abs() < 1e-12);

        assert!(matches!(
            score_relation_relation(&rr(QueryType::SpatialJoin, 0.0), &[], &cfg),
            Err(QualityError::Unsupported(_))
        ));
    }

    fn scored(s: f64) -> EntityRelation {
        EntityRelation {
            score: s,
            ..rel(Operator::DistanceScan, 0.0, GeomKind::Point, GeomKind::Point)
        }
    }

    #[test]
    fn threshold_is_strict() {
        let cfg = QualityConfig::default();
        let (kept, report) = filter_by_threshold(vec![scored(0.9), scored(0.6), scored(0.3)], &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
        assert_eq!(report.rejected, 2);
        assert_eq!(report.rejected_by_operator[&Operator::DistanceScan], 2);

        let zero = QualityConfig { threshold: 0.0, ..cfg.clone() };
        let (kept, _) = filter_by_threshold(vec![scored(0.0), scored(0.01)], &zero);
        assert_eq!(kept.len(), 1);

        let one = QualityConfig { threshold: 1.0, ..cfg };
        assert!(filter_by_threshold(vec![scored(1.0)], &one).0.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(QualityConfig::default().validate().is_ok());
        let bad = QualityConfig { w_type: 0.3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QualityConfig { lambda_m: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
