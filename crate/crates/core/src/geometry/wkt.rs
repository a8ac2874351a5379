//! WKT subset: `POINT`, `LINESTRING` and `POLYGON` with optional holes.
//!
//! Parsing happens in two steps so loaders can apply mechanical repairs
//! (duplicate vertices, unclosed rings) before geometry validation.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use super::{Geometry, GeometryError, Point, Polyline, Region};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WktError {
    #[error("malformed WKT at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("polygon ring {0} is not closed")]
    UnclosedRing(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Coordinates as written, before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum RawGeometry {
    Point(Point),
    LineString(Vec<Point>),
    Polygon(Vec<Vec<Point>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Repair {
    DroppedDuplicateVertices(usize),
    ClosedRing(usize),
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repair::DroppedDuplicateVertices(n) => write!(f, "dropped {n} duplicate consecutive vertices"),
            Repair::ClosedRing(i) => write!(f, "closed unclosed ring {i}"),
        }
    }
}

fn dedup_consecutive(points: &mut Vec<Point>) -> usize {
    let before = points.len();
    points.dedup();
    before - points.len()
}

impl RawGeometry {
    /// Drops consecutive duplicate vertices and closes open rings.
    pub fn repair(&mut self) -> Vec<Repair> {
        let mut repairs = Vec::new();
        match self {
            RawGeometry::Point(_) => {}
            RawGeometry::LineString(pts) => {
                let n = dedup_consecutive(pts);
                if n > 0 {
                    repairs.push(Repair::DroppedDuplicateVertices(n));
                }
            }
            RawGeometry::Polygon(rings) => {
                let mut dropped = 0;
                for (i, ring) in rings.iter_mut().enumerate() {
                    dropped += dedup_consecutive(ring);
                    if ring.len() >= 2 && ring.first() != ring.last() {
                        let first = ring[0];
                        ring.push(first);
                        repairs.push(Repair::ClosedRing(i));
                    }
                }
                if dropped > 0 {
                    repairs.insert(0, Repair::DroppedDuplicateVertices(dropped));
                }
            }
        }
        repairs
    }

    pub fn into_geometry(self) -> Result<Geometry, WktError> {
        match self {
            RawGeometry::Point(p) => Ok(Geometry::point(p.x, p.y)?),
            RawGeometry::LineString(pts) => Ok(Polyline::new(pts)?.into()),
            RawGeometry::Polygon(mut rings) => {
                if let Some(i) = rings.iter().position(|r| r.len() < 2 || r.first() != r.last()) {
                    return Err(WktError::UnclosedRing(i));
                }
                let outer = rings.remove(0);
                Ok(Region::new(outer, rings)?.into())
            }
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, WktError> {
        Err(WktError::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), WktError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | ','))
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn number(&mut self) -> Result<f64, WktError> {
        self.skip_ws();
        let start = self.pos;
        let w = self.word();
        w.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("expected number, found {w:?}"))
        })
    }

    fn coord(&mut self) -> Result<Point, WktError> {
        let x = self.number()?;
        let y = self.number()?;
        Ok(Point::new(x, y))
    }

    fn coord_list(&mut self) -> Result<Vec<Point>, WktError> {
        self.expect('(')?;
        let mut pts = vec![self.coord()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            pts.push(self.coord()?);
        }
        self.expect(')')?;
        Ok(pts)
    }
}

pub fn parse_raw(text: &str) -> Result<RawGeometry, WktError> {
    let mut cur = Cursor { text, pos: 0 };
    let tag_start = {
        cur.skip_ws();
        cur.pos
    };
    let tag = cur.word().to_ascii_uppercase();
    let raw = match tag.as_str() {
        "POINT" => {
            cur.expect('(')?;
            let p = cur.coord()?;
            cur.expect(')')?;
            RawGeometry::Point(p)
        }
        "LINESTRING" => RawGeometry::LineString(cur.coord_list()?),
        "POLYGON" => {
            cur.expect('(')?;
            let mut rings = vec![cur.coord_list()?];
            while cur.peek() == Some(',') {
                cur.pos += 1;
                rings.push(cur.coord_list()?);
            }
            cur.expect(')')?;
            RawGeometry::Polygon(rings)
        }
        _ => {
            cur.pos = tag_start;
            return cur.err(format!("unsupported geometry type {tag:?}"));
        }
    };
    if cur.peek().is_some() {
        return cur.err("trailing characters");
    }
    Ok(raw)
}

fn write_coords<'a>(out: &mut String, pts: impl IntoIterator<Item = &'a Point>) {
    out.push('(');
    for (i, p) in pts.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.x, p.y);
    }
    out.push(')');
}

pub fn to_wkt(g: &Geometry) -> String {
    let mut out = String::new();
    match g {
        Geometry::Point(p) => {
            let _ = write!(out, "POINT ({} {})", p.x, p.y);
        }
        Geometry::Line(l) => {
            out.push_str("LINESTRING ");
            write_coords(&mut out, l.vertices());
        }
        Geometry::Region(r) => {
            out.push_str("POLYGON (");
            for (i, ring) in r.rings().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let v = ring.vertices();
                write_coords(&mut out, v.iter().chain(std::iter::once(&v[0])));
            }
            out.push(')');
        }
    }
    out
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_wkt(self))
    }
}

impl FromStr for Geometry {
    type Err = WktError;

    /// Strict parse: no repairs are applied.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_raw(s)?.into_geometry()
    }
}
