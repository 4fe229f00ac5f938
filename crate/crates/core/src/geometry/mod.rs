//! Planar territory, subregions and the analysis grid.
//!
//! All computation is planar in meters. A CRS code is carried as metadata
//! only and never used for reprojection.

mod grid;
mod polygon;
mod wkt;

pub use grid::Grid;
pub use polygon::{BoundingBox, MultiPolygon, Polygon};
pub use wkt::{parse_wkt, to_wkt};

use thiserror::Error;

const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("WKT parse error at byte {offset}: {message}")]
    Wkt { offset: usize, message: String },
    #[error("polygon ring has fewer than 3 distinct vertices")]
    DegenerateRing,
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("geometry has zero area: {0}")]
    ZeroArea(String),
    #[error("tile dimensions must be positive, got {0} x {1}")]
    InvalidTileDims(f64, f64),
    #[error("tile id {0} outside grid of {1} tiles")]
    InvalidTile(u64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// A named territorial unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Subregion {
    pub id: u64,
    pub long_name: String,
    pub area: MultiPolygon,
}

/// The simulated territory: boundary polygon plus its subregions.
#[derive(Debug, Clone, PartialEq)]
pub struct Territory {
    boundary: MultiPolygon,
    subregions: Vec<Subregion>,
    crs_code: u32,
}

impl Territory {
    /// Builds a territory, rejecting self-intersecting boundaries and
    /// zero-area boundaries or subregions.
    pub fn new(
        boundary: MultiPolygon,
        subregions: Vec<Subregion>,
        crs_code: u32,
    ) -> Result<Self, GeometryError> {
        boundary.check_simple()?;
        if boundary.area() <= 0.0 {
            return Err(GeometryError::ZeroArea("territory boundary".into()));
        }
        for s in &subregions {
            if s.area.area() <= 0.0 {
                return Err(GeometryError::ZeroArea(format!(
                    "subregion {}",
                    s.long_name
                )));
            }
        }
        Ok(Territory {
            boundary,
            subregions,
            crs_code,
        })
    }

    pub fn boundary(&self) -> &MultiPolygon {
        &self.boundary
    }

    pub fn subregions(&self) -> &[Subregion] {
        &self.subregions
    }

    pub fn crs_code(&self) -> u32 {
        self.crs_code
    }

    pub fn bbox(&self) -> BoundingBox {
        self.boundary.bbox()
    }

    pub fn area(&self) -> f64 {
        self.boundary.area()
    }

    /// Closed containment: points on the boundary are inside.
    pub fn contains(&self, p: Point) -> bool {
        self.boundary.contains(p)
    }

    /// True when the straight segment `a`-`b` stays within the territory.
    pub fn contains_segment(&self, a: Point, b: Point) -> bool {
        self.contains(a)
            && self.contains(b)
            && self.contains(Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0))
            && !self.boundary.properly_crossed_by(a, b)
    }

    /// First-listed subregion containing `p`. Points on a border shared by
    /// several subregions resolve to the earliest one.
    pub fn subregion_of(&self, p: Point) -> Option<&Subregion> {
        self.subregions.iter().find(|s| s.area.contains(p))
    }
}

/// Orientation of `p` relative to the directed line `a -> b`.
fn cross(a: Point, b: Point, p: Point) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    let len = a.distance(&b);
    let tol = BOUNDARY_EPS * (1.0 + len);
    if cross(a, b, p).abs() > tol * len.max(1.0) {
        return false;
    }
    p.x >= a.x.min(b.x) - tol
        && p.x <= a.x.max(b.x) + tol
        && p.y >= a.y.min(b.y) - tol
        && p.y <= a.y.max(b.y) + tol
}

/// Proper crossing: the open segments intersect at a single interior point.
fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Any intersection, including touching and collinear overlap.
fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    segments_cross(a, b, c, d)
        || on_segment(c, d, a)
        || on_segment(c, d, b)
        || on_segment(a, b, c)
        || on_segment(a, b, d)
}
