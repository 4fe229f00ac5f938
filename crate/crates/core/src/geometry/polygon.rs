use super::{cross, on_segment, segments_cross, segments_intersect, GeometryError, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.min_x >= self.min_x
            && other.min_y >= self.min_y
            && other.max_x <= self.max_x
            && other.max_y <= self.max_y
    }

    fn union(self, other: BoundingBox) -> BoundingBox {
        BoundingBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }
}

/// A polygon with one exterior ring and zero or more holes.
///
/// Rings are stored open: the closing vertex is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<Point>>,
}

impl Polygon {
    /// Accepts rings either closed (first == last) or open.
    pub fn new(rings: Vec<Vec<Point>>) -> Result<Self, GeometryError> {
        let mut out = Vec::with_capacity(rings.len());
        for mut ring in rings {
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            ring.dedup();
            if ring.len() < 3 {
                return Err(GeometryError::DegenerateRing);
            }
            out.push(ring);
        }
        if out.is_empty() {
            return Err(GeometryError::DegenerateRing);
        }
        Ok(Polygon { rings: out })
    }

    pub fn exterior(&self) -> &[Point] {
        &self.rings[0]
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| (0..r.len()).map(move |i| (r[i], r[(i + 1) % r.len()])))
    }

    pub fn area(&self) -> f64 {
        let mut rings = self.rings.iter().map(|r| ring_signed_area(r).abs());
        let outer = rings.next().unwrap_or(0.0);
        (outer - rings.sum::<f64>()).max(0.0)
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut b = BoundingBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in self.exterior() {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    /// Even-odd ray casting over every ring. Points exactly on an edge get
    /// whatever the half-open crossing rule gives; use [`Polygon::contains`]
    /// for closed membership.
    pub fn contains_even_odd(&self, p: Point) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let n = ring.len();
            let mut j = n - 1;
            for i in 0..n {
                let (a, b) = (ring[i], ring[j]);
                if (a.y > p.y) != (b.y > p.y) {
                    let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                    if p.x < x_cross {
                        inside = !inside;
                    }
                }
                j = i;
            }
        }
        inside
    }

    pub fn on_boundary(&self, p: Point) -> bool {
        self.edges().any(|(a, b)| on_segment(a, b, p))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.on_boundary(p) || self.contains_even_odd(p)
    }

    /// Checks every ring for non-adjacent edge intersections.
    pub fn check_simple(&self) -> Result<(), GeometryError> {
        let edges: Vec<(usize, usize, Point, Point)> = self
            .rings
            .iter()
            .enumerate()
            .flat_map(|(ri, r)| (0..r.len()).map(move |i| (ri, i, r[i], r[(i + 1) % r.len()])))
            .collect();
        for (ei, &(ri, i, a, b)) in edges.iter().enumerate() {
            let ring_len = self.rings[ri].len();
            for (ej, &(rj, j, c, d)) in edges.iter().enumerate().skip(ei + 1) {
                let adjacent = ri == rj && (j == (i + 1) % ring_len || i == (j + 1) % ring_len);
                let hit = if adjacent {
                    // adjacent edges may only share their common vertex
                    let (shared, u, v) = if b == c { (b, a, d) } else { (a, b, c) };
                    let dot =
                        (u.x - shared.x) * (v.x - shared.x) + (u.y - shared.y) * (v.y - shared.y);
                    cross(shared, u, v) == 0.0 && dot > 0.0
                } else {
                    segments_intersect(a, b, c, d)
                };
                if hit {
                    return Err(GeometryError::SelfIntersection(ei, ej));
                }
            }
        }
        Ok(())
    }
}

fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

/// One or more polygons; a plain POLYGON is a multipolygon of one.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon {
    polygons: Vec<Polygon>,
}

impl MultiPolygon {
    pub fn new(polygons: Vec<Polygon>) -> Result<Self, GeometryError> {
        if polygons.is_empty() {
            return Err(GeometryError::DegenerateRing);
        }
        Ok(MultiPolygon { polygons })
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    pub fn bbox(&self) -> BoundingBox {
        self.polygons
            .iter()
            .map(Polygon::bbox)
            .reduce(BoundingBox::union)
            .expect("multipolygon is never empty")
    }

    pub fn contains(&self, p: Point) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    pub fn contains_even_odd(&self, p: Point) -> bool {
        self.polygons.iter().any(|poly| poly.contains_even_odd(p))
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polygons.iter().flat_map(Polygon::edges)
    }

    pub fn check_simple(&self) -> Result<(), GeometryError> {
        self.polygons.iter().try_for_each(Polygon::check_simple)
    }

    pub(crate) fn properly_crossed_by(&self, a: Point, b: Point) -> bool {
        self.edges().any(|(c, d)| segments_cross(a, b, c, d))
    }
}

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        MultiPolygon { polygons: vec![p] }
    }
}
