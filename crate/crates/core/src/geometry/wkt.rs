//! WKT reader limited to `POLYGON` and `MULTIPOLYGON`.

use super::{GeometryError, MultiPolygon, Point, Polygon};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> GeometryError {
        GeometryError::Wkt {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), GeometryError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        self.pos += len;
        rest[..len].to_ascii_uppercase()
    }

    fn number(&mut self) -> Result<f64, GeometryError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let v: f64 = rest[..len]
            .parse()
            .map_err(|_| self.err(format!("invalid number '{}'", &rest[..len])))?;
        if !v.is_finite() {
            return Err(self.err("non-finite coordinate"));
        }
        self.pos += len;
        Ok(v)
    }

    fn ring(&mut self) -> Result<Vec<Point>, GeometryError> {
        self.expect('(')?;
        let mut pts = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            pts.push(Point::new(x, y));
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or ')' in coordinate list")),
            }
        }
        if pts.len() < 4 || pts.first() != pts.last() {
            return Err(self.err("ring must be closed and have at least 4 coordinates"));
        }
        Ok(pts)
    }

    fn polygon_body(&mut self) -> Result<Polygon, GeometryError> {
        self.expect('(')?;
        let mut rings = vec![self.ring()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            rings.push(self.ring()?);
        }
        self.expect(')')?;
        Polygon::new(rings)
    }
}

/// Parses a `POLYGON` or `MULTIPOLYGON` into a [`MultiPolygon`].
pub fn parse_wkt(text: &str) -> Result<MultiPolygon, GeometryError> {
    let mut c = Cursor { src: text, pos: 0 };
    let tag = c.word();
    let mp = match tag.as_str() {
        "POLYGON" => MultiPolygon::from(c.polygon_body()?),
        "MULTIPOLYGON" => {
            c.expect('(')?;
            let mut polys = vec![c.polygon_body()?];
            while c.peek() == Some(',') {
                c.pos += 1;
                polys.push(c.polygon_body()?);
            }
            c.expect(')')?;
            MultiPolygon::new(polys)?
        }
        "" => return Err(c.err("empty geometry text")),
        other => return Err(c.err(format!("unsupported geometry type {other}"))),
    };
    if c.peek().is_some() {
        return Err(c.err("trailing characters"));
    }
    Ok(mp)
}

fn write_ring(out: &mut String, ring: &[Point]) {
    out.push('(');
    for p in ring.iter().chain(ring.first()) {
        if !out.ends_with('(') {
            out.push_str(", ");
        }
        out.push_str(&format!("{} {}", p.x, p.y));
    }
    out.push(')');
}

fn write_polygon(out: &mut String, poly: &Polygon) {
    out.push('(');
    for (i, ring) in poly.rings().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_ring(out, ring);
    }
    out.push(')');
}

/// Serializes back to WKT; a single polygon is written as `POLYGON`.
pub fn to_wkt(mp: &MultiPolygon) -> String {
    let mut out = String::new();
    match mp.polygons() {
        [single] => {
            out.push_str("POLYGON ");
            write_polygon(&mut out, single);
        }
        many => {
            out.push_str("MULTIPOLYGON (");
            for (i, p) in many.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_polygon(&mut out, p);
            }
            out.push(')');
        }
    }
    out
}
