use super::{BoundingBox, GeometryError, Point, Territory};
use crate::TileId;

/// Rectangular analysis grid.
///
/// Tiles are numbered row-major from the lower-left corner: tile
/// `row * n_cols + col`. Each tile is half-open `[x0, x1) x [y0, y1)`,
/// except that the grid's own top and right edges are closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_origin: f64,
    pub y_origin: f64,
    pub tile_dim_x: f64,
    pub tile_dim_y: f64,
    pub n_cols: u64,
    pub n_rows: u64,
}

// Tolerance for floating-point quotients that should be integral.
const CEIL_EPS: f64 = 1e-9;

fn cells_needed(extent: f64, dim: f64) -> u64 {
    ((extent / dim - CEIL_EPS).ceil() as u64).max(1)
}

impl Grid {
    /// Smallest grid anchored at the territory's bounding-box lower-left
    /// corner whose envelope covers the bounding box.
    pub fn build(
        territory: &Territory,
        tile_dim_x: f64,
        tile_dim_y: f64,
    ) -> Result<Grid, GeometryError> {
        Grid::covering(&territory.bbox(), tile_dim_x, tile_dim_y)
    }

    pub fn covering(
        bbox: &BoundingBox,
        tile_dim_x: f64,
        tile_dim_y: f64,
    ) -> Result<Grid, GeometryError> {
        if !(tile_dim_x > 0.0 && tile_dim_y > 0.0)
            || !tile_dim_x.is_finite()
            || !tile_dim_y.is_finite()
        {
            return Err(GeometryError::InvalidTileDims(tile_dim_x, tile_dim_y));
        }
        if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
            return Err(GeometryError::ZeroArea("territory bounding box".into()));
        }
        Ok(Grid {
            x_origin: bbox.min_x,
            y_origin: bbox.min_y,
            tile_dim_x,
            tile_dim_y,
            n_cols: cells_needed(bbox.width(), tile_dim_x),
            n_rows: cells_needed(bbox.height(), tile_dim_y),
        })
    }

    pub fn n_tiles(&self) -> u64 {
        self.n_cols * self.n_rows
    }

    pub fn x_max(&self) -> f64 {
        self.x_origin + self.n_cols as f64 * self.tile_dim_x
    }

    pub fn y_max(&self) -> f64 {
        self.y_origin + self.n_rows as f64 * self.tile_dim_y
    }

    fn axis_index(v: f64, origin: f64, dim: f64, n: u64, max: f64) -> Option<u64> {
        if !(v >= origin && v <= max) {
            return None;
        }
        let idx = ((v - origin) / dim).floor() as u64;
        Some(idx.min(n - 1))
    }

    /// Tile containing `p`, or `None` outside the grid envelope.
    pub fn tile_of(&self, p: Point) -> Option<TileId> {
        let col = Self::axis_index(
            p.x,
            self.x_origin,
            self.tile_dim_x,
            self.n_cols,
            self.x_max(),
        )?;
        let row = Self::axis_index(
            p.y,
            self.y_origin,
            self.tile_dim_y,
            self.n_rows,
            self.y_max(),
        )?;
        Some(TileId(row * self.n_cols + col))
    }

    /// Tile of `p` after clamping it into the grid envelope.
    pub fn tile_of_clamped(&self, p: Point) -> TileId {
        let q = Point::new(
            p.x.clamp(self.x_origin, self.x_max()),
            p.y.clamp(self.y_origin, self.y_max()),
        );
        self.tile_of(q).expect("clamped point lies in the grid")
    }

    pub fn tile_center(&self, tile: TileId) -> Result<Point, GeometryError> {
        if tile.0 >= self.n_tiles() {
            return Err(GeometryError::InvalidTile(tile.0, self.n_tiles()));
        }
        let (row, col) = (tile.0 / self.n_cols, tile.0 % self.n_cols);
        Ok(Point::new(
            self.x_origin + (col as f64 + 0.5) * self.tile_dim_x,
            self.y_origin + (row as f64 + 0.5) * self.tile_dim_y,
        ))
    }

    pub fn tiles(&self) -> impl Iterator<Item = TileId> {
        (0..self.n_tiles()).map(TileId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::parse_wkt;
    use proptest::prelude::*;

    fn territory(w: f64, h: f64) -> Territory {
        let wkt = format!("POLYGON((0 0, {w} 0, {w} {h}, 0 {h}, 0 0))");
        Territory::new(parse_wkt(&wkt).unwrap(), vec![], 0).unwrap()
    }

    fn three_cols() -> Grid {
        Grid {
            x_origin: 0.0,
            y_origin: 0.0,
            tile_dim_x: 10.0,
            tile_dim_y: 10.0,
            n_cols: 3,
            n_rows: 2,
        }
    }

    #[test]
    fn exact_division() {
        let g = Grid::build(&territory(100.0, 100.0), 10.0, 10.0).unwrap();
        assert_eq!((g.n_cols, g.n_rows), (10, 10));
    }

    #[test]
    fn ceiling_rule() {
        let g = Grid::build(&territory(95.0, 100.0), 10.0, 10.0).unwrap();
        assert_eq!((g.n_cols, g.n_rows), (10, 10));
    }

    #[test]
    fn single_tile() {
        let g = Grid::build(&territory(40.0, 40.0), 40.0, 40.0).unwrap();
        assert_eq!(g.n_tiles(), 1);
        assert_eq!(g.tile_of(Point::new(40.0, 40.0)), Some(TileId(0)));
    }

    #[test]
    fn non_positive_dims_rejected() {
        assert!(Grid::build(&territory(10.0, 10.0), 0.0, 1.0).is_err());
        assert!(Grid::build(&territory(10.0, 10.0), 1.0, -1.0).is_err());
    }

    #[test]
    fn tile_index_arithmetic() {
        let g = three_cols();
        assert_eq!(g.tile_of(Point::new(5.0, 5.0)), Some(TileId(0)));
        assert_eq!(g.tile_of(Point::new(25.0, 5.0)), Some(TileId(2)));
        assert_eq!(g.tile_of(Point::new(5.0, 15.0)), Some(TileId(3)));
        assert_eq!(g.tile_of(Point::new(-0.1, 5.0)), None);
        assert_eq!(g.tile_of(Point::new(5.0, 20.1)), None);
    }

    #[test]
    fn shared_edges_go_to_larger_index() {
        let g = three_cols();
        assert_eq!(g.tile_of(Point::new(10.0, 5.0)), Some(TileId(1)));
        assert_eq!(g.tile_of(Point::new(5.0, 10.0)), Some(TileId(3)));
        // closed on the outer top/right edges
        assert_eq!(g.tile_of(Point::new(30.0, 20.0)), Some(TileId(5)));
    }

    #[test]
    fn tile_centers() {
        let g = three_cols();
        assert_eq!(g.tile_center(TileId(0)).unwrap(), Point::new(5.0, 5.0));
        assert_eq!(g.tile_center(TileId(2)).unwrap(), Point::new(25.0, 5.0));
        assert_eq!(g.tile_center(TileId(3)).unwrap(), Point::new(5.0, 15.0));
        assert!(g.tile_center(TileId(6)).is_err());
    }

    proptest! {
        #[test]
        fn center_round_trips(cols in 1u64..40, rows in 1u64..40, dx in 0.5f64..50.0, dy in 0.5f64..50.0, x0 in -1e4f64..1e4, y0 in -1e4f64..1e4) {
            let g = Grid { x_origin: x0, y_origin: y0, tile_dim_x: dx, tile_dim_y: dy, n_cols: cols, n_rows: rows };
            for t in g.tiles() {
                prop_assert_eq!(g.tile_of(g.tile_center(t).unwrap()), Some(t));
            }
        }

        #[test]
        fn every_point_in_envelope_has_one_tile(fx in 0.0f64..=1.0, fy in 0.0f64..=1.0, w in 1.0f64..500.0, h in 1.0f64..500.0) {
            let g = Grid::build(&territory(w, h), 7.0, 11.0).unwrap();
            prop_assert!(g.x_max() >= w && g.y_max() >= h);
            let t = g.tile_of(Point::new(fx * w, fy * h));
            prop_assert!(t.is_some_and(|t| t.0 < g.n_tiles()));
        }
    }
}
