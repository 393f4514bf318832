use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Projection;
use crate::table::EmbeddingSet;

/// Anchors per axis in the controllability grid.
pub const ANCHOR_CELLS: usize = 5;
/// Lattice samples per axis.
pub const DEFAULT_RESOLUTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::DegenerateBounds(format!(
                "x [{}, {}], y [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    /// Smallest rectangle containing every point.
    pub fn enclosing(points: &[[f64; 2]]) -> Result<Self> {
        let mut b = Bounds {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            b.x_min = b.x_min.min(p[0]);
            b.x_max = b.x_max.max(p[0]);
            b.y_min = b.y_min.min(p[1]);
            b.y_max = b.y_max.max(p[1]);
        }
        b.validate()?;
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.x_min, self.x_max),
            p[1].clamp(self.y_min, self.y_max),
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }
}

/// Geometry of the sampling lattice and the anchor grid over a rectangle.
///
/// Anchor `(row, col)` sits at the center of cell `(row, col)` of an equal
/// `cells × cells` partition; rows run along y and columns along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub bounds: Bounds,
    pub resolution: usize,
    pub cells: usize,
}

impl GridGeometry {
    pub fn new(bounds: Bounds, resolution: usize, cells: usize) -> Result<Self> {
        bounds.validate()?;
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "resolution must be at least 2, got {resolution}"
            )));
        }
        if cells == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        Ok(GridGeometry {
            bounds,
            resolution,
            cells,
        })
    }

    /// Horizontal anchor spacing: the unit of grid distance.
    pub fn unit_x(&self) -> f64 {
        self.bounds.width() / self.cells as f64
    }

    pub fn unit_y(&self) -> f64 {
        self.bounds.height() / self.cells as f64
    }

    pub fn anchor(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.bounds.x_min + (col as f64 + 0.5) * self.unit_x(),
            self.bounds.y_min + (row as f64 + 0.5) * self.unit_y(),
        ]
    }

    pub fn anchors(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.cells)
            .map(|r| (0..self.cells).map(|c| self.anchor(r, c)).collect())
            .collect()
    }

    /// Nearest anchor `(row, col)` to a point.
    pub fn nearest_anchor(&self, p: [f64; 2]) -> (usize, usize) {
        let idx = |v: f64, lo: f64, unit: f64| {
            (((v - lo) / unit).floor().max(0.0) as usize).min(self.cells - 1)
        };
        (
            idx(p[1], self.bounds.y_min, self.unit_y()),
            idx(p[0], self.bounds.x_min, self.unit_x()),
        )
    }

    pub fn lattice_step_x(&self) -> f64 {
        self.bounds.width() / (self.resolution - 1) as f64
    }

    pub fn lattice_step_y(&self) -> f64 {
        self.bounds.height() / (self.resolution - 1) as f64
    }

    /// Lattice sample `(xi, yi)`, both edges inclusive.
    pub fn lattice_point(&self, xi: usize, yi: usize) -> [f64; 2] {
        let last = self.resolution - 1;
        let x = if xi == last {
            self.bounds.x_max
        } else {
            self.bounds.x_min + xi as f64 * self.lattice_step_x()
        };
        let y = if yi == last {
            self.bounds.y_max
        } else {
            self.bounds.y_min + yi as f64 * self.lattice_step_y()
        };
        [x, y]
    }

    /// Nearest lattice indices `(xi, yi)` to a point (clamped into bounds).
    pub fn nearest_lattice(&self, p: [f64; 2]) -> (usize, usize) {
        let p = self.bounds.clamp(p);
        let last = (self.resolution - 1) as f64;
        let xi = ((p[0] - self.bounds.x_min) / self.lattice_step_x()).round().min(last);
        let yi = ((p[1] - self.bounds.y_min) / self.lattice_step_y()).round().min(last);
        (xi as usize, yi as usize)
    }

    /// Euclidean distance after scaling each axis by its anchor spacing, so
    /// horizontally adjacent anchors are 1 apart and diagonal ones √2.
    pub fn distance_grid_units(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        ((p[0] - q[0]) / self.unit_x()).hypot((p[1] - q[1]) / self.unit_y())
    }
}

/// The sampling grid plus the latent vector behind every lattice point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(flatten)]
    pub geometry: GridGeometry,
    pub anchors: Vec<Vec<[f64; 2]>>,
    /// Horizontal anchor spacing in latent units.
    pub unit: f64,
    /// `latent_points[yi * resolution + xi]` = inverse projection of lattice
    /// sample `(xi, yi)`.
    pub latent_points: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn from_geometry(geometry: GridGeometry, projection: &Projection) -> Self {
        let res = geometry.resolution;
        let latent_points = (0..res * res)
            .map(|i| projection.inverse_project(geometry.lattice_point(i % res, i / res)))
            .collect();
        GridSpec {
            anchors: geometry.anchors(),
            unit: geometry.unit_x(),
            geometry,
            latent_points,
        }
    }

    pub fn latent_point(&self, xi: usize, yi: usize) -> &[f64] {
        &self.latent_points[yi * self.geometry.resolution + xi]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: GridSpec = serde_json::from_str(&text)?;
        let g = &spec.geometry;
        GridGeometry::new(g.bounds, g.resolution, g.cells)?;
        if spec.latent_points.len() != g.resolution * g.resolution {
            return Err(Error::DimensionMismatch {
                expected: g.resolution * g.resolution,
                got: spec.latent_points.len(),
            });
        }
        Ok(spec)
    }
}

/// Projects the embeddings, takes their bounding rectangle, lays a
/// `resolution × resolution` lattice over it and inverse-projects every
/// lattice point.
pub fn build_grid(
    projection: &Projection,
    embeddings: &EmbeddingSet,
    resolution: usize,
) -> Result<GridSpec> {
    build_grid_with_cells(projection, embeddings, resolution, ANCHOR_CELLS)
}

pub fn build_grid_with_cells(
    projection: &Projection,
    embeddings: &EmbeddingSet,
    resolution: usize,
    cells: usize,
) -> Result<GridSpec> {
    let points = projection.project_all(embeddings)?;
    let bounds = Bounds::enclosing(&points)?;
    let geometry = GridGeometry::new(bounds, resolution, cells)?;
    Ok(GridSpec::from_geometry(geometry, projection))
}

/// Distance in grid units between two points of a grid.
pub fn distance_grid_units(spec: &GridSpec, p: [f64; 2], q: [f64; 2]) -> f64 {
    spec.geometry.distance_grid_units(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(Bounds::new(0.0, 10.0, 0.0, 2.0).unwrap(), 100, 5).unwrap()
    }

    #[test]
    fn anchor_placement_and_unit() {
        let g = geom();
        assert_eq!(g.anchor(0, 0), [1.0, 0.2]);
        assert_eq!(g.unit_x(), 2.0);
        let a = g.anchor(4, 4);
        assert!((a[0] - 9.0).abs() < 1e-12 && (a[1] - 1.8).abs() < 1e-12);
    }

    #[test]
    fn grid_unit_distances() {
        let g = geom();
        let p = g.anchor(2, 2);
        assert_eq!(g.distance_grid_units(p, p), 0.0);
        assert!((g.distance_grid_units(g.anchor(2, 2), g.anchor(2, 3)) - 1.0).abs() < 1e-12);
        assert!((g.distance_grid_units(g.anchor(1, 1), g.anchor(2, 2)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lattice_covers_bounds_inclusive() {
        let g = geom();
        assert_eq!(g.lattice_point(0, 0), [0.0, 0.0]);
        assert_eq!(g.lattice_point(99, 99), [10.0, 2.0]);
        assert_eq!(g.nearest_lattice([10.0, 2.0]), (99, 99));
        assert_eq!(g.nearest_lattice([-5.0, 50.0]), (0, 99));
        assert_eq!(g.nearest_lattice(g.lattice_point(37, 61)), (37, 61));
    }

    #[test]
    fn nearest_anchor_cells() {
        let g = geom();
        assert_eq!(g.nearest_anchor(g.anchor(3, 1)), (3, 1));
        assert_eq!(g.nearest_anchor([10.0, 2.0]), (4, 4));
        assert_eq!(g.nearest_anchor([-1.0, -1.0]), (0, 0));
    }

    #[test]
    fn degenerate_bounds() {
        assert!(matches!(
            Bounds::new(1.0, 1.0, 0.0, 2.0),
            Err(Error::DegenerateBounds(_))
        ));
        assert!(Bounds::enclosing(&[[0.0, 0.0], [1.0, 0.0]]).is_err());
    }
}
