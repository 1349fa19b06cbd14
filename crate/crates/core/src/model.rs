//! Domain types: point sources, observation sets, continuation grids, layer
//! densities, and the noise specification.
//!
//! Everything here is immutable after construction and safe to share
//! read-only across threads. All lengths are nondimensional; the vertical
//! coordinate `x3` points upward, so subsurface positions have `x3 < 0`.

use std::sync::Arc;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[a1, b1] x [a2, b2]` in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Rect {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        let r = Rect { a1, b1, a2, b2 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a1, self.b1, self.a2, self.b2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteData("rectangle extent".into()));
        }
        if !(self.b1 > self.a1) || !(self.b2 > self.a2) {
            return Err(Error::InvalidGeometry(format!(
                "degenerate extent [{}, {}] x [{}, {}]",
                self.a1, self.b1, self.a2, self.b2
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.b1 - self.a1
    }

    pub fn height(&self) -> f64 {
        self.b2 - self.a2
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Uniform corner-to-corner lattice of `n + 1` coordinates over `[a, b]`.
///
/// Endpoints are returned exactly, interior points as the convex
/// combination `(a (n - i) + b i) / n`, which lands on exact dyadic and
/// decimal values whenever `a`, `b`, and `i/n` allow it. Every caller uses
/// this one helper, so observation and continuation grids built over the
/// same extent share bitwise-identical coordinates.
fn lattice(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n {
                b
            } else {
                (a * (n - i) as f64 + b * i as f64) / n as f64
            }
        })
        .collect()
}

fn serialize_point<S: serde::Serializer>(p: &Point3<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    [p.x, p.y, p.z].serialize(s)
}

fn deserialize_point<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Point3<f64>, D::Error> {
    let [x, y, z] = <[f64; 3]>::deserialize(d)?;
    Ok(Point3::new(x, y, z))
}

/// A point mass generating a gravity anomaly.
///
/// Masses are nondimensional with the gravitational constant folded into the
/// forward model (`G = 1` by default). The implemented solution class assumes
/// constant-sign anomalies, so the mass must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub mass: f64,
    #[serde(serialize_with = "serialize_point", deserialize_with = "deserialize_point")]
    pub position: Point3<f64>,
}

impl PointSource {
    pub fn new(mass: f64, position: Point3<f64>) -> Result<Self> {
        if !mass.is_finite() || !position.coords.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData("point source".into()));
        }
        if mass <= 0.0 {
            return Err(Error::Usage(format!(
                "source mass must be positive, got {mass}"
            )));
        }
        Ok(PointSource { mass, position })
    }
}

/// Surface observation points together with measured vertical-derivative
/// values of the gravitational potential.
///
/// Points may lie on a relief `x3 = z(x1, x2) >= 0`; the planar case
/// `x3 = 0` is the one exercised by the built-in benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    points: Vec<Point3<f64>>,
    values: Vec<f64>,
}

impl ObservationSet {
    /// Builds an observation set from explicit points and values.
    pub fn new(points: Vec<Point3<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Usage("observation set must contain at least one point".into()));
        }
        if points.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} observation points but {} values",
                points.len(),
                values.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.coords.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteData(format!("observation point #{i}")));
            }
            if p.z < 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "observation point #{i} has x3 = {} < 0",
                    p.z
                )));
            }
        }
        Ok(ObservationSet { points, values })
    }

    /// Regular `(n1 + 1) x (n2 + 1)` lattice over `extent` at the given
    /// elevation, corner-to-corner inclusive, row-major with `x1` fastest.
    /// Values are set to zero; fill them with [`ObservationSet::with_values`].
    pub fn regular_grid(extent: Rect, n1: usize, n2: usize, elevation: f64) -> Result<Self> {
        extent.validate()?;
        if n1 < 1 || n2 < 1 {
            return Err(Error::InvalidGeometry(format!(
                "subdivision counts must be >= 1, got ({n1}, {n2})"
            )));
        }
        if !elevation.is_finite() || elevation < 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "observation elevation must be finite and >= 0, got {elevation}"
            )));
        }
        let xs = lattice(extent.a1, extent.b1, n1);
        let ys = lattice(extent.a2, extent.b2, n2);
        let mut points = Vec::with_capacity((n1 + 1) * (n2 + 1));
        for &y in &ys {
            for &x in &xs {
                points.push(Point3::new(x, y, elevation));
            }
        }
        let n = points.len();
        Ok(ObservationSet { points, values: vec![0.0; n] })
    }

    /// Returns a copy of this set with the values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} observation points but {} values",
                self.points.len(),
                values.len()
            )));
        }
        Ok(ObservationSet { points: self.points.clone(), values })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest absolute value, zero for all-zero data.
    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Regular rectangular node lattice on the continuation plane `x3 = -h`.
///
/// The grid has `(m1 + 1)(m2 + 1)` nodes placed corner-to-corner inclusive,
/// row-major with `x1` fastest, each carrying an equal quadrature cell area
/// so that the areas sum to the extent area.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationGrid {
    extent: Rect,
    m1: usize,
    m2: usize,
    depth: f64,
    nodes: Vec<Point3<f64>>,
    cell_areas: Vec<f64>,
}

impl ContinuationGrid {
    pub fn new(extent: Rect, m1: usize, m2: usize, depth: f64) -> Result<Self> {
        extent.validate()?;
        if m1 < 1 || m2 < 1 {
            return Err(Error::InvalidGeometry(format!(
                "subdivision counts must be >= 1, got ({m1}, {m2})"
            )));
        }
        if !depth.is_finite() || depth <= 0.0 {
            return Err(Error::InvalidDepth { depth });
        }
        let xs = lattice(extent.a1, extent.b1, m1);
        let ys = lattice(extent.a2, extent.b2, m2);
        let count = (m1 + 1) * (m2 + 1);
        let mut nodes = Vec::with_capacity(count);
        let z = -depth;
        for &y in &ys {
            for &x in &xs {
                nodes.push(Point3::new(x, y, z));
            }
        }
        let cell_area = extent.area() / count as f64;
        Ok(ContinuationGrid {
            extent,
            m1,
            m2,
            depth,
            nodes,
            cell_areas: vec![cell_area; count],
        })
    }

    pub fn extent(&self) -> Rect {
        self.extent
    }

    pub fn subdivisions(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// Continuation depth `h > 0`; nodes sit at `x3 = -h`.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn nodes(&self) -> &[Point3<f64>] {
        &self.nodes
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.cell_areas
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node index for lattice coordinates `(i1, i2)`, `x1` fastest.
    pub fn node_index(&self, i1: usize, i2: usize) -> usize {
        i2 * (self.m1 + 1) + i1
    }

    /// Lattice coordinates `(i1, i2)` of a node index.
    pub fn lattice_coords(&self, index: usize) -> (usize, usize) {
        (index % (self.m1 + 1), index / (self.m1 + 1))
    }
}

/// Non-negative simple-layer density sampled at the nodes of a
/// [`ContinuationGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDensity {
    grid: Arc<ContinuationGrid>,
    phi: Vec<f64>,
}

impl LayerDensity {
    pub fn new(grid: Arc<ContinuationGrid>, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} density values for {} grid nodes",
                phi.len(),
                grid.node_count()
            )));
        }
        for (j, &v) in phi.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData(format!("density value #{j}")));
            }
            if v < 0.0 {
                return Err(Error::Usage(format!(
                    "density value #{j} is negative ({v}); the layer density must be non-negative"
                )));
            }
        }
        Ok(LayerDensity { grid, phi })
    }

    pub fn grid(&self) -> &Arc<ContinuationGrid> {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Total reconstructed mass `sum_j phi_j * dS_j`.
    pub fn total_mass(&self) -> f64 {
        self.phi
            .iter()
            .zip(self.grid.cell_areas())
            .map(|(p, a)| p * a)
            .sum()
    }

    /// Per-node masses `phi_j * dS_j`.
    pub fn node_masses(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(self.grid.cell_areas())
            .map(|(p, a)| p * a)
            .collect()
    }
}

/// Relative noise level and generator seed for synthetic measurement errors.
///
/// `delta = 0` leaves the data untouched; otherwise each value receives an
/// additive perturbation `delta * max|f| * sigma_i` with `sigma_i` drawn from
/// the deterministic standard-normal stream seeded by `seed`
/// (see [`crate::noise::NormalStream`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { delta: 0.0, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::Usage(format!(
                "noise level must be finite and >= 0, got {delta}"
            )));
        }
        Ok(NoiseSpec { delta, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_lattice_observation_grid() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let obs = ObservationSet::regular_grid(extent, 1, 1, 0.0).unwrap();
        assert_eq!(obs.len(), 4);
        let pts = obs.points();
        assert_eq!(pts[0], Point3::new(-1.0, -1.0, 0.0));
        assert_eq!(pts[1], Point3::new(1.0, -1.0, 0.0));
        assert_eq!(pts[2], Point3::new(-1.0, 1.0, 0.0));
        assert_eq!(pts[3], Point3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn benchmark_grid_has_1681_points() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let obs = ObservationSet::regular_grid(extent, 40, 40, 0.0).unwrap();
        assert_eq!(obs.len(), 1681);
    }

    #[test]
    fn rectangular_grid_spacing() {
        let extent = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let obs = ObservationSet::regular_grid(extent, 2, 1, 0.0).unwrap();
        assert_eq!(obs.len(), 6);
        let pts = obs.points();
        // x1 fastest: (0,0) (1,0) (2,0) (0,1) (1,1) (2,1)
        assert_eq!(pts[0], Point3::new(0.0, 0.0, 0.0));
        assert_eq!(pts[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(pts[2], Point3::new(2.0, 0.0, 0.0));
        assert_eq!(pts[3], Point3::new(0.0, 1.0, 0.0));
        assert_eq!(pts[4], Point3::new(1.0, 1.0, 0.0));
        assert_eq!(pts[5], Point3::new(2.0, 1.0, 0.0));
    }

    #[test]
    fn degenerate_extent_rejected() {
        assert!(matches!(
            Rect::new(0.0, 0.0, -1.0, 1.0),
            Err(Error::InvalidGeometry(_))
        ));
        let extent = Rect { a1: 0.0, b1: 0.0, a2: 0.0, b2: 1.0 };
        assert!(ObservationSet::regular_grid(extent, 1, 1, 0.0).is_err());
    }

    #[test]
    fn continuation_grid_equal_cell_areas() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let grid = ContinuationGrid::new(extent, 40, 40, 0.3).unwrap();
        assert_eq!(grid.node_count(), 1681);
        for &a in grid.cell_areas() {
            assert_eq!(a, 4.0 / 1681.0);
        }
        assert!(grid.nodes().iter().all(|n| n.z == -0.3));
    }

    #[test]
    fn tiny_continuation_grid() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let grid = ContinuationGrid::new(extent, 1, 1, 0.5).unwrap();
        assert_eq!(grid.node_count(), 4);
        assert_eq!(grid.nodes()[0], Point3::new(-1.0, -1.0, -0.5));
        assert_eq!(grid.nodes()[3], Point3::new(1.0, 1.0, -0.5));
        for &a in grid.cell_areas() {
            assert_eq!(a, 1.0);
        }
    }

    #[test]
    fn zero_subdivisions_rejected() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert!(ContinuationGrid::new(extent, 0, 4, 0.3).is_err());
        assert!(ObservationSet::regular_grid(extent, 4, 0, 0.0).is_err());
    }

    #[test]
    fn nonpositive_depth_rejected() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert!(matches!(
            ContinuationGrid::new(extent, 4, 4, 0.0),
            Err(Error::InvalidDepth { .. })
        ));
        assert!(ContinuationGrid::new(extent, 4, 4, -0.1).is_err());
    }

    #[test]
    fn grid_constructors_are_deterministic() {
        let extent = Rect::new(-1.0, 1.0, -0.5, 2.5).unwrap();
        let a = ContinuationGrid::new(extent, 13, 7, 0.37).unwrap();
        let b = ContinuationGrid::new(extent, 13, 7, 0.37).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.cell_areas(), b.cell_areas());
    }

    #[test]
    fn observation_and_continuation_lattices_coincide() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let obs = ObservationSet::regular_grid(extent, 40, 40, 0.0).unwrap();
        let grid = ContinuationGrid::new(extent, 40, 40, 0.3).unwrap();
        for (p, n) in obs.points().iter().zip(grid.nodes()) {
            assert_eq!(p.x, n.x);
            assert_eq!(p.y, n.y);
        }
    }

    #[test]
    fn cell_areas_sum_to_extent_area() {
        let extent = Rect::new(-1.3, 2.7, 0.1, 1.9).unwrap();
        for m1 in [1usize, 2, 7, 40, 100] {
            for m2 in [1usize, 3, 41, 100] {
                let grid = ContinuationGrid::new(extent, m1, m2, 0.25).unwrap();
                let sum: f64 = grid.cell_areas().iter().sum();
                let rel = (sum - extent.area()).abs() / extent.area();
                assert!(rel <= 1e-12, "m1={m1} m2={m2} rel={rel}");
            }
        }
    }

    #[test]
    fn negative_mass_rejected() {
        assert!(PointSource::new(0.0, Point3::new(0.0, 0.0, -1.0)).is_err());
        assert!(PointSource::new(-2.0, Point3::new(0.0, 0.0, -1.0)).is_err());
        assert!(PointSource::new(0.1, Point3::new(0.0, 0.0, -1.0)).is_ok());
    }

    #[test]
    fn layer_density_validation() {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let grid = Arc::new(ContinuationGrid::new(extent, 1, 1, 0.5).unwrap());
        assert!(LayerDensity::new(grid.clone(), vec![0.0; 4]).is_ok());
        assert!(LayerDensity::new(grid.clone(), vec![0.0; 3]).is_err());
        assert!(LayerDensity::new(grid.clone(), vec![0.0, -1.0, 0.0, 0.0]).is_err());
        let d = LayerDensity::new(grid, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((d.total_mass() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
        assert!(NoiseSpec::new(0.0, 42).is_ok());
        assert_eq!(NoiseSpec::default().delta, 0.0);
    }
}
