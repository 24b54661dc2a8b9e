//! Convex-hull approximation of the frequency-nadir constraint.
//!
//! The nadir is convex in (H, D), so its feasible sublevel set within the
//! sampling box is convex. The hull of the feasible Monte Carlo samples is
//! therefore contained in it, and its edges become the linear constraints
//! `w_h·H + w_d·D + b ≥ 0` embedded in the dispatch model.

mod quickhull;

pub use quickhull::quickhull2d;
use quickhull::cross;

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

use crate::rng;
use crate::sfr::{delta_f_nadir, AggregatedSfrParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChaError {
    #[error("no sampled (H, D) point satisfies the nadir limit")]
    EmptyRegion,
    #[error("convex hull is degenerate ({n_vertices} vertices)")]
    DegeneratePolygon { n_vertices: usize },
    #[error("invalid CHA configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    /// Inertia, seconds.
    pub h: f64,
    /// Damping, per-unit.
    pub d: f64,
}

impl Point2 {
    pub const fn new(h: f64, d: f64) -> Self {
        Self { h, d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    /// Counter-clockwise, no three consecutive collinear.
    pub vertices: Vec<Point2>,
    pub degenerate: bool,
}

impl ConvexPolygon {
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.h * b.d - b.h * a.d
            })
            .sum::<f64>()
            * 0.5
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let (h, d) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(h, d), v| (h + v.h, d + v.d));
        Point2::new(h / n, d / n)
    }
}

/// One closed half-plane `w_h·H + w_d·D + b ≥ 0` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub w_h: f64,
    pub w_d: f64,
    pub b: f64,
}

impl Halfspace {
    #[inline]
    pub fn eval(&self, p: Point2) -> f64 {
        self.w_h * p.h + self.w_d * p.d + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub n_samples: usize,
    pub n_feasible: usize,
    pub n_hyperplanes: usize,
    pub wall_time_s: f64,
    pub h_bounds: (f64, f64),
    pub d_bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSet {
    pub planes: Vec<Halfspace>,
    /// The polygon the planes were cut from, kept for plotting and audits.
    pub polygon: ConvexPolygon,
    pub meta: Option<BuildMeta>,
}

/// Slack allowed by [`classify`] for round-off on the hull boundary.
const BOUNDARY_EPS: f64 = 1e-12;

impl HalfspaceSet {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn contains(&self, p: Point2) -> bool {
        classify(self, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaConfig {
    pub n_samples: usize,
    pub h_bounds: (f64, f64),
    pub d_bounds: (f64, f64),
    pub seed: u64,
    /// Spend part of the budget on the box corners and edges.
    pub boundary_samples: bool,
    /// Drop hull vertices whose removal loses less than one sample cell.
    pub simplify: bool,
}

impl ChaConfig {
    pub fn new(h_bounds: (f64, f64), d_bounds: (f64, f64)) -> Self {
        Self {
            n_samples: 50_000,
            h_bounds,
            d_bounds,
            seed: 2023,
            boundary_samples: true,
            simplify: true,
        }
    }

    fn box_area(&self) -> f64 {
        (self.h_bounds.1 - self.h_bounds.0) * (self.d_bounds.1 - self.d_bounds.0)
    }

    /// Samples per box edge, besides the four corners.
    fn edge_samples(&self) -> usize {
        if self.boundary_samples {
            (self.n_samples as f64).sqrt() as usize
        } else {
            0
        }
    }

    /// The `index`-th training point: corners first, then edges, then the
    /// interior. Uniform throughout when boundary sampling is off.
    fn training_point(&self, index: usize) -> Point2 {
        let m = self.edge_samples();
        if m == 0 {
            return self.point(index);
        }
        let (h0, h1) = self.h_bounds;
        let (d0, d1) = self.d_bounds;
        if index < 4 {
            return [
                Point2::new(h0, d0),
                Point2::new(h1, d0),
                Point2::new(h1, d1),
                Point2::new(h0, d1),
            ][index];
        }
        let j = index - 4;
        if j < 4 * m {
            let u: f64 = rng::stream(self.seed, index as u64).random();
            return match j % 4 {
                0 => Point2::new(h0 + (h1 - h0) * u, d0),
                1 => Point2::new(h1, d0 + (d1 - d0) * u),
                2 => Point2::new(h0 + (h1 - h0) * u, d1),
                _ => Point2::new(h0, d0 + (d1 - d0) * u),
            };
        }
        self.point(index)
    }

    pub fn validate(&self) -> Result<(), ChaError> {
        if self.n_samples < 100 {
            return Err(ChaError::InvalidConfig("n_samples must be >= 100".into()));
        }
        for (name, (lo, hi)) in [("h_bounds", self.h_bounds), ("d_bounds", self.d_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ChaError::InvalidConfig(format!("{name} must be finite and ordered")));
            }
        }
        if self.h_bounds.0 <= 0.0 {
            return Err(ChaError::InvalidConfig("inertia lower bound must be > 0".into()));
        }
        Ok(())
    }

    fn point(&self, index: usize) -> Point2 {
        let mut rng = rng::stream(self.seed, index as u64);
        let (h0, h1) = self.h_bounds;
        let (d0, d1) = self.d_bounds;
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Point2::new(h0 + (h1 - h0) * u, d0 + (d1 - d0) * v)
    }
}

/// The governor-side inputs of the nadir that stay fixed while (H, D) vary,
/// together with the disturbance and the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadirSpec {
    pub droop_gain: f64,
    pub turbine_fraction: f64,
    pub time_constant: f64,
    /// Disturbance, per-unit on the system base.
    pub disturbance: f64,
    pub f0: f64,
    pub max_deviation: f64,
}

impl NadirSpec {
    pub fn params(&self, p: Point2) -> AggregatedSfrParams {
        AggregatedSfrParams {
            inertia: p.h,
            damping: p.d,
            droop_gain: self.droop_gain,
            turbine_fraction: self.turbine_fraction,
            time_constant: self.time_constant,
        }
    }

    pub fn nadir(&self, p: Point2) -> f64 {
        delta_f_nadir(&self.params(p), self.disturbance, self.f0)
            .map_or(f64::INFINITY, |n| n.delta_f_max)
    }

    /// Exact feasibility of the nadir limit at `p`.
    pub fn is_feasible(&self, p: Point2) -> bool {
        self.nadir(p) <= self.max_deviation
    }
}

/// Training samples whose exact nadir is within the limit.
pub fn sample_feasible(cfg: &ChaConfig, spec: &NadirSpec) -> Result<Vec<Point2>, ChaError> {
    cfg.validate()?;
    let feasible: Vec<Point2> = (0..cfg.n_samples)
        .map(|i| cfg.training_point(i))
        .filter(|&p| spec.is_feasible(p))
        .collect();
    if feasible.is_empty() {
        return Err(ChaError::EmptyRegion);
    }
    Ok(feasible)
}

/// Removes vertices one at a time, smallest cut-off triangle first, while
/// that triangle is no larger than `max_area`. Every step yields a subset of
/// the previous polygon, so conservativeness is preserved.
pub fn simplify_polygon(poly: &ConvexPolygon, max_area: f64) -> ConvexPolygon {
    let mut v = poly.vertices.clone();
    if poly.degenerate {
        return poly.clone();
    }
    while v.len() > 3 {
        let n = v.len();
        let (best, area) = (0..n)
            .map(|i| (i, 0.5 * cross(v[(i + n - 1) % n], v[i], v[(i + 1) % n]).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if area > max_area {
            break;
        }
        v.remove(best);
    }
    ConvexPolygon {
        degenerate: v.len() < 3,
        vertices: v,
    }
}

/// One inward unit-normal half-plane per polygon edge.
pub fn polygon_to_halfspaces(poly: &ConvexPolygon) -> Result<HalfspaceSet, ChaError> {
    if poly.degenerate || poly.vertices.len() < 3 {
        return Err(ChaError::DegeneratePolygon {
            n_vertices: poly.vertices.len(),
        });
    }
    let n = poly.vertices.len();
    let planes = (0..n)
        .map(|i| edge_halfspace(poly.vertices[i], poly.vertices[(i + 1) % n]))
        .collect();
    Ok(HalfspaceSet {
        planes,
        polygon: poly.clone(),
        meta: None,
    })
}

/// Interior is to the left of `a → b`.
fn edge_halfspace(a: Point2, b: Point2) -> Halfspace {
    let (dh, dd) = (b.h - a.h, b.d - a.d);
    let len = (dh * dh + dd * dd).sqrt();
    let (w_h, w_d) = (-dd / len, dh / len);
    Halfspace {
        w_h,
        w_d,
        b: -(w_h * a.h + w_d * a.d),
    }
}

/// True iff `pt` satisfies every half-plane, boundary included.
pub fn classify(hs: &HalfspaceSet, pt: Point2) -> bool {
    hs.planes
        .iter()
        .all(|p| p.eval(pt) >= -BOUNDARY_EPS * (1.0 + p.b.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n_test: usize,
    pub error_rate: f64,
    /// Classified feasible by the half-spaces but infeasible in truth.
    pub false_safe_count: usize,
    /// Classified infeasible but feasible in truth.
    pub false_unsafe_count: usize,
}

/// Misclassification against an exact oracle on uniform test points drawn
/// from the box in `cfg` (with the test seed in place of the training seed).
pub fn classification_error<F>(hs: &HalfspaceSet, oracle: F, cfg: &ChaConfig, n_test: usize, seed: u64) -> ErrorReport
where
    F: Fn(Point2) -> bool + Sync,
{
    let test_cfg = ChaConfig { seed, ..*cfg };
    let (false_safe, false_unsafe) = (0..n_test)
        .into_par_iter()
        .map(|i| {
            let p = test_cfg.point(i);
            match (classify(hs, p), oracle(p)) {
                (true, false) => (1usize, 0usize),
                (false, true) => (0, 1),
                _ => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    ErrorReport {
        n_test,
        error_rate: if n_test == 0 {
            0.0
        } else {
            (false_safe + false_unsafe) as f64 / n_test as f64
        },
        false_safe_count: false_safe,
        false_unsafe_count: false_unsafe,
    }
}

/// Samples, hulls and converts to half-spaces in one pass.
///
/// A box that is flat in one coordinate (no RES/ESS can move it) yields the
/// feasible interval along the other coordinate as two half-planes; a box
/// flat in both yields no planes when its single point is feasible.
pub fn build_nadir_halfspaces(spec: &NadirSpec, cfg: &ChaConfig) -> Result<HalfspaceSet, ChaError> {
    let started = Instant::now();
    cfg.validate()?;
    let h_flat = cfg.h_bounds.0 == cfg.h_bounds.1;
    let d_flat = cfg.d_bounds.0 == cfg.d_bounds.1;
    let (planes, poly, n_feasible) = if h_flat || d_flat {
        flat_box_region(spec, cfg, h_flat, d_flat)?
    } else {
        let feasible = sample_feasible(cfg, spec)?;
        let mut poly = quickhull2d(&feasible);
        if cfg.simplify {
            poly = simplify_polygon(&poly, cfg.box_area() / cfg.n_samples as f64);
        }
        let hs = polygon_to_halfspaces(&poly)?;
        (hs.planes, poly, feasible.len())
    };
    let meta = BuildMeta {
        n_samples: cfg.n_samples,
        n_feasible,
        n_hyperplanes: planes.len(),
        wall_time_s: started.elapsed().as_secs_f64(),
        h_bounds: cfg.h_bounds,
        d_bounds: cfg.d_bounds,
    };
    Ok(HalfspaceSet {
        planes,
        polygon: poly,
        meta: Some(meta),
    })
}

type Region = (Vec<Halfspace>, ConvexPolygon, usize);

fn flat_box_region(spec: &NadirSpec, cfg: &ChaConfig, h_flat: bool, d_flat: bool) -> Result<Region, ChaError> {
    let (h0, h1) = cfg.h_bounds;
    let (d0, d1) = cfg.d_bounds;
    if h_flat && d_flat {
        let p = Point2::new(h0, d0);
        if !spec.is_feasible(p) {
            return Err(ChaError::EmptyRegion);
        }
        let poly = ConvexPolygon {
            vertices: vec![p],
            degenerate: true,
        };
        return Ok((Vec::new(), poly, 1));
    }
    // Exact endpoints plus uniform draws along the free coordinate.
    let n = cfg.n_samples;
    let along = |u: f64| {
        if h_flat {
            Point2::new(h0, d0 + (d1 - d0) * u)
        } else {
            Point2::new(h0 + (h1 - h0) * u, d0)
        }
    };
    let feasible: Vec<Point2> = (0..n)
        .map(|i| match i {
            0 => along(0.0),
            1 => along(1.0),
            _ => along(rng::stream(cfg.seed, i as u64).random()),
        })
        .filter(|&p| spec.is_feasible(p))
        .collect();
    if feasible.is_empty() {
        return Err(ChaError::EmptyRegion);
    }
    let coord = |p: &Point2| if h_flat { p.d } else { p.h };
    let lo = feasible.iter().map(coord).fold(f64::INFINITY, f64::min);
    let hi = feasible.iter().map(coord).fold(f64::NEG_INFINITY, f64::max);
    let (wh, wd) = if h_flat { (0.0, 1.0) } else { (1.0, 0.0) };
    let planes = vec![
        Halfspace { w_h: wh, w_d: wd, b: -lo },
        Halfspace { w_h: -wh, w_d: -wd, b: hi },
    ];
    let poly = ConvexPolygon {
        vertices: if h_flat {
            vec![Point2::new(h0, lo), Point2::new(h0, hi)]
        } else {
            vec![Point2::new(lo, d0), Point2::new(hi, d0)]
        },
        degenerate: true,
    };
    Ok((planes, poly, feasible.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            degenerate: false,
        }
    }

    fn spec(max_deviation: f64) -> NadirSpec {
        NadirSpec {
            droop_gain: 26.4,
            turbine_fraction: 5.8,
            time_constant: 8.0,
            disturbance: 0.13,
            f0: 50.0,
            max_deviation,
        }
    }

    #[test]
    fn square_corners_survive_interior_points() {
        let mut pts = unit_square().vertices;
        let mut rng = rng::seeded(1);
        for _ in 0..100 {
            pts.push(Point2::new(rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)));
        }
        let hull = quickhull2d(&pts);
        assert!(!hull.degenerate);
        assert_eq!(hull.vertices.len(), 4);
        assert!(hull.signed_area() > 0.0);
        for c in unit_square().vertices {
            assert!(hull.vertices.contains(&c));
        }
    }

    #[test]
    fn collinear_and_identical_points_are_degenerate() {
        let line = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        let hull = quickhull2d(&line);
        assert!(hull.degenerate);
        assert_eq!(hull.vertices, vec![line[0], line[2]]);

        let same = [Point2::new(3.0, 1.0); 5];
        let hull = quickhull2d(&same);
        assert!(hull.degenerate);
        assert_eq!(hull.vertices.len(), 1);
        assert!(polygon_to_halfspaces(&hull).is_err());
    }

    #[test]
    fn square_halfspaces_are_axis_aligned() {
        let hs = polygon_to_halfspaces(&unit_square()).unwrap();
        assert_eq!(hs.len(), 4);
        let expect = [(0.0, 1.0, 0.0), (-1.0, 0.0, 1.0), (0.0, -1.0, 1.0), (1.0, 0.0, 0.0)];
        for (p, e) in hs.planes.iter().zip(expect) {
            assert!((p.w_h - e.0).abs() < 1e-15 && (p.w_d - e.1).abs() < 1e-15 && (p.b - e.2).abs() < 1e-15);
        }
        assert!(classify(&hs, Point2::new(0.5, 0.5)));
        assert!(classify(&hs, Point2::new(1.0, 1.0)));
        assert!(!classify(&hs, Point2::new(1.5, 0.5)));
    }

    #[test]
    fn vacuous_limit_keeps_every_sample() {
        let cfg = ChaConfig {
            n_samples: 500,
            ..ChaConfig::new((5.0, 7.0), (1.0, 4.0))
        };
        let pts = sample_feasible(&cfg, &spec(f64::INFINITY)).unwrap();
        assert_eq!(pts.len(), 500);
    }

    #[test]
    fn unattainable_limit_is_empty_region() {
        let cfg = ChaConfig::new((5.0, 7.0), (1.0, 4.0));
        assert_eq!(sample_feasible(&cfg, &spec(0.0)), Err(ChaError::EmptyRegion));
    }

    #[test]
    fn samples_pass_independent_recheck() {
        let cfg = ChaConfig {
            n_samples: 2000,
            ..ChaConfig::new((5.0, 7.5), (1.0, 5.0))
        };
        let s = spec(0.5);
        for p in sample_feasible(&cfg, &s).unwrap() {
            let n = delta_f_nadir(&s.params(p), s.disturbance, s.f0).unwrap();
            assert!(n.delta_f_max <= 0.5);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ChaConfig::new((5.0, 7.0), (1.0, 4.0));
        cfg.n_samples = 10;
        assert!(cfg.validate().is_err());
        let cfg = ChaConfig::new((7.0, 5.0), (1.0, 4.0));
        assert!(cfg.validate().is_err());
    }
}
