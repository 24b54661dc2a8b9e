use super::{ConvexPolygon, Point2};

/// Signed doubled area of (a, b, c); positive when c is left of a→b.
#[inline]
pub(crate) fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.h - a.h) * (c.d - a.d) - (b.d - a.d) * (c.h - a.h)
}

/// Convex hull of a planar point set by Quickhull.
///
/// Points closer than `1e-12 · (1 + scale)` to a hull edge are treated as
/// non-extreme. The result is counter-clockwise; fewer than three extreme
/// points produce a polygon flagged degenerate.
pub fn quickhull2d(points: &[Point2]) -> ConvexPolygon {
    if points.is_empty() {
        return ConvexPolygon {
            vertices: Vec::new(),
            degenerate: true,
        };
    }
    let scale = points
        .iter()
        .fold(0.0_f64, |m, p| m.max(p.h.abs()).max(p.d.abs()));
    let eps = 1e-12 * (1.0 + scale);

    let lex = |a: &Point2, b: &Point2| a.h.total_cmp(&b.h).then(a.d.total_cmp(&b.d));
    let left = *points.iter().min_by(|a, b| lex(a, b)).unwrap();
    let right = *points.iter().max_by(|a, b| lex(a, b)).unwrap();

    if left == right {
        return ConvexPolygon {
            vertices: vec![left],
            degenerate: true,
        };
    }

    let edge_len = ((right.h - left.h).powi(2) + (right.d - left.d).powi(2)).sqrt();
    let mut above = Vec::new();
    let mut below = Vec::new();
    for &p in points {
        let dist = cross(left, right, p) / edge_len;
        if dist > eps {
            above.push(p);
        } else if dist < -eps {
            below.push(p);
        }
    }

    if above.is_empty() && below.is_empty() {
        return ConvexPolygon {
            vertices: vec![left, right],
            degenerate: true,
        };
    }

    // Counter-clockwise: left → (below chain) → right → (above chain) → left.
    let mut vertices = vec![left];
    hull_side(left, right, &below, eps, &mut vertices);
    vertices.push(right);
    hull_side(right, left, &above, eps, &mut vertices);

    let degenerate = vertices.len() < 3;
    ConvexPolygon {
        vertices,
        degenerate,
    }
}

/// Appends the hull vertices strictly outside the directed segment
/// `from → to` (on its right-hand side), ordered from `from` to `to`.
fn hull_side(from: Point2, to: Point2, candidates: &[Point2], eps: f64, out: &mut Vec<Point2>) {
    enum Task {
        Split(Point2, Point2, Vec<Point2>),
        Emit(Point2),
    }
    // Explicit stack instead of recursion; clustered inputs can nest deeply.
    let mut stack = vec![Task::Split(from, to, candidates.to_vec())];
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(p) => out.push(p),
            Task::Split(from, to, pts) => {
                if pts.is_empty() {
                    continue;
                }
                let len = ((to.h - from.h).powi(2) + (to.d - from.d).powi(2)).sqrt();
                // Farthest point from the segment on the outer side.
                let far = *pts
                    .iter()
                    .max_by(|p, q| {
                        (-cross(from, to, **p))
                            .total_cmp(&(-cross(from, to, **q)))
                            .then(p.h.total_cmp(&q.h))
                            .then(p.d.total_cmp(&q.d))
                    })
                    .unwrap();
                if -cross(from, to, far) / len <= eps {
                    continue;
                }
                let len1 = ((far.h - from.h).powi(2) + (far.d - from.d).powi(2)).sqrt();
                let len2 = ((to.h - far.h).powi(2) + (to.d - far.d).powi(2)).sqrt();
                let first: Vec<Point2> = pts
                    .iter()
                    .copied()
                    .filter(|&p| -cross(from, far, p) / len1 > eps)
                    .collect();
                let second: Vec<Point2> = pts
                    .iter()
                    .copied()
                    .filter(|&p| -cross(far, to, p) / len2 > eps)
                    .collect();
                // Emission order: chain(from..far), far, chain(far..to).
                stack.push(Task::Split(far, to, second));
                stack.push(Task::Emit(far));
                stack.push(Task::Split(from, far, first));
            }
        }
    }
}
