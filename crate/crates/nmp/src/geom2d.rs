//! Oriented boxes and polyline helpers shared by anchor association,
//! traffic-rule checks, and the planning metrics. Everything here is plain
//! f64 world geometry.

use serde::{Deserialize, Serialize};

/// Oriented rectangle: center, half extents along/lateral to `heading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub half_len: f64,
    pub half_wid: f64,
    pub heading: f64,
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, len: f64, wid: f64, heading: f64) -> Self {
        OrientedBox {
            cx,
            cy,
            half_len: len / 2.0,
            half_wid: wid / 2.0,
            heading,
        }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (sin, cos) = self.heading.sin_cos();
        let l = self.half_len;
        let w = self.half_wid;
        let rot = |x: f64, y: f64| (self.cx + cos * x - sin * y, self.cy + sin * x + cos * y);
        [rot(l, w), rot(-l, w), rot(-l, -w), rot(l, -w)]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_len * self.half_wid
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (sin, cos) = self.heading.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        u.abs() <= self.half_len && v.abs() <= self.half_wid
    }

    /// Overlap test via the separating-axis theorem (4 candidate axes).
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let boxes = [self, other];
        for b in boxes {
            let (sin, cos) = b.heading.sin_cos();
            for axis in [(cos, sin), (-sin, cos)] {
                let (lo_a, hi_a) = project(self, axis);
                let (lo_b, hi_b) = project(other, axis);
                if hi_a < lo_b || hi_b < lo_a {
                    return false;
                }
            }
        }
        true
    }

    /// Intersection-over-union via convex polygon clipping.
    pub fn iou(&self, other: &OrientedBox) -> f64 {
        let inter = intersection_area(&self.corners(), &other.corners());
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Exact Euclidean distance from the rectangle to a segment; zero iff
    /// they touch or intersect.
    pub fn distance_to_segment(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        if self.contains(a.0, a.1) || self.contains(b.0, b.1) {
            return 0.0;
        }
        let corners = self.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let c = corners[i];
            let d = corners[(i + 1) % 4];
            if segments_intersect(c, d, a, b) {
                return 0.0;
            }
            best = best
                .min(point_segment_distance(c, a, b))
                .min(point_segment_distance(a, c, d))
                .min(point_segment_distance(b, c, d));
        }
        best
    }
}

fn project(b: &OrientedBox, axis: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (x, y) in b.corners() {
        let p = x * axis.0 + y * axis.1;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

pub fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        cross(p, q, r) == 0.0
            && r.0 >= p.0.min(q.0)
            && r.0 <= p.0.max(q.0)
            && r.1 >= p.1.min(q.1)
            && r.1 <= p.1.max(q.1)
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let abx = b.0 - a.0;
    let aby = b.1 - a.1;
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    let qx = a.0 + t * abx;
    let qy = a.1 + t * aby;
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Area of the intersection of two convex polygons (Sutherland-Hodgman).
fn intersection_area(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> f64 {
    let mut poly: Vec<(f64, f64)> = subject.to_vec();
    for i in 0..clip.len() {
        if poly.is_empty() {
            return 0.0;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let mut next = Vec::with_capacity(poly.len() + 4);
        for j in 0..poly.len() {
            let p = poly[j];
            let q = poly[(j + 1) % poly.len()];
            let side_p = cross(a, b, p);
            let side_q = cross(a, b, q);
            // Clip polygon vertices are counter-clockwise; keep the left side.
            if side_p >= 0.0 {
                next.push(p);
            }
            if (side_p > 0.0 && side_q < 0.0) || (side_p < 0.0 && side_q > 0.0) {
                let t = side_p / (side_p - side_q);
                next.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
        poly = next;
    }
    polygon_area(&poly)
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

// ---------------------------------------------------------------------------
// Polylines
// ---------------------------------------------------------------------------

/// Total length of a polyline.
pub fn polyline_length(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

/// Point and tangent heading at arc position `s` (clamped to the ends).
pub fn polyline_at(pts: &[(f64, f64)], s: f64) -> ((f64, f64), f64) {
    assert!(pts.len() >= 2, "polyline needs >= 2 points");
    let mut remaining = s.max(0.0);
    for w in pts.windows(2) {
        let dx = w[1].0 - w[0].0;
        let dy = w[1].1 - w[0].1;
        let seg = (dx * dx + dy * dy).sqrt();
        if remaining <= seg || seg == 0.0 {
            let t = if seg == 0.0 { 0.0 } else { remaining / seg };
            return (
                (w[0].0 + t * dx, w[0].1 + t * dy),
                dy.atan2(dx),
            );
        }
        remaining -= seg;
    }
    let n = pts.len();
    let dx = pts[n - 1].0 - pts[n - 2].0;
    let dy = pts[n - 1].1 - pts[n - 2].1;
    (pts[n - 1], dy.atan2(dx))
}

/// Arc position of the closest point on the polyline to `p`, plus the
/// lateral (unsigned) distance.
pub fn polyline_project(pts: &[(f64, f64)], p: (f64, f64)) -> (f64, f64) {
    assert!(pts.len() >= 2, "polyline needs >= 2 points");
    let mut best_arc = 0.0;
    let mut best_dist = f64::INFINITY;
    let mut arc_base = 0.0;
    for w in pts.windows(2) {
        let abx = w[1].0 - w[0].0;
        let aby = w[1].1 - w[0].1;
        let len2 = abx * abx + aby * aby;
        let seg = len2.sqrt();
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - w[0].0) * abx + (p.1 - w[0].1) * aby) / len2).clamp(0.0, 1.0)
        };
        let qx = w[0].0 + t * abx;
        let qy = w[0].1 + t * aby;
        let d = ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt();
        if d < best_dist {
            best_dist = d;
            best_arc = arc_base + t * seg;
        }
        arc_base += seg;
    }
    (best_arc, best_dist)
}
