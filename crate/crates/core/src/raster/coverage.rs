//! Watertight triangle coverage in pixel space.
//!
//! Edge functions are evaluated with the edge's endpoints in a canonical
//! (lexicographic) order, so the two triangles sharing an edge compute
//! exactly negated values at every point. A point exactly on an edge belongs
//! to the triangle whose inward edge normal `(a, b)` has `a > 0`, or `a == 0`
//! and `b > 0` (y grows downward). This is the same as nudging the point by
//! `(ε, ε²)`, so every point of a mesh interior is owned by exactly one
//! triangle.

#[derive(Debug, Clone, Copy, PartialEq)]
struct Edge {
    p0: [f64; 2],
    p1: [f64; 2],
    negate: bool,
    /// Inward normal, the gradient of the edge function.
    a: f64,
    b: f64,
    owns_ties: bool,
}

impl Edge {
    fn new(from: [f64; 2], to: [f64; 2]) -> Edge {
        let negate = (to[0], to[1]) < (from[0], from[1]);
        let (p0, p1) = if negate { (to, from) } else { (from, to) };
        let a = -(to[1] - from[1]);
        let b = to[0] - from[0];
        Edge {
            p0,
            p1,
            negate,
            a,
            b,
            owns_ties: a > 0.0 || (a == 0.0 && b > 0.0),
        }
    }

    /// `(to − from) × (p − from)`, positive on the inner side.
    #[inline]
    fn eval(&self, p: [f64; 2]) -> f64 {
        let e = (self.p1[0] - self.p0[0]) * (p[1] - self.p0[1])
            - (self.p1[1] - self.p0[1]) * (p[0] - self.p0[0]);
        if self.negate {
            -e
        } else {
            e
        }
    }

    #[inline]
    fn admits(&self, e: f64) -> bool {
        e > 0.0 || (e == 0.0 && self.owns_ties)
    }
}

/// A triangle prepared for coverage tests, wound so its area is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [[f64; 2]; 3],
    /// Maps back to the caller's vertex order: `v[k]` was input `order[k]`.
    pub order: [usize; 3],
    edges: [Edge; 3],
}

impl Triangle {
    /// `None` for zero-area or non-finite triangles.
    pub fn new(v: [[f64; 2]; 3]) -> Option<Triangle> {
        if v.iter().flatten().any(|c| !c.is_finite()) {
            return None;
        }
        let area = Edge::new(v[0], v[1]).eval(v[2]);
        let (v, order) = if area > 0.0 {
            (v, [0, 1, 2])
        } else if area < 0.0 {
            ([v[0], v[2], v[1]], [0, 2, 1])
        } else {
            return None;
        };
        Some(Triangle {
            v,
            order,
            edges: [
                Edge::new(v[1], v[2]),
                Edge::new(v[2], v[0]),
                Edge::new(v[0], v[1]),
            ],
        })
    }

    /// Unnormalized barycentric weights of `p` (for `v[0]`, `v[1]`, `v[2]`),
    /// or `None` if this triangle doesn't own `p`.
    #[inline]
    pub fn weights(&self, p: [f64; 2]) -> Option<[f64; 3]> {
        let w = [
            self.edges[0].eval(p),
            self.edges[1].eval(p),
            self.edges[2].eval(p),
        ];
        (self.edges[0].admits(w[0]) && self.edges[1].admits(w[1]) && self.edges[2].admits(w[2]))
            .then_some(w)
    }

    pub fn covers(&self, p: [f64; 2]) -> bool {
        self.weights(p).is_some()
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let xs = self.v.map(|p| p[0]);
        let ys = self.v.map(|p| p[1]);
        (
            xs[0].min(xs[1]).min(xs[2]),
            ys[0].min(ys[1]).min(ys[2]),
            xs[0].max(xs[1]).max(xs[2]),
            ys[0].max(ys[1]).max(ys[2]),
        )
    }

    /// Pixel rows whose centers might be covered: `[first, last)`.
    pub fn row_range(&self) -> (i64, i64) {
        let (_, y0, _, y1) = self.bbox();
        ((y0 - 0.5).ceil() as i64, (y1 - 0.5).floor() as i64 + 1)
    }

    /// Candidate pixel columns `[first, last)` on row `y`, a superset of the
    /// owned pixels (one pixel of slack per side). Empty when no pixel of the
    /// row can be owned.
    pub fn span(&self, y: i64) -> (i64, i64) {
        let yc = y as f64 + 0.5;
        let (bx0, _, bx1, _) = self.bbox();
        let (mut lo, mut hi) = (bx0, bx1);
        for e in &self.edges {
            // e(x) ≈ a·(x − p0.x) + b·(yc − p0.y), in the edge's own direction
            let (a, b) = (e.a, e.b);
            let origin = if e.negate { e.p1 } else { e.p0 };
            let c = b * (yc - origin[1]);
            if a == 0.0 {
                if c < 0.0 {
                    return (0, 0);
                }
                continue;
            }
            let x = origin[0] - c / a;
            if a > 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
        }
        if !(lo <= hi + 2.0) {
            return (0, 0);
        }
        ((lo - 0.5).ceil() as i64 - 1, (hi - 0.5).floor() as i64 + 2)
    }
}

/// Whether the pixel center `p` is covered by triangle `tri`, under the
/// shared-edge ownership rule. Zero-area triangles cover nothing.
pub fn coverage_rule(tri: [[f64; 2]; 3], p: [f64; 2]) -> bool {
    Triangle::new(tri).is_some_and(|t| t.covers(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_and_outside() {
        let t = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        assert!(coverage_rule(t, [1.0, 1.0]));
        assert!(!coverage_rule(t, [3.0, 3.0]));
        // winding doesn't matter
        assert!(coverage_rule([t[0], t[2], t[1]], [1.0, 1.0]));
        assert!(!coverage_rule([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], [1.0, 1.0]));
    }

    #[test]
    fn shared_edge_owned_once() {
        // square split along its diagonal; probe points on every edge
        let (a, b, c, d) = ([0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]);
        let t1 = Triangle::new([a, b, c]).unwrap();
        let t2 = Triangle::new([a, c, d]).unwrap();
        for p in [[2.0, 2.0], [1.0, 1.0], [3.5, 3.5]] {
            assert_eq!(t1.covers(p) as u8 + t2.covers(p) as u8, 1, "{p:?}");
        }
        // neighbor across a vertical edge
        let t3 = Triangle::new([b, [8.0, 2.0], c]).unwrap();
        let on = [4.0, 1.5];
        assert_eq!(t1.covers(on) as u8 + t3.covers(on) as u8, 1);
    }

    #[test]
    fn horizontal_shared_edge() {
        let top = Triangle::new([[0.0, 0.0], [4.0, 2.0], [0.0, 2.0]]).unwrap();
        let bottom = Triangle::new([[0.0, 2.0], [4.0, 2.0], [0.0, 4.0]]).unwrap();
        let p = [1.0, 2.0];
        assert_eq!(top.covers(p) as u8 + bottom.covers(p) as u8, 1);
    }

    #[test]
    fn fan_vertex_owned_once() {
        let c = [5.0, 5.0];
        let ring = [[9.0, 5.0], [7.0, 9.0], [2.0, 8.0], [1.0, 3.0], [4.0, 0.5], [8.0, 1.0]];
        let owners = (0..ring.len())
            .filter(|&i| Triangle::new([c, ring[i], ring[(i + 1) % ring.len()]]).unwrap().covers(c))
            .count();
        assert_eq!(owners, 1);
    }

    #[test]
    fn span_is_superset() {
        let t = Triangle::new([[0.3, 0.2], [40.7, 3.1], [12.2, 30.9]]).unwrap();
        let (r0, r1) = t.row_range();
        for y in r0 - 2..r1 + 2 {
            let (s0, s1) = t.span(y);
            for x in -5..50 {
                let inside = t.covers([x as f64 + 0.5, y as f64 + 0.5]);
                if inside {
                    assert!(y >= r0 && y < r1);
                    assert!(x >= s0 && x < s1, "row {y} col {x} span {s0}..{s1}");
                }
            }
        }
    }
}
