//! Convex geometry in the active/reactive power plane.
//!
//! Polygons are stored counter-clockwise without repeated or collinear
//! vertices. A polygon may be degenerate: a single point or a segment. Those
//! arise naturally when an envelope collapses onto its dispatch point.

use serde::{Deserialize, Serialize};

use crate::error::{NoeError, Result};

/// Cross-product tolerance for collinearity, in MW·MVAr.
pub const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct PqPoint {
    pub p: f64,
    pub q: f64,
}

impl From<[f64; 2]> for PqPoint {
    fn from(v: [f64; 2]) -> Self {
        PqPoint { p: v[0], q: v[1] }
    }
}

impl From<PqPoint> for [f64; 2] {
    fn from(v: PqPoint) -> Self {
        [v.p, v.q]
    }
}

impl PqPoint {
    pub const fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.p + o.p, self.q + o.q)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.p - o.p, self.q - o.q)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.p * k, self.q * k)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.p * o.p + self.q * o.q
    }

    pub fn norm(self) -> f64 {
        self.p.hypot(self.q)
    }
}

/// `(b - a) × (c - a)`; positive for a left turn.
fn cross(a: PqPoint, b: PqPoint, c: PqPoint) -> f64 {
    (b.p - a.p) * (c.q - a.q) - (b.q - a.q) * (c.p - a.p)
}

fn seg_dist(pt: PqPoint, a: PqPoint, b: PqPoint) -> f64 {
    let d = b.sub(a);
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return pt.sub(a).norm();
    }
    let t = (pt.sub(a).dot(d) / len2).clamp(0.0, 1.0);
    pt.sub(a.add(d.scale(t))).norm()
}

/// Convex polygon, counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PqPoint>", into = "Vec<PqPoint>")]
pub struct PqPolygon {
    vertices: Vec<PqPoint>,
}

impl TryFrom<Vec<PqPoint>> for PqPolygon {
    type Error = NoeError;
    fn try_from(v: Vec<PqPoint>) -> Result<Self> {
        convex_hull(&v)
    }
}

impl From<PqPolygon> for Vec<PqPoint> {
    fn from(p: PqPolygon) -> Self {
        p.vertices
    }
}

/// Andrew's monotone chain. Collinear and duplicate points are dropped.
pub fn convex_hull(points: &[PqPoint]) -> Result<PqPolygon> {
    if points.is_empty() {
        return Err(NoeError::Geometry("convex hull of an empty point set".into()));
    }
    if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
        return Err(NoeError::Geometry(format!("non-finite point ({}, {})", bad.p, bad.q)));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.q.total_cmp(&b.q)));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(PqPolygon { vertices: pts });
    }
    let mut hull: Vec<PqPoint> = Vec::with_capacity(2 * pts.len());
    for &pt in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= COLLINEAR_TOL {
            hull.pop();
        }
        hull.push(pt);
    }
    let lower = hull.len() + 1;
    for &pt in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= COLLINEAR_TOL {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    Ok(PqPolygon { vertices: hull })
}

/// One row `a_p·p + a_q·q ≤ b` with `(a_p, a_q)` of unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct HalfPlane {
    pub a_p: f64,
    pub a_q: f64,
    pub b: f64,
}

impl From<[f64; 3]> for HalfPlane {
    fn from(v: [f64; 3]) -> Self {
        HalfPlane { a_p: v[0], a_q: v[1], b: v[2] }
    }
}

impl From<HalfPlane> for [f64; 3] {
    fn from(h: HalfPlane) -> Self {
        [h.a_p, h.a_q, h.b]
    }
}

impl HalfPlane {
    /// Normalizes `(a_p, a_q, b)` to unit normal.
    pub fn new(a_p: f64, a_q: f64, b: f64) -> Result<Self> {
        let n = a_p.hypot(a_q);
        if !(n > 0.0 && n.is_finite() && b.is_finite()) {
            return Err(NoeError::Geometry("half-plane with zero or non-finite normal".into()));
        }
        Ok(Self { a_p: a_p / n, a_q: a_q / n, b: b / n })
    }

    /// Signed violation `a·x − b`.
    pub fn excess(&self, pt: PqPoint) -> f64 {
        self.a_p * pt.p + self.a_q * pt.q - self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfPlaneSet {
    pub rows: Vec<HalfPlane>,
}

impl HalfPlaneSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_excess(&self, pt: PqPoint) -> f64 {
        self.rows.iter().map(|r| r.excess(pt)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Polygon cut out by the rows: vertices are the pairwise intersections
    /// that satisfy every row within `tol`.
    pub fn to_polygon(&self, tol: f64) -> Result<PqPolygon> {
        let mut pts = Vec::new();
        for (i, r1) in self.rows.iter().enumerate() {
            for r2 in &self.rows[i + 1..] {
                let det = r1.a_p * r2.a_q - r1.a_q * r2.a_p;
                if det.abs() < 1e-12 {
                    continue;
                }
                let pt = PqPoint::new(
                    (r1.b * r2.a_q - r1.a_q * r2.b) / det,
                    (r1.a_p * r2.b - r1.b * r2.a_p) / det,
                );
                let scale = 1.0 + pt.p.abs().max(pt.q.abs());
                if self.max_excess(pt) <= tol * scale {
                    pts.push(pt);
                }
            }
        }
        if pts.is_empty() {
            return Err(NoeError::Geometry("half-planes have empty or unbounded intersection".into()));
        }
        convex_hull(&pts)
    }
}

impl PqPolygon {
    pub fn point(pt: PqPoint) -> Self {
        Self { vertices: vec![pt] }
    }

    /// Axis-aligned rectangle.
    pub fn rect(p_min: f64, p_max: f64, q_min: f64, q_max: f64) -> Result<Self> {
        convex_hull(&[
            PqPoint::new(p_min, q_min),
            PqPoint::new(p_max, q_min),
            PqPoint::new(p_max, q_max),
            PqPoint::new(p_min, q_max),
        ])
    }

    pub fn vertices(&self) -> &[PqPoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a.p * b.q - a.q * b.p;
        }
        (0.5 * s).abs()
    }

    pub fn support(&self, angle: f64) -> f64 {
        let d = PqPoint::new(angle.cos(), angle.sin());
        self.vertices.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(p_min, p_max, q_min, q_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            b.0 = b.0.min(v.p);
            b.1 = b.1.max(v.p);
            b.2 = b.2.min(v.q);
            b.3 = b.3.max(v.q);
        }
        b
    }

    pub fn translate(&self, d: PqPoint) -> Self {
        Self { vertices: self.vertices.iter().map(|v| v.add(d)).collect() }
    }

    /// Point reflection `{-x : x ∈ P}`.
    pub fn negate(&self) -> Self {
        let pts: Vec<PqPoint> = self.vertices.iter().map(|v| v.scale(-1.0)).collect();
        convex_hull(&pts).expect("non-empty")
    }

    /// Euclidean distance from `pt` to the polygon (0 inside).
    pub fn distance(&self, pt: PqPoint) -> f64 {
        let n = self.vertices.len();
        match n {
            1 => pt.sub(self.vertices[0]).norm(),
            2 => seg_dist(pt, self.vertices[0], self.vertices[1]),
            _ => {
                let inside = (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], pt) >= 0.0);
                if inside {
                    0.0
                } else {
                    (0..n)
                        .map(|i| seg_dist(pt, self.vertices[i], self.vertices[(i + 1) % n]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// Edge-inequality membership within `eps`; distance for degenerate shapes.
    pub fn contains(&self, pt: PqPoint, eps: f64) -> bool {
        if self.is_degenerate() {
            return self.distance(pt) <= eps;
        }
        self.edge_rows().iter().all(|r| r.excess(pt) <= eps)
    }

    pub fn is_subset(&self, outer: &PqPolygon, eps: f64) -> bool {
        self.vertices.iter().all(|v| outer.contains(*v, eps))
    }

    /// Hausdorff distance between two convex polygons.
    pub fn hausdorff(&self, other: &PqPolygon) -> f64 {
        let a = self.vertices.iter().map(|v| other.distance(*v)).fold(0.0, f64::max);
        let b = other.vertices.iter().map(|v| self.distance(*v)).fold(0.0, f64::max);
        a.max(b)
    }

    fn edge_rows(&self) -> Vec<HalfPlane> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let (dx, dy) = (b.p - a.p, b.q - a.q);
                let len = dx.hypot(dy);
                let (np, nq) = (dy / len, -dx / len);
                HalfPlane { a_p: np, a_q: nq, b: np * a.p + nq * a.q }
            })
            .collect()
    }

    /// One normalized row per edge. Requires at least three vertices.
    pub fn to_halfplanes(&self) -> Result<HalfPlaneSet> {
        if self.is_degenerate() {
            return Err(NoeError::Geometry(format!(
                "cannot export half-planes of a degenerate polygon with {} vertices",
                self.vertices.len()
            )));
        }
        Ok(HalfPlaneSet { rows: self.edge_rows() })
    }

    /// Like [`to_halfplanes`](Self::to_halfplanes) but also describes points
    /// and segments, as a zero-width box or slab with end caps.
    pub fn halfplanes_any(&self) -> HalfPlaneSet {
        match self.vertices.len() {
            1 => {
                let v = self.vertices[0];
                HalfPlaneSet {
                    rows: vec![
                        HalfPlane { a_p: 1.0, a_q: 0.0, b: v.p },
                        HalfPlane { a_p: 0.0, a_q: 1.0, b: v.q },
                        HalfPlane { a_p: -1.0, a_q: 0.0, b: -v.p },
                        HalfPlane { a_p: 0.0, a_q: -1.0, b: -v.q },
                    ],
                }
            }
            2 => {
                let (a, b) = (self.vertices[0], self.vertices[1]);
                let d = b.sub(a).scale(1.0 / b.sub(a).norm());
                let n = PqPoint::new(d.q, -d.p);
                let row = |u: PqPoint, at: PqPoint| HalfPlane { a_p: u.p, a_q: u.q, b: u.dot(at) };
                HalfPlaneSet {
                    rows: vec![row(n, a), row(d, b), row(n.scale(-1.0), a), row(d.scale(-1.0), a)],
                }
            }
            _ => HalfPlaneSet { rows: self.edge_rows() },
        }
    }

    /// Intersection with one half-plane. `None` if empty.
    pub fn clip(&self, h: &HalfPlane) -> Option<PqPolygon> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (ea, eb) = (h.excess(a), h.excess(b));
            if ea <= 0.0 {
                out.push(a);
            }
            if (ea < 0.0 && eb > 0.0) || (ea > 0.0 && eb < 0.0) {
                let t = ea / (ea - eb);
                out.push(a.add(b.sub(a).scale(t)));
            }
        }
        if out.is_empty() {
            None
        } else {
            convex_hull(&out).ok()
        }
    }

    pub fn intersect(&self, other: &PqPolygon) -> Option<PqPolygon> {
        let mut cur = self.clone();
        for h in other.halfplanes_any().rows {
            cur = cur.clip(&h)?;
        }
        Some(cur)
    }

    /// Interval of `p` on the horizontal line at `q`, if it meets the polygon.
    pub fn p_range_at(&self, q: f64) -> Option<(f64, f64)> {
        let n = self.vertices.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if a.q == q {
                lo = lo.min(a.p);
                hi = hi.max(a.p);
            }
            if (a.q < q && b.q > q) || (a.q > q && b.q < q) {
                let t = (q - a.q) / (b.q - a.q);
                let p = a.p + t * (b.p - a.p);
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

fn edge_angle(a: PqPoint, b: PqPoint) -> f64 {
    let t = (b.q - a.q).atan2(b.p - a.p);
    if t < 0.0 {
        t + 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

/// Index of the lowest vertex (smallest q, then smallest p).
fn bottom(v: &[PqPoint]) -> usize {
    (0..v.len())
        .min_by(|&i, &j| v[i].q.total_cmp(&v[j].q).then(v[i].p.total_cmp(&v[j].p)))
        .unwrap_or(0)
}

/// Minkowski sum by merging the edge sequences of both polygons in angle order.
pub fn minkowski_sum(a: &PqPolygon, b: &PqPolygon) -> PqPolygon {
    if a.len() == 1 {
        return b.translate(a.vertices[0]);
    }
    if b.len() == 1 {
        return a.translate(b.vertices[0]);
    }
    let (na, nb) = (a.len(), b.len());
    let (ia, ib) = (bottom(&a.vertices), bottom(&b.vertices));
    let va: Vec<PqPoint> = (0..na).map(|k| a.vertices[(ia + k) % na]).collect();
    let vb: Vec<PqPoint> = (0..nb).map(|k| b.vertices[(ib + k) % nb]).collect();
    let mut out = Vec::with_capacity(na + nb);
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        out.push(va[i % na].add(vb[j % nb]));
        let ta = if i < na { edge_angle(va[i], va[(i + 1) % na]) } else { f64::INFINITY };
        let tb = if j < nb { edge_angle(vb[j], vb[(j + 1) % nb]) } else { f64::INFINITY };
        if (ta - tb).abs() <= 1e-12 {
            i += 1;
            j += 1;
        } else if ta < tb {
            i += 1;
        } else {
            j += 1;
        }
    }
    convex_hull(&out).expect("non-empty")
}

/// Left fold of [`minkowski_sum`].
pub fn minkowski_sum_all<'a>(polys: impl IntoIterator<Item = &'a PqPolygon>) -> Option<PqPolygon> {
    let mut it = polys.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, p| minkowski_sum(&acc, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(h: f64) -> PqPolygon {
        PqPolygon::rect(-h, h, -h, h).unwrap()
    }

    #[test]
    fn hull_drops_interior_points() {
        let h = convex_hull(&[
            PqPoint::new(0.0, 0.0),
            PqPoint::new(1.0, 0.0),
            PqPoint::new(0.0, 1.0),
            PqPoint::new(0.2, 0.2),
        ])
        .unwrap();
        assert_eq!(
            h.vertices(),
            &[PqPoint::new(0.0, 0.0), PqPoint::new(1.0, 0.0), PqPoint::new(0.0, 1.0)]
        );
    }

    #[test]
    fn hull_of_single_point_and_empty() {
        let h = convex_hull(&[PqPoint::new(3.0, -1.0)]).unwrap();
        assert_eq!(h.vertices(), &[PqPoint::new(3.0, -1.0)]);
        assert_eq!(h.area(), 0.0);
        assert!(convex_hull(&[]).is_err());
    }

    #[test]
    fn hull_drops_collinear_points() {
        let h = convex_hull(&[
            PqPoint::new(0.0, 0.0),
            PqPoint::new(0.5, 0.0),
            PqPoint::new(1.0, 0.0),
            PqPoint::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(h.len(), 3);
        let seg = convex_hull(&[PqPoint::new(0.0, 0.0), PqPoint::new(1.0, 1.0), PqPoint::new(2.0, 2.0)]).unwrap();
        assert_eq!(seg.vertices(), &[PqPoint::new(0.0, 0.0), PqPoint::new(2.0, 2.0)]);
    }

    #[test]
    fn squares_sum() {
        let s = minkowski_sum(&sq(1.0), &sq(0.5));
        assert_eq!(s, sq(1.5));
        assert_eq!(minkowski_sum(&sq(0.5), &sq(0.5)).area(), 4.0);
        let origin = PqPolygon::point(PqPoint::default());
        assert_eq!(minkowski_sum(&sq(1.0), &origin), sq(1.0));
    }

    #[test]
    fn segment_sums() {
        let a = convex_hull(&[PqPoint::new(0.0, 0.0), PqPoint::new(1.0, 0.0)]).unwrap();
        let b = convex_hull(&[PqPoint::new(0.0, 0.0), PqPoint::new(0.0, 1.0)]).unwrap();
        let s = minkowski_sum(&a, &b);
        assert_eq!(s, PqPolygon::rect(0.0, 1.0, 0.0, 1.0).unwrap());
        let c = minkowski_sum(&a, &a);
        assert_eq!(c.vertices(), &[PqPoint::new(0.0, 0.0), PqPoint::new(2.0, 0.0)]);
    }

    #[test]
    fn triangle_halfplanes() {
        let t = convex_hull(&[PqPoint::new(0.0, 0.0), PqPoint::new(1.0, 0.0), PqPoint::new(0.0, 1.0)]).unwrap();
        let h = t.to_halfplanes().unwrap();
        assert_eq!(h.len(), 3);
        let r = 1.0 / 2f64.sqrt();
        assert!(h
            .rows
            .iter()
            .any(|row| (row.a_p - r).abs() < 1e-15 && (row.a_q - r).abs() < 1e-15 && (row.b - r).abs() < 1e-15));
        let back = h.to_polygon(1e-9).unwrap();
        assert!((back.area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_square_membership() {
        let s = sq(0.5);
        assert_eq!(s.area(), 1.0);
        assert_eq!(s.support(0.0), 0.5);
        assert!(s.contains(PqPoint::new(0.0, 0.0), 1e-9));
        assert!(!s.contains(PqPoint::new(2.0, 0.0), 1e-9));
        assert!(s.contains(PqPoint::new(0.5, 0.5), 1e-9));
        assert!(sq(0.5).is_subset(&sq(1.0), 0.0));
        assert!(!sq(1.0).is_subset(&sq(0.5), 1e-9));
        for row in s.to_halfplanes().unwrap().rows {
            assert_eq!(row.b, 0.5);
        }
    }

    #[test]
    fn degenerate_halfplanes() {
        assert!(PqPolygon::point(PqPoint::new(1.0, 2.0)).to_halfplanes().is_err());
        let pt = PqPolygon::point(PqPoint::new(1.0, 2.0)).halfplanes_any();
        assert_eq!(pt.to_polygon(1e-12).unwrap().vertices(), &[PqPoint::new(1.0, 2.0)]);
        let seg = convex_hull(&[PqPoint::new(0.0, 0.0), PqPoint::new(1.0, 1.0)]).unwrap();
        let back = seg.halfplanes_any().to_polygon(1e-9).unwrap();
        assert!(back.hausdorff(&seg) < 1e-12);
    }

    #[test]
    fn clip_and_ranges() {
        let s = sq(1.0);
        let c = s.clip(&HalfPlane::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert!((c.area() - 2.0).abs() < 1e-15);
        assert!(s.clip(&HalfPlane::new(1.0, 0.0, -2.0).unwrap()).is_none());
        assert_eq!(s.p_range_at(0.3), Some((-1.0, 1.0)));
        assert_eq!(s.p_range_at(1.0), Some((-1.0, 1.0)));
        assert_eq!(s.p_range_at(1.5), None);
    }

    #[test]
    fn distance_and_hausdorff() {
        let s = sq(1.0);
        assert_eq!(s.distance(PqPoint::new(0.2, 0.1)), 0.0);
        assert!((s.distance(PqPoint::new(2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((s.hausdorff(&sq(1.5)) - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn serde_shapes() {
        let t = sq(0.5);
        let txt = serde_json::to_string(&t).unwrap();
        assert_eq!(txt, "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]");
        let back: PqPolygon = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, t);
    }
}
