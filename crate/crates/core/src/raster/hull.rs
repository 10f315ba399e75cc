use serde::{Deserialize, Serialize};

use super::{RasterError, Region};

/// A 2-D point; serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Closest point to `p` on segment `ab`.
pub(crate) fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    a.add(ab.scale(t))
}

/// Simple polygon, closed implicitly; serialized as an array of `[x, y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = RasterError;

    fn try_from(vertices: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(vertices)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, RasterError> {
        if vertices.len() < 3 {
            return Err(RasterError::Degenerate(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(RasterError::Degenerate(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        if (0..n).any(|i| vertices[i] == vertices[(i + 1) % n]) {
            return Err(RasterError::Degenerate("consecutive duplicate vertices".into()));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle with corners `min` and `max`, counterclockwise.
    pub fn rectangle(min: Point, max: Point) -> Result<Self, RasterError> {
        Self::new(vec![
            min,
            Point::new(max.x, min.y),
            max,
            Point::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace sum; positive for counterclockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.cross(b)).sum::<f64>() / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid; falls back to the vertex mean for zero-area polygons.
    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let n = self.vertices.len() as f64;
            let s = self.vertices.iter().fold(Point::default(), |acc, &p| acc.add(p));
            return s.scale(1.0 / n);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Boundary-inclusive point-in-polygon test (even-odd rule).
    pub fn contains(&self, p: Point) -> bool {
        const EPS: f64 = 1e-9;
        let mut inside = false;
        for (a, b) in self.edges() {
            if closest_on_segment(p, a, b).distance(p) <= EPS {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Nearest point of the closed polygon region to `p` (`p` itself if inside).
    pub fn nearest_point(&self, p: Point) -> Point {
        if self.contains(p) {
            return p;
        }
        self.edges()
            .map(|(a, b)| closest_on_segment(p, a, b))
            .min_by(|u, v| u.distance(p).total_cmp(&v.distance(p)))
            .expect("polygon has edges")
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.nearest_point(p).distance(p)
    }

    /// Applies `f` to every vertex, keeping the order. Fails if the result
    /// collapses consecutive vertices.
    pub fn map_vertices(&self, f: impl FnMut(Point) -> Point) -> Result<Polygon, RasterError> {
        Polygon::new(self.vertices.iter().copied().map(f).collect())
    }
}

/// Strict convex hull (no collinear vertices), counterclockwise, starting at
/// the lexicographically smallest vertex.
pub fn convex_hull(points: &[Point]) -> Result<Polygon, RasterError> {
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(RasterError::Degenerate(format!("non-finite point {p:?}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(RasterError::Degenerate(format!(
            "convex hull needs 3 distinct points, got {}",
            pts.len()
        )));
    }
    let turn = |o: Point, a: Point, b: Point| a.sub(o).cross(b.sub(o));
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(RasterError::Degenerate("all points are collinear".into()));
    }
    Polygon::new(hull)
}

/// Convex hull of a region treated as unit pixel squares.
pub fn pixel_hull(region: &Region) -> Result<Polygon, RasterError> {
    let corners: Vec<Point> = region
        .boundary
        .iter()
        .flat_map(|&(x, y)| {
            let (x, y) = (x as f64, y as f64);
            [
                Point::new(x - 0.5, y - 0.5),
                Point::new(x + 0.5, y - 0.5),
                Point::new(x + 0.5, y + 0.5),
                Point::new(x - 0.5, y + 0.5),
            ]
        })
        .collect();
    convex_hull(&corners)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeScores {
    /// Region area over hull area.
    pub solidity: f64,
    /// Region area over bounding-box area.
    pub extent: f64,
}

pub fn shape_regularity(region: &Region, hull: &Polygon) -> Result<ShapeScores, RasterError> {
    if region.area == 0 {
        return Err(RasterError::Degenerate("empty region".into()));
    }
    let hull_area = hull.area();
    if hull_area <= 0.0 {
        return Err(RasterError::Degenerate("hull has zero area".into()));
    }
    Ok(ShapeScores {
        solidity: region.area as f64 / hull_area,
        extent: region.area as f64 / region.bbox_area() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{connected_components, BinaryMask, Connectivity};
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    /// O(n^3): a directed pair is a hull edge iff every point is on its left or
    /// on the closed segment. Vertices are edge endpoints, chained CCW.
    pub(crate) fn brute_hull(points: &[Point]) -> Vec<Point> {
        let mut uniq = points.to_vec();
        uniq.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        uniq.dedup();
        let mut next = std::collections::HashMap::new();
        for (i, &p) in uniq.iter().enumerate() {
            for (j, &q) in uniq.iter().enumerate() {
                if i == j {
                    continue;
                }
                let ok = uniq.iter().all(|&r| {
                    let c = q.sub(p).cross(r.sub(p));
                    c > 0.0
                        || (c == 0.0 && r.sub(p).dot(q.sub(p)) >= 0.0 && r.sub(q).dot(p.sub(q)) >= 0.0)
                });
                if ok {
                    next.insert(i, j);
                }
            }
        }
        let mut out = vec![0usize];
        while let Some(&n) = next.get(out.last().unwrap()) {
            if n == 0 {
                break;
            }
            out.push(n);
        }
        out.into_iter().map(|i| uniq[i]).collect()
    }

    #[test]
    fn square_with_center() {
        let hull = convex_hull(&pts(&[(0., 0.), (1., 1.), (0.5, 0.5), (1., 0.), (0., 1.)])).unwrap();
        assert_eq!(hull.vertices(), pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]).as_slice());
        assert!(hull.signed_area() > 0.0);
    }

    #[test]
    fn triangle_is_itself() {
        let hull = convex_hull(&pts(&[(3., 0.), (0., 2.), (0., 0.)])).unwrap();
        assert_eq!(hull.vertices(), pts(&[(0., 0.), (3., 0.), (0., 2.)]).as_slice());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(convex_hull(&pts(&[(0., 0.), (1., 1.)])).is_err());
        assert!(convex_hull(&pts(&[(0., 0.), (1., 1.), (2., 2.), (3., 3.)])).is_err());
        assert!(convex_hull(&pts(&[(0., 0.), (0., 0.), (0., 0.)])).is_err());
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon::new(pts(&[(0., 0.), (1., 0.)])).is_err());
        assert!(Polygon::new(pts(&[(0., 0.), (1., 0.), (1., 0.), (0., 1.)])).is_err());
        assert!(Polygon::new(pts(&[(0., 0.), (1., 0.), (0., 1.), (0., 0.)])).is_err());
        let json = "[[0,0],[1,0]]";
        assert!(serde_json::from_str::<Polygon>(json).is_err());
    }

    fn region_of(mask: &BinaryMask) -> Region {
        connected_components(mask, Connectivity::Four).regions.remove(0)
    }

    #[test]
    fn rectangle_is_fully_regular() {
        let region = region_of(&BinaryMask::from_fn(20, 20, |x, y| (3..13).contains(&x) && (5..9).contains(&y)));
        let s = shape_regularity(&region, &pixel_hull(&region).unwrap()).unwrap();
        assert_eq!(s, ShapeScores { solidity: 1.0, extent: 1.0 });
    }

    #[test]
    fn right_triangle_scores() {
        // Staircase triangle; its pixel hull tends to the continuous triangle.
        let n = 200;
        let region = region_of(&BinaryMask::from_fn(n, n, |x, y| x + y < n));
        let s = shape_regularity(&region, &pixel_hull(&region).unwrap()).unwrap();
        assert!(s.solidity > 0.99 && s.solidity <= 1.0, "{s:?}");
        assert!((s.extent - 0.5).abs() < 0.005, "{s:?}");
    }

    #[test]
    fn plus_pentomino() {
        let region = region_of(&BinaryMask::from_fn(3, 3, |x, y| x == 1 || y == 1));
        let hull = pixel_hull(&region).unwrap();
        assert_eq!(hull.area(), 7.0);
        let s = shape_regularity(&region, &hull).unwrap();
        assert!((s.solidity - 5.0 / 7.0).abs() < 1e-15);
        assert!((s.extent - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn contains_is_boundary_inclusive() {
        let sq = Polygon::rectangle(Point::new(0., 0.), Point::new(2., 2.)).unwrap();
        assert!(sq.contains(Point::new(1., 1.)));
        assert!(sq.contains(Point::new(2., 1.)));
        assert!(sq.contains(Point::new(0., 0.)));
        assert!(!sq.contains(Point::new(2.1, 1.)));
        assert_eq!(sq.distance_to(Point::new(5., 2.)), 3.0);
        assert_eq!(sq.centroid(), Point::new(1., 1.));
    }

    proptest! {
        #[test]
        fn hull_matches_brute_force(raw in proptest::collection::vec((-40i32..40, -40i32..40), 3..40)) {
            let points: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
            match convex_hull(&points) {
                Ok(hull) => {
                    let expected = brute_hull(&points);
                    prop_assert_eq!(hull.vertices(), expected.as_slice());
                    for &p in &points {
                        prop_assert!(hull.contains(p));
                    }
                    prop_assert!(hull.signed_area() > 0.0);
                }
                Err(_) => {
                    // only when every point is collinear
                    let b = brute_hull(&points);
                    prop_assert!(b.len() < 3);
                }
            }
        }
    }
}
