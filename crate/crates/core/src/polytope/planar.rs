//! Exact planar geometry used as an oracle for the n = 2 case.

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    // upper chain; never pop back into the lower one
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon given in order.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let k = poly.len();
    if k < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..k {
        let a = poly[i];
        let b = poly[(i + 1) % k];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice.abs()
}

/// Signed distance from q to the boundary of a counter-clockwise convex
/// polygon: positive inside, negative outside (lower bound on the true
/// distance outside, exact inside).
pub fn signed_boundary_distance(poly: &[[f64; 2]], q: [f64; 2]) -> f64 {
    let k = poly.len();
    if k < 3 {
        return f64::NEG_INFINITY;
    }
    let mut d = f64::INFINITY;
    for i in 0..k {
        let a = poly[i];
        let b = poly[(i + 1) % k];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = (ex * ex + ey * ey).sqrt();
        let side = (ex * (q[1] - a[1]) - ey * (q[0] - a[0])) / len;
        d = d.min(side);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_hull_and_area() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.5, 0.0],
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((polygon_area(&h) - 1.0).abs() < 1e-15);
        assert!((signed_boundary_distance(&h, [0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!(signed_boundary_distance(&h, [1.5, 0.5]) < 0.0);
    }

    #[test]
    fn triangle_area() {
        let h = convex_hull(&[[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]);
        assert!((polygon_area(&h) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(polygon_area(&convex_hull(&[[1.0, 1.0], [1.0, 1.0]])), 0.0);
        assert_eq!(
            polygon_area(&convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])),
            0.0
        );
    }
}
