//! Exact 2D convex hulls over rational points.

use crate::rational::Rat;
use num::{Signed, Zero};

pub type Point = (Rat, Rat);

/// Cross product of (b - a) × (c - a); positive means a left turn.
pub fn cross(a: &Point, b: &Point, c: &Point) -> Rat {
    let abx = &b.0 - &a.0;
    let aby = &b.1 - &a.1;
    let acx = &c.0 - &a.0;
    let acy = &c.1 - &a.1;
    &abx * &acy - &aby * &acx
}

/// Convex hull by monotone chain; vertices in counter-clockwise order
/// starting at the lexicographically smallest point. Collinear interior
/// points are dropped. Degenerate inputs yield a point or a segment.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive()
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive()
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    if lower.is_empty() {
        // All points collinear: keep the two extremes.
        return vec![pts[0].clone(), pts[pts.len() - 1].clone()];
    }
    lower.extend(upper);
    lower
}

/// True when `p` lies inside or on the boundary of the convex hull of
/// `vertices` (given in counter-clockwise order).
pub fn contains(vertices: &[Point], p: &Point) -> bool {
    match vertices.len() {
        0 => false,
        1 => vertices[0] == *p,
        2 => {
            // On the segment: collinear and within the bounding box.
            let c = cross(&vertices[0], &vertices[1], p);
            if !c.is_zero() {
                return false;
            }
            let (lo, hi) = if vertices[0] <= vertices[1] {
                (&vertices[0], &vertices[1])
            } else {
                (&vertices[1], &vertices[0])
            };
            *p >= *lo && *p <= *hi
        }
        n => {
            for i in 0..n {
                let a = &vertices[i];
                let b = &vertices[(i + 1) % n];
                if cross(a, b, p).is_negative() {
                    return false;
                }
            }
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn pt(x: i64, y: i64) -> Point {
        (rat(x), rat(y))
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![pt(0, 0), pt(2, 0), pt(2, 2), pt(0, 2), pt(1, 1), pt(1, 0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull, vec![pt(0, 0), pt(2, 0), pt(2, 2), pt(0, 2)]);
    }

    #[test]
    fn collinear_points_reduce_to_segment() {
        let pts = vec![pt(0, 0), pt(1, 1), pt(2, 2)];
        assert_eq!(convex_hull(&pts), vec![pt(0, 0), pt(2, 2)]);
    }

    #[test]
    fn single_point() {
        assert_eq!(convex_hull(&[pt(3, 4)]), vec![pt(3, 4)]);
    }

    #[test]
    fn containment_is_exact() {
        let hull = convex_hull(&[pt(0, 0), pt(2, 0), pt(0, 2)]);
        assert!(contains(&hull, &(ratio(1, 2), ratio(1, 2))));
        assert!(contains(&hull, &(rat(1), rat(1)))); // on the edge
        assert!(!contains(&hull, &(ratio(3, 2), rat(1))));
    }
}
