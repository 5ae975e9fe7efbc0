//! Planar segment predicates backed by adaptive-precision orientation tests.

use robust::{orient2d, Coord};

/// Parameter band near segment ends inside which a crossing is treated as degenerate.
pub const END_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossing {
    Disjoint,
    /// Transverse crossing strictly inside both segments.
    Proper,
    /// Touching, collinear overlap, or a crossing within [`END_TOLERANCE`] of an endpoint.
    Degenerate,
}

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(Coord { x: a[0], y: a[1] }, Coord { x: b[0], y: b[1] }, Coord { x: c[0], y: c[1] })
}

fn overlaps_1d(a: f64, b: f64, c: f64, d: f64) -> bool {
    a.min(b) <= c.max(d) && c.min(d) <= a.max(b)
}

/// Classifies segments `ab` and `cd`.
pub fn classify(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Crossing {
    if !overlaps_1d(a[0], b[0], c[0], d[0]) || !overlaps_1d(a[1], b[1], c[1], d[1]) {
        return Crossing::Disjoint;
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    if (o1 > 0.0 && o2 > 0.0) || (o1 < 0.0 && o2 < 0.0) {
        return Crossing::Disjoint;
    }
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if (o3 > 0.0 && o4 > 0.0) || (o3 < 0.0 && o4 < 0.0) {
        return Crossing::Disjoint;
    }
    if o1 == 0.0 || o2 == 0.0 || o3 == 0.0 || o4 == 0.0 {
        return Crossing::Degenerate;
    }
    let t = o3 / (o3 - o4);
    let u = o1 / (o1 - o2);
    let near_end = |p: f64| !(END_TOLERANCE..=1.0 - END_TOLERANCE).contains(&p);
    if near_end(t) || near_end(u) {
        Crossing::Degenerate
    } else {
        Crossing::Proper
    }
}

/// Parameter along `ab` of the crossing with `cd`, for segments known to cross properly.
pub fn crossing_param(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o3 / (o3 - o4)
}

/// Intersection point of two segments known to cross properly.
pub fn crossing_point(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> [f64; 2] {
    let t = crossing_param(a, b, c, d);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest};

    #[test]
    fn basic_cases() {
        assert_eq!(classify([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]), Crossing::Proper);
        assert_eq!(classify([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]), Crossing::Disjoint);
        assert_eq!(classify([0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.5, 1.0]), Crossing::Degenerate);
        assert_eq!(classify([0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [2.0, 0.0]), Crossing::Degenerate);
        assert_eq!(classify([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]), Crossing::Disjoint);
        let p = crossing_point([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0,
                     cx in -1.0f64..1.0, cy in -1.0f64..1.0, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let (a, b, c, d) = ([ax, ay], [bx, by], [cx, cy], [dx, dy]);
            let r = classify(a, b, c, d);
            prop_assert_eq!(r, classify(c, d, a, b));
            prop_assert_eq!(r, classify(b, a, d, c));
        }
    }
}
