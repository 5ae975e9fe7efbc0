use proptest::prelude::*;

use pblab::cover::{connected_components, enclosing_disc, enclosing_disc_global, mask_count};
use pblab::{Cover, Grid};

/// Union of axis-aligned boxes, wrapping around the torus seams.
fn boxes(g: &Grid, rects: &[(usize, usize, usize, usize)]) -> Vec<bool> {
    let mut m = vec![false; g.len()];
    for &(i0, j0, w, h) in rects {
        for a in 0..w {
            for b in 0..h {
                m[g.index((i0 + a) % g.nx(), (j0 + b) % g.ny())] = true;
            }
        }
    }
    m
}

fn rect() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (0usize..48, 0usize..48, 1usize..20, 1usize..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enclosing_disc_is_idempotent_and_contains_the_set(rects in prop::collection::vec(rect(), 1..4)) {
        let g = Grid::torus(48, 48, 1.0, 1.0).unwrap();
        let m = boxes(&g, &rects);
        if let Ok(d) = enclosing_disc(&g, &m) {
            prop_assert!(m.iter().zip(&d).all(|(a, b)| !a || *b));
            prop_assert_eq!(enclosing_disc(&g, &d).unwrap(), d);
        }
    }

    #[test]
    fn windowed_and_global_agree(rects in prop::collection::vec(rect(), 1..4)) {
        let g = Grid::torus(48, 48, 1.0, 1.0).unwrap();
        let m = boxes(&g, &rects);
        match enclosing_disc(&g, &m) {
            Ok(d) => prop_assert_eq!(enclosing_disc_global(&g, &m).unwrap(), d),
            Err(_) => {
                // either no big complement component, or one whose complement wraps a handle
                if let Ok(d) = enclosing_disc_global(&g, &m) {
                    prop_assert!(pblab::cover::euler_characteristic(&g, &d) != 1);
                }
            }
        }
    }

    #[test]
    fn duplication_scales_degree(m in 1usize..5, rects in prop::collection::vec(rect(), 1..3)) {
        let g = Grid::torus(48, 48, 1.0, 1.0).unwrap();
        let set = boxes(&g, &rects);
        let rest: Vec<bool> = set.iter().map(|&b| !b).collect();
        prop_assume!(mask_count(&rest) > 0);
        let c = Cover::new(g, vec![set, rest]).unwrap();
        prop_assert_eq!(c.duplicated(m).degree(), m * c.degree());
    }
}

#[test]
fn hole_is_filled_by_enclosing_disc() {
    let g = Grid::torus(64, 64, 1.0, 1.0).unwrap();
    let ring: Vec<bool> = (0..g.len())
        .map(|k| {
            let (i, j) = g.ij(k);
            let r2 = (i as f64 - 32.0).powi(2) + (j as f64 - 32.0).powi(2);
            (64.0..196.0).contains(&r2)
        })
        .collect();
    assert_eq!(connected_components(&g, &ring).len(), 1);
    let d = enclosing_disc(&g, &ring).unwrap();
    assert!(d[g.index(32, 32)]);
    assert!(mask_count(&d) > mask_count(&ring));
}

#[test]
fn meridian_band_is_not_enclosable() {
    let g = Grid::torus(64, 64, 1.0, 1.0).unwrap();
    let band: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 8).collect();
    assert!(enclosing_disc(&g, &band).is_err());
}

#[test]
fn polar_cap_on_sphere_is_a_disc() {
    let g = Grid::sphere(64, 64, 1.0).unwrap();
    let cap: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 12).collect();
    assert_eq!(enclosing_disc(&g, &cap).unwrap(), cap);
}
