use std::f64::consts::PI;

use proptest::prelude::*;

use pblab::surface::{gradient, integrate, poisson_bracket, sup_norm};
use pblab::{Field, Grid};

fn trig(g: &Grid, a: f64, b: f64, p: f64) -> Field {
    Field::from_fn(g, move |x, y| (2.0 * PI * (a * x + b * y) + p).sin() + 0.3 * (2.0 * PI * x).cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn antisymmetric_and_zero_on_diagonal(n in 16usize..48, a in -3i32..=3, b in -3i32..=3, p in 0.0f64..6.0) {
        let g = Grid::torus(n, n + 4, 1.0, 1.5).unwrap();
        let f = trig(&g, a as f64, b as f64, p);
        let h = trig(&g, b as f64, -(a as f64), 2.0 * p);
        let fh = poisson_bracket(&f, &h).unwrap();
        let hf = poisson_bracket(&h, &f).unwrap();
        prop_assert!(fh.values().iter().zip(hf.values()).all(|(x, y)| x == &-y));
        prop_assert!(poisson_bracket(&f, &f).unwrap().values().iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn bilinear_in_each_slot(c in -3.0f64..3.0, p in 0.0f64..6.0) {
        let g = Grid::torus(32, 32, 1.0, 1.0).unwrap();
        let (f, h, k) = (trig(&g, 1.0, 2.0, p), trig(&g, -1.0, 1.0, 0.0), trig(&g, 2.0, 0.0, p));
        let comb = f.zip_with(&h, |u, v| c * u + v).unwrap();
        let lhs = poisson_bracket(&comb, &k).unwrap();
        let a = poisson_bracket(&f, &k).unwrap();
        let b = poisson_bracket(&h, &k).unwrap();
        for ((l, x), y) in lhs.values().iter().zip(a.values()).zip(b.values()) {
            prop_assert!((l - (c * x + y)).abs() <= 1e-9 * (1.0 + l.abs()));
        }
    }
}

fn leibniz_defect(n: usize) -> f64 {
    let g = Grid::torus(n, n, 1.0, 1.0).unwrap();
    let f = Field::from_fn(&g, |x, y| (2.0 * PI * x).sin() + (2.0 * PI * y).cos());
    let h = Field::from_fn(&g, |x, y| (2.0 * PI * (x + y)).cos());
    let k = Field::from_fn(&g, |x, y| (2.0 * PI * (x - 2.0 * y)).sin());
    let fh = f.zip_with(&h, |a, b| a * b).unwrap();
    let lhs = poisson_bracket(&fh, &k).unwrap();
    let hk = poisson_bracket(&h, &k).unwrap();
    let fk = poisson_bracket(&f, &k).unwrap();
    let rhs: Vec<f64> = (0..g.len()).map(|i| f.values()[i] * hk.values()[i] + h.values()[i] * fk.values()[i]).collect();
    lhs.values().iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn leibniz_rule_holds_to_second_order() {
    let (coarse, fine) = (leibniz_defect(64), leibniz_defect(128));
    let order = (coarse / fine).log2();
    assert!(order > 1.8, "observed order {order} ({coarse:e} -> {fine:e})");
}

#[test]
fn torus_bracket_converges_to_closed_form() {
    // {cos 2πx, cos 2πy} = 4π² sin 2πx sin 2πy on the unit torus
    let mut errs = Vec::new();
    for n in [64usize, 128, 256] {
        let g = Grid::torus(n, n, 1.0, 1.0).unwrap();
        let f = Field::from_fn(&g, |x, _| (2.0 * PI * x).cos());
        let h = Field::from_fn(&g, |_, y| (2.0 * PI * y).cos());
        let b = poisson_bracket(&f, &h).unwrap();
        let exact = Field::from_fn(&g, |x, y| 4.0 * PI * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin());
        errs.push(sup_norm(&b.zip_with(&exact, |a, e| a - e).unwrap()));
    }
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn sphere_height_bracket_is_angular_derivative() {
    // in the equal-area chart {z, h} = ±∂h/∂θ on the unit sphere
    let g = Grid::sphere(128, 64, 1.0).unwrap();
    let bump = |z: f64| (0.64 - z * z).max(0.0).powi(3);
    let z = Field::from_fn(&g, |z, _| z);
    let h = Field::from_fn(&g, move |z, t: f64| bump(z) * t.sin());
    let exact = Field::from_fn(&g, move |z, t: f64| bump(z) * t.cos());
    let b = poisson_bracket(&z, &h).unwrap();
    let err = b.values().iter().zip(exact.values()).map(|(a, e)| (a.abs() - e.abs()).abs()).fold(0.0, f64::max);
    // central-difference truncation in θ is about hθ²/6 = 1.6e-3 relative
    assert!(err < 3e-3 * sup_norm(&exact), "{err}");
}

#[test]
fn integral_of_a_bracket_vanishes() {
    let g = Grid::torus(96, 96, 1.0, 1.0).unwrap();
    let f = Field::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (4.0 * PI * y).cos());
    let h = Field::from_fn(&g, |x, y| (2.0 * PI * (x + y)).cos());
    let b = poisson_bracket(&f, &h).unwrap();
    assert!(integrate(&b).abs() < 1e-9 * sup_norm(&b));
}

#[test]
fn gradient_of_linear_phase() {
    let g = Grid::torus(64, 64, 1.0, 1.0).unwrap();
    let f = Field::from_fn(&g, |x, _| (2.0 * PI * x).sin());
    let gr = gradient(&f);
    let (i, j) = (0, 5);
    let k = g.index(i, j);
    assert!((gr.dx[k] - 2.0 * PI).abs() < 2e-2 && gr.dy[k].abs() < 1e-12);
}
