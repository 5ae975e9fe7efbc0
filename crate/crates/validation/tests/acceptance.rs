//! End-to-end acceptance run: one PASS/FAIL line per criterion with timings.
//!
//! Runs sequentially so the wall-clock limits are measured without contention
//! from other tests. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pblab::bracket::{bracket_report, degree_bound_check, essential_bound_check};
use pblab::divisions::{is_a_division, lattice_disc_cover, sample_division_pair, survival_experiment};
use pblab::levelset::{coarea_check, Rect};
use pblab::partition::{bump_partition, relax_profile, sharp_cover};
use pblab::surface::poisson_bracket;
use pblab::symplinalg::{apply_j0, cube_ratio, max_bilinear_cube, omega0, proof_constant, shear_map, symplectic_defect};
use pblab::{Cover, Field, Grid, VectorSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_time(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() <= limit
}

fn coarea_identity() -> Outcome {
    let t = Instant::now();
    let g = Grid::torus(512, 512, 1.0, 1.0).unwrap();
    let f = Field::from_fn(&g, |x, _| (2.0 * PI * x).cos());
    let h = Field::from_fn(&g, |_, y| (2.0 * PI * y).cos());
    let r = coarea_check(&f, &h, &[Rect::new(-1.0, 1.0, -1.0, 1.0)], 64).unwrap();
    let el = t.elapsed();
    let (lhs_err, rhs_err) = ((r.lhs - 16.0).abs() / 16.0, (r.rhs - 16.0).abs() / 16.0);
    let pass = lhs_err <= 0.02 && rhs_err <= 0.02 && within_time(el, 10.0);
    outcome(pass, format!("lhs={:.5} rhs={:.5} oracle=16 errs=({lhs_err:.2e},{rhs_err:.2e}) t={el:.2?}", r.lhs, r.rhs))
}

fn essential_bound() -> Outcome {
    let t = Instant::now();
    let g = Grid::torus(512, 512, 1.0, 1.0).unwrap();
    let (_, p) = sharp_cover(4, &g, false).unwrap();
    let l = essential_bound_check(&p, 0.05).unwrap();
    let el = t.elapsed();
    let min_row = l.entries.iter().map(|e| e.row_l1).fold(f64::INFINITY, f64::min);
    let rows_ok = l.entries.len() == 16 && min_row >= 0.95;
    let total_ok = l.total_l1 >= 0.95 * l.entries.len() as f64;
    let pass = rows_ok && total_ok && within_time(el, 30.0);
    outcome(pass, format!("|I_ess|={} min_row={min_row:.3} total={:.3} (>= 15.2) t={el:.2?}", l.entries.len(), l.total_l1))
}

fn general_cover_bound() -> Outcome {
    let t = Instant::now();
    let g = Grid::torus(512, 512, 1.0, 1.0).unwrap();
    let (_, p) = sharp_cover(4, &g, false).unwrap();
    let (_, q) = sharp_cover(4, &g, true).unwrap();
    let r = bracket_report(&p, &q).unwrap();
    let el = t.elapsed();
    let bound = r.bounds.gen_cover_bound;
    let pass = bound > 0.0 && r.total_l1 >= 0.95 * bound && within_time(el, 30.0);
    outcome(pass, format!("sum={:.3} area/2A={bound:.4} t={el:.2?}", r.total_l1))
}

fn degree_bound() -> Outcome {
    let g = Grid::torus(256, 256, 1.0, 1.0).unwrap();
    let (_, p) = sharp_cover(8, &g, false).unwrap();
    let base = degree_bound_check(&p, 0.0).unwrap();
    let mut pass = base.pass;
    let mut detail = format!("m=1 lhs={:.3} rhs={:.3}", base.lhs, base.rhs);
    for m in [2usize, 4] {
        let d = degree_bound_check(&p.duplicated(m), 0.0).unwrap();
        let m2 = (m * m) as f64;
        let (sl, sr) = (d.lhs * m2 / base.lhs, d.rhs * m2 / base.rhs);
        pass &= d.pass && (sl - 1.0).abs() <= 0.1 && (sr - 1.0).abs() <= 0.1;
        detail += &format!("; m={m} lhs={:.4} rhs={:.4} scaled=({sl:.4},{sr:.4})", d.lhs, d.rhs);
    }
    outcome(pass, detail)
}

fn brute_bilinear(gram: &[f64], n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for xm in 0..1u32 << n {
        for ym in 0..1u32 << n {
            let s = |m: u32, i: usize| if m >> i & 1 == 1 { 1.0 } else { -1.0 };
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += s(xm, i) * gram[i * n + j] * s(ym, j);
                }
            }
            best = best.max(v);
        }
    }
    best
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn linear_algebra() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut worst_gap: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=3);
        let count = rng.gen_range(1..=10);
        let vs = VectorSet::random_gaussian(n, count, &mut rng);
        let brute = brute_bilinear(vs.gram(), count);
        worst_gap = worst_gap.max((max_bilinear_cube(&vs).value - brute).abs());
    }
    let cube_ok = worst_gap <= 1e-12;

    let c = proof_constant(1, PI / 30.0).unwrap();
    let mut min_ratio = f64::INFINITY;
    for _ in 0..10_000 {
        let count = rng.gen_range(2..=10);
        let vs = VectorSet::random_gaussian(1, count, &mut rng);
        if let Some(r) = cube_ratio(&vs).ratio {
            min_ratio = min_ratio.min(r);
        }
    }
    let constant_ok = (c - (PI / 30.0).cos().sqrt() / 8100.0).abs() <= 1e-15 && min_ratio >= c;

    let theta = PI / 30.0;
    let (mut defect, mut growth_excess, mut cone_excess) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..100_000 {
        let n = 1 + k % 3;
        let v = unit(gaussian(&mut rng, 2 * n));
        let s = shear_map(&v);
        let u = gaussian(&mut rng, 2 * n);
        let w = gaussian(&mut rng, 2 * n);
        defect = defect.max(symplectic_defect(&s, &[(u.clone(), w)]));
        growth_excess = growth_excess.max(norm(&s.apply(&u)) - norm(&u) - 3.0 * omega0(&u, &v).abs());
        // a vector at angle at most theta from v
        let jv = apply_j0(&v);
        let mut perp = gaussian(&mut rng, 2 * n);
        let along = perp.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        perp.iter_mut().zip(&v).for_each(|(p, b)| *p -= along * b);
        let perp = if norm(&perp) > 1e-9 { unit(perp) } else { jv };
        let angle = rng.gen_range(0.0..=theta);
        let r: f64 = rng.gen_range(0.1..10.0);
        let cone_u: Vec<f64> = v.iter().zip(&perp).map(|(a, b)| r * (angle.cos() * a + angle.sin() * b)).collect();
        cone_excess = cone_excess.max(norm(&s.apply(&cone_u)) - 2.0 / 3.0 * norm(&cone_u));
    }
    let shear_ok = defect <= 1e-10 && growth_excess <= 1e-12 && cone_excess <= 1e-12;
    let el = t.elapsed();
    let pass = cube_ok && constant_ok && shear_ok && within_time(el, 60.0);
    outcome(
        pass,
        format!(
            "cube_gap={worst_gap:.1e} min_ratio={min_ratio:.4e} c={c:.5e} defect={defect:.1e} growth_excess={growth_excess:.2e} cone_excess={cone_excess:.2e} t={el:.2?}"
        ),
    )
}

fn division_counting() -> Outcome {
    let t = Instant::now();
    let g = Grid::torus(256, 256, 1.0, 1.0).unwrap();
    let area_bound = g.total_area() / 8.0;
    let floor = (g.total_area() / (2.0 * area_bound)).round() as usize;
    let (mut failures, mut below, mut not_divisions, mut min_count) = (0, 0, 0, usize::MAX);
    for s in 0..100u64 {
        let cu = lattice_disc_cover(&g, 4, 0.19, 0.01, 1, 2 * s).unwrap();
        let cv = lattice_disc_cover(&g, 4, 0.19, 0.01, 1, 2 * s + 1).unwrap();
        match sample_division_pair(&cu, &cv, s) {
            Ok(p) => {
                if !is_a_division(&p.first, area_bound).pass || !is_a_division(&p.second, area_bound).pass {
                    not_divisions += 1;
                }
                below += (p.count < floor) as usize;
                min_count = min_count.min(p.count);
            }
            Err(_) => failures += 1,
        }
    }
    let el = t.elapsed();
    let pass = below == 0 && not_divisions == 0 && failures <= 5;
    outcome(
        pass,
        format!("min_count={min_count} (>= {floor}) below={below} non_A_divisions={not_divisions} genericity_failures={failures}/100 t={el:.2?}"),
    )
}

fn permutation_survival() -> Outcome {
    let g = Grid::torus(256, 256, 1.0, 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [4usize, 8] {
        let c = lattice_disc_cover(&g, 4, 0.2, 0.02, l, 7).unwrap();
        let s = survival_experiment(&c, l, Some(l), 200, 11).unwrap();
        pass &= s.within_sigmas(3.0) && s.mismatches == 0;
        parts.push(format!(
            "L={l} freq={:.4} 1/(L+1)={:.4} sigma={:.4} trials={} mismatches={}",
            s.frequency, s.bound, s.sigma, s.trials, s.mismatches
        ));
    }
    outcome(pass, parts.join("; "))
}

fn sharp_scaling() -> Outcome {
    let g = Grid::torus(256, 256, 1.0, 1.0).unwrap();
    let mut scaled = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [4usize, 8, 16] {
        let (c, p) = sharp_cover(k, &g, false).unwrap();
        let r = bracket_report(&p, &p).unwrap();
        let eps2 = 1.0 / (k * k) as f64;
        let ess = c.essential_indices().len();
        let up = r.pb_upper.value;
        pass &= ess as f64 * eps2 == 1.0 && up >= r.pb_lower.bound;
        scaled.push(up * eps2);
        parts.push(format!(
            "eps=1/{k} pb_upper*eps^2={:.2} |I_ess|*eps^2={} pb_lower={:.3e}",
            up * eps2,
            ess as f64 * eps2,
            r.pb_lower.bound
        ));
    }
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    pass &= hi <= 2.0 * lo;
    parts.push(format!("spread={:.3}", hi / lo));
    outcome(pass, parts.join("; "))
}

fn commuting_case() -> Outcome {
    let g = Grid::sphere(256, 256, 1.0).unwrap();
    let south: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 160).collect();
    let north: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 >= 96).collect();
    let c = Cover::new(g, vec![south, north]).unwrap();
    let p = bump_partition(&c, 0.1).unwrap();
    let r = bracket_report(&p, &p).unwrap();
    let pass = r.sup_sum <= 1e-8 && r.pb_upper.value <= 1e-8;
    outcome(pass, format!("sup_sum={:.2e} pb_upper={:.2e}", r.sup_sum, r.pb_upper.value))
}

/// Four random Fourier modes of frequency at most 2, total amplitude 1.5.
fn random_field(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let mut terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64, rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let total: f64 = terms.iter().map(|t| t.2).sum();
    terms.iter_mut().for_each(|t| t.2 *= 1.5 / total);
    Field::from_fn(g, |x, y| terms.iter().map(|&(a, b, c, ph)| c * (2.0 * PI * (a * x + b * y) + ph).cos()).sum())
}

fn relaxation() -> Outcome {
    let g = Grid::torus(256, 256, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let delta = 0.05;
    let (mut worst, mut worst_rel, mut violating_pairs, mut violating_nodes) = (f64::NEG_INFINITY, 0.0f64, 0, 0usize);
    for _ in 0..50 {
        let f = random_field(&g, &mut rng);
        let h = random_field(&g, &mut rng);
        let base = poisson_bracket(&f, &h).unwrap();
        let relaxed = poisson_bracket(&f.map(|v| relax_profile(v, delta)), &h.map(|v| relax_profile(v, delta))).unwrap();
        let sup = base.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut bad = 0;
        for (r, b) in relaxed.values().iter().zip(base.values()) {
            let excess = r.abs() - b.abs();
            worst = worst.max(excess);
            worst_rel = worst_rel.max(excess / sup);
            bad += (excess > 1e-8) as usize;
        }
        violating_nodes += bad;
        violating_pairs += (bad > 0) as usize;
    }
    outcome(
        violating_pairs == 0,
        format!(
            "max excess={worst:.3e} ({worst_rel:.2e} of sup |{{f,g}}|) violating_pairs={violating_pairs}/50 violating_nodes={violating_nodes}/{}",
            50 * g.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("coarea identity", coarea_identity),
        ("essential-set bound", essential_bound),
        ("general cover bound", general_cover_bound),
        ("degree bound and duplication scaling", degree_bound),
        ("symplectic linear algebra", linear_algebra),
        ("division crossing counts", division_counting),
        ("permutation survival", permutation_survival),
        ("sharp scaling sandwich", sharp_scaling),
        ("commuting sphere partition", commuting_case),
        ("nonnegative relaxation", relaxation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += !o.pass as usize;
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
