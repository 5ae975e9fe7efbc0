use pblab::bracket::bracket_report;
use pblab::partition::{optimize_partition, sharp_cover, Objective, OptimizeOptions};
use pblab::{Cover, Grid};

fn options() -> OptimizeOptions {
    OptimizeOptions { margin: 0.1, step: 0.5, probe: 0.1, modes: 2 }
}

#[test]
fn height_bands_reach_zero() {
    let g = Grid::sphere(96, 96, 1.0).unwrap();
    let bands = [(0, 40), (28, 72), (60, 96)];
    let masks = bands.iter().map(|&(lo, hi)| (0..g.len()).map(|k| (lo..hi).contains(&g.ij(k).0)).collect()).collect();
    let c = Cover::new(g, masks).unwrap();
    let r = optimize_partition(&c, Objective::Supsum, 5, 1, &options()).unwrap();
    assert!(r.best < 1e-8, "best {}", r.best);
}

#[test]
fn best_so_far_never_increases() {
    let g = Grid::torus(64, 64, 1.0, 1.0).unwrap();
    let (c, _) = sharp_cover(4, &g, false).unwrap();
    for objective in [Objective::Supsum, Objective::L1sum, Objective::PbUpper] {
        let r = optimize_partition(&c, objective, 8, 5, &options()).unwrap();
        assert!(r.best <= r.initial);
        assert_eq!(r.trace.len(), 9);
        assert_eq!(r.trace[0].1, r.initial);
        assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(r.trace.last().unwrap().1, r.best);
    }
}

#[test]
fn same_seed_same_result() {
    let g = Grid::torus(48, 48, 1.0, 1.0).unwrap();
    let (c, _) = sharp_cover(4, &g, false).unwrap();
    let a = optimize_partition(&c, Objective::L1sum, 6, 9, &options()).unwrap();
    let b = optimize_partition(&c, Objective::L1sum, 6, 9, &options()).unwrap();
    assert_eq!(a.trace, b.trace);
    for (f, h) in a.partition.fields().iter().zip(b.partition.fields()) {
        assert_eq!(f.values(), h.values());
    }
}

#[test]
fn optimized_lattice_respects_lower_bounds() {
    let g = Grid::torus(128, 128, 1.0, 1.0).unwrap();
    let (c, _) = sharp_cover(8, &g, false).unwrap();
    let r = optimize_partition(&c, Objective::PbUpper, 3, 2, &options()).unwrap();
    let report = bracket_report(&r.partition, &r.partition).unwrap();
    assert!(report.pb_upper.value >= report.pb_lower.bound);
    assert!(report.total_l1 >= report.bounds.gen_cover_bound);
    assert!(report.bounds.gen_cover_bound > 0.0);
}
