//! The eight subcommands. Each returns its checks, results, tables and plots.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use pblab::bracket::{bracket_report, degree_bound_check, essential_bound_check, max_enclosing_area, pair_brackets};
use pblab::divisions::{is_a_division, lattice_disc_cover, sample_division_pair, survival_experiment, BoundaryCover};
use pblab::levelset::{coarea_check, extract_level, value_box, Rect};
use pblab::partition::{bump_partition, optimize_partition, sharp_cover, OptimizeOptions};
use pblab::surface::Topology;
use pblab::svg::SvgCanvas;
use pblab::symplinalg::{
    apply_j0, chain_factor, cone_cover, cone_norm_sum, cube_ratio, max_bilinear_cube, max_cone, minimize_over_sp, omega0, proof_constant,
    shear_map, symplectic_defect, ConeCoverOptions,
};
use pblab::{Cover, Error, Field, Grid, Partition, VectorSet};

use crate::config::{
    CoareaParams, Config, ConfigError, CoverSpec, DegreeParams, DivisionParams, EmptyParams, LinalgParams, OptimizeParams, PartitionSpec,
    ScalingParams, SurfaceSpec,
};
use crate::report::{Artifacts, Check, Table};

const PLOT_SIZE: f64 = 512.0;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Failed(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_) | Error::UnderResolved { .. } | Error::InvalidArgument(_) | Error::DeltaTooLarge(_) => {
                RunError::Config(e.to_string())
            }
            other => RunError::Failed(other.to_string()),
        }
    }
}

type Run = Result<Artifacts, RunError>;

pub fn run(name: &str, cfg: &Config) -> Run {
    match name {
        "coarea-check" => coarea(cfg),
        "essential-bound" => essential(cfg),
        "gen-cover-bound" => gen_cover(cfg),
        "degree-bound" => degree(cfg),
        "sharp-scaling" => scaling(cfg),
        "division-demo" => divisions(cfg),
        "linalg-constant" => linalg(cfg),
        "optimize" => optimize(cfg),
        other => Err(RunError::Config(format!("unknown experiment {other}"))),
    }
}

/// Whether the experiment draws random numbers and so needs a seed.
pub fn is_randomized(name: &str) -> bool {
    matches!(name, "division-demo" | "linalg-constant" | "optimize")
}

fn grid(cfg: &Config) -> Result<Grid, RunError> {
    let n = cfg.resolution()?;
    Ok(match cfg.surface() {
        SurfaceSpec::Torus { lx, ly } => Grid::torus(n, n, lx, ly)?,
        SurfaceSpec::Sphere { radius } => Grid::sphere(n, n, radius)?,
    })
}

fn unit_torus(g: &Grid) -> bool {
    matches!(g.topology(), Topology::Torus { lx, ly } if lx == 1.0 && ly == 1.0)
}

fn height_bands(g: &Grid, bands: usize, overlap: f64) -> Result<Cover, RunError> {
    if bands < 2 || !(overlap > 0.0 && overlap < 0.5) {
        return Err(RunError::Config("height bands need at least two bands and overlap in (0, 0.5)".into()));
    }
    let rows = g.nx() as f64 / bands as f64;
    let masks = (0..bands)
        .map(|b| {
            let lo = (b as f64 - overlap) * rows;
            let hi = (b as f64 + 1.0 + overlap) * rows;
            (0..g.len()).map(|k| (lo..hi).contains(&(g.ij(k).0 as f64))).collect()
        })
        .collect();
    Ok(Cover::new(g.clone(), masks)?)
}

fn disc_lattice(g: &Grid, spec: &CoverSpec, copies_override: Option<usize>, seed: u64) -> Result<BoundaryCover<f64>, RunError> {
    match *spec {
        CoverSpec::DiscLattice { k, radius, jitter, copies } => {
            Ok(lattice_disc_cover(g, k, radius, jitter, copies_override.unwrap_or(copies), seed)?)
        }
        _ => Err(RunError::Config("this experiment needs a disc_lattice cover".into())),
    }
}

/// The configured cover and partition, or `default` when the file names none.
fn partition(cfg: &Config, g: &Grid, default: CoverSpec) -> Result<(CoverSpec, Partition), RunError> {
    let spec = cfg.cover.clone().unwrap_or(default);
    let pspec = cfg.partition.clone().unwrap_or(match spec {
        CoverSpec::SharpLattice { .. } => PartitionSpec::Sharp,
        _ => PartitionSpec::Bump { margin: 0.1 },
    });
    let p = match (&spec, pspec) {
        (&CoverSpec::SharpLattice { k, offset }, PartitionSpec::Sharp) => sharp_cover(k, g, offset)?.1,
        (&CoverSpec::SharpLattice { k, offset }, PartitionSpec::Bump { margin }) => bump_partition(&sharp_cover(k, g, offset)?.0, margin)?,
        (_, PartitionSpec::Sharp) => return Err(RunError::Config("the sharp partition needs a sharp_lattice cover".into())),
        (CoverSpec::DiscLattice { .. }, PartitionSpec::Bump { margin }) => {
            let seed = if matches!(spec, CoverSpec::DiscLattice { jitter, .. } if jitter > 0.0) { cfg.require_seed()? } else { 0 };
            bump_partition(&disc_lattice(g, &spec, None, seed)?.to_cover()?, margin)?
        }
        (&CoverSpec::HeightBands { bands, overlap }, PartitionSpec::Bump { margin }) => {
            bump_partition(&height_bands(g, bands, overlap)?, margin)?
        }
    };
    Ok((spec, p))
}

fn sum_field(p: &Partition, q: &Partition) -> Result<Field, RunError> {
    let pb = pair_brackets(p.fields(), q.fields())?;
    Ok(Field::new(p.grid().clone(), pb.sum_field().to_vec())?)
}

fn heatmap(f: &Field) -> String {
    SvgCanvas::for_grid(f.grid(), PLOT_SIZE).heatmap(f).finish()
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn coarea(cfg: &Config) -> Run {
    let params: CoareaParams = cfg.params()?;
    let tol = cfg.tolerance(0.02)?;
    let g = grid(cfg)?;
    if !g.is_torus() {
        return Err(RunError::Config("coarea-check runs on the torus".into()));
    }
    let (f, h) = match params.pair.as_str() {
        "trig" => (Field::from_fn(&g, |x, _| (2.0 * PI * x).cos()), Field::from_fn(&g, |_, y| (2.0 * PI * y).cos())),
        "bumps" => {
            let (_, p) = sharp_cover(4, &g, false)?;
            let (_, q) = sharp_cover(4, &g, true)?;
            (p.fields()[5].clone(), q.fields()[5].clone())
        }
        other => return Err(RunError::Config(format!("unknown field pair {other:?}, expected trig or bumps"))),
    };
    let rects = match (&params.rects, params.pair.as_str()) {
        (Some(r), _) => r.clone(),
        (None, "trig") => vec![Rect::new(-1.0, 1.0, -1.0, 1.0)],
        (None, _) => vec![value_box(&f, &h)],
    };
    if params.quad == 0 || rects.is_empty() {
        return Err(RunError::Config("need at least one rectangle and a positive quadrature size".into()));
    }
    let r = coarea_check(&f, &h, &rects, params.quad)?;
    let mut a = Artifacts::default();
    a.check(Check::close("int_{f,g in rects} |{f,g}| = int count", r.lhs, r.rhs, tol));
    if params.pair == "trig" && params.rects.is_none() && unit_torus(&g) {
        a.check(Check::close("lhs against closed form 16", r.lhs, 16.0, tol));
        a.check(Check::close("rhs against closed form 16", r.rhs, 16.0, tol));
    }
    a.results = json!({ "coarea": r, "rects": rects, "pair": params.pair });
    let mut t = Table::new("coarea", &["s0", "s1", "t0", "t1"]);
    for q in &rects {
        t.push(vec![fmt(q.s[0]), fmt(q.s[1]), fmt(q.t[0]), fmt(q.t[1])]);
    }
    a.tables.push(t);
    let mut summary = Table::new("coarea_summary", &["lhs", "rhs", "rel_err", "samples", "odd_samples", "nudged_samples", "max_count"]);
    summary.push(vec![
        fmt(r.lhs),
        fmt(r.rhs),
        fmt(r.rel_err),
        r.samples.to_string(),
        r.odd_samples.to_string(),
        r.nudged_samples.to_string(),
        r.max_count.to_string(),
    ]);
    a.tables.push(summary);
    let bracket = pblab::surface::poisson_bracket(&f, &h)?.map(f64::abs);
    let mut canvas = SvgCanvas::for_grid(&g, PLOT_SIZE);
    canvas.heatmap(&bracket);
    let mid = |q: &Rect| ((q.s[0] + q.s[1]) / 2.0 + 1e-3, (q.t[0] + q.t[1]) / 2.0 + 1e-3);
    let (s, t) = mid(&rects[0]);
    if let (Ok(cf), Ok(ch)) = (extract_level(&f, s), extract_level(&h, t)) {
        canvas.segments(&cf.segments, "#1b5e20", 1.5).segments(&ch.segments, "#4a148c", 1.5);
    }
    a.plots.push(("bracket".into(), canvas.finish()));
    Ok(a)
}

fn essential(cfg: &Config) -> Run {
    let _: EmptyParams = cfg.params()?;
    let tol = cfg.tolerance(0.05)?;
    let g = grid(cfg)?;
    let (_, p) = partition(cfg, &g, CoverSpec::SharpLattice { k: 4, offset: false })?;
    let l = essential_bound_check(&p, tol)?;
    let mut a = Artifacts::default();
    let mut t = Table::new("essential", &["index", "row_l1", "pass"]);
    for e in &l.entries {
        a.check(Check::at_least(format!("sum_j int |{{f_{0}, f_j}}| >= 1", e.index), e.row_l1, 1.0, tol));
        t.push(vec![e.index.to_string(), fmt(e.row_l1), e.pass.to_string()]);
    }
    a.check(Check::at_least("sum_ij int |{f_i, f_j}| >= |I_ess|", l.total_l1, l.total_bound, tol));
    a.check(Check::at_least("sup sum_ij |{f_i, f_j}| >= 1 / min essential area", l.sup_sum, l.sup_bound, tol));
    a.tables.push(t);
    a.results = json!({ "ledger": l, "essential_count": l.entries.len(), "sets": p.cover().len() });
    a.plots.push(("sum_field".into(), heatmap(&sum_field(&p, &p)?)));
    Ok(a)
}

fn gen_cover(cfg: &Config) -> Run {
    let _: EmptyParams = cfg.params()?;
    let tol = cfg.tolerance(0.05)?;
    let g = grid(cfg)?;
    let (spec, p) = partition(cfg, &g, CoverSpec::SharpLattice { k: 4, offset: false })?;
    // the lattice is paired with its half-cell translate, any other cover with itself
    let q = match spec {
        CoverSpec::SharpLattice { k, offset } => {
            let mut shifted = cfg.clone();
            shifted.cover = Some(CoverSpec::SharpLattice { k, offset: !offset });
            partition(&shifted, &g, spec.clone())?.1
        }
        _ => p.clone(),
    };
    let r = bracket_report(&p, &q)?;
    let mut a = Artifacts::default();
    let bound = r.bounds.gen_cover_bound;
    let mut c = Check::at_least("sum_ij int |{f_i, g_j}| >= area / 2A", r.total_l1.f64(), bound, tol);
    c.pass &= bound > 0.0;
    a.check(c);
    a.check(Check::at_least("pb_upper >= c * sup sum |{f_i, g_j}|", r.pb_upper.value, r.pb_lower.bound, 0.0));
    let mut t = Table::new("pair_l1", &["i", "j", "l1"]);
    for (i, row) in r.pair_l1.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.push(vec![i.to_string(), j.to_string(), fmt(*v)]);
        }
    }
    a.tables.push(t);
    let area = max_enclosing_area(p.cover()).max(max_enclosing_area(q.cover()));
    a.results = json!({ "summary": r.summary_json(), "max_enclosing_area": area, "area": g.total_area() });
    a.plots.push(("sum_field".into(), heatmap(&r.sum_field)));
    Ok(a)
}

trait AsF64 {
    fn f64(self) -> f64;
}

impl AsF64 for f64 {
    fn f64(self) -> f64 {
        self
    }
}

fn degree(cfg: &Config) -> Run {
    let params: DegreeParams = cfg.params()?;
    let tol = cfg.tolerance(0.05)?;
    const SCALING_TOL: f64 = 0.1;
    if params.duplications.is_empty() || params.duplications.contains(&0) {
        return Err(RunError::Config("duplications must be positive".into()));
    }
    let g = grid(cfg)?;
    let (_, p) = partition(cfg, &g, CoverSpec::SharpLattice { k: 8, offset: false })?;
    let mut a = Artifacts::default();
    let mut t = Table::new("degree", &["m", "lhs", "rhs", "degree", "energy", "lhs_m2", "rhs_m2"]);
    let base = degree_bound_check(&p, tol)?;
    let mut rows = Vec::new();
    for &m in &params.duplications {
        let d = if m == 1 { base.clone() } else { degree_bound_check(&p.duplicated(m), tol)? };
        let m2 = (m * m) as f64;
        a.check(Check::at_least(format!("m={m}: max ||{{f_i, f_j}}|| >= 1 / (2 d^2 e)"), d.lhs, d.rhs, tol));
        if m > 1 {
            a.check(Check::close(format!("m={m}: lhs * m^2 matches m=1"), d.lhs * m2, base.lhs, SCALING_TOL));
            a.check(Check::close(format!("m={m}: rhs * m^2 matches m=1"), d.rhs * m2, base.rhs, SCALING_TOL));
        }
        t.push(vec![m.to_string(), fmt(d.lhs), fmt(d.rhs), d.degree.to_string(), fmt(d.energy), fmt(d.lhs * m2), fmt(d.rhs * m2)]);
        rows.push(json!({ "m": m, "check": d }));
    }
    a.tables.push(t);
    a.results = json!({ "duplications": rows });
    a.plots.push(("sum_field".into(), heatmap(&sum_field(&p, &p)?)));
    Ok(a)
}

fn scaling(cfg: &Config) -> Run {
    let params: ScalingParams = cfg.params()?;
    const BAND: f64 = 2.0;
    let g = grid(cfg)?;
    if params.lattice_sizes.is_empty() {
        return Err(RunError::Config("lattice_sizes must not be empty".into()));
    }
    let mut a = Artifacts::default();
    let mut t =
        Table::new("scaling", &["eps", "pb_upper", "pb_upper_eps2", "essential", "essential_eps2", "max_area", "pb_lower_bound", "exact"]);
    let mut scaled = Vec::new();
    let mut rows = Vec::new();
    for &k in &params.lattice_sizes {
        let (c, p) = sharp_cover(k, &g, false)?;
        let r = bracket_report(&p, &p)?;
        let eps = 1.0 / k as f64;
        let ess = c.essential_indices().len();
        let up = r.pb_upper.value;
        let area = max_enclosing_area(&c);
        a.check(Check::close(format!("eps=1/{k}: |I_ess| eps^2 = 1"), ess as f64 * eps * eps, 1.0, 0.0));
        a.check(Check::at_least(format!("eps=1/{k}: pb_upper >= pb_lower_bound"), up, r.pb_lower.bound, 0.0));
        scaled.push(up * eps * eps);
        t.push(vec![
            fmt(eps),
            fmt(up),
            fmt(up * eps * eps),
            ess.to_string(),
            fmt(ess as f64 * eps * eps),
            fmt(area),
            fmt(r.pb_lower.bound),
            r.pb_upper.exact.to_string(),
        ]);
        rows.push(json!({ "k": k, "eps": eps, "summary": r.summary_json(), "essential": ess, "max_area": area }));
        if k == params.lattice_sizes[0] {
            a.plots.push(("sum_field".into(), heatmap(&r.sum_field)));
        }
    }
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    a.check(Check::at_most("max pb_upper eps^2 <= 2 min pb_upper eps^2", hi, BAND * lo, 0.0));
    a.tables.push(t);
    a.results = json!({ "rows": rows, "spread": hi / lo });
    Ok(a)
}

fn divisions(cfg: &Config) -> Run {
    let params: DivisionParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    let g = grid(cfg)?;
    if !g.is_torus() {
        return Err(RunError::Config("division-demo runs on the torus".into()));
    }
    if !(params.area_fraction > 0.0 && params.area_fraction < 0.5) || params.pairs == 0 {
        return Err(RunError::Config("area_fraction must lie in (0, 0.5) and pairs must be positive".into()));
    }
    let spec = cfg.cover.clone().unwrap_or(CoverSpec::DiscLattice { k: 4, radius: 0.19, jitter: 0.01, copies: 1 });
    let area_bound = params.area_fraction * g.total_area();
    let floor = (g.total_area() / (2.0 * area_bound)).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Artifacts::default();
    let mut t = Table::new("pairs", &["pair", "count", "attempts", "first_max_enclosing", "second_max_enclosing"]);
    let (mut failures, mut min_count, mut non_divisions) = (0usize, usize::MAX, 0usize);
    for s in 0..params.pairs {
        let (su, sv, sp) = (rng.gen::<u64>(), rng.gen::<u64>(), rng.gen::<u64>());
        let cu = disc_lattice(&g, &spec, None, su)?;
        let cv = disc_lattice(&g, &spec, None, sv)?;
        match sample_division_pair(&cu, &cv, sp) {
            Ok(p) => {
                let (c1, c2) = (is_a_division(&p.first, area_bound), is_a_division(&p.second, area_bound));
                non_divisions += (!c1.pass) as usize + (!c2.pass) as usize;
                min_count = min_count.min(p.count);
                t.push(vec![
                    s.to_string(),
                    p.count.to_string(),
                    p.attempts.to_string(),
                    fmt(c1.max_enclosing_area),
                    fmt(c2.max_enclosing_area),
                ]);
                if a.plots.is_empty() {
                    let mut canvas = SvgCanvas::for_grid(&g, PLOT_SIZE);
                    canvas.segments(p.first.segments(), "#0d47a1", 1.5).segments(p.second.segments(), "#b71c1c", 1.5);
                    a.plots.push(("division_pair".into(), canvas.finish()));
                }
            }
            Err(Error::GenericityFailure(_)) => {
                failures += 1;
                t.push(vec![s.to_string(), String::new(), String::new(), String::new(), String::new()]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    a.tables.push(t);
    let min_shown = if min_count == usize::MAX { 0.0 } else { min_count as f64 };
    a.check(Check::at_least("every crossing count >= area / 2A", min_shown, floor as f64, 0.0));
    a.check(Check::below("faces fit in discs of area A (violations)", non_divisions as f64, 0.0, 0.0));
    a.check(Check::below("genericity failure rate", failures as f64 / params.pairs as f64, params.max_failure_rate, 0.0));

    let mut st = Table::new("survival", &["l", "trials", "survived", "frequency", "bound", "sigma", "mismatches"]);
    let mut survival = Vec::new();
    for &l in &params.multiplicities {
        if l == 0 {
            return Err(RunError::Config("multiplicities must be positive".into()));
        }
        let c = disc_lattice(&g, &spec, Some(l), rng.gen())?;
        let s = survival_experiment(&c, l, Some(l), params.permutations, rng.gen())?;
        a.check(Check::below(format!("L={l}: |frequency - 1/(L+1)| <= 3 sigma"), (s.frequency - s.bound).abs(), 0.0, 3.0 * s.sigma));
        a.check(Check::below(format!("L={l}: survival follows the order rule (mismatches)"), s.mismatches as f64, 0.0, 0.0));
        st.push(vec![
            l.to_string(),
            s.trials.to_string(),
            s.survived.to_string(),
            fmt(s.frequency),
            fmt(s.bound),
            fmt(s.sigma),
            s.mismatches.to_string(),
        ]);
        survival.push(s);
    }
    a.tables.push(st);
    a.results = json!({
        "area_bound": area_bound,
        "count_floor": floor,
        "min_count": (min_count != usize::MAX).then_some(min_count),
        "genericity_failures": failures,
        "non_divisions": non_divisions,
        "survival": survival,
    });
    Ok(a)
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// `max_{x,y in {-1,1}^N} x^T G y` by enumerating every `x` and choosing `y` coordinatewise.
fn enumerate_bilinear(gram: &[f64], n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut row = vec![0.0; n];
    for mask in 0..1u32 << n {
        row.iter_mut().for_each(|r| *r = 0.0);
        for i in 0..n {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            for j in 0..n {
                row[j] += s * gram[i * n + j];
            }
        }
        best = best.max(row.iter().map(|v| v.abs()).sum());
    }
    best
}

fn linalg(cfg: &Config) -> Run {
    let params: LinalgParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    if params.max_vectors < 2 || params.max_vectors > 20 || params.half_dims.is_empty() || params.half_dims.contains(&0) {
        return Err(RunError::Config("need 2 <= max_vectors <= 20 and positive half_dims".into()));
    }
    let theta = PI / 30.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Artifacts::default();

    let mut gap: f64 = 0.0;
    for _ in 0..params.cube_instances {
        let n = params.half_dims[rng.gen_range(0..params.half_dims.len())];
        let vs = VectorSet::random_gaussian(n, rng.gen_range(1..=params.max_vectors), &mut rng);
        gap = gap.max((max_bilinear_cube(&vs).value - enumerate_bilinear(vs.gram(), vs.len())).abs());
    }
    a.check(Check::below("cube maximum against enumeration (max gap)", gap, 0.0, 1e-12));

    let mut t = Table::new("constants", &["n", "m", "proof_constant", "instances", "min_ratio", "chain_worst"]);
    let mut per_dim = Vec::new();
    for &n in &params.half_dims {
        let cc = match cone_cover(n, theta, &ConeCoverOptions::default()) {
            Ok(cc) => cc,
            Err(e @ Error::CoverageUncertified { .. }) => {
                a.check(Check { name: format!("n={n}: cone cover certified"), lhs: 0.0, rhs: 1.0, tolerance: 0.0, pass: false });
                per_dim.push(json!({ "n": n, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let c = proof_constant(n, theta)?;
        let mut min_ratio = f64::INFINITY;
        for _ in 0..params.instances {
            let vs = VectorSet::random_gaussian(n, rng.gen_range(2..=params.max_vectors), &mut rng);
            if let Some(r) = cube_ratio(&vs).ratio {
                min_ratio = min_ratio.min(r);
            }
        }
        a.check(Check::at_least(format!("n={n}: min cube ratio >= proof constant"), min_ratio, c, 0.0));

        // (sum over the best cone of ||S v||)^2 <= 9/sqrt(cos theta) * cube maximum after normalizing by S
        let mut worst: f64 = 0.0;
        for _ in 0..params.chain_instances {
            let count = rng.gen_range(2 * n..=params.max_vectors.max(2 * n));
            let vs = VectorSet::random_gaussian(n, count, &mut rng);
            let Ok(min) = minimize_over_sp(&vs, 60, rng.gen()) else { continue };
            let normal = vs.transformed(&min.s);
            let j = max_cone(&normal, &cc);
            let lhs = cone_norm_sum(&normal, &cc, j).powi(2);
            let rhs = chain_factor(theta) * max_bilinear_cube(&normal).value;
            worst = worst.max(lhs / rhs);
        }
        a.check(Check::below(format!("n={n}: (cone norm sum)^2 / (9 cube max / sqrt cos) <= 1"), worst, 1.0, 0.0));
        t.push(vec![n.to_string(), cc.m().to_string(), fmt(c), params.instances.to_string(), fmt(min_ratio), fmt(worst)]);
        per_dim.push(json!({ "n": n, "m": cc.m(), "proof_constant": c, "min_ratio": min_ratio, "chain_worst": worst }));
    }
    a.tables.push(t);

    let (mut defect, mut growth, mut cone): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..params.shear_vectors {
        let n = params.half_dims[k % params.half_dims.len()];
        let v = normalized(gaussian(&mut rng, 2 * n));
        let s = shear_map(&v);
        let u = gaussian(&mut rng, 2 * n);
        let w = gaussian(&mut rng, 2 * n);
        defect = defect.max(symplectic_defect(&s, &[(u.clone(), w)]));
        growth = growth.max(norm(&s.apply(&u)) - norm(&u) - 3.0 * omega0(&u, &v).abs());
        let mut perp = gaussian(&mut rng, 2 * n);
        let along: f64 = perp.iter().zip(&v).map(|(p, x)| p * x).sum();
        perp.iter_mut().zip(&v).for_each(|(p, x)| *p -= along * x);
        let perp = if norm(&perp) > 1e-9 { normalized(perp) } else { apply_j0(&v) };
        let angle = rng.gen_range(0.0..=theta);
        let u: Vec<f64> = v.iter().zip(&perp).map(|(x, p)| angle.cos() * x + angle.sin() * p).collect();
        cone = cone.max(norm(&s.apply(&u)) - 2.0 / 3.0 * norm(&u));
    }
    a.check(Check::below("shear map preserves omega0 (max defect)", defect, 0.0, 1e-10));
    a.check(Check::below("||Su|| - ||u|| - 3|omega0(u,v)| <= 0", growth, 0.0, 1e-12));
    a.check(Check::below("||Su|| - 2/3 ||u|| <= 0 inside the cone", cone, 0.0, 1e-12));
    a.results = json!({
        "theta": theta,
        "cube_gap": gap,
        "dimensions": per_dim,
        "shear": { "vectors": params.shear_vectors, "defect": defect, "growth_excess": growth, "cone_excess": cone },
    });
    Ok(a)
}

fn optimize(cfg: &Config) -> Run {
    let params: OptimizeParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    let tol = cfg.tolerance(0.05)?;
    let g = grid(cfg)?;
    let spec = cfg.cover.clone().unwrap_or(CoverSpec::SharpLattice { k: 4, offset: false });
    let margin = match cfg.partition.clone().unwrap_or(PartitionSpec::Bump { margin: 0.1 }) {
        PartitionSpec::Bump { margin } => margin,
        PartitionSpec::Sharp => return Err(RunError::Config("the optimizer starts from a bump partition".into())),
    };
    let cover = match spec {
        CoverSpec::SharpLattice { k, offset } => sharp_cover(k, &g, offset)?.0,
        CoverSpec::DiscLattice { .. } => disc_lattice(&g, &spec, None, seed)?.to_cover()?,
        CoverSpec::HeightBands { bands, overlap } => height_bands(&g, bands, overlap)?,
    };
    let options = OptimizeOptions { margin, step: params.step, probe: params.probe, modes: params.modes };
    let r = optimize_partition(&cover, params.objective, params.steps, seed, &options)?;
    let mut a = Artifacts::default();
    a.check(Check::at_most("optimized objective <= initial objective", r.best, r.initial, 0.0));
    let d = degree_bound_check(&r.partition, tol)?;
    a.check(Check::at_least("optimized: max ||{f_i, f_j}|| >= 1 / (2 d^2 e)", d.lhs, d.rhs, tol));
    let report = bracket_report(&r.partition, &r.partition)?;
    if report.bounds.ess_sup_bound > 0.0 {
        a.check(Check::at_least(
            "optimized: sup sum |{f_i, f_j}| >= 1 / min essential area",
            report.sup_sum,
            report.bounds.ess_sup_bound,
            tol,
        ));
    }
    let mut t = Table::new("trace", &["step", "best"]);
    for (s, v) in &r.trace {
        t.push(vec![s.to_string(), fmt(*v)]);
    }
    a.tables.push(t);
    a.results = json!({
        "objective": params.objective,
        "initial": r.initial,
        "best": r.best,
        "summary": report.summary_json(),
        "degree": d,
    });
    a.plots.push(("sum_field".into(), heatmap(&report.sum_field)));
    Ok(a)
}
