//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are pinned below.

use std::sync::Arc;
use std::time::Instant;

use irkmg::fem::*;
use irkmg::harness::{rate, run, RunConfig, RunRow, TimestepRule};
use irkmg::irk::*;
use irkmg::mesh::{build_crossed_grid, build_hierarchy, Mesh2D};
use irkmg::problems::{exact_velocity, taylor_green_pressure, Problem};
use irkmg::solve::VankaPatchSet;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSISTENCY: f64 = 1e-14;
const FAR_DECAY: f64 = 1e-4;
const GAUSS_FAR: f64 = 0.99;
const ORDER_SLACK: f64 = 0.2;
const GALERKIN: f64 = 1e-10;
const JACOBIAN_FD: f64 = 1e-6;
const KRONECKER: f64 = 1e-13;
const VANKA: f64 = 1e-12;
const RADAU_RATE: (f64, f64) = (2.5, 3.5);
const LOBATTO_RATE: (f64, f64) = (1.7, 2.3);
const GAUSS_RATE: (f64, f64) = (2.1, 2.9);
const MAX_AVG_ITERS: f64 = 30.0;
const MAX_ITER_GROWTH: f64 = 1.8;
const SCALED_DECREASE: f64 = 4.0;
const STAGNATION: f64 = 2.0;
const DIRK_MARGIN: f64 = 2.0;
const NEWTON_AVG: f64 = 6.0;
const DIVERGENCE_FACTOR: f64 = 10.0;
const NS_RATE: f64 = 2.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j])
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn registry() -> Vec<ButcherTableau> {
    Family::all()
        .iter()
        .flat_map(|&f| f.supported_stages().iter().map(move |&r| tableau_lookup(f, r).unwrap()))
        .collect()
}

/// `u' = lam u` on `[0, 1]` through the dense stage equations.
fn dahlquist_error(t: &ButcherTableau, lam: f64, steps: usize) -> f64 {
    let r = t.stages();
    let dt = 1.0 / steps as f64;
    let m = DMatrix::from_fn(r, r, |i, j| if i == j { 1.0 } else { 0.0 } - dt * lam * t.a(i, j));
    let lu = m.lu();
    let mut u = 1.0;
    for _ in 0..steps {
        let k = lu.solve(&DVector::from_element(r, lam * u)).unwrap();
        u += dt * t.b.iter().zip(k.iter()).map(|(b, k)| b * k).sum::<f64>();
    }
    (u - lam.exp()).abs()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut bad = vec![];
    for t in registry() {
        let rep = consistency_check(&t);
        if (rep.sum_b - 1.0).abs() > CONSISTENCY || rep.row_sum_defects.iter().any(|d| d.abs() > CONSISTENCY) {
            bad.push(format!("{} consistency", t.name));
        }
        let far = stability_function(&t, Complex64::new(-1e6, 0.0)).unwrap().norm();
        let decays = match t.family {
            Family::Gauss => far >= GAUSS_FAR,
            _ => far <= FAR_DECAY,
        };
        if !decays {
            bad.push(format!("{} |r(-1e6)| = {far:.3e}", t.name));
        }
        let steps = [8usize, 16, 32];
        let y: Vec<f64> = steps.iter().map(|&n| dahlquist_error(&t, -2.0, n).log2()).collect();
        let slope = (y[0] - y[2]) / 2.0;
        if (slope - t.order as f64).abs() > ORDER_SLACK {
            bad.push(format!("{} observed order {slope:.2}", t.name));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 1.0 {
        bad.push(format!("runtime {secs:.2}s"));
    }
    outcome(bad.is_empty(), format!("{} schemes, {secs:.3}s {}", registry().len(), bad.join("; ")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut bad = vec![];
    let h = build_hierarchy(2, 1).unwrap();
    let (cm, fm) = (h.level(0), h.level(1));
    let spaces = |m: &Mesh2D| (DofMap::new(m, SpaceKind::P2Vec), DofMap::new(m, SpaceKind::P1));
    let ((cv, cq), (fv, fq)) = (spaces(cm), spaces(fm));
    let pv = prolongation(cm, &cv, fm, &fv, h.parentage(0)).unwrap();
    let pq = prolongation(cm, &cq, fm, &fq, h.parentage(0)).unwrap();
    let pvt = pv.transpose();
    let gm = pvt.matmul(&assemble_mass(fm, &fv).unwrap()).matmul(&pv).max_abs_diff(&assemble_mass(cm, &cv).unwrap());
    let gk = pvt
        .matmul(&assemble_stiffness(fm, &fv).unwrap())
        .matmul(&pv)
        .max_abs_diff(&assemble_stiffness(cm, &cv).unwrap());
    let gb = pvt
        .matmul(&assemble_divergence(fm, &fv, &fq).unwrap())
        .matmul(&pq)
        .max_abs_diff(&assemble_divergence(cm, &cv, &cq).unwrap());
    let galerkin = gm.max(gk).max(gb);
    if galerkin > GALERKIN {
        bad.push(format!("Galerkin {galerkin:.2e}"));
    }

    let n = fv.num_dofs();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plus: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - eps * b).collect();
        let (np, _) = assemble_convection(fm, &fv, &plus).unwrap();
        let (nm, _) = assemble_convection(fm, &fv, &minus).unwrap();
        let (_, j) = assemble_convection(fm, &fv, &u).unwrap();
        let jw = j.apply(&w);
        let diff: Vec<f64> = np.iter().zip(&nm).zip(&jw).map(|((a, b), c)| (a - b) / (2.0 * eps) - c).collect();
        worst = worst.max(norm(&diff) / norm(&jw));
    }
    if worst > JACOBIAN_FD {
        bad.push(format!("Jacobian FD {worst:.2e}"));
    }

    let mass = dense(&assemble_mass(fm, &fv).unwrap());
    let spd = (&mass - mass.transpose()).amax() < 1e-14 && mass.clone().cholesky().is_some();
    let k = dense(&assemble_stiffness(fm, &fv).unwrap());
    let eig = SymmetricEigen::new(k.clone()).eigenvalues;
    let scale = eig.amax();
    let negative = eig.iter().any(|&e| e < -1e-12 * scale);
    let null = eig.iter().filter(|e| e.abs() <= 1e-12 * scale).count();
    if !spd {
        bad.push("M not SPD".into());
    }
    if negative || null != 2 || (&k - k.transpose()).amax() > 1e-13 {
        bad.push(format!("K nullity {null}"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 10.0 {
        bad.push(format!("runtime {secs:.2}s"));
    }
    outcome(
        bad.is_empty(),
        format!("Galerkin {galerkin:.1e}, Jacobian FD {worst:.1e}, K nullity {null}, {secs:.2}s {}", bad.join("; ")),
    )
}

fn kronecker_oracle(bl: &BlockSystem, t: &ButcherTableau, dt: f64) -> DMatrix<f64> {
    let (nu, np) = (bl.n_u(), bl.n_p());
    let n = nu + np;
    let mut mass = DMatrix::zeros(n, n);
    mass.view_mut((0, 0), (nu, nu)).copy_from(&dense(&bl.m));
    let mut s = DMatrix::zeros(n, n);
    s.view_mut((0, 0), (nu, nu)).copy_from(&dense(&bl.k));
    s.view_mut((0, nu), (nu, np)).copy_from(&dense(&bl.b));
    s.view_mut((nu, 0), (np, nu)).copy_from(&dense(&bl.b).transpose());
    let r = t.stages();
    let a = DMatrix::from_fn(r, r, |i, j| t.a(i, j));
    DMatrix::<f64>::identity(r, r).kronecker(&mass) + a.kronecker(&s) * dt
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mesh = build_crossed_grid(1).unwrap();
    let v = DofMap::new(&mesh, SpaceKind::P2Vec);
    let q = DofMap::new(&mesh, SpaceKind::P1);
    let bl = Arc::new(BlockSystem::assemble(&mesh, &v, &q, 1.0).unwrap());
    let mut worst = 0.0f64;
    for (f, r) in [(Family::RadauIIA, 2), (Family::Gauss, 3)] {
        let t = tableau_lookup(f, r).unwrap();
        let op = StageOperator::new(bl.clone(), &t, 0.1).unwrap();
        let diff = (dense(&op.materialize().unwrap()) - kronecker_oracle(&bl, &t, 0.1)).abs().max();
        worst = worst.max(diff);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= KRONECKER && secs < 1.0, format!("max deviation {worst:.1e}, {secs:.3}s"))
}

struct Space {
    mesh: Mesh2D,
    velocity: DofMap,
    pressure: DofMap,
    spec: DirichletSpec,
    raw: BlockSystem,
}

fn space(n: usize) -> Space {
    let mesh = build_crossed_grid(n).unwrap();
    let velocity = DofMap::new(&mesh, SpaceKind::P2Vec);
    let pressure = DofMap::new(&mesh, SpaceKind::P1);
    let spec = DirichletSpec::whole_boundary(&mesh, &velocity);
    let raw = BlockSystem::assemble(&mesh, &velocity, &pressure, 1.0).unwrap();
    Space { mesh, velocity, pressure, spec, raw }
}

fn eliminated(s: &Space, family: Family, r: usize, dt: f64) -> StageOperator {
    let t = tableau_lookup(family, r).unwrap();
    StageOperator::new(Arc::new(s.raw.eliminated(s.spec.mask())), &t, dt).unwrap()
}

/// Patch index sets enumerated from cell incidences alone.
fn enumerated_patches(s: &Space, r: usize) -> Vec<Vec<usize>> {
    let nv = s.mesh.num_vertices();
    let nu = s.velocity.num_dofs();
    let ss = nu + s.pressure.num_dofs();
    (0..nv)
        .map(|v| {
            let mut nodes = vec![];
            for &c in s.mesh.cells_of_vertex(v) {
                nodes.extend(s.mesh.cells()[c].iter().copied());
                nodes.extend(s.mesh.cell_edges()[c].iter().map(|e| nv + e));
            }
            nodes.sort_unstable();
            nodes.dedup();
            let mut spatial: Vec<usize> =
                nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).filter(|&d| !s.spec.mask()[d]).collect();
            spatial.push(nu + v);
            (0..r).flat_map(|i| spatial.iter().map(move |d| i * ss + d).collect::<Vec<_>>()).collect()
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut bad = vec![];
    let s = space(1);
    let op = eliminated(&s, Family::BackwardEuler, 1, 0.1);
    let a = dense(&op.materialize().unwrap());
    let n = op.total_dim();
    let patches = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = x0.clone();
    patches.apply(&op, &mut x, &b);
    let res = DVector::from_column_slice(&b) - &a * DVector::from_column_slice(&x0);
    let mut expect = DVector::from_column_slice(&x0);
    for set in enumerated_patches(&s, 1) {
        let mut rmat = DMatrix::zeros(set.len(), n);
        for (i, &g) in set.iter().enumerate() {
            rmat[(i, g)] = 1.0;
        }
        let local = (&rmat * &a * rmat.transpose()).lu().solve(&(&rmat * &res)).unwrap();
        expect += rmat.transpose() * local;
    }
    let schwarz = (0..n).map(|i| (x[i] - expect[i]).abs()).fold(0.0, f64::max) / expect.amax();
    if schwarz > VANKA {
        bad.push(format!("Schwarz deviation {schwarz:.1e}"));
    }

    let mut meshes = 0;
    for m in [1, 2, 3, 4] {
        for (fam, r) in [(Family::BackwardEuler, 1), (Family::RadauIIA, 2), (Family::Gauss, 3)] {
            let s = space(m);
            let op = eliminated(&s, fam, r, 0.05);
            let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
            let mask = op.constrained_global();
            let cov = p.coverage();
            if (0..op.total_dim()).any(|g| (cov[g] > 0) == mask[g]) {
                bad.push(format!("coverage n={m} r={r}"));
            }
            meshes += 1;
        }
    }

    let s = space(3);
    let op = eliminated(&s, Family::Gauss, 2, 0.2);
    let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
    let r: Vec<f64> = (0..op.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (mut z1, mut z2) = (vec![0.0; r.len()], vec![0.0; r.len()]);
    p.correction(&r, &mut z1);
    let mut order: Vec<usize> = (0..p.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    p.apply_ordered(&r, &mut z2, &order);
    let diff: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
    let perm = norm(&diff) / norm(&z1);
    if perm > VANKA {
        bad.push(format!("order dependence {perm:.1e}"));
    }
    outcome(
        bad.is_empty(),
        format!("Schwarz {schwarz:.1e}, coverage on {meshes} mesh/stage pairs, permutation {perm:.1e} {}", bad.join("; ")),
    )
}

fn stokes(family: Family, stages: usize, level: usize, timestep: TimestepRule) -> RunRow {
    let cfg = RunConfig { family, stages, level, timestep, ..RunConfig::default() };
    let row = run(&cfg).unwrap_or_else(|e| panic!("{family}({stages}) level {level}: {e}"));
    println!(
        "    run {}({}) level {} dt {:.4e}: vel {:.4e} pres {:.4e} lin/step {:.2} div/tol {:.2} [{:.0}s]",
        row.scheme, row.stages, row.level, row.dt, row.vel_error, row.pres_error, row.avg_linear_iters,
        row.max_divergence_ratio, row.wall_seconds
    );
    row
}

fn rates(rows: &[RunRow]) -> Vec<f64> {
    rows.windows(2).map(|w| rate(w[0].vel_error, w[1].vel_error).unwrap_or(f64::NAN)).collect()
}

fn in_band(v: &[f64], band: (f64, f64)) -> bool {
    v.iter().all(|r| *r >= band.0 && *r <= band.1)
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
}

fn criterion_5(studies: &[(&str, Vec<RunRow>)]) -> Outcome {
    let mut bad = vec![];
    let mut detail = vec![];
    for (name, rows) in studies {
        let r = rates(rows);
        let band = match *name {
            "RadauIIA(2)" => RADAU_RATE,
            "LobattoIIIC(2)" => LOBATTO_RATE,
            _ => GAUSS_RATE,
        };
        if !in_band(&r, band) {
            bad.push(format!("{name} rates outside [{}, {}]", band.0, band.1));
        }
        if *name != "Gauss(2)" && !rows.windows(2).all(|w| w[1].pres_error < w[0].pres_error) {
            bad.push(format!("{name} pressure not decreasing"));
        }
        detail.push(format!("{name} u-rates [{}]", fmt(&r)));
    }
    outcome(bad.is_empty(), format!("{} {}", detail.join("; "), bad.join("; ")))
}

fn criterion_6(studies: &[(&str, Vec<RunRow>)]) -> Outcome {
    let mut bad = vec![];
    let mut detail = vec![];
    for (name, rows) in studies {
        let iters: Vec<f64> = rows.iter().map(|r| r.avg_linear_iters).collect();
        if iters.iter().any(|&i| i > MAX_AVG_ITERS) {
            bad.push(format!("{name} average above {MAX_AVG_ITERS}"));
        }
        let growth: Vec<f64> = iters.windows(2).map(|w| w[1] / w[0]).collect();
        if growth.iter().any(|&g| g > MAX_ITER_GROWTH) {
            bad.push(format!("{name} growth above {MAX_ITER_GROWTH}"));
        }
        detail.push(format!("{name} iters [{}]", fmt(&iters)));
    }
    outcome(bad.is_empty(), format!("{} {}", detail.join("; "), bad.join("; ")))
}

fn criterion_7(scaled: &[RunRow], fixed: &[RunRow]) -> Outcome {
    let decrease: Vec<f64> = scaled.windows(2).map(|w| w[0].vel_error / w[1].vel_error).collect();
    let n = fixed.len();
    let stagnation = fixed[n - 1].vel_error / fixed[n - 2].vel_error;
    let pass = decrease.iter().all(|&d| d >= SCALED_DECREASE) && stagnation <= STAGNATION && stagnation >= 1.0 / STAGNATION;
    outcome(
        pass,
        format!(
            "scaled decrease factors [{}], fixed dt {:.4e} errors {:.4e} -> {:.4e} (ratio {stagnation:.3})",
            fmt(&decrease),
            fixed[n - 1].dt,
            fixed[n - 2].vel_error,
            fixed[n - 1].vel_error
        ),
    )
}

fn criterion_8(radau: &RunRow, dirk: &RunRow) -> Outcome {
    let margin = dirk.vel_error / radau.vel_error;
    outcome(
        margin >= DIRK_MARGIN,
        format!("level 2: RadauIIA(2) {:.4e}, DIRK-PareschiRusso(2) {:.4e}, margin {margin:.1}", radau.vel_error, dirk.vel_error),
    )
}

/// Central differences of the closed forms at random points.
fn taylor_green_identity() -> f64 {
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let vel = |t: f64, x: f64, y: f64| {
        let mut o = [0.0; 2];
        exact_velocity(t, [x, y], &mut o);
        o
    };
    for _ in 0..50 {
        let (t, x, y) = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let u = vel(t, x, y);
        let scale = (-2.0 * std::f64::consts::PI.powi(2) * t).exp();
        for c in 0..2 {
            let ut = (vel(t + h, x, y)[c] - vel(t - h, x, y)[c]) / (2.0 * h);
            let ux = (vel(t, x + h, y)[c] - vel(t, x - h, y)[c]) / (2.0 * h);
            let uy = (vel(t, x, y + h)[c] - vel(t, x, y - h)[c]) / (2.0 * h);
            let lap = (vel(t, x + h, y)[c] + vel(t, x - h, y)[c] + vel(t, x, y + h)[c] + vel(t, x, y - h)[c]
                - 4.0 * u[c])
                / (h * h);
            let (px, py) = if c == 0 { (h, 0.0) } else { (0.0, h) };
            let dp = (taylor_green_pressure(t, [x + px, y + py]) - taylor_green_pressure(t, [x - px, y - py])) / (2.0 * h);
            worst = worst.max((ut + u[0] * ux + u[1] * uy - lap + dp).abs() / scale);
        }
    }
    worst
}

fn criterion_9(rows: &[RunRow]) -> Outcome {
    let identity = taylor_green_identity();
    let r = rate(rows[0].vel_error, rows[1].vel_error).unwrap_or(f64::NAN);
    let newton = rows[1].avg_newton_iters;
    let div = rows.iter().map(|r| r.max_divergence_ratio).fold(0.0, f64::max);
    let pass = identity < 1e-4 && newton <= NEWTON_AVG && div <= DIVERGENCE_FACTOR && r >= NS_RATE;
    outcome(
        pass,
        format!(
            "identity residual {identity:.1e}, Newton/step at level 2 {newton:.2}, max divergence/tol {div:.2}, u-rate 1->2 {r:.2}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let (a, b) = (count_dofs(8, 5).per_stage, count_dofs(8, 7).per_stage);
    outcome(a == 1_182_211 && b == 18_884_611, format!("level 5: {a}, level 7: {b}"))
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, Outcome)> = vec![];
    let mut report = |k: usize, o: Outcome| {
        println!("criterion {k:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail.trim_end());
        results.push((k, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(10, criterion_10());

    let study = |family, stages| (1..=3).map(|l| stokes(family, stages, l, TimestepRule::Scaled)).collect::<Vec<_>>();
    let studies = vec![
        ("RadauIIA(2)", study(Family::RadauIIA, 2)),
        ("LobattoIIIC(2)", study(Family::LobattoIIIC, 2)),
        ("Gauss(2)", study(Family::Gauss, 2)),
    ];
    report(5, criterion_5(&studies));
    report(6, criterion_6(&studies));

    let dt = 0.5 / 16.0;
    let fixed: Vec<RunRow> = (2..=3).map(|l| stokes(Family::RadauIIA, 2, l, TimestepRule::Fixed(dt))).collect();
    report(7, criterion_7(&studies[0].1, &fixed));

    let dirk = stokes(Family::PareschiRusso, 2, 2, TimestepRule::Scaled);
    report(8, criterion_8(&studies[0].1[1], &dirk));

    let ns: Vec<RunRow> = (1..=2)
        .map(|level| {
            let cfg = RunConfig { problem: Problem::NsTaylorGreen, level, ..RunConfig::default() };
            let row = run(&cfg).unwrap_or_else(|e| panic!("Taylor-Green level {level}: {e}"));
            println!(
                "    run taylor-green radauiia(2) level {level}: vel {:.4e} newton/step {:.2} lin/step {:.2} [{:.0}s]",
                row.vel_error, row.avg_newton_iters, row.avg_linear_iters, row.wall_seconds
            );
            row
        })
        .collect();
    report(9, criterion_9(&ns));

    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
