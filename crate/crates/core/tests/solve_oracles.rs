use std::sync::Arc;

use irkmg::discretization::Discretization;
use irkmg::fem::{BlockSystem, DirichletSpec, DofMap, SpaceKind, SparseMatrix};
use irkmg::irk::{tableau_lookup, Family, StageOperator};
use irkmg::mesh::build_crossed_grid;
use irkmg::solve::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j])
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Setup {
    mesh: irkmg::mesh::Mesh2D,
    velocity: DofMap,
    pressure: DofMap,
    spec: DirichletSpec,
    raw: BlockSystem,
}

fn setup(n: usize) -> Setup {
    let mesh = build_crossed_grid(n).unwrap();
    let velocity = DofMap::new(&mesh, SpaceKind::P2Vec);
    let pressure = DofMap::new(&mesh, SpaceKind::P1);
    let spec = DirichletSpec::whole_boundary(&mesh, &velocity);
    let raw = BlockSystem::assemble(&mesh, &velocity, &pressure, 1.0).unwrap();
    Setup { mesh, velocity, pressure, spec, raw }
}

fn eliminated_op(s: &Setup, family: Family, r: usize, dt: f64) -> StageOperator {
    let t = tableau_lookup(family, r).unwrap();
    StageOperator::new(Arc::new(s.raw.eliminated(s.spec.mask())), &t, dt).unwrap()
}

/// Patch index sets enumerated from the mesh alone.
fn oracle_patch_sets(s: &Setup, r: usize) -> Vec<Vec<usize>> {
    let nv = s.mesh.num_vertices();
    let nu = s.velocity.num_dofs();
    let ss = nu + s.pressure.num_dofs();
    (0..nv)
        .map(|v| {
            let mut nodes = vec![];
            for c in s.mesh.cells_of_vertex(v) {
                let cell = s.mesh.cells()[*c];
                nodes.extend(cell.iter().copied());
                nodes.extend(s.mesh.cell_edges()[*c].iter().map(|e| nv + e));
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

#[test]
fn patch_sizes_match_enumeration() {
    let s = setup(1);
    let t = tableau_lookup(Family::RadauIIA, 2).unwrap();
    let raw = StageOperator::new(Arc::new(s.raw.clone()), &t, 0.1).unwrap();
    let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &raw, 1.0).unwrap();
    assert_eq!(p.len(), s.mesh.num_vertices());
    // centre vertex of the single crossed quad: 5 vertices and 8 edges
    assert_eq!(p.patches()[4].len(), 2 * 2 * (5 + 8) + 2);

    let elim = eliminated_op(&s, Family::RadauIIA, 2, 0.1);
    let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &elim, 1.0).unwrap();
    // corner: closure holds the centre and three interior edges
    assert_eq!(p.patches()[0].len(), 2 * 2 * 4 + 2);
    assert_eq!(p.patches()[4].len(), 2 * 2 * 5 + 2);
}

#[test]
fn patch_coverage_and_pressure_content() {
    for n in [1, 2, 3, 4] {
        for r in [1, 2, 3] {
            let s = setup(n);
            let fam = match r {
                1 => Family::BackwardEuler,
                2 => Family::RadauIIA,
                _ => Family::Gauss,
            };
            let op = eliminated_op(&s, fam, r, 0.05);
            let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
            assert_eq!(p.len(), s.mesh.num_vertices());
            let mask = op.constrained_global();
            let cov = p.coverage();
            for g in 0..op.total_dim() {
                assert_eq!(cov[g] > 0, !mask[g], "n={n} r={r} dof {g}");
            }
            let (nu, ss) = (op.n_u(), op.stage_size());
            for (patch, set) in p.patches().iter().zip(oracle_patch_sets(&s, r)) {
                let pressures: Vec<usize> = patch.global.iter().filter(|&&g| g % ss >= nu).copied().collect();
                assert_eq!(pressures.len(), r);
                assert!(pressures.iter().all(|g| g % ss - nu == patch.vertex));
                let (mut a, mut b) = (patch.global.clone(), set);
                a.sort_unstable();
                b.sort_unstable();
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn vanka_matches_dense_schwarz_oracle() {
    let s = setup(1);
    let op = eliminated_op(&s, Family::BackwardEuler, 1, 0.1);
    let a = dense(&op.materialize().unwrap());
    let n = op.total_dim();
    for omega in [0.5, 1.0] {
        let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, omega).unwrap();
        let x0 = random_vec(n, 1);
        let b = random_vec(n, 2);
        let mut x = x0.clone();
        p.apply(&op, &mut x, &b);

        let r = DVector::from_column_slice(&b) - &a * DVector::from_column_slice(&x0);
        let mut corr = DVector::zeros(n);
        for set in oracle_patch_sets(&s, 1) {
            let m = set.len();
            let mut rmat = DMatrix::zeros(m, n);
            for (i, &g) in set.iter().enumerate() {
                rmat[(i, g)] = 1.0;
            }
            let ai = &rmat * &a * rmat.transpose();
            let local = ai.lu().solve(&(&rmat * &r)).unwrap();
            corr += rmat.transpose() * local;
        }
        let expect = DVector::from_column_slice(&x0) + corr * omega;
        let scale = expect.amax();
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() <= 1e-12 * scale, "omega {omega} dof {i}");
        }
    }
}

#[test]
fn vanka_fixed_point_and_single_patch() {
    let s = setup(2);
    let op = eliminated_op(&s, Family::RadauIIA, 2, 0.1);
    let n = op.total_dim();
    let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 0.5).unwrap();
    let xs = random_vec(n, 3);
    let mut b = vec![0.0; n];
    op.apply(&xs, &mut b);
    let mut x = xs.clone();
    p.apply(&op, &mut x, &b);
    for i in 0..n {
        assert!((x[i] - xs[i]).abs() <= 1e-13 * (1.0 + xs[i].abs()));
    }

    // one subdomain holding every DoF except one pinned pressure per stage
    let s1 = setup(1);
    let be = eliminated_op(&s1, Family::BackwardEuler, 1, 0.1);
    let mat = be.materialize().unwrap();
    let mask = be.constrained_global();
    let set: Vec<usize> = (0..be.total_dim()).filter(|&g| !mask[g] && g != be.n_u()).collect();
    let single = VankaPatchSet::from_index_sets(&mat, vec![set], 1.0).unwrap();
    let mut xe = random_vec(be.total_dim(), 5);
    for g in 0..be.total_dim() {
        if mask[g] || g == be.n_u() {
            xe[g] = 0.0;
        }
    }
    let b = mat.apply(&xe);
    let mut x = vec![0.0; xe.len()];
    single.apply(&be, &mut x, &b);
    for i in 0..x.len() {
        assert!((x[i] - xe[i]).abs() <= 1e-12);
    }
}

#[test]
fn vanka_order_independent() {
    let s = setup(3);
    let op = eliminated_op(&s, Family::Gauss, 2, 0.2);
    let p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
    let r = random_vec(op.total_dim(), 9);
    let mut z1 = vec![0.0; r.len()];
    let mut z2 = vec![0.0; r.len()];
    p.correction(&r, &mut z1);
    let mut order: Vec<usize> = (0..p.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    p.apply_ordered(&r, &mut z2, &order);
    let diff: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) <= 1e-12 * norm(&z1));
}

struct Diag(Vec<f64>);

impl LinearOperator for Diag {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            y[i] = self.0[i] * x[i];
        }
    }
}

#[test]
fn chebyshev_trivial_cases() {
    let a = Diag(vec![2.0, 3.0, 5.0, 8.0]);
    let b = vec![1.0, -1.0, 2.0, 0.5];
    let mut x = vec![0.3; 4];
    chebyshev_smooth(&a, &mut IdentityPreconditioner, 2.0, 8.0, 0, &mut x, &b).unwrap();
    assert_eq!(x, vec![0.3; 4]);
    chebyshev_smooth(&a, &mut IdentityPreconditioner, 2.0, 8.0, 1, &mut x, &b).unwrap();
    for i in 0..4 {
        let rich = 0.3 + 2.0 / 10.0 * (b[i] - a.0[i] * 0.3);
        assert!((x[i] - rich).abs() < 1e-15);
    }
    assert!(chebyshev_smooth(&a, &mut IdentityPreconditioner, 3.0, 2.0, 1, &mut x, &b).is_err());
    assert!(chebyshev_smooth(&a, &mut IdentityPreconditioner, 0.0, 2.0, 1, &mut x, &b).is_err());
}

#[test]
fn chebyshev_attains_minmax_bound() {
    let lams: Vec<f64> = (2..=8).map(|v| v as f64).collect();
    let a = Diag(lams.clone());
    let b = vec![0.0; 7];
    let k = 5;
    let mut x = vec![1.0; 7];
    chebyshev_smooth(&a, &mut IdentityPreconditioner, 2.0, 8.0, k, &mut x, &b).unwrap();
    let worst = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // scalar oracle: 1 / T_k(sigma) with sigma = (b + a) / (b - a)
    let sigma: f64 = 10.0 / 6.0;
    let bound = 1.0 / (sigma + (sigma * sigma - 1.0).sqrt()).powi(k as i32) * 2.0
        / (1.0 + (sigma - (sigma * sigma - 1.0).sqrt()).powi(2 * k as i32));
    assert!((bound - 1.0 / chebyshev_t(k, sigma)).abs() < 1e-14);
    assert!((worst - bound).abs() <= 0.1 * bound, "{worst} vs {bound}");
}

#[test]
fn fgmres_small_systems() {
    let id = SparseMatrix::identity(6);
    let b = random_vec(6, 11);
    let mut x = vec![0.0; 6];
    let st = fgmres(&id, &mut IdentityPreconditioner, &b, &mut x, &KrylovConfig::default(), None);
    assert!(st.converged);
    assert_eq!(st.iterations, 1);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut t = vec![];
    for i in 0..5 {
        for j in 0..5 {
            t.push((i, j, rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 }));
        }
    }
    let a = SparseMatrix::from_triplets(5, 5, t);
    let b = random_vec(5, 13);
    let mut x = vec![0.0; 5];
    let cfg = KrylovConfig { rtol: 1e-12, atol: 0.0, maxiter: 50, restart: 30 };
    let st = fgmres(&a, &mut IdentityPreconditioner, &b, &mut x, &cfg, None);
    assert!(st.converged && st.iterations <= 5, "{st:?}");
    let r: Vec<f64> = a.apply(&x).iter().zip(&b).map(|(ax, bi)| bi - ax).collect();
    assert!(norm(&r) <= 1e-12 * norm(&b));
}

#[test]
fn fgmres_with_varying_preconditioner() {
    let s = setup(1);
    let op = eliminated_op(&s, Family::RadauIIA, 2, 0.1);
    let n = op.total_dim();
    let mut p = VankaPatchSet::build(&s.mesh, &s.velocity, &s.pressure, &op, 1.0).unwrap();
    let ns = PressureNullspace::new(op.n_u(), op.n_p(), 2);
    let mut b = random_vec(n, 21);
    let mask = op.constrained_global();
    for g in 0..n {
        if mask[g] {
            b[g] = 0.0;
        }
    }
    ns.project(&mut b);
    let mut calls = 0usize;
    let mut varying = |r: &[f64], z: &mut [f64]| {
        p.set_omega(if calls % 2 == 0 { 0.5 } else { 1.0 });
        calls += 1;
        p.correction(r, z);
    };
    let mut x = vec![0.0; n];
    let cfg = KrylovConfig { rtol: 1e-10, atol: 0.0, maxiter: 200, restart: 50 };
    let st = fgmres(&op, &mut varying, &b, &mut x, &cfg, Some(&ns));
    assert!(st.converged, "{st:?}");
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut ax);
    let r: Vec<f64> = ax.iter().zip(&b).map(|(a, bi)| bi - a).collect();
    assert!((norm(&r) - st.residual_norm).abs() <= 1e-10 * norm(&b));
    assert!(st.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn interval_estimates() {
    let id = SparseMatrix::identity(20);
    let (a, b) = estimate_interval(&id, &mut IdentityPreconditioner, 8, 1, None).unwrap();
    assert!((a - 0.25).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
    let d = Diag((1..=10).map(|v| v as f64).collect());
    let oracle = DMatrix::from_diagonal(&DVector::from_iterator(10, d.0.iter().copied()))
        .symmetric_eigenvalues()
        .max();
    let (a, b) = estimate_interval(&d, &mut IdentityPreconditioner, 12, 2, None).unwrap();
    assert!((b - oracle).abs() <= 0.02 * oracle);
    assert!(a < b && a > 0.0);
    assert!(estimate_interval(&d, &mut IdentityPreconditioner, 4, 2, None).is_err());
}

#[test]
fn coarse_direct_solve() {
    let id = SparseMatrix::identity(5);
    let lu = BandedLu::factor(&id).unwrap();
    assert_eq!(lu.solve(&[1.0, 2.0, 3.0, 4.0, 5.0]), vec![1.0, 2.0, 3.0, 4.0, 5.0]);

    let s = setup(1);
    for (fam, r) in [(Family::BackwardEuler, 1), (Family::RadauIIA, 2), (Family::Gauss, 3)] {
        let op = eliminated_op(&s, fam, r, 0.1);
        let solver = CoarseSolver::new(&op).unwrap();
        let ns = PressureNullspace::new(op.n_u(), op.n_p(), r);
        for seed in [1, 2] {
            let mut b = random_vec(op.total_dim(), seed);
            ns.project(&mut b);
            let x = solver.solve(&b);
            let mut ax = vec![0.0; b.len()];
            op.apply(&x, &mut ax);
            let res: Vec<f64> = ax.iter().zip(&b).map(|(a, bi)| a - bi).collect();
            assert!(norm(&res) <= 1e-10 * norm(&b), "{fam} seed {seed}: {}", norm(&res) / norm(&b));
        }
    }
}

fn kron_prolongation(pu: &SparseMatrix, pp: &SparseMatrix, r: usize) -> SparseMatrix {
    let (fu, fp, cu, cp) = (pu.nrows(), pp.nrows(), pu.ncols(), pp.ncols());
    let mut t = vec![];
    for i in 0..r {
        for row in 0..fu {
            let (c, v) = pu.row(row);
            t.extend(c.iter().zip(v).map(|(&j, &x)| (i * (fu + fp) + row, i * (cu + cp) + j, x)));
        }
        for row in 0..fp {
            let (c, v) = pp.row(row);
            t.extend(c.iter().zip(v).map(|(&j, &x)| (i * (fu + fp) + fu + row, i * (cu + cp) + cu + j, x)));
        }
    }
    SparseMatrix::from_triplets(r * (fu + fp), r * (cu + cp), t)
}

#[test]
fn rediscretized_stage_operator_is_galerkin() {
    let d = Discretization::new(2, 1, 1.0).unwrap();
    for (fam, r) in [(Family::RadauIIA, 2), (Family::Gauss, 3)] {
        let t = tableau_lookup(fam, r).unwrap();
        let fine = StageOperator::new(d.level(1).raw.clone(), &t, 0.1).unwrap().materialize().unwrap();
        let coarse = StageOperator::new(d.level(0).raw.clone(), &t, 0.1).unwrap().materialize().unwrap();
        let (pu, pp) = d.level(1).prolongation.as_ref().unwrap();
        let p = kron_prolongation(pu, pp, r);
        let galerkin = p.transpose().matmul(&fine).matmul(&p);
        assert!(galerkin.max_abs_diff(&coarse) <= 1e-10, "{}", galerkin.max_abs_diff(&coarse));
    }
}

fn two_level(fam: Family, r: usize, dt: f64) -> (Discretization, MgHierarchy) {
    let d = Discretization::new(2, 1, 1.0).unwrap();
    let t = tableau_lookup(fam, r).unwrap();
    let ops = d.stage_operators(&t, dt).unwrap();
    let mg = d.multigrid(ops, SmootherSpec::stokes()).unwrap();
    (d, mg)
}

#[test]
fn transfer_duality() {
    let (_, mg) = two_level(Family::RadauIIA, 2, 0.1);
    let nc = mg.operator(0).total_dim();
    let nf = mg.operator(1).total_dim();
    for seed in 0..5 {
        let x = random_vec(nc, seed);
        let y = random_vec(nf, seed + 100);
        let px = mg.prolong(1, &x);
        let pty = mg.restrict(1, &y);
        let lhs: f64 = px.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&pty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }
}

#[test]
fn one_level_vcycle_is_direct_solve() {
    let d = Discretization::new(2, 0, 1.0).unwrap();
    let t = tableau_lookup(Family::RadauIIA, 2).unwrap();
    let ops = d.stage_operators(&t, 0.1).unwrap();
    let op = ops[0].clone();
    let mut mg = d.multigrid(ops, SmootherSpec::stokes()).unwrap();
    let direct = CoarseSolver::new(&op).unwrap();
    let mut b = random_vec(op.total_dim(), 31);
    PressureNullspace::new(op.n_u(), op.n_p(), 2).project(&mut b);
    let mut x = vec![0.0; b.len()];
    mg.vcycle(0, &mut x, &b).unwrap();
    assert_eq!(x, direct.solve(&b));
}

#[test]
fn two_level_vcycle_reduces_residual() {
    let (_, mut mg) = two_level(Family::RadauIIA, 2, 0.1);
    let op = mg.finest_operator().clone();
    let n = op.total_dim();
    let mask = op.constrained_global();
    let mut x = random_vec(n, 41);
    for g in 0..n {
        if mask[g] {
            x[g] = 0.0;
        }
    }
    PressureNullspace::new(op.n_u(), op.n_p(), 2).project(&mut x);
    let b = vec![0.0; n];
    let res = |x: &[f64]| {
        let mut y = vec![0.0; n];
        op.apply(x, &mut y);
        norm(&y)
    };
    let mut prev = res(&x);
    for _ in 0..3 {
        mg.vcycle(1, &mut x, &b).unwrap();
        let now = res(&x);
        assert!(now < prev, "{now} !< {prev}");
        prev = now;
    }
}

#[test]
fn two_level_fgmres_iteration_count() {
    let (_, mut mg) = two_level(Family::RadauIIA, 2, 0.1);
    let op = mg.finest_operator().clone();
    let ns = *mg.nullspace();
    let mut b = random_vec(op.total_dim(), 51);
    let mask = op.constrained_global();
    for g in 0..b.len() {
        if mask[g] {
            b[g] = 0.0;
        }
    }
    let mut x = vec![0.0; b.len()];
    let cfg = KrylovConfig { rtol: 1e-8, atol: 0.0, maxiter: 100, restart: 50 };
    let st = fgmres(&op, &mut mg, &b, &mut x, &cfg, Some(&ns));
    assert!(st.converged && st.iterations <= 25, "{st:?}");
}

#[test]
fn gmres_accelerated_smoother_converges() {
    let d = Discretization::new(2, 1, 1.0).unwrap();
    let t = tableau_lookup(Family::LobattoIIIC, 2).unwrap();
    let ops = d.stage_operators(&t, 0.1).unwrap();
    let spec = SmootherSpec { pre: 3, post: 3, accel: Acceleration::Gmres, omega: 1.0 };
    let mut mg = d.multigrid(ops, spec).unwrap();
    let op = mg.finest_operator().clone();
    let ns = *mg.nullspace();
    let mut b = random_vec(op.total_dim(), 61);
    let mask = op.constrained_global();
    for g in 0..b.len() {
        if mask[g] {
            b[g] = 0.0;
        }
    }
    let mut x = vec![0.0; b.len()];
    let cfg = KrylovConfig { rtol: 1e-8, atol: 0.0, maxiter: 100, restart: 50 };
    let st = fgmres(&op, &mut mg, &b, &mut x, &cfg, Some(&ns));
    assert!(st.converged, "{st:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn dense_lu_solves_random_systems(seed in 0u64..10_000, n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n * n).map(|k| rng.gen_range(-1.0..1.0) + if k % (n + 1) == 0 { n as f64 } else { 0.0 }).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect();
        let y = DenseLu::factor(n, a).unwrap().solve(&b);
        for i in 0..n {
            prop_assert!((y[i] - x[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn banded_lu_matches_dense(seed in 0u64..10_000, n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 0.5 + rng.gen_range(0.0..1.0)));
            for _ in 0..2 {
                t.push((i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.apply(&x);
        let dm = dense(&a);
        if let Some(lu_ok) = dm.clone().lu().solve(&DVector::from_column_slice(&b)) {
            if (dm.clone() * &lu_ok - DVector::from_column_slice(&b)).amax() < 1e-8 && dm.determinant().abs() > 1e-6 {
                let y = BandedLu::factor(&a).unwrap().solve(&b);
                for i in 0..n {
                    prop_assert!((y[i] - lu_ok[i]).abs() <= 1e-8 * (1.0 + lu_ok[i].abs()));
                }
            }
        }
    }
}
