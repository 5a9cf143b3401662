use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LinearOperator, PressureNullspace, Preconditioner, SolveError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub rtol: f64,
    pub atol: f64,
    pub maxiter: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-50, maxiter: 200, restart: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub initial_residual: f64,
    /// Recomputed `||b - A x||` at exit.
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub converged: bool,
    /// Initial residual followed by the residual estimate after every iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &dyn LinearOperator, x: &[f64], b: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    r.iter_mut().zip(b).for_each(|(o, bi)| *o = bi - *o);
}

/// Restarted flexible GMRES with right preconditioning. Stops once
/// `||b - A x|| <= max(rtol ||r_0||, atol)` or after `maxiter` iterations.
///
/// With a `nullspace`, the right-hand side, the initial guess and every
/// preconditioned direction are projected off the constant stage pressures.
pub fn fgmres(
    op: &dyn LinearOperator,
    precond: &mut dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    cfg: &KrylovConfig,
    nullspace: Option<&PressureNullspace>,
) -> KrylovStats {
    let n = b.len();
    let mut rhs = b.to_vec();
    if let Some(ns) = nullspace {
        ns.project(&mut rhs);
        ns.project(x);
    }
    let mut r = vec![0.0; n];
    residual(op, x, &rhs, &mut r);
    let r0 = norm(&r);
    let target = (cfg.rtol * r0).max(cfg.atol);
    let mut history = vec![r0];
    let mut beta = r0;
    let mut its = 0;
    let restart = cfg.restart.max(1);
    let finish = |its, res: f64, history| KrylovStats {
        iterations: its,
        initial_residual: r0,
        residual_norm: res,
        relative_residual: if r0 > 0.0 { res / r0 } else { 0.0 },
        converged: res <= target,
        history,
    };
    if beta <= target || its >= cfg.maxiter {
        return finish(its, beta, history);
    }
    loop {
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && its < cfg.maxiter {
            let mut zk = vec![0.0; n];
            precond.precondition(&v[k], &mut zk);
            if let Some(ns) = nullspace {
                ns.project(&mut zk);
            }
            let mut w = vec![0.0; n];
            op.apply(&zk, &mut w);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(o, x)| *o -= hik * x);
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            its += 1;
            k += 1;
            let est = g[k].abs();
            history.push(est);
            let breakdown = hk1 <= 1e-14 * den.max(f64::MIN_POSITIVE);
            if est <= target || breakdown {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk1).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        for (yj, zj) in y.iter().zip(&z) {
            x.iter_mut().zip(zj).for_each(|(o, v)| *o += yj * v);
        }
        residual(op, x, &rhs, &mut r);
        beta = norm(&r);
        if beta <= target || its >= cfg.maxiter || beta == 0.0 {
            return finish(its, beta, history);
        }
    }
}

/// Largest-magnitude Ritz value `lambda` of `precond * op` from an `m`-step
/// Arnoldi process on a seeded random probe; returns `[lambda / 4, lambda]`.
pub fn estimate_interval(
    op: &dyn LinearOperator,
    precond: &mut dyn Preconditioner,
    m: usize,
    seed: u64,
    nullspace: Option<&PressureNullspace>,
) -> Result<(f64, f64), SolveError> {
    if m < 5 {
        return Err(SolveError::InvalidParameter(format!("at least 5 Arnoldi steps needed, got {m}")));
    }
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if let Some(ns) = nullspace {
        ns.project(&mut v0);
    }
    let nv = norm(&v0);
    let mut basis = vec![v0.iter().map(|x| x / nv).collect::<Vec<f64>>()];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut size = m;
    let mut t = vec![0.0; n];
    for k in 0..m {
        op.apply(&basis[k], &mut t);
        let mut w = vec![0.0; n];
        precond.precondition(&t, &mut w);
        if let Some(ns) = nullspace {
            ns.project(&mut w);
        }
        let wn0 = norm(&w);
        for (i, vi) in basis.iter().enumerate() {
            let hik = dot(&w, vi);
            h[(i, k)] = hik;
            w.iter_mut().zip(vi).for_each(|(o, x)| *o -= hik * x);
        }
        let hk1 = norm(&w);
        h[(k + 1, k)] = hk1;
        if hk1 <= 1e-12 * wn0.max(f64::MIN_POSITIVE) {
            size = k + 1;
            break;
        }
        basis.push(w.iter().map(|x| x / hk1).collect());
    }
    let sq = h.view((0, 0), (size, size)).into_owned();
    let lambda = sq.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SolveError::Breakdown("Arnoldi produced no positive Ritz value".into()));
    }
    Ok((lambda / 4.0, lambda))
}
