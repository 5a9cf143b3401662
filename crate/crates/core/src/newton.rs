//! Inexact Newton iteration with Eisenstat-Walker forcing terms.

use crate::solve::KrylovStats;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once `||F|| <= max(atol, rtol ||F_0||)`.
    pub atol: f64,
    pub rtol: f64,
    pub max_iterations: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub eta0: f64,
    pub eta_max: f64,
    pub safeguard: bool,
    /// When set, every inner solve uses this forcing term.
    pub fixed_eta: Option<f64>,
}

pub const ETA_FLOOR: f64 = 1e-12;

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 0.0,
            max_iterations: 20,
            gamma: 0.9,
            alpha: 2.0,
            eta0: 0.5,
            eta_max: 0.9,
            safeguard: true,
            fixed_eta: None,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let eta_ok = |e: f64| (0.0..1.0).contains(&e);
        if !(self.atol > 0.0) || self.rtol < 0.0 {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if !eta_ok(self.eta0) || !eta_ok(self.eta_max) || !self.fixed_eta.map_or(true, eta_ok) {
            return Err(Error::Config("forcing terms must lie in [0, 1)".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::Config("Eisenstat-Walker needs gamma in (0, 1] and alpha in (1, 2]".into()));
        }
        Ok(())
    }
}

/// `eta_k = gamma (||F_k|| / ||F_{k-1}||)^alpha`, raised to `gamma eta_{k-1}^alpha`
/// when that exceeds 0.1, then clamped to `[ETA_FLOOR, eta_max]`.
pub fn ew_forcing(prev_eta: f64, norm_k: f64, norm_km1: f64, cfg: &NewtonConfig) -> f64 {
    let ratio = if norm_km1 > 0.0 { norm_k / norm_km1 } else { 0.0 };
    let mut eta = cfg.gamma * ratio.powf(cfg.alpha);
    let prev = cfg.gamma * prev_eta.powf(cfg.alpha);
    if cfg.safeguard && prev > 0.1 {
        eta = eta.max(prev);
    }
    eta.min(cfg.eta_max).max(ETA_FLOOR)
}

/// Previous step's stage vector as the first Newton iterate, or zero.
pub fn warm_start(previous: Option<&[f64]>, dim: usize) -> Vec<f64> {
    match previous {
        Some(k) if k.len() == dim => k.to_vec(),
        _ => vec![0.0; dim],
    }
}

/// A nonlinear system `F(k) = 0` with access to its Jacobian.
pub trait NewtonSystem {
    fn residual(&mut self, k: &[f64]) -> Result<Vec<f64>, Error>;

    /// Approximately solves `J(k) delta = -f` until the linear residual is
    /// at most `tol`, returning the step and the inner statistics.
    fn solve_linearized(&mut self, k: &[f64], f: &[f64], tol: f64) -> Result<(Vec<f64>, KrylovStats), Error>;

    /// `J(k) v` for the Jacobian most recently built by `solve_linearized`.
    fn apply_jacobian(&self, v: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// `||F||` at every iterate, starting with the initial guess.
    pub residual_norms: Vec<f64>,
    pub forcing: Vec<f64>,
    pub linear: Vec<KrylovStats>,
    /// `||F + J delta|| / ||F||` recomputed after each inner solve.
    pub certified_ratios: Vec<f64>,
    pub converged: bool,
}

impl NewtonStats {
    pub fn linear_iterations(&self) -> usize {
        self.linear.iter().map(|s| s.iterations).sum()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inexact Newton from `k`. Each inner solve must satisfy
/// `||F + J delta|| <= max(eta ||F||, atol / 10)`, which is re-checked
/// against an independent Jacobian application.
pub fn newton_solve(system: &mut dyn NewtonSystem, mut k: Vec<f64>, cfg: &NewtonConfig) -> Result<(Vec<f64>, NewtonStats), Error> {
    cfg.validate()?;
    let mut f = system.residual(&k)?;
    let mut fnorm = norm(&f);
    let target = cfg.atol.max(cfg.rtol * fnorm);
    let mut stats = NewtonStats {
        iterations: 0,
        residual_norms: vec![fnorm],
        forcing: vec![],
        linear: vec![],
        certified_ratios: vec![],
        converged: false,
    };
    let mut eta = cfg.fixed_eta.unwrap_or(cfg.eta0);
    let inner_floor = 0.1 * cfg.atol;
    while fnorm > target {
        if !fnorm.is_finite() {
            return Err(Error::Config("nonlinear residual is not finite".into()));
        }
        if stats.iterations == cfg.max_iterations {
            return Err(Error::SolverFailure {
                step: stats.iterations,
                reason: format!("Newton did not converge in {} iterations (|F| = {fnorm:.3e})", cfg.max_iterations),
            });
        }
        let tol = (eta * fnorm).max(inner_floor);
        let (delta, lin) = system.solve_linearized(&k, &f, tol)?;
        let mut jd = vec![0.0; delta.len()];
        system.apply_jacobian(&delta, &mut jd);
        jd.iter_mut().zip(&f).for_each(|(o, fi)| *o += fi);
        let ratio = norm(&jd) / fnorm;
        let allowed = tol / fnorm;
        if ratio > allowed * (1.0 + 1e-6) {
            return Err(Error::SolverFailure {
                step: stats.iterations,
                reason: format!("inner solve missed its forcing term: {ratio:.3e} > {allowed:.3e}"),
            });
        }
        stats.forcing.push(eta);
        stats.certified_ratios.push(ratio);
        stats.linear.push(lin);
        k.iter_mut().zip(&delta).for_each(|(o, d)| *o += d);
        let prev_norm = fnorm;
        f = system.residual(&k)?;
        fnorm = norm(&f);
        stats.residual_norms.push(fnorm);
        stats.iterations += 1;
        eta = match cfg.fixed_eta {
            Some(e) => e,
            None => ew_forcing(eta, fnorm, prev_norm, cfg),
        };
    }
    stats.converged = true;
    Ok((k, stats))
}
