use super::{LinearOperator, Preconditioner, SolveError};

/// `steps` iterations of preconditioned Chebyshev acceleration targeting the
/// eigenvalue interval `[a, b]` of `precond * op`; `x` is updated in place.
pub fn chebyshev_smooth(
    op: &dyn LinearOperator,
    precond: &mut dyn Preconditioner,
    a: f64,
    b: f64,
    steps: usize,
    x: &mut [f64],
    rhs: &[f64],
) -> Result<(), SolveError> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(SolveError::InvalidInterval { a, b });
    }
    let n = rhs.len();
    let theta = 0.5 * (b + a);
    let delta = 0.5 * (b - a);
    let sigma = theta / delta;
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut rho_old = 1.0 / sigma;
    for k in 0..steps {
        op.apply(x, &mut r);
        r.iter_mut().zip(rhs).for_each(|(o, bi)| *o = bi - *o);
        precond.precondition(&r, &mut z);
        if k == 0 {
            d.iter_mut().zip(&z).for_each(|(o, zi)| *o = zi / theta);
        } else {
            let rho = 1.0 / (2.0 * sigma - rho_old);
            let (c1, c2) = (rho * rho_old, 2.0 * rho / delta);
            d.iter_mut().zip(&z).for_each(|(o, zi)| *o = c1 * *o + c2 * zi);
            rho_old = rho;
        }
        x.iter_mut().zip(&d).for_each(|(o, di)| *o += di);
    }
    Ok(())
}

/// `T_k(x)` for `|x| >= 1`, used for the min-max error bound `1 / T_k(sigma)`.
pub fn chebyshev_t(k: usize, x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}
