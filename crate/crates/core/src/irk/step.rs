use super::{ButcherTableau, IrkError};

/// Solution at `t^n` together with the step size used to leave it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub t: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub dt: f64,
}

impl StepState {
    pub fn new(t: f64, u: Vec<f64>, p: Vec<f64>, dt: f64) -> Result<Self, IrkError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(IrkError::InvalidParameter(format!("time step {dt}")));
        }
        Ok(Self { t, u, p, dt })
    }
}

/// `u^{n+1} = u^n + dt sum_j b_j k_j^u` (likewise for `p`), followed by
/// removal of the pressure mean under `pressure_weights` when given.
pub fn advance_step(
    state: &StepState,
    tableau: &ButcherTableau,
    stages: &[f64],
    pressure_weights: Option<&[f64]>,
) -> Result<StepState, IrkError> {
    let (nu, np, r) = (state.u.len(), state.p.len(), tableau.stages());
    let ss = nu + np;
    if stages.len() != r * ss {
        return Err(IrkError::Dimension(format!("stage vector has {} entries, expected {}", stages.len(), r * ss)));
    }
    let mut u = state.u.clone();
    let mut p = state.p.clone();
    for (j, &bj) in tableau.b.iter().enumerate() {
        let w = state.dt * bj;
        let kj = &stages[j * ss..(j + 1) * ss];
        u.iter_mut().zip(&kj[..nu]).for_each(|(o, v)| *o += w * v);
        p.iter_mut().zip(&kj[nu..]).for_each(|(o, v)| *o += w * v);
    }
    if let Some(wts) = pressure_weights {
        if wts.len() != np {
            return Err(IrkError::Dimension("pressure weights".into()));
        }
        let area: f64 = wts.iter().sum();
        if np > 0 && area > 0.0 {
            let mean = wts.iter().zip(&p).map(|(w, v)| w * v).sum::<f64>() / area;
            p.iter_mut().for_each(|v| *v -= mean);
        }
    }
    Ok(StepState { t: state.t + state.dt, u, p, dt: state.dt })
}
