//! Normal extremals by fixed-step RK4 integration of Hamilton's equations,
//! the exponential map, and conservation diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::chart::Chart;
use crate::expr::EvalError;
use crate::float;
use crate::operators::{CotangentPoint, Hamiltonian};
use crate::srgeom::SRStructure;

/// A discretized normal extremal in phase space.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CotangentPoint>,
    /// Initial Hamiltonian value.
    pub h0: f64,
    /// `max_t |H(t) - H0|` over the stored nodes.
    pub h_drift: f64,
    /// True when the trajectory left the declared chart box and was cut.
    pub truncated: bool,
}

impl GeodesicTrajectory {
    pub fn endpoint(&self) -> &CotangentPoint {
        self.states.last().expect("trajectory has at least one node")
    }

    /// Base-point speed `sqrt(2 H)` at a node.
    pub fn speed_at(&self, h: &Hamiltonian, i: usize) -> Result<f64, EvalError> {
        Ok(float::sqrt(2.0 * h.value(&self.states[i])?))
    }
}

/// One classical RK4 step of `y' = f(y)`.
fn rk4_step(
    h: &Hamiltonian,
    state: &[f64],
    dt: f64,
    scratch: &mut [f64],
    k: &mut [Vec<f64>; 4],
    out: &mut [f64],
) -> Result<(), EvalError> {
    let n = state.len();
    h.rhs(state, &mut k[0])?;
    for i in 0..n {
        scratch[i] = state[i] + 0.5 * dt * k[0][i];
    }
    h.rhs(scratch, &mut k[1])?;
    for i in 0..n {
        scratch[i] = state[i] + 0.5 * dt * k[1][i];
    }
    h.rhs(scratch, &mut k[2])?;
    for i in 0..n {
        scratch[i] = state[i] + dt * k[2][i];
    }
    h.rhs(scratch, &mut k[3])?;
    for i in 0..n {
        out[i] = state[i]
            + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(())
}

/// Integrate the normal extremal from `start` over `[0, t_final]` with a
/// fixed step. Trajectories leaving the declared chart box are truncated
/// and flagged.
pub fn integrate(
    s: &SRStructure,
    h: &Hamiltonian,
    start: &CotangentPoint,
    t_final: f64,
    steps: usize,
) -> Result<GeodesicTrajectory, EvalError> {
    assert!(t_final > 0.0 && steps >= 1, "need t_final > 0 and steps >= 1");
    integrate_impl(s.chart(), h, start, t_final, steps)
}

fn integrate_impl(
    chart: &Chart,
    h: &Hamiltonian,
    start: &CotangentPoint,
    t_final: f64,
    steps: usize,
) -> Result<GeodesicTrajectory, EvalError> {
    let dim2 = 2 * h.dim();
    let dt = t_final / steps as f64;
    let mut state = start.to_state();
    let mut scratch = vec![0.0; dim2];
    let mut k = [
        vec![0.0; dim2],
        vec![0.0; dim2],
        vec![0.0; dim2],
        vec![0.0; dim2],
    ];
    let mut next = vec![0.0; dim2];

    let h0 = h.value(start)?;
    let mut h_drift = 0.0f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(start.clone());
    let mut truncated = false;

    for step in 1..=steps {
        rk4_step(h, &state, dt, &mut scratch, &mut k, &mut next)?;
        let lam = CotangentPoint::from_state(&next);
        if !chart.contains(&lam.base) {
            truncated = true;
            break;
        }
        state.copy_from_slice(&next);
        let hv = h.value(&lam)?;
        h_drift = h_drift.max(float::abs(hv - h0));
        times.push(step as f64 * dt);
        states.push(lam);
    }

    Ok(GeodesicTrajectory {
        times,
        states,
        h0,
        h_drift,
        truncated,
    })
}

/// Advance a phase-space state in place by total time `dt_total` using
/// `steps` RK4 steps, without storing the trajectory.
pub fn advance(h: &Hamiltonian, state: &mut [f64], dt_total: f64, steps: usize) -> Result<(), EvalError> {
    if dt_total == 0.0 {
        return Ok(());
    }
    let dim2 = state.len();
    let dt = dt_total / steps.max(1) as f64;
    let mut scratch = vec![0.0; dim2];
    let mut k = [
        vec![0.0; dim2],
        vec![0.0; dim2],
        vec![0.0; dim2],
        vec![0.0; dim2],
    ];
    let mut next = vec![0.0; dim2];
    for _ in 0..steps.max(1) {
        rk4_step(h, state, dt, &mut scratch, &mut k, &mut next)?;
        state.copy_from_slice(&next);
    }
    Ok(())
}

/// Exponential map: final base point of the normal extremal with initial
/// covector `lam` integrated to time `t`.
pub fn exp_map(
    s: &SRStructure,
    h: &Hamiltonian,
    q: &[f64],
    lam: &[f64],
    t: f64,
    steps: usize,
) -> Result<Vec<f64>, EvalError> {
    let start = CotangentPoint::new(q.to_vec(), lam.to_vec());
    let traj = integrate(s, h, &start, t, steps)?;
    Ok(traj.endpoint().base.clone())
}

/// Arclength of the projected curve by the trapezoid rule on node speeds.
pub fn arclength(h: &Hamiltonian, traj: &GeodesicTrajectory) -> Result<f64, EvalError> {
    let mut acc = 0.0;
    for i in 1..traj.states.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        let v0 = traj.speed_at(h, i - 1)?;
        let v1 = traj.speed_at(h, i)?;
        acc += 0.5 * (v0 + v1) * dt;
    }
    Ok(acc)
}
