//! Distance from the singular hypersurface via the annihilator-bundle
//! exponential, Fermi coordinates, theta-factor extraction and injectivity
//! diagnostics.
//!
//! Unit-Hamiltonian covectors normal to `Z` are integrated into the chosen
//! side; the distance of a point is found by two-phase shooting (coarse grid
//! over the `Z`-chart, then Nelder–Mead over chart parameters and time).
//! On the Fermi grid `F(t, u) = exp(q(u), t·λ(u))`, the measure factor is
//! extracted from `e^{2θ} = (ρ∘F)·|det DF|`, with Lebesgue reference measure
//! on the `Z`-chart parameters; only `t`-derivatives of θ are ever consumed
//! downstream, so the per-column additive constant is irrelevant.

use alloc::vec;
use alloc::vec::Vec;

use crate::chart::Side;
use crate::expr::EvalError;
use crate::float;
use crate::geodesics::{integrate, GeodesicTrajectory};
use crate::linalg::{det, Mat};
use crate::operators::{CotangentPoint, Hamiltonian};
use crate::optim::nelder_mead;
use crate::srgeom::{GeomError, Hypersurface, SRStructure};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("characteristic point: the annihilator covector has zero Hamiltonian (2H = {two_h:.3e}); hypothesis (H1) fails here")]
    CharacteristicPoint { two_h: f64 },
    #[error("point is not on the hypersurface (|psi| = {psi_abs:.3e})")]
    NotOnSurface { psi_abs: f64 },
    #[error("Newton solve for the surface chart did not converge (residual {residual:.3e})")]
    NewtonFailed { residual: f64 },
    #[error("outside certified tube: best residual {residual:.3e} exceeds the shooting tolerance; delta <= {upper_bound:.6e}")]
    OutsideTube { upper_bound: f64, residual: f64 },
    #[error("measure density unavailable on the Fermi grid")]
    DensityUnavailable,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Covector of the annihilator bundle `A_q Z`, normalized to `2H = 1` and
/// oriented into a side.
#[derive(Debug, Clone)]
pub struct NormalCovector {
    pub base: Vec<f64>,
    pub lam: Vec<f64>,
    pub side: Side,
}

/// `lam = ±c·dψ(q)` with `c` fixed by `2H(lam) = 1`; the sign points the
/// initial velocity into the requested side. Errors exactly when `q` is a
/// characteristic point.
pub fn annihilator_covector(
    s: &SRStructure,
    h: &Hamiltonian,
    z: &Hypersurface,
    q: &[f64],
    side: Side,
    tol: f64,
) -> Result<NormalCovector, DistanceError> {
    assert_eq!(q.len(), s.dim(), "point dimension mismatch");
    let psi = z.psi_at(q).map_err(GeomError::from)?;
    if float::abs(psi) > tol {
        return Err(DistanceError::NotOnSurface {
            psi_abs: float::abs(psi),
        });
    }
    let dpsi = z.dpsi_at(q).map_err(GeomError::from)?;
    let lam0 = CotangentPoint::new(q.to_vec(), dpsi.clone());
    let two_h = 2.0 * h.value(&lam0).map_err(GeomError::from)?;
    if two_h <= tol * tol {
        return Err(DistanceError::CharacteristicPoint { two_h });
    }
    let c = side.sign() / float::sqrt(two_h);
    Ok(NormalCovector {
        base: q.to_vec(),
        lam: dpsi.iter().map(|d| c * d).collect(),
        side,
    })
}

/// Chart of the hypersurface: a coordinate slab where `psi = 0` is solvable
/// for one distinguished variable by 1D Newton.
#[derive(Debug, Clone)]
pub struct ZChart {
    surface: Hypersurface,
    solve_var: usize,
    param_vars: Vec<usize>,
    param_box: Vec<[f64; 2]>,
    solve_init: f64,
}

impl ZChart {
    pub fn new(
        surface: Hypersurface,
        dim: usize,
        solve_var: usize,
        param_box: Vec<[f64; 2]>,
        solve_init: f64,
    ) -> Self {
        let param_vars: Vec<usize> = (0..dim).filter(|j| *j != solve_var).collect();
        assert_eq!(param_box.len(), param_vars.len(), "one box per parameter");
        ZChart {
            surface,
            solve_var,
            param_vars,
            param_box,
            solve_init,
        }
    }

    pub fn surface(&self) -> &Hypersurface {
        &self.surface
    }

    pub fn params(&self) -> usize {
        self.param_vars.len()
    }

    pub fn param_box(&self) -> &[[f64; 2]] {
        &self.param_box
    }

    pub fn in_slab(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(&self.param_box)
            .all(|(x, [lo, hi])| *x >= *lo && *x <= *hi)
    }

    /// The surface point with chart parameters `u`.
    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>, DistanceError> {
        assert_eq!(u.len(), self.param_vars.len());
        let dim = self.param_vars.len() + 1;
        let mut p = vec![0.0; dim];
        for (value, var) in u.iter().zip(&self.param_vars) {
            p[*var] = *value;
        }
        p[self.solve_var] = self.solve_init;
        let mut residual = f64::INFINITY;
        for _ in 0..50 {
            let psi = self.surface.psi_at(&p).map_err(GeomError::from)?;
            residual = float::abs(psi);
            if residual <= 1e-13 {
                return Ok(p);
            }
            let dpsi = self.surface.dpsi_at(&p).map_err(GeomError::from)?;
            let slope = dpsi[self.solve_var];
            if slope == 0.0 {
                break;
            }
            p[self.solve_var] -= psi / slope;
        }
        if residual <= 1e-10 {
            Ok(p)
        } else {
            Err(DistanceError::NewtonFailed { residual })
        }
    }
}

/// Budget of the two-phase shooting search.
#[derive(Debug, Clone)]
pub struct ShootingBudget {
    /// Coarse grid points per `Z`-chart parameter axis.
    pub per_axis: usize,
    /// Sample nodes along each coarse trajectory.
    pub t_nodes: usize,
    /// Horizon of the search in distance units.
    pub t_max: f64,
    /// RK4 steps per unit time.
    pub steps_per_unit: usize,
    pub nm_max_iter: usize,
    /// Residual below which the shot is accepted, in chart coordinates.
    pub tol_shoot: f64,
    /// |psi| below which a point counts as lying on `Z`.
    pub on_z_tol: f64,
}

impl Default for ShootingBudget {
    fn default() -> Self {
        ShootingBudget {
            per_axis: 8,
            t_nodes: 128,
            t_max: 1.0,
            steps_per_unit: 256,
            nm_max_iter: 250,
            tol_shoot: 1e-6,
            on_z_tol: 1e-12,
        }
    }
}

/// Outcome of a certified distance computation.
#[derive(Debug, Clone)]
pub struct DeltaResult {
    pub delta: f64,
    pub foot: Vec<f64>,
    pub covector: NormalCovector,
    /// Final shot residual `|E(q, t·λ) - p|` in chart coordinates.
    pub residual: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Tensor product of per-axis grids, odometer order.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn shoot(
    s: &SRStructure,
    h: &Hamiltonian,
    zc: &ZChart,
    side: Side,
    u: &[f64],
    t: f64,
    budget: &ShootingBudget,
    on_z_tol: f64,
) -> Result<Vec<f64>, DistanceError> {
    let q = zc.point(u)?;
    let nc = annihilator_covector(s, h, zc.surface(), &q, side, on_z_tol)?;
    let steps = ((t * budget.steps_per_unit as f64) as usize).max(8);
    let start = CotangentPoint::new(q, nc.lam);
    let traj = integrate(s, h, &start, t, steps).map_err(GeomError::from)?;
    Ok(traj.endpoint().base.clone())
}

/// Distance from `Z`: coarse shooting grid over the surface chart, then
/// derivative-free refinement over `(u, t)`. The returned `delta` is the
/// refined time parameter, which equals the distance by the unit-Hamiltonian
/// normalization once the residual is below `tol_shoot`.
pub fn delta(
    s: &SRStructure,
    h: &Hamiltonian,
    zc: &ZChart,
    p: &[f64],
    budget: &ShootingBudget,
) -> Result<DeltaResult, DistanceError> {
    let psi_p = zc.surface().psi_at(p).map_err(GeomError::from)?;
    let side = if psi_p >= 0.0 { Side::Pos } else { Side::Neg };
    if float::abs(psi_p) <= budget.on_z_tol {
        let nc = annihilator_covector(s, h, zc.surface(), p, side, budget.on_z_tol.max(1e-9))?;
        return Ok(DeltaResult {
            delta: 0.0,
            foot: p.to_vec(),
            covector: nc,
            residual: 0.0,
        });
    }

    // Phase 1: coarse grid of unit-speed normal trajectories.
    let axes: Vec<Vec<f64>> = zc
        .param_box()
        .iter()
        .map(|[lo, hi]| linspace(*lo, *hi, budget.per_axis))
        .collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (dist2, u, t)
    for u in tensor_grid(&axes) {
        let q = match zc.point(&u) {
            Ok(q) => q,
            Err(DistanceError::NewtonFailed { .. }) => continue,
            Err(e) => return Err(e),
        };
        let nc = annihilator_covector(s, h, zc.surface(), &q, side, 1e-9)?;
        let steps = (budget.t_max * budget.steps_per_unit as f64) as usize;
        let start = CotangentPoint::new(q.clone(), nc.lam);
        let traj: GeodesicTrajectory =
            integrate(s, h, &start, budget.t_max, steps.max(budget.t_nodes)).map_err(GeomError::from)?;
        // subsample stored nodes down to ~t_nodes comparisons
        let stride = (traj.states.len() / budget.t_nodes).max(1);
        for (i, lamt) in traj.states.iter().enumerate().step_by(stride) {
            let d2 = dist2(&lamt.base, p);
            if best.as_ref().map_or(true, |(b, _, _)| d2 < *b) {
                best = Some((d2, u.clone(), traj.times[i]));
            }
        }
    }
    let (_, u0, t0) = best.expect("coarse grid is nonempty");

    // Phase 2: Nelder-Mead over (u, t).
    let mut x0 = u0.clone();
    x0.push(t0.max(1e-6));
    let mut scale: Vec<f64> = zc
        .param_box()
        .iter()
        .map(|[lo, hi]| (hi - lo) / (budget.per_axis as f64 * 2.0))
        .collect();
    scale.push(budget.t_max / budget.t_nodes as f64);
    let objective = |x: &[f64]| -> Option<f64> {
        let (u, t) = x.split_at(zc.params());
        let t = t[0];
        if t <= 0.0 || t > 1.5 * budget.t_max || !zc.in_slab(u) {
            return None;
        }
        match shoot(s, h, zc, side, u, t, budget, 1e-9) {
            Ok(end) => Some(float::sqrt(dist2(&end, p))),
            Err(_) => None,
        }
    };
    let r = nelder_mead(objective, &x0, &scale, budget.nm_max_iter, 1e-14);
    let (u_star, t_star) = r.x.split_at(zc.params());
    let t_star = t_star[0];
    let residual = r.value;

    let foot = zc.point(u_star)?;
    let covector = annihilator_covector(s, h, zc.surface(), &foot, side, 1e-9)?;
    if residual <= budget.tol_shoot {
        Ok(DeltaResult {
            delta: t_star,
            foot,
            covector,
            residual,
        })
    } else {
        Err(DistanceError::OutsideTube {
            upper_bound: t_star,
            residual,
        })
    }
}

/// Brute-force oracle: the same coarse sweep with a dense grid and no
/// refinement. Returns the best `(t, u)` found; accuracy is limited by the
/// grid spacing. Kept independent of the refined path on purpose.
pub fn delta_brute_force(
    s: &SRStructure,
    h: &Hamiltonian,
    zc: &ZChart,
    p: &[f64],
    per_axis: usize,
    t_nodes: usize,
    t_max: f64,
) -> Result<(f64, Vec<f64>), DistanceError> {
    let psi_p = zc.surface().psi_at(p).map_err(GeomError::from)?;
    let side = if psi_p >= 0.0 { Side::Pos } else { Side::Neg };
    let axes: Vec<Vec<f64>> = zc
        .param_box()
        .iter()
        .map(|[lo, hi]| linspace(*lo, *hi, per_axis))
        .collect();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for u in tensor_grid(&axes) {
        let q = match zc.point(&u) {
            Ok(q) => q,
            Err(DistanceError::NewtonFailed { .. }) => continue,
            Err(e) => return Err(e),
        };
        let nc = annihilator_covector(s, h, zc.surface(), &q, side, 1e-9)?;
        let start = CotangentPoint::new(q, nc.lam);
        let traj = integrate(s, h, &start, t_max, t_nodes).map_err(GeomError::from)?;
        for (i, lamt) in traj.states.iter().enumerate() {
            let d2 = dist2(&lamt.base, p);
            if best.as_ref().map_or(true, |(b, _, _)| d2 < *b) {
                best = Some((d2, traj.times[i], u.clone()));
            }
        }
    }
    let (_, t, u) = best.expect("grid nonempty");
    Ok((t, u))
}

/// Fermi chart table on a tensor grid: `F(t, u)`, the theta factor and the
/// Jacobian determinant. `t_grid` must be uniform.
#[derive(Debug, Clone)]
pub struct FermiChart {
    pub t_grid: Vec<f64>,
    pub u_axes: Vec<Vec<f64>>,
    pub u_points: Vec<Vec<f64>>,
    /// `points[c][i]` = F(t_i, u_c) for u-column c.
    pub points: Vec<Vec<Vec<f64>>>,
    /// theta up to a t-independent additive constant per column.
    pub theta: Vec<Vec<f64>>,
    pub jac_det: Vec<Vec<f64>>,
    /// Per-column count of usable t-nodes (grid truncated at the first
    /// Jacobian sign change, the numerical injectivity bound).
    pub valid_len: Vec<usize>,
}

impl FermiChart {
    pub fn t_step(&self) -> f64 {
        self.t_grid[1] - self.t_grid[0]
    }
}

/// Build the Fermi chart. `rho` evaluates the measure density at a chart
/// point (`None` when unavailable there).
pub fn fermi_chart<F>(
    s: &SRStructure,
    h: &Hamiltonian,
    zc: &ZChart,
    side: Side,
    u_axes: &[Vec<f64>],
    t_grid: &[f64],
    steps_per_unit: usize,
    rho: F,
) -> Result<FermiChart, DistanceError>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    assert!(t_grid.len() >= 5, "need >= 5 t-nodes for the FD stencils");
    let ht = t_grid[1] - t_grid[0];
    for w in t_grid.windows(2) {
        assert!(
            ((w[1] - w[0]) - ht).abs() < 1e-12 * ht.abs(),
            "t grid must be uniform"
        );
    }
    let u_points = tensor_grid(u_axes);

    // integrate one unit-speed trajectory per u-column, advancing segment by
    // segment so the samples land exactly on the grid times
    let sub = (float::ceil(ht * steps_per_unit as f64) as usize).max(2);
    let mut points: Vec<Vec<Vec<f64>>> = Vec::with_capacity(u_points.len());
    for u in &u_points {
        let q = zc.point(u)?;
        let nc = annihilator_covector(s, h, zc.surface(), &q, side, 1e-9)?;
        let mut state = CotangentPoint::new(q, nc.lam).to_state();
        let lead_steps = (float::ceil(t_grid[0] * steps_per_unit as f64) as usize).max(2);
        crate::geodesics::advance(h, &mut state, t_grid[0], lead_steps)
            .map_err(GeomError::from)?;
        let n = s.dim();
        let mut col = Vec::with_capacity(t_grid.len());
        col.push(state[..n].to_vec());
        for _ in 1..t_grid.len() {
            crate::geodesics::advance(h, &mut state, ht, sub).map_err(GeomError::from)?;
            col.push(state[..n].to_vec());
        }
        points.push(col);
    }

    // Jacobian columns by finite differences on the grid
    let n = s.dim();
    let strides = axis_strides(u_axes);
    let nt = t_grid.len();
    let mut theta = vec![vec![f64::NAN; nt]; u_points.len()];
    let mut jac_det = vec![vec![f64::NAN; nt]; u_points.len()];
    let mut valid_len = vec![nt; u_points.len()];

    for (c, _) in u_points.iter().enumerate() {
        for i in 0..nt {
            let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
            cols.push(fd_along(&points[c], i, ht));
            for (a, axis) in u_axes.iter().enumerate() {
                let ha = if axis.len() > 1 { axis[1] - axis[0] } else { 1.0 };
                let pos = (c / strides[a]) % axis.len();
                let col = fd_across(&points, c, strides[a], pos, axis.len(), i, ha);
                cols.push(col);
            }
            let m = Mat::from_columns(n, &cols);
            jac_det[c][i] = det(&m);
        }
        // truncate the column at the first sign change of det DF
        let s0 = jac_det[c][0].signum();
        let mut len = nt;
        for i in 1..nt {
            if jac_det[c][i].signum() != s0 || jac_det[c][i] == 0.0 {
                len = i;
                break;
            }
        }
        valid_len[c] = len;
        for i in 0..len {
            let r = rho(&points[c][i]).ok_or(DistanceError::DensityUnavailable)?;
            theta[c][i] = 0.5 * float::ln(r * float::abs(jac_det[c][i]));
        }
    }

    Ok(FermiChart {
        t_grid: t_grid.to_vec(),
        u_axes: u_axes.to_vec(),
        u_points,
        points,
        theta,
        jac_det,
        valid_len,
    })
}

fn axis_strides(u_axes: &[Vec<f64>]) -> Vec<usize> {
    // odometer order of tensor_grid: last axis varies fastest
    let mut strides = vec![1usize; u_axes.len()];
    for a in (0..u_axes.len()).rev() {
        if a + 1 < u_axes.len() {
            strides[a] = strides[a + 1] * u_axes[a + 1].len();
        }
    }
    strides
}

/// Second-order d/dt of a column of points at node `i`.
fn fd_along(col: &[Vec<f64>], i: usize, h: f64) -> Vec<f64> {
    let n = col[0].len();
    let nt = col.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        out[j] = if i == 0 {
            (-3.0 * col[0][j] + 4.0 * col[1][j] - col[2][j]) / (2.0 * h)
        } else if i == nt - 1 {
            (3.0 * col[nt - 1][j] - 4.0 * col[nt - 2][j] + col[nt - 3][j]) / (2.0 * h)
        } else {
            (col[i + 1][j] - col[i - 1][j]) / (2.0 * h)
        };
    }
    out
}

/// Second-order d/du_a across neighboring u-columns at t-node `i`.
fn fd_across(
    points: &[Vec<Vec<f64>>],
    c: usize,
    stride: usize,
    pos: usize,
    axis_len: usize,
    i: usize,
    h: f64,
) -> Vec<f64> {
    let n = points[0][0].len();
    let mut out = vec![0.0; n];
    if axis_len == 1 {
        return out; // degenerate axis: treated as a frozen parameter
    }
    for j in 0..n {
        out[j] = if pos == 0 {
            (-3.0 * points[c][i][j] + 4.0 * points[c + stride][i][j]
                - points[c + 2 * stride][i][j])
                / (2.0 * h)
        } else if pos == axis_len - 1 {
            (3.0 * points[c][i][j] - 4.0 * points[c - stride][i][j]
                + points[c - 2 * stride][i][j])
                / (2.0 * h)
        } else {
            (points[c + stride][i][j] - points[c - stride][i][j]) / (2.0 * h)
        };
    }
    out
}

/// Conservative numerical injectivity bound: the smallest of (a) the first
/// Jacobian sign change along any column and (b) the first time two distinct
/// columns collide within `collision_tol`.
pub fn injectivity_probe<F>(
    s: &SRStructure,
    h: &Hamiltonian,
    zc: &ZChart,
    side: Side,
    u_axes: &[Vec<f64>],
    t_grid: &[f64],
    steps_per_unit: usize,
    collision_tol: f64,
    rho: F,
) -> Result<f64, DistanceError>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    if t_grid.is_empty() {
        return Ok(0.0);
    }
    let chart = fermi_chart(s, h, zc, side, u_axes, t_grid, steps_per_unit, rho)?;
    let mut bound = *t_grid.last().unwrap();
    for (c, len) in chart.valid_len.iter().enumerate() {
        if *len < t_grid.len() {
            bound = bound.min(chart.t_grid[*len]);
        }
        for c2 in (c + 1)..chart.u_points.len() {
            let l = (*len).min(chart.valid_len[c2]);
            for i in 0..l {
                if dist2(&chart.points[c][i], &chart.points[c2][i]) < collision_tol * collision_tol
                {
                    bound = bound.min(chart.t_grid[i]);
                    break;
                }
            }
        }
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::parse;
    use crate::srgeom::VectorField;

    fn vf(dim: usize, comps: &[&str]) -> VectorField {
        VectorField::new(comps.iter().map(|c| parse(c, dim).unwrap()).collect())
    }

    fn martinet() -> (SRStructure, Hamiltonian, ZChart) {
        let s = SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", "x1^2"])],
        )
        .unwrap();
        let h = Hamiltonian::new(&s);
        let z = Hypersurface::new(parse("x1", 3).unwrap(), 3);
        let zc = ZChart::new(z, 3, 0, vec![[-1.5, 1.5], [-1.5, 1.5]], 0.0);
        (s, h, zc)
    }

    fn grushin() -> (SRStructure, Hamiltonian, ZChart) {
        let s = SRStructure::new(Chart::new(2), vec![vf(2, &["1", "0"]), vf(2, &["0", "x1"])])
            .unwrap();
        let h = Hamiltonian::new(&s);
        let z = Hypersurface::new(parse("x1", 2).unwrap(), 2);
        let zc = ZChart::new(z, 2, 0, vec![[-1.5, 1.5]], 0.0);
        (s, h, zc)
    }

    #[test]
    fn annihilator_examples() {
        let (s, h, zc) = martinet();
        let nc = annihilator_covector(&s, &h, zc.surface(), &[0.0, 3.0, 7.0], Side::Pos, 1e-9)
            .unwrap();
        assert!((nc.lam[0] - 1.0).abs() < 1e-12);
        assert_eq!(&nc.lam[1..], &[0.0, 0.0]);
        let neg = annihilator_covector(&s, &h, zc.surface(), &[0.0, 3.0, 7.0], Side::Neg, 1e-9)
            .unwrap();
        assert!((neg.lam[0] + 1.0).abs() < 1e-12);

        let (s, h, zc) = grushin();
        let nc = annihilator_covector(&s, &h, zc.surface(), &[0.0, 0.4], Side::Pos, 1e-9).unwrap();
        assert!((nc.lam[0] - 1.0).abs() < 1e-12);

        // characteristic point of a synthetic structure is rejected
        let syn = SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["0", "1", "x1"]), vf(3, &["x2", "0", "0"])],
        )
        .unwrap();
        let hsyn = Hamiltonian::new(&syn);
        let z = Hypersurface::new(parse("x1", 3).unwrap(), 3);
        let err =
            annihilator_covector(&syn, &hsyn, &z, &[0.0, 0.0, 0.0], Side::Pos, 1e-9).unwrap_err();
        assert!(matches!(err, DistanceError::CharacteristicPoint { .. }));
    }

    #[test]
    fn martinet_delta_point() {
        let (s, h, zc) = martinet();
        let budget = ShootingBudget {
            t_max: 0.8,
            ..Default::default()
        };
        let r = delta(&s, &h, &zc, &[0.3, 0.0, 0.0], &budget).unwrap();
        assert!((r.delta - 0.3).abs() < 1e-5, "delta = {}", r.delta);
        assert!(r.foot.iter().map(|x| x.abs()).sum::<f64>() < 1e-4);
        assert!(r.residual <= budget.tol_shoot);
    }

    #[test]
    fn delta_on_surface_is_zero() {
        let (s, h, zc) = martinet();
        let r = delta(&s, &h, &zc, &[0.0, 0.5, -0.2], &ShootingBudget::default()).unwrap();
        assert_eq!(r.delta, 0.0);
    }

    #[test]
    fn roundtrip_shots_recover_t() {
        let (s, h, zc) = martinet();
        let budget = ShootingBudget {
            t_max: 0.5,
            ..Default::default()
        };
        for (u, t, side) in [
            ([0.2, -0.7], 0.2, Side::Pos),
            ([-0.9, 0.4], 0.15, Side::Neg),
            ([0.0, 0.0], 0.27, Side::Pos),
        ] {
            let q = zc.point(&u).unwrap();
            let nc = annihilator_covector(&s, &h, zc.surface(), &q, side, 1e-9).unwrap();
            let p = crate::geodesics::exp_map(&s, &h, &q, &nc.lam, t, 400).unwrap();
            let r = delta(&s, &h, &zc, &p, &budget).unwrap();
            assert!((r.delta - t).abs() < 1e-4, "t {t} vs {}", r.delta);
        }
    }

    #[test]
    fn brute_force_oracle_matches() {
        let (s, h, zc) = grushin();
        let p = [0.23, 0.31];
        let budget = ShootingBudget {
            t_max: 0.6,
            ..Default::default()
        };
        let refined = delta(&s, &h, &zc, &p, &budget).unwrap();
        let (bf, _) = delta_brute_force(&s, &h, &zc, &p, 100, 600, 0.6).unwrap();
        assert!((refined.delta - bf).abs() < 1e-3, "{} vs {bf}", refined.delta);
        assert!((refined.delta - 0.23).abs() < 1e-5);
    }

    #[test]
    fn grushin_theta_is_half_log_t() {
        let (s, h, zc) = grushin();
        // measure rho = 1/|x| evaluated on the positive side
        let rho = |p: &[f64]| {
            if p[0] > 0.0 {
                Some(1.0 / p[0])
            } else {
                None
            }
        };
        let t_grid = linspace(0.1, 0.3, 41);
        let u_axes = vec![linspace(-0.5, 0.5, 5)];
        let chart = fermi_chart(&s, &h, &zc, Side::Pos, &u_axes, &t_grid, 256, rho).unwrap();
        // F is the identity chart: det DF = 1, theta = -1/2 log t + const
        for c in 0..chart.u_points.len() {
            assert_eq!(chart.valid_len[c], t_grid.len());
            for i in 0..t_grid.len() {
                assert!((chart.jac_det[c][i].abs() - 1.0).abs() < 1e-6);
                let want = -0.5 * t_grid[i].ln();
                assert!(
                    (chart.theta[c][i] - want).abs() < 1e-6,
                    "theta {} want {want}",
                    chart.theta[c][i]
                );
            }
        }
    }

    #[test]
    fn martinet_injectivity_probe_reaches_horizon() {
        let (s, h, zc) = martinet();
        let rho = |p: &[f64]| {
            let x = p[0].abs();
            if x > 0.0 {
                Some(1.0 / (2.0 * 2.0_f64.sqrt() * x))
            } else {
                None
            }
        };
        let t_grid = linspace(0.05, 1.0, 20);
        let u_axes = vec![linspace(-0.4, 0.4, 3), linspace(-0.4, 0.4, 3)];
        let bound =
            injectivity_probe(&s, &h, &zc, Side::Pos, &u_axes, &t_grid, 128, 1e-6, rho).unwrap();
        assert_eq!(bound, 1.0);
    }
}
