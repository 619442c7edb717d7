//! Horizontal gradient, measure divergence, sub-Laplacian and the
//! sub-Riemannian Hamiltonian, all as exact symbolic objects.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{DiffError, EvalError, Expr, Node};
use crate::srgeom::{SRStructure, VectorField};

/// What a measure density came from; informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Lebesgue,
    PoppClosedForm,
    User,
}

/// A positive density w.r.t. coordinate Lebesgue measure.
///
/// Divergences only ever consume `d_j log(rho)`, so the log-density is the
/// primitive here. Densities like `exp(1/x1^2)/sqrt(2)` overflow f64 long
/// before their logarithmic derivative does; keeping `log rho` in expanded
/// form makes drift terms evaluable arbitrarily close to the singular set.
#[derive(Debug, Clone)]
pub struct MeasureDensity {
    log_rho: Expr,
    dlog_rho: Vec<Expr>,
    rho: Option<Expr>,
    kind: MeasureKind,
}

impl MeasureDensity {
    pub fn lebesgue(dim: usize) -> Self {
        MeasureDensity {
            log_rho: Expr::zero(),
            dlog_rho: vec![Expr::zero(); dim],
            rho: Some(Expr::one()),
            kind: MeasureKind::Lebesgue,
        }
    }

    /// From a density expression; its log is pushed through products,
    /// quotients, `exp`, `sqrt` and odd powers. The density must be written
    /// as a product of factors that are positive on the working chart.
    pub fn from_density(rho: Expr, dim: usize, kind: MeasureKind) -> Result<Self, DiffError> {
        let log_rho = log_expand(&rho);
        let dlog_rho = (0..dim).map(|j| log_rho.diff(j)).collect::<Result<_, _>>()?;
        Ok(MeasureDensity {
            log_rho,
            dlog_rho,
            rho: Some(rho),
            kind,
        })
    }

    /// From a log-density expression.
    pub fn from_log_density(log_rho: Expr, dim: usize, kind: MeasureKind) -> Result<Self, DiffError> {
        let dlog_rho = (0..dim).map(|j| log_rho.diff(j)).collect::<Result<_, _>>()?;
        Ok(MeasureDensity {
            log_rho,
            dlog_rho,
            rho: None,
            kind,
        })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn log_rho(&self) -> &Expr {
        &self.log_rho
    }

    pub fn dlog_rho(&self, j: usize) -> &Expr {
        &self.dlog_rho[j]
    }

    /// The density itself (may overflow where only log-derivatives are fine).
    pub fn rho_at(&self, p: &[f64]) -> Result<f64, EvalError> {
        match &self.rho {
            Some(r) => r.eval(p),
            None => Ok(crate::float::exp(self.log_rho.eval(p)?)),
        }
    }
}

/// Push a logarithm through multiplicative structure. `log(u^(2m))` is left
/// alone (the base may be negative); odd powers expand.
fn log_expand(e: &Expr) -> Expr {
    match e.node() {
        Node::Mul(fs) => Expr::add(fs.iter().map(log_expand).collect()),
        Node::Div(a, b) => Expr::sub(log_expand(a), log_expand(b)),
        Node::Exp(u) => u.clone(),
        Node::Sqrt(u) => Expr::mul(vec![
            Expr::div(Expr::one(), Expr::int(2)),
            log_expand(u),
        ]),
        Node::Pow(b, n) if n % 2 != 0 => {
            Expr::mul(vec![Expr::int(*n as i64), log_expand(b)])
        }
        _ => Expr::log(e.clone()),
    }
}

/// Horizontal gradient `∇u = sum_i X_i(u) X_i`.
pub fn gradient(u: &Expr, s: &SRStructure) -> Result<VectorField, DiffError> {
    let n = s.dim();
    let mut comps = vec![Expr::zero(); n];
    for x in s.fields() {
        let xu = x.apply(u)?;
        for j in 0..n {
            comps[j] = Expr::add(vec![
                comps[j].clone(),
                Expr::mul(vec![xu.clone(), x.component(j).clone()]),
            ]);
        }
    }
    Ok(VectorField::new(comps))
}

/// Squared length of the horizontal gradient: `|∇u|² = sum_i X_i(u)²`.
pub fn gradient_norm_sq(u: &Expr, s: &SRStructure) -> Result<Expr, DiffError> {
    let mut terms = Vec::with_capacity(s.num_fields());
    for x in s.fields() {
        let xu = x.apply(u)?;
        terms.push(Expr::pow(xu, 2));
    }
    Ok(Expr::add(terms))
}

/// Divergence w.r.t. the measure: `div_ω X = sum_j d_j X^j + X^j d_j log(rho)`.
pub fn divergence(x: &VectorField, m: &MeasureDensity) -> Result<Expr, DiffError> {
    let n = x.dim();
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..n {
        terms.push(x.component(j).diff(j)?);
        terms.push(Expr::mul(vec![
            x.component(j).clone(),
            m.dlog_rho(j).clone(),
        ]));
    }
    Ok(Expr::add(terms))
}

/// Sub-Laplacian `Δ_ω u = sum_i X_i² u + div_ω(X_i) X_i u`, assembled from
/// the generating family directly; its agreement with `div_ω(∇u)` is a test,
/// not an assumption.
pub fn sublaplacian(u: &Expr, s: &SRStructure, m: &MeasureDensity) -> Result<Expr, DiffError> {
    let mut terms = Vec::new();
    for x in s.fields() {
        let xu = x.apply(u)?;
        terms.push(x.apply(&xu)?);
        terms.push(Expr::mul(vec![divergence(x, m)?, xu]));
    }
    Ok(Expr::add(terms))
}

/// A point of the cotangent bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentPoint {
    pub base: Vec<f64>,
    pub covector: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(base: Vec<f64>, covector: Vec<f64>) -> Self {
        assert_eq!(base.len(), covector.len(), "dimension mismatch");
        CotangentPoint { base, covector }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Flat phase-space coordinates `(q, p)`.
    pub fn to_state(&self) -> Vec<f64> {
        let mut v = self.base.clone();
        v.extend_from_slice(&self.covector);
        v
    }

    pub fn from_state(state: &[f64]) -> Self {
        let n = state.len() / 2;
        CotangentPoint {
            base: state[..n].to_vec(),
            covector: state[n..].to_vec(),
        }
    }
}

/// The sub-Riemannian Hamiltonian `H(q,p) = ½ sum_i <p, X_i(q)>²` as an
/// expression in the `2n` phase-space variables `(x1..xn, x{n+1}..x{2n})`,
/// with its exact partials.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    dim: usize,
    h: Expr,
    /// `dH/dp_j`, j = 0..n
    dp: Vec<Expr>,
    /// `dH/dq_j`, j = 0..n
    dq: Vec<Expr>,
}

impl Hamiltonian {
    pub fn new(s: &SRStructure) -> Self {
        let n = s.dim();
        // lift a chart expression to phase space (same variable indices)
        let mut terms = Vec::with_capacity(s.num_fields());
        for x in s.fields() {
            let mut pairing = Vec::with_capacity(n);
            for j in 0..n {
                pairing.push(Expr::mul(vec![Expr::var(n + j), x.component(j).clone()]));
            }
            terms.push(Expr::pow(Expr::add(pairing), 2));
        }
        let h = Expr::div(Expr::add(terms), Expr::int(2));
        let dp = (0..n)
            .map(|j| h.diff(n + j).expect("fields cannot contain abs"))
            .collect();
        let dq = (0..n)
            .map(|j| h.diff(j).expect("fields cannot contain abs"))
            .collect();
        Hamiltonian { dim: n, h, dp, dq }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.h
    }

    pub fn value(&self, lam: &CotangentPoint) -> Result<f64, EvalError> {
        self.h.eval(&lam.to_state())
    }

    /// Hamiltonian vector field on phase space: `(q̇, ṗ) = (∂H/∂p, -∂H/∂q)`.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let n = self.dim;
        for j in 0..n {
            out[j] = self.dp[j].eval(state)?;
            out[n + j] = -self.dq[j].eval(state)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::parse;

    fn vf(dim: usize, comps: &[&str]) -> VectorField {
        VectorField::new(comps.iter().map(|c| parse(c, dim).unwrap()).collect())
    }

    fn martinet() -> SRStructure {
        SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", "x1^2"])],
        )
        .unwrap()
    }

    fn grushin() -> SRStructure {
        SRStructure::new(Chart::new(2), vec![vf(2, &["1", "0"]), vf(2, &["0", "x1"])]).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let s = martinet();
        let u = parse("x1", 3).unwrap();
        let g = gradient(&u, &s).unwrap();
        let v = g.eval(&[0.7, -0.2, 0.4]).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let nsq = gradient_norm_sq(&u, &s).unwrap();
        assert_eq!(nsq.eval(&[0.7, -0.2, 0.4]).unwrap(), 1.0);

        let c = parse("5", 3).unwrap();
        let gc = gradient(&c, &s).unwrap();
        assert!(gc.eval(&[0.7, -0.2, 0.4]).unwrap().iter().all(|x| *x == 0.0));

        // Grushin, u = y: grad u = x^2 d_y, |grad u| = |x|
        let s = grushin();
        let u = parse("x2", 2).unwrap();
        let g = gradient(&u, &s).unwrap();
        for x in [0.5, -1.2, 2.0] {
            let v = g.eval(&[x, 0.3]).unwrap();
            assert!((v[0]).abs() < 1e-15);
            assert!((v[1] - x * x).abs() < 1e-15);
            let n2 = gradient_norm_sq(&u, &s).unwrap().eval(&[x, 0.3]).unwrap();
            assert!((n2.sqrt() - x.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_examples() {
        // Grushin measure rho = 1/x on x > 0: div(d_x) = -1/x
        let m = MeasureDensity::from_density(
            parse("1/x1", 2).unwrap(),
            2,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let dx = vf(2, &["1", "0"]);
        let d = divergence(&dx, &m).unwrap();
        for x in [0.5, 1.0, 2.0] {
            assert!((d.eval(&[x, 0.0]).unwrap() + 1.0 / x).abs() < 1e-14);
        }

        // Lebesgue: div(d_i) = 0
        let leb = MeasureDensity::lebesgue(2);
        let d = divergence(&dx, &leb).unwrap();
        assert_eq!(d.eval(&[0.3, 0.9]).unwrap(), 0.0);

        // Martinet Popp on x > 0, X2 = d_y + x^2 d_z has zero divergence
        let m = MeasureDensity::from_density(
            parse("1/(2*sqrt(2)*x1)", 3).unwrap(),
            3,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let x2 = vf(3, &["0", "1", "x1^2"]);
        let d = divergence(&x2, &m).unwrap();
        assert_eq!(d.eval(&[0.7, 0.1, -0.4]).unwrap(), 0.0);
    }

    #[test]
    fn sublaplacian_grushin_drift() {
        // Delta = d_x^2 + x^2 d_y^2 - (1/x) d_x for rho = 1/x;
        // with u = x^2 this gives 2 - (1/x)(2x) = 0.
        let s = grushin();
        let m = MeasureDensity::from_density(
            parse("1/x1", 2).unwrap(),
            2,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let u = parse("x1^2", 2).unwrap();
        let lap = sublaplacian(&u, &s, &m).unwrap();
        for x in [0.25, 0.8, 1.7] {
            assert!(lap.eval(&[x, 0.4]).unwrap().abs() < 1e-13);
        }

        let c = parse("3/4", 2).unwrap();
        assert_eq!(sublaplacian(&c, &s, &m).unwrap().eval(&[0.5, 0.1]).unwrap(), 0.0);

        // k-Martinet Popp with k=1: Delta x = -1/x
        let s = martinet();
        let m = MeasureDensity::from_density(
            parse("1/(2*sqrt(2)*x1)", 3).unwrap(),
            3,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let u = parse("x1", 3).unwrap();
        let lap = sublaplacian(&u, &s, &m).unwrap();
        for x in [0.5, 1.0, 2.0] {
            assert!((lap.eval(&[x, 0.0, 0.0]).unwrap() + 1.0 / x).abs() < 1e-14);
        }
    }

    #[test]
    fn sublaplacian_agrees_with_div_grad() {
        let s = martinet();
        let m = MeasureDensity::from_density(
            parse("1/(2*sqrt(2)*x1)", 3).unwrap(),
            3,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let u = parse("x1^2*x2 + sin(x3)*x1", 3).unwrap();
        let lhs = sublaplacian(&u, &s, &m).unwrap();
        let rhs = divergence(&gradient(&u, &s).unwrap(), &m).unwrap();
        for p in [[0.5, 0.3, -0.7], [1.2, -0.4, 0.9], [0.8, 2.0, 0.1]] {
            let a = lhs.eval(&p).unwrap();
            let b = rhs.eval(&p).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn hamiltonian_values() {
        let s = martinet();
        let h = Hamiltonian::new(&s);
        let lam = CotangentPoint::new(vec![0.5, 0.0, 0.0], vec![1.0, 0.0, 0.0]);
        assert!((h.value(&lam).unwrap() - 0.5).abs() < 1e-15);

        let zero = CotangentPoint::new(vec![0.4, 1.0, 2.0], vec![0.0, 0.0, 0.0]);
        assert_eq!(h.value(&zero).unwrap(), 0.0);

        // abnormal direction: p = dz at x = 0 annihilates the distribution
        let abn = CotangentPoint::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0]);
        assert_eq!(h.value(&abn).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_rhs_heisenberg() {
        let s = SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", "x1"])],
        )
        .unwrap();
        let h = Hamiltonian::new(&s);
        let state = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let mut out = [0.0; 6];
        h.rhs(&state, &mut out).unwrap();
        assert_eq!(&out[..3], &[0.0, 1.0, 0.0]);
        assert_eq!(&out[3..], &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn log_density_route_survives_extreme_arguments() {
        // density exp(1/x1^2)/sqrt(2): overflows in f64 below x ~ 0.037,
        // but the drift d log rho = -2/x^3 stays evaluable.
        let m = MeasureDensity::from_density(
            parse("exp(1/x1^2)/sqrt(2)", 1).unwrap(),
            1,
            MeasureKind::PoppClosedForm,
        )
        .unwrap();
        let x = 1e-6;
        let d = m.dlog_rho(0).eval(&[x]).unwrap();
        assert!((d - (-2.0 / x.powi(3))).abs() < 1e-3 * (2.0 / x.powi(3)));
        assert!(m.rho_at(&[x]).unwrap().is_infinite());
    }
}
