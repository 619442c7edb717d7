//! Vector fields, Lie brackets, growth vectors and flags, equiregularity,
//! hypersurfaces and characteristic-point detection.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::chart::Chart;
use crate::expr::{EvalError, Expr};
use crate::float;
use crate::linalg::{pivoted_qr, Mat};

/// A smooth vector field given by its coordinate components on the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> Self {
        VectorField { comps }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            comps: vec![Expr::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, j: usize) -> &Expr {
        &self.comps[j]
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    /// Apply the field to a scalar: `X(f) = sum_j X^j d_j f`.
    pub fn apply(&self, f: &Expr) -> Result<Expr, crate::expr::DiffError> {
        let mut terms = Vec::with_capacity(self.comps.len());
        for (j, xj) in self.comps.iter().enumerate() {
            terms.push(Expr::mul(vec![xj.clone(), f.diff(j)?]));
        }
        Ok(Expr::add(terms))
    }

    /// Pointwise linear combination `sum_i coeffs[i] * fields[i]` with exact
    /// binary-rational coefficients.
    pub fn linear_combination(fields: &[VectorField], coeffs: &[f64]) -> VectorField {
        assert_eq!(fields.len(), coeffs.len());
        let dim = fields[0].dim();
        let mut comps = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut terms = Vec::new();
            for (f, c) in fields.iter().zip(coeffs) {
                terms.push(Expr::mul(vec![float_to_expr(*c), f.comps[j].clone()]));
            }
            comps.push(Expr::add(terms));
        }
        VectorField { comps }
    }
}

fn float_to_expr(c: f64) -> Expr {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let (mantissa, exponent, sign) = integer_decode(c);
    let mut q = BigRational::from_integer(BigInt::from(mantissa) * BigInt::from(sign));
    let two = BigInt::from(2);
    let mut scale = BigInt::from(1);
    for _ in 0..exponent.unsigned_abs() {
        scale *= &two;
    }
    if exponent >= 0 {
        q *= BigRational::from_integer(scale);
    } else {
        q /= BigRational::from_integer(scale);
    }
    Expr::rational(q)
}

fn integer_decode(x: f64) -> (u64, i16, i8) {
    let bits = x.to_bits();
    let sign: i8 = if bits >> 63 == 0 { 1 } else { -1 };
    let mut exponent: i16 = ((bits >> 52) & 0x7ff) as i16;
    let mantissa = if exponent == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    exponent -= 1075;
    (mantissa, exponent, sign)
}

/// Lie bracket `[X, Y]^j = sum_i X^i d_i Y^j - Y^i d_i X^j`, exact symbolic.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    assert_eq!(x.dim(), y.dim(), "bracket of fields on different charts");
    let dim = x.dim();
    let mut comps = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut terms = Vec::new();
        for i in 0..dim {
            let dy = y.comps[j].diff(i).expect("unresolved abs in field component");
            let dx = x.comps[j].diff(i).expect("unresolved abs in field component");
            terms.push(Expr::mul(vec![x.comps[i].clone(), dy]));
            terms.push(Expr::neg(Expr::mul(vec![y.comps[i].clone(), dx])));
        }
        comps.push(Expr::add(terms));
    }
    VectorField { comps }
}

/// Generating family of vector fields plus its chart.
#[derive(Debug, Clone)]
pub struct SRStructure {
    chart: Chart,
    fields: Vec<VectorField>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("not bracket-generating to depth {depth} at the point (rank {rank} of {dim})")]
    NotBracketGenerating { depth: usize, rank: usize, dim: usize },
    #[error("point is not on the hypersurface (|psi| = {psi_abs:.3e} > tol {tol:.3e})")]
    NotOnHypersurface { psi_abs: f64, tol: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl SRStructure {
    pub fn new(chart: Chart, fields: Vec<VectorField>) -> Result<Self, GeomError> {
        if fields.is_empty() {
            return Err(GeomError::Dimension("empty generating family".into()));
        }
        for (i, f) in fields.iter().enumerate() {
            if f.dim() != chart.dim() {
                return Err(GeomError::Dimension(format!(
                    "field {} has {} components on a chart of dimension {}",
                    i + 1,
                    f.dim(),
                    chart.dim()
                )));
            }
        }
        Ok(SRStructure { chart, fields })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// The field of a left-nested bracket word `[X_{w0}, [X_{w1}, [...]]]`.
    /// A word of length 1 is the generating field itself.
    pub fn word_field(&self, word: &[usize]) -> VectorField {
        assert!(!word.is_empty());
        if word.len() == 1 {
            return self.fields[word[0]].clone();
        }
        let inner = self.word_field(&word[1..]);
        lie_bracket(&self.fields[word[0]], &inner)
    }
}

/// Bracket fields of each word length, cached so grid sweeps don't redo the
/// symbolic differentiation.
#[derive(Debug, Clone)]
pub struct BracketTable {
    layers: Vec<Vec<(Vec<usize>, VectorField)>>,
}

impl BracketTable {
    pub fn up_to_depth(s: &SRStructure, depth: usize) -> Self {
        let r = s.num_fields();
        let mut layers: Vec<Vec<(Vec<usize>, VectorField)>> = Vec::with_capacity(depth);
        for d in 1..=depth {
            let mut layer = Vec::new();
            if d == 1 {
                for (i, f) in s.fields().iter().enumerate() {
                    layer.push((vec![i], f.clone()));
                }
            } else {
                for (word, field) in layers[d - 2].clone() {
                    for i in 0..r {
                        if word.len() == 1 && word[0] == i {
                            continue; // innermost [X, X] = 0
                        }
                        let mut w = Vec::with_capacity(word.len() + 1);
                        w.push(i);
                        w.extend_from_slice(&word);
                        layer.push((w, lie_bracket(&s.fields()[i], &field)));
                    }
                }
            }
            layers.push(layer);
        }
        BracketTable { layers }
    }

    /// (word, field) pairs of word length `depth` (1-based).
    pub fn layer(&self, depth: usize) -> &[(Vec<usize>, VectorField)] {
        &self.layers[depth - 1]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// Growth vector: dimensions of the flag `D^1 ⊆ D^2 ⊆ ...` at a point,
/// up to and including the first layer of full rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthVector {
    dims: Vec<usize>,
}

impl GrowthVector {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// The step `s(q)`: index (1-based) of the first layer of full rank.
    pub fn step(&self) -> usize {
        self.dims.len()
    }
}

/// Growth vector at a point: `dims[k-1]` is the numerical rank (threshold
/// `tol` relative to the largest R diagonal) of the matrix whose columns are
/// all bracket words of length `<= k` evaluated at `p`.
pub fn flag_at(
    s: &SRStructure,
    p: &[f64],
    max_depth: usize,
    tol: f64,
) -> Result<GrowthVector, GeomError> {
    let table = BracketTable::up_to_depth(s, max_depth);
    flag_at_with_table(s, &table, p, tol)
}

pub fn flag_at_with_table(
    s: &SRStructure,
    table: &BracketTable,
    p: &[f64],
    tol: f64,
) -> Result<GrowthVector, GeomError> {
    let n = s.dim();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut dims = Vec::new();
    for d in 1..=table.depth() {
        for (_, field) in table.layer(d) {
            columns.push(field.eval(p)?);
        }
        let m = Mat::from_columns(n, &columns);
        let rank = pivoted_qr(&m).rank(tol);
        dims.push(rank);
        if rank == n {
            return Ok(GrowthVector { dims });
        }
    }
    Err(GeomError::NotBracketGenerating {
        depth: table.depth(),
        rank: *dims.last().unwrap_or(&0),
        dim: n,
    })
}

/// Outcome of an equiregularity probe over a sample of points.
#[derive(Debug, Clone)]
pub struct EquiregularityReport {
    pub equiregular: bool,
    /// On failure: two points with different growth vectors.
    pub witnesses: Option<((Vec<f64>, GrowthVector), (Vec<f64>, GrowthVector))>,
}

pub fn is_equiregular_on(
    s: &SRStructure,
    samples: &[Vec<f64>],
    max_depth: usize,
    tol: f64,
) -> Result<EquiregularityReport, GeomError> {
    assert!(!samples.is_empty(), "equiregularity probe needs samples");
    let table = BracketTable::up_to_depth(s, max_depth);
    let first = flag_at_with_table(s, &table, &samples[0], tol)?;
    for q in &samples[1..] {
        let g = flag_at_with_table(s, &table, q, tol)?;
        if g != first {
            return Ok(EquiregularityReport {
                equiregular: false,
                witnesses: Some(((samples[0].clone(), first), (q.clone(), g))),
            });
        }
    }
    Ok(EquiregularityReport {
        equiregular: true,
        witnesses: None,
    })
}

/// An embedded hypersurface `Z = {psi = 0}` given by its defining function.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    psi: Expr,
    dpsi: Vec<Expr>,
}

impl Hypersurface {
    pub fn new(psi: Expr, dim: usize) -> Self {
        let dpsi = (0..dim)
            .map(|j| psi.diff(j).expect("unresolved abs in defining function"))
            .collect();
        Hypersurface { psi, dpsi }
    }

    pub fn psi(&self) -> &Expr {
        &self.psi
    }

    pub fn psi_at(&self, p: &[f64]) -> Result<f64, EvalError> {
        self.psi.eval(p)
    }

    pub fn dpsi_at(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.dpsi.iter().map(|d| d.eval(p)).collect()
    }

    /// Submersion check: `d psi != 0` at the point.
    pub fn is_submersion_at(&self, p: &[f64], tol: f64) -> Result<bool, EvalError> {
        Ok(float::hypot_slice(&self.dpsi_at(p)?) > tol)
    }
}

/// Whether `q` (on `Z`) is a characteristic (tangency) point:
/// `D_q ⊆ T_q Z`, i.e. `<d psi(q), X_i(q)> = 0` for every generator.
pub fn characteristic_test(
    s: &SRStructure,
    z: &Hypersurface,
    q: &[f64],
    tol: f64,
) -> Result<bool, GeomError> {
    let psi = z.psi_at(q)?;
    if float::abs(psi) > tol {
        return Err(GeomError::NotOnHypersurface {
            psi_abs: float::abs(psi),
            tol,
        });
    }
    let dpsi = z.dpsi_at(q)?;
    let norm = float::hypot_slice(&dpsi);
    let mut worst = 0.0f64;
    for f in s.fields() {
        let v = f.eval(q)?;
        let pairing: f64 = dpsi.iter().zip(&v).map(|(a, b)| a * b).sum();
        worst = worst.max(float::abs(pairing));
    }
    Ok(worst <= tol * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::parse;

    fn vf(dim: usize, comps: &[&str]) -> VectorField {
        VectorField::new(comps.iter().map(|c| parse(c, dim).unwrap()).collect())
    }

    fn martinet(k: i64) -> SRStructure {
        // X1 = d_x, X2 = d_y + x^{2k} d_z
        let x2k = alloc::format!("x1^{}", 2 * k);
        SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", &x2k])],
        )
        .unwrap()
    }

    #[test]
    fn martinet_bracket() {
        let s = martinet(1);
        let b = lie_bracket(&s.fields()[0], &s.fields()[1]);
        // [d_x, d_y + x^2 d_z] = 2x d_z
        for x in [0.3, -1.2, 2.0] {
            let v = b.eval(&[x, 0.5, -0.7]).unwrap();
            assert_eq!(v[0], 0.0);
            assert_eq!(v[1], 0.0);
            assert!((v[2] - 2.0 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn bracket_antisymmetry_self() {
        let s = martinet(1);
        let b = lie_bracket(&s.fields()[1], &s.fields()[1]);
        let v = b.eval(&[0.4, 0.1, 0.9]).unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn heisenberg_layer_bracket() {
        // [d_3, d_1 + x_3 d_4] = d_4 on R^4
        let d3 = vf(4, &["0", "0", "1", "0"]);
        let x1 = vf(4, &["1", "0", "0", "x3"]);
        let b = lie_bracket(&d3, &x1);
        let v = b.eval(&[0.3, -0.2, 0.8, 1.5]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn martinet_flags() {
        let s = martinet(1);
        let g = flag_at(&s, &[0.5, 0.0, 0.0], 4, 1e-9).unwrap();
        assert_eq!(g.dims(), &[2, 3]);
        assert_eq!(g.step(), 2);

        let g0 = flag_at(&s, &[0.0, 0.0, 0.0], 4, 1e-9).unwrap();
        assert_eq!(g0.dims(), &[2, 2, 3]);
        assert_eq!(g0.step(), 3);
    }

    #[test]
    fn equiregularity_probe() {
        let s = martinet(1);
        let off_z = vec![
            vec![0.5, 0.0, 0.0],
            vec![1.0, 2.0, -1.0],
            vec![-0.7, 0.3, 0.2],
        ];
        assert!(is_equiregular_on(&s, &off_z, 4, 1e-9).unwrap().equiregular);

        let mixed = vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        let rep = is_equiregular_on(&s, &mixed, 4, 1e-9).unwrap();
        assert!(!rep.equiregular);
        let ((_, g1), (_, g2)) = rep.witnesses.unwrap();
        assert_eq!(g1.dims(), &[2, 3]);
        assert_eq!(g2.dims(), &[2, 2, 3]);

        let single = vec![vec![0.5, 0.0, 0.0]];
        assert!(is_equiregular_on(&s, &single, 4, 1e-9).unwrap().equiregular);
    }

    #[test]
    fn characteristic_points() {
        let s = martinet(1);
        let z = Hypersurface::new(parse("x1", 3).unwrap(), 3);
        // X1 = d_x is transversal to {x=0}
        assert!(!characteristic_test(&s, &z, &[0.0, 1.0, 2.0], 1e-9).unwrap());
        // off-surface point rejected
        assert!(characteristic_test(&s, &z, &[0.5, 0.0, 0.0], 1e-9).is_err());

        // synthetic: X1 = d_y + x d_z, X2 = y d_x, both tangent to {x=0} at 0
        let syn = SRStructure::new(
            Chart::new(3),
            vec![vf(3, &["0", "1", "x1"]), vf(3, &["x2", "0", "0"])],
        )
        .unwrap();
        assert!(characteristic_test(&syn, &z, &[0.0, 0.0, 0.0], 1e-9).unwrap());
        // at y != 0, X2 = y d_x is transversal
        assert!(!characteristic_test(&syn, &z, &[0.0, 1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn not_bracket_generating_is_reported() {
        // single field d_x on R^2 generates nothing new
        let s = SRStructure::new(Chart::new(2), vec![vf(2, &["1", "0"])]).unwrap();
        let e = flag_at(&s, &[0.0, 0.0], 3, 1e-9).unwrap_err();
        match e {
            GeomError::NotBracketGenerating { depth, rank, dim } => {
                assert_eq!((depth, rank, dim), (3, 1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
