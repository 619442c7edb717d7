//! The example structures used across the integration tests, built in code.

#![allow(dead_code)]

use sublap_core::chart::{Chart, Sign};
use sublap_core::expr::{parse, Expr};
use sublap_core::operators::{MeasureDensity, MeasureKind};
use sublap_core::srgeom::{SRStructure, VectorField};

pub fn vf(dim: usize, comps: &[&str]) -> VectorField {
    VectorField::new(comps.iter().map(|c| parse(c, dim).unwrap()).collect())
}

pub fn e(dim: usize, text: &str) -> Expr {
    parse(text, dim).unwrap()
}

/// k-Martinet on the x > 0 chart: X1 = d_x, X2 = d_y + x^{2k} d_z.
pub fn martinet(k: i64) -> SRStructure {
    let x2k = format!("x1^{}", 2 * k);
    SRStructure::new(
        Chart::new(3)
            .with_sign(0, Sign::Positive)
            .with_bounds(vec![[0.0, 2.0], [-2.0, 2.0], [-2.0, 2.0]]),
        vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", &x2k])],
    )
    .unwrap()
}

/// The same structure on an unbounded sign-free chart (for shooting tests
/// that cross from either side).
pub fn martinet_free(k: i64) -> SRStructure {
    let x2k = format!("x1^{}", 2 * k);
    SRStructure::new(
        Chart::new(3),
        vec![vf(3, &["1", "0", "0"]), vf(3, &["0", "1", &x2k])],
    )
    .unwrap()
}

pub fn martinet_popp(k: i64) -> MeasureDensity {
    let rho = format!("1/(2*sqrt(2)*{k}*x1^{})", 2 * k - 1);
    MeasureDensity::from_density(e(3, &rho), 3, MeasureKind::PoppClosedForm).unwrap()
}

/// Grushin on x > 0: X1 = d_x, X2 = x d_y; Popp = Riemannian volume 1/x.
pub fn grushin() -> SRStructure {
    SRStructure::new(
        Chart::new(2)
            .with_sign(0, Sign::Positive)
            .with_bounds(vec![[0.0, 2.0], [-2.0, 2.0]]),
        vec![vf(2, &["1", "0"]), vf(2, &["0", "x1"])],
    )
    .unwrap()
}

pub fn grushin_free() -> SRStructure {
    SRStructure::new(Chart::new(2), vec![vf(2, &["1", "0"]), vf(2, &["0", "x1"])]).unwrap()
}

pub fn grushin_popp() -> MeasureDensity {
    MeasureDensity::from_density(e(2, "1/x1"), 2, MeasureKind::PoppClosedForm).unwrap()
}

/// R^4 family with parameter l: X1 = d1 + x3 d4, X2 = x1(x1^{2l}+x2^2) d2,
/// X3 = d3, on the x1 > 0 side.
pub fn r4_family(l: i64) -> SRStructure {
    let c = format!("x1^{} + x1*x2^2", 2 * l + 1);
    SRStructure::new(
        Chart::new(4).with_sign(0, Sign::Positive),
        vec![
            vf(4, &["1", "0", "0", "x3"]),
            vf(4, &["0", &c, "0", "0"]),
            vf(4, &["0", "0", "1", "0"]),
        ],
    )
    .unwrap()
}

pub fn r4_popp(l: i64) -> MeasureDensity {
    let rho = format!("1/(sqrt(2)*x1*(x1^{} + x2^2))", 2 * l);
    MeasureDensity::from_density(e(4, &rho), 4, MeasureKind::PoppClosedForm).unwrap()
}

/// Heisenberg + flat third field: the x1 < 0 side of the mixed structure.
pub fn mixed_neg() -> SRStructure {
    SRStructure::new(
        Chart::new(3).with_sign(0, Sign::Negative),
        vec![
            vf(3, &["1", "0", "0"]),
            vf(3, &["0", "1", "x1"]),
            vf(3, &["0", "0", "0"]),
        ],
    )
    .unwrap()
}

pub fn mixed_neg_popp() -> MeasureDensity {
    MeasureDensity::from_density(e(3, "1/sqrt(2)"), 3, MeasureKind::PoppClosedForm).unwrap()
}

/// Riemannian side of the mixed structure (x1 > 0), where the third field
/// is sqrt(2) e^{-1/x1^2} d_3.
pub fn mixed_pos() -> SRStructure {
    SRStructure::new(
        Chart::new(3).with_sign(0, Sign::Positive),
        vec![
            vf(3, &["1", "0", "0"]),
            vf(3, &["0", "1", "x1"]),
            vf(3, &["0", "0", "sqrt(2)*exp(-1/x1^2)"]),
        ],
    )
    .unwrap()
}

pub fn mixed_pos_popp() -> MeasureDensity {
    // e^{2 theta}/sqrt(2) with theta = 1/(2 x1^2); kept in log form so the
    // drift term stays evaluable near the singular set.
    MeasureDensity::from_log_density(
        e(3, "1/x1^2 - log(sqrt(2))"),
        3,
        MeasureKind::PoppClosedForm,
    )
    .unwrap()
}
