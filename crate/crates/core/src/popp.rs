//! Popp's measure on equiregular neighborhoods.
//!
//! The density at a point is produced from an adapted frame `X_1..X_n`
//! (generating fields first, then bracket words layer by layer), the
//! structure constants `b^l_{i1..ij}` expanding each bracket word of the
//! generating family in the frame modulo the lower layer, the Gram matrices
//! `B_j` of those constants, and finally
//!
//! ```text
//!     density = 1 / ( |det frame| * sqrt(prod_j det B_j) )
//! ```
//!
//! relative to coordinate Lebesgue measure. The value does not depend on
//! admissible frame choices; the greedy frame built here (declaration order,
//! then bracket words in length-lexicographic order) is just a deterministic
//! representative.

use alloc::vec::Vec;

use crate::expr::EvalError;
use crate::float;
use crate::linalg::{det, pivoted_qr, Lu, Mat};
use crate::srgeom::{BracketTable, GeomError, GrowthVector, SRStructure, VectorField};

pub const DEFAULT_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoppError {
    #[error("flag transition: growth vector at the point is {found:?}, expected {expected:?}")]
    FlagTransition {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("adapted frame rank deficiency in layer {layer}: got {got} fields, flag demands {want}")]
    LayerDeficient { layer: usize, got: usize, want: usize },
    #[error("singular frame matrix at the point")]
    SingularFrame,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Adapted frame at a point: full rank, layered along the flag, with the
/// bracket words that produced it.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    /// Bracket words (generator indices, left-nested) of the frame fields.
    pub words: Vec<Vec<usize>>,
    pub fields: Vec<VectorField>,
    /// `layer_bounds[j-1] = k_j = dim D^j`; last entry is the chart dimension.
    pub layer_bounds: Vec<usize>,
    /// Columns are the frame fields evaluated at the point.
    pub frame_matrix: Mat,
    /// Inverse of `frame_matrix`; rows are the dual covectors `nu^j`.
    pub dual_matrix: Mat,
}

impl AdaptedFrame {
    pub fn step(&self) -> usize {
        self.layer_bounds.len()
    }

    fn layer_range(&self, layer: usize) -> (usize, usize) {
        let lo = if layer == 1 {
            0
        } else {
            self.layer_bounds[layer - 2]
        };
        (lo, self.layer_bounds[layer - 1])
    }
}

/// Structure constants of one layer: for every bracket word of that length,
/// the expansion coefficients over the layer's frame fields (mod lower layer).
#[derive(Debug, Clone)]
pub struct LayerConstants {
    pub layer: usize,
    pub words: Vec<Vec<usize>>,
    /// `rows[w][h]` = coefficient of frame field `k_{j-1}+h` in word `w`.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BCoeffs {
    pub layers: Vec<LayerConstants>,
}

/// Popp density value at a point together with its ingredients.
#[derive(Debug, Clone)]
pub struct PoppResult {
    /// `dP/dLebesgue` at the point; positive.
    pub density: f64,
    /// `det B_j` per layer; all positive.
    pub b_dets: Vec<f64>,
    pub coeffs: BCoeffs,
    pub frame: AdaptedFrame,
}

/// Greedy adapted frame: a maximal independent subset of the generating
/// family at `p` (declaration order), extended layer by layer with bracket
/// words in length-lexicographic order whose evaluations grow the rank.
///
/// When `expect` is given, the growth vector at `p` must match it exactly;
/// a mismatch is the "flag transition" error that marks non-equiregular
/// points, where Popp's measure is undefined.
pub fn adapted_frame_at(
    s: &SRStructure,
    p: &[f64],
    max_depth: usize,
    tol: f64,
    expect: Option<&GrowthVector>,
) -> Result<AdaptedFrame, PoppError> {
    let n = s.dim();
    let table = BracketTable::up_to_depth(s, max_depth);
    let flag = crate::srgeom::flag_at_with_table(s, &table, p, tol)?;
    if let Some(want) = expect {
        if flag != *want {
            return Err(PoppError::FlagTransition {
                expected: want.dims().to_vec(),
                found: flag.dims().to_vec(),
            });
        }
    }

    let mut words: Vec<Vec<usize>> = Vec::new();
    let mut fields: Vec<VectorField> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut rank = 0usize;

    for (j, &kj) in flag.dims().iter().enumerate() {
        let depth = j + 1;
        let mut layer: Vec<(Vec<usize>, VectorField)> = table.layer(depth).to_vec();
        layer.sort_by(|a, b| a.0.cmp(&b.0));
        for (word, field) in layer {
            if rank == kj {
                break;
            }
            let v = field.eval(p)?;
            columns.push(v);
            let m = Mat::from_columns(n, &columns);
            let new_rank = pivoted_qr(&m).rank(tol);
            if new_rank > rank {
                rank = new_rank;
                words.push(word);
                fields.push(field);
            } else {
                columns.pop();
            }
        }
        if rank != kj {
            return Err(PoppError::LayerDeficient {
                layer: depth,
                got: rank,
                want: kj,
            });
        }
    }

    let frame_matrix = Mat::from_columns(n, &columns);
    let lu = Lu::new(&frame_matrix).map_err(|_| PoppError::SingularFrame)?;
    let dual_matrix = lu.inverse();
    Ok(AdaptedFrame {
        words,
        fields,
        layer_bounds: flag.dims().to_vec(),
        frame_matrix,
        dual_matrix,
    })
}

/// Expansion of every bracket word of the generating family in the adapted
/// frame at the frame's point: for a word of length `j`, only the
/// coefficients on the `j`-th layer are retained (the expansion modulo
/// `D^{j-1}`; components above the layer vanish for Lie-algebraic reasons).
pub fn structure_constants(
    s: &SRStructure,
    frame: &AdaptedFrame,
    p: &[f64],
) -> Result<BCoeffs, PoppError> {
    let lu = Lu::new(&frame.frame_matrix).map_err(|_| PoppError::SingularFrame)?;
    let table = BracketTable::up_to_depth(s, frame.step());
    let mut layers = Vec::with_capacity(frame.step());
    for layer in 1..=frame.step() {
        let (lo, hi) = frame.layer_range(layer);
        let mut words = Vec::new();
        let mut rows = Vec::new();
        for (word, field) in table.layer(layer) {
            let v = field.eval(p)?;
            let c = lu.solve(&v);
            words.push(word.clone());
            rows.push(c[lo..hi].to_vec());
        }
        layers.push(LayerConstants {
            layer,
            words,
            rows,
        });
    }
    Ok(BCoeffs { layers })
}

fn gram(rows: &[Vec<f64>], width: usize) -> Mat {
    let mut b = Mat::zeros(width, width);
    for row in rows {
        for h in 0..width {
            for l in 0..width {
                b[(h, l)] += row[h] * row[l];
            }
        }
    }
    b
}

/// Popp density w.r.t. coordinate Lebesgue measure at `p`.
pub fn popp_density(
    s: &SRStructure,
    p: &[f64],
    max_depth: usize,
    tol: f64,
    expect: Option<&GrowthVector>,
) -> Result<PoppResult, PoppError> {
    let frame = adapted_frame_at(s, p, max_depth, tol, expect)?;
    popp_density_with_frame(s, frame, p)
}

/// Popp density from a caller-supplied adapted frame (used by the
/// frame-independence tests).
pub fn popp_density_with_frame(
    s: &SRStructure,
    frame: AdaptedFrame,
    p: &[f64],
) -> Result<PoppResult, PoppError> {
    let coeffs = structure_constants(s, &frame, p)?;
    let mut b_dets = Vec::with_capacity(frame.step());
    for lc in &coeffs.layers {
        let (lo, hi) = frame.layer_range(lc.layer);
        let width = hi - lo;
        if width == 0 {
            b_dets.push(1.0);
            continue;
        }
        let b = gram(&lc.rows, width);
        let d = det(&b);
        if d <= 0.0 {
            return Err(PoppError::SingularFrame);
        }
        b_dets.push(d);
    }
    let det_frame = float::abs(det(&frame.frame_matrix));
    if det_frame == 0.0 {
        return Err(PoppError::SingularFrame);
    }
    let prod: f64 = b_dets.iter().product();
    let density = 1.0 / (det_frame * float::sqrt(prod));
    Ok(PoppResult {
        density,
        b_dets,
        coeffs,
        frame,
    })
}
