//! Quadratic area form of a planar face.
//!
//! For a face with unit edge directions `u_i` (in loop order) and normal
//! `n`, the signed area is `qᵀ M q / (2k)` where `q` holds the signed edge
//! lengths and `M` depends on the directions only. Row `i` of the raw matrix
//! carries `(k - m - 1) η(i, i+m)` at cyclic offset `m`, with
//! `η(i, j) = (u_i × u_j) · n`; the stored matrix is its symmetric part.
//!
//! Self-intersecting loops need no special treatment: the form yields the
//! net signed area of the enclosed regions.

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PolyhedralComplex;

/// Normal coordinates below this are skipped when dividing out `n`.
const NORMAL_COORD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaMatrix {
    pub face_index: usize,
    /// Symmetric `k x k` matrix of the form.
    pub matrix: DMatrix<f64>,
    /// The matrix before symmetrization.
    pub raw: DMatrix<f64>,
    /// `η(i, j)`, dimensionless.
    pub eta: DMatrix<f64>,
    pub vertex_count: usize,
}

impl AreaMatrix {
    /// `qᵀ M q / (2k)`.
    pub fn signed_area(&self, q: &DVector<f64>) -> Result<f64> {
        signed_area(self, q)
    }
}

/// Intermediate quantities of the area derivation, for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivationTrace {
    /// `μ(i, j) = (e_i × e_j) · n`, area units.
    pub mu: DMatrix<f64>,
    /// `h(i, j)`: signed height of vertex `j` over the line of edge `i`.
    pub h: DMatrix<f64>,
    /// Mean height of the vertices over edge `i`, i.e. the height of the
    /// vertex centroid.
    pub mean_heights: DVector<f64>,
    pub centroid: Point3<f64>,
}

/// Area matrix of face `f` of a complex.
pub fn build_area_matrix(complex: &PolyhedralComplex, f: usize) -> Result<AreaMatrix> {
    let face = complex.check_face(f)?;
    let mut m = area_matrix_from_directions(&complex.face_directions(f), &face.normal)?;
    m.face_index = f;
    Ok(m)
}

/// Area matrix from directed unit edge directions and a unit normal.
pub fn area_matrix_from_directions(dirs: &[Vector3<f64>], normal: &Vector3<f64>) -> Result<AreaMatrix> {
    let k = dirs.len();
    if k < 3 {
        return Err(Error::TooFewEdges { face: 0, found: k });
    }
    // η is the cross product divided by n, coordinate-wise on the first
    // usable coordinate; for in-plane directions every usable coordinate
    // gives the same ratio.
    let coord = (0..3)
        .find(|&c| normal[c].abs() > NORMAL_COORD_EPS)
        .ok_or(Error::DegenerateFace { face: 0 })?;

    let mut eta = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                eta[(i, j)] = dirs[i].cross(&dirs[j])[coord] / normal[coord];
            }
        }
    }
    let mut raw = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let offset = (j + k - i) % k;
            if offset != 0 {
                raw[(i, j)] = (k - offset - 1) as f64 * eta[(i, j)];
            }
        }
    }
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(AreaMatrix {
        face_index: 0,
        matrix,
        raw,
        eta,
        vertex_count: k,
    })
}

/// Signed area `qᵀ M q / (2k)` relative to the face normal.
pub fn signed_area(m: &AreaMatrix, q: &DVector<f64>) -> Result<f64> {
    let k = m.vertex_count;
    if q.len() != k {
        return Err(Error::Dimension(format!(
            "face {} has {k} edges, got {} lengths",
            m.face_index,
            q.len()
        )));
    }
    Ok(q.dot(&(&m.matrix * q)) / (2.0 * k as f64))
}

/// Signed area of face `f` for a global length vector.
pub fn face_signed_area(complex: &PolyhedralComplex, f: usize, lengths: &DVector<f64>) -> Result<f64> {
    let m = build_area_matrix(complex, f)?;
    signed_area(&m, &complex.face_lengths(f, lengths))
}

/// Signed areas of every face.
pub fn all_face_areas(complex: &PolyhedralComplex, lengths: &DVector<f64>) -> Result<Vec<f64>> {
    (0..complex.face_count())
        .map(|f| face_signed_area(complex, f, lengths))
        .collect()
}

/// Derivation quantities for a face loop with directions `dirs`, signed
/// lengths `q` and first vertex `start`.
pub fn derivation_trace(
    dirs: &[Vector3<f64>],
    normal: &Vector3<f64>,
    q: &DVector<f64>,
    start: Point3<f64>,
) -> Result<DerivationTrace> {
    let k = dirs.len();
    if q.len() != k {
        return Err(Error::Dimension(format!("{k} directions, {} lengths", q.len())));
    }
    let am = area_matrix_from_directions(dirs, normal)?;
    let mut mu = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            mu[(i, j)] = am.eta[(i, j)] * q[i] * q[j];
        }
    }
    // h(i, i+l) = Σ_{1 <= m < l} η(i, i+m) q_{i+m}
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        let mut acc = 0.0;
        for l in 2..k {
            let j = (i + l - 1) % k;
            acc += am.eta[(i, j)] * q[j];
            h[(i, (i + l) % k)] = acc;
        }
    }
    let mean_heights = DVector::from_iterator(k, (0..k).map(|i| h.row(i).sum() / k as f64));
    let mut p = start;
    let mut sum = Vector3::zeros();
    for i in 0..k {
        sum += p.coords;
        p += dirs[i] * q[i];
    }
    Ok(DerivationTrace {
        mu,
        h,
        mean_heights,
        centroid: Point3::from(sum / k as f64),
    })
}
