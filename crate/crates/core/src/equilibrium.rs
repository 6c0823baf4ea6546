//! Homogeneous closure equations of faces, of the whole polyhedron and of
//! the reciprocal diagram.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Orientation, PolyhedralComplex};

/// In-plane closure matrix of one face: `2 x k`, columns in loop order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceEquilibrium {
    pub face: usize,
    pub matrix: DMatrix<f64>,
    /// Orthonormal in-plane basis: first loop direction, then `n × ` it.
    pub basis: [Vector3<f64>; 2],
}

/// Closure of every face in global coordinates: `3f x e`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEquilibrium {
    pub matrix: DMatrix<f64>,
}

/// Classification of a primal edge for the reciprocal diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Cells surround the edge; its dual face is a closed polygon.
    Internal,
    /// The fan of faces around the edge opens to the exterior.
    Boundary,
}

/// Faces around one primal edge, in angular order about its direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFan {
    pub edge: usize,
    pub kind: EdgeKind,
    /// `(face, sign)`: crossing the face in traversal order moves the dual
    /// point by `sign * q† * n_face`.
    pub faces: Vec<(usize, f64)>,
}

/// Closure of the dual faces: `3e x f`, one 3-row block per primal edge.
/// Blocks of boundary edges are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEquilibrium {
    pub matrix: DMatrix<f64>,
    pub fans: Vec<EdgeFan>,
}

impl DualEquilibrium {
    pub fn boundary_edges(&self) -> Vec<usize> {
        self.fans
            .iter()
            .filter(|f| f.kind == EdgeKind::Boundary)
            .map(|f| f.edge)
            .collect()
    }
}

/// Closure of face `f` in its own plane.
pub fn face_equilibrium(complex: &PolyhedralComplex, f: usize) -> Result<FaceEquilibrium> {
    let face = complex.check_face(f)?;
    let dirs = complex.face_directions(f);
    let b1 = dirs[0];
    let b2 = face.normal.cross(&b1);
    if (b2.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::DegenerateFace { face: f });
    }
    let k = dirs.len();
    let mut matrix = DMatrix::zeros(2, k);
    for (i, d) in dirs.iter().enumerate() {
        matrix[(0, i)] = d.dot(&b1);
        matrix[(1, i)] = d.dot(&b2);
    }
    Ok(FaceEquilibrium {
        face: f,
        matrix,
        basis: [b1, b2],
    })
}

/// Stacked 3-row closure blocks of every face over all edges.
pub fn global_equilibrium(complex: &PolyhedralComplex) -> GlobalEquilibrium {
    let mut matrix = DMatrix::zeros(3 * complex.face_count(), complex.edge_count());
    for (f, face) in complex.faces().iter().enumerate() {
        for &(e, o) in &face.edge_loop {
            let d = complex.direction(e) * o.factor();
            for r in 0..3 {
                matrix[(3 * f + r, e)] += d[r];
            }
        }
    }
    GlobalEquilibrium { matrix }
}

/// Closure of the dual polygons around every primal edge.
///
/// Attached faces are sorted by dihedral angle about the edge; the sector
/// between consecutive faces belongs to the cell that contains both and lies
/// on that side of them. An edge whose sectors are all cells is internal.
pub fn dual_equilibrium(complex: &PolyhedralComplex) -> Result<DualEquilibrium> {
    let mut matrix = DMatrix::zeros(3 * complex.edge_count(), complex.face_count());
    let mut fans = Vec::with_capacity(complex.edge_count());
    for e in 0..complex.edge_count() {
        let fan = edge_fan(complex, e)?;
        if fan.kind == EdgeKind::Internal {
            for &(f, sign) in &fan.faces {
                let n = complex.face(f).normal;
                for r in 0..3 {
                    matrix[(3 * e + r, f)] += sign * n[r];
                }
            }
        }
        fans.push(fan);
    }
    Ok(DualEquilibrium { matrix, fans })
}

fn edge_fan(complex: &PolyhedralComplex, e: usize) -> Result<EdgeFan> {
    let axis = complex.direction(e);
    let [a, _] = complex.edges()[e];
    let origin = complex.vertices()[a];
    let attached = complex.edge_faces(e);
    if attached.is_empty() {
        return Ok(EdgeFan {
            edge: e,
            kind: EdgeKind::Boundary,
            faces: Vec::new(),
        });
    }

    // In-plane unit vector from the edge into each face.
    let mut spokes = Vec::with_capacity(attached.len());
    for &(f, _) in &attached {
        let n = complex.face(f).normal;
        let mut w = n.cross(&axis);
        let to_face = complex.face_centroid(f) - origin;
        if w.dot(&to_face) < 0.0 {
            w = -w;
        }
        spokes.push((f, w));
    }
    let reference = spokes[0].1;
    let angle = |w: &Vector3<f64>| {
        let a = axis.cross(&reference).dot(w).atan2(reference.dot(w));
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    };
    spokes.sort_by(|x, y| angle(&x.1).total_cmp(&angle(&y.1)));

    // Cell in the sector swept counter-clockwise (about the axis) from
    // spoke i to spoke i+1: its outward normal of face i points backwards.
    let m = spokes.len();
    let mut sector_cells: Vec<Option<usize>> = Vec::with_capacity(m);
    for i in 0..m {
        let (fi, wi) = spokes[i];
        let (fj, _) = spokes[(i + 1) % m];
        let ahead = axis.cross(&wi);
        let n = complex.face(fi).normal;
        let candidates: Vec<usize> = complex
            .face_cells(fi)
            .iter()
            .filter(|&&(c, side)| {
                side.factor() * n.dot(&ahead) < 0.0
                    && complex.face_cells(fj).iter().any(|&(cj, _)| cj == c)
            })
            .map(|&(c, _)| c)
            .collect();
        if candidates.len() > 1 {
            return Err(Error::FanOrder {
                edge: e,
                reason: format!("faces {fi} and {fj} share more than one cell"),
            });
        }
        sector_cells.push(candidates.first().copied());
    }

    let kind = if sector_cells.iter().all(Option::is_some) {
        EdgeKind::Internal
    } else {
        EdgeKind::Boundary
    };

    // Crossing spoke i+1 leaves the cell of sector i.
    let faces = (0..m)
        .map(|i| {
            let (f, _) = spokes[(i + 1) % m];
            let sign = sector_cells[i]
                .and_then(|c| {
                    complex
                        .face_cells(f)
                        .iter()
                        .find(|&&(cell, _)| cell == c)
                        .map(|&(_, side)| side)
                })
                .unwrap_or(Orientation::Forward)
                .factor();
            (f, sign)
        })
        .collect();
    Ok(EdgeFan { edge: e, kind, faces })
}
