//! Reciprocal form diagram and member forces.
//!
//! One dual vertex per cell and one dual edge per face, parallel to the face
//! normal. The signed dual lengths `q†` come from the kernel of the dual
//! closure matrix: `q† = (Id - E†⁺ E†) ξ` with `ξ` uniform.

use std::collections::VecDeque;

use nalgebra::{DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::equilibrium::{dual_equilibrium, EdgeKind};
use crate::error::{Error, Result};
use crate::face_area::{all_face_areas, signed_area, build_area_matrix};
use crate::model::{FaceDocument, PolyhedralComplex};
use crate::numerics::pseudo_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForceSign {
    #[serde(rename = "c")]
    Compression,
    #[serde(rename = "t")]
    Tension,
    #[serde(rename = "0")]
    Zero,
}

impl ForceSign {
    pub fn flipped(self) -> Self {
        match self {
            ForceSign::Compression => ForceSign::Tension,
            ForceSign::Tension => ForceSign::Compression,
            ForceSign::Zero => ForceSign::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberForce {
    pub face: usize,
    pub magnitude: f64,
    pub sign: ForceSign,
    /// Signed area of the face the magnitude was taken from.
    #[serde(default)]
    pub area: f64,
    /// Zero-force member; may be dropped from the form.
    #[serde(default)]
    pub removable: bool,
}

/// Dual edge of one primal face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualEdge {
    pub face: usize,
    pub from: usize,
    pub to: usize,
    /// Primal face normal; `to - from = length * direction`.
    pub direction: Vector3<f64>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualDiagram {
    pub vertices: Vec<Point3<f64>>,
    /// Dual vertex of every cell.
    pub cell_vertex: Vec<usize>,
    pub edges: Vec<DualEdge>,
    pub members: Vec<MemberForce>,
    /// Signs before any change of the primal.
    pub initial_signs: Vec<ForceSign>,
    /// Face areas the dual was built from.
    pub initial_areas: Vec<f64>,
    pub q_dual: DVector<f64>,
    /// `|E† q†|`.
    pub residual: f64,
    /// Largest mismatch of a dual edge reached by two traversal paths,
    /// relative to the largest `|q†|`.
    pub closure_error: f64,
    pub boundary_edges: Vec<usize>,
    /// Closed dual faces: `(primal edge, [(face, ±1)])` around internal edges.
    pub faces: Vec<(usize, Vec<(usize, f64)>)>,
}

/// Builds the dual of `complex` with every member in compression.
pub fn build_dual(complex: &PolyhedralComplex, cfg: &SolverConfig) -> Result<DualDiagram> {
    let eq = dual_equilibrium(complex)?;
    let f = complex.face_count();
    let xi = DVector::from_element(f, cfg.xi_scale);
    let (_, projector) = pseudo_inverse(&eq.matrix, cfg.rcond);
    let q_dual = &projector * &xi;
    if q_dual.amax() <= 1e-12 * cfg.xi_scale.abs() || f == 0 {
        return Err(Error::DegenerateDual);
    }
    let residual = (&eq.matrix * &q_dual).norm();

    let offset = |face: usize| complex.face(face).normal * q_dual[face];
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut cell_pos: Vec<Option<Point3<f64>>> = vec![None; complex.cells().len()];
    let mut cell_vertex = vec![usize::MAX; complex.cells().len()];
    let scale = q_dual.amax();
    let mut closure_error: f64 = 0.0;
    for root in 0..complex.cells().len() {
        if cell_pos[root].is_some() {
            continue;
        }
        cell_pos[root] = Some(Point3::origin());
        let mut queue = VecDeque::from([root]);
        while let Some(c) = queue.pop_front() {
            let p = cell_pos[c].expect("queued cells are placed");
            for &(face, side) in &complex.cells()[c].face_loop {
                let target = p + offset(face) * side.factor();
                for &(other, _) in complex.face_cells(face) {
                    if other == c {
                        continue;
                    }
                    match cell_pos[other] {
                        None => {
                            cell_pos[other] = Some(target);
                            queue.push_back(other);
                        }
                        Some(existing) => {
                            closure_error = closure_error.max((existing - target).norm() / scale);
                        }
                    }
                }
            }
        }
    }
    for (c, p) in cell_pos.iter().enumerate() {
        cell_vertex[c] = vertices.len();
        vertices.push(p.expect("every cell placed"));
    }
    if closure_error > cfg.tol_closure {
        return Err(Error::ClosureFailure {
            error: closure_error,
            allowed: cfg.tol_closure,
        });
    }

    let mut edges = Vec::with_capacity(f);
    for face in 0..f {
        let cells = complex.face_cells(face);
        let inner = cells.iter().find(|(_, s)| s.factor() > 0.0).map(|&(c, _)| c);
        let outer = cells.iter().find(|(_, s)| s.factor() < 0.0).map(|&(c, _)| c);
        let d = offset(face);
        let (from, to) = match (inner, outer) {
            (Some(a), Some(b)) => (cell_vertex[a], cell_vertex[b]),
            (Some(a), None) => {
                vertices.push(vertices[cell_vertex[a]] + d);
                (cell_vertex[a], vertices.len() - 1)
            }
            (None, Some(b)) => {
                vertices.push(vertices[cell_vertex[b]] - d);
                (vertices.len() - 1, cell_vertex[b])
            }
            (None, None) => {
                vertices.push(Point3::origin());
                vertices.push(Point3::from(d));
                (vertices.len() - 2, vertices.len() - 1)
            }
        };
        edges.push(DualEdge {
            face,
            from,
            to,
            direction: complex.face(face).normal,
            length: q_dual[face],
        });
    }

    let initial_areas = all_face_areas(complex, complex.lengths())?;
    let initial_signs = vec![ForceSign::Compression; f];
    let faces = eq
        .fans
        .iter()
        .filter(|fan| fan.kind == EdgeKind::Internal)
        .map(|fan| (fan.edge, fan.faces.clone()))
        .collect();
    let mut dual = DualDiagram {
        vertices,
        cell_vertex,
        edges,
        members: Vec::new(),
        initial_signs,
        initial_areas,
        q_dual,
        residual,
        closure_error,
        boundary_edges: eq.boundary_edges(),
        faces,
    };
    dual.members = members_for(&dual, complex, cfg)?;
    Ok(dual)
}

impl DualDiagram {
    /// Replaces the baseline signs and re-derives the members.
    pub fn with_initial_signs(
        mut self,
        signs: Vec<ForceSign>,
        complex: &PolyhedralComplex,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        if signs.len() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "{} initial signs for {} members",
                signs.len(),
                self.edges.len()
            )));
        }
        self.initial_signs = signs;
        self.members = members_for(&self, complex, cfg)?;
        Ok(self)
    }

    /// Largest angle defect `|d × n|` of a dual edge against its face normal.
    pub fn parallelism_error(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let v = self.vertices[e.to] - self.vertices[e.from];
                let len = v.norm();
                if len == 0.0 {
                    0.0
                } else {
                    (v / len).cross(&e.direction).norm()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Exportable form: mesh document plus the member table.
    pub fn to_document(&self) -> DualDocument {
        DualDocument {
            vertices: self.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
            edges: self.edges.iter().map(|e| [e.from, e.to]).collect(),
            faces: self
                .faces
                .iter()
                .map(|(_, loop_)| FaceDocument {
                    edges: loop_
                        .iter()
                        .map(|&(f, s)| (f, if s > 0.0 { 1 } else { -1 }))
                        .collect(),
                    normal: None,
                })
                .collect(),
            cells: Vec::new(),
            members: self.members.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualDocument {
    pub vertices: Vec<[f64; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<FaceDocument>,
    pub cells: Vec<crate::model::CellDocument>,
    pub members: Vec<MemberForce>,
}

fn members_for(dual: &DualDiagram, complex: &PolyhedralComplex, cfg: &SolverConfig) -> Result<Vec<MemberForce>> {
    let lengths = complex.lengths();
    (0..complex.face_count())
        .map(|f| {
            let area = signed_area(&build_area_matrix(complex, f)?, &complex.face_lengths(f, lengths))?;
            let perimeter = complex.face_perimeter(f, lengths);
            let zero = area.abs() <= cfg.tol_zero * perimeter * perimeter;
            let initial = dual.initial_areas[f];
            let sign = if zero {
                ForceSign::Zero
            } else if (area < 0.0) != (initial < 0.0) {
                dual.initial_signs[f].flipped()
            } else {
                dual.initial_signs[f]
            };
            Ok(MemberForce {
                face: f,
                magnitude: if zero { 0.0 } else { area.abs() },
                sign,
                area,
                removable: zero,
            })
        })
        .collect()
}

/// Re-signs and re-scales the members of `dual` for the current primal.
/// The dual geometry itself is kept.
pub fn update_member_forces(
    current: &PolyhedralComplex,
    dual: &DualDiagram,
    cfg: &SolverConfig,
) -> Result<DualDiagram> {
    if current.face_count() != dual.edges.len() {
        return Err(Error::Dimension(format!(
            "dual has {} members, complex has {} faces",
            dual.edges.len(),
            current.face_count()
        )));
    }
    let mut out = dual.clone();
    out.members = members_for(dual, current, cfg)?;
    Ok(out)
}

/// `Σ side · A_f · n_f` for every cell.
pub fn cell_equilibrium_residuals(complex: &PolyhedralComplex) -> Result<Vec<Vector3<f64>>> {
    let areas = all_face_areas(complex, complex.lengths())?;
    Ok(complex
        .cells()
        .iter()
        .map(|cell| {
            cell.face_loop
                .iter()
                .map(|&(f, side)| complex.face(f).normal * areas[f] * side.factor())
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::equilibrium::dual_equilibrium;
    use crate::fixtures;
    use crate::model::{load_complex, MeshDocument};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn load(doc: MeshDocument) -> PolyhedralComplex {
        load_complex(&doc, &cfg()).unwrap()
    }

    fn check(c: &PolyhedralComplex) -> DualDiagram {
        let d = build_dual(c, &cfg()).unwrap();
        let e = dual_equilibrium(c).unwrap().matrix;
        assert!((&e * &d.q_dual).norm() < 1e-8 * d.q_dual.norm());
        assert!(d.parallelism_error() < 1e-9);
        assert!(d.closure_error < 1e-9);
        d
    }

    #[test]
    fn cube_dual_is_a_six_member_node() {
        let c = load(fixtures::unit_cube());
        let d = check(&c);
        assert_eq!(d.edges.len(), 6);
        assert_eq!(d.vertices.len(), 7);
        assert!(d.members.iter().all(|m| m.sign == ForceSign::Compression));
        for e in &d.edges {
            assert_eq!(e.from, d.cell_vertex[0]);
            assert!((d.q_dual[e.face] - 1.0).abs() < 1e-12);
        }
        assert_eq!(d.boundary_edges.len(), 12);
        assert!(d.faces.is_empty());
    }

    #[test]
    fn two_cell_prism_has_one_internal_member() {
        let c = load(fixtures::two_cell_prism());
        let d = check(&c);
        let internal: Vec<_> = d
            .edges
            .iter()
            .filter(|e| c.face_cells(e.face).len() == 2)
            .collect();
        assert_eq!(internal.len(), 1);
        assert_eq!(internal[0].face, 4);
        let ends = [internal[0].from, internal[0].to];
        assert!(ends.contains(&d.cell_vertex[0]) && ends.contains(&d.cell_vertex[1]));
    }

    #[test]
    fn split_tetrahedron_dual_closes_its_faces() {
        let c = load(fixtures::split_tetrahedron());
        let d = check(&c);
        assert_eq!(d.faces.len(), 4);
        for (_, loop_) in &d.faces {
            let sum: Vector3<f64> = loop_
                .iter()
                .map(|&(f, s)| {
                    let e = &d.edges[f];
                    (d.vertices[e.to] - d.vertices[e.from]) * s
                })
                .sum();
            assert!(sum.norm() < 1e-9);
        }
        for &cv in &d.cell_vertex {
            assert!(cv < 4);
        }
        assert!(d.q_dual.iter().all(|&x| x.abs() > 1e-6));
    }

    #[test]
    fn untouched_complex_keeps_members() {
        let c = load(fixtures::pentagon_prism(2.0));
        let d = build_dual(&c, &cfg()).unwrap();
        let u = update_member_forces(&c, &d, &cfg()).unwrap();
        for (m, a) in u.members.iter().zip(&d.initial_areas) {
            assert_eq!(m.sign, ForceSign::Compression);
            assert_eq!(m.magnitude, a.abs());
        }
    }

    #[test]
    fn sign_flip_and_zero() {
        let c = load(fixtures::pentagon_prism(2.0));
        let d = build_dual(&c, &cfg()).unwrap();
        let zeroed = c.with_lengths(&DVector::zeros(c.edge_count()), &cfg()).unwrap();
        let u = update_member_forces(&zeroed, &d, &cfg()).unwrap();
        assert!(u.members.iter().all(|m| m.sign == ForceSign::Zero && m.removable));

        let negated = c.with_lengths(&(-c.lengths()), &cfg()).unwrap();
        // Areas are quadratic in q: negating every length keeps every sign.
        let u = update_member_forces(&negated, &d, &cfg()).unwrap();
        assert!(u.members.iter().all(|m| m.sign == ForceSign::Compression));

        let tension = d.clone().with_initial_signs(vec![ForceSign::Tension; 7], &c, &cfg()).unwrap();
        assert!(tension.members.iter().all(|m| m.sign == ForceSign::Tension));
    }

    #[test]
    fn cells_are_in_equilibrium() {
        for doc in [
            fixtures::unit_cube(),
            fixtures::tetrahedron(),
            fixtures::two_cell_prism(),
            fixtures::split_tetrahedron(),
            fixtures::pentagon_prism(3.0),
        ] {
            let c = load(doc);
            for r in cell_equilibrium_residuals(&c).unwrap() {
                assert!(r.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn document_serializes_member_signs() {
        let c = load(fixtures::unit_cube());
        let d = build_dual(&c, &cfg()).unwrap();
        let json = serde_json::to_value(d.to_document()).unwrap();
        assert_eq!(json["members"][0]["sign"], "c");
        assert_eq!(json["edges"].as_array().unwrap().len(), 6);
    }
}
