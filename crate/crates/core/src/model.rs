//! Polyhedral cell complex of the primal (force) diagram.
//!
//! Edges carry one global reference direction; faces reference edges with an
//! orientation so an edge shared by several faces keeps a single signed
//! length. Lengths are signed: a negative length means the realized edge runs
//! against its reference direction.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DVector, Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::{RootPolicy, SolverConfig};
use crate::error::{Error, Result};

const COLLINEAR_EPS: f64 = 1e-9;

/// Traversal of an edge inside a face loop, or of a face relative to a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Forward,
    Reverse,
}

impl Orientation {
    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Orientation::Forward),
            -1 => Some(Orientation::Reverse),
            _ => None,
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Orientation::Forward => 1,
            Orientation::Reverse => -1,
        }
    }

    pub fn factor(self) -> f64 {
        self.sign() as f64
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }
}

/// JSON mesh document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<[f64; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<FaceDocument>,
    #[serde(default)]
    pub cells: Vec<CellDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceDocument {
    /// `[edge_index, ±1]` pairs in loop order.
    pub edges: Vec<(usize, i64)>,
    /// Optional normal override. Only its sign relative to the loop-derived
    /// normal is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDocument {
    /// `[face_index, ±1]`; `+1` when the face normal points out of the cell.
    pub faces: Vec<(usize, i64)>,
}

/// One area target of a constraint script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTarget {
    pub face: usize,
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<RootPolicy>,
}

/// Constraint document: fixed edge lengths, face area targets and the order
/// in which the targets are processed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintScript {
    #[serde(default)]
    pub fixed_edges: BTreeMap<usize, f64>,
    #[serde(default)]
    pub face_targets: Vec<FaceTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

impl ConstraintScript {
    /// Targets in processing order: the explicit `order` list when present,
    /// otherwise document order.
    pub fn ordered_targets(&self) -> Result<Vec<FaceTarget>> {
        let Some(order) = &self.order else {
            return Ok(self.face_targets.clone());
        };
        order
            .iter()
            .map(|&face| {
                self.face_targets
                    .iter()
                    .find(|t| t.face == face)
                    .cloned()
                    .ok_or_else(|| {
                        Error::InvalidDocument(format!("order lists face {face} without a target"))
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub edge_loop: Vec<(usize, Orientation)>,
    /// Unit normal; the sign of every signed area refers to it.
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// `Forward` when the face normal points out of this cell.
    pub face_loop: Vec<(usize, Orientation)>,
}

/// Per-edge unit reference directions and signed lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGeometry {
    pub directions: Vec<Vector3<f64>>,
    pub lengths: DVector<f64>,
}

/// Vertex positions realized from a length vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub vertices: Vec<Point3<f64>>,
    /// Largest edge mismatch `|p_b - p_a - q u|`, relative to the largest |q|.
    pub closure_error: f64,
}

/// The primal diagram. Immutable; updates return new instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralComplex {
    vertices: Vec<Point3<f64>>,
    edges: Vec<[usize; 2]>,
    faces: Vec<Face>,
    cells: Vec<Cell>,
    geometry: EdgeGeometry,
    /// Loop-derived normal was negated by the document.
    flipped_normals: Vec<bool>,
    /// Cells bounded by each face, with the face's side in that cell.
    face_cells: Vec<Vec<(usize, Orientation)>>,
}

/// Parses and validates a mesh document.
pub fn load_complex(doc: &MeshDocument, cfg: &SolverConfig) -> Result<PolyhedralComplex> {
    PolyhedralComplex::from_document(doc, cfg)
}

impl PolyhedralComplex {
    pub fn from_json(text: &str, cfg: &SolverConfig) -> Result<Self> {
        let doc: MeshDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidDocument(e.to_string()))?;
        Self::from_document(&doc, cfg)
    }

    pub fn from_document(doc: &MeshDocument, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let vertices: Vec<Point3<f64>> = doc
            .vertices
            .iter()
            .map(|v| Point3::new(v[0], v[1], v[2]))
            .collect();
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidDocument("non-finite vertex coordinate".into()));
        }

        let mut directions = Vec::with_capacity(doc.edges.len());
        let mut lengths = Vec::with_capacity(doc.edges.len());
        for (e, &[a, b]) in doc.edges.iter().enumerate() {
            for v in [a, b] {
                if v >= vertices.len() {
                    return Err(Error::DanglingIndex {
                        kind: "vertex",
                        index: v,
                        owner: format!("edge {e}"),
                    });
                }
            }
            let d = vertices[b] - vertices[a];
            let len = d.norm();
            if len == 0.0 {
                return Err(Error::ZeroLengthEdge { edge: e });
            }
            directions.push(d / len);
            lengths.push(len);
        }
        let geometry = EdgeGeometry {
            directions,
            lengths: DVector::from_vec(lengths),
        };

        let mut faces = Vec::with_capacity(doc.faces.len());
        let mut flipped_normals = Vec::with_capacity(doc.faces.len());
        for (f, fd) in doc.faces.iter().enumerate() {
            let (face, flipped) = build_face(f, fd, &vertices, &doc.edges, &geometry, cfg)?;
            faces.push(face);
            flipped_normals.push(flipped);
        }

        let mut cells = Vec::with_capacity(doc.cells.len());
        let mut face_cells = vec![Vec::new(); faces.len()];
        for (c, cd) in doc.cells.iter().enumerate() {
            let mut face_loop = Vec::with_capacity(cd.faces.len());
            for &(f, side) in &cd.faces {
                if f >= faces.len() {
                    return Err(Error::DanglingIndex {
                        kind: "face",
                        index: f,
                        owner: format!("cell {c}"),
                    });
                }
                let side = Orientation::from_sign(side).ok_or_else(|| {
                    Error::InvalidDocument(format!("cell {c}: side of face {f} must be +1 or -1"))
                })?;
                face_loop.push((f, side));
                face_cells[f].push((c, side));
            }
            let cell = Cell { face_loop };
            check_cell(c, &cell, &faces)?;
            cells.push(cell);
        }
        for (f, owners) in face_cells.iter().enumerate() {
            if owners.len() > 2 {
                return Err(Error::NonManifoldFace {
                    face: f,
                    count: owners.len(),
                });
            }
            if owners.len() == 2 && owners[0].1 == owners[1].1 {
                return Err(Error::InvalidDocument(format!(
                    "face {f}: its two cells must lie on opposite sides"
                )));
            }
        }

        Ok(Self {
            vertices,
            edges: doc.edges.clone(),
            faces,
            cells,
            geometry,
            flipped_normals,
            face_cells,
        })
    }

    /// Exports the current geometry in the document schema.
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            vertices: self.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
            edges: self.edges.clone(),
            faces: self
                .faces
                .iter()
                .zip(&self.flipped_normals)
                .map(|(face, &flipped)| FaceDocument {
                    edges: face.edge_loop.iter().map(|&(e, o)| (e, o.sign())).collect(),
                    normal: flipped.then(|| [face.normal.x, face.normal.y, face.normal.z]),
                })
                .collect(),
            cells: self
                .cells
                .iter()
                .map(|cell| CellDocument {
                    faces: cell.face_loop.iter().map(|&(f, o)| (f, o.sign())).collect(),
                })
                .collect(),
        }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn geometry(&self) -> &EdgeGeometry {
        &self.geometry
    }

    pub fn lengths(&self) -> &DVector<f64> {
        &self.geometry.lengths
    }

    pub fn direction(&self, edge: usize) -> Vector3<f64> {
        self.geometry.directions[edge]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Cells bounded by face `f` with the face's side in each.
    pub fn face_cells(&self, f: usize) -> &[(usize, Orientation)] {
        &self.face_cells[f]
    }

    pub fn check_face(&self, f: usize) -> Result<&Face> {
        self.faces.get(f).ok_or_else(|| Error::DanglingIndex {
            kind: "face",
            index: f,
            owner: "request".into(),
        })
    }

    /// Global edge ids of a face, in loop order.
    pub fn face_edge_ids(&self, f: usize) -> Vec<usize> {
        self.faces[f].edge_loop.iter().map(|&(e, _)| e).collect()
    }

    /// Unit directions of a face's edges as traversed by its loop.
    pub fn face_directions(&self, f: usize) -> Vec<Vector3<f64>> {
        self.faces[f]
            .edge_loop
            .iter()
            .map(|&(e, o)| self.geometry.directions[e] * o.factor())
            .collect()
    }

    /// Restriction of a global length vector to a face, in loop order.
    pub fn face_lengths(&self, f: usize, lengths: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.faces[f].edge_loop.len(),
            self.faces[f].edge_loop.iter().map(|&(e, _)| lengths[e]),
        )
    }

    /// Start vertex of every loop position.
    pub fn face_vertices(&self, f: usize) -> Vec<usize> {
        self.faces[f]
            .edge_loop
            .iter()
            .map(|&(e, o)| match o {
                Orientation::Forward => self.edges[e][0],
                Orientation::Reverse => self.edges[e][1],
            })
            .collect()
    }

    pub fn face_perimeter(&self, f: usize, lengths: &DVector<f64>) -> f64 {
        self.faces[f].edge_loop.iter().map(|&(e, _)| lengths[e].abs()).sum()
    }

    /// Faces containing `edge`, each with the loop position of the edge.
    pub fn edge_faces(&self, edge: usize) -> Vec<(usize, usize)> {
        self.faces
            .iter()
            .enumerate()
            .filter_map(|(f, face)| {
                face.edge_loop
                    .iter()
                    .position(|&(e, _)| e == edge)
                    .map(|pos| (f, pos))
            })
            .collect()
    }

    /// Same complex with one face normal negated. Signed areas of that face
    /// change sign; nothing else does.
    pub fn with_flipped_normal(&self, f: usize) -> Self {
        let mut out = self.clone();
        out.faces[f].normal = -out.faces[f].normal;
        out.flipped_normals[f] = !out.flipped_normals[f];
        out
    }

    /// Realizes vertex positions from signed edge lengths.
    ///
    /// Breadth-first from the lowest-index vertex of every connected
    /// component, which keeps its current position; `p_b = p_a + q u`.
    pub fn reconstruct_vertices(
        &self,
        lengths: &DVector<f64>,
        cfg: &SolverConfig,
    ) -> Result<Reconstruction> {
        if lengths.len() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "expected {} edge lengths, got {}",
                self.edges.len(),
                lengths.len()
            )));
        }
        let n = self.vertices.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            incident[a].push(e);
            incident[b].push(e);
        }

        let mut placed: Vec<Option<Point3<f64>>> = vec![None; n];
        let mut queue = VecDeque::new();
        for root in 0..n {
            if placed[root].is_some() {
                continue;
            }
            placed[root] = Some(self.vertices[root]);
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                let p = placed[v].expect("queued vertices are placed");
                for &e in &incident[v] {
                    let [a, b] = self.edges[e];
                    let step = self.geometry.directions[e] * lengths[e];
                    let (other, pos) = if a == v { (b, p + step) } else { (a, p - step) };
                    if placed[other].is_none() {
                        placed[other] = Some(pos);
                        queue.push_back(other);
                    }
                }
            }
        }
        let vertices: Vec<Point3<f64>> = placed.into_iter().map(|p| p.expect("all placed")).collect();

        let scale = lengths.amax().max(f64::MIN_POSITIVE);
        let closure_error = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                (vertices[b] - vertices[a] - self.geometry.directions[e] * lengths[e]).norm()
            })
            .fold(0.0, f64::max)
            / scale;
        if closure_error > cfg.tol_closure {
            return Err(Error::ClosureFailure {
                error: closure_error,
                allowed: cfg.tol_closure,
            });
        }
        Ok(Reconstruction {
            vertices,
            closure_error,
        })
    }

    /// Same topology, directions and normals with new signed lengths.
    pub fn with_lengths(&self, lengths: &DVector<f64>, cfg: &SolverConfig) -> Result<Self> {
        let rec = self.reconstruct_vertices(lengths, cfg)?;
        let mut out = self.clone();
        out.vertices = rec.vertices;
        out.geometry.lengths = lengths.clone();
        Ok(out)
    }

    /// Area vector `(1/2) Σ p_i × p_{i+1}` of a face from its vertex positions.
    pub fn face_area_vector(&self, f: usize) -> Vector3<f64> {
        let ids = self.face_vertices(f);
        let mut acc = Vector3::zeros();
        for i in 0..ids.len() {
            let a = self.vertices[ids[i]].coords;
            let b = self.vertices[ids[(i + 1) % ids.len()]].coords;
            acc += a.cross(&b);
        }
        acc * 0.5
    }

    pub fn face_centroid(&self, f: usize) -> Point3<f64> {
        let ids = self.face_vertices(f);
        let sum: Vector3<f64> = ids.iter().map(|&v| self.vertices[v].coords).sum();
        Point3::from(sum / ids.len() as f64)
    }
}

fn build_face(
    f: usize,
    fd: &FaceDocument,
    vertices: &[Point3<f64>],
    edges: &[[usize; 2]],
    geometry: &EdgeGeometry,
    cfg: &SolverConfig,
) -> Result<(Face, bool)> {
    let k = fd.edges.len();
    if k < 3 {
        return Err(Error::TooFewEdges { face: f, found: k });
    }
    let mut edge_loop = Vec::with_capacity(k);
    for &(e, sign) in &fd.edges {
        if e >= edges.len() {
            return Err(Error::DanglingIndex {
                kind: "edge",
                index: e,
                owner: format!("face {f}"),
            });
        }
        let o = Orientation::from_sign(sign).ok_or_else(|| {
            Error::InvalidDocument(format!("face {f}: sign of edge {e} must be +1 or -1"))
        })?;
        if edge_loop.iter().any(|&(seen, _)| seen == e) {
            return Err(Error::InvalidDocument(format!("face {f}: edge {e} appears twice")));
        }
        edge_loop.push((e, o));
    }

    let ends = |(e, o): (usize, Orientation)| -> (usize, usize) {
        let [a, b] = edges[e];
        match o {
            Orientation::Forward => (a, b),
            Orientation::Reverse => (b, a),
        }
    };
    for i in 0..k {
        let next = (i + 1) % k;
        if ends(edge_loop[i]).1 != ends(edge_loop[next]).0 {
            return Err(Error::OpenFaceLoop {
                face: f,
                position: i,
                next,
            });
        }
    }

    let points: Vec<Point3<f64>> = edge_loop.iter().map(|&eo| vertices[ends(eo).0]).collect();
    let centroid = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / k as f64);
    let mut cov = Matrix3::zeros();
    for p in &points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let plane_normal = eig.eigenvectors.column(imin).into_owned();
    let deviation = points
        .iter()
        .map(|p| (p - centroid).dot(&plane_normal).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = points.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
    );
    let allowed = cfg.tol_planar * (hi - lo).norm();
    if deviation > allowed {
        return Err(Error::NonPlanarFace {
            face: f,
            deviation,
            allowed,
        });
    }

    let dirs: Vec<Vector3<f64>> = edge_loop
        .iter()
        .map(|&(e, o)| geometry.directions[e] * o.factor())
        .collect();
    let normal = (0..k)
        .map(|i| dirs[i].cross(&dirs[(i + 1) % k]))
        .find(|c| c.norm() > COLLINEAR_EPS)
        .map(|c| c.normalize())
        .ok_or(Error::DegenerateFace { face: f })?;

    let flipped = match fd.normal {
        Some(n) => {
            let n = Vector3::new(n[0], n[1], n[2]);
            let d = n.dot(&normal);
            if d.abs() < 0.5 * n.norm() {
                return Err(Error::InvalidDocument(format!(
                    "face {f}: normal override is not perpendicular to the face plane"
                )));
            }
            d < 0.0
        }
        None => false,
    };
    let normal = if flipped { -normal } else { normal };
    Ok((Face { edge_loop, normal }, flipped))
}

fn check_cell(c: usize, cell: &Cell, faces: &[Face]) -> Result<()> {
    // Per edge: every (side * loop sign) of member faces traversing it.
    let mut uses: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for &(f, side) in &cell.face_loop {
        for &(e, o) in &faces[f].edge_loop {
            uses.entry(e).or_default().push(side.sign() * o.sign());
        }
    }
    for (edge, signs) in uses {
        if signs.len() != 2 {
            return Err(Error::OpenCell {
                cell: c,
                edge,
                count: signs.len(),
            });
        }
        if signs[0] != -signs[1] {
            return Err(Error::InconsistentCellOrientation { cell: c, edge });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn unit_cube_loads_with_unit_lengths() {
        let cube = load_complex(&fixtures::unit_cube(), &cfg()).unwrap();
        assert_eq!(cube.edge_count(), 12);
        assert_eq!(cube.face_count(), 6);
        assert_eq!(cube.cells().len(), 1);
        for &q in cube.lengths().iter() {
            assert!((q - 1.0).abs() < 1e-15);
        }
        for face in cube.faces() {
            assert!((face.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normals_follow_first_two_edges() {
        let prism = load_complex(&fixtures::pentagon_prism(10.0), &cfg()).unwrap();
        for f in 0..prism.face_count() {
            let d = prism.face_directions(f);
            let n = d[0].cross(&d[1]);
            assert!(n.dot(&prism.face(f).normal) > 0.0);
            assert_eq!(prism.face_directions(f).len(), prism.face(f).edge_loop.len());
        }
        let pentagons = prism.faces().iter().filter(|f| f.edge_loop.len() == 5).count();
        assert_eq!(pentagons, 2);
    }

    #[test]
    fn lifted_vertex_is_reported_as_non_planar() {
        let mut doc = fixtures::unit_cube();
        // Lift one corner of the top face (z = 1) by ten times the tolerance.
        let allowed = cfg().tol_planar * 2f64.sqrt();
        let top_corner = doc
            .vertices
            .iter()
            .position(|v| *v == [1.0, 1.0, 1.0])
            .unwrap();
        doc.vertices[top_corner][2] += 10.0 * 4.0 * allowed;
        match load_complex(&doc, &cfg()) {
            Err(Error::NonPlanarFace { .. }) => {}
            other => panic!("expected planarity error, got {other:?}"),
        }
    }

    #[test]
    fn open_loop_and_dangling_indices_are_reported() {
        let mut doc = fixtures::unit_cube();
        doc.faces[2].edges.swap(0, 1);
        assert!(matches!(
            load_complex(&doc, &cfg()),
            Err(Error::OpenFaceLoop { face: 2, .. })
        ));

        let mut doc = fixtures::unit_cube();
        doc.faces[0].edges[0].0 = 99;
        assert!(matches!(
            load_complex(&doc, &cfg()),
            Err(Error::DanglingIndex { kind: "edge", index: 99, .. })
        ));

        let mut doc = fixtures::unit_cube();
        doc.cells[0].faces.pop();
        assert!(matches!(load_complex(&doc, &cfg()), Err(Error::OpenCell { .. })));
    }

    #[test]
    fn flipped_cell_side_is_rejected() {
        let mut doc = fixtures::unit_cube();
        doc.cells[0].faces[0].1 = -1;
        assert!(matches!(
            load_complex(&doc, &cfg()),
            Err(Error::InconsistentCellOrientation { .. })
        ));
    }

    #[test]
    fn doubled_lengths_scale_about_root() {
        let cube = load_complex(&fixtures::unit_cube(), &cfg()).unwrap();
        let rec = cube.reconstruct_vertices(&(cube.lengths() * 2.0), &cfg()).unwrap();
        let root = cube.vertices()[0];
        for (p, q) in cube.vertices().iter().zip(&rec.vertices) {
            let expected = root + (p - root) * 2.0;
            assert!((expected - q).norm() < 1e-12);
        }
    }

    #[test]
    fn original_lengths_reproduce_vertices() {
        for doc in [fixtures::unit_cube(), fixtures::pentagon_prism(7.0), fixtures::split_tetrahedron()] {
            let c = load_complex(&doc, &cfg()).unwrap();
            let rec = c.reconstruct_vertices(c.lengths(), &cfg()).unwrap();
            for (p, q) in c.vertices().iter().zip(&rec.vertices) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn inconsistent_lengths_fail_closure() {
        let cube = load_complex(&fixtures::unit_cube(), &cfg()).unwrap();
        let mut q = cube.lengths().clone();
        q[0] = 3.0;
        assert!(matches!(
            cube.reconstruct_vertices(&q, &cfg()),
            Err(Error::ClosureFailure { .. })
        ));
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let prism = load_complex(&fixtures::pentagon_prism(3.0), &cfg()).unwrap();
        let text = serde_json::to_string(&prism.to_document()).unwrap();
        let again = PolyhedralComplex::from_json(&text, &cfg()).unwrap();
        assert_eq!(prism, again);

        let flipped = prism.with_flipped_normal(0);
        let text = serde_json::to_string(&flipped.to_document()).unwrap();
        assert_eq!(flipped, PolyhedralComplex::from_json(&text, &cfg()).unwrap());
    }

    #[test]
    fn constraint_script_orders_targets() {
        let script: ConstraintScript = serde_json::from_str(
            r#"{"fixed_edges": {"3": 2.5}, "face_targets": [{"face": 1, "area": 0.0}, {"face": 4, "area": 2.0, "root": "low"}], "order": [4, 1]}"#,
        )
        .unwrap();
        assert_eq!(script.fixed_edges[&3], 2.5);
        let ordered = script.ordered_targets().unwrap();
        assert_eq!(ordered[0].face, 4);
        assert_eq!(ordered[0].root, Some(RootPolicy::Low));
        assert_eq!(ordered[1].face, 1);

        let bad = ConstraintScript {
            order: Some(vec![9]),
            ..script
        };
        assert!(bad.ordered_targets().is_err());
    }
}
