//! Small reference complexes used by the tests, benches and CLI examples.
//!
//! Every builder returns a [`MeshDocument`]; load it with
//! [`load_complex`](crate::model::load_complex).

use std::collections::HashMap;

use nalgebra::{Matrix2, Point3, Vector2, Vector3};

use crate::model::{CellDocument, FaceDocument, MeshDocument};

/// Directions (radians in the xy-plane) of the reference pentagon's edges
/// `e(0,1) .. e(4,0)`. They round to the published three-decimal unit
/// vectors `(0.289,-0.957) (1,0) (0.776,0.631) (-0.734,0.679) (-0.925,-0.38)`.
pub const PENTAGON_ANGLES: [f64; 5] = [
    -1.277382871585356,
    0.0,
    0.682880015204118,
    2.3953722978898515,
    -2.7513806039841993,
];

/// Prescribed length of the pentagon edge `e(4,0)` in the reference example.
pub const PENTAGON_FIXED_LENGTH: f64 = 41.78;

/// Current lengths `(q2, q3)` of the pentagon fixture; `q4` is the fixed
/// length and `q0, q1` follow from closure.
const PENTAGON_Q2: f64 = 28.672;
const PENTAGON_Q3: f64 = 20.0;

/// Builds a document from vertex cycles. Edges are created in order of first
/// appearance. Each cell lists its faces; the side of a face in a cell is
/// derived from the centroids, so cells must be convex.
pub fn from_polygons(
    vertices: &[[f64; 3]],
    faces: &[Vec<usize>],
    cells: &[Vec<usize>],
) -> MeshDocument {
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut face_docs = Vec::with_capacity(faces.len());
    for cycle in faces {
        let mut loop_edges = Vec::with_capacity(cycle.len());
        for i in 0..cycle.len() {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            let entry = if let Some(&e) = lookup.get(&(a, b)) {
                (e, 1)
            } else if let Some(&e) = lookup.get(&(b, a)) {
                (e, -1)
            } else {
                edges.push([a, b]);
                lookup.insert((a, b), edges.len() - 1);
                (edges.len() - 1, 1)
            };
            loop_edges.push(entry);
        }
        face_docs.push(FaceDocument {
            edges: loop_edges,
            normal: None,
        });
    }

    let point = |v: usize| Point3::from(Vector3::from(vertices[v]));
    let centroid = |ids: &mut dyn Iterator<Item = usize>| {
        let (sum, n) = ids.fold((Vector3::zeros(), 0usize), |(s, n), v| (s + point(v).coords, n + 1));
        sum / n as f64
    };
    let normal = |cycle: &[usize]| {
        let mut acc = Vector3::zeros();
        for i in 0..cycle.len() {
            acc += point(cycle[i]).coords.cross(&point(cycle[(i + 1) % cycle.len()]).coords);
        }
        acc
    };
    let cell_docs = cells
        .iter()
        .map(|member_faces| {
            let c = centroid(&mut member_faces.iter().flat_map(|&f| faces[f].iter().copied()));
            CellDocument {
                faces: member_faces
                    .iter()
                    .map(|&f| {
                        let fc = centroid(&mut faces[f].iter().copied());
                        let side = if normal(&faces[f]).dot(&(fc - c)) > 0.0 { 1 } else { -1 };
                        (f, side)
                    })
                    .collect(),
            }
        })
        .collect();

    MeshDocument {
        vertices: vertices.to_vec(),
        edges,
        faces: face_docs,
        cells: cell_docs,
    }
}

/// Axis-aligned box `[0,lx] x [0,ly] x [0,lz]`, one cell, outward loops.
/// Faces: 0 bottom, 1 top, 2 front (y=0), 3 right (x=lx), 4 back, 5 left.
pub fn cuboid(lx: f64, ly: f64, lz: f64) -> MeshDocument {
    let v = [
        [0.0, 0.0, 0.0],
        [lx, 0.0, 0.0],
        [lx, ly, 0.0],
        [0.0, ly, 0.0],
        [0.0, 0.0, lz],
        [lx, 0.0, lz],
        [lx, ly, lz],
        [0.0, ly, lz],
    ];
    let faces = vec![
        vec![0, 3, 2, 1],
        vec![4, 5, 6, 7],
        vec![0, 1, 5, 4],
        vec![1, 2, 6, 5],
        vec![2, 3, 7, 6],
        vec![3, 0, 4, 7],
    ];
    from_polygons(&v, &faces, &[vec![0, 1, 2, 3, 4, 5]])
}

pub fn unit_cube() -> MeshDocument {
    cuboid(1.0, 1.0, 1.0)
}

/// Right prism over a counter-clockwise base polygon in the xy-plane.
/// Face 0 is the top (normal +z), face 1 the bottom, then one side per base
/// edge. The top loop follows the base order.
pub fn prism(base: &[[f64; 2]], height: f64) -> MeshDocument {
    let n = base.len();
    let mut v: Vec<[f64; 3]> = base.iter().map(|p| [p[0], p[1], 0.0]).collect();
    v.extend(base.iter().map(|p| [p[0], p[1], height]));
    let mut faces = vec![(n..2 * n).collect::<Vec<_>>(), (0..n).rev().collect()];
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push(vec![i, j, n + j, n + i]);
    }
    let all: Vec<usize> = (0..faces.len()).collect();
    from_polygons(&v, &faces, &[all])
}

/// Unit directions of the reference pentagon.
pub fn pentagon_directions() -> [Vector2<f64>; 5] {
    PENTAGON_ANGLES.map(|a| Vector2::new(a.cos(), a.sin()))
}

/// Edge lengths of the pentagon fixture in loop order.
pub fn pentagon_lengths() -> [f64; 5] {
    let u = pentagon_directions();
    let rest = -(u[2] * PENTAGON_Q2 + u[3] * PENTAGON_Q3 + u[4] * PENTAGON_FIXED_LENGTH);
    let q01 = Matrix2::from_columns(&[u[0], u[1]])
        .lu()
        .solve(&rest)
        .expect("pentagon directions are independent");
    [q01[0], q01[1], PENTAGON_Q2, PENTAGON_Q3, PENTAGON_FIXED_LENGTH]
}

/// Vertices of the pentagon fixture, starting at the origin.
pub fn pentagon_vertices() -> Vec<[f64; 2]> {
    let u = pentagon_directions();
    let q = pentagon_lengths();
    let mut p = Vector2::zeros();
    let mut out = Vec::with_capacity(5);
    for i in 0..5 {
        out.push([p.x, p.y]);
        p += u[i] * q[i];
    }
    out
}

/// The reference pentagon as a single face without cells. Its normal is
/// set to -z, the orientation under which the reference area matrix is
/// tabulated.
pub fn worked_example_pentagon() -> MeshDocument {
    let v: Vec<[f64; 3]> = pentagon_vertices().iter().map(|p| [p[0], p[1], 0.0]).collect();
    let mut doc = from_polygons(&v, &[vec![0, 1, 2, 3, 4]], &[]);
    doc.faces[0].normal = Some([0.0, 0.0, -1.0]);
    doc
}

/// Right prism over the reference pentagon.
pub fn pentagon_prism(height: f64) -> MeshDocument {
    prism(&pentagon_vertices(), height)
}

pub fn triangular_prism() -> MeshDocument {
    prism(&[[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]], 1.0)
}

/// Single tetrahedral cell.
pub fn tetrahedron() -> MeshDocument {
    let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let faces = vec![vec![0, 2, 1], vec![0, 1, 3], vec![1, 2, 3], vec![0, 3, 2]];
    from_polygons(&v, &faces, &[vec![0, 1, 2, 3]])
}

/// Tetrahedron subdivided from an interior point into four cells. The four
/// edges meeting at the interior point are surrounded by cells on all sides.
pub fn split_tetrahedron() -> MeshDocument {
    let v = [
        [0.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [0.4, 1.8, 0.0],
        [0.7, 0.6, 1.9],
        [0.8, 0.65, 0.45],
    ];
    let hub = 4;
    // Outer faces 0..4, opposite corners 3, 2, 0, 1.
    let mut faces = vec![vec![0, 2, 1], vec![0, 1, 3], vec![1, 2, 3], vec![0, 3, 2]];
    // Inner faces 4..10, one per outer edge.
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for &(a, b) in &pairs {
        faces.push(vec![hub, a, b]);
    }
    let inner = |a: usize, b: usize| 4 + pairs.iter().position(|&p| p == (a.min(b), a.max(b))).unwrap();
    let cells: Vec<Vec<usize>> = (0..4)
        .map(|outer| {
            let tri = &faces[outer];
            let mut members = vec![outer];
            for i in 0..3 {
                members.push(inner(tri[i], tri[(i + 1) % 3]));
            }
            members
        })
        .collect();
    from_polygons(&v, &faces, &cells)
}

/// Unit square prism split along a vertical diagonal plane into two
/// triangular-prism cells sharing one rectangular face.
pub fn two_cell_prism() -> MeshDocument {
    let v = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let faces = vec![
        vec![0, 2, 1],    // 0 bottom of cell A
        vec![4, 5, 6],    // 1 top of cell A
        vec![0, 1, 5, 4], // 2 front
        vec![1, 2, 6, 5], // 3 right
        vec![0, 4, 6, 2], // 4 shared diagonal
        vec![0, 3, 2],    // 5 bottom of cell B
        vec![4, 6, 7],    // 6 top of cell B
        vec![2, 3, 7, 6], // 7 back
        vec![3, 0, 4, 7], // 8 left
    ];
    from_polygons(&v, &faces, &[vec![0, 1, 2, 3, 4], vec![4, 5, 6, 7, 8]])
}
