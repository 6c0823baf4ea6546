//! Constrained polyhedral graphic statics.
//!
//! A polyhedral force diagram is edited by prescribing face areas (force
//! magnitudes) and edge lengths. Each targeted face is solved on its own by
//! reducing its closure equations to a single free edge length and solving the
//! resulting quadratic area equation; the polyhedron is then updated with a
//! least-change Moore-Penrose solve, one face at a time. The reciprocal form
//! diagram is built from the primal and its member forces are re-signed after
//! each run.
//!
//! Module map:
//! - [`model`]: cell complex, loading, vertex reconstruction
//! - [`numerics`]: RREF and pseudo-inverse kernel
//! - [`face_area`]: quadratic area form of a face
//! - [`equilibrium`]: face, polyhedron and dual closure matrices
//! - [`face_solver`]: single-face target-area solve
//! - [`poly_solver`]: sequential whole-polyhedron pipeline
//! - [`dual`]: reciprocal diagram and member forces

pub mod config;
pub mod dual;
pub mod equilibrium;
pub mod error;
pub mod face_area;
pub mod face_solver;
pub mod fixtures;
pub mod model;
pub mod numerics;
pub mod poly_solver;

pub use nalgebra;

pub use config::{NuPolicy, RootPolicy, SolverConfig};
pub use dual::{build_dual, update_member_forces, DualDiagram, ForceSign, MemberForce};
pub use error::{Error, Result};
pub use face_area::{build_area_matrix, signed_area, AreaMatrix};
pub use face_solver::{
    analyze_constraints, extract_dependence, solve_target_area, Cgdof, EdgeClassification,
    FaceAnalysis, FaceSolveResult,
};
pub use model::{
    load_complex, ConstraintScript, FaceTarget, MeshDocument, Orientation, PolyhedralComplex,
};
pub use numerics::{pseudo_solve, rref, PseudoInverseSolution, RrefResult};
pub use poly_solver::{run_pipeline, update_polyhedron, PolySolveState, StepRecord};
