//! Sequential whole-polyhedron solve.
//!
//! Each target face is solved on its own, its edges are frozen, and the rest
//! of the polyhedron follows through a least-change update of all edge
//! lengths `q = B⁺ b + (Id - B⁺ B) ν` subject to face closure and the frozen
//! lengths. Edge directions never change.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Point3};
use serde::{Deserialize, Serialize};

use crate::config::{NuPolicy, RootPolicy, SolverConfig};
use crate::equilibrium::global_equilibrium;
use crate::error::{Error, Result};
use crate::face_area::build_area_matrix;
use crate::face_solver::{
    analyze_constraints, extract_dependence, solve_target_area, Cgdof, EdgeClassification,
    QuadraticProblem,
};
use crate::model::{ConstraintScript, PolyhedralComplex};

#[derive(Debug, Clone, PartialEq)]
pub struct PolySolveState {
    pub complex: PolyhedralComplex,
    /// Frozen edge lengths by global edge id. Only ever grows during a run.
    pub fixed_edges: BTreeMap<usize, f64>,
    pub step_log: Vec<StepRecord>,
}

impl PolySolveState {
    pub fn new(complex: PolyhedralComplex) -> Self {
        Self {
            complex,
            fixed_edges: BTreeMap::new(),
            step_log: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub face_index: usize,
    pub target_area: f64,
    pub roots: Vec<f64>,
    pub chosen_root: f64,
    /// Global id of the critical edge.
    pub ci_edge: usize,
    pub cgdof: Cgdof,
    pub achieved_area: f64,
    pub pre_lengths: Vec<f64>,
    pub post_lengths: Vec<f64>,
    /// `|B_p q - b_p|` after the update.
    pub residual: f64,
    /// Edges frozen by this step.
    pub new_fixed: Vec<usize>,
}

/// How the root of the area quadratic is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootChoice {
    Policy(RootPolicy),
    /// The root closest to this value.
    Value(f64),
}

impl From<RootPolicy> for RootChoice {
    fn from(p: RootPolicy) -> Self {
        RootChoice::Policy(p)
    }
}

/// One interactive step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRequest {
    pub face: usize,
    pub target_area: f64,
    pub root: RootChoice,
    /// Extra fixed lengths on this face, by global edge id. They are frozen
    /// with the rest of the face.
    pub extra_fixed: BTreeMap<usize, f64>,
}

/// Result of a polyhedron update.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyUpdate {
    pub lengths: DVector<f64>,
    pub residual: f64,
}

/// Re-solves all edge lengths with `fixed` held exactly.
pub fn update_polyhedron(
    complex: &PolyhedralComplex,
    fixed: &BTreeMap<usize, f64>,
    recent: &[usize],
    cfg: &SolverConfig,
) -> Result<PolyUpdate> {
    let e = complex.edge_count();
    if let Some((&bad, _)) = fixed.iter().find(|(&k, _)| k >= e) {
        return Err(Error::DanglingIndex {
            kind: "edge",
            index: bad,
            owner: "fixed edges".into(),
        });
    }
    let ep = global_equilibrium(complex).matrix;
    let rows = ep.nrows() + fixed.len();
    let mut b_mat = DMatrix::zeros(rows, e);
    b_mat.view_mut((0, 0), ep.shape()).copy_from(&ep);
    let mut b = DVector::zeros(rows);
    for (i, (&edge, &len)) in fixed.iter().enumerate() {
        b_mat[(ep.nrows() + i, edge)] = 1.0;
        b[ep.nrows() + i] = len;
    }
    let nu = match cfg.nu_policy {
        NuPolicy::Current => complex.lengths().clone(),
        NuPolicy::Ones => DVector::from_element(e, 1.0),
    };
    let (mut q, info) = crate::numerics::pseudo_solve(&b_mat, &b, &nu, cfg)?;
    if !info.solvable {
        return Err(Error::OverConstrained {
            recent: recent.to_vec(),
            residual: info.residual,
        });
    }
    for (&edge, &len) in fixed {
        q[edge] = len;
    }
    let residual = (&b_mat * &q - &b).norm();
    if residual > cfg.tol_solve * (1.0 + b.norm()) {
        return Err(Error::OverConstrained {
            recent: recent.to_vec(),
            residual,
        });
    }
    Ok(PolyUpdate { lengths: q, residual })
}

/// Lengths of both roots of a face step, without committing anything.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacePreview {
    pub face: usize,
    pub classification: EdgeClassification,
    pub quadratic: QuadraticProblem,
    pub default_root: f64,
    pub roots: Vec<RootPreview>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootPreview {
    pub root: f64,
    /// `(global edge id, length)` in loop order.
    pub lengths: Vec<(usize, f64)>,
    /// Face vertices from the face's first vertex, in loop order.
    pub vertices: Vec<[f64; 3]>,
    pub area: f64,
}

fn face_fixed(state: &PolySolveState, face: usize, extra: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let ids = state.complex.face_edge_ids(face);
    let mut fixed: BTreeMap<usize, f64> = state
        .fixed_edges
        .iter()
        .filter(|(e, _)| ids.contains(e))
        .map(|(&e, &l)| (e, l))
        .collect();
    fixed.extend(extra.iter().map(|(&e, &l)| (e, l)));
    fixed
}

fn solve_step(
    state: &PolySolveState,
    face: usize,
    target: f64,
    root: RootChoice,
    extra: &BTreeMap<usize, f64>,
    cfg: &SolverConfig,
) -> Result<(EdgeClassification, crate::face_solver::FaceSolveResult)> {
    let complex = &state.complex;
    let fixed = face_fixed(state, face, extra);
    let analysis = analyze_constraints(complex, face, &fixed, None, cfg)?;
    if analysis.classification.cgdof == Cgdof::Inconsistent {
        return Err(Error::InconsistentConstraints { face });
    }
    let dependence = extract_dependence(&analysis)?;
    let area = build_area_matrix(complex, face)?;
    let current = complex.face_lengths(face, complex.lengths());
    let policy = match root {
        RootChoice::Policy(p) => p,
        RootChoice::Value(_) => RootPolicy::Near,
    };
    let mut result = solve_target_area(
        &area,
        &analysis,
        &dependence,
        target,
        &current,
        &BTreeMap::new(),
        policy,
        cfg,
    )?;
    if let RootChoice::Value(v) = root {
        let pick = result
            .roots
            .iter()
            .copied()
            .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
            .expect("at least one root");
        if pick != result.chosen_root {
            let lengths = result.lengths_for_root(pick);
            let mut updated = lengths;
            for (&pos, &len) in &analysis.system.fixed {
                updated[pos] = len;
            }
            result.achieved_area = area.signed_area(&updated)?;
            result.updated_lengths = updated;
            result.chosen_root = pick;
        }
    }
    Ok((analysis.classification, result))
}

/// Solves a face for both roots and reports the resulting face geometry.
pub fn preview_face(
    state: &PolySolveState,
    face: usize,
    target: f64,
    extra_fixed: &BTreeMap<usize, f64>,
    cfg: &SolverConfig,
) -> Result<FacePreview> {
    let (classification, result) =
        solve_step(state, face, target, RootChoice::Policy(cfg.root_policy), extra_fixed, cfg)?;
    let complex = &state.complex;
    let ids = complex.face_edge_ids(face);
    let dirs = complex.face_directions(face);
    let area = build_area_matrix(complex, face)?;
    let start = complex.vertices()[complex.face_vertices(face)[0]];
    let mut roots = Vec::with_capacity(result.roots.len());
    for &root in &result.roots {
        let mut q = result.lengths_for_root(root);
        for (&pos, &len) in &fixed_positions(&ids, &face_fixed(state, face, extra_fixed)) {
            q[pos] = len;
        }
        let mut p: Point3<f64> = start;
        let mut vertices = Vec::with_capacity(ids.len());
        for (i, d) in dirs.iter().enumerate() {
            vertices.push([p.x, p.y, p.z]);
            p += d * q[i];
        }
        roots.push(RootPreview {
            root,
            lengths: ids.iter().copied().zip(q.iter().copied()).collect(),
            vertices,
            area: area.signed_area(&q)?,
        });
    }
    Ok(FacePreview {
        face,
        classification,
        quadratic: result.quadratic,
        default_root: result.chosen_root,
        roots,
    })
}

fn fixed_positions(ids: &[usize], fixed: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    fixed
        .iter()
        .filter_map(|(e, &l)| ids.iter().position(|x| x == e).map(|p| (p, l)))
        .collect()
}

/// Solves one face, freezes all of its edges and updates the polyhedron.
/// The input state is left untouched.
pub fn apply_step(state: &PolySolveState, request: &StepRequest, cfg: &SolverConfig) -> Result<PolySolveState> {
    let face = request.face;
    let (classification, result) = solve_step(
        state,
        face,
        request.target_area,
        request.root,
        &request.extra_fixed,
        cfg,
    )?;
    let ids = state.complex.face_edge_ids(face);
    let mut fixed = state.fixed_edges.clone();
    let mut new_fixed = Vec::new();
    for (pos, &edge) in ids.iter().enumerate() {
        if fixed.insert(edge, result.updated_lengths[pos]).is_none() {
            new_fixed.push(edge);
        }
    }
    let update = update_polyhedron(&state.complex, &fixed, &ids, cfg)?;
    let complex = state.complex.with_lengths(&update.lengths, cfg)?;
    let area = build_area_matrix(&complex, face)?;
    let achieved_area = area.signed_area(&complex.face_lengths(face, complex.lengths()))?;

    let mut step_log = state.step_log.clone();
    step_log.push(StepRecord {
        step: step_log.len(),
        face_index: face,
        target_area: request.target_area,
        roots: result.roots.clone(),
        chosen_root: result.chosen_root,
        ci_edge: ids[result.ci],
        cgdof: classification.cgdof,
        achieved_area,
        pre_lengths: state.complex.lengths().iter().copied().collect(),
        post_lengths: update.lengths.iter().copied().collect(),
        residual: update.residual,
        new_fixed,
    });
    Ok(PolySolveState {
        complex,
        fixed_edges: fixed,
        step_log,
    })
}

/// A pipeline that stopped early, with the state reached so far.
#[derive(Debug)]
pub struct PipelineFailure {
    pub state: PolySolveState,
    /// Index of the failing target, `None` if the initial fixed edges failed.
    pub step: Option<usize>,
    pub face: Option<usize>,
    pub source: Error,
}

impl std::fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.step, self.face) {
            (Some(s), Some(face)) => write!(f, "step {s} (face {face}): {}", self.source),
            _ => write!(f, "initial fixed edges: {}", self.source),
        }
    }
}

impl std::error::Error for PipelineFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Runs every target of `script` in order.
pub fn run_pipeline(
    complex: &PolyhedralComplex,
    script: &ConstraintScript,
    cfg: &SolverConfig,
) -> std::result::Result<PolySolveState, Box<PipelineFailure>> {
    let mut state = PolySolveState::new(complex.clone());
    let fail = |state: PolySolveState, step, face, source| {
        Box::new(PipelineFailure {
            state,
            step,
            face,
            source,
        })
    };
    let targets = match script.ordered_targets() {
        Ok(t) => t,
        Err(err) => return Err(fail(state, None, None, err)),
    };
    if !script.fixed_edges.is_empty() {
        let recent: Vec<usize> = script.fixed_edges.keys().copied().collect();
        let updated = update_polyhedron(complex, &script.fixed_edges, &recent, cfg)
            .and_then(|u| complex.with_lengths(&u.lengths, cfg));
        match updated {
            Ok(c) => {
                state.complex = c;
                state.fixed_edges = script.fixed_edges.clone();
            }
            Err(err) => return Err(fail(state, None, None, err)),
        }
    }
    for (i, target) in targets.iter().enumerate() {
        let request = StepRequest {
            face: target.face,
            target_area: target.area,
            root: RootChoice::Policy(target.root.unwrap_or(cfg.root_policy)),
            extra_fixed: BTreeMap::new(),
        };
        match apply_step(&state, &request, cfg) {
            Ok(next) => state = next,
            Err(err) => return Err(fail(state, Some(i), Some(target.face), err)),
        }
    }
    Ok(state)
}
