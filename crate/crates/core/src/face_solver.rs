//! Target-area solve of a single face.
//!
//! The face's closure equations are stacked with its fixed-length rows and
//! reduced to row echelon form. Pivot columns are fixed or dependent
//! (`nfd`) edges; the free columns are independent. All independent edges
//! but one (`nci`) are pinned, which leaves the area equation quadratic in
//! the last one (`ci`).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::{RootPolicy, SolverConfig};
use crate::equilibrium::face_equilibrium;
use crate::error::{Error, Result};
use crate::face_area::{signed_area, AreaMatrix};
use crate::model::PolyhedralComplex;
use crate::numerics::{rref, RrefResult};

/// Dimension of the constrained solution space of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cgdof {
    /// Constraints are contradictory (`-inf`).
    Inconsistent,
    Finite(usize),
}

impl Cgdof {
    pub fn value(self) -> Option<usize> {
        match self {
            Cgdof::Inconsistent => None,
            Cgdof::Finite(n) => Some(n),
        }
    }
}

impl std::fmt::Display for Cgdof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cgdof::Inconsistent => f.write_str("-inf"),
            Cgdof::Finite(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Cgdof {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cgdof::Inconsistent => s.serialize_str("-inf"),
            Cgdof::Finite(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Cgdof {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Finite(usize),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Finite(n) => Ok(Cgdof::Finite(n)),
            Repr::Text(s) if s == "-inf" => Ok(Cgdof::Inconsistent),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("invalid cgdof `{s}`"))),
        }
    }
}

/// `B_f q = b_f`: face closure rows over fixed-length rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSystem {
    pub face: usize,
    /// Global edge ids of the columns.
    pub edges: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Fixed lengths keyed by loop position.
    pub fixed: BTreeMap<usize, f64>,
}

/// Edge classes by loop position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassification {
    pub cgdof: Cgdof,
    pub ci: Option<usize>,
    pub nci: Vec<usize>,
    pub fix: Vec<usize>,
    pub nfd: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceAnalysis {
    pub system: ConstraintSystem,
    pub rref: RrefResult,
    pub classification: EdgeClassification,
}

impl FaceAnalysis {
    /// Maps a loop position to its global edge id.
    pub fn edge_id(&self, position: usize) -> usize {
        self.system.edges[position]
    }

    pub fn edge_ids(&self, positions: &[usize]) -> Vec<usize> {
        positions.iter().map(|&p| self.edge_id(p)).collect()
    }
}

/// Linear dependence of the edge lengths on the free ones,
/// `q = D' q_nci + q_fix + d' q_ci + g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependence {
    pub d_matrix: DMatrix<f64>,
    pub d: DVector<f64>,
    pub g: DVector<f64>,
    pub d_prime_matrix: DMatrix<f64>,
    pub d_prime: DVector<f64>,
}

/// Coefficients of `a x² + b x + c = 0` in the critical length `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticProblem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub target_area: f64,
    /// `D' q_nci + q_fix + g`: the lengths with the critical edge at zero.
    pub base: DVector<f64>,
    /// `d'`: change of the lengths per unit of the critical length.
    pub d_prime: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceSolveResult {
    pub face: usize,
    pub quadratic: QuadraticProblem,
    /// Real roots in increasing order.
    pub roots: Vec<f64>,
    pub chosen_root: f64,
    /// Loop position of the critical edge.
    pub ci: usize,
    /// New signed lengths in loop order.
    pub updated_lengths: DVector<f64>,
    pub achieved_area: f64,
}

impl FaceSolveResult {
    /// Face lengths for any of the reported roots.
    pub fn lengths_for_root(&self, root: f64) -> DVector<f64> {
        &self.quadratic.base + &self.quadratic.d_prime * root
    }
}

/// Builds `B_f`, reduces it and classifies the face's edges.
///
/// `fixed` is keyed by global edge id; every key must be an edge of the
/// face. `ci_override` picks the critical edge (a loop position) among the
/// free columns; by default the highest free column is used.
pub fn analyze_constraints(
    complex: &PolyhedralComplex,
    f: usize,
    fixed: &BTreeMap<usize, f64>,
    ci_override: Option<usize>,
    cfg: &SolverConfig,
) -> Result<FaceAnalysis> {
    let edges = complex.check_face(f).map(|_| complex.face_edge_ids(f))?;
    let k = edges.len();
    let mut fixed_local = BTreeMap::new();
    for (&edge, &len) in fixed {
        let pos = edges
            .iter()
            .position(|&e| e == edge)
            .ok_or(Error::EdgeNotOnFace { face: f, edge })?;
        fixed_local.insert(pos, len);
    }

    let eq = face_equilibrium(complex, f)?;
    let rows = 2 + fixed_local.len();
    let mut matrix = DMatrix::zeros(rows, k);
    matrix.view_mut((0, 0), (2, k)).copy_from(&eq.matrix);
    let mut rhs = DVector::zeros(rows);
    for (r, (&pos, &len)) in fixed_local.iter().enumerate() {
        matrix[(2 + r, pos)] = 1.0;
        rhs[2 + r] = len;
    }

    let reduced = rref(&matrix, &rhs, cfg.tol_pivot)?;
    let classification = classify(&reduced, &fixed_local, ci_override)?;
    Ok(FaceAnalysis {
        system: ConstraintSystem {
            face: f,
            edges,
            matrix,
            rhs,
            fixed: fixed_local,
        },
        rref: reduced,
        classification,
    })
}

fn classify(
    reduced: &RrefResult,
    fixed: &BTreeMap<usize, f64>,
    ci_override: Option<usize>,
) -> Result<EdgeClassification> {
    if reduced.inconsistent {
        return Ok(EdgeClassification {
            cgdof: Cgdof::Inconsistent,
            ci: None,
            nci: Vec::new(),
            fix: fixed.keys().copied().collect(),
            nfd: Vec::new(),
        });
    }
    let free = reduced.free_columns();
    let ci = match ci_override {
        Some(c) if free.contains(&c) => Some(c),
        Some(c) => {
            return Err(Error::InvalidDocument(format!(
                "loop position {c} is not an independent edge (free: {free:?})"
            )))
        }
        None => free.last().copied(),
    };
    let nci = free.iter().copied().filter(|&c| Some(c) != ci).collect();
    let (fix, nfd) = reduced
        .pivot_columns
        .iter()
        .copied()
        .partition(|c| fixed.contains_key(c));
    Ok(EdgeClassification {
        cgdof: Cgdof::Finite(reduced.cols() - reduced.rank),
        ci,
        nci,
        fix,
        nfd,
    })
}

/// Reads `D`, `d`, `g` off the reduced system and forms `D'`, `d'`.
pub fn extract_dependence(analysis: &FaceAnalysis) -> Result<Dependence> {
    let class = &analysis.classification;
    let face = analysis.system.face;
    let ci = match (class.cgdof, class.ci) {
        (Cgdof::Inconsistent, _) => return Err(Error::InconsistentConstraints { face }),
        (Cgdof::Finite(_), Some(ci)) => ci,
        (Cgdof::Finite(n), None) => return Err(Error::NoFreeEdge { face, cgdof: n }),
    };
    let r = &analysis.rref;
    let k = r.cols();
    let mut d_matrix = DMatrix::zeros(k, k);
    let mut d = DVector::zeros(k);
    let mut g = DVector::zeros(k);
    for &p in &class.nfd {
        let row = r.pivot_row(p).expect("nfd columns are pivotal");
        for &c in &class.nci {
            d_matrix[(p, c)] = -r.matrix[(row, c)];
        }
        d[p] = -r.matrix[(row, ci)];
        g[p] = r.matrix[(row, k)];
    }
    let mut d_prime_matrix = d_matrix.clone();
    for &c in &class.nci {
        d_prime_matrix[(c, c)] += 1.0;
    }
    let mut d_prime = d.clone();
    d_prime[ci] += 1.0;
    Ok(Dependence {
        d_matrix,
        d,
        g,
        d_prime_matrix,
        d_prime,
    })
}

/// Solves the face for `target` area.
///
/// `current` holds the face's lengths in loop order; the `nci` edges keep
/// those values unless `nci_values` (keyed by loop position) overrides them.
#[allow(clippy::too_many_arguments)]
pub fn solve_target_area(
    area: &AreaMatrix,
    analysis: &FaceAnalysis,
    dependence: &Dependence,
    target: f64,
    current: &DVector<f64>,
    nci_values: &BTreeMap<usize, f64>,
    policy: RootPolicy,
    cfg: &SolverConfig,
) -> Result<FaceSolveResult> {
    let face = analysis.system.face;
    let class = &analysis.classification;
    let k = area.vertex_count;
    if current.len() != k || analysis.rref.cols() != k {
        return Err(Error::Dimension(format!(
            "face {face}: area matrix, constraints and lengths disagree on edge count"
        )));
    }
    let ci = class.ci.ok_or(Error::NoFreeEdge {
        face,
        cgdof: class.cgdof.value().unwrap_or(0),
    })?;

    let mut q_nci = DVector::zeros(k);
    for &c in &class.nci {
        q_nci[c] = nci_values.get(&c).copied().unwrap_or(current[c]);
    }
    let mut q_fix = DVector::zeros(k);
    for (&pos, &len) in &analysis.system.fixed {
        q_fix[pos] = len;
    }
    let base = &dependence.d_prime_matrix * &q_nci + &q_fix + &dependence.g;
    let m = &area.matrix;
    let dp = &dependence.d_prime;
    let m_dp = m * dp;
    let a = dp.dot(&m_dp);
    let b = 2.0 * m_dp.dot(&base);
    let c = base.dot(&(m * &base)) - 2.0 * k as f64 * target;

    let no_solution = |discriminant: f64| Error::NoSolutionForArea {
        face,
        target,
        a,
        b,
        c,
        discriminant,
    };
    let m_scale = m.amax().max(f64::MIN_POSITIVE);
    let len_scale = base.amax().max(current.amax()).max(1.0);
    let roots = if a.abs() < 1e-12 * m_scale {
        if b.abs() > 1e-12 * m_scale * len_scale {
            vec![-c / b]
        } else if c.abs() <= cfg.tol_area * m_scale * len_scale * len_scale {
            vec![current[ci]]
        } else {
            return Err(no_solution(b * b - 4.0 * a * c));
        }
    } else {
        quadratic_roots(a, b, c).ok_or_else(|| no_solution(b * b - 4.0 * a * c))?
    };

    let chosen_root = match policy {
        RootPolicy::Low => roots[0],
        RootPolicy::High => *roots.last().expect("at least one root"),
        RootPolicy::Near => roots
            .iter()
            .copied()
            .min_by(|x, y| (x - current[ci]).abs().total_cmp(&(y - current[ci]).abs()))
            .expect("at least one root"),
    };

    let mut updated = &base + dp * chosen_root;
    for (&pos, &len) in &analysis.system.fixed {
        updated[pos] = len;
    }
    for &cpos in &class.nci {
        updated[cpos] = q_nci[cpos];
    }
    updated[ci] = chosen_root;

    let achieved_area = signed_area(area, &updated)?;
    let perimeter: f64 = updated.iter().map(|x| x.abs()).sum();
    if (achieved_area - target).abs() > cfg.tol_area * perimeter.powi(2).max(1.0 + target.abs()) {
        return Err(Error::Numerical(format!(
            "face {face}: achieved area {achieved_area} misses target {target}"
        )));
    }

    Ok(FaceSolveResult {
        face,
        quadratic: QuadraticProblem {
            a,
            b,
            c,
            target_area: target,
            base,
            d_prime: dp.clone(),
        },
        roots,
        chosen_root,
        ci,
        updated_lengths: updated,
        achieved_area,
    })
}

/// Real roots of `a x² + b x + c`, ascending, without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<Vec<f64>> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // Within round-off of a double root.
        if disc.abs() <= 1e-12 * b * b {
            return Some(vec![-b / (2.0 * a)]);
        }
        return None;
    }
    if disc == 0.0 {
        return Some(vec![-b / (2.0 * a)]);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let mut roots = vec![r1, r2];
    roots.sort_by(f64::total_cmp);
    Some(roots)
}

/// Full single-face pipeline on a complex: analysis, dependence and solve,
/// with `nci` edges at the complex's current lengths.
pub fn solve_face(
    complex: &PolyhedralComplex,
    f: usize,
    fixed: &BTreeMap<usize, f64>,
    target: f64,
    policy: RootPolicy,
    cfg: &SolverConfig,
) -> Result<(FaceAnalysis, FaceSolveResult)> {
    let analysis = analyze_constraints(complex, f, fixed, None, cfg)?;
    let dependence = extract_dependence(&analysis)?;
    let area = crate::face_area::build_area_matrix(complex, f)?;
    let current = complex.face_lengths(f, complex.lengths());
    let result = solve_target_area(
        &area,
        &analysis,
        &dependence,
        target,
        &current,
        &BTreeMap::new(),
        policy,
        cfg,
    )?;
    Ok((analysis, result))
}
