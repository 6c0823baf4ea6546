//! Dense linear-algebra kernel: reduced row echelon form with pivot
//! bookkeeping, and Moore-Penrose solves of possibly rank-deficient systems.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{Error, Result};

/// Reduced row echelon form of an augmented system `(A | b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RrefResult {
    /// `rows x (cols + 1)`; the last column is the transformed right-hand side.
    pub matrix: DMatrix<f64>,
    /// Strictly increasing pivot columns of the coefficient part.
    pub pivot_columns: Vec<usize>,
    pub rank: usize,
    /// A row reads `(0 ... 0 | 1)`: the system has no solution.
    pub inconsistent: bool,
}

impl RrefResult {
    pub fn cols(&self) -> usize {
        self.matrix.ncols() - 1
    }

    /// Coefficient columns without a pivot, in increasing order.
    pub fn free_columns(&self) -> Vec<usize> {
        (0..self.cols())
            .filter(|c| !self.pivot_columns.contains(c))
            .collect()
    }

    /// Row whose pivot sits in `column`, if any.
    pub fn pivot_row(&self, column: usize) -> Option<usize> {
        self.pivot_columns.iter().position(|&c| c == column)
    }
}

/// Gauss-Jordan elimination with partial pivoting on `(matrix | augment)`.
///
/// Entries smaller than `tol_pivot` times the largest absolute entry of
/// `matrix` are treated as zero and cleared in the output. Pivot ties go to
/// the lowest row index.
pub fn rref(matrix: &DMatrix<f64>, augment: &DVector<f64>, tol_pivot: f64) -> Result<RrefResult> {
    let (rows, cols) = matrix.shape();
    if augment.len() != rows {
        return Err(Error::Dimension(format!(
            "rref: matrix has {rows} rows but augment has {}",
            augment.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension("rref: empty matrix".into()));
    }

    let mut m = DMatrix::zeros(rows, cols + 1);
    m.view_mut((0, 0), (rows, cols)).copy_from(matrix);
    m.set_column(cols, augment);

    let scale = matrix.amax();
    let zero = tol_pivot * scale;
    let aug_zero = tol_pivot * scale.max(augment.amax());

    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let mut best = row;
        let mut best_abs = m[(row, col)].abs();
        for r in row + 1..rows {
            let v = m[(r, col)].abs();
            if v > best_abs {
                best = r;
                best_abs = v;
            }
        }
        if best_abs <= zero {
            for r in row..rows {
                m[(r, col)] = 0.0;
            }
            continue;
        }
        m.swap_rows(row, best);
        let p = m[(row, col)];
        for c in col..=cols {
            m[(row, c)] /= p;
        }
        m[(row, col)] = 1.0;
        for r in 0..rows {
            if r == row {
                continue;
            }
            let factor = m[(r, col)];
            if factor != 0.0 {
                for c in col..=cols {
                    m[(r, c)] -= factor * m[(row, c)];
                }
                m[(r, col)] = 0.0;
            }
        }
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();

    for r in 0..rows {
        for c in 0..cols {
            if m[(r, c)].abs() <= zero {
                m[(r, c)] = 0.0;
            }
        }
    }

    // Rows below the rank are zero in the coefficient part; a nonzero
    // right-hand side there becomes the pivot `(0 ... 0 | 1)`.
    let mut inconsistent = false;
    if let Some(bad) = (rank..rows).find(|&r| m[(r, cols)].abs() > aug_zero) {
        inconsistent = true;
        m.swap_rows(rank, bad);
        m[(rank, cols)] = 1.0;
        for r in 0..rows {
            if r != rank {
                m[(r, cols)] = 0.0;
            }
        }
    } else {
        for r in rank..rows {
            m[(r, cols)] = 0.0;
        }
    }

    Ok(RrefResult {
        matrix: m,
        pivot_columns: pivots,
        rank,
        inconsistent,
    })
}

/// Moore-Penrose data for one solve of `B q = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverseSolution {
    /// `B⁺ b`, the minimum-norm least-squares solution.
    pub particular: DVector<f64>,
    /// `Id - B⁺ B`, the orthogonal projector onto the kernel of `B`.
    pub projector: DMatrix<f64>,
    pub pseudo_inverse: DMatrix<f64>,
    pub solvable: bool,
    /// `|B B⁺ b - b|`.
    pub residual: f64,
}

/// Pseudo-inverse through the singular value decomposition, dropping singular
/// values below `rcond * σ_max`. Also returns the kernel projector.
pub fn pseudo_inverse(b: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = b.shape();
    if m == 0 || n == 0 || b.amax() == 0.0 {
        return (DMatrix::zeros(n, m), DMatrix::identity(n, n));
    }
    let svd = verified_svd(b);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = rcond * sigma_max;

    let mut pinv = DMatrix::zeros(n, m);
    let mut range = DMatrix::zeros(n, n);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let v = v_t.row(i).transpose();
        pinv += (&v * u.column(i).transpose()) / s;
        range += &v * v.transpose();
    }
    let projector = DMatrix::identity(n, n) - range;
    (pinv, projector)
}

/// Convergence thresholds tried in turn. The tightest ones sometimes stop on
/// a wrong factorization of rank-deficient input, so every result is checked
/// against `B` before use.
const SVD_EPS: [f64; 5] = [f64::EPSILON, 1e-14, 1e-13, 1e-12, 1e-11];

fn verified_svd(b: &DMatrix<f64>) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let scale = b.norm();
    let mut last = None;
    for eps in SVD_EPS {
        let Some(svd) = b.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        let u = svd.u.as_ref().expect("svd computed with u");
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let rebuilt = u * DMatrix::from_diagonal(&svd.singular_values) * v_t;
        if (rebuilt - b).norm() <= 1e-12 * scale {
            return svd;
        }
        last = Some(svd);
    }
    last.unwrap_or_else(|| b.clone().svd(true, true))
}

/// Solves `B q = b` as `q = B⁺ b + (Id - B⁺ B) ν`.
///
/// Among all solutions this is the one closest to `ν`. Solvability is the
/// test `|B B⁺ b - b| <= tol_solve (1 + |b|)`; an unsolvable system still
/// returns the least-squares point with `solvable == false`.
pub fn pseudo_solve(
    b_mat: &DMatrix<f64>,
    b: &DVector<f64>,
    nu: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, PseudoInverseSolution)> {
    let (m, n) = b_mat.shape();
    if b.len() != m || nu.len() != n {
        return Err(Error::Dimension(format!(
            "pseudo_solve: B is {m}x{n}, b has {}, nu has {}",
            b.len(),
            nu.len()
        )));
    }
    let (pinv, projector) = pseudo_inverse(b_mat, cfg.rcond);
    let particular = &pinv * b;
    let residual = (b_mat * &particular - b).norm();
    let solvable = residual <= cfg.tol_solve * (1.0 + b.norm());
    let solution = &particular + &projector * nu;
    Ok((
        solution,
        PseudoInverseSolution {
            particular,
            projector,
            pseudo_inverse: pinv,
            solvable,
            residual,
        },
    ))
}
