//! Dense-tableau primal simplex for standard-form maximization problems
//!
//! ```text
//!   max  c . x    s.t.  A x <= b,  x >= 0,  b >= 0
//! ```
//!
//! With non-negative right-hand sides the all-slack basis is feasible, so no
//! phase-one is needed. Pivoting follows Bland's rule (lowest eligible index
//! for both the entering and the leaving variable), which rules out cycling;
//! an explicit iteration cap backstops numerical edge cases.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    /// The ratio test found no blocking row: the objective is unbounded
    /// above. Well-formed callers never reach this.
    UnboundedGuard,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: SimplexStatus,
    /// Values of the structural variables (slacks excluded).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Reduced costs above `-opt_tol` count as non-negative (optimality).
    pub opt_tol: f64,
    /// Entries at or below this magnitude are unusable as pivots.
    pub pivot_tol: f64,
    /// Hard cap on pivot steps; `None` uses `50 * (rows + cols)`.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            opt_tol: 1e-9,
            pivot_tol: 1e-10,
            max_iterations: None,
        }
    }
}

/// A constraint row `coeffs . x <= rhs` with sparse coefficients.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Maximizes `objective . x` subject to the given constraints and `x >= 0`.
pub fn maximize(
    objective: &[f64],
    constraints: &[Constraint],
    options: &SimplexOptions,
) -> Result<SimplexResult> {
    let n = objective.len();
    let m = constraints.len();
    for (r, c) in constraints.iter().enumerate() {
        if c.rhs < 0.0 {
            return Err(Error::contract(format!(
                "constraint {r} has negative right-hand side {}; standard form requires b >= 0",
                c.rhs
            )));
        }
        if let Some(&(idx, _)) = c.coeffs.iter().find(|&&(idx, _)| idx >= n) {
            return Err(Error::contract(format!(
                "constraint {r} references variable {idx}, but there are only {n}"
            )));
        }
    }

    if n == 0 {
        return Ok(SimplexResult {
            status: SimplexStatus::Optimal,
            x: Vec::new(),
            objective: 0.0,
            iterations: 0,
        });
    }

    // Tableau layout: m constraint rows over columns [structural | slack |
    // rhs], plus a reduced-cost row initialized to -c.
    let width = n + m + 1;
    let mut tableau = vec![vec![0.0f64; width]; m + 1];
    for (r, c) in constraints.iter().enumerate() {
        for &(idx, v) in &c.coeffs {
            tableau[r][idx] += v;
        }
        tableau[r][n + r] = 1.0;
        tableau[r][width - 1] = c.rhs;
    }
    for (j, &c) in objective.iter().enumerate() {
        tableau[m][j] = -c;
    }

    let mut basis: Vec<usize> = (n..n + m).collect();
    let max_iterations = options.max_iterations.unwrap_or(50 * (m + n + m));
    let mut iterations = 0;

    loop {
        // Entering variable: lowest index with a negative reduced cost.
        let entering = (0..n + m).find(|&j| tableau[m][j] < -options.opt_tol);
        let Some(col) = entering else {
            break;
        };

        // Ratio test; ties broken by the lowest basic-variable index.
        let mut pivot_row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            let a = tableau[r][col];
            if a <= options.pivot_tol {
                continue;
            }
            let ratio = tableau[r][width - 1] / a;
            let better = match pivot_row {
                None => true,
                Some(prev) => {
                    ratio < best_ratio - 1e-12
                        || ((ratio - best_ratio).abs() <= 1e-12 && basis[r] < basis[prev])
                }
            };
            if better {
                pivot_row = Some(r);
                best_ratio = ratio;
            }
        }
        let Some(row) = pivot_row else {
            return Ok(SimplexResult {
                status: SimplexStatus::UnboundedGuard,
                x: vec![0.0; n],
                objective: f64::INFINITY,
                iterations,
            });
        };

        pivot(&mut tableau, row, col);
        basis[row] = col;

        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::Solver {
                message: format!(
                    "iteration cap exceeded on a {m}x{n} problem; the tableau may be cycling \
                     or badly scaled"
                ),
                iterations,
            });
        }
    }

    let mut x = vec![0.0f64; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            // Basic values stay non-negative up to roundoff; clamp the dust.
            x[b] = tableau[r][width - 1].max(0.0);
        }
    }
    Ok(SimplexResult {
        status: SimplexStatus::Optimal,
        x,
        objective: tableau[m][width - 1],
        iterations,
    })
}

fn pivot(tableau: &mut [Vec<f64>], row: usize, col: usize) {
    let inv = 1.0 / tableau[row][col];
    for v in tableau[row].iter_mut() {
        *v *= inv;
    }
    tableau[row][col] = 1.0;
    let pivot_row = std::mem::take(&mut tableau[row]);
    for (r, other) in tableau.iter_mut().enumerate() {
        if r == row {
            continue;
        }
        let factor = other[col];
        if factor == 0.0 {
            continue;
        }
        for (v, &p) in other.iter_mut().zip(&pivot_row) {
            *v -= factor * p;
        }
        other[col] = 0.0;
    }
    tableau[row] = pivot_row;
}
