//! Self-contained dense phase-1 simplex for feasibility of
//! `{x ≥ 0 : A_eq x = b_eq, A_ub x ≤ b_ub}`.
//!
//! The instances here are tiny (tens of variables and rows), so the tableau
//! is kept dense and reduced costs are recomputed every pivot. Bland's rule
//! guarantees termination; an iteration cap guards against numerical
//! stalling. Infeasible answers come with a Farkas-style dual certificate
//! that [`verify_infeasibility_certificate`] checks independently.

use thiserror::Error;

/// Feasibility declared when the phase-1 objective falls below this.
pub const FEAS_TOL: f64 = 1e-9;
/// Pivot magnitude threshold.
const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("simplex exceeded {0} pivots without converging")]
    IterationLimit(usize),
    #[error("system has {expected} columns, row has {got}")]
    BadRow { expected: usize, got: usize },
}

/// Feasibility system over nonnegative variables.
#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    pub ncols: usize,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ub: Vec<(Vec<f64>, f64)>,
}

impl LinearSystem {
    pub fn new(ncols: usize) -> Self {
        LinearSystem {
            ncols,
            eq: Vec::new(),
            ub: Vec::new(),
        }
    }

    pub fn push_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.ncols);
        self.eq.push((coeffs, rhs));
    }

    pub fn push_ub(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.ncols);
        self.ub.push((coeffs, rhs));
    }

    /// Maximum constraint violation of a candidate point.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for (row, b) in &self.eq {
            worst = worst.max((dot(row) - b).abs());
        }
        for (row, b) in &self.ub {
            worst = worst.max(dot(row) - b);
        }
        worst
    }

    /// Rows of the standardized equality system (slacks appended), with
    /// right-hand sides sign-normalized; used by the certificate check.
    fn standardized(&self) -> (Vec<Vec<f64>>, Vec<f64>, usize) {
        let nslack = self.ub.len();
        let ncols = self.ncols + nslack;
        let mut rows = Vec::with_capacity(self.eq.len() + nslack);
        let mut rhs = Vec::with_capacity(self.eq.len() + nslack);
        for (coeffs, b) in &self.eq {
            let mut row = vec![0.0; ncols];
            row[..self.ncols].copy_from_slice(coeffs);
            rows.push(row);
            rhs.push(*b);
        }
        for (i, (coeffs, b)) in self.ub.iter().enumerate() {
            let mut row = vec![0.0; ncols];
            row[..self.ncols].copy_from_slice(coeffs);
            row[self.ncols + i] = 1.0;
            rows.push(row);
            rhs.push(*b);
        }
        for (row, b) in rows.iter_mut().zip(rhs.iter_mut()) {
            if *b < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                *b = -*b;
            }
        }
        (rows, rhs, ncols)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimplexOutcome {
    /// A point satisfying every constraint to within [`FEAS_TOL`].
    Feasible(Vec<f64>),
    /// Dual ray certifying infeasibility of the standardized system.
    Infeasible(Vec<f64>),
}

/// Phase-1 simplex: minimize the sum of artificial variables.
#[allow(clippy::needless_range_loop)] // tableau code reads best with indices
pub fn solve_feasibility(sys: &LinearSystem) -> Result<SimplexOutcome, SolverError> {
    let (rows, rhs, nreal) = sys.standardized();
    let m = rows.len();
    if m == 0 {
        return Ok(SimplexOutcome::Feasible(vec![0.0; sys.ncols]));
    }
    let ncols = nreal + m; // artificials appended
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, row) in rows.iter().enumerate() {
        let mut r = vec![0.0; ncols + 1];
        r[..nreal].copy_from_slice(row);
        r[nreal + i] = 1.0;
        r[ncols] = rhs[i];
        tab.push(r);
    }
    let mut basis: Vec<usize> = (0..m).map(|i| nreal + i).collect();
    let cost = |j: usize| -> f64 {
        if j >= nreal {
            1.0
        } else {
            0.0
        }
    };

    for _pivot in 0..MAX_PIVOTS {
        // reduced costs r_j = c_j - c_B' B^-1 A_j, recomputed densely
        let mut entering = None;
        'cols: for j in 0..ncols {
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost(j);
            for i in 0..m {
                let cb = cost(basis[i]);
                if cb != 0.0 {
                    r -= cb * tab[i][j];
                }
            }
            if r < -FEAS_TOL {
                entering = Some(j); // Bland: first improving column
                break 'cols;
            }
        }
        let Some(j) = entering else {
            // optimal: objective = sum of basic artificial values
            let obj: f64 = (0..m)
                .filter(|&i| basis[i] >= nreal)
                .map(|i| tab[i][ncols])
                .sum();
            if obj <= FEAS_TOL {
                let mut x = vec![0.0; sys.ncols];
                for i in 0..m {
                    if basis[i] < sys.ncols {
                        x[basis[i]] = tab[i][ncols].max(0.0);
                    }
                }
                return Ok(SimplexOutcome::Feasible(x));
            }
            // Farkas dual: y_i = c_B' B^-1 e_i, read off the artificial columns
            let y: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|r| cost(basis[r]) * tab[r][nreal + i]).sum())
                .collect();
            return Ok(SimplexOutcome::Infeasible(y));
        };

        // ratio test; Bland's leaving rule on ties
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i][j];
            if a > PIVOT_TOL {
                let ratio = tab[i][ncols] / a;
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || ((ratio - lr).abs() <= PIVOT_TOL && basis[i] < basis[li])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((pivot_row, _)) = leaving else {
            // phase-1 objective is bounded below by zero, so an unbounded
            // improving direction cannot occur with exact arithmetic
            return Err(SolverError::IterationLimit(MAX_PIVOTS));
        };

        let pivot = tab[pivot_row][j];
        for v in tab[pivot_row].iter_mut() {
            *v /= pivot;
        }
        for i in 0..m {
            if i != pivot_row {
                let factor = tab[i][j];
                if factor != 0.0 {
                    let src = tab[pivot_row].clone();
                    for (v, s) in tab[i].iter_mut().zip(&src) {
                        *v -= factor * s;
                    }
                }
            }
        }
        basis[pivot_row] = j;
    }
    Err(SolverError::IterationLimit(MAX_PIVOTS))
}

/// Independent check of a Farkas certificate: `y' A ≤ tol` on every real
/// column of the standardized system while `y' b > tol`.
pub fn verify_infeasibility_certificate(sys: &LinearSystem, y: &[f64]) -> bool {
    let (rows, rhs, nreal) = sys.standardized();
    if y.len() != rows.len() {
        return false;
    }
    for j in 0..nreal {
        let v: f64 = rows.iter().zip(y).map(|(row, yi)| row[j] * yi).sum();
        if v > 1e-7 {
            return false;
        }
    }
    let vb: f64 = rhs.iter().zip(y).map(|(b, yi)| b * yi).sum();
    vb > FEAS_TOL / 2.0
}
