//! Exact linear programming over the rationals.
//!
//! Systems have the form `A x = b, x >= 0`. Phase-1 simplex with Bland's
//! least-index rule decides feasibility; infeasible systems yield a dual
//! vector `y` with `y^T A <= 0` and `y^T b > 0`, the certificate that no
//! nonnegative solution exists. A second phase maximizes a linear objective.
//! Every answer is re-verified against the original system before it is
//! returned, so a bug in the pivoting cannot produce a false certificate.

use num_traits::{Signed, Zero};

use crate::rational::{q0, q1, Q};

/// Result of a feasibility run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    /// A nonnegative solution of `A x = b`.
    Feasible(Vec<Q>),
    /// A vector `y` with `y^T A <= 0` and `y^T b > 0`.
    Infeasible(Vec<Q>),
}

/// Result of an optimization run over a feasible system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaxOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Unbounded,
}

struct Tableau {
    /// `m` rows by `width` columns; the last column is the right-hand side.
    rows: Vec<Vec<Q>>,
    /// Reduced-cost row; its last entry carries the running objective value.
    obj: Vec<Q>,
    /// Basic column of each row.
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Q {
        &self.rows[i][self.width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col].clone();
        debug_assert!(!inv.is_zero());
        for v in self.rows[row].iter_mut() {
            *v /= &inv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let factor = r[col].clone();
            for (v, p) in r.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        if !self.obj[col].is_zero() {
            let factor = self.obj[col].clone();
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex to optimality with Bland's rule on the columns in
    /// `0..cols`. Returns false if the objective is unbounded below.
    fn run(&mut self, cols: usize) -> bool {
        loop {
            let entering = (0..cols).find(|&j| self.obj[j].is_negative());
            let col = match entering {
                Some(c) => c,
                None => return true,
            };
            let mut leaving: Option<usize> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][col].is_positive() {
                    continue;
                }
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        let cur = self.rhs(l) / &self.rows[l][col];
                        let cand = self.rhs(i) / &self.rows[i][col];
                        // Ties leave the smallest basic index (Bland).
                        cand < cur || (cand == cur && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leaving = Some(i);
                }
            }
            match leaving {
                Some(row) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shape(a: &[Vec<Q>], b: &[Q]) -> usize {
    assert_eq!(a.len(), b.len(), "one rhs entry per row");
    let n = a.first().map(|r| r.len()).unwrap_or(0);
    for r in a {
        assert_eq!(r.len(), n, "ragged constraint matrix");
    }
    n
}

/// Phase-1 tableau for `A x = b` with rows flipped to a nonnegative rhs.
/// Columns: `n` structural, then `m` artificial, then the rhs.
fn phase1(a: &[Vec<Q>], b: &[Q]) -> (Tableau, Vec<bool>) {
    let m = a.len();
    let n = check_shape(a, b);
    let width = n + m + 1;
    let flipped: Vec<bool> = b.iter().map(|v| v.is_negative()).collect();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(width);
        for j in 0..n {
            row.push(if flipped[i] { -&a[i][j] } else { a[i][j].clone() });
        }
        for k in 0..m {
            row.push(if k == i { q1() } else { q0() });
        }
        row.push(if flipped[i] { -&b[i] } else { b[i].clone() });
        rows.push(row);
    }
    // Phase-1 cost: minimize the sum of artificials. Reduced costs start at
    // cost minus the sum of the rows (every artificial is basic with cost 1).
    let mut obj = vec![q0(); width];
    for (j, o) in obj.iter_mut().enumerate() {
        let cost = if (n..n + m).contains(&j) { q1() } else { q0() };
        let col_sum: Q = rows.iter().map(|r| r[j].clone()).sum();
        *o = cost - col_sum;
    }
    let basis = (n..n + m).collect();
    let mut t = Tableau {
        rows,
        obj,
        basis,
        width,
    };
    let finished = t.run(n + m);
    debug_assert!(finished, "phase 1 is bounded below by zero");
    (t, flipped)
}

/// Decides `A x = b, x >= 0`. The verified answer is either a solution or a
/// dual infeasibility certificate for the original (unflipped) system.
pub fn solve_eq(a: &[Vec<Q>], b: &[Q]) -> LpOutcome {
    let m = a.len();
    let n = check_shape(a, b);
    let (t, flipped) = phase1(a, b);
    // obj's rhs entry holds minus the objective value.
    let residue = -t.obj[t.width - 1].clone();
    if residue.is_positive() {
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            // Reduced cost of artificial i is 1 - y_i in the flipped system.
            let yi = q1() - &t.obj[n + i];
            y.push(if flipped[i] { -yi } else { yi });
        }
        for (j, col) in (0..n).map(|j| (j, a.iter().map(|r| r[j].clone()).collect::<Vec<_>>())) {
            assert!(
                !dot(&y, &col).is_positive(),
                "certificate violates column {j}"
            );
        }
        assert!(dot(&y, b).is_positive(), "certificate misses the rhs");
        return LpOutcome::Infeasible(y);
    }
    let x = extract(&t, n);
    verify_solution(a, b, &x);
    LpOutcome::Feasible(x)
}

fn extract(t: &Tableau, n: usize) -> Vec<Q> {
    let mut x = vec![q0(); n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs(i).clone();
        }
    }
    x
}

fn verify_solution(a: &[Vec<Q>], b: &[Q], x: &[Q]) {
    for (row, rhs) in a.iter().zip(b) {
        assert_eq!(&dot(row, x), rhs, "solution violates a constraint");
    }
    assert!(x.iter().all(|v| !v.is_negative()), "negative coordinate");
}

/// Maximizes `c^T x` over `A x = b, x >= 0`. Returns `None` when the system
/// is infeasible. Optimal solutions are verified to satisfy the constraints;
/// the value is exact.
pub fn maximize(a: &[Vec<Q>], b: &[Q], c: &[Q]) -> Option<MaxOutcome> {
    let n = check_shape(a, b);
    assert_eq!(c.len(), n, "one cost per structural column");
    let (mut t, _) = phase1(a, b);
    if (-t.obj[t.width - 1].clone()).is_positive() {
        return None;
    }
    // Drive artificials out of the basis; rows that cannot pivot are
    // redundant equations and are dropped.
    let mut keep = vec![true; t.rows.len()];
    for i in 0..t.rows.len() {
        if t.basis[i] < n {
            continue;
        }
        match (0..n).find(|&j| !t.rows[i][j].is_zero()) {
            Some(j) => t.pivot(i, j),
            None => keep[i] = false,
        }
    }
    let mut rows = Vec::new();
    let mut basis = Vec::new();
    for (i, k) in keep.iter().enumerate() {
        if *k {
            // Drop the artificial columns along with redundant rows.
            let mut row: Vec<Q> = t.rows[i][..n].to_vec();
            row.push(t.rhs(i).clone());
            rows.push(row);
            basis.push(t.basis[i]);
        }
    }
    let width = n + 1;
    // Minimize -c^T x. The rhs entry of the reduced-cost row then equals the
    // current value of c^T x.
    let mut obj = vec![q0(); width];
    for (j, o) in obj.iter_mut().enumerate().take(n) {
        *o = -c[j].clone();
    }
    for (i, &bi) in basis.iter().enumerate() {
        if !obj[bi].is_zero() {
            let factor = obj[bi].clone();
            let row = rows[i].clone();
            for (v, p) in obj.iter_mut().zip(&row) {
                *v -= &factor * p;
            }
        }
    }
    let mut t2 = Tableau {
        rows,
        obj,
        basis,
        width,
    };
    if !t2.run(n) {
        return Some(MaxOutcome::Unbounded);
    }
    let x = extract(&t2, n);
    verify_solution(a, b, &x);
    let value = dot(c, &x);
    assert_eq!(value, t2.obj[width - 1], "objective bookkeeping diverged");
    Some(MaxOutcome::Optimal { x, value })
}
