//! Dense two-phase primal simplex with bounded variables.
//!
//! Solves `min c'x  s.t.  rows,  0 <= x <= upper`. Upper bounds are handled
//! implicitly (nonbasic variables rest at either bound), so the tableau only
//! has one row per explicit constraint. Pricing is Dantzig's rule with ties to
//! the lowest column; after a run of degenerate pivots it switches for good to
//! Bland's rule, which cannot cycle. The whole procedure is deterministic for a
//! given input.

use log::trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Per-variable upper bound; `f64::INFINITY` for none. Lower bounds are 0.
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplexError {
    /// Indices of the constraints still violated at the end of phase one.
    #[error("linear program is infeasible (constraints {rows:?} cannot be met)")]
    Infeasible { rows: Vec<usize> },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
const MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols`, the current `B^-1 A`.
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    bland: bool,
    degenerate_run: usize,
    iterations: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn price(&mut self) {
        self.reduced = self.cost.clone();
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                for (r, &v) in self.reduced.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
    }

    fn entering(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            let d = self.reduced[j];
            let score = match self.status[j] {
                Status::Basic => continue,
                Status::Lower if d < -OPT_TOL && self.upper[j] > FEAS_TOL => -d,
                Status::Upper if d > OPT_TOL => d,
                _ => continue,
            };
            if self.bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Runs the simplex loop on the current costs.
    fn optimize(&mut self) -> Result<(), SimplexError> {
        self.price();
        loop {
            if self.iterations >= MAX_ITERS {
                return Err(SimplexError::IterationLimit);
            }
            let Some(q) = self.entering() else {
                return Ok(());
            };
            self.iterations += 1;
            let dir = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };

            // Ratio test: the smallest step that drives a basic variable to a bound.
            let mut limits: Vec<(usize, f64, Status)> = Vec::new();
            for i in 0..self.rows {
                let rate = dir * self.at(i, q);
                let b = self.basis[i];
                if rate > PIVOT_TOL {
                    limits.push((i, self.beta[i].max(0.0) / rate, Status::Lower));
                } else if rate < -PIVOT_TOL && self.upper[b].is_finite() {
                    limits.push((i, (self.upper[b] - self.beta[i]).max(0.0) / -rate, Status::Upper));
                }
            }
            let min_limit = limits.iter().fold(f64::INFINITY, |m, l| m.min(l.1));
            let mut leave: Option<(usize, f64, Status)> = None;
            for &(i, limit, to) in &limits {
                if limit > min_limit + 1e-12 {
                    continue;
                }
                let take = match leave {
                    None => true,
                    Some((r, _, _)) => {
                        let (b, br) = (self.basis[i], self.basis[r]);
                        if self.bland {
                            b < br
                        } else {
                            let (cand, cur) = (self.at(i, q).abs(), self.at(r, q).abs());
                            cand > cur || (cand == cur && b < br)
                        }
                    }
                };
                if take {
                    leave = Some((i, limit, to));
                }
            }

            let flip = self.upper[q] <= min_limit;
            let step = if flip {
                self.upper[q]
            } else {
                leave.map_or(f64::INFINITY, |l| l.1)
            };
            if !step.is_finite() {
                return Err(SimplexError::Unbounded);
            }

            if step <= 1e-12 {
                self.degenerate_run += 1;
                if !self.bland && self.degenerate_run > DEGENERATE_RUN {
                    trace!(
                        "simplex: switching to Bland's rule after {} degenerate pivots",
                        self.degenerate_run
                    );
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }

            for i in 0..self.rows {
                let v = self.at(i, q);
                if v != 0.0 {
                    self.beta[i] -= step * dir * v;
                }
            }

            if flip {
                self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
            } else if let Some((r, _, to)) = leave {
                let entering_value = if dir > 0.0 { step } else { self.upper[q] - step };
                let leaving = self.basis[r];
                self.status[leaving] = to;
                self.pivot(r, q);
                self.beta[r] = entering_value;
                self.status[q] = Status::Basic;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.at(r, q);
        {
            let row = &mut self.a[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
        }
        let pivot_row: Vec<f64> = self.a[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + q];
            if f != 0.0 {
                let row = &mut self.a[i * cols..(i + 1) * cols];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (d, &pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= f * pv;
            }
            self.reduced[q] = 0.0;
        }
        self.basis[r] = q;
    }

    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower => 0.0,
            Status::Upper => self.upper[j],
            Status::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.beta[r]
            }
        }
    }
}

/// Solves `lp` to optimality.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, SimplexError> {
    let n = lp.num_vars();
    if lp.upper.len() != n {
        return Err(SimplexError::Malformed("upper bounds length mismatch".into()));
    }
    for (k, c) in lp.constraints.iter().enumerate() {
        if !c.rhs.is_finite() || c.coeffs.iter().any(|&(j, v)| j >= n || !v.is_finite()) {
            return Err(SimplexError::Malformed(format!(
                "constraint {k} is not finite or indexes past the variables"
            )));
        }
    }
    if lp.objective.iter().any(|c| !c.is_finite()) || lp.upper.iter().any(|u| u.is_nan() || *u < 0.0) {
        return Err(SimplexError::Malformed("objective or bounds not valid".into()));
    }

    let rows = lp.constraints.len();
    let slack_count = lp.constraints.iter().filter(|c| c.cmp != Cmp::Eq).count();

    // Dense rows over structural + slack columns, scaled and sign-normalized.
    let base_cols = n + slack_count;
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let mut rhs = Vec::with_capacity(rows);
    let mut slack_of_row = vec![None; rows];
    let mut next_slack = n;
    for (k, c) in lp.constraints.iter().enumerate() {
        let mut row = vec![0.0; base_cols];
        for &(j, v) in &c.coeffs {
            row[j] += v;
        }
        match c.cmp {
            Cmp::Le => {
                row[next_slack] = 1.0;
                slack_of_row[k] = Some(next_slack);
                next_slack += 1;
            }
            Cmp::Ge => {
                row[next_slack] = -1.0;
                slack_of_row[k] = Some(next_slack);
                next_slack += 1;
            }
            Cmp::Eq => {}
        }
        let mut b = c.rhs;
        let scale = row[..n].iter().fold(b.abs(), |acc, v| acc.max(v.abs()));
        if scale > 0.0 {
            for v in row[..n].iter_mut() {
                *v /= scale;
            }
            b /= scale;
        }
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        dense.push(row);
        rhs.push(b);
    }

    // Initial basis: a slack with +1 where possible, otherwise an artificial.
    let mut artificial_rows = Vec::new();
    let mut basis = vec![0; rows];
    for k in 0..rows {
        match slack_of_row[k] {
            Some(s) if dense[k][s] > 0.0 => basis[k] = s,
            _ => artificial_rows.push(k),
        }
    }
    let cols = base_cols + artificial_rows.len();
    let mut a = vec![0.0; rows * cols];
    for k in 0..rows {
        a[k * cols..k * cols + base_cols].copy_from_slice(&dense[k]);
    }
    for (i, &k) in artificial_rows.iter().enumerate() {
        let col = base_cols + i;
        a[k * cols + col] = 1.0;
        basis[k] = col;
    }

    let mut upper = vec![f64::INFINITY; cols];
    upper[..n].copy_from_slice(&lp.upper);
    let mut status = vec![Status::Lower; cols];
    for &b in &basis {
        status[b] = Status::Basic;
    }

    let mut phase1_cost = vec![0.0; cols];
    for c in phase1_cost.iter_mut().skip(base_cols) {
        *c = 1.0;
    }

    let mut t = Tableau {
        rows,
        cols,
        a,
        beta: rhs.clone(),
        basis,
        status,
        upper,
        cost: phase1_cost,
        reduced: vec![0.0; cols],
        bland: false,
        degenerate_run: 0,
        iterations: 0,
    };

    if !artificial_rows.is_empty() {
        t.optimize()?;
        let residual: f64 = (base_cols..cols).map(|j| t.value(j)).sum();
        let tol = FEAS_TOL * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(*v)));
        if residual > tol {
            let rows_left = artificial_rows
                .iter()
                .enumerate()
                .filter(|&(i, _)| t.value(base_cols + i) > tol)
                .map(|(_, &k)| k)
                .collect();
            return Err(SimplexError::Infeasible { rows: rows_left });
        }
        for j in base_cols..cols {
            t.upper[j] = 0.0;
        }
    }

    let cscale = lp.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut cost = vec![0.0; cols];
    if cscale > 0.0 {
        for (c, &o) in cost.iter_mut().zip(&lp.objective) {
            *c = o / cscale;
        }
    }
    t.cost = cost;
    t.bland = false;
    t.degenerate_run = 0;
    t.optimize()?;

    let x: Vec<f64> = (0..n).map(|j| t.value(j).clamp(0.0, lp.upper[j])).collect();
    let objective = x.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: t.iterations,
    })
}

/// Largest violation of any constraint or bound by `x`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for c in &lp.constraints {
        let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
        let viol = match c.cmp {
            Cmp::Le => lhs - c.rhs,
            Cmp::Ge => c.rhs - lhs,
            Cmp::Eq => (lhs - c.rhs).abs(),
        };
        worst = worst.max(viol);
    }
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(-v).max(v - lp.upper[j]);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(coeffs: &[(usize, f64)], cmp: Cmp, rhs: f64) -> Constraint {
        Constraint {
            coeffs: coeffs.to_vec(),
            cmp,
            rhs,
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![
                row(&[(0, 1.0)], Cmp::Le, 4.0),
                row(&[(1, 2.0)], Cmp::Le, 12.0),
                row(&[(0, 3.0), (1, 2.0)], Cmp::Le, 18.0),
            ],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // min x + 2y + 3z, x + y + z = 2, x, y, z in [0, 1]  ->  x = y = 1
        let lp = LinearProgram {
            objective: vec![1.0, 2.0, 3.0],
            upper: vec![1.0; 3],
            constraints: vec![row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Cmp::Eq, 2.0)],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert_eq!(s.x.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn detects_infeasible() {
        let lp = LinearProgram {
            objective: vec![1.0],
            upper: vec![1.0],
            constraints: vec![row(&[(0, 1.0)], Cmp::Ge, 2.0)],
        };
        assert_eq!(solve(&lp), Err(SimplexError::Infeasible { rows: vec![0] }));
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram {
            objective: vec![-1.0, 0.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![row(&[(0, 1.0), (1, -1.0)], Cmp::Le, 1.0)],
        };
        assert_eq!(solve(&lp), Err(SimplexError::Unbounded));
    }

    #[test]
    fn negative_rhs_rows() {
        // min x, -x <= -0.25  ->  x = 0.25
        let lp = LinearProgram {
            objective: vec![1.0],
            upper: vec![1.0],
            constraints: vec![row(&[(0, -1.0)], Cmp::Le, -0.25)],
        };
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ties_pick_lowest_column() {
        // Two identical columns: the first one carries the mass.
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            upper: vec![1.0; 2],
            constraints: vec![row(&[(0, 1.0), (1, 1.0)], Cmp::Eq, 1.0)],
        };
        let s = solve(&lp).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
    }

    /// Independent oracle: enumerate every vertex of a tiny bounded polytope
    /// by intersecting `n` active constraints, keep the feasible ones.
    fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        // Hyperplanes a.x = b from rows and bounds.
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &lp.constraints {
            let mut a = vec![0.0; n];
            for &(j, v) in &c.coeffs {
                a[j] += v;
            }
            planes.push((a, c.rhs));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), 0.0));
            planes.push((e, lp.upper[j]));
        }
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let mut m: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| {
                    let mut r = planes[i].0.clone();
                    r.push(planes[i].1);
                    r
                })
                .collect();
            if let Some(x) = gauss(&mut m, n) {
                if max_violation(lp, &x) <= 1e-9 {
                    let obj: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for t in i + 1..n {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn gauss(m: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
            if m[piv][col].abs() < 1e-10 {
                return None;
            }
            m.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
    }

    fn small_lp() -> impl Strategy<Value = LinearProgram> {
        let n = 3usize;
        let coeff = -3i32..=3;
        let rows = prop::collection::vec((prop::collection::vec(coeff, n), 0u8..3, -2i32..=4), 1..=3);
        (prop::collection::vec(-5i32..=5, n), rows).prop_map(move |(c, rows)| LinearProgram {
            objective: c.into_iter().map(f64::from).collect(),
            upper: vec![1.0, 2.0, 1.5],
            constraints: rows
                .into_iter()
                .map(|(a, k, b)| Constraint {
                    coeffs: a.into_iter().enumerate().map(|(j, v)| (j, f64::from(v))).collect(),
                    cmp: [Cmp::Le, Cmp::Ge, Cmp::Eq][k as usize],
                    rhs: f64::from(b) / 2.0,
                })
                .collect(),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn matches_vertex_enumeration(lp in small_lp()) {
            let oracle = vertex_oracle(&lp);
            match solve(&lp) {
                Ok(sol) => {
                    let best = oracle.expect("simplex found a point the oracle missed");
                    prop_assert!(max_violation(&lp, &sol.x) <= 1e-9);
                    prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()),
                        "simplex {} vs oracle {}", sol.objective, best);
                }
                Err(SimplexError::Infeasible { .. }) => prop_assert!(oracle.is_none()),
                Err(e) => prop_assert!(false, "unexpected {e:?}"),
            }
        }
    }
}
