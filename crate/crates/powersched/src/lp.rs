//! LP façade over HiGHS, a column-generation driver, and bipartite matching
//! helpers used when decomposing fractional assignments.

use crate::{Error, Result};
use std::collections::HashSet;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct RowDef {
    relation: Relation,
    rhs: f64,
    label: String,
}

#[derive(Debug, Clone)]
struct ColDef {
    cost: f64,
    entries: Vec<(usize, f64)>,
    lower: f64,
    upper: Option<f64>,
    label: String,
}

/// Minimization LP built row-by-row and column-by-column. Variables default to
/// `x >= 0`; general lower bounds are shifted away at solve time and upper
/// bounds become internal rows.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    rows: Vec<RowDef>,
    cols: Vec<ColDef>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, relation: Relation, rhs: f64, label: impl Into<String>) -> usize {
        assert!(rhs.is_finite());
        self.rows.push(RowDef {
            relation,
            rhs,
            label: label.into(),
        });
        self.rows.len() - 1
    }

    pub fn add_col(
        &mut self,
        cost: f64,
        entries: Vec<(usize, f64)>,
        label: impl Into<String>,
    ) -> usize {
        assert!(cost.is_finite() && entries.iter().all(|(r, v)| *r < self.rows.len() && v.is_finite()));
        self.cols.push(ColDef {
            cost,
            entries,
            lower: 0.0,
            upper: None,
            label: label.into(),
        });
        self.cols.len() - 1
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: Option<f64>) {
        self.cols[col].lower = lower;
        self.cols[col].upper = upper;
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_label(&self, r: usize) -> &str {
        &self.rows[r].label
    }

    pub fn col_label(&self, c: usize) -> &str {
        &self.cols[c].label
    }

    fn check_labels(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.rows {
            if !seen.insert(("row", r.label.as_str())) {
                return Err(Error::Lp(format!("duplicate row label {:?}", r.label)));
            }
        }
        for c in &self.cols {
            if !seen.insert(("col", c.label.as_str())) {
                return Err(Error::Lp(format!("duplicate column label {:?}", c.label)));
            }
        }
        Ok(())
    }

    /// Plain-text dump, one row per line, for external cross-checking:
    /// `label: c1*x1 + c2*x2 <= rhs` followed by an objective line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("min:");
        for c in &self.cols {
            out.push_str(&format!(" {:+}*{}", c.cost, c.label));
        }
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{}:", row.label));
            for c in &self.cols {
                for &(ri, v) in &c.entries {
                    if ri == r {
                        out.push_str(&format!(" {:+}*{}", v, c.label));
                    }
                }
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            out.push_str(&format!(" {} {}\n", rel, row.rhs));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterCap,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Value per structural column, in declaration order.
    pub primal: Vec<f64>,
    /// Dual value per declared row. Signs follow the convention
    /// `objective = sum_r dual_r * rhs_r` for a minimization problem, so
    /// duals of `>=` rows are non-negative and duals of `<=` rows are
    /// non-positive at optimality.
    pub duals: Vec<f64>,
    pub objective: f64,
}

/// Incremental LP state backed by the HiGHS simplex. Column generation keeps
/// one alive and appends columns between reoptimizations, so each resolve
/// warm-starts from the previous basis.
pub struct LpSolver {
    row_handles: Vec<highs::Row>,
    model: Option<highs::Model>,
    n_cols: usize,
    status: LpStatus,
    primal: Vec<f64>,
    duals: Vec<f64>,
    objective: f64,
}

impl LpSolver {
    pub fn new(lp: &LinearProgram, _tol: f64) -> Result<Self> {
        lp.check_labels()?;
        let mut problem = highs::ColProblem::new();
        let mut row_handles = Vec::with_capacity(lp.rows.len());
        for row in &lp.rows {
            let h = match row.relation {
                Relation::Le => problem.add_row(..=row.rhs),
                Relation::Eq => problem.add_row(row.rhs..=row.rhs),
                Relation::Ge => problem.add_row(row.rhs..),
            };
            row_handles.push(h);
        }
        for col in &lp.cols {
            let factors: Vec<(highs::Row, f64)> = col
                .entries
                .iter()
                .map(|&(r, v)| (row_handles[r], v))
                .collect();
            match col.upper {
                Some(u) => problem.add_column(col.cost, col.lower..=u, factors),
                None => problem.add_column(col.cost, col.lower.., factors),
            }
        }
        let mut model = problem.optimise(highs::Sense::Minimise);
        model.make_quiet();
        model.set_option("threads", 1i32);
        model.set_option("parallel", "off");
        if let Ok(solver) = std::env::var("POWERSCHED_LP_SOLVER") {
            model.set_option("solver", solver.as_str());
        }
        if std::env::var("POWERSCHED_LP_DEBUG").is_ok() {
            model.set_option("output_flag", true);
        }
        Ok(LpSolver {
            row_handles,
            model: Some(model),
            n_cols: lp.cols.len(),
            status: LpStatus::IterCap,
            primal: Vec::new(),
            duals: Vec::new(),
            objective: f64::NAN,
        })
    }

    pub fn solve(&mut self) -> LpStatus {
        let model = match self.model.take() {
            Some(m) => m,
            None => return self.status,
        };
        let debug = std::env::var("POWERSCHED_LP_DEBUG").is_ok();
        let t0 = std::time::Instant::now();
        match model.try_solve() {
            Ok(solved) => {
                use highs::HighsModelStatus as S;
                self.status = match solved.status() {
                    S::Optimal | S::ModelEmpty => LpStatus::Optimal,
                    S::Infeasible => LpStatus::Infeasible,
                    S::Unbounded | S::UnboundedOrInfeasible => LpStatus::Unbounded,
                    _ => LpStatus::IterCap,
                };
                if self.status == LpStatus::Optimal {
                    if solved.status() == S::ModelEmpty {
                        self.primal.clear();
                        self.duals.clear();
                        self.objective = 0.0;
                    } else {
                        let sol = solved.get_solution();
                        self.primal = sol.columns().to_vec();
                        self.duals = sol.dual_rows().to_vec();
                        self.objective = solved.objective_value();
                    }
                }
                if debug {
                    eprintln!(
                        "lp solve: {} cols status {:?} obj {:.6} in {:?}",
                        self.n_cols,
                        self.status,
                        self.objective,
                        t0.elapsed()
                    );
                }
                self.model = Some(highs::Model::from(solved));
            }
            Err(_) => {
                // the model is consumed on a hard solver error; leave the
                // state poisoned so later calls keep reporting failure
                self.status = LpStatus::IterCap;
            }
        }
        self.status
    }

    /// Appends a nonnegative structural column; takes effect on the next
    /// (re)solve. Returns the column index.
    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        let model = self.model.as_mut().expect("solver lost after a hard error");
        let factors: Vec<(highs::Row, f64)> = entries
            .iter()
            .map(|&(r, v)| (self.row_handles[r], v))
            .collect();
        model.add_col(cost, 0.0.., factors);
        self.n_cols += 1;
        self.n_cols - 1
    }

    pub fn reoptimize(&mut self) -> LpStatus {
        self.solve()
    }

    /// Row duals in the solution-struct sign convention.
    pub fn duals(&self) -> Vec<f64> {
        self.duals.clone()
    }

    /// Value per structural column, in insertion order.
    pub fn primal(&self) -> Vec<f64> {
        self.primal.clone()
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn reduced_cost_of(&self, cost: f64, entries: &[(usize, f64)]) -> f64 {
        let mut rc = cost;
        for &(r, v) in entries {
            rc -= self.duals[r] * v;
        }
        rc
    }

    pub fn solution(&self) -> LpSolution {
        LpSolution {
            status: self.status,
            primal: self.primal.clone(),
            duals: self.duals.clone(),
            objective: self.objective,
        }
    }
}

/// One-shot solve.
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    let mut s = LpSolver::new(lp, tol)?;
    s.solve();
    Ok(s.solution())
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
}

/// One-shot mixed-integer solve; `integer[c]` marks column `c` as integral.
/// No duals: branch-and-bound solutions carry none.
pub fn solve_mip(lp: &LinearProgram, integer: &[bool]) -> Result<MipSolution> {
    lp.check_labels()?;
    assert_eq!(integer.len(), lp.cols.len());
    let mut problem = highs::ColProblem::new();
    let row_handles: Vec<highs::Row> = lp
        .rows
        .iter()
        .map(|row| match row.relation {
            Relation::Le => problem.add_row(..=row.rhs),
            Relation::Eq => problem.add_row(row.rhs..=row.rhs),
            Relation::Ge => problem.add_row(row.rhs..),
        })
        .collect();
    for (col, &int) in lp.cols.iter().zip(integer) {
        let factors: Vec<(highs::Row, f64)> = col
            .entries
            .iter()
            .map(|&(r, v)| (row_handles[r], v))
            .collect();
        match (int, col.upper) {
            (true, Some(u)) => problem.add_integer_column(col.cost, col.lower..=u, factors),
            (true, None) => problem.add_integer_column(col.cost, col.lower.., factors),
            (false, Some(u)) => problem.add_column(col.cost, col.lower..=u, factors),
            (false, None) => problem.add_column(col.cost, col.lower.., factors),
        };
    }
    let mut model = problem.optimise(highs::Sense::Minimise);
    model.make_quiet();
    model.set_option("threads", 1i32);
    model.set_option("parallel", "off");
    match model.try_solve() {
        Ok(solved) => {
            use highs::HighsModelStatus as S;
            let status = match solved.status() {
                S::Optimal | S::ModelEmpty => LpStatus::Optimal,
                S::Infeasible => LpStatus::Infeasible,
                S::Unbounded | S::UnboundedOrInfeasible => LpStatus::Unbounded,
                other => return Err(Error::Lp(format!("MIP solve ended with {other:?}"))),
            };
            let (primal, objective) = if status == LpStatus::Optimal && lp.cols.is_empty() {
                (Vec::new(), 0.0)
            } else if status == LpStatus::Optimal {
                let sol = solved.get_solution();
                (sol.columns().to_vec(), solved.objective_value())
            } else {
                (Vec::new(), f64::NAN)
            };
            Ok(MipSolution {
                status,
                primal,
                objective,
            })
        }
        Err(e) => Err(Error::Lp(format!("MIP solve failed: {e:?}"))),
    }
}

/// A candidate column returned by a pricing oracle.
#[derive(Debug, Clone)]
pub struct Column {
    pub cost: f64,
    pub entries: Vec<(usize, f64)>,
    pub label: String,
}

/// Exact pricer contract: returns columns with reduced cost < -tol, or an
/// empty vector certifying that none exists.
pub trait PricingOracle {
    fn price(&mut self, duals: &[f64]) -> Vec<Column>;
}

impl<F: FnMut(&[f64]) -> Vec<Column>> PricingOracle for F {
    fn price(&mut self, duals: &[f64]) -> Vec<Column> {
        self(duals)
    }
}

#[derive(Debug, Clone)]
pub struct ColumnGenResult {
    pub solution: LpSolution,
    /// Labels of every column added by the pricer, in insertion order.
    pub generated: Vec<String>,
    pub iterations: usize,
}

/// Column generation on a feasible master. The pricer sees the master duals
/// (declared rows, solution-convention signs) each round; termination is
/// certified by the pricer returning no column.
pub fn column_generation(
    master: &LinearProgram,
    pricer: &mut dyn PricingOracle,
    tol: f64,
    max_iters: usize,
) -> Result<ColumnGenResult> {
    let mut simplex = LpSolver::new(master, tol)?;
    let status = simplex.solve();
    if status != LpStatus::Optimal {
        return Ok(ColumnGenResult {
            solution: simplex.solution(),
            generated: Vec::new(),
            iterations: 0,
        });
    }
    let mut generated = Vec::new();
    let accept = 1e-7_f64.max(tol);
    for iter in 0..max_iters {
        let duals = simplex.duals();
        let cols = pricer.price(&duals);
        let mut added = 0;
        for col in cols {
            let rc = simplex.reduced_cost_of(col.cost, &col.entries);
            if rc < -accept {
                simplex.add_column(col.cost, col.entries);
                generated.push(col.label);
                added += 1;
            }
        }
        if added == 0 {
            return Ok(ColumnGenResult {
                solution: simplex.solution(),
                generated,
                iterations: iter,
            });
        }
        let status = simplex.reoptimize();
        if status != LpStatus::Optimal {
            return Ok(ColumnGenResult {
                solution: simplex.solution(),
                generated,
                iterations: iter + 1,
            });
        }
    }
    let mut solution = simplex.solution();
    solution.status = LpStatus::IterCap;
    Ok(ColumnGenResult {
        solution,
        generated,
        iterations: max_iters,
    })
}

/// Maximum-weight bipartite matching with unmatched vertices allowed
/// (equivalently: edges of weight <= 0 are dropped, then total weight is
/// maximized). Exact subset-sum dynamic program over the smaller side;
/// deterministic lexicographic tie-break on the pair list.
pub fn max_weight_bipartite_matching(weights: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let n_left = weights.len();
    let n_right = weights.first().map_or(0, |r| r.len());
    if n_left == 0 || n_right == 0 {
        return (Vec::new(), 0.0);
    }
    if n_right > n_left && n_left <= 20 {
        // Transpose so the bitmask ranges over the smaller side.
        let t: Vec<Vec<f64>> = (0..n_right)
            .map(|j| (0..n_left).map(|i| weights[i][j]).collect())
            .collect();
        let (pairs, w) = max_weight_bipartite_matching(&t);
        let mut mapped: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (b, a)).collect();
        mapped.sort_unstable();
        return (mapped, w);
    }
    assert!(n_right <= 20, "matching DP limited to 20 right vertices");

    let full = 1usize << n_right;
    // dp[i][mask]: best weight using left vertices i.. with rights in mask free.
    let mut dp = vec![vec![0.0f64; full]; n_left + 1];
    for i in (0..n_left).rev() {
        for mask in 0..full {
            let mut best = dp[i + 1][mask];
            for j in 0..n_right {
                let w = weights[i][j];
                if w > 0.0 && mask >> j & 1 == 1 {
                    let cand = w + dp[i + 1][mask ^ (1 << j)];
                    if cand > best {
                        best = cand;
                    }
                }
            }
            dp[i][mask] = best;
        }
    }
    let mut pairs = Vec::new();
    let mut mask = full - 1;
    let mut total = 0.0;
    for i in 0..n_left {
        let target = dp[i][mask];
        let mut chosen = None;
        for j in 0..n_right {
            let w = weights[i][j];
            if w > 0.0 && mask >> j & 1 == 1 && w + dp[i + 1][mask ^ (1 << j)] >= target {
                chosen = Some(j);
                break;
            }
        }
        if let Some(j) = chosen {
            pairs.push((i, j));
            total += weights[i][j];
            mask ^= 1 << j;
        }
    }
    (pairs, total)
}

/// Decomposes a bipartite weighted graph in which every `A` vertex has
/// weighted degree exactly `w` and every `B` vertex at most `w` into
/// perfect-on-`A` matchings with coefficients summing to `w`; for every edge
/// the coefficients of the matchings containing it re-sum to its weight.
pub fn perfect_matching_decomposition(
    a_size: usize,
    b_size: usize,
    edges: &[(usize, usize, f64)],
    tol: f64,
) -> Result<Vec<(Vec<(usize, usize)>, f64)>> {
    let mut a_deg = vec![0.0; a_size];
    let mut b_deg = vec![0.0; b_size];
    for &(a, b, w) in edges {
        if w < -tol {
            return Err(Error::Lp(format!("negative edge weight {w}")));
        }
        a_deg[a] += w;
        b_deg[b] += w;
    }
    let w_total = a_deg.first().copied().unwrap_or(0.0);
    if w_total <= tol {
        return Err(Error::Lp("A-side weighted degree must be positive".into()));
    }
    for (a, d) in a_deg.iter().enumerate() {
        if (d - w_total).abs() > tol * (1.0 + w_total) {
            return Err(Error::Lp(format!(
                "A vertex {a} has weighted degree {d}, expected {w_total}"
            )));
        }
    }
    for (b, d) in b_deg.iter().enumerate() {
        if *d > w_total + tol * (1.0 + w_total) {
            return Err(Error::Lp(format!(
                "B vertex {b} has weighted degree {d} > {w_total}"
            )));
        }
    }

    // Residual edge weights, normalized so A-degrees are 1.
    let mut residual: Vec<(usize, usize, f64)> = edges
        .iter()
        .filter(|&&(_, _, w)| w > tol)
        .map(|&(a, b, w)| (a, b, w / w_total))
        .collect();
    let eps = (tol / w_total).max(1e-13);
    let mut out = Vec::new();
    for _round in 0..edges.len() + 1 {
        let live: Vec<usize> = (0..residual.len())
            .filter(|&k| residual[k].2 > eps)
            .collect();
        if live.is_empty() {
            break;
        }
        // Kuhn's algorithm for a perfect matching on A in the live subgraph.
        let mut adj = vec![Vec::new(); a_size];
        for &k in &live {
            adj[residual[k].0].push(k);
        }
        let mut b_match: Vec<Option<usize>> = vec![None; b_size]; // edge index
        let mut matched_edge: Vec<Option<usize>> = vec![None; a_size];
        fn augment(
            a: usize,
            adj: &[Vec<usize>],
            residual: &[(usize, usize, f64)],
            visited: &mut [bool],
            b_match: &mut [Option<usize>],
            matched_edge: &mut [Option<usize>],
        ) -> bool {
            for &k in &adj[a] {
                let b = residual[k].1;
                if visited[b] {
                    continue;
                }
                visited[b] = true;
                let free = match b_match[b] {
                    None => true,
                    Some(prev) => augment(
                        residual[prev].0,
                        adj,
                        residual,
                        visited,
                        b_match,
                        matched_edge,
                    ),
                };
                if free {
                    b_match[b] = Some(k);
                    matched_edge[a] = Some(k);
                    return true;
                }
            }
            false
        }
        for a in 0..a_size {
            let mut visited = vec![false; b_size];
            if !augment(a, &adj, &residual, &mut visited, &mut b_match, &mut matched_edge) {
                return Err(Error::Lp(format!(
                    "no perfect matching on A (vertex {a}); degree conditions violated numerically"
                )));
            }
        }
        let matched: Vec<usize> = matched_edge.iter().map(|e| e.unwrap()).collect();
        let lambda = matched
            .iter()
            .map(|&k| residual[k].2)
            .fold(f64::INFINITY, f64::min);
        for &k in &matched {
            residual[k].2 -= lambda;
        }
        let pairs: Vec<(usize, usize)> = matched
            .iter()
            .map(|&k| (residual[k].0, residual[k].1))
            .collect();
        out.push((pairs, lambda * w_total));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_lp() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Ge, 1.0, "r");
        lp.add_col(1.0, vec![(r, 1.0)], "x");
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_lp_objective() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Le, 1.0, "cap");
        lp.add_col(-1.0, vec![(r, 1.0)], "x");
        lp.add_col(-1.0, vec![(r, 1.0)], "y");
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.primal[0] + sol.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_lp_is_reported() {
        let mut lp = LinearProgram::new();
        let r1 = lp.add_row(Relation::Ge, 2.0, "r1");
        let r2 = lp.add_row(Relation::Le, 1.0, "r2");
        lp.add_col(1.0, vec![(r1, 1.0), (r2, 1.0)], "x");
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_lp_is_reported() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Ge, 1.0, "r");
        lp.add_col(-1.0, vec![(r, 1.0)], "x");
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_duals() {
        // min 2x + 3y s.t. x + y = 4, x - y <= 2.
        let mut lp = LinearProgram::new();
        let r1 = lp.add_row(Relation::Eq, 4.0, "sum");
        let r2 = lp.add_row(Relation::Le, 2.0, "diff");
        lp.add_col(2.0, vec![(r1, 1.0), (r2, 1.0)], "x");
        lp.add_col(3.0, vec![(r1, 1.0), (r2, -1.0)], "y");
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // Optimum x=3, y=1, obj=9.
        assert!((sol.objective - 9.0).abs() < 1e-8, "{sol:?}");
        // Strong duality.
        let dual_obj = sol.duals[0] * 4.0 + sol.duals[1] * 2.0;
        assert!((dual_obj - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn upper_bounds_via_internal_rows() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Ge, 3.0, "need");
        let x = lp.add_col(1.0, vec![(r, 1.0)], "x");
        let y = lp.add_col(2.0, vec![(r, 1.0)], "y");
        lp.set_bounds(x, 0.0, Some(1.0));
        lp.set_bounds(y, 0.0, None);
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert!((sol.primal[0] - 1.0).abs() < 1e-9);
        assert!((sol.primal[1] - 2.0).abs() < 1e-9);
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert_eq!(sol.duals.len(), 1);
    }

    #[test]
    fn warm_start_column_addition() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Ge, 1.0, "cover");
        lp.add_col(10.0, vec![(r, 1.0)], "expensive");
        let mut s = LpSolver::new(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(s.solve(), LpStatus::Optimal);
        assert!((s.objective() - 10.0).abs() < 1e-9);
        s.add_column(1.0, vec![(r, 1.0)]);
        assert_eq!(s.reoptimize(), LpStatus::Optimal);
        assert!((s.objective() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn column_generation_no_improving_columns() {
        let mut lp = LinearProgram::new();
        let r = lp.add_row(Relation::Ge, 1.0, "cover");
        lp.add_col(1.0, vec![(r, 1.0)], "x");
        let mut pricer = |_duals: &[f64]| Vec::new();
        let res = column_generation(&lp, &mut pricer, DEFAULT_TOL, 10).unwrap();
        assert_eq!(res.solution.status, LpStatus::Optimal);
        assert!((res.solution.objective - 1.0).abs() < 1e-9);
        assert!(res.generated.is_empty());
    }

    #[test]
    fn column_generation_reaches_full_lp_optimum() {
        // Cover two rows; the pricer offers singleton columns of cost 1 while
        // the master starts from an expensive combined column.
        let mut lp = LinearProgram::new();
        let r1 = lp.add_row(Relation::Ge, 1.0, "a");
        let r2 = lp.add_row(Relation::Ge, 1.0, "b");
        lp.add_col(10.0, vec![(r1, 1.0), (r2, 1.0)], "artificial");
        let mut pricer = |duals: &[f64]| {
            let mut cols = Vec::new();
            if duals[0] > 1.0 + 1e-7 {
                cols.push(Column {
                    cost: 1.0,
                    entries: vec![(0, 1.0)],
                    label: "a1".into(),
                });
            }
            if duals[1] > 1.0 + 1e-7 {
                cols.push(Column {
                    cost: 1.0,
                    entries: vec![(1, 1.0)],
                    label: "b1".into(),
                });
            }
            cols
        };
        let res = column_generation(&lp, &mut pricer, DEFAULT_TOL, 100).unwrap();
        assert_eq!(res.solution.status, LpStatus::Optimal);
        assert!((res.solution.objective - 2.0).abs() < 1e-7, "{res:?}");
    }

    #[test]
    fn matching_trivial_cases() {
        let (pairs, w) = max_weight_bipartite_matching(&[vec![5.0]]);
        assert_eq!(pairs, vec![(0, 0)]);
        assert_eq!(w, 5.0);
        let (pairs, w) = max_weight_bipartite_matching(&[vec![-3.0]]);
        assert!(pairs.is_empty());
        assert_eq!(w, 0.0);
    }

    fn brute_force_matching(weights: &[Vec<f64>]) -> f64 {
        // All partial matchings via recursion.
        fn go(weights: &[Vec<f64>], i: usize, used: u32) -> f64 {
            if i == weights.len() {
                return 0.0;
            }
            let mut best = go(weights, i + 1, used);
            for j in 0..weights[i].len() {
                if used >> j & 1 == 0 {
                    let v = weights[i][j] + go(weights, i + 1, used | 1 << j);
                    if v > best {
                        best = v;
                    }
                }
            }
            best
        }
        go(weights, 0, 0)
    }

    #[test]
    fn matching_matches_brute_force() {
        let mut rng = crate::rng::StreamRng::new(17, 0);
        for _ in 0..200 {
            let weights: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..4).map(|_| rng.uniform(-2.0, 3.0)).collect())
                .collect();
            let (pairs, w) = max_weight_bipartite_matching(&weights);
            let bf = brute_force_matching(&weights);
            assert!((w - bf).abs() < 1e-9, "{weights:?}");
            // Pairs are valid and re-sum to the reported weight.
            let mut seen_r = 0u32;
            let mut total = 0.0;
            for &(i, j) in &pairs {
                assert_eq!(seen_r >> j & 1, 0);
                seen_r |= 1 << j;
                total += weights[i][j];
            }
            assert!((total - w).abs() < 1e-12);
        }
    }

    #[test]
    fn matching_rectangular() {
        let weights = vec![vec![1.0, 2.0, 3.0]];
        let (pairs, w) = max_weight_bipartite_matching(&weights);
        assert_eq!(pairs, vec![(0, 2)]);
        assert_eq!(w, 3.0);
    }

    #[test]
    fn decomposition_single_edge() {
        let out = perfect_matching_decomposition(1, 1, &[(0, 0, 1.0)], 1e-9).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, vec![(0, 0)]);
        assert!((out[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_star() {
        let out =
            perfect_matching_decomposition(1, 2, &[(0, 0, 0.4), (0, 1, 0.6)], 1e-9).unwrap();
        assert_eq!(out.len(), 2);
        let mut lambdas: Vec<f64> = out.iter().map(|(_, l)| *l).collect();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((lambdas[0] - 0.4).abs() < 1e-12);
        assert!((lambdas[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn decomposition_recovers_edge_weights() {
        // Lemma-4-style construction: y = 0.5, z = (0.3, 0.4, 0.3), q = 2.
        let edges = vec![
            (0, 0, 0.3),
            (0, 1, 0.2),
            (1, 1, 0.2),
            (1, 2, 0.3),
        ];
        let out = perfect_matching_decomposition(2, 3, &edges, 1e-9).unwrap();
        let total: f64 = out.iter().map(|(_, l)| *l).sum();
        assert!((total - 0.5).abs() < 1e-9);
        for &(a, b, w) in &edges {
            let recovered: f64 = out
                .iter()
                .filter(|(m, _)| m.contains(&(a, b)))
                .map(|(_, l)| *l)
                .sum();
            assert!((recovered - w).abs() < 1e-9, "edge ({a},{b})");
        }
    }

    #[test]
    fn decomposition_rejects_bad_degrees() {
        let err = perfect_matching_decomposition(2, 1, &[(0, 0, 1.0), (1, 0, 0.5)], 1e-9);
        assert!(err.is_err());
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = crate::rng::StreamRng::new(5, 0);
        for trial in 0..60 {
            let n = 3 + (trial % 3);
            let m = 3 + (trial % 2);
            let (lp, a, b, c) = reference::random_bounded_lp(&mut rng, n, m);
            let sol = solve(&lp, DEFAULT_TOL).unwrap();
            let oracle = reference::vertex_enumeration_optimum(&a, &b, &c);
            match (sol.status, oracle) {
                (LpStatus::Optimal, Some(v)) => {
                    assert!((sol.objective - v).abs() < 1e-7, "trial {trial}: {} vs {v}", sol.objective);
                    // Strong duality against declared rows.
                    let dual_obj: f64 = sol.duals.iter().zip(&b).map(|(y, b)| y * b).sum();
                    assert!((dual_obj - sol.objective).abs() < 1e-6);
                }
                (LpStatus::Infeasible, None) => {}
                other => panic!("trial {trial}: mismatch {other:?}"),
            }
        }
    }
}


/// Reference implementations used by tests: a random bounded LP family
/// and an exhaustive vertex-enumeration optimizer to check `solve` against.
pub mod reference {
    use super::*;

    /// Randomly generated `min c x  s.t.  A x <= b, x >= 0` with a bounding box,
    /// so vertex enumeration is exhaustive.
    pub fn random_bounded_lp(
        rng: &mut crate::rng::StreamRng,
        n: usize,
        m: usize,
    ) -> (LinearProgram, Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut a = vec![vec![0.0; n]; m + n];
        let mut b = vec![0.0; m + n];
        for r in 0..m {
            for x in a[r].iter_mut() {
                *x = rng.uniform(-1.0, 2.0);
            }
            b[r] = rng.uniform(0.5, 4.0);
        }
        // Box rows keep the polytope bounded.
        for j in 0..n {
            a[m + j][j] = 1.0;
            b[m + j] = 5.0;
        }
        let c: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let mut lp = LinearProgram::new();
        let rows: Vec<usize> = (0..m + n)
            .map(|r| lp.add_row(Relation::Le, b[r], format!("r{r}")))
            .collect();
        for j in 0..n {
            let entries: Vec<(usize, f64)> = rows
                .iter()
                .enumerate()
                .filter(|(r, _)| a[*r][j] != 0.0)
                .map(|(r, &row)| (row, a[r][j]))
                .collect();
            lp.add_col(c[j], entries, format!("x{j}"));
        }
        (lp, a, b, c)
    }

    /// Independent LP oracle: enumerate all basic solutions of
    /// `A x <= b, x >= 0` by choosing n tight constraints, keep feasible ones,
    /// minimize the objective.
    pub fn vertex_enumeration_optimum(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
        let n = c.len();
        let m = a.len();
        let mut best: Option<f64> = None;
        // Constraint set: m rows plus n non-negativity rows.
        let total = m + n;
        let mut choice = vec![0usize; n];
        fn solve_system(mat: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>) -> Option<Vec<f64>> {
            let n = rhs.len();
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| {
                    mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap()
                })?;
                if mat[piv][col].abs() < 1e-10 {
                    return None;
                }
                mat.swap(col, piv);
                rhs.swap(col, piv);
                for i in 0..n {
                    if i != col {
                        let f = mat[i][col] / mat[col][col];
                        for k in col..n {
                            mat[i][k] -= f * mat[col][k];
                        }
                        rhs[i] -= f * rhs[col];
                    }
                }
            }
            Some((0..n).map(|i| rhs[i] / mat[i][i]).collect())
        }
        fn rec(
            k: usize,
            start: usize,
            choice: &mut Vec<usize>,
            n: usize,
            total: usize,
            a: &[Vec<f64>],
            b: &[f64],
            c: &[f64],
            m: usize,
            best: &mut Option<f64>,
        ) {
            if k == n {
                let mut mat = Vec::with_capacity(n);
                let mut rhs = Vec::with_capacity(n);
                for &idx in choice.iter() {
                    if idx < m {
                        mat.push(a[idx].clone());
                        rhs.push(b[idx]);
                    } else {
                        let mut row = vec![0.0; n];
                        row[idx - m] = 1.0;
                        mat.push(row);
                        rhs.push(0.0);
                    }
                }
                if let Some(x) = solve_system(&mut mat, &mut rhs) {
                    let feasible = x.iter().all(|&v| v >= -1e-8)
                        && (0..m).all(|r| {
                            a[r].iter().zip(&x).map(|(ar, xr)| ar * xr).sum::<f64>()
                                <= b[r] + 1e-8
                        });
                    if feasible {
                        let obj: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
                        if best.map_or(true, |bv| obj < bv) {
                            *best = Some(obj);
                        }
                    }
                }
                return;
            }
            for idx in start..total {
                choice[k] = idx;
                rec(k + 1, idx + 1, choice, n, total, a, b, c, m, best);
            }
        }
        rec(0, 0, &mut choice, n, total, a, b, c, m, &mut best);
        best
    }
}
