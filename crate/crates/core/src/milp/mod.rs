//! Embedded linear-programming and mixed-integer solver.
//!
//! The solver is a bounded-variable revised simplex with a sparse LU
//! factorization of the basis, product-form updates between refactorizations,
//! and a best-bound branch-and-bound driver on top. A brute-force enumeration
//! oracle is provided for cross-checking small instances, and problems can be
//! dumped in the standard LP text format for inspection with external tools.
//!
//! Diagonal quadratic terms (proximal penalties of the form
//! `(w/2)(x - c)^2`) are supported on bounded continuous variables. They are
//! handled by an internal piecewise-linear expansion of the variable into
//! segment columns whose breakpoints are laid out geometrically around the
//! proximal center, so the approximation is essentially exact near the
//! minimizer (finest segment width 1e-4) while staying compact far from it.
//! The reported objective is always re-evaluated from the exact quadratic.

mod branch;
mod factor;
mod lp_format;
mod oracle;
mod pwl;
mod simplex;
pub mod testgen;

pub use lp_format::write_lp;
pub use oracle::brute_force_oracle;

use std::time::Duration;

use thiserror::Error;

/// Handle to a variable of a [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub(crate) struct VarDef {
    pub lb: f64,
    pub ub: f64,
    pub is_binary: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct RowDef {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Diagonal quadratic objective term `(weight/2) * (x - center)^2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadTerm {
    pub var: VarId,
    pub weight: f64,
    pub center: f64,
}

/// A sparse mixed-integer linear program (minimization).
#[derive(Debug, Clone, Default)]
pub struct MilpProblem {
    pub(crate) vars: Vec<VarDef>,
    pub(crate) rows: Vec<RowDef>,
    pub(crate) obj: Vec<f64>,
    pub(crate) obj_offset: f64,
    pub(crate) quad: Vec<QuadTerm>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable with the given bounds; returns its handle.
    pub fn add_var(&mut self, lb: f64, ub: f64) -> VarId {
        self.vars.push(VarDef {
            lb,
            ub,
            is_binary: false,
        });
        self.obj.push(0.0);
        VarId(self.vars.len() - 1)
    }

    /// Adds a binary variable (bounds `[0, 1]`, integral).
    pub fn add_binary(&mut self) -> VarId {
        self.vars.push(VarDef {
            lb: 0.0,
            ub: 1.0,
            is_binary: true,
        });
        self.obj.push(0.0);
        VarId(self.vars.len() - 1)
    }

    /// Adds `coeff` to the objective coefficient of `var`.
    pub fn add_obj(&mut self, var: VarId, coeff: f64) {
        self.obj[var.0] += coeff;
    }

    /// Adds a constant to the objective.
    pub fn add_obj_offset(&mut self, c: f64) {
        self.obj_offset += c;
    }

    /// Adds a proximal term `(weight/2) * (var - center)^2` to the objective.
    pub fn add_quadratic(&mut self, var: VarId, weight: f64, center: f64) {
        self.quad.push(QuadTerm {
            var,
            weight,
            center,
        });
    }

    /// Adds a linear constraint; duplicate variable entries are summed.
    pub fn add_row(&mut self, relation: Relation, rhs: f64, coeffs: &[(VarId, f64)]) {
        self.rows.push(RowDef {
            coeffs: coeffs.iter().map(|&(v, c)| (v.0, c)).collect(),
            relation,
            rhs,
        });
    }

    /// Tightens the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) {
        self.vars[var.0].lb = lb;
        self.vars[var.0].ub = ub;
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.vars[var.0].lb, self.vars[var.0].ub)
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.is_binary).count()
    }

    pub(crate) fn binary_ids(&self) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&j| self.vars[j].is_binary)
            .collect()
    }

    /// Structural validation run by every solve entry point.
    pub fn validate(&self) -> Result<(), MilpError> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return Err(MilpError::Invalid(format!(
                    "variable {} has unordered bounds [{}, {}]",
                    j, v.lb, v.ub
                )));
            }
            if v.is_binary && (v.lb < -1e-12 || v.ub > 1.0 + 1e-12) {
                return Err(MilpError::Invalid(format!(
                    "binary variable {} has bounds [{}, {}] outside [0, 1]",
                    j, v.lb, v.ub
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::Invalid(format!("row {} has non-finite rhs", r)));
            }
            for &(j, c) in &row.coeffs {
                if j >= self.vars.len() {
                    return Err(MilpError::Invalid(format!(
                        "row {} references unknown variable {}",
                        r, j
                    )));
                }
                if !c.is_finite() {
                    return Err(MilpError::Invalid(format!(
                        "row {} has non-finite coefficient on variable {}",
                        r, j
                    )));
                }
            }
        }
        for c in &self.obj {
            if !c.is_finite() {
                return Err(MilpError::Invalid("non-finite objective coefficient".into()));
            }
        }
        for q in &self.quad {
            if q.var.0 >= self.vars.len() || !q.weight.is_finite() || !q.center.is_finite() {
                return Err(MilpError::Invalid("malformed quadratic term".into()));
            }
            if q.weight < 0.0 {
                return Err(MilpError::Invalid(
                    "quadratic weights must be nonnegative".into(),
                ));
            }
            let v = &self.vars[q.var.0];
            if q.weight > 0.0 && (v.is_binary || !v.lb.is_finite() || !v.ub.is_finite()) {
                return Err(MilpError::Invalid(
                    "quadratic terms require a bounded continuous variable".into(),
                ));
            }
        }
        Ok(())
    }

    /// Exact objective value of an assignment, including quadratic terms.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        let mut obj = self.obj_offset;
        for (j, &c) in self.obj.iter().enumerate() {
            obj += c * values[j];
        }
        for q in &self.quad {
            let d = values[q.var.0] - q.center;
            obj += 0.5 * q.weight * d * d;
        }
        obj
    }

    /// Maximum constraint violation of an assignment (bounds and rows), in
    /// the units of the constraints.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, v) in self.vars.iter().enumerate() {
            worst = worst.max(v.lb - values[j]).max(values[j] - v.ub);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * values[j]).sum();
            let viol = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or simplex iteration limit reached; best incumbent attached.
    IterationLimit,
    /// Wall-clock limit reached; best incumbent attached.
    TimeLimit,
    /// The solver could not maintain a numerically trustworthy factorization.
    NumericFailure,
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Optimal)
    }
}

/// Solve statistics.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes: u64,
    pub wall: Duration,
    /// Best proven lower bound (minimization); equals the objective when the
    /// solve finished optimally.
    pub best_bound: f64,
}

/// Result of a solve. `values` is empty when no assignment is available.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

/// Central numeric policy: all solver tolerances live here.
#[derive(Debug, Clone)]
pub struct NumericPolicy {
    /// Primal feasibility tolerance on constraints and bounds.
    pub feas_tol: f64,
    /// Integrality tolerance for binaries.
    pub int_tol: f64,
    /// Relative MIP gap at which branch-and-bound declares optimality.
    pub rel_gap: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_pivots: u64,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    /// Hard cap on simplex iterations per LP solve (0 = automatic).
    pub max_simplex_iters: u64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            feas_tol: 1e-6,
            int_tol: 1e-6,
            rel_gap: 1e-6,
            stall_pivots: 1000,
            refactor_interval: 64,
            max_simplex_iters: 0,
        }
    }
}

/// Work limits for branch-and-bound.
#[derive(Debug, Clone)]
pub struct MilpLimits {
    pub max_nodes: u64,
    pub max_seconds: Option<f64>,
    /// Overrides `NumericPolicy::rel_gap` when set.
    pub rel_gap: Option<f64>,
}

impl Default for MilpLimits {
    fn default() -> Self {
        MilpLimits {
            max_nodes: 1_000_000,
            max_seconds: None,
            rel_gap: None,
        }
    }
}

/// Errors surfaced by solver entry points.
#[derive(Debug, Error)]
pub enum MilpError {
    #[error("malformed problem: {0}")]
    Invalid(String),
    #[error("brute-force oracle refused: {n_binaries} binaries exceed the limit of {limit}")]
    TooManyBinaries { n_binaries: usize, limit: usize },
}

/// Opaque simplex basis snapshot for warm starts.
///
/// A snapshot is valid for any problem with the same shape (same variables,
/// rows and quadratic structure); bounds, costs, right-hand sides and
/// proximal centers may differ. Passing a stale snapshot of the wrong shape
/// is detected and ignored.
#[derive(Debug, Clone)]
pub struct LpBasis {
    pub(crate) states: Vec<u8>,
}

/// Solves the continuous relaxation (binaries relaxed to `[0, 1]`).
pub fn solve_lp(problem: &MilpProblem, policy: &NumericPolicy) -> Result<MilpSolution, MilpError> {
    solve_lp_warm(problem, policy, None).map(|(s, _)| s)
}

/// Solves the continuous relaxation with an optional warm-start basis and
/// returns the final basis for reuse.
pub fn solve_lp_warm(
    problem: &MilpProblem,
    policy: &NumericPolicy,
    warm: Option<&LpBasis>,
) -> Result<(MilpSolution, LpBasis), MilpError> {
    problem.validate()?;
    let started = std::time::Instant::now();
    let form = pwl::CompForm::build(problem, None);
    let mut splx = simplex::Simplex::new(&form, policy);
    if let Some(b) = warm {
        splx.load_basis(&b.states);
    }
    let outcome = splx.solve();
    let basis = LpBasis {
        states: splx.snapshot(),
    };
    let sol = finish_lp(problem, &form, &splx, outcome, started);
    Ok((sol, basis))
}

pub(crate) fn finish_lp(
    problem: &MilpProblem,
    form: &pwl::CompForm,
    splx: &simplex::Simplex,
    outcome: simplex::Outcome,
    started: std::time::Instant,
) -> MilpSolution {
    let status = match outcome {
        simplex::Outcome::Optimal => SolveStatus::Optimal,
        simplex::Outcome::Infeasible => SolveStatus::Infeasible,
        simplex::Outcome::Unbounded => SolveStatus::Unbounded,
        simplex::Outcome::IterationLimit => SolveStatus::IterationLimit,
        simplex::Outcome::NumericFailure => SolveStatus::NumericFailure,
    };
    let (values, objective) = if matches!(status, SolveStatus::Optimal | SolveStatus::IterationLimit)
    {
        let vals = form.recover(splx.values());
        let obj = problem.objective_value(&vals);
        (vals, obj)
    } else {
        (Vec::new(), f64::INFINITY)
    };
    MilpSolution {
        status,
        objective,
        values,
        stats: SolveStats {
            simplex_iterations: splx.iterations(),
            nodes: 0,
            wall: started.elapsed(),
            best_bound: if status == SolveStatus::Optimal {
                objective
            } else {
                f64::NEG_INFINITY
            },
        },
    }
}

/// Solves the problem to proven optimality within the configured gap, or to
/// the given work limits with the best incumbent attached.
pub fn solve_milp(
    problem: &MilpProblem,
    limits: &MilpLimits,
    policy: &NumericPolicy,
) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    Ok(branch::branch_and_bound(problem, limits, policy))
}
