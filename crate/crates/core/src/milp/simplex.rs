//! Bounded-variable revised primal simplex.
//!
//! Works on the computational form produced by [`super::pwl`]: every row has
//! an explicit logical column, so the all-logical basis is always available
//! as a cold start. Phase 1 minimizes the sum of bound violations of basic
//! variables with a composite +/-1 cost vector; phase 2 is the ordinary
//! bounded simplex with Dantzig pricing, a two-pass Harris-style ratio test,
//! and a switch to Bland's rule after a run of degenerate pivots. The basis
//! inverse is a sparse LU plus a product-form eta file, refactorized at a
//! fixed interval or when numerics degrade.

use super::factor::LuFactors;
use super::pwl::CompForm;
use super::NumericPolicy;

const PIVOT_EPS: f64 = 1e-9;
const DEGEN_EPS: f64 = 1e-10;
const DUAL_EPS: f64 = 1e-8;

pub(crate) const AT_LOWER: u8 = 0;
pub(crate) const AT_UPPER: u8 = 1;
pub(crate) const BASIC: u8 = 2;
pub(crate) const FREE_ZERO: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericFailure,
}

struct Eta {
    slot: u32,
    diag: f64,
    /// Nonzeros of the transformed entering column, excluding the pivot slot.
    entries: Vec<(u32, f64)>,
}

pub(crate) struct Simplex<'a> {
    form: &'a CompForm,
    policy: &'a NumericPolicy,

    state: Vec<u8>,
    x: Vec<f64>,
    basis: Vec<usize>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    eta_nnz: usize,

    // Scratch buffers sized once.
    work_rows: Vec<f64>,
    w_col: Vec<f64>,
    w_nnz: Vec<u32>,
    cb: Vec<f64>,
    y_rows: Vec<f64>,
    btran_scratch: Vec<f64>,

    iters: u64,
    degen_run: u64,
    bland: bool,
}

enum Pricing {
    Enter { col: usize, sigma: f64 },
    OptimalOrInfeasible,
}

enum Ratio {
    Flip(f64),
    Pivot { slot: usize, theta: f64, hit_upper: bool },
    Unblocked,
    Unstable,
}

impl<'a> Simplex<'a> {
    pub fn new(form: &'a CompForm, policy: &'a NumericPolicy) -> Self {
        let m = form.n_rows;
        let nc = form.n_cols;
        let mut state = vec![AT_LOWER; nc];
        let mut x = vec![0.0; nc];
        for j in 0..nc {
            let (s, v) = default_nonbasic(form.lb[j], form.ub[j]);
            state[j] = s;
            x[j] = v;
        }
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            let j = form.n_struct + r;
            state[j] = BASIC;
            basis.push(j);
        }
        Simplex {
            form,
            policy,
            state,
            x,
            basis,
            lu: None,
            etas: Vec::new(),
            eta_nnz: 0,
            work_rows: vec![0.0; m],
            w_col: vec![0.0; m],
            w_nnz: Vec::with_capacity(64),
            cb: vec![0.0; m],
            y_rows: vec![0.0; m],
            btran_scratch: vec![0.0; m],
            iters: 0,
            degen_run: 0,
            bland: false,
        }
    }

    /// Restores a previously snapshotted basis. Ignored if the shape does not
    /// match the current problem.
    pub fn load_basis(&mut self, states: &[u8]) {
        if states.len() != self.form.n_cols {
            return;
        }
        let basic_count = states.iter().filter(|&&s| s == BASIC).count();
        if basic_count != self.form.n_rows {
            return;
        }
        self.basis.clear();
        for j in 0..self.form.n_cols {
            self.state[j] = states[j];
            match states[j] {
                BASIC => {
                    self.basis.push(j);
                    self.x[j] = 0.0;
                }
                s => {
                    let (s2, v) = coerce_nonbasic(s, self.form.lb[j], self.form.ub[j]);
                    self.state[j] = s2;
                    self.x[j] = v;
                }
            }
        }
        self.lu = None;
        self.etas.clear();
        self.eta_nnz = 0;
    }

    pub fn snapshot(&self) -> Vec<u8> {
        self.state.clone()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn iterations(&self) -> u64 {
        self.iters
    }

    pub fn solve(&mut self) -> Outcome {
        let m = self.form.n_rows;
        let max_iters = if self.policy.max_simplex_iters > 0 {
            self.policy.max_simplex_iters
        } else {
            50_000 + 20 * (m as u64 + self.form.n_cols as u64)
        };
        let mut refactor_failures = 0u32;

        if self.lu.is_none() && self.refactorize().is_none() {
            return Outcome::NumericFailure;
        }

        loop {
            if self.etas.len() >= self.policy.refactor_interval
                || self.eta_nnz > 20 * m + 10_000
            {
                if self.refactorize().is_none() {
                    return Outcome::NumericFailure;
                }
            }

            let phase1 = self.load_costs();
            self.btran_basic_costs();

            match self.price(phase1) {
                Pricing::OptimalOrInfeasible => {
                    // Recompute from a fresh factorization before concluding;
                    // a repaired basis invalidates the pricing, so loop again.
                    if !self.etas.is_empty() {
                        match self.refactorize() {
                            None => return Outcome::NumericFailure,
                            Some(true) => {
                                refactor_failures += 1;
                                if refactor_failures > 5 {
                                    return Outcome::NumericFailure;
                                }
                                continue;
                            }
                            Some(false) => {}
                        }
                    }
                    if phase1 {
                        // Phase-1 optimum with residual infeasibility means
                        // the problem has no feasible point; otherwise the
                        // violations were tolerance noise and phase 2 runs.
                        if self.total_infeasibility() > self.policy.feas_tol {
                            return Outcome::Infeasible;
                        }
                        continue;
                    }
                    if self.total_infeasibility() > self.policy.feas_tol {
                        refactor_failures += 1;
                        if refactor_failures > 5 {
                            return Outcome::NumericFailure;
                        }
                        continue;
                    }
                    return Outcome::Optimal;
                }
                Pricing::Enter { col, sigma } => {
                    self.ftran_column(col);
                    match self.ratio_test(col, sigma, phase1) {
                        Ratio::Unblocked => {
                            if phase1 {
                                // The infeasibility gradient is bounded; an
                                // unblocked direction signals numeric trouble.
                                refactor_failures += 1;
                                if refactor_failures > 5 || self.refactorize().is_none() {
                                    return Outcome::NumericFailure;
                                }
                                continue;
                            }
                            return Outcome::Unbounded;
                        }
                        Ratio::Unstable => {
                            refactor_failures += 1;
                            if refactor_failures > 5 || self.refactorize().is_none() {
                                return Outcome::NumericFailure;
                            }
                            continue;
                        }
                        Ratio::Flip(theta) => {
                            self.apply_step(col, sigma, theta);
                            self.state[col] = if self.state[col] == AT_LOWER {
                                AT_UPPER
                            } else {
                                AT_LOWER
                            };
                            self.x[col] = if self.state[col] == AT_UPPER {
                                self.form.ub[col]
                            } else {
                                self.form.lb[col]
                            };
                            self.track_degeneracy(theta);
                        }
                        Ratio::Pivot {
                            slot,
                            theta,
                            hit_upper,
                        } => {
                            self.apply_step(col, sigma, theta);
                            let leaving = self.basis[slot];
                            self.state[leaving] = if hit_upper { AT_UPPER } else { AT_LOWER };
                            self.x[leaving] = if hit_upper {
                                self.form.ub[leaving]
                            } else {
                                self.form.lb[leaving]
                            };
                            self.state[col] = BASIC;
                            self.basis[slot] = col;
                            self.push_eta(slot);
                            self.track_degeneracy(theta);
                        }
                    }
                    self.iters += 1;
                    if self.iters >= max_iters {
                        return Outcome::IterationLimit;
                    }
                }
            }
        }
    }

    fn track_degeneracy(&mut self, theta: f64) {
        if theta.abs() <= DEGEN_EPS {
            self.degen_run += 1;
            if self.degen_run > self.policy.stall_pivots {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
        }
    }

    /// Loads basic costs into `self.cb`; returns true when running phase 1.
    fn load_costs(&mut self) -> bool {
        let tol = self.policy.feas_tol;
        let mut phase1 = false;
        for (t, &j) in self.basis.iter().enumerate() {
            let v = self.x[j];
            if v < self.form.lb[j] - tol {
                phase1 = true;
            } else if v > self.form.ub[j] + tol {
                phase1 = true;
            }
            self.cb[t] = 0.0;
        }
        for (t, &j) in self.basis.iter().enumerate() {
            let v = self.x[j];
            self.cb[t] = if phase1 {
                if v < self.form.lb[j] - tol {
                    -1.0
                } else if v > self.form.ub[j] + tol {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.form.cost[j]
            };
        }
        phase1
    }

    fn total_infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for &j in &self.basis {
            let v = self.x[j];
            total += (self.form.lb[j] - v).max(0.0) + (v - self.form.ub[j]).max(0.0);
        }
        total
    }

    /// y = B^-T c_B, with the eta file applied before the LU solve.
    fn btran_basic_costs(&mut self) {
        for eta in self.etas.iter().rev() {
            let s = eta.slot as usize;
            let mut acc = self.cb[s];
            for &(i, v) in &eta.entries {
                acc -= v * self.cb[i as usize];
            }
            self.cb[s] = acc / eta.diag;
        }
        let lu = self.lu.as_ref().expect("factorized");
        lu.btran(&self.cb, &mut self.btran_scratch, &mut self.y_rows);
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let base = if phase1 { 0.0 } else { self.form.cost[j] };
        let (rows, vals) = self.form.col(j);
        let mut acc = base;
        for (idx, &r) in rows.iter().enumerate() {
            acc -= vals[idx] * self.y_rows[r as usize];
        }
        acc
    }

    fn price(&self, phase1: bool) -> Pricing {
        let mut best: Option<(usize, f64, f64)> = None; // col, sigma, score
        for j in 0..self.form.n_cols {
            let s = self.state[j];
            if s == BASIC {
                continue;
            }
            if self.form.lb[j] == self.form.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, phase1);
            let dtol = DUAL_EPS * (1.0 + if phase1 { 1.0 } else { self.form.cost[j].abs() });
            let sigma = match s {
                AT_LOWER if d < -dtol => 1.0,
                AT_UPPER if d > dtol => -1.0,
                FREE_ZERO if d < -dtol => 1.0,
                FREE_ZERO if d > dtol => -1.0,
                _ => continue,
            };
            if self.bland {
                // Lowest eligible index.
                return Pricing::Enter { col: j, sigma };
            }
            let score = d.abs();
            if best.map_or(true, |(_, _, b)| score > b) {
                best = Some((j, sigma, score));
            }
        }
        match best {
            Some((col, sigma, _)) => Pricing::Enter { col, sigma },
            None => Pricing::OptimalOrInfeasible,
        }
    }

    /// w = B^-1 a_col into `self.w_col` (dense, slot-indexed) with the
    /// nonzero slots listed in `self.w_nnz`.
    fn ftran_column(&mut self, col: usize) {
        let lu = self.lu.as_ref().expect("factorized");
        let (rows, vals) = self.form.col(col);
        lu.ftran_pairs(rows, vals, &mut self.work_rows, &mut self.w_col);
        for eta in &self.etas {
            let s = eta.slot as usize;
            let theta = self.w_col[s] / eta.diag;
            self.w_col[s] = theta;
            if theta != 0.0 {
                for &(i, v) in &eta.entries {
                    self.w_col[i as usize] -= v * theta;
                }
            }
        }
        self.w_nnz.clear();
        for (t, &v) in self.w_col.iter().enumerate() {
            if v.abs() > PIVOT_EPS {
                self.w_nnz.push(t as u32);
            }
        }
    }

    fn ratio_test(&self, col: usize, sigma: f64, phase1: bool) -> Ratio {
        let tol = self.policy.feas_tol;
        let own_range = self.form.ub[col] - self.form.lb[col];
        let own_cap = if own_range.is_finite() {
            own_range
        } else {
            f64::INFINITY
        };

        // Pass 1: loosest step allowed with bounds relaxed by the tolerance.
        let mut theta_max = own_cap;
        for &tu in &self.w_nnz {
            let t = tu as usize;
            let j = self.basis[t];
            let delta = -sigma * self.w_col[t];
            let v = self.x[j];
            if let Some((bound, _)) =
                blocking_bound(v, self.form.lb[j], self.form.ub[j], delta, phase1, tol)
            {
                let relaxed = bound + delta.signum() * tol;
                let theta = (relaxed - v) / delta;
                if theta < theta_max {
                    theta_max = theta;
                }
            }
        }
        if theta_max < 0.0 {
            theta_max = 0.0;
        }

        // Pass 2: among blockers within theta_max, take the most stable pivot.
        let mut best: Option<(usize, f64, bool, f64)> = None; // slot, theta, hit_upper, |w|
        for &tu in &self.w_nnz {
            let t = tu as usize;
            let j = self.basis[t];
            let delta = -sigma * self.w_col[t];
            let v = self.x[j];
            let Some((bound, hit_upper)) =
                blocking_bound(v, self.form.lb[j], self.form.ub[j], delta, phase1, tol)
            else {
                continue;
            };
            let theta = ((bound - v) / delta).max(0.0);
            if theta <= theta_max {
                let take = if self.bland {
                    best.map_or(true, |(bs, _, _, _)| j < self.basis[bs])
                } else {
                    let wa = self.w_col[t].abs();
                    best.map_or(true, |(_, _, _, bw)| wa > bw)
                };
                if take {
                    best = Some((t, theta, hit_upper, self.w_col[t].abs()));
                }
            }
        }

        match best {
            Some((slot, theta, hit_upper, wabs)) => {
                if own_cap <= theta {
                    return Ratio::Flip(own_cap);
                }
                if wabs < PIVOT_EPS * 10.0 && !self.etas.is_empty() {
                    return Ratio::Unstable;
                }
                Ratio::Pivot {
                    slot,
                    theta,
                    hit_upper,
                }
            }
            None => {
                if own_cap.is_finite() {
                    Ratio::Flip(own_cap)
                } else {
                    Ratio::Unblocked
                }
            }
        }
    }

    fn apply_step(&mut self, col: usize, sigma: f64, theta: f64) {
        if theta != 0.0 {
            self.x[col] += sigma * theta;
            for &tu in &self.w_nnz {
                let t = tu as usize;
                let j = self.basis[t];
                self.x[j] -= sigma * theta * self.w_col[t];
            }
        }
    }

    fn push_eta(&mut self, slot: usize) {
        let mut entries = Vec::with_capacity(self.w_nnz.len().saturating_sub(1));
        for &tu in &self.w_nnz {
            if tu as usize != slot {
                entries.push((tu, self.w_col[tu as usize]));
            }
        }
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            slot: slot as u32,
            diag: self.w_col[slot],
            entries,
        });
    }

    /// Rebuilds the LU factorization from the current basis, repairing any
    /// dependent columns with logicals, and recomputes basic values. Returns
    /// whether the basis set was modified by the repair, or None if the
    /// repaired basis still cannot be factorized.
    fn refactorize(&mut self) -> Option<bool> {
        let m = self.form.n_rows;
        let cols: Vec<Vec<(u32, f64)>> = self
            .basis
            .iter()
            .map(|&j| {
                let (rows, vals) = self.form.col(j);
                rows.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        let fact = LuFactors::factorize(m, &cols);
        let changed = !fact.rejected.is_empty();

        // Kick rejected columns out of the basis.
        for &slot in &fact.rejected {
            let j = self.basis[slot];
            let (s, v) = default_nonbasic(self.form.lb[j], self.form.ub[j]);
            self.state[j] = s;
            self.x[j] = v;
        }
        // Reorder slots to pivot order and cover leftover rows with logicals.
        let mut new_basis = Vec::with_capacity(m);
        for &slot in &fact.accepted {
            new_basis.push(self.basis[slot]);
        }
        for &r in &fact.uncovered_rows {
            let j = self.form.n_struct + r;
            debug_assert_ne!(self.state[j], BASIC);
            self.state[j] = BASIC;
            new_basis.push(j);
        }
        if new_basis.len() != m {
            return None;
        }
        self.basis = new_basis;
        self.lu = Some(fact.lu);
        self.etas.clear();
        self.eta_nnz = 0;
        self.recompute_basic_values();
        Some(changed)
    }

    /// x_B = B^-1 (b - N x_N), straight from the factorization.
    fn recompute_basic_values(&mut self) {
        let m = self.form.n_rows;
        for r in 0..m {
            self.work_rows[r] = self.form.rhs[r];
        }
        for j in 0..self.form.n_cols {
            if self.state[j] != BASIC && self.x[j] != 0.0 {
                let (rows, vals) = self.form.col(j);
                for (idx, &r) in rows.iter().enumerate() {
                    self.work_rows[r as usize] -= vals[idx] * self.x[j];
                }
            }
        }
        let lu = self.lu.as_ref().expect("factorized");
        lu.ftran_dense(&mut self.work_rows, &mut self.w_col);
        for t in 0..m {
            let j = self.basis[t];
            self.x[j] = self.w_col[t];
        }
    }
}

fn default_nonbasic(lb: f64, ub: f64) -> (u8, f64) {
    if lb.is_finite() {
        (AT_LOWER, lb)
    } else if ub.is_finite() {
        (AT_UPPER, ub)
    } else {
        (FREE_ZERO, 0.0)
    }
}

fn coerce_nonbasic(state: u8, lb: f64, ub: f64) -> (u8, f64) {
    match state {
        AT_LOWER if lb.is_finite() => (AT_LOWER, lb),
        AT_UPPER if ub.is_finite() => (AT_UPPER, ub),
        FREE_ZERO if !lb.is_finite() && !ub.is_finite() => (FREE_ZERO, 0.0),
        _ => default_nonbasic(lb, ub),
    }
}

/// The bound (value, is_upper) that blocks a basic variable moving at rate
/// `delta`, or None.
///
/// In phase 1, variables beyond a bound block only when moving back toward
/// feasibility (they stop at the violated bound); movement deeper into
/// infeasibility is priced by the phase-1 costs instead.
fn blocking_bound(
    v: f64,
    lb: f64,
    ub: f64,
    delta: f64,
    phase1: bool,
    tol: f64,
) -> Option<(f64, bool)> {
    if delta.abs() <= PIVOT_EPS {
        return None;
    }
    if phase1 {
        if v < lb - tol {
            return if delta > 0.0 { Some((lb, false)) } else { None };
        }
        if v > ub + tol {
            return if delta < 0.0 { Some((ub, true)) } else { None };
        }
    }
    if delta > 0.0 {
        if ub.is_finite() {
            Some((ub, true))
        } else {
            None
        }
    } else if lb.is_finite() {
        Some((lb, false))
    } else {
        None
    }
}
