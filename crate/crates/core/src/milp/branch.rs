//! Best-bound branch and bound over the binary variables.
//!
//! Node selection is best-bound (ties broken first-in); branching picks the
//! most fractional binary with the lowest variable id on ties. Each node
//! warm-starts the simplex from its parent's basis. An initial incumbent is
//! sought with a rounding dive from the root relaxation, which makes the
//! best-bound search prune early.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::pwl::CompForm;
use super::simplex::{Outcome, Simplex};
use super::{MilpLimits, MilpProblem, MilpSolution, NumericPolicy, SolveStats, SolveStatus};

struct Node {
    bound: f64,
    seq: u64,
    bounds: Vec<(f64, f64)>,
    basis: Vec<u8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; order so the smallest bound (then the oldest
    // node) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct NodeSolve {
    outcome: Outcome,
    values: Vec<f64>,
    pwl_obj: f64,
    basis: Vec<u8>,
    iters: u64,
}

fn solve_node(
    problem: &MilpProblem,
    bounds: &[(f64, f64)],
    warm: Option<&[u8]>,
    policy: &NumericPolicy,
) -> NodeSolve {
    let form = CompForm::build(problem, Some(bounds));
    let mut sx = Simplex::new(&form, policy);
    if let Some(b) = warm {
        sx.load_basis(b);
    }
    let outcome = sx.solve();
    let (values, pwl_obj) = if matches!(outcome, Outcome::Optimal) {
        (form.recover(sx.values()), form.pwl_objective(sx.values()))
    } else {
        (Vec::new(), f64::INFINITY)
    };
    NodeSolve {
        outcome,
        values,
        pwl_obj,
        basis: sx.snapshot(),
        iters: sx.iterations(),
    }
}

/// Most fractional binary (closest to one half), lowest id on ties.
fn pick_branch_var(values: &[f64], bins: &[usize], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in bins {
        let v = values[j];
        let dist = (v - v.round()).abs();
        if dist <= int_tol {
            continue;
        }
        let frac_score = 0.5 - (v - 0.5).abs().min(0.5);
        if best.map_or(true, |(_, s)| frac_score > s) {
            best = Some((j, frac_score));
        }
    }
    best.map(|(j, _)| j)
}

/// Rounding dive from a fractional relaxation to find an early incumbent.
fn dive(
    problem: &MilpProblem,
    start: &NodeSolve,
    base_bounds: &[(f64, f64)],
    bins: &[usize],
    policy: &NumericPolicy,
    iters: &mut u64,
) -> Option<(f64, Vec<f64>)> {
    let mut bounds = base_bounds.to_vec();
    let mut cur = NodeSolve {
        outcome: start.outcome,
        values: start.values.clone(),
        pwl_obj: start.pwl_obj,
        basis: start.basis.clone(),
        iters: 0,
    };
    for _ in 0..bins.len() + 1 {
        let Some(j) = pick_branch_var(&cur.values, bins, policy.int_tol) else {
            return Some((cur.pwl_obj, cur.values));
        };
        let rounded = cur.values[j].round().clamp(0.0, 1.0);
        bounds[j] = (rounded, rounded);
        let mut next = solve_node(problem, &bounds, Some(&cur.basis), policy);
        *iters += next.iters;
        if !matches!(next.outcome, Outcome::Optimal) {
            // Try the opposite fixing once before giving up on the dive.
            let flipped = 1.0 - rounded;
            bounds[j] = (flipped, flipped);
            next = solve_node(problem, &bounds, Some(&cur.basis), policy);
            *iters += next.iters;
            if !matches!(next.outcome, Outcome::Optimal) {
                return None;
            }
        }
        cur = next;
    }
    None
}

pub(crate) fn branch_and_bound(
    problem: &MilpProblem,
    limits: &MilpLimits,
    policy: &NumericPolicy,
) -> MilpSolution {
    let started = Instant::now();
    let bins = problem.binary_ids();
    let rel_gap = limits.rel_gap.unwrap_or(policy.rel_gap);
    let base_bounds: Vec<(f64, f64)> = problem.vars.iter().map(|v| (v.lb, v.ub)).collect();
    let mut total_iters = 0u64;
    let mut nodes_done = 0u64;

    let finish = |status: SolveStatus,
                  incumbent: Option<(f64, Vec<f64>)>,
                  best_bound: f64,
                  total_iters: u64,
                  nodes_done: u64| {
        let (objective, values) = match incumbent {
            Some((_, vals)) => (problem.objective_value(&vals), vals),
            None => (f64::INFINITY, Vec::new()),
        };
        MilpSolution {
            status,
            objective,
            values,
            stats: SolveStats {
                simplex_iterations: total_iters,
                nodes: nodes_done,
                wall: started.elapsed(),
                best_bound,
            },
        }
    };

    let root = solve_node(problem, &base_bounds, None, policy);
    total_iters += root.iters;
    nodes_done += 1;
    match root.outcome {
        Outcome::Infeasible => {
            return finish(SolveStatus::Infeasible, None, f64::INFINITY, total_iters, 1)
        }
        Outcome::Unbounded => {
            return finish(SolveStatus::Unbounded, None, f64::NEG_INFINITY, total_iters, 1)
        }
        Outcome::IterationLimit => {
            return finish(SolveStatus::IterationLimit, None, f64::NEG_INFINITY, total_iters, 1)
        }
        Outcome::NumericFailure => {
            return finish(SolveStatus::NumericFailure, None, f64::NEG_INFINITY, total_iters, 1)
        }
        Outcome::Optimal => {}
    }

    if pick_branch_var(&root.values, &bins, policy.int_tol).is_none() {
        let pwl = root.pwl_obj;
        return finish(SolveStatus::Optimal, Some((pwl, root.values)), pwl, total_iters, 1);
    }

    let gap_closed = |inc: f64, bound: f64| inc - bound <= rel_gap * inc.abs().max(1.0);

    let mut incumbent: Option<(f64, Vec<f64>)> =
        dive(problem, &root, &base_bounds, &bins, policy, &mut total_iters);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let push_children = |heap: &mut BinaryHeap<Node>,
                             seq: &mut u64,
                             parent: &NodeSolve,
                             parent_bounds: &[(f64, f64)],
                             branch_var: usize| {
        for &fix in &[0.0, 1.0] {
            let mut bounds = parent_bounds.to_vec();
            bounds[branch_var] = (fix, fix);
            heap.push(Node {
                bound: parent.pwl_obj,
                seq: *seq,
                bounds,
                basis: parent.basis.clone(),
            });
            *seq += 1;
        }
    };

    let root_branch = pick_branch_var(&root.values, &bins, policy.int_tol).unwrap();
    push_children(&mut heap, &mut seq, &root, &base_bounds, root_branch);

    loop {
        let Some(node) = heap.pop() else {
            // Tree exhausted: the incumbent (if any) is proven optimal.
            return match incumbent {
                Some(inc) => {
                    let b = inc.0;
                    finish(SolveStatus::Optimal, Some(inc), b, total_iters, nodes_done)
                }
                None => finish(SolveStatus::Infeasible, None, f64::INFINITY, total_iters, nodes_done),
            };
        };
        if let Some((inc_obj, _)) = incumbent {
            if gap_closed(inc_obj, node.bound) {
                // Best-bound order: every remaining node is at least as high.
                return finish(SolveStatus::Optimal, incumbent, node.bound, total_iters, nodes_done);
            }
        }
        if nodes_done >= limits.max_nodes {
            return finish(SolveStatus::IterationLimit, incumbent, node.bound, total_iters, nodes_done);
        }
        if let Some(cap) = limits.max_seconds {
            if started.elapsed().as_secs_f64() > cap {
                return finish(SolveStatus::TimeLimit, incumbent, node.bound, total_iters, nodes_done);
            }
        }

        let solved = solve_node(problem, &node.bounds, Some(&node.basis), policy);
        total_iters += solved.iters;
        nodes_done += 1;
        match solved.outcome {
            Outcome::Infeasible => continue,
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return finish(SolveStatus::Unbounded, incumbent, f64::NEG_INFINITY, total_iters, nodes_done)
            }
            Outcome::IterationLimit => {
                return finish(SolveStatus::IterationLimit, incumbent, node.bound, total_iters, nodes_done)
            }
            Outcome::NumericFailure => {
                return finish(SolveStatus::NumericFailure, incumbent, node.bound, total_iters, nodes_done)
            }
        }
        if let Some((inc_obj, _)) = incumbent {
            if solved.pwl_obj >= inc_obj - rel_gap * inc_obj.abs().max(1.0) {
                continue;
            }
        }
        match pick_branch_var(&solved.values, &bins, policy.int_tol) {
            None => {
                // Integral: new incumbent.
                let better = incumbent
                    .as_ref()
                    .map_or(true, |&(inc_obj, _)| solved.pwl_obj < inc_obj);
                if better {
                    incumbent = Some((solved.pwl_obj, solved.values));
                }
            }
            Some(j) => push_children(&mut heap, &mut seq, &solved, &node.bounds, j),
        }
    }
}
