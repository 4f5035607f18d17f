//! Brute-force oracle: exact optimum of a small MILP by enumerating every
//! binary assignment and solving the continuous remainder of each. Used to
//! cross-check the branch-and-bound search path; it deliberately shares no
//! logic with it beyond the LP engine.

use std::time::Instant;

use super::pwl::CompForm;
use super::simplex::{Outcome, Simplex};
use super::{MilpError, MilpProblem, MilpSolution, NumericPolicy, SolveStats, SolveStatus};

const MAX_BINARIES: usize = 20;

pub fn brute_force_oracle(
    problem: &MilpProblem,
    policy: &NumericPolicy,
) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let bins = problem.binary_ids();
    if bins.len() > MAX_BINARIES {
        return Err(MilpError::TooManyBinaries {
            n_binaries: bins.len(),
            limit: MAX_BINARIES,
        });
    }
    let started = Instant::now();
    let base_bounds: Vec<(f64, f64)> = problem.vars.iter().map(|v| (v.lb, v.ub)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut total_iters = 0u64;
    let n_patterns = 1u64 << bins.len();

    'patterns: for mask in 0..n_patterns {
        let mut bounds = base_bounds.clone();
        for (i, &j) in bins.iter().enumerate() {
            let v = if (mask >> i) & 1 == 1 { 1.0 } else { 0.0 };
            let (lb, ub) = bounds[j];
            if v < lb - 1e-12 || v > ub + 1e-12 {
                continue 'patterns;
            }
            bounds[j] = (v, v);
        }
        let form = CompForm::build(problem, Some(&bounds));
        let mut sx = Simplex::new(&form, policy);
        let outcome = sx.solve();
        total_iters += sx.iterations();
        match outcome {
            Outcome::Optimal => {
                let values = form.recover(sx.values());
                let obj = problem.objective_value(&values);
                if best.as_ref().map_or(true, |&(b, _)| obj < b) {
                    best = Some((obj, values));
                }
            }
            Outcome::Unbounded => {
                return Ok(MilpSolution {
                    status: SolveStatus::Unbounded,
                    objective: f64::NEG_INFINITY,
                    values: Vec::new(),
                    stats: SolveStats {
                        simplex_iterations: total_iters,
                        nodes: mask + 1,
                        wall: started.elapsed(),
                        best_bound: f64::NEG_INFINITY,
                    },
                });
            }
            _ => {}
        }
    }

    Ok(match best {
        Some((obj, values)) => MilpSolution {
            status: SolveStatus::Optimal,
            objective: obj,
            values,
            stats: SolveStats {
                simplex_iterations: total_iters,
                nodes: n_patterns,
                wall: started.elapsed(),
                best_bound: obj,
            },
        },
        None => MilpSolution {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
            stats: SolveStats {
                simplex_iterations: total_iters,
                nodes: n_patterns,
                wall: started.elapsed(),
                best_bound: f64::INFINITY,
            },
        },
    })
}
