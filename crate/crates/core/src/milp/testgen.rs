//! Seeded random MILP instances for cross-checking the branch-and-bound
//! search against the brute-force oracle. Kept in the library (not test
//! code) so the acceptance suite and benches can generate identical
//! instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{MilpProblem, Relation};

/// Generates a bounded random MILP with at most `max_bin` binaries and
/// `max_cont` continuous variables. All variables are boxed, so instances are
/// never unbounded, and every row is anchored on one shared integral-binary
/// box point, so instances are feasible by construction.
pub fn random_milp(seed: u64, max_cont: usize, max_bin: usize) -> MilpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cont = rng.gen_range(1..=max_cont.max(1));
    let n_bin = rng.gen_range(0..=max_bin);
    let mut p = MilpProblem::new();
    let mut vars = Vec::new();
    let mut point = Vec::new();
    for _ in 0..n_cont {
        let lb = rng.gen_range(-10.0..5.0f64).round();
        let ub = lb + rng.gen_range(0.0..20.0f64).round();
        let v = p.add_var(lb, ub);
        p.add_obj(v, rng.gen_range(-10.0..10.0f64).round() / 2.0);
        vars.push(v);
        point.push(lb + (ub - lb) * rng.gen_range(0.0..1.0f64));
    }
    for _ in 0..n_bin {
        let v = p.add_binary();
        p.add_obj(v, rng.gen_range(-10.0..10.0f64).round() / 2.0);
        vars.push(v);
        point.push(if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    }
    let n_rows = rng.gen_range(1..=2 * vars.len());
    for _ in 0..n_rows {
        let nnz = rng.gen_range(1..=vars.len().min(6));
        let mut coeffs = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let j = rng.gen_range(0..vars.len());
            let c = rng.gen_range(-4.0..4.0f64).round();
            if c != 0.0 {
                coeffs.push((vars[j], c));
            }
        }
        if coeffs.is_empty() {
            continue;
        }
        let anchor: f64 = coeffs.iter().map(|&(j, c)| c * point[j.0]).sum();
        match rng.gen_range(0..6) {
            0 => p.add_row(Relation::Eq, anchor, &coeffs),
            1 | 2 => p.add_row(Relation::Ge, anchor - rng.gen_range(0.0..3.0f64), &coeffs),
            _ => p.add_row(Relation::Le, anchor + rng.gen_range(0.0..3.0f64), &coeffs),
        }
    }
    p
}
