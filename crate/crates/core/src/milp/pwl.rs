//! Computational form for the simplex.
//!
//! Flattens a [`MilpProblem`] into a pure LP over CSC columns: one logical
//! column per row (so the all-logical basis always exists), and variables
//! carrying a diagonal quadratic term expanded into piecewise-linear segment
//! columns. Segment breakpoints are placed geometrically around the proximal
//! center down to a finest width of 1e-4, so the expansion behaves like the
//! exact quadratic near the minimizer; because the quadratic is convex the
//! segment costs are increasing and the simplex fills segments in order
//! without any extra constraints.

use super::{MilpProblem, Relation};

/// Finest breakpoint offset around the proximal center.
const APEX_OFFSET: f64 = 1e-4;
/// Geometric growth of breakpoint offsets.
const OFFSET_RATIO: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
enum Expansion {
    Single(usize),
    Segments { first: usize, count: usize, base: f64 },
}

pub(crate) struct CompForm {
    pub n_rows: usize,
    pub n_struct: usize,
    pub n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    col_val: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    pub obj_offset: f64,
    expansion: Vec<Expansion>,
}

impl CompForm {
    /// Builds the computational form. `bounds` overrides the problem's
    /// variable bounds when given (used by branch-and-bound nodes); it must
    /// have one entry per variable.
    pub fn build(problem: &MilpProblem, bounds: Option<&[(f64, f64)]>) -> CompForm {
        let n_vars = problem.vars.len();
        let n_rows = problem.rows.len();

        let var_bounds = |j: usize| -> (f64, f64) {
            match bounds {
                Some(b) => b[j],
                None => (problem.vars[j].lb, problem.vars[j].ub),
            }
        };

        // Merge quadratic terms per variable into (weight, center) plus a
        // constant correction.
        let mut quad_w = vec![0.0f64; n_vars];
        let mut quad_wc = vec![0.0f64; n_vars];
        let mut obj_offset = problem.obj_offset;
        for q in &problem.quad {
            if q.weight <= 0.0 {
                continue;
            }
            quad_w[q.var.0] += q.weight;
            quad_wc[q.var.0] += q.weight * q.center;
            obj_offset += 0.5 * q.weight * q.center * q.center;
        }

        // Lay out computational columns per variable.
        let mut expansion = Vec::with_capacity(n_vars);
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        let mut cost = Vec::new();
        let mut seg_nodes_scratch = Vec::new();
        for j in 0..n_vars {
            let (vlb, vub) = var_bounds(j);
            let w = quad_w[j];
            if w > 0.0 && vub > vlb {
                let center = quad_wc[j] / w;
                obj_offset -= 0.5 * w * center * center;
                // From here the per-variable quadratic is (w/2)(x - center)^2.
                segment_nodes(vlb, vub, center, &mut seg_nodes_scratch);
                let first = lb.len();
                let q = |x: f64| 0.5 * w * (x - center) * (x - center);
                obj_offset += problem.obj[j] * vlb + q(vlb);
                for pair in seg_nodes_scratch.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    lb.push(0.0);
                    ub.push(b - a);
                    cost.push(problem.obj[j] + (q(b) - q(a)) / (b - a));
                }
                expansion.push(Expansion::Segments {
                    first,
                    count: lb.len() - first,
                    base: vlb,
                });
            } else {
                if w > 0.0 {
                    // Fixed variable: the quadratic is a constant.
                    let center = quad_wc[j] / w;
                    obj_offset += 0.5 * w * (vlb - center) * (vlb - center)
                        - 0.5 * w * center * center;
                }
                expansion.push(Expansion::Single(lb.len()));
                lb.push(vlb);
                ub.push(vub);
                cost.push(problem.obj[j]);
            }
        }
        let n_struct = lb.len();

        // Rows: merged coefficients, rhs shifted by segment bases, and one
        // logical column per row.
        let mut rhs = Vec::with_capacity(n_rows);
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_struct];
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (r, row) in problem.rows.iter().enumerate() {
            merged.clear();
            merged.extend_from_slice(&row.coeffs);
            merged.sort_unstable_by_key(|&(j, _)| j);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let mut b = row.rhs;
            for &(j, coeff) in merged.iter() {
                if coeff == 0.0 {
                    continue;
                }
                match expansion[j] {
                    Expansion::Single(col) => cols[col].push((r as u32, coeff)),
                    Expansion::Segments { first, count, base } => {
                        b -= coeff * base;
                        for col in first..first + count {
                            cols[col].push((r as u32, coeff));
                        }
                    }
                }
            }
            rhs.push(b);
        }

        // Flatten to CSC, appending logicals.
        let n_cols = n_struct + n_rows;
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::new();
        let mut col_val = Vec::new();
        col_ptr.push(0);
        for col in &cols {
            for &(r, v) in col {
                row_idx.push(r);
                col_val.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        for (r, row) in problem.rows.iter().enumerate() {
            row_idx.push(r as u32);
            col_val.push(1.0);
            col_ptr.push(row_idx.len());
            let (l, u) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
            cost.push(0.0);
        }

        CompForm {
            n_rows,
            n_struct,
            n_cols,
            col_ptr,
            row_idx,
            col_val,
            lb,
            ub,
            cost,
            rhs,
            obj_offset,
            expansion,
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.row_idx[lo..hi], &self.col_val[lo..hi])
    }

    /// Maps a computational solution back to user-variable values.
    pub fn recover(&self, x: &[f64]) -> Vec<f64> {
        self.expansion
            .iter()
            .map(|e| match *e {
                Expansion::Single(col) => x[col],
                Expansion::Segments { first, count, base } => {
                    base + x[first..first + count].iter().sum::<f64>()
                }
            })
            .collect()
    }

    /// Internal LP objective (piecewise-linear model of any quadratics).
    pub fn pwl_objective(&self, x: &[f64]) -> f64 {
        let mut obj = self.obj_offset;
        for j in 0..self.n_struct {
            obj += self.cost[j] * x[j];
        }
        obj
    }
}

/// Breakpoints for the piecewise-linear model of a quadratic on `[lb, ub]`:
/// the bounds, the (clamped) center, and geometrically growing offsets on
/// both sides of the center.
fn segment_nodes(lb: f64, ub: f64, center: f64, nodes: &mut Vec<f64>) {
    let c = center.clamp(lb, ub);
    nodes.clear();
    nodes.push(lb);
    nodes.push(ub);
    if c > lb && c < ub {
        nodes.push(c);
    }
    let mut o = APEX_OFFSET;
    loop {
        let lo = c - o;
        let hi = c + o;
        let mut any = false;
        if lo > lb {
            nodes.push(lo);
            any = true;
        }
        if hi < ub {
            nodes.push(hi);
            any = true;
        }
        if !any {
            break;
        }
        o *= OFFSET_RATIO;
    }
    nodes.sort_unstable_by(|a, b| a.total_cmp(b));
    let scale = 1.0 + lb.abs().max(ub.abs());
    nodes.dedup_by(|b, a| (*b - *a).abs() < 1e-12 * scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_cover_range_and_center() {
        let mut nodes = Vec::new();
        segment_nodes(0.0, 250.0, 40.0, &mut nodes);
        assert_eq!(nodes.first().copied(), Some(0.0));
        assert_eq!(nodes.last().copied(), Some(250.0));
        assert!(nodes.contains(&40.0));
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        // Finest spacing sits at the center.
        let i = nodes.iter().position(|&v| v == 40.0).unwrap();
        assert!((nodes[i + 1] - nodes[i] - APEX_OFFSET).abs() < 1e-12);
    }

    #[test]
    fn nodes_center_outside_range() {
        let mut nodes = Vec::new();
        segment_nodes(0.0, 10.0, -5.0, &mut nodes);
        assert_eq!(nodes.first().copied(), Some(0.0));
        assert_eq!(nodes.last().copied(), Some(10.0));
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }
}
