//! Sparse LU factorization of the simplex basis.
//!
//! Left-looking (Gilbert–Peierls) factorization with partial pivoting by
//! magnitude. Columns are processed in an order chosen for the staircase
//! structure of dispatch problems (sorted by lowest row index, then by
//! sparsity), which keeps fill-in close to the band. Dependent columns are
//! reported back to the caller so it can patch the basis with logical
//! columns instead of failing.

/// Absolute pivot floor; a column whose remaining entries are all below this
/// is treated as linearly dependent.
const PIVOT_FLOOR: f64 = 1e-11;

pub(crate) struct LuFactors {
    n: usize,
    /// Unit-lower-triangular multipliers per pivot position, on original row
    /// indices of rows pivoted later.
    l_cols: Vec<Vec<(u32, f64)>>,
    /// Upper-triangular entries per pivot position (positions < t).
    u_cols: Vec<Vec<(u32, f64)>>,
    u_diag: Vec<f64>,
    /// perm[orig_row] = pivot position (n = unassigned during factorization).
    perm: Vec<u32>,
    /// perm_inv[position] = orig_row.
    perm_inv: Vec<u32>,
}

pub(crate) struct Factorization {
    pub lu: LuFactors,
    /// Input column indices accepted as basis columns, in pivot order.
    pub accepted: Vec<usize>,
    /// Input column indices rejected as linearly dependent.
    pub rejected: Vec<usize>,
    /// Original rows left without a pivot (to be covered by logicals).
    pub uncovered_rows: Vec<usize>,
}

impl LuFactors {
    /// Factorizes the matrix whose columns are `cols` (original row space).
    /// The matrix may be singular; dependent columns are rejected rather than
    /// failing the factorization.
    pub fn factorize(n: usize, cols: &[Vec<(u32, f64)>]) -> Factorization {
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by_key(|&c| {
            let min_row = cols[c].iter().map(|&(r, _)| r).min().unwrap_or(u32::MAX);
            (min_row, cols[c].len(), c)
        });

        let mut lu = LuFactors {
            n,
            l_cols: Vec::with_capacity(n),
            u_cols: Vec::with_capacity(n),
            u_diag: Vec::with_capacity(n),
            perm: vec![n as u32; n],
            perm_inv: Vec::with_capacity(n),
        };
        let mut accepted = Vec::with_capacity(cols.len());
        let mut rejected = Vec::new();

        // Dense workspace over original rows plus a DFS stack for the sparse
        // triangular solve pattern.
        let mut work = vec![0.0f64; n];
        let mut visited = vec![false; n];
        let mut topo: Vec<u32> = Vec::new();
        let mut dfs: Vec<(u32, usize)> = Vec::new();
        let mut lower_rows: Vec<u32> = Vec::new();

        for &c in &order {
            let col = &cols[c];
            if col.is_empty() {
                rejected.push(c);
                continue;
            }
            // Symbolic: positions reachable from the column pattern through L,
            // in topological order (reverse DFS postorder); plus the unpivoted
            // rows hit, which are the pivot candidates.
            topo.clear();
            lower_rows.clear();
            for &(r, _) in col {
                if visited[r as usize] {
                    continue;
                }
                visited[r as usize] = true;
                let pos = lu.perm[r as usize];
                if pos == n as u32 {
                    lower_rows.push(r);
                    continue;
                }
                dfs.push((pos, 0));
                while let Some(top) = dfs.len().checked_sub(1) {
                    let (p, next) = dfs[top];
                    let lcol = &lu.l_cols[p as usize];
                    if next < lcol.len() {
                        dfs[top].1 += 1;
                        let r2 = lcol[next].0;
                        if visited[r2 as usize] {
                            continue;
                        }
                        visited[r2 as usize] = true;
                        let pos2 = lu.perm[r2 as usize];
                        if pos2 == n as u32 {
                            lower_rows.push(r2);
                        } else {
                            dfs.push((pos2, 0));
                        }
                    } else {
                        topo.push(p);
                        dfs.pop();
                    }
                }
            }

            // Numeric: eliminate in topological order.
            for &(r, v) in col {
                work[r as usize] += v;
            }
            for &p in topo.iter().rev() {
                let r = lu.perm_inv[p as usize] as usize;
                let y = work[r];
                if y != 0.0 {
                    for &(r2, l) in &lu.l_cols[p as usize] {
                        work[r2 as usize] -= l * y;
                    }
                }
            }

            // Pivot: largest remaining magnitude among unpivoted rows.
            let mut piv_row = u32::MAX;
            let mut piv_abs = 0.0f64;
            for &r in &lower_rows {
                let a = work[r as usize].abs();
                if a > piv_abs {
                    piv_abs = a;
                    piv_row = r;
                }
            }

            if piv_abs <= PIVOT_FLOOR {
                // Dependent column: clear workspace and reject.
                for &p in &topo {
                    let r = lu.perm_inv[p as usize] as usize;
                    work[r] = 0.0;
                    visited[r] = false;
                }
                for &r in &lower_rows {
                    work[r as usize] = 0.0;
                    visited[r as usize] = false;
                }
                rejected.push(c);
                continue;
            }

            let t = lu.perm_inv.len() as u32;
            let piv_val = work[piv_row as usize];
            let mut lcol = Vec::new();
            for &r in &lower_rows {
                if r != piv_row {
                    let v = work[r as usize];
                    if v != 0.0 {
                        lcol.push((r, v / piv_val));
                    }
                }
                work[r as usize] = 0.0;
                visited[r as usize] = false;
            }
            let mut ucol = Vec::new();
            for &p in &topo {
                let r = lu.perm_inv[p as usize] as usize;
                let v = work[r];
                if v != 0.0 {
                    ucol.push((p, v));
                }
                work[r] = 0.0;
                visited[r] = false;
            }
            ucol.sort_unstable_by_key(|&(p, _)| p);

            lu.perm[piv_row as usize] = t;
            lu.perm_inv.push(piv_row);
            lu.l_cols.push(lcol);
            lu.u_cols.push(ucol);
            lu.u_diag.push(piv_val);
            accepted.push(c);
        }

        let uncovered_rows: Vec<usize> = (0..n).filter(|&r| lu.perm[r] == n as u32).collect();

        // Patch identity pivots for uncovered rows so the factor stays square;
        // the caller substitutes the matching logical columns.
        for &r in &uncovered_rows {
            let t = lu.perm_inv.len() as u32;
            lu.perm[r] = t;
            lu.perm_inv.push(r as u32);
            lu.l_cols.push(Vec::new());
            lu.u_cols.push(Vec::new());
            lu.u_diag.push(1.0);
        }

        Factorization {
            lu,
            accepted,
            rejected,
            uncovered_rows,
        }
    }

    /// Solves `B x = a` where `a` is given as sparse (orig_row, value) pairs.
    /// `work` must be a zeroed dense vector of length `n` (left zeroed on
    /// return); the result lands in `out` indexed by pivot position.
    #[cfg(test)]
    pub fn ftran(&self, a: &[(u32, f64)], work: &mut [f64], out: &mut [f64]) {
        for &(r, v) in a {
            work[r as usize] += v;
        }
        self.ftran_dense(work, out);
    }

    /// As [`Self::ftran`] with the right-hand side given as parallel slices.
    pub fn ftran_pairs(&self, rows: &[u32], vals: &[f64], work: &mut [f64], out: &mut [f64]) {
        for (idx, &r) in rows.iter().enumerate() {
            work[r as usize] += vals[idx];
        }
        self.ftran_dense(work, out);
    }

    /// Solves `B x = work` where `work` is dense over original rows; `work`
    /// comes back zeroed so it can be reused as scratch.
    pub fn ftran_dense(&self, work: &mut [f64], out: &mut [f64]) {
        // L solve in pivot order.
        for t in 0..self.n {
            let r = self.perm_inv[t] as usize;
            let y = work[r];
            if y != 0.0 {
                for &(r2, l) in &self.l_cols[t] {
                    work[r2 as usize] -= l * y;
                }
            }
        }
        // U solve backward; clears `work`.
        for t in (0..self.n).rev() {
            let r = self.perm_inv[t] as usize;
            let x = work[r] / self.u_diag[t];
            work[r] = 0.0;
            out[t] = x;
            if x != 0.0 {
                for &(p, v) in &self.u_cols[t] {
                    work[self.perm_inv[p as usize] as usize] -= v * x;
                }
            }
        }
    }

    /// Solves `B^T y = c` where `c` is dense, indexed by pivot position.
    /// The result is written to `out` indexed by original row.
    pub fn btran(&self, c: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        // U^T w = c, forward over positions (dot form over U columns).
        for t in 0..self.n {
            let mut acc = c[t];
            for &(p, v) in &self.u_cols[t] {
                acc -= v * scratch[p as usize];
            }
            scratch[t] = acc / self.u_diag[t];
        }
        // L^T v = w, backward (dot form over L columns; rows pivoted later).
        for t in (0..self.n).rev() {
            let mut acc = scratch[t];
            for &(r2, l) in &self.l_cols[t] {
                acc -= l * out[r2 as usize];
            }
            // Stash v_t directly in the output slot of this pivot's orig row.
            out[self.perm_inv[t] as usize] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(m: &[&[f64]]) -> Vec<Vec<(u32, f64)>> {
        let n = m.len();
        let mut cols = vec![Vec::new(); m[0].len()];
        for r in 0..n {
            for (c, &v) in m[r].iter().enumerate() {
                if v != 0.0 {
                    cols[c].push((r as u32, v));
                }
            }
        }
        cols
    }

    #[test]
    fn ftran_btran_roundtrip() {
        let cols = dense_cols(&[
            &[2.0, 1.0, 0.0],
            &[0.0, 3.0, 1.0],
            &[1.0, 0.0, 4.0],
        ]);
        let f = LuFactors::factorize(3, &cols);
        assert!(f.rejected.is_empty());
        assert!(f.uncovered_rows.is_empty());

        // Solve B x = e1 and verify by multiplication. Positions map to the
        // accepted column order, so rebuild x in input-column order.
        let mut work = vec![0.0; 3];
        let mut pos_out = vec![0.0; 3];
        f.lu.ftran(&[(0, 1.0)], &mut work, &mut pos_out);
        let mut x = vec![0.0; 3];
        for (t, &c) in f.accepted.iter().enumerate() {
            x[c] = pos_out[t];
        }
        // B x should be e1.
        let b = [
            [2.0, 1.0, 0.0],
            [0.0, 3.0, 1.0],
            [1.0, 0.0, 4.0],
        ];
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|c| b[r][c] * x[c]).sum();
            let rhs = if r == 0 { 1.0 } else { 0.0 };
            assert!((lhs - rhs).abs() < 1e-12, "row {}: {} vs {}", r, lhs, rhs);
        }

        // B^T y = c.
        let c_pos = vec![1.0, 2.0, 3.0]; // cost per pivot position
        let mut scratch = vec![0.0; 3];
        let mut y = vec![0.0; 3];
        f.lu.btran(&c_pos, &mut scratch, &mut y);
        // Check B^T y = c by columns: for accepted column t, dot(col, y) = c[t].
        for (t, &c) in f.accepted.iter().enumerate() {
            let dot: f64 = cols[c].iter().map(|&(r, v)| v * y[r as usize]).sum();
            assert!((dot - c_pos[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_column_rejected() {
        // Third column = first + second.
        let cols = dense_cols(&[
            &[1.0, 0.0, 1.0],
            &[0.0, 1.0, 1.0],
            &[0.0, 0.0, 0.0],
        ]);
        let f = LuFactors::factorize(3, &cols);
        assert_eq!(f.rejected.len(), 1);
        assert_eq!(f.uncovered_rows, vec![2]);
    }
}
