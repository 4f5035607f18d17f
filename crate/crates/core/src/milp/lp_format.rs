//! Debug dump of a problem in the CPLEX LP text format, for cross-checking
//! against external solvers. Quadratic proximal terms are expanded into the
//! `[ ... ] / 2` objective section plus their linear part; the constant part
//! is emitted as a literal.

use std::io::{self, Write};

use super::{MilpProblem, Relation};

pub fn write_lp(problem: &MilpProblem, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "\\ dumped by hubnet")?;
    writeln!(out, "Minimize")?;

    let mut lin = problem.obj.clone();
    let mut quad: Vec<(usize, f64)> = Vec::new();
    let mut constant = problem.obj_offset;
    for q in &problem.quad {
        // (w/2)(x-c)^2 = (w/2) x^2 - w c x + (w/2) c^2
        lin[q.var.0] -= q.weight * q.center;
        constant += 0.5 * q.weight * q.center * q.center;
        quad.push((q.var.0, q.weight));
    }

    write!(out, " obj:")?;
    let mut any = false;
    for (j, &c) in lin.iter().enumerate() {
        if c != 0.0 {
            write!(out, " {} {} x{}", sign(c, any), c.abs(), j)?;
            any = true;
        }
    }
    if constant != 0.0 {
        write!(out, " {} {}", sign(constant, any), constant.abs())?;
        any = true;
    }
    if !quad.is_empty() {
        write!(out, " + [")?;
        for (i, &(j, w)) in quad.iter().enumerate() {
            write!(out, " {} {} x{} ^ 2", sign(w, i > 0), w.abs(), j)?;
        }
        write!(out, " ] / 2")?;
        any = true;
    }
    if !any {
        write!(out, " 0 x0")?;
    }
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for (r, row) in problem.rows.iter().enumerate() {
        write!(out, " r{}:", r)?;
        let mut first = true;
        for &(j, c) in &row.coeffs {
            if c != 0.0 {
                write!(out, " {} {} x{}", sign(c, !first), c.abs(), j)?;
                first = false;
            }
        }
        if first {
            write!(out, " 0 x0")?;
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        writeln!(out, " {} {}", rel, row.rhs)?;
    }

    writeln!(out, "Bounds")?;
    for (j, v) in problem.vars.iter().enumerate() {
        match (v.lb.is_finite(), v.ub.is_finite()) {
            (true, true) if v.lb == v.ub => writeln!(out, " x{} = {}", j, v.lb)?,
            (true, true) => writeln!(out, " {} <= x{} <= {}", v.lb, j, v.ub)?,
            (true, false) => writeln!(out, " x{} >= {}", j, v.lb)?,
            (false, true) => writeln!(out, " -inf <= x{} <= {}", j, v.ub)?,
            (false, false) => writeln!(out, " x{} free", j)?,
        }
    }

    let bins = problem.binary_ids();
    if !bins.is_empty() {
        writeln!(out, "Binaries")?;
        write!(out, " ")?;
        for j in bins {
            write!(out, "x{} ", j)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "End")
}

fn sign(v: f64, need_plus: bool) -> &'static str {
    if v < 0.0 {
        "-"
    } else if need_plus {
        "+"
    } else {
        ""
    }
}
