//! Plain-text COO dump for cross-checking with external solvers.
//!
//! ```text
//! qp <n> <m_eq> <m_in>
//! Q <nnz>          then `i j v` per upper-triangle entry
//! c                then `j v` per nonzero
//! Aeq <nnz>        then `i j v`
//! beq              then one value per row
//! Ain <nnz>        then `i j v`
//! bin              then one value per row
//! bounds           then `lb ub` per variable (`-inf`/`inf` allowed)
//! ```
//! Indices are zero-based; values use Rust's shortest round-trip format.

use std::io::{self, Write};

use super::QpProblem;

pub fn write_coo<W: Write>(p: &QpProblem, mut w: W) -> io::Result<()> {
    writeln!(w, "qp {} {} {}", p.n_vars(), p.n_eq(), p.n_in())?;
    writeln!(w, "Q {}", p.q_upper().len())?;
    for &(i, j, v) in p.q_upper() {
        writeln!(w, "{i} {j} {v:?}")?;
    }
    let c: Vec<(usize, f64)> = p
        .linear_cost()
        .iter()
        .copied()
        .enumerate()
        .filter(|e| e.1 != 0.0)
        .collect();
    writeln!(w, "c {}", c.len())?;
    for (j, v) in c {
        writeln!(w, "{j} {v:?}")?;
    }
    for (tag, (rows, rhs)) in [("eq", p.eq_rows()), ("in", p.in_rows())] {
        writeln!(w, "A{tag} {}", rows.iter().map(Vec::len).sum::<usize>())?;
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(w, "{i} {j} {v:?}")?;
            }
        }
        writeln!(w, "b{tag}")?;
        for v in rhs {
            writeln!(w, "{v:?}")?;
        }
    }
    writeln!(w, "bounds")?;
    for (lb, ub) in p.lower().iter().zip(p.upper()) {
        writeln!(w, "{lb:?} {ub:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::QpBuilder;

    #[test]
    fn dump_layout() {
        let mut b = QpBuilder::new();
        let x = b.add_var("x", 0.0, f64::INFINITY, 1.5);
        let y = b.add_var("y", -1.0, 1.0, 0.0);
        b.add_quad(x, x, 2.0);
        b.add_eq("e", vec![(x, 1.0), (y, 1.0)], 1.0);
        let p = b.build().unwrap();
        let mut out = Vec::new();
        write_coo(&p, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "qp 2 1 0\nQ 1\n0 0 2.0\nc 1\n0 1.5\nAeq 2\n0 0 1.0\n0 1 1.0\nbeq\n1.0\nAin 0\nbin\nbounds\n0.0 inf\n-1.0 1.0\n"
        );
    }
}
