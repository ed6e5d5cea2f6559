use std::io::{self, Write};

use super::simplex::Cmp;
use super::LpModel;

/// Terms per output line, to keep lines short.
const PER_LINE: usize = 6;

fn write_terms<W: Write>(out: &mut W, terms: &[(usize, f64)], model: &LpModel) -> io::Result<()> {
    let nonzero: Vec<&(usize, f64)> = terms.iter().filter(|(_, c)| *c != 0.0).collect();
    if nonzero.is_empty() {
        return write!(out, " 0 {}", model.var_name(terms.first().map_or(0, |t| t.0)));
    }
    for (k, &&(j, c)) in nonzero.iter().enumerate() {
        if k > 0 && k % PER_LINE == 0 {
            write!(out, "\n   ")?;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        write!(out, " {sign} {:?} {}", c.abs(), model.var_name(j))?;
    }
    Ok(())
}

pub(super) fn write<W: Write>(model: &LpModel, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "\\ association LP, {} columns, {} rows",
        model.vars.len(),
        model.num_rows()
    )?;
    if model.constant != 0.0 {
        writeln!(out, "\\ constant objective offset: {:?}", model.constant)?;
    }
    writeln!(out, "Minimize")?;
    write!(out, " energy:")?;
    let obj: Vec<(usize, f64)> = model.lp.objective.iter().copied().enumerate().collect();
    write_terms(&mut out, &obj, model)?;
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (r, c) in model.lp.constraints.iter().enumerate() {
        write!(out, " {}:", model.row_name[r])?;
        write_terms(&mut out, &c.coeffs, model)?;
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        };
        writeln!(out, " {op} {:?}", c.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for (j, &ub) in model.lp.upper.iter().enumerate() {
        if ub.is_finite() {
            writeln!(out, " 0 <= {} <= {:?}", model.var_name(j), ub)?;
        }
    }
    writeln!(out, "End")?;
    Ok(())
}
