use std::fmt::Write;

use super::{MilpModel, Relation, VarKind};

const LINE: usize = 78;

/// Formats `x` with at most 12 significant digits, like C's `%.12g`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_fraction(&fixed).to_string()
    } else {
        let m = trim_fraction(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn push_terms(out: &mut String, head: &str, terms: &[(usize, f64)], model: &MilpModel, tail: &str) {
    let mut line = head.to_string();
    for (n, &(i, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let mut piece = String::new();
        if n > 0 || c < 0.0 {
            piece.push_str(sign);
            piece.push(' ');
        }
        if mag != 1.0 {
            piece.push_str(&format_number(mag));
            piece.push(' ');
        }
        piece.push_str(&model.variables[i].name);
        if line.len() + 1 + piece.len() > LINE && line.trim().len() > head.trim().len() {
            out.push_str(&line);
            out.push('\n');
            line = "   ".to_string();
        }
        line.push(' ');
        line.push_str(&piece);
    }
    if terms.is_empty() {
        line.push_str(" 0");
    }
    if line.len() + tail.len() > LINE {
        out.push_str(&line);
        out.push('\n');
        line = "  ".to_string();
    }
    line.push_str(tail);
    out.push_str(&line);
    out.push('\n');
}

/// Writes the model in CPLEX LP format. The output depends only on the
/// model, so identical inputs give byte-identical files.
pub fn emit_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ template embedding model\n");
    let _ = writeln!(out, "\\ {} variables, {} constraints", model.var_count(), model.constraint_count());
    out.push_str("Minimize\n");
    push_terms(&mut out, " obj:", &model.objective, model, "");
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        push_terms(&mut out, &format!(" {}:", c.name), &c.terms, model, &format!(" {rel} {}", format_number(c.rhs)));
    }
    let bounded: Vec<_> =
        model.variables.iter().filter(|v| v.upper.is_some() && v.kind == VarKind::Continuous).collect();
    if !bounded.is_empty() {
        out.push_str("Bounds\n");
        for v in bounded {
            let _ = writeln!(out, " 0 <= {} <= {}", v.name, format_number(v.upper.expect("filtered")));
        }
    }
    let binaries: Vec<_> = model.variables.iter().filter(|v| v.kind == VarKind::Binary).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        let mut line = String::new();
        for v in binaries {
            if !line.is_empty() && line.len() + 1 + v.name.len() > LINE {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            line.push(' ');
            line.push_str(&v.name);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}
