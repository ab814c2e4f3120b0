//! Textual LP file format, for cross-checking with external solvers.
//!
//! Names are escaped into `[A-Za-z0-9._]`: a literal `_` becomes `__`, any
//! other character outside the set becomes `_<hex code point>_`, and a
//! leading digit, `.`, `e` or `E` (or a name that would read as a number) is
//! escaped the same way.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::model::{LinearConstraint, Milp, MilpExpr, MilpVar};
use crate::problem::{Cmp, Sense, VarKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("bad escaped name {0:?}")]
    BadName(String),
    #[error("missing objective section")]
    MissingObjective,
}

pub fn escape_name(name: &str) -> String {
    let numeric = parse_number(name).is_some();
    let mut out = String::with_capacity(name.len());
    for (i, c) in name.chars().enumerate() {
        let leading = i == 0 && (numeric || c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E'));
        if c == '_' {
            out.push_str("__");
        } else if leading || !(c.is_ascii_alphanumeric() || c == '.') {
            let _ = write!(out, "_{:x}_", c as u32);
        } else {
            out.push(c);
        }
    }
    if out.is_empty() {
        out.push_str("_0_");
    }
    out
}

pub fn unescape_name(name: &str) -> Result<String, LpParseError> {
    if name == "_0_" {
        return Ok(String::new());
    }
    let bad = || LpParseError::BadName(name.to_string());
    let mut out = String::with_capacity(name.len());
    let mut chars = name.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '_' {
            out.push(c);
            continue;
        }
        if chars.peek() == Some(&'_') {
            chars.next();
            out.push('_');
            continue;
        }
        let mut hex = String::new();
        loop {
            match chars.next() {
                Some('_') => break,
                Some(h) if h.is_ascii_hexdigit() => hex.push(h),
                _ => return Err(bad()),
            }
        }
        let code = u32::from_str_radix(&hex, 16).map_err(|_| bad())?;
        out.push(char::from_u32(code).ok_or_else(bad)?);
    }
    Ok(out)
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], constant: f64, names: &[String]) {
    let mut first = true;
    for &(j, c) in terms {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        if first {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if mag != 1.0 {
            let _ = write!(out, " {}", number(mag));
        }
        let _ = write!(out, " {}", names[j]);
        first = false;
    }
    if constant != 0.0 || first {
        if first {
            let _ = write!(out, " {}", number(constant));
        } else {
            let sign = if constant < 0.0 { "-" } else { "+" };
            let _ = write!(out, " {sign} {}", number(constant.abs()));
        }
    }
}

pub fn export_lp_format(milp: &Milp) -> String {
    let names: Vec<String> = milp.vars.iter().map(|v| escape_name(&v.name)).collect();
    let mut out = String::new();
    out.push_str(match milp.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    let objective = milp.objective.compacted();
    write_terms(&mut out, &objective.terms, objective.constant, &names);
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, c) in milp.constraints.iter().enumerate() {
        let label = if c.name.is_empty() { format!("c{i}") } else { escape_name(&c.name) };
        let _ = write!(out, " {label}:");
        let compact = MilpExpr::new(c.terms.clone(), 0.0).compacted();
        write_terms(&mut out, &compact.terms, 0.0, &names);
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(c.rhs));
    }

    out.push_str("Bounds\n");
    for (v, name) in milp.vars.iter().zip(&names) {
        if v.lower == v.upper {
            let _ = writeln!(out, " {name} = {}", number(v.lower));
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", number(v.lower), number(v.upper));
        }
    }

    for (header, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let listed: Vec<&str> = milp
            .vars
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == kind)
            .map(|(_, n)| n.as_str())
            .collect();
        if !listed.is_empty() {
            let _ = writeln!(out, "{header}");
            for chunk in listed.chunks(10) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    Some(match lower.as_str() {
        "maximize" | "maximise" | "maximum" | "max" | "minimize" | "minimise" | "minimum" | "min" => {
            Section::Objective
        }
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "generals" | "general" | "gen" | "integers" => Section::Generals,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => Section::End,
        _ => return None,
    })
}

fn parse_number(token: &str) -> Option<f64> {
    match token.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => token.parse::<f64>().ok(),
    }
}

fn parse_cmp(token: &str) -> Option<Cmp> {
    match token {
        "<=" | "=<" | "<" => Some(Cmp::Le),
        ">=" | "=>" | ">" => Some(Cmp::Ge),
        "=" => Some(Cmp::Eq),
        _ => None,
    }
}

struct Reader {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Reader {
    fn var(&mut self, raw: &str) -> usize {
        if let Some(&j) = self.index.get(raw) {
            return j;
        }
        self.names.push(raw.to_string());
        self.index.insert(raw.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    /// Parses `[+|-] [coef] name ...` with optional bare constants.
    fn expr(&mut self, tokens: &[&str], line: usize) -> Result<MilpExpr, LpParseError> {
        let syntax = |message: String| LpParseError::Syntax { line, message };
        let mut expr = MilpExpr::default();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for &tok in tokens {
            match tok {
                "+" => {
                    if let Some(c) = coef.take() {
                        expr.constant += sign * c;
                    }
                    sign = 1.0;
                }
                "-" => {
                    if let Some(c) = coef.take() {
                        expr.constant += sign * c;
                    }
                    sign = -1.0;
                }
                _ => {
                    if let Some(v) = parse_number(tok) {
                        if coef.is_some() {
                            return Err(syntax(format!("two numbers in a row near {tok:?}")));
                        }
                        coef = Some(v);
                    } else {
                        let j = self.var(tok);
                        expr.terms.push((j, sign * coef.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                }
            }
        }
        if let Some(c) = coef {
            expr.constant += sign * c;
        }
        Ok(expr)
    }
}

/// Reads text produced by [`export_lp_format`] (and the common subset of the
/// format around it) back into a [`Milp`].
pub fn parse_lp_format(text: &str) -> Result<Milp, LpParseError> {
    let mut reader = Reader { names: Vec::new(), index: HashMap::new() };
    let mut sense = None;
    let mut section = Section::None;
    let mut objective_tokens: Vec<(usize, String)> = Vec::new();
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut raw_constraints: Vec<(usize, Vec<String>)> = Vec::new();
    let mut bounds: Vec<(usize, Vec<String>)> = Vec::new();
    let mut generals: Vec<String> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (lineno, full) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = full.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_keyword(line) {
            if s == Section::Objective {
                let lower = line.to_ascii_lowercase();
                sense = Some(if lower.starts_with("max") { Sense::Maximize } else { Sense::Minimize });
            }
            section = s;
            continue;
        }
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        match section {
            Section::None | Section::End => {
                return Err(LpParseError::Syntax { line: line_no, message: "text outside any section".into() })
            }
            Section::Objective => objective_tokens.extend(tokens.into_iter().map(|t| (line_no, t))),
            Section::Constraints => {
                pending.extend(tokens.into_iter().map(|t| (line_no, t)));
                // a row is complete once a comparison is followed by its rhs
                let n = pending.len();
                if n >= 2 && parse_cmp(&pending[n - 2].1).is_some() && parse_number(&pending[n - 1].1).is_some() {
                    let first = pending[0].0;
                    raw_constraints.push((first, pending.drain(..).map(|(_, t)| t).collect()));
                }
            }
            Section::Bounds => bounds.push((line_no, tokens)),
            Section::Generals => generals.extend(tokens),
            Section::Binaries => binaries.extend(tokens),
        }
    }
    if let Some((line, _)) = pending.first() {
        return Err(LpParseError::Syntax { line: *line, message: "unterminated constraint".into() });
    }
    let sense = sense.ok_or(LpParseError::MissingObjective)?;

    // bounds come first so their order fixes the variable order
    let mut parsed_bounds: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    for (line, toks) in &bounds {
        let syntax = |message: &str| LpParseError::Syntax { line: *line, message: message.into() };
        let t: Vec<&str> = toks.iter().map(String::as_str).collect();
        match t.as_slice() {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                let j = reader.var(name);
                parsed_bounds.push((j, Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
            }
            [lo, op1, name, op2, hi] if parse_number(name).is_none() => {
                let (lo, hi) = (parse_number(lo), parse_number(hi));
                if lo.is_none() || hi.is_none() || parse_cmp(op1) != Some(Cmp::Le) || parse_cmp(op2) != Some(Cmp::Le) {
                    return Err(syntax("expected `lo <= name <= hi`"));
                }
                let j = reader.var(name);
                parsed_bounds.push((j, lo, hi));
            }
            [a, op, b] => {
                let (name, value, cmp) = match (parse_number(a), parse_number(b)) {
                    (None, Some(v)) => (*a, v, parse_cmp(op)),
                    (Some(v), None) => (
                        *b,
                        v,
                        parse_cmp(op).map(|c| match c {
                            Cmp::Le => Cmp::Ge,
                            Cmp::Ge => Cmp::Le,
                            Cmp::Eq => Cmp::Eq,
                        }),
                    ),
                    _ => return Err(syntax("bound needs one name and one number")),
                };
                let j = reader.var(name);
                match cmp {
                    Some(Cmp::Le) => parsed_bounds.push((j, None, Some(value))),
                    Some(Cmp::Ge) => parsed_bounds.push((j, Some(value), None)),
                    Some(Cmp::Eq) => parsed_bounds.push((j, Some(value), Some(value))),
                    None => return Err(syntax("unknown comparison")),
                }
            }
            _ => return Err(syntax("unrecognized bound")),
        }
    }

    let (obj_line, mut obj_tokens): (usize, Vec<&str>) = (
        objective_tokens.first().map_or(0, |(l, _)| *l),
        objective_tokens.iter().map(|(_, t)| t.as_str()).collect(),
    );
    if obj_tokens.first().is_some_and(|t| t.ends_with(':')) {
        obj_tokens.remove(0);
    }
    let objective = reader.expr(&obj_tokens, obj_line)?;

    let mut constraints = Vec::new();
    for (i, (line, toks)) in raw_constraints.iter().enumerate() {
        let mut t: Vec<&str> = toks.iter().map(String::as_str).collect();
        let mut name = format!("c{i}");
        if let Some(first) = t.first() {
            if let Some(label) = first.strip_suffix(':') {
                name = unescape_name(label)?;
                t.remove(0);
            }
        }
        let n = t.len();
        let cmp = parse_cmp(t[n - 2]).expect("checked while scanning");
        let rhs = parse_number(t[n - 1]).expect("checked while scanning");
        let lhs = reader.expr(&t[..n - 2], *line)?.compacted();
        constraints.push(LinearConstraint::new(name, lhs.terms, cmp, rhs - lhs.constant));
    }

    let general_idx: Vec<usize> = generals.iter().map(|g| reader.var(g)).collect();
    let binary_idx: Vec<usize> = binaries.iter().map(|b| reader.var(b)).collect();

    let mut vars: Vec<MilpVar> = Vec::with_capacity(reader.names.len());
    for raw in &reader.names {
        vars.push(MilpVar::continuous(unescape_name(raw)?, 0.0, f64::INFINITY));
    }
    for j in general_idx {
        vars[j].kind = VarKind::Integer;
    }
    for j in binary_idx {
        vars[j].kind = VarKind::Binary;
        vars[j].upper = 1.0;
    }
    for (j, lo, hi) in parsed_bounds {
        if let Some(lo) = lo {
            vars[j].lower = lo;
        }
        if let Some(hi) = hi {
            vars[j].upper = hi;
        }
    }

    let mut milp = Milp::new(sense);
    for v in vars {
        milp.add_var(v);
    }
    for c in constraints {
        milp.add_constraint(c);
    }
    milp.objective = objective.compacted();
    Ok(milp)
}
