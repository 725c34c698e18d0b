//! Reading and writing models in the CPLEX LP text format.
//!
//! The writer emits every variable in the `Bounds` section in declaration
//! order, so that parsing a written file reproduces variable indices as well
//! as values. Numbers are written in shortest round-trip form.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Comparator, LinearProgram, MixedIntegerProgram, VarId};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

const TERMS_PER_LINE: usize = 6;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]{}()!\"#$%&/,;?@'`|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, names: &[String], terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    for (i, &(v, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", number(a.abs()), names[v.0]);
    }
}

/// Renders a mixed-integer program; selector groups appear as ordinary rows.
pub fn write_lp(mip: &MixedIntegerProgram) -> String {
    let lp = &mip.lp;
    let mut names: Vec<String> = Vec::with_capacity(lp.num_vars());
    let mut seen = HashMap::new();
    for v in &lp.variables {
        let mut n = sanitize(&v.name);
        while seen.contains_key(&n) {
            n.push('_');
        }
        seen.insert(n.clone(), ());
        names.push(n);
    }
    let mut out = String::from("Minimize\n obj:");
    if lp.num_vars() == 0 {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, &names, &lp.objective);
    }
    out.push_str("\nSubject To\n");
    for (r, c) in lp.constraints.iter().enumerate() {
        let name = if c.name.is_empty() {
            format!("r{r}")
        } else {
            sanitize(&c.name)
        };
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &names, &c.coeffs);
        let _ = writeln!(out, " {} {}", c.cmp.symbol(), number(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, n) in lp.variables.iter().zip(&names) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {n} free");
        } else {
            let _ = writeln!(out, " {} <= {n} <= {}", number(v.lower), number(v.upper));
        }
    }
    if !mip.binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in mip.binaries.chunks(TERMS_PER_LINE * 2) {
            let line: Vec<&str> = chunk.iter().map(|b| names[b.0].as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, bool)> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.as_str();
    match l {
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, false)),
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, true)),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, false)),
        "bounds" | "bound" => Some((Section::Bounds, false)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, false)),
        "generals" | "general" | "gen" => Some((Section::Generals, false)),
        "end" => Some((Section::End, false)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
}

fn tokenize(text: &str, line: usize, out: &mut Vec<Token>) {
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<Token>| {
        if !cur.is_empty() {
            out.push(Token {
                text: std::mem::take(cur),
                line,
            });
        }
    };
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            flush(&mut cur, out);
        } else if c == ':' {
            cur.push(c);
            flush(&mut cur, out);
        } else if c == '<' || c == '>' || c == '=' {
            flush(&mut cur, out);
            let mut op = c.to_string();
            if i + 1 < chars.len() && "<>=".contains(chars[i + 1]) {
                op.push(chars[i + 1]);
                i += 1;
            }
            out.push(Token { text: op, line });
        } else if (c == '+' || c == '-')
            && !(cur.ends_with(['e', 'E']) && cur.chars().next().is_some_and(|f| f.is_ascii_digit() || f == '.'))
        {
            flush(&mut cur, out);
            // Keep a sign attached to an immediately following infinity.
            let rest: String = chars[i + 1..].iter().take(8).collect::<String>().to_ascii_lowercase();
            if rest.starts_with("inf") {
                cur.push(c);
            } else {
                out.push(Token {
                    text: c.to_string(),
                    line,
                });
            }
        } else {
            cur.push(c);
        }
        i += 1;
    }
    flush(&mut cur, out);
}

fn parse_number(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => {
            if s.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '+' || c == '-') {
                s.parse().ok()
            } else {
                None
            }
        }
    }
}

fn comparator(s: &str) -> Option<Comparator> {
    match s {
        "<=" | "<" | "=<" => Some(Comparator::Le),
        ">=" | ">" | "=>" => Some(Comparator::Ge),
        "=" | "==" => Some(Comparator::Eq),
        _ => None,
    }
}

struct Builder {
    order: Vec<String>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.order.push(name.to_string());
        self.index.insert(name.to_string(), self.order.len() - 1);
        self.order.len() - 1
    }
}

/// Parses a linear expression. Stops at a comparator or at the end.
fn parse_expr(
    toks: &[Token],
    pos: &mut usize,
    b: &mut Builder,
) -> Result<(Vec<(usize, f64)>, f64), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    while *pos < toks.len() && comparator(&toks[*pos].text).is_none() {
        let mut sign = 1.0;
        while *pos < toks.len() && (toks[*pos].text == "+" || toks[*pos].text == "-") {
            if toks[*pos].text == "-" {
                sign = -sign;
            }
            *pos += 1;
        }
        let Some(tok) = toks.get(*pos) else {
            return Err(LpParseError {
                line: toks.last().map_or(0, |t| t.line),
                message: "expression ends with a sign".into(),
            });
        };
        if let Some(v) = parse_number(&tok.text) {
            *pos += 1;
            match toks.get(*pos) {
                Some(next)
                    if comparator(&next.text).is_none()
                        && next.text != "+"
                        && next.text != "-"
                        && parse_number(&next.text).is_none() =>
                {
                    terms.push((b.var(&next.text), sign * v));
                    *pos += 1;
                }
                _ => constant += sign * v,
            }
        } else {
            terms.push((b.var(&tok.text), sign));
            *pos += 1;
        }
    }
    Ok((terms, constant))
}

struct RawRow {
    name: String,
    terms: Vec<(usize, f64)>,
    cmp: Comparator,
    rhs: f64,
}

/// Parses a model written in LP format. Maximization objectives are negated
/// so that the result always minimizes.
pub fn parse_lp(text: &str) -> Result<MixedIntegerProgram, LpParseError> {
    let mut section = Section::Preamble;
    let mut maximize = false;
    let mut objective_toks = Vec::new();
    let mut row_toks = Vec::new();
    let mut bound_lines: Vec<(usize, Vec<Token>)> = Vec::new();
    let mut binary_names: Vec<Token> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some((s, max)) = section_keyword(line) {
            section = s;
            if s == Section::Objective {
                maximize = max;
            }
            continue;
        }
        match section {
            Section::Preamble => {
                return Err(LpParseError {
                    line: line_no,
                    message: "content before the objective section".into(),
                })
            }
            Section::Objective => tokenize(line, line_no, &mut objective_toks),
            Section::Constraints => tokenize(line, line_no, &mut row_toks),
            Section::Bounds => {
                let mut toks = Vec::new();
                tokenize(line, line_no, &mut toks);
                bound_lines.push((line_no, toks));
            }
            Section::Binaries => tokenize(line, line_no, &mut binary_names),
            Section::Generals => {
                return Err(LpParseError {
                    line: line_no,
                    message: "general integer variables are not supported".into(),
                })
            }
            Section::End => {
                return Err(LpParseError {
                    line: line_no,
                    message: "content after End".into(),
                })
            }
        }
    }

    let mut b = Builder {
        order: Vec::new(),
        index: HashMap::new(),
    };
    // Bounds fix the declaration order.
    let mut bounds: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    for (line, raw_toks) in &bound_lines {
        let mut toks: Vec<Token> = Vec::with_capacity(raw_toks.len());
        let mut i = 0;
        while i < raw_toks.len() {
            let t = &raw_toks[i];
            if (t.text == "+" || t.text == "-")
                && raw_toks.get(i + 1).is_some_and(|n| parse_number(&n.text).is_some())
            {
                toks.push(Token {
                    text: format!("{}{}", t.text, raw_toks[i + 1].text),
                    line: t.line,
                });
                i += 2;
            } else {
                toks.push(t.clone());
                i += 1;
            }
        }
        let err = |m: &str| LpParseError {
            line: *line,
            message: m.to_string(),
        };
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        match texts.as_slice() {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                let v = b.var(name);
                bounds.push((v, Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
            }
            [lo, c1, name, c2, hi] => {
                let (lo, hi) = (
                    parse_number(lo).ok_or_else(|| err("bad lower bound"))?,
                    parse_number(hi).ok_or_else(|| err("bad upper bound"))?,
                );
                if comparator(c1) != Some(Comparator::Le) || comparator(c2) != Some(Comparator::Le) {
                    return Err(err("expected lo <= name <= hi"));
                }
                let v = b.var(name);
                bounds.push((v, Some(lo), Some(hi)));
            }
            [a, c, z] => {
                let cmp = comparator(c).ok_or_else(|| err("expected a comparator"))?;
                let (name, value, flipped) = match (parse_number(a), parse_number(z)) {
                    (None, Some(v)) => (*a, v, false),
                    (Some(v), None) => (*z, v, true),
                    _ => return Err(err("bound must relate one variable and one number")),
                };
                let v = b.var(name);
                let cmp = match (cmp, flipped) {
                    (Comparator::Le, true) => Comparator::Ge,
                    (Comparator::Ge, true) => Comparator::Le,
                    (c, _) => c,
                };
                bounds.push(match cmp {
                    Comparator::Le => (v, None, Some(value)),
                    Comparator::Ge => (v, Some(value), None),
                    Comparator::Eq => (v, Some(value), Some(value)),
                });
            }
            _ => return Err(err("unrecognized bound")),
        }
    }

    let mut pos = 0;
    if objective_toks.len() >= 2 && objective_toks[1].text == ":" {
        pos = 2;
    } else if objective_toks.first().is_some_and(|t| t.text.ends_with(':')) {
        pos = 1;
    }
    let (obj_terms, _) = parse_expr(&objective_toks, &mut pos, &mut b)?;
    if pos != objective_toks.len() {
        return Err(LpParseError {
            line: objective_toks[pos].line,
            message: "comparator in objective".into(),
        });
    }

    let mut rows: Vec<RawRow> = Vec::new();
    let mut pos = 0;
    while pos < row_toks.len() {
        let mut name = format!("r{}", rows.len());
        if let Some(t) = row_toks.get(pos) {
            if t.text.ends_with(':') && t.text.len() > 1 {
                name = t.text.trim_end_matches(':').to_string();
                pos += 1;
            } else if row_toks.get(pos + 1).is_some_and(|n| n.text == ":") {
                name = t.text.clone();
                pos += 2;
            }
        }
        let line = row_toks[pos.min(row_toks.len() - 1)].line;
        let (terms, constant) = parse_expr(&row_toks, &mut pos, &mut b)?;
        let cmp = row_toks
            .get(pos)
            .and_then(|t| comparator(&t.text))
            .ok_or(LpParseError {
                line,
                message: format!("row {name} lacks a comparator"),
            })?;
        pos += 1;
        let mut sign = 1.0;
        while pos < row_toks.len() && (row_toks[pos].text == "+" || row_toks[pos].text == "-") {
            if row_toks[pos].text == "-" {
                sign = -sign;
            }
            pos += 1;
        }
        let rhs = row_toks
            .get(pos)
            .and_then(|t| parse_number(&t.text))
            .ok_or(LpParseError {
                line,
                message: format!("row {name} lacks a numeric right-hand side"),
            })?;
        pos += 1;
        rows.push(RawRow {
            name,
            terms,
            cmp,
            rhs: sign * rhs - constant,
        });
    }

    let binaries: Vec<usize> = binary_names.iter().map(|t| b.var(&t.text)).collect();

    let mut lp = LinearProgram::new();
    for name in &b.order {
        lp.add_variable(name.clone(), 0.0, f64::INFINITY);
    }
    for &v in &binaries {
        lp.variables[v].upper = 1.0;
    }
    for (v, lo, hi) in bounds {
        if let Some(lo) = lo {
            lp.variables[v].lower = lo;
        }
        if let Some(hi) = hi {
            lp.variables[v].upper = hi;
        }
    }
    let sign = if maximize { -1.0 } else { 1.0 };
    lp.set_objective(obj_terms.into_iter().map(|(v, a)| (VarId(v), sign * a)));
    for row in rows {
        lp.add_constraint(
            row.name,
            row.terms.into_iter().map(|(v, a)| (VarId(v), a)),
            row.cmp,
            row.rhs,
        );
    }
    let mut mip = MixedIntegerProgram::new(lp);
    mip.binaries = binaries.into_iter().map(VarId).collect();
    Ok(mip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hand_written_model() {
        let text = "\\ example\nMaximize\n obj: 3 x + 2 y_long - z\nSubject To\n c1: x + y_long <= 4\n c2: x - 2.5e-1 z >= -1\n x + z = 2\nBounds\n x <= 10\n -inf <= z <= 5\n y_long free\nBinaries\n b\nEnd\n";
        let mip = parse_lp(text).unwrap();
        let names: Vec<&str> = mip.lp.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, vec!["x", "z", "y_long", "b"]);
        assert_eq!(mip.lp.objective, vec![(VarId(0), -3.0), (VarId(2), -2.0), (VarId(1), 1.0)]);
        assert_eq!(mip.lp.constraints.len(), 3);
        assert_eq!(mip.lp.constraints[1].coeffs, vec![(VarId(0), 1.0), (VarId(1), -0.25)]);
        assert_eq!(mip.lp.constraints[1].rhs, -1.0);
        assert_eq!(mip.lp.constraints[2].name, "r2");
        assert_eq!(mip.lp.variables[0].upper, 10.0);
        assert_eq!(mip.lp.variables[1].lower, f64::NEG_INFINITY);
        assert_eq!(mip.lp.variables[2].lower, f64::NEG_INFINITY);
        assert_eq!(mip.lp.variables[3].upper, 1.0);
        assert_eq!(mip.binaries, vec![VarId(3)]);
    }

    #[test]
    fn reports_line_of_error() {
        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x + y 3\nEnd\n").unwrap_err();
        assert_eq!(err.line, 4);
    }
}
