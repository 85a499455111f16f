//! CPLEX-style LP file writer, plus a reader for the subset the writer emits.

use std::collections::HashMap;
use std::fmt::Write;

use super::{MilpModel, Sense, VarId, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 4;

/// 17 significant digits, enough to reproduce every f64 exactly.
fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        let first = model.variables.first().map_or("x", |v| v.name.as_str());
        let _ = write!(out, " 0 {first}");
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(c.abs()), model.variables[v.0].name);
    }
}

pub fn export_lp_format(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ written by freqsec\n");
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, &model.objective);
    if model.objective_offset != 0.0 {
        let sign = if model.objective_offset < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", num(model.objective_offset.abs()));
    }
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let default_binary = v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0;
        if default_binary {
            continue;
        }
        let (l, u) = (v.lower, v.upper);
        let line = if l == f64::NEG_INFINITY && u == f64::INFINITY {
            format!(" {} free", v.name)
        } else if l == u {
            format!(" {} = {}", v.name, num(l))
        } else if u == f64::INFINITY {
            format!(" {} >= {}", v.name, num(l))
        } else {
            format!(" {} <= {} <= {}", num(l), v.name, num(u))
        };
        out.push_str(&line);
        out.push('\n');
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

fn is_op(c: char) -> bool {
    matches!(c, '+' | '-' | '<' | '>' | '=' | ':')
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |m: String| Error::LpFormat { line, message: m };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" => Sense::Eq,
                _ => return Err(err(format!("bad operator {op:?}"))),
            };
            toks.push(Tok::Cmp(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let exp_sign = (d == '+' || d == '-') && j > i && matches!(chars[j - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<f64>().map_err(|e| err(format!("bad number {s:?}: {e}")))?;
            toks.push(Tok::Num(v));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() && !is_op(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                _ => toks.push(Tok::Name(s)),
            }
            i = j;
        }
    }
    Ok(toks)
}

struct Builder {
    model: MilpModel,
    index: HashMap<String, VarId>,
}

impl Builder {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.model.add_continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), id);
        id
    }

    /// Parse `[label:] (+|-)? coef? name ...`, returning terms, constant and
    /// the remaining tokens.
    fn expr<'a>(&mut self, toks: &'a [Tok], line: usize) -> Result<(Vec<(VarId, f64)>, f64, &'a [Tok])> {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        let mut constant = 0.0;
        let mut i = 0;
        while i < toks.len() {
            let mut sign = 1.0;
            while let Some(t @ (Tok::Plus | Tok::Minus)) = toks.get(i) {
                if *t == Tok::Minus {
                    sign = -sign;
                }
                i += 1;
            }
            match (toks.get(i), toks.get(i + 1)) {
                (Some(Tok::Num(c)), Some(Tok::Name(n))) => {
                    let id = self.var(n);
                    terms.push((id, sign * c));
                    i += 2;
                }
                (Some(Tok::Num(c)), _) => {
                    constant += sign * c;
                    i += 1;
                }
                (Some(Tok::Name(n)), _) => {
                    let id = self.var(n);
                    terms.push((id, sign));
                    i += 1;
                }
                (Some(Tok::Cmp(_)), _) | (None, _) => break,
                (Some(t), _) => {
                    return Err(Error::LpFormat {
                        line,
                        message: format!("unexpected token {t:?}"),
                    })
                }
            }
        }
        Ok((terms, constant, &toks[i..]))
    }
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

/// Split `text` into `(first line number, joined text)` statements, where a
/// new statement starts at every line whose first token is a label.
fn statements(lines: &[(usize, &str)]) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for &(no, l) in lines {
        let labelled = l
            .split_whitespace()
            .next()
            .is_some_and(|w| w.ends_with(':') || l.contains(':'));
        match out.last_mut() {
            Some(last) if !labelled => {
                last.1.push(' ');
                last.1.push_str(l);
            }
            _ => out.push((no, l.to_string())),
        }
    }
    out
}

/// Read an LP file in the dialect written by [`export_lp_format`].
pub fn parse_lp_format(text: &str) -> Result<MilpModel> {
    let mut b = Builder {
        model: MilpModel::new(),
        index: HashMap::new(),
    };
    let mut section = Section::Preamble;
    let mut buckets: [Vec<(usize, &str)>; 4] = Default::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_keyword(line) {
            section = s;
            continue;
        }
        let slot = match section {
            Section::Objective => 0,
            Section::Constraints => 1,
            Section::Bounds => 2,
            Section::Binaries => 3,
            Section::Preamble | Section::End => {
                return Err(Error::LpFormat {
                    line: i + 1,
                    message: "text outside any section".into(),
                })
            }
        };
        buckets[slot].push((i + 1, line));
    }

    if let Some((line, stmt)) = statements(&buckets[0]).into_iter().next() {
        let toks = tokenize(&stmt, line)?;
        let body = strip_label(&toks).1;
        let (terms, constant, rest) = b.expr(body, line)?;
        if !rest.is_empty() {
            return Err(Error::LpFormat {
                line,
                message: "objective contains a comparison".into(),
            });
        }
        b.model.objective = merge(terms);
        b.model.objective_offset = constant;
    }

    for (k, (line, stmt)) in statements(&buckets[1]).into_iter().enumerate() {
        let toks = tokenize(&stmt, line)?;
        let (label, body) = strip_label(&toks);
        let (terms, constant, rest) = b.expr(body, line)?;
        let (sense, rhs) = match rest {
            [Tok::Cmp(s), Tok::Num(v)] => (*s, *v),
            [Tok::Cmp(s), Tok::Minus, Tok::Num(v)] => (*s, -*v),
            [Tok::Cmp(s), Tok::Plus, Tok::Num(v)] => (*s, *v),
            _ => {
                return Err(Error::LpFormat {
                    line,
                    message: "expected `<sense> <number>` after the expression".into(),
                })
            }
        };
        let name = label.unwrap_or_else(|| format!("R{}", k + 1));
        b.model.add_constraint(name, merge(terms), sense, rhs - constant);
    }

    for &(line, stmt) in &buckets[2] {
        parse_bound(&mut b, &tokenize(stmt, line)?, line)?;
    }

    for &(_, stmt) in &buckets[3] {
        for name in stmt.split_whitespace() {
            let id = b.var(name);
            let v = b.model.var_mut(id);
            v.kind = VarKind::Binary;
            if v.upper == f64::INFINITY {
                v.upper = 1.0;
            }
            v.lower = v.lower.max(0.0);
            v.upper = v.upper.min(1.0);
        }
    }
    Ok(b.model)
}

fn strip_label(toks: &[Tok]) -> (Option<String>, &[Tok]) {
    match toks {
        [Tok::Name(n), Tok::Colon, rest @ ..] => (Some(n.clone()), rest),
        _ => (None, toks),
    }
}

fn merge(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.iter_mut().find(|(w, _)| *w == v) {
            Some(slot) => slot.1 += c,
            None => out.push((v, c)),
        }
    }
    out
}

fn signed(toks: &[Tok]) -> Option<(f64, &[Tok])> {
    match toks {
        [Tok::Minus, Tok::Num(v), rest @ ..] => Some((-v, rest)),
        [Tok::Plus, Tok::Num(v), rest @ ..] => Some((*v, rest)),
        [Tok::Num(v), rest @ ..] => Some((*v, rest)),
        _ => None,
    }
}

fn parse_bound(b: &mut Builder, toks: &[Tok], line: usize) -> Result<()> {
    let bad = || Error::LpFormat {
        line,
        message: "unrecognised bound".into(),
    };
    if let [Tok::Name(n), Tok::Name(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            let id = b.var(n);
            let v = b.model.var_mut(id);
            v.lower = f64::NEG_INFINITY;
            v.upper = f64::INFINITY;
            return Ok(());
        }
    }
    if let Some((lo, rest)) = signed(toks) {
        // l <= x [<= u]
        match rest {
            [Tok::Cmp(Sense::Le), Tok::Name(n), tail @ ..] => {
                let id = b.var(n);
                b.model.var_mut(id).lower = lo;
                match tail {
                    [] => Ok(()),
                    [Tok::Cmp(Sense::Le), more @ ..] => {
                        let (hi, _) = signed(more).ok_or_else(bad)?;
                        b.model.var_mut(id).upper = hi;
                        Ok(())
                    }
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    } else if let [Tok::Name(n), Tok::Cmp(s), rest @ ..] = toks {
        let (v, _) = signed(rest).ok_or_else(bad)?;
        let id = b.var(n);
        let var = b.model.var_mut(id);
        match s {
            Sense::Eq => {
                var.lower = v;
                var.upper = v;
            }
            Sense::Ge => var.lower = v,
            Sense::Le => var.upper = v,
        }
        Ok(())
    } else {
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.set_objective(vec![(x, 1.0)]);
        m.add_constraint("lo", vec![(x, 1.0)], Sense::Ge, 3.0);
        m
    }

    #[test]
    fn one_variable_file_has_all_sections() {
        let mut m = tiny();
        let b = m.add_binary("b");
        m.add_objective_term(b, 0.5);
        let text = export_lp_format(&m);
        for s in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(text.contains(s), "{text}");
        }
        assert!(text.contains("1.0000000000000000e0 x"), "{text}");
    }

    #[test]
    fn parses_bounds_forms() {
        let text = "Minimize\n obj: x + 2 y - z\nSubject To\n c1: x + y >= 1.5e0\n c2: - x\n  + z <= -2\nBounds\n -inf <= x <= 4\n y free\n z = 3\n w >= -1\nBinaries\n b\nEnd\n";
        let m = parse_lp_format(text).unwrap();
        let id = |n: &str| m.var_by_name(n).unwrap();
        assert_eq!(m.var(id("x")).lower, f64::NEG_INFINITY);
        assert_eq!(m.var(id("x")).upper, 4.0);
        assert_eq!(m.var(id("y")).lower, f64::NEG_INFINITY);
        assert_eq!((m.var(id("z")).lower, m.var(id("z")).upper), (3.0, 3.0));
        assert_eq!(m.var(id("w")).lower, -1.0);
        assert_eq!(m.var(id("b")).kind, VarKind::Binary);
        assert_eq!(m.constraints[1].rhs, -2.0);
        assert_eq!(m.constraints[1].terms, vec![(id("x"), -1.0), (id("z"), 1.0)]);
    }

    fn keyed(m: &MilpModel) -> Vec<(String, String, u64, String, u64)> {
        let mut rows = Vec::new();
        for c in &m.constraints {
            for &(v, a) in &c.terms {
                rows.push((
                    c.name.clone(),
                    m.var(v).name.clone(),
                    a.to_bits(),
                    c.sense.symbol().to_string(),
                    c.rhs.to_bits(),
                ));
            }
        }
        rows.sort();
        rows
    }

    fn var_table(m: &MilpModel) -> Vec<(String, VarKind, u64, u64)> {
        let mut v: Vec<_> = m
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.kind, v.lower.to_bits(), v.upper.to_bits()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    proptest! {
        #[test]
        fn round_trip_preserves_matrix(
            coefs in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 5), 1..6),
            rhs in proptest::collection::vec(-1e3f64..1e3, 6),
            obj in proptest::collection::vec(-50.0f64..50.0, 5),
            senses in proptest::collection::vec(0u8..3, 6),
            lows in proptest::collection::vec(-10.0f64..0.0, 5),
        ) {
            let mut m = MilpModel::new();
            let vars: Vec<VarId> = (0..5).map(|j| match j {
                0 => m.add_binary("b_g1_t1"),
                1 => m.add_continuous("free_1", f64::NEG_INFINITY, f64::INFINITY),
                2 => m.add_continuous("p_g2_t1", lows[2], f64::INFINITY),
                3 => m.add_continuous("fixed", lows[3], lows[3]),
                _ => m.add_continuous("z_l1_n1", lows[4], 7.25),
            }).collect();
            m.set_objective(vars.iter().zip(&obj).map(|(&v, &c)| (v, c)).collect());
            for (i, row) in coefs.iter().enumerate() {
                let sense = [Sense::Le, Sense::Eq, Sense::Ge][senses[i] as usize];
                m.add_constraint(format!("r{i}"), vars.iter().zip(row).map(|(&v, &c)| (v, c)).collect(), sense, rhs[i]);
            }
            let back = parse_lp_format(&export_lp_format(&m)).unwrap();
            prop_assert_eq!(keyed(&back), keyed(&m));
            prop_assert_eq!(var_table(&back), var_table(&m));
            let mut o1: Vec<_> = m.objective.iter().map(|&(v, c)| (m.var(v).name.clone(), c.to_bits())).collect();
            let mut o2: Vec<_> = back.objective.iter().map(|&(v, c)| (back.var(v).name.clone(), c.to_bits())).collect();
            o1.sort(); o2.sort();
            prop_assert_eq!(o1, o2);
        }
    }
}
