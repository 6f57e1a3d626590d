//! MATPOWER-style case files.
//!
//! Only the `baseMVA` scalar and the `bus`, `gen` and `branch` matrices are
//! read, using the standard MATPOWER column positions:
//!
//! | matrix | columns used (1-based)                                           |
//! |--------|------------------------------------------------------------------|
//! | bus    | 1 id, 2 type, 3 Pd, 4 Qd, 5 Gs, 6 Bs, 8 Vm, 9 Va (deg)           |
//! | gen    | 1 bus, 2 Pg, 3 Qg, 6 Vg, 8 status                                |
//! | branch | 1 from, 2 to, 3 r, 4 x, 5 b, 9 ratio, 10 angle (deg), 11 status |
//!
//! Any other assignment (`version`, `gencost`, cell arrays, ...) is skipped
//! and columns past the ones above are ignored. Everything is converted to
//! per-unit on `baseMVA` while parsing.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::BusKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BusRecord {
    pub id: usize,
    pub kind: BusKind,
    /// Active load, per-unit.
    pub pd: f64,
    /// Reactive load, per-unit.
    pub qd: f64,
    /// Shunt conductance at 1 pu voltage, per-unit.
    pub gs: f64,
    /// Shunt susceptance at 1 pu voltage, per-unit.
    pub bs: f64,
    pub vm: f64,
    /// Voltage angle, radians.
    pub va: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b: f64,
    /// Off-nominal tap ratio; 0 means a plain line (ratio 1).
    pub ratio: f64,
    /// Phase shift, radians.
    pub shift: f64,
    pub in_service: bool,
}

impl BranchRecord {
    pub fn tap(&self) -> f64 {
        if self.ratio == 0.0 {
            1.0
        } else {
            self.ratio
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRecord {
    pub bus: usize,
    pub pg: f64,
    pub qg: f64,
    pub vg: f64,
    pub in_service: bool,
}

/// A parsed case, already in per-unit on `base_mva`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseData {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub gens: Vec<GenRecord>,
}

impl CaseData {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: usize) -> Option<&BusRecord> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Checks the structural invariants the rest of the crate relies on.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) || !self.base_mva.is_finite() {
            return Err(semantic(format!(
                "baseMVA must be positive, got {}",
                self.base_mva
            )));
        }
        if self.buses.is_empty() {
            return Err(semantic("case has no buses"));
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(semantic(format!("duplicate bus id {}", b.id)));
            }
        }
        let n_ref = self.buses.iter().filter(|b| b.kind == BusKind::REF).count();
        if n_ref != 1 {
            return Err(semantic(format!(
                "exactly one reference bus required, found {n_ref}"
            )));
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(semantic(format!(
                        "branch {}-{} references unknown bus {end}",
                        br.from, br.to
                    )));
                }
            }
            if br.ratio < 0.0 {
                return Err(semantic(format!(
                    "branch {}-{} has negative tap ratio {}",
                    br.from, br.to, br.ratio
                )));
            }
        }
        for g in &self.gens {
            if !ids.contains(&g.bus) {
                return Err(semantic(format!(
                    "generator references unknown bus {}",
                    g.bus
                )));
            }
        }
        Ok(())
    }
}

fn semantic(msg: impl Into<String>) -> Error {
    Error::Semantic(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Eq,
    Newline,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (lno, raw_line) in text.lines().enumerate() {
        let line = lno + 1;
        let chars: Vec<char> = raw_line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line, column });
            match c {
                '%' | '#' => break,
                ' ' | '\t' | '\r' => i += 1,
                '[' => {
                    push(&mut out, Tok::LBracket);
                    i += 1;
                }
                ']' => {
                    push(&mut out, Tok::RBracket);
                    i += 1;
                }
                '{' => {
                    push(&mut out, Tok::LBrace);
                    i += 1;
                }
                '}' => {
                    push(&mut out, Tok::RBrace);
                    i += 1;
                }
                ';' => {
                    push(&mut out, Tok::Semi);
                    i += 1;
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    i += 1;
                }
                '=' => {
                    push(&mut out, Tok::Eq);
                    i += 1;
                }
                '\'' | '"' => {
                    let close =
                        chars[i + 1..]
                            .iter()
                            .position(|&d| d == c)
                            .ok_or(Error::Syntax {
                                line,
                                column,
                                expected: "closing quote".into(),
                            })?;
                    push(&mut out, Tok::Str);
                    i += close + 2;
                }
                c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() {
                        let d = chars[i];
                        let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                        if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    let s: String = chars[start..i].iter().collect();
                    let v = match s.parse::<f64>() {
                        Ok(v) => v,
                        // a bare sign before Inf/NaN
                        Err(_) if (s == "-" || s == "+") && i < chars.len() => {
                            let rest: String = chars[i..]
                                .iter()
                                .take_while(|d| d.is_ascii_alphabetic())
                                .collect();
                            if rest.eq_ignore_ascii_case("inf") {
                                i += rest.len();
                                if s == "-" {
                                    f64::NEG_INFINITY
                                } else {
                                    f64::INFINITY
                                }
                            } else {
                                return Err(Error::Syntax {
                                    line,
                                    column,
                                    expected: "number".into(),
                                });
                            }
                        }
                        Err(_) => {
                            return Err(Error::Syntax {
                                line,
                                column,
                                expected: "number".into(),
                            })
                        }
                    };
                    push(&mut out, Tok::Num(v));
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                    {
                        i += 1;
                    }
                    let s: String = chars[start..i].iter().collect();
                    if s.eq_ignore_ascii_case("inf") {
                        push(&mut out, Tok::Num(f64::INFINITY));
                    } else {
                        push(&mut out, Tok::Ident(s));
                    }
                }
                _ => {
                    return Err(Error::Syntax {
                        line,
                        column,
                        expected: "token".into(),
                    })
                }
            }
        }
        out.push(Spanned {
            tok: Tok::Newline,
            line,
            column: chars.len() + 1,
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

#[derive(Default)]
struct RawCase {
    base_mva: Option<f64>,
    bus: Option<Vec<Vec<f64>>>,
    gen: Option<Vec<Vec<f64>>>,
    branch: Option<Vec<Vec<f64>>>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error_here(&self, expected: &str) -> Error {
        let (line, column) = match self.peek() {
            Some(s) => (s.line, s.column),
            None => self.toks.last().map_or((1, 1), |s| (s.line, s.column + 1)),
        };
        Error::Syntax {
            line,
            column,
            expected: expected.to_string(),
        }
    }

    fn parse(mut self) -> Result<RawCase> {
        let mut raw = RawCase::default();
        while let Some(s) = self.peek() {
            match &s.tok {
                Tok::Newline | Tok::Semi | Tok::Comma => {
                    self.pos += 1;
                }
                Tok::Ident(name) if name == "function" => {
                    while let Some(t) = self.next() {
                        if t.tok == Tok::Newline {
                            break;
                        }
                    }
                }
                Tok::Ident(name) if name == "end" => {
                    self.pos += 1;
                }
                Tok::Ident(name) => {
                    let field = name.rsplit('.').next().unwrap_or(name).to_string();
                    self.pos += 1;
                    match self.next() {
                        Some(Spanned { tok: Tok::Eq, .. }) => {}
                        _ => {
                            self.pos -= 1;
                            return Err(self.error_here("`=`"));
                        }
                    }
                    self.assignment(&field, &mut raw)?;
                }
                _ => return Err(self.error_here("assignment")),
            }
        }
        Ok(raw)
    }

    fn assignment(&mut self, field: &str, raw: &mut RawCase) -> Result<()> {
        match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                if field == "baseMVA" {
                    raw.base_mva = Some(v);
                }
            }
            Some(Tok::Str) => self.pos += 1,
            Some(Tok::LBracket) => {
                self.pos += 1;
                let m = self.matrix()?;
                match field {
                    "bus" => raw.bus = Some(m),
                    "gen" => raw.gen = Some(m),
                    "branch" => raw.branch = Some(m),
                    _ => {}
                }
            }
            Some(Tok::LBrace) => self.skip_braces()?,
            _ => return Err(self.error_here("number, string, `[` or `{`")),
        }
        match self.peek().map(|s| &s.tok) {
            None | Some(Tok::Semi) | Some(Tok::Newline) => Ok(()),
            _ => Err(self.error_here("`;` or end of line")),
        }
    }

    fn matrix(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        let mut row = Vec::new();
        loop {
            let Some(s) = self.next() else {
                return Err(self.error_here("`]`"));
            };
            match s.tok {
                Tok::Num(v) => row.push(v),
                Tok::Comma => {}
                Tok::Semi | Tok::Newline => {
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                }
                Tok::RBracket => {
                    if !row.is_empty() {
                        rows.push(row);
                    }
                    return Ok(rows);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error_here("number or `]`"));
                }
            }
        }
    }

    fn skip_braces(&mut self) -> Result<()> {
        let mut depth = 0usize;
        loop {
            let Some(s) = self.next() else {
                return Err(self.error_here("`}`"));
            };
            match s.tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
    }
}

fn need_cols(what: &str, row: usize, r: &[f64], n: usize) -> Result<()> {
    if r.len() < n {
        Err(semantic(format!(
            "{what} row {} has {} columns, need at least {n}",
            row + 1,
            r.len()
        )))
    } else {
        Ok(())
    }
}

fn as_id(what: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(semantic(format!(
            "{what} must be a positive integer, got {v}"
        )))
    }
}

fn as_status(v: f64) -> bool {
    v > 0.0
}

/// Parses a case file, converting to per-unit on the case's `baseMVA`.
pub fn parse_case(text: &str) -> Result<CaseData> {
    let raw = Parser {
        toks: lex(text)?,
        pos: 0,
    }
    .parse()?;

    let base_mva = raw.base_mva.ok_or_else(|| semantic("missing baseMVA"))?;
    if !(base_mva > 0.0) || !base_mva.is_finite() {
        return Err(semantic(format!(
            "baseMVA must be positive, got {base_mva}"
        )));
    }
    let bus_rows = raw.bus.ok_or_else(|| semantic("missing bus matrix"))?;
    let branch_rows = raw.branch.unwrap_or_default();
    let gen_rows = raw.gen.unwrap_or_default();

    let deg = std::f64::consts::PI / 180.0;

    let buses = bus_rows
        .iter()
        .enumerate()
        .map(|(n, r)| {
            need_cols("bus", n, r, 9)?;
            let kind = BusKind::from_code(r[1]).ok_or_else(|| {
                semantic(format!("bus {} has unsupported type code {}", r[0], r[1]))
            })?;
            Ok(BusRecord {
                id: as_id("bus id", r[0])?,
                kind,
                pd: r[2] / base_mva,
                qd: r[3] / base_mva,
                gs: r[4] / base_mva,
                bs: r[5] / base_mva,
                vm: r[7],
                va: r[8] * deg,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gens = gen_rows
        .iter()
        .enumerate()
        .map(|(n, r)| {
            need_cols("gen", n, r, 8)?;
            Ok(GenRecord {
                bus: as_id("generator bus", r[0])?,
                pg: r[1] / base_mva,
                qg: r[2] / base_mva,
                vg: r[5],
                in_service: as_status(r[7]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let branches = branch_rows
        .iter()
        .enumerate()
        .map(|(n, r)| {
            need_cols("branch", n, r, 11)?;
            Ok(BranchRecord {
                from: as_id("branch from bus", r[0])?,
                to: as_id("branch to bus", r[1])?,
                r: r[2],
                x: r[3],
                b: r[4],
                ratio: r[8],
                shift: r[9] * deg,
                in_service: as_status(r[10]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let case = CaseData {
        base_mva,
        buses,
        branches,
        gens,
    };
    case.validate()?;
    Ok(case)
}

/// Serializes a case back to the text format accepted by [`parse_case`].
pub fn write_case(case: &CaseData) -> String {
    let base = case.base_mva;
    let deg = 180.0 / std::f64::consts::PI;
    let mut s = String::new();
    s.push_str("function mpc = case\n");
    s.push_str("mpc.version = '2';\n");
    let _ = writeln!(s, "mpc.baseMVA = {};", base);

    s.push_str("\n%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\nmpc.bus = [\n");
    for b in &case.buses {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t0\t1\t1.1\t0.9;",
            b.id,
            b.kind.code(),
            b.pd * base,
            b.qd * base,
            b.gs * base,
            b.bs * base,
            b.vm,
            b.va * deg
        );
    }
    s.push_str("];\n");

    s.push_str("\n%% bus Pg Qg Qmax Qmin Vg mBase status\nmpc.gen = [\n");
    for g in &case.gens {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t0\t0\t{}\t{}\t{};",
            g.bus,
            g.pg * base,
            g.qg * base,
            g.vg,
            base,
            u8::from(g.in_service)
        );
    }
    s.push_str("];\n");

    s.push_str("\n%% fbus tbus r x b rateA rateB rateC ratio angle status\nmpc.branch = [\n");
    for br in &case.branches {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{};",
            br.from,
            br.to,
            br.r,
            br.x,
            br.b,
            br.ratio,
            br.shift * deg,
            u8::from(br.in_service)
        );
    }
    s.push_str("];\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
function mpc = case2
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1.0 0 230 1 1.1 0.9;
    2 1 50 20 0 0 1 1.0 0 230 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 300 -300 1.0 100 1 250 10;
];
mpc.branch = [
    1 2 0.01 0.1 0.02 250 250 250 0 0 1 -360 360;
];
";

    #[test]
    fn minimal_two_bus() {
        let c = parse_case(TWO_BUS).unwrap();
        assert_eq!(c.n_buses(), 2);
        assert_eq!(c.buses.iter().filter(|b| b.kind == BusKind::PQ).count(), 1);
        assert_eq!(c.buses[1].pd, 0.5);
        assert_eq!(c.buses[1].qd, 0.2);
        assert_eq!(c.branches.len(), 1);
        assert_eq!(c.branches[0].tap(), 1.0);
        assert!(c.gens[0].in_service);
    }

    #[test]
    fn comments_commas_and_extra_sections() {
        let text = "\
% a comment
mpc.version = '2';
mpc.baseMVA = 10;   % trailing
mpc.bus = [1, 3, 0, 0, 0, 0, 1, 1.05, -2.5; 2, 2, 1, 0, 0, 0, 1, 1, 0];
mpc.gen = [1 0 0 0 0 1.05 10 1; 2 5 0 0 0 1.02 10 1];
mpc.branch = [1 2 0 0.2 0 0 0 0 0.98 3 1];
mpc.gencost = [2 0 0 3 0.1 1 0];
mpc.bus_name = { 'a'; 'b' };
";
        let c = parse_case(text).unwrap();
        assert_eq!(c.base_mva, 10.0);
        assert!((c.buses[0].va + 2.5f64.to_radians()).abs() < 1e-15);
        assert_eq!(c.buses[1].kind, BusKind::PV);
        assert_eq!(c.branches[0].ratio, 0.98);
        assert!((c.branches[0].shift - 3f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn bad_kind_code_is_semantic() {
        let text = TWO_BUS.replace("2 1 50 20", "2 4 50 20");
        assert!(matches!(parse_case(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn two_ref_buses_rejected() {
        let text = TWO_BUS.replace("2 1 50 20", "2 3 50 20");
        assert!(matches!(parse_case(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn branch_to_unknown_bus_rejected() {
        let text = TWO_BUS.replace("1 2 0.01", "1 7 0.01");
        assert!(matches!(parse_case(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn nonpositive_base_rejected() {
        let text = TWO_BUS.replace("baseMVA = 100", "baseMVA = 0");
        assert!(matches!(parse_case(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_case("mpc.baseMVA 100;\n").unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                line: 1,
                column: 13,
                expected: "`=`".into()
            }
        );

        let err = parse_case("mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { expected, .. } if expected == "`]`"));

        let err = parse_case("mpc.baseMVA = 100;\nmpc.bus = [1 3 $];\n").unwrap_err();
        assert!(matches!(
            err,
            Error::Syntax {
                line: 2,
                column: 16,
                ..
            }
        ));
    }

    #[test]
    fn short_rows_rejected() {
        let text = TWO_BUS.replace(
            "1 2 0.01 0.1 0.02 250 250 250 0 0 1 -360 360",
            "1 2 0.01 0.1",
        );
        assert!(matches!(parse_case(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn deterministic() {
        assert_eq!(parse_case(TWO_BUS).unwrap(), parse_case(TWO_BUS).unwrap());
    }
}
