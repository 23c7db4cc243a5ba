//! Reader and writer for `.dfzn`, a small FlatZinc subset.
//!
//! ```text
//! var 0..3: x;
//! var {1, 4, 9}: y;
//! constraint int_lin_le([1, 1], [x, y], 5);
//! constraint all_different([x, y]);
//! solve maximize y;
//! ```
//!
//! Variables are numbered in declaration order, which also fixes the
//! branching order of the search. A constraint may mention a variable that is
//! declared later in the file.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{validate_model, Constraint, Diagnostic, LinearKind, Model, Objective, VarDecl, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSource {
    pub text: String,
    pub origin: String,
}

impl ModelSource {
    pub fn memory(text: impl Into<String>) -> Self {
        ModelSource {
            text: text.into(),
            origin: "<memory>".to_string(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        Ok(ModelSource {
            text: std::fs::read_to_string(path)?,
            origin: path.display().to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Syntax,
    Semantic,
}

impl ErrorKind {
    fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Lexical => "lexical",
            ErrorKind::Syntax => "syntax",
            ErrorKind::Semantic => "semantic",
        }
    }
}

/// Error with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub origin: String,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {} error: {}",
            self.origin,
            self.line,
            self.col,
            self.kind.as_str(),
            self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Loc {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    DotDot,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(i) => write!(f, "'{i}'"),
            Tok::DotDot => f.write_str("'..'"),
            Tok::Colon => f.write_str("':'"),
            Tok::Semi => f.write_str("';'"),
            Tok::Comma => f.write_str("','"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Loc)>, (Loc, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, col };
        let single = match c {
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, loc));
            i += 1;
            col += 1;
            continue;
        }
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '.' {
            if chars.get(i + 1) != Some(&'.') {
                return Err((loc, "expected '..'".to_string()));
            }
            out.push((Tok::DotDot, loc));
            i += 2;
            col += 2;
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            let value = lit
                .parse::<i64>()
                .map_err(|_| (loc, format!("integer literal {lit} out of range")))?;
            out.push((Tok::Int(value), loc));
            col += i - start;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), loc));
            col += i - start;
        } else {
            return Err((loc, format!("unexpected character '{c}'")));
        }
    }
    out.push((Tok::Eof, Loc { line, col }));
    Ok(out)
}

enum RawCall {
    Linear {
        kind: LinearKind,
        coeffs: Vec<i64>,
        vars: Vec<(String, Loc)>,
        rhs: i64,
    },
    AllDifferent(Vec<(String, Loc)>),
}

struct Parser<'a> {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    origin: &'a str,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn err(&self, kind: ErrorKind, loc: Loc, message: impl Into<String>) -> ParseError {
        ParseError {
            kind,
            origin: self.origin.to_string(),
            line: loc.line,
            col: loc.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> &(Tok, Loc) {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> (Tok, Loc) {
        let t = self.toks[self.pos].clone();
        if t.0 != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> PResult<Loc> {
        let (t, loc) = self.next();
        if t == want {
            Ok(loc)
        } else {
            Err(self.err(ErrorKind::Syntax, loc, format!("expected {want}, found {t}")))
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match self.next() {
            (Tok::Int(v), _) => Ok(v),
            (t, loc) => Err(self.err(ErrorKind::Syntax, loc, format!("expected integer, found {t}"))),
        }
    }

    fn ident(&mut self) -> PResult<(String, Loc)> {
        match self.next() {
            (Tok::Ident(s), loc) => Ok((s, loc)),
            (t, loc) => Err(self.err(ErrorKind::Syntax, loc, format!("expected identifier, found {t}"))),
        }
    }

    /// `open elem ("," elem)* close`
    fn list<T>(&mut self, open: Tok, close: Tok, mut elem: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        self.expect(open)?;
        let mut out = vec![elem(self)?];
        loop {
            match self.next() {
                (Tok::Comma, _) => out.push(elem(self)?),
                (t, _) if t == close => return Ok(out),
                (t, loc) => {
                    return Err(self.err(ErrorKind::Syntax, loc, format!("expected ',' or {close}, found {t}")));
                }
            }
        }
    }

    fn domain(&mut self) -> PResult<Vec<i64>> {
        if self.peek().0 == Tok::LBrace {
            let values = self.list(Tok::LBrace, Tok::RBrace, |p| p.int())?;
            Ok(VarDecl::set("", values).domain)
        } else {
            let lo = self.int()?;
            self.expect(Tok::DotDot)?;
            let hi = self.int()?;
            Ok(VarDecl::interval("", lo, hi).domain)
        }
    }

    fn call(&mut self) -> PResult<RawCall> {
        let (name, loc) = self.ident()?;
        let kind = match name.as_str() {
            "int_lin_eq" => Some(LinearKind::Eq),
            "int_lin_le" => Some(LinearKind::Le),
            "int_lin_ne" => Some(LinearKind::Ne),
            "all_different" => None,
            _ => return Err(self.err(ErrorKind::Syntax, loc, format!("unknown constraint '{name}'"))),
        };
        self.expect(Tok::LParen)?;
        let call = match kind {
            Some(kind) => {
                let coeffs = self.list(Tok::LBracket, Tok::RBracket, |p| p.int())?;
                self.expect(Tok::Comma)?;
                let vars = self.list(Tok::LBracket, Tok::RBracket, |p| p.ident())?;
                self.expect(Tok::Comma)?;
                let rhs = self.int()?;
                RawCall::Linear {
                    kind,
                    coeffs,
                    vars,
                    rhs,
                }
            }
            None => RawCall::AllDifferent(self.list(Tok::LBracket, Tok::RBracket, |p| p.ident())?),
        };
        self.expect(Tok::RParen)?;
        Ok(call)
    }

    fn model(&mut self) -> PResult<Model> {
        let mut decls: Vec<(VarDecl, Loc)> = Vec::new();
        let mut calls: Vec<(RawCall, Loc)> = Vec::new();
        let objective: Option<(String, Loc, bool)>;
        loop {
            let (tok, loc) = self.next();
            let word = match &tok {
                Tok::Ident(w) => w.as_str(),
                _ => "",
            };
            match word {
                "var" => {
                    let domain = self.domain()?;
                    self.expect(Tok::Colon)?;
                    let (name, name_loc) = self.ident()?;
                    self.expect(Tok::Semi)?;
                    decls.push((VarDecl { name, domain }, name_loc));
                }
                "constraint" => {
                    let at = self.peek().1;
                    let call = self.call()?;
                    self.expect(Tok::Semi)?;
                    calls.push((call, at));
                }
                "solve" => {
                    let (goal, goal_loc) = self.ident()?;
                    objective = match goal.as_str() {
                        "satisfy" => None,
                        "minimize" | "maximize" => {
                            let (v, vloc) = self.ident()?;
                            Some((v, vloc, goal == "maximize"))
                        }
                        _ => {
                            return Err(self.err(
                                ErrorKind::Syntax,
                                goal_loc,
                                format!("expected 'satisfy', 'minimize' or 'maximize', found '{goal}'"),
                            ))
                        }
                    };
                    self.expect(Tok::Semi)?;
                    break;
                }
                _ => {
                    let msg = if tok == Tok::Eof {
                        "missing solve item".to_string()
                    } else {
                        format!("expected 'var', 'constraint' or 'solve', found {tok}")
                    };
                    return Err(self.err(ErrorKind::Syntax, loc, msg));
                }
            }
        }
        let (tok, loc) = self.next();
        if tok != Tok::Eof {
            return Err(self.err(ErrorKind::Syntax, loc, format!("unexpected {tok} after solve item")));
        }
        self.resolve(decls, calls, objective)
    }

    fn resolve(
        &self,
        decls: Vec<(VarDecl, Loc)>,
        calls: Vec<(RawCall, Loc)>,
        objective: Option<(String, Loc, bool)>,
    ) -> PResult<Model> {
        let mut index: HashMap<&str, VarId> = HashMap::new();
        for (i, (d, _)) in decls.iter().enumerate() {
            index.entry(d.name.as_str()).or_insert(VarId(i));
        }
        let lookup = |(name, loc): &(String, Loc)| {
            index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| self.err(ErrorKind::Semantic, *loc, format!("unknown variable {name}")))
        };
        let mut constraints = Vec::with_capacity(calls.len());
        for (call, _) in &calls {
            constraints.push(match call {
                RawCall::Linear {
                    kind,
                    coeffs,
                    vars,
                    rhs,
                } => Constraint::Linear {
                    kind: *kind,
                    coeffs: coeffs.clone(),
                    vars: vars.iter().map(lookup).collect::<PResult<_>>()?,
                    rhs: *rhs,
                },
                RawCall::AllDifferent(vars) => Constraint::AllDifferent {
                    vars: vars.iter().map(lookup).collect::<PResult<_>>()?,
                },
            });
        }
        let objective_at = objective_loc(&objective);
        let objective = match &objective {
            None => Objective::Satisfy,
            Some((name, loc, max)) => {
                let v = lookup(&(name.clone(), *loc))?;
                if *max {
                    Objective::Maximize(v)
                } else {
                    Objective::Minimize(v)
                }
            }
        };
        let decl_locs: Vec<Loc> = decls.iter().map(|(_, l)| *l).collect();
        let model = Model::new(decls.into_iter().map(|(d, _)| d).collect(), constraints, objective);

        let located = |d: &Diagnostic| -> Loc {
            let by_name = |name: &str, last: bool| {
                let mut it = model.vars.iter().zip(&decl_locs).filter(|(v, _)| v.name == name);
                let hit = if last { it.last() } else { it.next() };
                hit.map(|(_, l)| *l).unwrap_or(Loc { line: 1, col: 1 })
            };
            match d {
                Diagnostic::EmptyDomain { var } | Diagnostic::UnsortedDomain { var } => by_name(var, false),
                Diagnostic::DuplicateName { var } => by_name(var, true),
                Diagnostic::UnknownVariable { constraint, .. }
                | Diagnostic::ArityMismatch { constraint, .. }
                | Diagnostic::EmptyScope { constraint } => calls[*constraint].1,
                Diagnostic::UnknownObjectiveVariable { .. } => objective_at,
            }
        };
        let mut diags: Vec<(Loc, String)> = validate_model(&model)
            .iter()
            .map(|d| (located(d), d.to_string()))
            .collect();
        diags.sort_by_key(|(l, _)| (l.line, l.col));
        match diags.into_iter().next() {
            Some((loc, msg)) => Err(self.err(ErrorKind::Semantic, loc, msg)),
            None => Ok(model),
        }
    }
}

fn objective_loc(o: &Option<(String, Loc, bool)>) -> Loc {
    o.as_ref().map(|(_, l, _)| *l).unwrap_or(Loc { line: 1, col: 1 })
}

/// Parses and validates a model. Semantic errors point at the offending
/// declaration, constraint or identifier.
pub fn parse(src: &ModelSource) -> Result<Model, ParseError> {
    let toks = lex(&src.text).map_err(|(loc, message)| ParseError {
        kind: ErrorKind::Lexical,
        origin: src.origin.clone(),
        line: loc.line,
        col: loc.col,
        message,
    })?;
    Parser {
        toks,
        pos: 0,
        origin: &src.origin,
    }
    .model()
}

pub fn parse_str(text: &str) -> Result<Model, ParseError> {
    parse(&ModelSource::memory(text))
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical text form. Contiguous domains print as intervals.
pub fn serialize(m: &Model) -> String {
    let mut out = String::new();
    for v in &m.vars {
        let d = &v.domain;
        let contiguous = !d.is_empty() && d.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous {
            let _ = writeln!(out, "var {}..{}: {};", d[0], d[d.len() - 1], v.name);
        } else {
            let _ = writeln!(out, "var {{{}}}: {};", join(d), v.name);
        }
    }
    let names = |vs: &[VarId]| join(vs.iter().map(|v| m.name_of(*v)));
    for c in &m.constraints {
        match c {
            Constraint::Linear {
                kind,
                coeffs,
                vars,
                rhs,
            } => {
                let _ = writeln!(
                    out,
                    "constraint {}([{}], [{}], {});",
                    kind.builtin_name(),
                    join(coeffs),
                    names(vars),
                    rhs
                );
            }
            Constraint::AllDifferent { vars } => {
                let _ = writeln!(out, "constraint all_different([{}]);", names(vars));
            }
        }
    }
    match m.objective {
        Objective::Satisfy => out.push_str("solve satisfy;\n"),
        Objective::Minimize(v) => {
            let _ = writeln!(out, "solve minimize {};", m.name_of(v));
        }
        Objective::Maximize(v) => {
            let _ = writeln!(out, "solve maximize {};", m.name_of(v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_var_satisfy() {
        let m = parse_str("var 0..3: x; var 0..3: y; constraint int_lin_eq([1,1],[x,y],3); solve satisfy;").unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.constraints, vec![Constraint::lin_eq(vec![1, 1], vec![VarId(0), VarId(1)], 3)]);
        assert_eq!(m.objective, Objective::Satisfy);
        assert_eq!(parse_str(&serialize(&m)).unwrap(), m);
    }

    #[test]
    fn empty_domain_is_semantic() {
        let e = parse_str("var 1..0: x; solve satisfy;").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Semantic);
        assert!(e.message.contains("empty domain"), "{e}");
        assert_eq!((e.line, e.col), (1, 11));
    }

    #[test]
    fn all_different_over_three() {
        let m = parse_str("var 0..2: x; var 0..2: y; var 0..2: z;\nconstraint all_different([x,y,z]);\nsolve satisfy;")
            .unwrap();
        assert_eq!(m.constraints, vec![Constraint::all_different(vec![VarId(0), VarId(1), VarId(2)])]);
    }

    #[test]
    fn serialize_forms() {
        let m = Model::new(
            vec![VarDecl::interval("x", 0, 3), VarDecl::set("y", [4, 1, 9])],
            vec![],
            Objective::Minimize(VarId(0)),
        );
        let text = serialize(&m);
        assert_eq!(text, "var 0..3: x;\nvar {1, 4, 9}: y;\nsolve minimize x;\n");
        assert!(text.ends_with("solve minimize x;\n"));
        assert_eq!(parse_str(&text).unwrap(), m);

        let sat = Model::new(vec![VarDecl::interval("a", -2, 2)], vec![], Objective::Satisfy);
        assert_eq!(serialize(&sat), "var -2..2: a;\nsolve satisfy;\n");
    }

    #[test]
    fn errors_are_located() {
        let e = parse_str("var 0..3: x;\nconstraint int_lin_le([1], [z], 2);\nsolve satisfy;").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (ErrorKind::Semantic, 2, 29));
        assert_eq!(e.message, "unknown variable z");

        let e = parse_str("var 0..3: x; # solve satisfy;").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (ErrorKind::Lexical, 1, 14));

        let e = parse_str("var 0..3 x; solve satisfy;").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (ErrorKind::Syntax, 1, 10));
        assert_eq!(e.to_string(), "<memory>:1:10: syntax error: expected ':', found 'x'");
    }

    #[test]
    fn comments_and_negatives() {
        let m = parse_str("% header\nvar -3..-1: x; % trailing\nsolve maximize x;").unwrap();
        assert_eq!(m.vars[0].domain, vec![-3, -2, -1]);
        assert_eq!(m.objective, Objective::Maximize(VarId(0)));
    }

    #[test]
    fn forward_references_resolve() {
        let m = parse_str("constraint int_lin_ne([1], [x], 0);\nvar 0..1: x;\nsolve satisfy;").unwrap();
        assert_eq!(m.constraints[0].vars(), &[VarId(0)]);
    }
}
