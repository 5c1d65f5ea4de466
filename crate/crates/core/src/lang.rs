//! The textual specification language for trace structures.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! alt    := seq ('|' seq)*            choice
//! seq    := weave (';' weave)*        sequence
//! weave  := unit ('||' unit)*         parallel composition
//! unit   := 'pref' unit               prefix-closure
//!         | '*[' alt ']'              repetition (zero or more rounds)
//!         | '(' alt ')'
//!         | name '?'                  input symbol
//!         | name '!'                  output symbol
//! ```
//!
//! `#` starts a comment running to the end of the line. Names match
//! `[A-Za-z][A-Za-z0-9_]*`; `pref` is reserved.
//!
//! So `a?;b!||c!` sequences `a?` before the parallel pair, and
//! `a?||b?;c!` makes `c!` wait for both inputs.

use std::fmt;

use crate::error::TraceError;
use crate::trace::{Symbol, TraceStructure};

/// Abstract syntax of a specification expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecExpr {
    Input(Symbol),
    Output(Symbol),
    Seq(Box<SpecExpr>, Box<SpecExpr>),
    Alt(Box<SpecExpr>, Box<SpecExpr>),
    Weave(Box<SpecExpr>, Box<SpecExpr>),
    Pref(Box<SpecExpr>),
    Repeat(Box<SpecExpr>),
}

/// Parses and elaborates in one step.
pub fn parse_structure(src: &str) -> Result<TraceStructure, TraceError> {
    elaborate(&parse(src)?)
}

/// Parses a specification expression.
pub fn parse(src: &str) -> Result<SpecExpr, TraceError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.alt()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(p.err_at(format!("unexpected {}", describe(&t.kind)))),
    }
}

/// Builds the trace structure an expression denotes.
///
/// Within a sequence or a choice every symbol must keep one direction; a
/// producer meets its consumer only across `||`, where the symbol becomes
/// an output of the whole.
pub fn elaborate(e: &SpecExpr) -> Result<TraceStructure, TraceError> {
    match e {
        SpecExpr::Input(s) => Ok(TraceStructure::input(s.clone())),
        SpecExpr::Output(s) => Ok(TraceStructure::output(s.clone())),
        SpecExpr::Seq(l, r) => {
            let (l, r) = (elaborate(l)?, elaborate(r)?);
            check_directions(&l, &r)?;
            Ok(l.concat(&r))
        }
        SpecExpr::Alt(l, r) => {
            let (l, r) = (elaborate(l)?, elaborate(r)?);
            check_directions(&l, &r)?;
            Ok(l.union(&r))
        }
        SpecExpr::Weave(l, r) => Ok(elaborate(l)?.weave(&elaborate(r)?)),
        SpecExpr::Pref(x) => Ok(elaborate(x)?.pref()),
        SpecExpr::Repeat(x) => Ok(elaborate(x)?.repeat()),
    }
}

fn check_directions(l: &TraceStructure, r: &TraceStructure) -> Result<(), TraceError> {
    if let Some(s) = l.inputs().intersection(r.outputs()).next() {
        return Err(TraceError::DirectionConflict(s.as_str().to_string()));
    }
    if let Some(s) = l.outputs().intersection(r.inputs()).next() {
        return Err(TraceError::DirectionConflict(s.as_str().to_string()));
    }
    Ok(())
}

impl fmt::Display for SpecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, f)
    }
}

fn prec(e: &SpecExpr) -> u8 {
    match e {
        SpecExpr::Alt(..) => 1,
        SpecExpr::Seq(..) => 2,
        SpecExpr::Weave(..) => 3,
        SpecExpr::Pref(..) => 4,
        SpecExpr::Input(_) | SpecExpr::Output(_) | SpecExpr::Repeat(_) => 5,
    }
}

fn write_prec(e: &SpecExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < min {
        write!(f, "(")?;
        write_prec(e, 0, f)?;
        return write!(f, ")");
    }
    match e {
        SpecExpr::Input(s) => write!(f, "{s}?"),
        SpecExpr::Output(s) => write!(f, "{s}!"),
        SpecExpr::Alt(l, r) => {
            write_prec(l, p, f)?;
            write!(f, " | ")?;
            write_prec(r, p + 1, f)
        }
        SpecExpr::Seq(l, r) => {
            write_prec(l, p, f)?;
            write!(f, ";")?;
            write_prec(r, p + 1, f)
        }
        SpecExpr::Weave(l, r) => {
            write_prec(l, p, f)?;
            write!(f, " || ")?;
            write_prec(r, p + 1, f)
        }
        SpecExpr::Pref(x) => {
            write!(f, "pref ")?;
            write_prec(x, p, f)
        }
        SpecExpr::Repeat(x) => {
            write!(f, "*[")?;
            write_prec(x, 0, f)?;
            write!(f, "]")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Name(String),
    Query,
    Bang,
    Semi,
    Bar,
    BarBar,
    Star,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Pref,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    line: usize,
    col: usize,
}

fn describe(k: &TokKind) -> String {
    match k {
        TokKind::Name(n) => format!("name {n:?}"),
        TokKind::Query => "'?'".into(),
        TokKind::Bang => "'!'".into(),
        TokKind::Semi => "';'".into(),
        TokKind::Bar => "'|'".into(),
        TokKind::BarBar => "'||'".into(),
        TokKind::Star => "'*'".into(),
        TokKind::LBracket => "'['".into(),
        TokKind::RBracket => "']'".into(),
        TokKind::LParen => "'('".into(),
        TokKind::RParen => "')'".into(),
        TokKind::Pref => "'pref'".into(),
    }
}

fn lex(src: &str) -> Result<Vec<Tok>, TraceError> {
    let mut toks = Vec::new();
    let mut chars = src.char_indices().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    while let Some((_, c)) = chars.next() {
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            continue;
        }
        col += 1;
        match c {
            ' ' | '\t' | '\r' => {}
            '#' => {
                for (_, d) in chars.by_ref() {
                    if d == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
            }
            '?' => toks.push(Tok { kind: TokKind::Query, line: tl, col: tc }),
            '!' => toks.push(Tok { kind: TokKind::Bang, line: tl, col: tc }),
            ';' => toks.push(Tok { kind: TokKind::Semi, line: tl, col: tc }),
            '*' => toks.push(Tok { kind: TokKind::Star, line: tl, col: tc }),
            '[' => toks.push(Tok { kind: TokKind::LBracket, line: tl, col: tc }),
            ']' => toks.push(Tok { kind: TokKind::RBracket, line: tl, col: tc }),
            '(' => toks.push(Tok { kind: TokKind::LParen, line: tl, col: tc }),
            ')' => toks.push(Tok { kind: TokKind::RParen, line: tl, col: tc }),
            '|' => {
                if chars.peek().is_some_and(|&(_, d)| d == '|') {
                    chars.next();
                    col += 1;
                    toks.push(Tok { kind: TokKind::BarBar, line: tl, col: tc });
                } else {
                    toks.push(Tok { kind: TokKind::Bar, line: tl, col: tc });
                }
            }
            c if c.is_ascii_alphabetic() => {
                let mut name = String::new();
                name.push(c);
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let kind = if name == "pref" { TokKind::Pref } else { TokKind::Name(name) };
                toks.push(Tok { kind, line: tl, col: tc });
            }
            other => {
                return Err(TraceError::Parse {
                    message: format!("unexpected character {other:?}"),
                    line: tl,
                    col: tc,
                })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next_is(&mut self, k: &TokKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, k: TokKind) -> Result<(), TraceError> {
        if self.next_is(&k) {
            Ok(())
        } else {
            Err(self.err_at(format!(
                "expected {}, found {}",
                describe(&k),
                self.found()
            )))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => describe(&t.kind),
            None => "end of input".into(),
        }
    }

    fn err_at(&self, message: String) -> TraceError {
        let (line, col) = match self.peek() {
            Some(t) => (t.line, t.col),
            None => match self.toks.last() {
                Some(t) => (t.line, t.col + 1),
                None => (1, 1),
            },
        };
        TraceError::Parse { message, line, col }
    }

    fn alt(&mut self) -> Result<SpecExpr, TraceError> {
        let mut e = self.seq()?;
        while self.next_is(&TokKind::Bar) {
            e = SpecExpr::Alt(Box::new(e), Box::new(self.seq()?));
        }
        Ok(e)
    }

    fn seq(&mut self) -> Result<SpecExpr, TraceError> {
        let mut e = self.weave()?;
        while self.next_is(&TokKind::Semi) {
            e = SpecExpr::Seq(Box::new(e), Box::new(self.weave()?));
        }
        Ok(e)
    }

    fn weave(&mut self) -> Result<SpecExpr, TraceError> {
        let mut e = self.unit()?;
        while self.next_is(&TokKind::BarBar) {
            e = SpecExpr::Weave(Box::new(e), Box::new(self.unit()?));
        }
        Ok(e)
    }

    fn unit(&mut self) -> Result<SpecExpr, TraceError> {
        let Some(t) = self.peek().cloned() else {
            return Err(self.err_at("expected an expression, found end of input".into()));
        };
        match t.kind {
            TokKind::Pref => {
                self.pos += 1;
                Ok(SpecExpr::Pref(Box::new(self.unit()?)))
            }
            TokKind::Star => {
                self.pos += 1;
                self.expect(TokKind::LBracket)?;
                let e = self.alt()?;
                self.expect(TokKind::RBracket)?;
                Ok(SpecExpr::Repeat(Box::new(e)))
            }
            TokKind::LParen => {
                self.pos += 1;
                let e = self.alt()?;
                self.expect(TokKind::RParen)?;
                Ok(e)
            }
            TokKind::Name(n) => {
                self.pos += 1;
                let sym = Symbol::new(&n)?;
                if self.next_is(&TokKind::Query) {
                    Ok(SpecExpr::Input(sym))
                } else if self.next_is(&TokKind::Bang) {
                    Ok(SpecExpr::Output(sym))
                } else {
                    Err(self.err_at(format!(
                        "symbol {n:?} needs a direction mark: {n}? for input, {n}! for output"
                    )))
                }
            }
            _ => Err(self.err_at(format!("expected an expression, found {}", self.found()))),
        }
    }
}
