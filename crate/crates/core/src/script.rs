//! The robot-code language: primitive calls on `robot`, bindings of their
//! results, and counted `for ... in range(N):` loops.
//!
//! ```text
//! # go back and forth
//! pos1 = robot.get_pos('sofa')
//! for i in range(2):
//!     robot.move_to(pos1)
//!     robot.turn(180)
//! ```

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::nav::{AgentState, ArgKind, Body, NavError, Navigator, Primitive, PrimitiveKind, PrimitiveValue};

const INDENT: &str = "    ";
const UNSUPPORTED: &[&str] = &[
    "if", "elif", "else", "while", "def", "return", "import", "from", "class", "with", "try", "except", "lambda", "break",
    "continue", "pass",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownPrimitive(String),
    UnboundIdentifier(String),
    MalformedLiteral(String),
    BadIndentation(String),
    NonLiteralRange(String),
    Unsupported(String),
    Arity { primitive: String, expected: usize, found: usize },
    ArgumentType { primitive: String, index: usize, expected: String },
    NoReturnValue(String),
    Syntax(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownPrimitive(n) => write!(f, "unknown primitive {n:?}"),
            Self::UnboundIdentifier(n) => write!(f, "identifier {n:?} is used before it is assigned"),
            Self::MalformedLiteral(t) => write!(f, "malformed literal {t}"),
            Self::BadIndentation(m) => write!(f, "bad indentation: {m}"),
            Self::NonLiteralRange(t) => write!(f, "range bound must be a non-negative integer literal, found {t}"),
            Self::Unsupported(k) => write!(f, "`{k}` is not supported; scripts may only use calls, assignments and for-range loops"),
            Self::Arity { primitive, expected, found } => {
                write!(f, "{primitive} takes {expected} argument(s), got {found}")
            }
            Self::ArgumentType { primitive, index, expected } => {
                write!(f, "{primitive}: argument {} must be {expected}", index + 1)
            }
            Self::NoReturnValue(p) => write!(f, "{p} returns nothing to assign"),
            Self::Syntax(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Source line of a statement. Positions do not take part in equality, so
/// re-parsing a pretty-printed script compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Str(String),
    Num(f64),
    Var(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub kind: PrimitiveKind,
    pub args: Vec<Arg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Call(Call),
    Assign { var: String, call: Call },
    For { var: String, count: u64, body: Vec<Stmt>, span: Span },
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NavScript {
    pub statements: Vec<Stmt>,
}

impl NavScript {
    /// Number of primitive calls once loops are unrolled.
    pub fn call_count(&self) -> u64 {
        fn count(stmts: &[Stmt]) -> u64 {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::Call(_) | Stmt::Assign { .. } => 1,
                    Stmt::For { count: n, body, .. } => n.saturating_mul(count(body)),
                    Stmt::Comment(_) => 0,
                })
                .fold(0u64, u64::saturating_add)
        }
        count(&self.statements)
    }
}

fn fmt_num(n: f64) -> String {
    format!("{n}")
}

fn fmt_str(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| match a {
                Arg::Str(s) => fmt_str(s),
                Arg::Num(n) => fmt_num(*n),
                Arg::Var(v) => v.clone(),
            })
            .collect();
        write!(f, "robot.{}({})", self.kind.name(), args.join(", "))
    }
}

fn write_block(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], depth: usize) -> fmt::Result {
    let pad = INDENT.repeat(depth);
    for s in stmts {
        match s {
            Stmt::Call(c) => writeln!(f, "{pad}{c}")?,
            Stmt::Assign { var, call } => writeln!(f, "{pad}{var} = {call}")?,
            Stmt::For { var, count, body, .. } => {
                writeln!(f, "{pad}for {var} in range({count}):")?;
                write_block(f, body, depth + 1)?;
            }
            Stmt::Comment(c) if c.is_empty() => writeln!(f, "{pad}#")?,
            Stmt::Comment(c) => writeln!(f, "{pad}# {c}")?,
        }
    }
    Ok(())
}

impl fmt::Display for NavScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_block(f, &self.statements, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Colon,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => fmt_str(s),
            Tok::Num(n) => fmt_num(*n),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Colon => "`:`".into(),
        }
    }
}

struct Line {
    number: usize,
    indent: usize,
    kind: LineKind,
}

enum LineKind {
    Comment(String),
    Code(Vec<(Tok, usize)>),
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn valid_number(s: &str) -> bool {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    all_digits(int) && frac.is_none_or(all_digits) && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()))
}

/// Splits one line of code into tokens with 1-based columns. A `#` outside a
/// string ends the line.
fn tokenize(text: &str, line: usize, offset: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = offset + i + 1;
        match c {
            ' ' | '\t' => i += 1,
            '#' => break,
            '(' | ')' | ',' | '.' | '=' | ':' if !(c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                toks.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '.' => Tok::Dot,
                        '=' => Tok::Eq,
                        _ => Tok::Colon,
                    },
                    col,
                ));
                i += 1;
            }
            '\'' | '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '\\' if j + 1 < chars.len() => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        q if q == c => {
                            closed = true;
                            j += 1;
                            break;
                        }
                        other => {
                            s.push(other);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    let lit: String = chars[i..].iter().collect();
                    return Err(err(line, col, ParseErrorKind::MalformedLiteral(format!("{lit} (unterminated string)"))));
                }
                toks.push((Tok::Str(s), col));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '.' || chars[j] == '_') {
                    j += 1;
                }
                let lit: String = chars[i..j].iter().collect();
                let value = if valid_number(&lit) { lit.parse::<f64>().ok().filter(|v| v.is_finite()) } else { None };
                match value {
                    Some(v) => toks.push((Tok::Num(v), col)),
                    None => return Err(err(line, col, ParseErrorKind::MalformedLiteral(lit))),
                }
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                toks.push((Tok::Ident(chars[i..j].iter().collect()), col));
                i = j;
            }
            other => return Err(err(line, col, ParseErrorKind::Syntax(format!("unexpected character {other:?}")))),
        }
    }
    Ok(toks)
}

fn split_lines(text: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let trimmed = raw.trim_start_matches([' ', '\t']);
        let lead = &raw[..raw.len() - trimmed.len()];
        let content = trimmed.trim_end();
        if content.is_empty() {
            continue;
        }
        if let Some(p) = lead.find('\t') {
            if !content.starts_with('#') {
                return Err(err(number, p + 1, ParseErrorKind::BadIndentation("tabs are not allowed; indent with spaces".into())));
            }
        }
        let indent = lead.chars().count();
        let kind = match content.strip_prefix('#') {
            Some(c) => LineKind::Comment(c.strip_prefix(' ').unwrap_or(c).to_string()),
            None => LineKind::Code(tokenize(content, number, indent)?),
        };
        out.push(Line { number, indent, kind });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarType {
    Position,
    Contour,
    Number,
}

impl VarType {
    fn of(kind: PrimitiveKind) -> VarType {
        match kind {
            PrimitiveKind::GetContour => VarType::Contour,
            _ => VarType::Position,
        }
    }
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
    vars: HashMap<String, VarType>,
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|f| f.is_alphabetic() || f == '_') && c.all(|ch| ch.is_alphanumeric() || ch == '_')
}

impl Parser {
    fn block(&mut self, indent: usize) -> Result<Vec<Stmt>, ParseError> {
        let mut stmts = Vec::new();
        while self.pos < self.lines.len() {
            let line = &self.lines[self.pos];
            let (number, line_indent) = (line.number, line.indent);
            if line_indent < indent {
                break;
            }
            match &line.kind {
                LineKind::Comment(c) => {
                    stmts.push(Stmt::Comment(c.clone()));
                    self.pos += 1;
                }
                LineKind::Code(toks) => {
                    if line_indent > indent {
                        return Err(err(number, 1, ParseErrorKind::BadIndentation("unexpected indent".into())));
                    }
                    let toks = toks.clone();
                    self.pos += 1;
                    stmts.push(self.statement(number, line_indent, &toks)?);
                }
            }
        }
        Ok(stmts)
    }

    fn statement(&mut self, line: usize, indent: usize, toks: &[(Tok, usize)]) -> Result<Stmt, ParseError> {
        let at = |i: usize| toks.get(i).map(|t| t.1).unwrap_or_else(|| toks.last().map(|t| t.1 + 1).unwrap_or(indent + 1));
        if let Some((Tok::Ident(k), col)) = toks.first() {
            if UNSUPPORTED.contains(&k.as_str()) {
                return Err(err(line, *col, ParseErrorKind::Unsupported(k.clone())));
            }
            if k == "for" {
                return self.for_loop(line, indent, toks);
            }
        }
        match toks {
            [(Tok::Ident(v), col), (Tok::Eq, _), rest @ ..] => {
                if v == "robot" || v == "for" || v == "in" || v == "range" {
                    return Err(err(line, *col, ParseErrorKind::Syntax(format!("cannot assign to `{v}`"))));
                }
                let call = self.call(line, rest, at(2))?;
                if !call.kind.returns_value() {
                    return Err(err(line, at(2), ParseErrorKind::NoReturnValue(call.kind.name().into())));
                }
                self.vars.insert(v.clone(), VarType::of(call.kind));
                Ok(Stmt::Assign { var: v.clone(), call })
            }
            _ => Ok(Stmt::Call(self.call(line, toks, at(0))?)),
        }
    }

    fn for_loop(&mut self, line: usize, indent: usize, toks: &[(Tok, usize)]) -> Result<Stmt, ParseError> {
        let var = match toks.get(1) {
            Some((Tok::Ident(v), _)) if is_ident(v) => v.clone(),
            Some((t, c)) => return Err(err(line, *c, ParseErrorKind::Syntax(format!("expected a loop variable, found {}", t.describe())))),
            None => return Err(err(line, 4, ParseErrorKind::Syntax("expected a loop variable".into()))),
        };
        let expect = |i: usize, want: Tok, what: &str| -> Result<(), ParseError> {
            match toks.get(i) {
                Some((t, _)) if *t == want => Ok(()),
                Some((t, c)) => Err(err(line, *c, ParseErrorKind::Syntax(format!("expected {what}, found {}", t.describe())))),
                None => Err(err(line, toks.last().map(|t| t.1 + 1).unwrap_or(1), ParseErrorKind::Syntax(format!("expected {what}")))),
            }
        };
        expect(2, Tok::Ident("in".into()), "`in`")?;
        expect(3, Tok::Ident("range".into()), "`range`")?;
        expect(4, Tok::LParen, "`(`")?;
        let count = match toks.get(5) {
            Some((Tok::Num(n), c)) => {
                if *n < 0.0 || n.fract() != 0.0 || *n > u32::MAX as f64 {
                    return Err(err(line, *c, ParseErrorKind::NonLiteralRange(fmt_num(*n))));
                }
                *n as u64
            }
            Some((t, c)) => return Err(err(line, *c, ParseErrorKind::NonLiteralRange(t.describe()))),
            None => return Err(err(line, toks.last().map(|t| t.1 + 1).unwrap_or(1), ParseErrorKind::Syntax("expected a range bound".into()))),
        };
        expect(6, Tok::RParen, "`)`")?;
        expect(7, Tok::Colon, "`:`")?;
        if let Some((t, c)) = toks.get(8) {
            return Err(err(line, *c, ParseErrorKind::Syntax(format!("unexpected {} after `:`", t.describe()))));
        }
        let body_indent = self.lines[self.pos..]
            .iter()
            .find(|l| matches!(l.kind, LineKind::Code(_)))
            .map(|l| (l.number, l.indent));
        let body_indent = match body_indent {
            Some((_, i)) if i > indent => i,
            Some((n, _)) => return Err(err(n, 1, ParseErrorKind::BadIndentation("expected an indented loop body".into()))),
            None => return Err(err(line + 1, 1, ParseErrorKind::BadIndentation("expected an indented loop body".into()))),
        };
        let shadowed = self.vars.insert(var.clone(), VarType::Number);
        let body = self.block(body_indent)?;
        match shadowed {
            Some(t) => self.vars.insert(var.clone(), t),
            None => self.vars.remove(&var),
        };
        if let Some(next) = self.lines.get(self.pos) {
            if matches!(next.kind, LineKind::Code(_)) && next.indent > indent {
                return Err(err(next.number, 1, ParseErrorKind::BadIndentation("unindent does not match any outer level".into())));
            }
        }
        Ok(Stmt::For { var, count, body, span: Span { line } })
    }

    fn call(&self, line: usize, toks: &[(Tok, usize)], start_col: usize) -> Result<Call, ParseError> {
        let syntax = |c: usize, m: String| err(line, c, ParseErrorKind::Syntax(m));
        let (name, name_col) = match toks {
            [(Tok::Ident(r), _), (Tok::Dot, _), (Tok::Ident(n), c), ..] if r == "robot" => (n.clone(), *c),
            [(t, c), ..] => return Err(syntax(*c, format!("expected `robot.<primitive>(...)`, found {}", t.describe()))),
            [] => return Err(syntax(start_col, "expected `robot.<primitive>(...)`".into())),
        };
        let kind = PrimitiveKind::from_name(&name).ok_or_else(|| err(line, name_col, ParseErrorKind::UnknownPrimitive(name.clone())))?;
        let end_col = toks.last().map(|t| t.1 + 1).unwrap_or(start_col);
        match toks.get(3) {
            Some((Tok::LParen, _)) => {}
            Some((t, c)) => return Err(syntax(*c, format!("expected `(`, found {}", t.describe()))),
            None => return Err(syntax(end_col, "expected `(`".into())),
        }
        let mut args = Vec::new();
        let mut i = 4;
        let mut closed = false;
        while let Some((t, c)) = toks.get(i) {
            if *t == Tok::RParen && args.is_empty() {
                closed = true;
                i += 1;
                break;
            }
            let arg = match t {
                Tok::Str(s) => Arg::Str(s.clone()),
                Tok::Num(n) => Arg::Num(*n),
                Tok::Ident(v) => {
                    if !self.vars.contains_key(v) {
                        return Err(err(line, *c, ParseErrorKind::UnboundIdentifier(v.clone())));
                    }
                    Arg::Var(v.clone())
                }
                other => return Err(syntax(*c, format!("expected an argument, found {}", other.describe()))),
            };
            args.push((arg, *c));
            i += 1;
            match toks.get(i) {
                Some((Tok::Comma, _)) => i += 1,
                Some((Tok::RParen, _)) => {
                    closed = true;
                    i += 1;
                    break;
                }
                Some((t, c)) => return Err(syntax(*c, format!("expected `,` or `)`, found {}", t.describe()))),
                None => break,
            }
        }
        if !closed {
            return Err(syntax(end_col, "expected `)`".into()));
        }
        if let Some((t, c)) = toks.get(i) {
            return Err(syntax(*c, format!("unexpected {} after the call", t.describe())));
        }
        let params = kind.params();
        if params.len() != args.len() {
            return Err(err(
                line,
                name_col,
                ParseErrorKind::Arity { primitive: name, expected: params.len(), found: args.len() },
            ));
        }
        for (index, (p, (a, c))) in params.iter().zip(&args).enumerate() {
            let ok = match a {
                Arg::Str(_) => matches!(p, ArgKind::Object | ArgKind::Target),
                Arg::Num(_) => *p == ArgKind::Number,
                Arg::Var(v) => matches!(
                    (p, self.vars[v]),
                    (ArgKind::Number, VarType::Number) | (ArgKind::Target, VarType::Position)
                ),
            };
            if !ok {
                return Err(err(
                    line,
                    *c,
                    ParseErrorKind::ArgumentType { primitive: name, index, expected: p.describe().into() },
                ));
            }
        }
        Ok(Call { kind, args: args.into_iter().map(|(a, _)| a).collect(), span: Span { line } })
    }
}

pub fn parse_script(text: &str) -> Result<NavScript, ParseError> {
    let mut p = Parser { lines: split_lines(text)?, pos: 0, vars: HashMap::new() };
    let base = p.lines.iter().find(|l| matches!(l.kind, LineKind::Code(_))).map(|l| l.indent).unwrap_or(0);
    if base != 0 {
        let l = p.lines.iter().find(|l| matches!(l.kind, LineKind::Code(_))).unwrap();
        return Err(err(l.number, 1, ParseErrorKind::BadIndentation("unexpected indent".into())));
    }
    let statements = p.block(0)?;
    if let Some(l) = p.lines.get(p.pos) {
        return Err(err(l.number, 1, ParseErrorKind::BadIndentation("unindent does not match any outer level".into())));
    }
    Ok(NavScript { statements })
}

/// One executed primitive call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Position among executed calls, counting loop iterations.
    pub index: usize,
    pub line: usize,
    pub primitive: PrimitiveKind,
    pub args: Vec<PrimitiveValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<PrimitiveValue>,
    pub state: AgentState,
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeErrorKind {
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error("script exceeded {0} primitive calls")]
    CallLimit(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct RuntimeError {
    pub line: usize,
    pub kind: RuntimeErrorKind,
}

/// Result of running a script: every call made before the first error.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptRun {
    pub trace: Vec<TraceRecord>,
    pub error: Option<RuntimeError>,
}

impl ScriptRun {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// One JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub max_calls: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_calls: 100_000 }
    }
}

struct Interp<'n, 'a> {
    nav: &'n mut Navigator<'a>,
    vars: HashMap<String, PrimitiveValue>,
    trace: Vec<TraceRecord>,
    opts: RunOptions,
}

impl Interp<'_, '_> {
    fn block(&mut self, stmts: &[Stmt], body: &mut dyn Body) -> Result<(), RuntimeError> {
        for s in stmts {
            match s {
                Stmt::Comment(_) => {}
                Stmt::Call(c) => {
                    self.call(c, body)?;
                }
                Stmt::Assign { var, call } => {
                    let v = self.call(call, body)?;
                    if let Some(v) = v {
                        self.vars.insert(var.clone(), v);
                    }
                }
                Stmt::For { var, count, body: inner, .. } => {
                    let saved = self.vars.get(var).cloned();
                    for i in 0..*count {
                        self.vars.insert(var.clone(), PrimitiveValue::Number(i as f64));
                        self.block(inner, body)?;
                    }
                    match saved {
                        Some(v) => self.vars.insert(var.clone(), v),
                        None => self.vars.remove(var),
                    };
                }
            }
        }
        Ok(())
    }

    fn call(&mut self, c: &Call, body: &mut dyn Body) -> Result<Option<PrimitiveValue>, RuntimeError> {
        let line = c.span.line;
        if self.trace.len() >= self.opts.max_calls {
            return Err(RuntimeError { line, kind: RuntimeErrorKind::CallLimit(self.opts.max_calls) });
        }
        let args: Vec<PrimitiveValue> = c
            .args
            .iter()
            .map(|a| match a {
                Arg::Str(s) => PrimitiveValue::Text(s.clone()),
                Arg::Num(n) => PrimitiveValue::Number(*n),
                Arg::Var(v) => self.vars[v].clone(),
            })
            .collect();
        let fail = |e: NavError| RuntimeError { line, kind: e.into() };
        let prim = Primitive::new(c.kind, args.clone()).map_err(fail)?;
        let out = self.nav.exec(&prim, body).map_err(fail)?;
        self.trace.push(TraceRecord {
            index: self.trace.len(),
            line,
            primitive: c.kind,
            args,
            value: out.value.clone(),
            state: out.state,
            actions: out.actions.len(),
        });
        Ok(out.value)
    }
}

/// Executes `script`, stopping at the first failing call.
pub fn run_script(script: &NavScript, nav: &mut Navigator<'_>, body: &mut dyn Body) -> ScriptRun {
    run_script_with(script, nav, body, RunOptions::default())
}

pub fn run_script_with(script: &NavScript, nav: &mut Navigator<'_>, body: &mut dyn Body, opts: RunOptions) -> ScriptRun {
    let mut interp = Interp { nav, vars: HashMap::new(), trace: Vec::new(), opts };
    let error = interp.block(&script.statements, body).err();
    ScriptRun { trace: interp.trace, error }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind_of(text: &str) -> ParseErrorKind {
        parse_script(text).unwrap_err().kind
    }

    #[test]
    fn single_call() {
        let s = parse_script("robot.move_forward(3)").unwrap();
        assert_eq!(
            s.statements,
            vec![Stmt::Call(Call { kind: PrimitiveKind::MoveForward, args: vec![Arg::Num(3.0)], span: Span::default() })]
        );
    }

    #[test]
    fn loop_block() {
        let text = "robot.move_to_left('counter')\nrobot.move_in_between('sink', 'oven')\npos1 = robot.get_pos('sofa')\npos2 = robot.get_pos('table')\nfor i in range(2):\n    robot.move_to(pos1)\n    robot.move_to(pos2)\n";
        let s = parse_script(text).unwrap();
        assert_eq!(s.statements.len(), 5);
        match &s.statements[4] {
            Stmt::For { count, body, .. } => {
                assert_eq!(*count, 2);
                assert_eq!(body.len(), 2);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.call_count(), 8);
    }

    #[test]
    fn unknown_primitive_reports_line() {
        let e = parse_script("robot.fly()").unwrap_err();
        assert_eq!(e.line, 1);
        assert_eq!(e.column, 7);
        assert_eq!(e.kind, ParseErrorKind::UnknownPrimitive("fly".into()));
    }

    #[test]
    fn rejected_constructs() {
        assert!(matches!(kind_of("if x:\n    robot.turn(1)"), ParseErrorKind::Unsupported(_)));
        assert!(matches!(kind_of("while True:\n    robot.turn(1)"), ParseErrorKind::Unsupported(_)));
        assert!(matches!(kind_of("robot.move_to(p)"), ParseErrorKind::UnboundIdentifier(_)));
        assert!(matches!(kind_of("robot.turn(1.2.3)"), ParseErrorKind::MalformedLiteral(_)));
        assert!(matches!(kind_of("robot.face('sofa)"), ParseErrorKind::MalformedLiteral(_)));
        assert!(matches!(kind_of("n = robot.get_pos('a')\nfor i in range(n):\n    robot.turn(1)"), ParseErrorKind::NonLiteralRange(_)));
        assert!(matches!(kind_of("for i in range(-1):\n    robot.turn(1)"), ParseErrorKind::NonLiteralRange(_)));
        assert!(matches!(kind_of("for i in range(2):\nrobot.turn(1)"), ParseErrorKind::BadIndentation(_)));
        assert!(matches!(kind_of("robot.turn(1)\n  robot.turn(1)"), ParseErrorKind::BadIndentation(_)));
        assert!(matches!(
            kind_of("for i in range(2):\n    robot.turn(1)\n  robot.turn(1)"),
            ParseErrorKind::BadIndentation(_)
        ));
        assert!(matches!(kind_of("robot.turn('x')"), ParseErrorKind::ArgumentType { .. }));
        assert!(matches!(kind_of("robot.turn(1, 2)"), ParseErrorKind::Arity { .. }));
        assert!(matches!(kind_of("x = robot.turn(1)"), ParseErrorKind::NoReturnValue(_)));
        assert!(matches!(kind_of("c = robot.get_contour('a')\nrobot.move_to(c)"), ParseErrorKind::ArgumentType { .. }));
        assert!(matches!(kind_of("robot.turn(1"), ParseErrorKind::Syntax(_)));
        assert!(matches!(kind_of("robot.turn(1,)"), ParseErrorKind::Syntax(_)));
        assert!(matches!(kind_of("print(1)"), ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn loop_variable_is_scoped() {
        assert!(parse_script("for i in range(2):\n    robot.turn(i)").is_ok());
        assert!(matches!(kind_of("for i in range(2):\n    robot.turn(i)\nrobot.turn(i)"), ParseErrorKind::UnboundIdentifier(_)));
    }

    #[test]
    fn comments_and_quotes() {
        let s = parse_script("# hello\nrobot.face(\"sofa\")  # trailing\n\n robot_x = 1\n").unwrap_err();
        assert_eq!(s.line, 4);
        let s = parse_script("# hello\nrobot.face(\"it's\")  # trailing\n").unwrap();
        assert_eq!(s.to_string(), "# hello\nrobot.face('it\\'s')\n");
        assert_eq!(parse_script(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn pretty_print_round_trip() {
        let text = "pos1 = robot.get_pos('sofa')\nfor i in range(3):\n  # go\n  robot.move_to(pos1)\n  for j in range(0):\n    robot.turn(-90.5)\nrobot.turn_absolute(+90)\n";
        let s = parse_script(text).unwrap();
        let printed = s.to_string();
        assert_eq!(parse_script(&printed).unwrap(), s);
        assert!(printed.contains("robot.turn(-90.5)"));
        assert!(printed.contains("robot.turn_absolute(90)"));
    }

    #[test]
    fn empty_script() {
        assert_eq!(parse_script("").unwrap().statements, vec![]);
        assert_eq!(parse_script("\n# only a comment\n").unwrap().call_count(), 0);
    }
}
