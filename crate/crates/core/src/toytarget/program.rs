//! A tiny integer language with line-level instrumentation.
//!
//! Programs are straight-line code with nested `if`/`else` and `return`;
//! there are no loops or calls, so every run terminates. Arithmetic is
//! 64-bit wrapping and overflow is flagged in the trace.
//!
//! Line numbers are assigned from the program's textual layout: the function
//! header is line 1 and is not instrumented, every statement gets a line, and
//! structural lines (`} else {`, a closing `}`) get their own lines. Those
//! structural lines count as executed whenever their `if` is evaluated, and
//! the function's closing brace is executed by every run.

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::coverage::{CoverageMap, CoverageUnit, Granularity, Locator};

use super::ToyError;

pub type Slot = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Var(Slot),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

pub fn lit(n: i64) -> Expr {
    Expr::Lit(n)
}

pub fn var(slot: Slot) -> Expr {
    Expr::Var(slot)
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn holds(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }

    /// `<`↔`<=`, `>`↔`>=`, `==`↔`!=`.
    pub fn swapped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Le,
            CmpOp::Le => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Gt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Cmp(CmpOp, Expr, Expr),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Expr {
    pub fn lt(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Lt, self, rhs)
    }
    pub fn le(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Le, self, rhs)
    }
    pub fn gt(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Gt, self, rhs)
    }
    pub fn ge(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Ge, self, rhs)
    }
    pub fn eq(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Eq, self, rhs)
    }
    pub fn ne(self, rhs: Expr) -> Cond {
        Cond::Cmp(CmpOp::Ne, self, rhs)
    }
}

impl ops::BitAnd for Cond {
    type Output = Cond;
    fn bitand(self, rhs: Cond) -> Cond {
        Cond::And(Box::new(self), Box::new(rhs))
    }
}

impl ops::BitOr for Cond {
    type Output = Cond;
    fn bitor(self, rhs: Cond) -> Cond {
        Cond::Or(Box::new(self), Box::new(rhs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign {
        var: Slot,
        value: Expr,
    },
    Return {
        value: Expr,
    },
    If {
        cond: Cond,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
        /// `true` for `if (..) { .. }` layout, `false` for brace-less layout.
        braces: bool,
        else_line: Option<u32>,
        end_line: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub line: u32,
    pub kind: StmtKind,
    /// Seeded-bug identifier when this statement is a deliberate fault.
    pub bug: Option<String>,
    pub note: Option<String>,
}

impl Stmt {
    fn of(kind: StmtKind) -> Self {
        Stmt {
            line: 0,
            kind,
            bug: None,
            note: None,
        }
    }

    pub fn assign(var: Slot, value: Expr) -> Self {
        Self::of(StmtKind::Assign { var, value })
    }

    pub fn ret(value: Expr) -> Self {
        Self::of(StmtKind::Return { value })
    }

    /// `if (cond) { then } else { otherwise }`. An `otherwise` made of a
    /// single `if` is laid out as an `else if` chain.
    pub fn if_(cond: Cond, then: Vec<Stmt>, otherwise: Vec<Stmt>) -> Self {
        Self::of(StmtKind::If {
            cond,
            then,
            otherwise,
            braces: true,
            else_line: None,
            end_line: None,
        })
    }

    /// Brace-less variant of [`Stmt::if_`].
    pub fn if_bare(cond: Cond, then: Vec<Stmt>, otherwise: Vec<Stmt>) -> Self {
        let mut s = Self::if_(cond, then, otherwise);
        if let StmtKind::If { braces, .. } = &mut s.kind {
            *braces = false;
        }
        s
    }

    pub fn note(mut self, text: &str) -> Self {
        self.note = Some(text.to_owned());
        self
    }

    pub fn bug(mut self, id: &str) -> Self {
        self.bug = Some(id.to_owned());
        self
    }
}

fn is_chain(otherwise: &[Stmt]) -> bool {
    matches!(
        otherwise,
        [Stmt {
            kind: StmtKind::If { .. },
            ..
        }]
    )
}

/// A numbered toy program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyProgram {
    name: String,
    params: Vec<String>,
    locals: Vec<String>,
    body: Vec<Stmt>,
    close_line: u32,
    line_universe: Arc<BTreeSet<CoverageUnit>>,
    branch_universe: Arc<BTreeSet<CoverageUnit>>,
}

impl ToyProgram {
    /// Number the program's lines and validate it: variables are in range
    /// and every path ends in `return`.
    pub fn new(name: &str, params: &[&str], locals: &[&str], mut body: Vec<Stmt>) -> Result<Self, ToyError> {
        let mut next = 2;
        number_block(&mut body, &mut next);
        let close_line = next;
        let slots = params.len() + locals.len();
        let mut p = ToyProgram {
            name: name.to_owned(),
            params: params.iter().map(|s| (*s).to_owned()).collect(),
            locals: locals.iter().map(|s| (*s).to_owned()).collect(),
            body,
            close_line,
            line_universe: Arc::default(),
            branch_universe: Arc::default(),
        };
        p.validate_block(&p.body, slots)?;
        if !always_returns(&p.body) {
            return Err(ToyError::InvalidProgram(format!(
                "{name}: a path falls off the end without return"
            )));
        }
        let mut lines = BTreeSet::new();
        let mut branches = BTreeSet::new();
        collect_units(&p.body, &mut lines, &mut branches);
        lines.insert(close_line);
        p.line_universe = Arc::new(
            lines
                .into_iter()
                .map(|l| CoverageUnit::line(p.name.clone(), l))
                .collect(),
        );
        p.branch_universe = Arc::new(
            branches
                .into_iter()
                .map(|(line, branch)| CoverageUnit {
                    file: p.name.clone(),
                    locator: Locator::Branch { line, block: 0, branch },
                })
                .collect(),
        );
        Ok(p)
    }

    fn validate_block(&self, stmts: &[Stmt], slots: usize) -> Result<(), ToyError> {
        for s in stmts {
            let mut exprs: Vec<&Expr> = Vec::new();
            match &s.kind {
                StmtKind::Assign { var, value } => {
                    if *var < self.params.len() || *var >= slots {
                        return Err(ToyError::InvalidProgram(format!(
                            "{}: line {} assigns to slot {var}, which is not a local",
                            self.name, s.line
                        )));
                    }
                    exprs.push(value);
                }
                StmtKind::Return { value } => exprs.push(value),
                StmtKind::If {
                    cond, then, otherwise, ..
                } => {
                    cond_exprs(cond, &mut exprs);
                    self.validate_block(then, slots)?;
                    self.validate_block(otherwise, slots)?;
                }
            }
            for e in exprs {
                if max_slot(e).is_some_and(|m| m >= slots) {
                    return Err(ToyError::InvalidProgram(format!(
                        "{}: line {} reads an undeclared variable",
                        self.name, s.line
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn body(&self) -> &[Stmt] {
        &self.body
    }

    pub(crate) fn body_mut(&mut self) -> &mut Vec<Stmt> {
        &mut self.body
    }

    /// All instrumented line numbers.
    pub fn lines(&self) -> BTreeSet<u32> {
        self.line_universe
            .iter()
            .filter_map(|u| match u.locator {
                Locator::Line(l) => Some(l),
                _ => None,
            })
            .collect()
    }

    pub fn line_universe(&self) -> &BTreeSet<CoverageUnit> {
        &self.line_universe
    }

    pub fn branch_universe(&self) -> &BTreeSet<CoverageUnit> {
        &self.branch_universe
    }

    /// Statements in source order (pre-order traversal).
    pub fn statements(&self) -> Vec<&Stmt> {
        fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                out.push(s);
                if let StmtKind::If { then, otherwise, .. } = &s.kind {
                    walk(then, out);
                    walk(otherwise, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    fn machine(&self, inputs: &[i64], record: bool) -> Result<(Machine, i64), ToyError> {
        if inputs.len() != self.params.len() {
            return Err(ToyError::ArityMismatch {
                program: self.name.clone(),
                expected: self.params.len(),
                got: inputs.len(),
            });
        }
        let mut m = Machine {
            env: inputs.to_vec(),
            overflow: false,
            record,
            lines: Vec::new(),
            branches: Vec::new(),
        };
        m.env.resize(self.params.len() + self.locals.len(), 0);
        let output = m
            .exec_block(&self.body)
            .ok_or_else(|| ToyError::InvalidProgram(format!("{}: fell off the end", self.name)))?;
        Ok((m, output))
    }

    /// Output only, without collecting coverage.
    pub fn eval(&self, inputs: &[i64]) -> Result<i64, ToyError> {
        self.machine(inputs, false).map(|(_, out)| out)
    }

    /// Execute the program on `inputs`.
    pub fn run(&self, inputs: &[i64]) -> Result<ExecutionTrace, ToyError> {
        let (mut m, output) = self.machine(inputs, true)?;
        m.lines.push(self.close_line);

        let lines: BTreeSet<CoverageUnit> = m
            .lines
            .into_iter()
            .map(|l| CoverageUnit::line(self.name.clone(), l))
            .collect();
        let branches: BTreeSet<CoverageUnit> = m
            .branches
            .into_iter()
            .map(|(line, branch)| CoverageUnit {
                file: self.name.clone(),
                locator: Locator::Branch { line, block: 0, branch },
            })
            .collect();
        Ok(ExecutionTrace {
            output,
            overflow: m.overflow,
            lines: CoverageMap::with_universe(Granularity::Line, lines, Arc::clone(&self.line_universe))
                .expect("executed lines are instrumented"),
            branches: CoverageMap::with_universe(Granularity::Branch, branches, Arc::clone(&self.branch_universe))
                .expect("taken branches are instrumented"),
        })
    }

    /// Numbered source listing.
    pub fn listing(&self) -> String {
        let mut out = Vec::new();
        let params: Vec<String> = self.params.iter().map(|p| format!("int {p}")).collect();
        out.push((1, format!("int {}({}) {{", self.name, params.join(", "))));
        if !self.locals.is_empty() {
            // Locals are zero-initialised and share the header line.
            let decl = self.locals.join(", ");
            out[0].1.push_str(&format!("  // locals: {decl}"));
        }
        render_block(self, &self.body, 1, &mut out);
        out.push((self.close_line, "}".to_owned()));
        out.sort_by_key(|(l, _)| *l);
        let width = self.close_line.to_string().len();
        out.into_iter()
            .map(|(l, text)| format!("{l:>width$}  {text}\n"))
            .collect()
    }

    fn slot_name(&self, slot: Slot) -> &str {
        if slot < self.params.len() {
            &self.params[slot]
        } else {
            &self.locals[slot - self.params.len()]
        }
    }
}

fn number_block(stmts: &mut [Stmt], next: &mut u32) {
    for s in stmts {
        number_stmt(s, next);
    }
}

fn number_stmt(s: &mut Stmt, next: &mut u32) {
    s.line = *next;
    *next += 1;
    if let StmtKind::If {
        then,
        otherwise,
        braces,
        else_line,
        end_line,
        ..
    } = &mut s.kind
    {
        number_block(then, next);
        if otherwise.is_empty() {
            *else_line = None;
        } else if is_chain(otherwise) {
            *else_line = None;
            number_block(otherwise, next);
            *end_line = None;
            return;
        } else {
            *else_line = Some(*next);
            *next += 1;
            number_block(otherwise, next);
        }
        *end_line = if *braces {
            let l = *next;
            *next += 1;
            Some(l)
        } else {
            None
        };
    }
}

fn collect_units(stmts: &[Stmt], lines: &mut BTreeSet<u32>, branches: &mut BTreeSet<(u32, u32)>) {
    for s in stmts {
        lines.insert(s.line);
        if let StmtKind::If {
            then,
            otherwise,
            else_line,
            end_line,
            ..
        } = &s.kind
        {
            branches.insert((s.line, 0));
            branches.insert((s.line, 1));
            lines.extend(else_line.iter().chain(end_line.iter()));
            collect_units(then, lines, branches);
            collect_units(otherwise, lines, branches);
        }
    }
}

fn always_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Return { .. } => true,
        StmtKind::If { then, otherwise, .. } => always_returns(then) && always_returns(otherwise),
        StmtKind::Assign { .. } => false,
    })
}

fn max_slot(e: &Expr) -> Option<Slot> {
    match e {
        Expr::Lit(_) => None,
        Expr::Var(s) => Some(*s),
        Expr::Neg(inner) => max_slot(inner),
        Expr::Bin(_, l, r) => max_slot(l).max(max_slot(r)),
    }
}

pub(crate) fn cond_exprs<'a>(c: &'a Cond, out: &mut Vec<&'a Expr>) {
    match c {
        Cond::Cmp(_, l, r) => {
            out.push(l);
            out.push(r);
        }
        Cond::And(l, r) | Cond::Or(l, r) => {
            cond_exprs(l, out);
            cond_exprs(r, out);
        }
    }
}

struct Machine {
    env: Vec<i64>,
    overflow: bool,
    record: bool,
    lines: Vec<u32>,
    branches: Vec<(u32, u32)>,
}

impl Machine {
    fn eval(&mut self, e: &Expr) -> i64 {
        match e {
            Expr::Lit(n) => *n,
            Expr::Var(s) => self.env[*s],
            Expr::Neg(inner) => {
                let v = self.eval(inner);
                let (r, o) = v.overflowing_neg();
                self.overflow |= o;
                r
            }
            Expr::Bin(op, l, r) => {
                let (l, r) = (self.eval(l), self.eval(r));
                let (v, o) = match op {
                    BinOp::Add => l.overflowing_add(r),
                    BinOp::Sub => l.overflowing_sub(r),
                    BinOp::Mul => l.overflowing_mul(r),
                };
                self.overflow |= o;
                v
            }
        }
    }

    fn test(&mut self, c: &Cond) -> bool {
        match c {
            Cond::Cmp(op, l, r) => {
                let (l, r) = (self.eval(l), self.eval(r));
                op.holds(l, r)
            }
            // Both operands are evaluated: no short-circuit, so coverage does
            // not depend on operand order.
            Cond::And(l, r) => {
                let (l, r) = (self.test(l), self.test(r));
                l && r
            }
            Cond::Or(l, r) => {
                let (l, r) = (self.test(l), self.test(r));
                l || r
            }
        }
    }

    fn exec_block(&mut self, stmts: &[Stmt]) -> Option<i64> {
        for s in stmts {
            if let Some(v) = self.exec(s) {
                return Some(v);
            }
        }
        None
    }

    fn exec(&mut self, s: &Stmt) -> Option<i64> {
        if self.record {
            self.lines.push(s.line);
        }
        match &s.kind {
            StmtKind::Assign { var, value } => {
                self.env[*var] = self.eval(value);
                None
            }
            StmtKind::Return { value } => Some(self.eval(value)),
            StmtKind::If {
                cond,
                then,
                otherwise,
                else_line,
                end_line,
                ..
            } => {
                let taken = self.test(cond);
                if self.record {
                    self.lines.extend(else_line.iter().chain(end_line.iter()));
                    self.branches.push((s.line, if taken { 0 } else { 1 }));
                }
                if taken {
                    self.exec_block(then)
                } else {
                    self.exec_block(otherwise)
                }
            }
        }
    }
}

/// Output and coverage of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub output: i64,
    /// Set when any arithmetic step wrapped.
    pub overflow: bool,
    pub lines: CoverageMap,
    pub branches: CoverageMap,
}

impl ExecutionTrace {
    pub fn coverage(&self, granularity: Granularity) -> Option<&CoverageMap> {
        match granularity {
            Granularity::Line => Some(&self.lines),
            Granularity::Branch => Some(&self.branches),
            _ => None,
        }
    }

    pub fn covered_lines(&self) -> BTreeSet<u32> {
        self.lines
            .covered()
            .iter()
            .filter_map(|u| match u.locator {
                Locator::Line(l) => Some(l),
                _ => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Rendering

struct ExprDisplay<'a> {
    program: &'a ToyProgram,
    expr: &'a Expr,
}

impl ExprDisplay<'_> {
    fn fmt_expr(&self, e: &Expr, f: &mut fmt::Formatter<'_>, parent_prec: u8, right: bool) -> fmt::Result {
        match e {
            Expr::Lit(n) if *n < 0 => write!(f, "({n})"),
            Expr::Lit(n) => write!(f, "{n}"),
            Expr::Var(s) => f.write_str(self.program.slot_name(*s)),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                self.fmt_expr(inner, f, 3, false)
            }
            Expr::Bin(op, l, r) => {
                let prec = if *op == BinOp::Mul { 2 } else { 1 };
                let paren = prec < parent_prec || (right && prec == parent_prec);
                if paren {
                    f.write_str("(")?;
                }
                self.fmt_expr(l, f, prec, false)?;
                write!(f, " {} ", op.symbol())?;
                self.fmt_expr(r, f, prec, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_expr(self.expr, f, 0, false)
    }
}

fn render_expr(p: &ToyProgram, e: &Expr) -> String {
    ExprDisplay { program: p, expr: e }.to_string()
}

fn render_cond(p: &ToyProgram, c: &Cond, nested: bool) -> String {
    match c {
        Cond::Cmp(op, l, r) => format!("{} {} {}", render_expr(p, l), op.symbol(), render_expr(p, r)),
        Cond::And(l, r) => format!("{} && {}", render_cond(p, l, true), render_cond(p, r, true)),
        Cond::Or(l, r) => {
            let s = format!("{} || {}", render_cond(p, l, true), render_cond(p, r, true));
            if nested {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

fn with_note(mut text: String, s: &Stmt) -> String {
    if let Some(note) = &s.note {
        text.push_str("  // ");
        text.push_str(note);
    }
    text
}

fn render_block(p: &ToyProgram, stmts: &[Stmt], depth: usize, out: &mut Vec<(u32, String)>) {
    for s in stmts {
        render_stmt(p, s, depth, false, out);
    }
}

fn render_stmt(p: &ToyProgram, s: &Stmt, depth: usize, chained: bool, out: &mut Vec<(u32, String)>) {
    let pad = "    ".repeat(depth);
    match &s.kind {
        StmtKind::Assign { var, value } => out.push((
            s.line,
            with_note(format!("{pad}{} = {};", p.slot_name(*var), render_expr(p, value)), s),
        )),
        StmtKind::Return { value } => {
            out.push((s.line, with_note(format!("{pad}return {};", render_expr(p, value)), s)))
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
            braces,
            else_line,
            end_line,
        } => {
            let cond = render_cond(p, cond, false);
            let head = match (chained, braces) {
                (false, true) => format!("{pad}if ({cond}) {{"),
                (false, false) => format!("{pad}if ({cond})"),
                (true, true) => format!("{pad}}} else if ({cond}) {{"),
                (true, false) => format!("{pad}else if ({cond})"),
            };
            out.push((s.line, with_note(head, s)));
            render_block(p, then, depth + 1, out);
            if is_chain(otherwise) {
                render_stmt(p, &otherwise[0], depth, true, out);
            } else {
                if let Some(l) = else_line {
                    let text = if *braces { "} else {" } else { "else" };
                    out.push((*l, format!("{pad}{text}")));
                }
                render_block(p, otherwise, depth + 1, out);
            }
            if let Some(l) = end_line {
                out.push((*l, format!("{pad}}}")));
            }
        }
    }
}
