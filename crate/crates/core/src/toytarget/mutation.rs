use std::fmt;

use serde::Serialize;

use super::program::{cond_exprs, BinOp, Cond, Expr, Stmt, StmtKind, ToyProgram};
use super::relation::{evaluate_relation, MetamorphicRelation};
use super::ToyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    /// `+` ↔ `-`.
    ArithSwap,
    /// `<`↔`<=`, `>`↔`>=`, `==`↔`!=`.
    RelSwap,
    /// `e` → `e + k` on an assigned or returned expression.
    ConstOff(i64),
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationOp::ArithSwap => f.write_str("arith_swap"),
            MutationOp::RelSwap => f.write_str("rel_swap"),
            MutationOp::ConstOff(k) => write!(f, "const_off{k:+}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mutant {
    /// `<program>:<line>:<op>`, with `#<k>` appended for the k-th (k > 0)
    /// occurrence of the operator on that line.
    pub id: String,
    pub line: u32,
    pub op: MutationOp,
    pub occurrence: usize,
    pub program: ToyProgram,
}

fn arith_sites(e: &Expr) -> usize {
    match e {
        Expr::Lit(_) | Expr::Var(_) => 0,
        Expr::Neg(inner) => arith_sites(inner),
        Expr::Bin(op, l, r) => usize::from(*op != BinOp::Mul) + arith_sites(l) + arith_sites(r),
    }
}

fn cmp_sites(c: &Cond) -> usize {
    match c {
        Cond::Cmp(..) => 1,
        Cond::And(l, r) | Cond::Or(l, r) => cmp_sites(l) + cmp_sites(r),
    }
}

fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match &s.kind {
        StmtKind::Assign { value, .. } | StmtKind::Return { value } => vec![value],
        StmtKind::If { cond, .. } => {
            let mut out = Vec::new();
            cond_exprs(cond, &mut out);
            out
        }
    }
}

/// Swap the `k`-th `+`/`-` (pre-order). Returns false if there is none.
fn swap_arith(e: &mut Expr, k: &mut usize) -> bool {
    match e {
        Expr::Lit(_) | Expr::Var(_) => false,
        Expr::Neg(inner) => swap_arith(inner, k),
        Expr::Bin(op, l, r) => {
            if *op != BinOp::Mul {
                if *k == 0 {
                    *op = if *op == BinOp::Add { BinOp::Sub } else { BinOp::Add };
                    return true;
                }
                *k -= 1;
            }
            swap_arith(l, k) || swap_arith(r, k)
        }
    }
}

fn cond_arith(c: &mut Cond, k: &mut usize) -> bool {
    match c {
        Cond::Cmp(_, l, r) => swap_arith(l, k) || swap_arith(r, k),
        Cond::And(l, r) | Cond::Or(l, r) => cond_arith(l, k) || cond_arith(r, k),
    }
}

fn swap_cmp(c: &mut Cond, k: &mut usize) -> bool {
    match c {
        Cond::Cmp(op, _, _) => {
            if *k == 0 {
                *op = op.swapped();
                return true;
            }
            *k -= 1;
            false
        }
        Cond::And(l, r) | Cond::Or(l, r) => swap_cmp(l, k) || swap_cmp(r, k),
    }
}

fn find_stmt(stmts: &mut [Stmt], line: u32) -> Option<&mut Stmt> {
    for s in stmts {
        if s.line == line {
            return Some(s);
        }
        if let StmtKind::If { then, otherwise, .. } = &mut s.kind {
            if let Some(found) = find_stmt(then, line).or_else(|| find_stmt(otherwise, line)) {
                return Some(found);
            }
        }
    }
    None
}

fn apply(program: &ToyProgram, line: u32, op: MutationOp, occurrence: usize) -> Option<ToyProgram> {
    let mut mutated = program.clone();
    let stmt = find_stmt(mutated.body_mut(), line)?;
    let mut k = occurrence;
    let changed = match (op, &mut stmt.kind) {
        (MutationOp::ArithSwap, StmtKind::Assign { value, .. } | StmtKind::Return { value }) => {
            swap_arith(value, &mut k)
        }
        (MutationOp::ArithSwap, StmtKind::If { cond, .. }) => cond_arith(cond, &mut k),
        (MutationOp::RelSwap, StmtKind::If { cond, .. }) => swap_cmp(cond, &mut k),
        (MutationOp::ConstOff(d), StmtKind::Assign { value, .. } | StmtKind::Return { value }) => {
            let old = std::mem::replace(value, Expr::Lit(0));
            *value = if d < 0 { old - Expr::Lit(-d) } else { old + Expr::Lit(d) };
            true
        }
        _ => false,
    };
    changed.then_some(mutated)
}

/// Every first-order mutant, in source order and then operator order
/// (arith swap, relational swap, `+1`, `-1`).
pub fn enumerate_mutants(program: &ToyProgram) -> Vec<Mutant> {
    let mut out = Vec::new();
    for stmt in program.statements() {
        let arith: usize = stmt_exprs(stmt).into_iter().map(arith_sites).sum();
        let mut sites = vec![(MutationOp::ArithSwap, arith)];
        match &stmt.kind {
            StmtKind::If { cond, .. } => sites.push((MutationOp::RelSwap, cmp_sites(cond))),
            _ => {
                sites.push((MutationOp::ConstOff(1), 1));
                sites.push((MutationOp::ConstOff(-1), 1));
            }
        }
        for (op, count) in sites {
            for occurrence in 0..count {
                let Some(mutated) = apply(program, stmt.line, op, occurrence) else {
                    continue;
                };
                let mut id = format!("{}:{}:{op}", program.name(), stmt.line);
                if occurrence > 0 {
                    id.push_str(&format!("#{occurrence}"));
                }
                out.push(Mutant {
                    id,
                    line: stmt.line,
                    op,
                    occurrence,
                    program: mutated,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutationScore {
    pub relation: String,
    pub killed: Vec<String>,
    pub survived: Vec<String>,
}

impl MutationScore {
    pub fn total(&self) -> usize {
        self.killed.len() + self.survived.len()
    }

    pub fn score(&self) -> f64 {
        self.killed.len() as f64 / self.total() as f64
    }
}

/// A mutant is killed when the relation is violated on any seed.
pub fn mutation_score_with(
    mutants: &[Mutant],
    relation: &MetamorphicRelation,
    seeds: &[Vec<i64>],
) -> Result<MutationScore, ToyError> {
    if mutants.is_empty() {
        return Err(ToyError::NoMutants);
    }
    let mut score = MutationScore {
        relation: relation.name.clone(),
        killed: Vec::new(),
        survived: Vec::new(),
    };
    for m in mutants {
        if evaluate_relation(&m.program, relation, seeds)?.violated() {
            score.killed.push(m.id.clone());
        } else {
            score.survived.push(m.id.clone());
        }
    }
    Ok(score)
}

pub fn mutation_score(
    program: &ToyProgram,
    relation: &MetamorphicRelation,
    seeds: &[Vec<i64>],
) -> Result<MutationScore, ToyError> {
    mutation_score_with(&enumerate_mutants(program), relation, seeds)
}
