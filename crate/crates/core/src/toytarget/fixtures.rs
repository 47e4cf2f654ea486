use super::program::{lit, var, Cond, Expr, Stmt, ToyProgram};
use super::relation::{MetamorphicRelation, OutputCheck, Transform};

/// Opcodes accepted by `minieval`; others evaluate to 0.
pub const MINIEVAL_OPS: i64 = 8;
/// Modes are `0..MINIEVAL_MODES`.
pub const MINIEVAL_MODES: i64 = 16;
/// Operand range, inclusive.
pub const MINIEVAL_VALUES: (i64, i64) = (-20, 20);

pub(crate) fn calculate_difference(buggy: bool) -> ToyProgram {
    const X: usize = 0;
    const Y: usize = 1;
    let otherwise = if buggy {
        Stmt::ret(var(Y) - var(X) + lit(1)).note("bug").bug("off-by-one")
    } else {
        Stmt::ret(var(Y) - var(X))
    };
    let body = vec![Stmt::if_(
        var(X).gt(var(Y)),
        vec![Stmt::ret(var(X) - var(Y))],
        vec![otherwise],
    )];
    ToyProgram::new("calculate_difference", &["x", "y"], &[], body).expect("valid fixture")
}

pub(crate) fn calculate_difference_relations() -> Vec<MetamorphicRelation> {
    vec![
        MetamorphicRelation::new(
            "R1",
            "swapping the arguments keeps the difference",
            Transform::Swap(0, 1),
            OutputCheck::Equal,
        ),
        MetamorphicRelation::new(
            "R2",
            "adding 1 to both arguments keeps the difference",
            Transform::Shift {
                indices: vec![0, 1],
                by: 1,
            },
            OutputCheck::Equal,
        ),
    ]
}

pub(crate) fn abs(buggy: bool) -> ToyProgram {
    const X: usize = 0;
    let zero = if buggy {
        Stmt::ret(lit(3)).note("bug").bug("zero-case")
    } else {
        Stmt::ret(lit(0))
    };
    let body = vec![Stmt::if_bare(
        var(X).lt(lit(0)),
        vec![Stmt::ret(-var(X))],
        vec![Stmt::if_bare(var(X).eq(lit(0)), vec![zero], vec![Stmt::ret(var(X))])],
    )];
    ToyProgram::new("abs", &["x"], &[], body).expect("valid fixture")
}

pub(crate) fn abs_relations() -> Vec<MetamorphicRelation> {
    vec![
        MetamorphicRelation::new(
            "MR1",
            "abs(x) == abs(-x)",
            Transform::Negate(vec![0]),
            OutputCheck::Equal,
        ),
        MetamorphicRelation::new(
            "MR2",
            "abs(x) >= abs(0)",
            Transform::Set { index: 0, value: 0 },
            OutputCheck::GreaterOrEqual,
        ),
    ]
}

const OP: usize = 0;
const MODE: usize = 1;
const A: usize = 2;
const B: usize = 3;
const HI: usize = 4;
const LO: usize = 5;
const R: usize = 6;
const T: usize = 7;

fn hi() -> Expr {
    var(HI)
}
fn lo() -> Expr {
    var(LO)
}
fn a() -> Expr {
    var(A)
}
fn b() -> Expr {
    var(B)
}
fn mode() -> Expr {
    var(MODE)
}

/// One opcode of `minieval`.
///
/// The result is `value(hi, lo)`, so it cannot depend on operand order.
/// Modes in `[gate.0, gate.1)` enable an order-aware special-case region:
/// bookkeeping branches that skip one operand pattern (`track`), then a
/// special case whose faulty variant reads `a` and `b` in the wrong order.
/// `tune` holds later adjustments that only look at `hi`, `lo` and `mode`.
struct OpCase {
    name: &'static str,
    value: Expr,
    gate: (i64, i64),
    track: Vec<Cond>,
    guard: Cond,
    buggy: Expr,
    bug: &'static str,
    tune: Vec<(Cond, Expr)>,
}

/// `a - b != k` for each `k`: almost always true on both sides of a swapped
/// pair, and true on exactly one side only when `|a - b| == k`.
fn skips(ks: &[i64]) -> Vec<Cond> {
    ks.iter().map(|&k| (a() - b()).ne(lit(k))).collect()
}

fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "distance",
            value: hi() - lo(),
            gate: (2, 6),
            track: skips(&[1, 5, 10, 15, 24, 31]),
            guard: (a() - b()).eq(lit(27)),
            buggy: b() - a(),
            bug: "distance-order",
            tune: vec![
                (mode().ge(lit(8)) & (hi() - lo()).eq(lit(21)), var(R) + lit(1)),
                (mode().lt(lit(8)) & (hi() + lo()).eq(lit(-29)), var(R) - lit(1)),
            ],
        },
        OpCase {
            name: "max",
            value: hi(),
            gate: (6, 10),
            track: skips(&[2, 7, 13, 19, 22, 33]),
            guard: a().lt(lit(-17)) & b().gt(lit(15)),
            buggy: a(),
            bug: "max-left",
            tune: vec![
                (mode().ge(lit(10)) & (hi() - lo()).eq(lit(26)), var(R) - lit(2)),
                (mode().lt(lit(6)) & (hi() + lo()).eq(lit(31)), var(R) + lit(3)),
            ],
        },
        OpCase {
            name: "min",
            value: lo(),
            gate: (12, 16),
            track: skips(&[3, 8, 17, 21, 25, 32]),
            guard: a().gt(lit(17)) & b().lt(lit(-14)),
            buggy: b() - lit(1),
            bug: "min-off-by-one",
            tune: vec![
                (mode().lt(lit(12)) & (hi() - lo()).eq(lit(19)), var(R) + lit(1)),
                (mode().ge(lit(4)) & (hi() + lo()).eq(lit(-33)), var(R) * lit(2)),
            ],
        },
        OpCase {
            name: "sum",
            value: hi() + lo(),
            gate: (8, 12),
            track: skips(&[4, 9, 14, 20, 26, 30]),
            guard: a().gt(lit(18)) & b().lt(lit(-10)),
            buggy: a() + b() + lit(1),
            bug: "sum-carry",
            tune: vec![
                (mode().lt(lit(8)) & (hi() - lo()).eq(lit(23)), var(R) - lit(1)),
                (mode().ge(lit(12)) & (hi() + lo()).eq(lit(28)), var(R) + lit(1)),
            ],
        },
        OpCase {
            name: "product",
            value: hi() * lo(),
            gate: (10, 14),
            track: skips(&[1, 6, 12, 18, 23, 34]),
            guard: (b() - a()).eq(lit(33)),
            buggy: a() * (b() - lit(1)),
            bug: "product-shift",
            tune: vec![
                (mode().lt(lit(10)) & (hi() - lo()).eq(lit(20)), var(R) - lit(100)),
                (mode().ge(lit(2)) & (hi() + lo()).eq(lit(30)), var(R) + lit(100)),
            ],
        },
        OpCase {
            name: "spread",
            value: (hi() - lo()) * (hi() - lo()),
            gate: (0, 4),
            track: skips(&[2, 4, 9, 16, 21, 35]),
            guard: (b() - a()).eq(lit(29)),
            buggy: (b() - a()) * (b() - a() - lit(1)),
            bug: "spread-order",
            tune: vec![
                (mode().ge(lit(6)) & (hi() - lo()).eq(lit(25)), var(R) - lit(1)),
                (mode().lt(lit(14)) & (hi() + lo()).eq(lit(-27)), var(R) + lit(1)),
            ],
        },
        OpCase {
            name: "weighted",
            value: hi() * lit(2) + lo(),
            gate: (4, 8),
            track: skips(&[3, 8, 12, 18, 27, 36]),
            guard: a().gt(lit(16)) & b().lt(lit(-16)),
            buggy: b() * lit(2) + a(),
            bug: "weighted-order",
            tune: vec![
                (mode().ge(lit(9)) & (hi() - lo()).eq(lit(22)), var(R) + lit(2)),
                (mode().lt(lit(3)) & (hi() + lo()).eq(lit(32)), var(R) - lit(3)),
            ],
        },
        OpCase {
            name: "blend",
            value: hi() * lo() - lo(),
            gate: (14, 16),
            track: skips(&[2, 6, 11, 16, 20, 37]),
            guard: (a() - b()).eq(lit(30)),
            buggy: a() * b() - a(),
            bug: "blend-order",
            tune: vec![
                (mode().lt(lit(5)) & (hi() - lo()).eq(lit(24)), var(R) + lit(1)),
                (mode().ge(lit(7)) & (hi() + lo()).eq(lit(-31)), var(R) - lit(1)),
            ],
        },
    ]
}

fn op_block(case: &OpCase, buggy: bool) -> Vec<Stmt> {
    let mut region: Vec<Stmt> = case
        .track
        .iter()
        .map(|cond| Stmt::if_(cond.clone(), vec![Stmt::assign(T, var(T) + lit(1))], vec![]))
        .collect();
    let special = if buggy {
        Stmt::assign(R, case.buggy.clone()).note("bug").bug(case.bug)
    } else {
        Stmt::assign(R, case.value.clone())
    };
    region.push(Stmt::if_(case.guard.clone(), vec![special], vec![]));
    let (from, to) = case.gate;
    vec![
        Stmt::assign(R, case.value.clone()).note(case.name),
        Stmt::if_(mode().ge(lit(from)) & mode().lt(lit(to)), region, vec![]),
    ]
}

/// A small expression evaluator over `(op, mode, a, b)`. Every opcode is
/// symmetric in `a` and `b`; the faulty variant breaks that in eight
/// special cases, one per opcode.
pub(crate) fn minieval(buggy: bool) -> ToyProgram {
    let cases = op_cases();
    let mut chain = vec![Stmt::assign(R, lit(0))];
    for (k, case) in cases.iter().enumerate().rev() {
        chain = vec![Stmt::if_(var(OP).eq(lit(k as i64)), op_block(case, buggy), chain)];
    }
    let mut body = vec![Stmt::if_(
        a().gt(b()),
        vec![Stmt::assign(HI, a()), Stmt::assign(LO, b())],
        vec![Stmt::assign(HI, b()), Stmt::assign(LO, a())],
    )];
    body.extend(chain);
    for (k, case) in cases.iter().enumerate() {
        for (cond, adjusted) in &case.tune {
            body.push(Stmt::if_(
                var(OP).eq(lit(k as i64)) & cond.clone(),
                vec![Stmt::assign(R, adjusted.clone())],
                vec![],
            ));
        }
    }
    body.push(Stmt::ret(var(R)));
    ToyProgram::new("minieval", &["op", "mode", "a", "b"], &["hi", "lo", "r", "t"], body).expect("valid fixture")
}

pub(crate) fn minieval_relations() -> Vec<MetamorphicRelation> {
    vec![MetamorphicRelation::new(
        "swap",
        "exchanging the operands keeps the result",
        Transform::Swap(A, B),
        OutputCheck::Equal,
    )]
}
