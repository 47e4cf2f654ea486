//! Small instrumented programs with seeded bugs and metamorphic relations.

mod fixtures;
mod mutation;
mod program;
mod relation;

use thiserror::Error;

pub use fixtures::{MINIEVAL_MODES, MINIEVAL_OPS, MINIEVAL_VALUES};
pub use mutation::{enumerate_mutants, mutation_score, mutation_score_with, Mutant, MutationOp, MutationScore};
pub use program::{lit, var, BinOp, CmpOp, Cond, ExecutionTrace, Expr, Slot, Stmt, StmtKind, ToyProgram};
pub use relation::{evaluate_relation, MetamorphicRelation, OutputCheck, PairExecution, RelationRun, Transform};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToyError {
    #[error("{program} takes {expected} argument(s), got {got}")]
    ArityMismatch {
        program: String,
        expected: usize,
        got: usize,
    },
    #[error("transform refers to argument #{index} but the input has {arity}")]
    TransformIndex { index: usize, arity: usize },
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("no seed inputs given")]
    NoSeeds,
    #[error("the mutation operators produce no mutants for this program")]
    NoMutants,
    #[error("unknown fixture `{0}` (available: {available})", available = FIXTURES.join(", "))]
    UnknownFixture(String),
}

/// Names accepted by [`builtin`].
pub const FIXTURES: &[&str] = &[
    "listing1",
    "listing1_fixed",
    "abs_mr",
    "abs_fixed",
    "minieval",
    "minieval_fixed",
];

/// A deliberately faulty statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededBug {
    pub id: String,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub program: ToyProgram,
    /// Correct variant with identical line layout; `None` for correct fixtures.
    pub reference: Option<ToyProgram>,
    pub relations: Vec<MetamorphicRelation>,
    pub seeds: Vec<Vec<i64>>,
}

impl Fixture {
    pub fn relation(&self, name: &str) -> Option<&MetamorphicRelation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn bugs(&self) -> Vec<SeededBug> {
        self.program
            .statements()
            .into_iter()
            .filter_map(|s| {
                s.bug.as_ref().map(|id| SeededBug {
                    id: id.clone(),
                    line: s.line,
                })
            })
            .collect()
    }

    /// Blame a violation on a seeded bug: the first side whose output
    /// differs from the reference program is charged to the first seeded
    /// bug line it executed.
    pub fn attribute(&self, pair: &PairExecution) -> Option<SeededBug> {
        let reference = self.reference.as_ref()?;
        let bugs = self.bugs();
        [(&pair.input_a, &pair.a), (&pair.input_b, &pair.b)]
            .into_iter()
            .filter(|(input, trace)| reference.run(input).map(|r| r.output != trace.output).unwrap_or(false))
            .find_map(|(_, trace)| {
                let lines = trace.covered_lines();
                bugs.iter().find(|b| lines.contains(&b.line)).cloned()
            })
    }

    /// Mutants of the reference that sit on a seeded-bug line and agree with
    /// the faulty program on every seed and every follow-up input.
    pub fn seeded_mutants(&self) -> Vec<Mutant> {
        let Some(reference) = &self.reference else {
            return Vec::new();
        };
        let bug_lines: Vec<u32> = self.bugs().iter().map(|b| b.line).collect();
        let mut probes = self.seeds.clone();
        for relation in &self.relations {
            probes.extend(self.seeds.iter().filter_map(|s| relation.derive(s).ok()));
        }
        enumerate_mutants(reference)
            .into_iter()
            .filter(|m| bug_lines.contains(&m.line))
            .filter(|m| {
                probes
                    .iter()
                    .all(|input| m.program.eval(input).ok() == self.program.eval(input).ok())
            })
            .collect()
    }
}

/// Look up a built-in fixture by name.
pub fn builtin(name: &str) -> Result<Fixture, ToyError> {
    let (program, reference, relations, seeds) = match name {
        "listing1" => (
            fixtures::calculate_difference(true),
            Some(fixtures::calculate_difference(false)),
            fixtures::calculate_difference_relations(),
            vec![vec![2, 3], vec![6, 2]],
        ),
        "listing1_fixed" => (
            fixtures::calculate_difference(false),
            None,
            fixtures::calculate_difference_relations(),
            vec![vec![2, 3], vec![6, 2]],
        ),
        "abs_mr" => (
            fixtures::abs(true),
            Some(fixtures::abs(false)),
            fixtures::abs_relations(),
            vec![vec![3], vec![2]],
        ),
        "abs_fixed" => (
            fixtures::abs(false),
            None,
            fixtures::abs_relations(),
            vec![vec![3], vec![2]],
        ),
        "minieval" => (
            fixtures::minieval(true),
            Some(fixtures::minieval(false)),
            fixtures::minieval_relations(),
            vec![vec![0, 3, 1, 12], vec![3, 9, 15, 2], vec![1, 0, 4, -4]],
        ),
        "minieval_fixed" => (
            fixtures::minieval(false),
            None,
            fixtures::minieval_relations(),
            vec![vec![0, 3, 1, 12], vec![3, 9, 15, 2], vec![1, 0, 4, -4]],
        ),
        other => return Err(ToyError::UnknownFixture(other.to_owned())),
    };
    Ok(Fixture {
        name: name.to_owned(),
        program,
        reference,
        relations,
        seeds,
    })
}
