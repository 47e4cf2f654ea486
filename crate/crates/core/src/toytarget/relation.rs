use std::fmt;

use crate::coverage::Granularity;
use crate::metamorphic::TestPair;

use super::program::{ExecutionTrace, ToyProgram};
use super::ToyError;

/// How a follow-up input is derived from a source input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transform {
    /// Exchange two arguments.
    Swap(usize, usize),
    /// Add a constant to the listed arguments.
    Shift { indices: Vec<usize>, by: i64 },
    /// Negate the listed arguments.
    Negate(Vec<usize>),
    /// Replace one argument by a constant.
    Set { index: usize, value: i64 },
}

impl Transform {
    pub fn apply(&self, input: &[i64]) -> Result<Vec<i64>, ToyError> {
        let check = |i: usize| {
            if i < input.len() {
                Ok(i)
            } else {
                Err(ToyError::TransformIndex {
                    index: i,
                    arity: input.len(),
                })
            }
        };
        let mut out = input.to_vec();
        match self {
            Transform::Swap(i, j) => out.swap(check(*i)?, check(*j)?),
            Transform::Shift { indices, by } => {
                for &i in indices {
                    out[check(i)?] = out[i].wrapping_add(*by);
                }
            }
            Transform::Negate(indices) => {
                for &i in indices {
                    out[check(i)?] = out[i].wrapping_neg();
                }
            }
            Transform::Set { index, value } => out[check(*index)?] = *value,
        }
        Ok(out)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Swap(i, j) => write!(f, "swap(#{i}, #{j})"),
            Transform::Shift { indices, by } => write!(f, "shift({indices:?}, {by:+})"),
            Transform::Negate(indices) => write!(f, "negate({indices:?})"),
            Transform::Set { index, value } => write!(f, "set(#{index} = {value})"),
        }
    }
}

/// Expected relation between the source output `O_a` and follow-up output `O_b`.
#[derive(Debug, Clone, Copy)]
pub enum OutputCheck {
    Equal,
    /// `O_a >= O_b`.
    GreaterOrEqual,
    /// A named predicate; two custom checks are equal when their names are.
    Custom {
        name: &'static str,
        holds: fn(i64, i64) -> bool,
    },
}

impl OutputCheck {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            OutputCheck::Equal => a == b,
            OutputCheck::GreaterOrEqual => a >= b,
            OutputCheck::Custom { holds, .. } => holds(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputCheck::Equal => "equal",
            OutputCheck::GreaterOrEqual => "greater_or_equal",
            OutputCheck::Custom { name, .. } => name,
        }
    }
}

impl PartialEq for OutputCheck {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Eq for OutputCheck {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetamorphicRelation {
    pub name: String,
    pub description: String,
    pub transform: Transform,
    pub check: OutputCheck,
}

impl MetamorphicRelation {
    pub fn new(name: &str, description: &str, transform: Transform, check: OutputCheck) -> Self {
        MetamorphicRelation {
            name: name.to_owned(),
            description: description.to_owned(),
            transform,
            check,
        }
    }

    pub fn derive(&self, input: &[i64]) -> Result<Vec<i64>, ToyError> {
        self.transform.apply(input)
    }
}

/// Both executions of one source/follow-up pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExecution {
    pub id: String,
    pub input_a: Vec<i64>,
    pub input_b: Vec<i64>,
    pub a: ExecutionTrace,
    pub b: ExecutionTrace,
    pub violated: bool,
}

impl PairExecution {
    pub fn execute(
        program: &ToyProgram,
        relation: &MetamorphicRelation,
        id: String,
        input: &[i64],
    ) -> Result<Self, ToyError> {
        let input_b = relation.derive(input)?;
        let a = program.run(input)?;
        let b = program.run(&input_b)?;
        let violated = !relation.check.holds(a.output, b.output);
        Ok(PairExecution {
            id,
            input_a: input.to_vec(),
            input_b,
            a,
            b,
            violated,
        })
    }

    /// The pair as a single-input-per-side [`TestPair`].
    pub fn test_pair(&self, granularity: Granularity) -> Option<TestPair> {
        let a = self.a.coverage(granularity)?.clone();
        let b = self.b.coverage(granularity)?.clone();
        TestPair::single(self.id.clone(), a, b).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationRun {
    pub relation: String,
    pub executions: Vec<PairExecution>,
    /// Seeds that could not be executed, by pair id.
    pub errors: Vec<(String, ToyError)>,
}

impl RelationRun {
    pub fn pairs(&self, granularity: Granularity) -> Vec<TestPair> {
        self.executions
            .iter()
            .filter_map(|e| e.test_pair(granularity))
            .collect()
    }

    pub fn violations(&self) -> impl Iterator<Item = &PairExecution> {
        self.executions.iter().filter(|e| e.violated)
    }

    pub fn violated(&self) -> bool {
        self.executions.iter().any(|e| e.violated)
    }
}

/// Run `relation` on every seed input. Pair ids are `<relation>/t<k>`; a
/// seed that fails to run is recorded in `errors` and the rest continue.
pub fn evaluate_relation(
    program: &ToyProgram,
    relation: &MetamorphicRelation,
    seeds: &[Vec<i64>],
) -> Result<RelationRun, ToyError> {
    if seeds.is_empty() {
        return Err(ToyError::NoSeeds);
    }
    let mut run = RelationRun {
        relation: relation.name.clone(),
        executions: Vec::with_capacity(seeds.len()),
        errors: Vec::new(),
    };
    for (k, seed) in seeds.iter().enumerate() {
        let id = format!("{}/t{}", relation.name, k + 1);
        match PairExecution::execute(program, relation, id.clone(), seed) {
            Ok(e) => run.executions.push(e),
            Err(e) => run.errors.push((id, e)),
        }
    }
    Ok(run)
}
