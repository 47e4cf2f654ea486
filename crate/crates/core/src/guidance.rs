//! Feedback-guided generation of metamorphic pairs.
//!
//! One driver serves both policies. Each iteration generates a pair, asks the
//! policy how many feedback units are new, and mutates the target's state
//! once `plateau_limit` consecutive iterations have brought nothing new.
//! CCG feeds back plain coverage (`Cov(t_a) ∪ Cov(t_b)`); MCG feeds back the
//! pair's metamorphic coverage.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::coverage::{CoverageError, CoverageUnit, Granularity};
use crate::metamorphic::{mc_pair, side_coverage, McError, TestPair};
use crate::toytarget::{Fixture, MetamorphicRelation, PairExecution, ToyError};

pub const DEFAULT_PLATEAU_LIMIT: usize = 20;
pub const DEFAULT_BUDGET: usize = 2_000;
/// Base contexts kept by [`ToyAdapter`] between state mutations.
pub const DEFAULT_CORPUS_SIZE: usize = 1;

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("plateau limit must be at least 1")]
    ZeroPlateauLimit,
    #[error("compare needs at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("pair granularity {pair} does not match policy granularity {policy}")]
    GranularityMismatch { policy: Granularity, pair: Granularity },
    #[error("unknown policy `{0}` (expected ccg or mcg)")]
    UnknownPolicy(String),
    #[error("target failed at iteration {iteration}: {message}")]
    TargetFailure {
        iteration: usize,
        message: String,
        /// Events recorded before the failure.
        events: Vec<Event>,
    },
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Toy(#[from] ToyError),
    #[error("{0}")]
    Output(String),
}

impl From<CoverageError> for GuidanceError {
    fn from(e: CoverageError) -> Self {
        GuidanceError::Mc(McError::Coverage(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ccg,
    Mcg,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::Ccg, PolicyKind::Mcg];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ccg => "ccg",
            PolicyKind::Mcg => "mcg",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = GuidanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ccg" => Ok(PolicyKind::Ccg),
            "mcg" => Ok(PolicyKind::Mcg),
            _ => Err(GuidanceError::UnknownPolicy(s.to_owned())),
        }
    }
}

/// Cumulative feedback for one policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackPolicy {
    kind: PolicyKind,
    granularity: Granularity,
    cumulative: BTreeSet<CoverageUnit>,
}

impl FeedbackPolicy {
    pub fn new(kind: PolicyKind, granularity: Granularity) -> Self {
        FeedbackPolicy {
            kind,
            granularity,
            cumulative: BTreeSet::new(),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn cumulative(&self) -> &BTreeSet<CoverageUnit> {
        &self.cumulative
    }

    /// Fold a pair's feedback into the cumulative set and return how many
    /// units were not in it before.
    pub fn observe(&mut self, pair: &TestPair) -> Result<usize, GuidanceError> {
        if pair.granularity() != self.granularity {
            return Err(GuidanceError::GranularityMismatch {
                policy: self.granularity,
                pair: pair.granularity(),
            });
        }
        let feedback = match self.kind {
            PolicyKind::Ccg => side_coverage(pair.side_a())?.union(&side_coverage(pair.side_b())?)?,
            PolicyKind::Mcg => mc_pair(pair, true)?,
        };
        let before = self.cumulative.len();
        self.cumulative.extend(feedback.covered().iter().cloned());
        Ok(self.cumulative.len() - before)
    }
}

/// Verdict of the target's oracle on one generated pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Check {
    pub violated: bool,
    /// Seeded-bug id, when the target can attribute the violation.
    pub bug: Option<String>,
}

/// A system under test that can produce executed metamorphic pairs.
/// Every method must be deterministic given the RNG stream.
pub trait TargetAdapter {
    type State: Clone + fmt::Debug;
    type Pair;

    fn describe(&self) -> String;
    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Self::State;
    fn generate_pair(&self, state: &Self::State, id: String, rng: &mut ChaCha8Rng) -> Result<Self::Pair, String>;
    /// Coverage of both sides at `granularity`.
    fn coverage(&self, pair: &Self::Pair, granularity: Granularity) -> Result<TestPair, String>;
    fn check(&self, pair: &Self::Pair) -> Check;
    fn mutate_state(&self, state: &mut Self::State, rng: &mut ChaCha8Rng);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub iteration: usize,
    pub pair_id: String,
    pub new_units: usize,
    pub violation: bool,
    pub bug: Option<String>,
    pub mutated_state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriveConfig {
    pub budget: usize,
    pub plateau_limit: usize,
    pub seed: u64,
    pub granularity: Granularity,
    /// Keep every generated [`TestPair`] in the final state.
    pub keep_pairs: bool,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            budget: DEFAULT_BUDGET,
            plateau_limit: DEFAULT_PLATEAU_LIMIT,
            seed: 0,
            granularity: Granularity::Line,
            keep_pairs: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GuidanceState<S> {
    pub seed: u64,
    pub budget: usize,
    pub plateau_limit: usize,
    pub plateau_counter: usize,
    pub target_state: S,
    pub policy: FeedbackPolicy,
    pub events: Vec<Event>,
    /// Distinct seeded bugs, in order of discovery.
    pub bugs: Vec<String>,
    pub violations_total: usize,
    pub state_mutations: usize,
    pub pairs: Vec<TestPair>,
}

impl<S> GuidanceState<S> {
    pub fn distinct_bugs(&self) -> usize {
        self.bugs.len()
    }

    /// The event log as JSON Lines.
    pub fn events_jsonl(&self) -> String {
        events_jsonl(&self.events)
    }
}

pub fn events_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Run the feedback loop for `config.budget` iterations.
pub fn drive<T: TargetAdapter>(
    target: &T,
    kind: PolicyKind,
    config: &DriveConfig,
) -> Result<GuidanceState<T::State>, GuidanceError> {
    if config.budget == 0 {
        return Err(GuidanceError::ZeroBudget);
    }
    if config.plateau_limit == 0 {
        return Err(GuidanceError::ZeroPlateauLimit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let target_state = target.initial_state(&mut rng);
    let mut st = GuidanceState {
        seed: config.seed,
        budget: config.budget,
        plateau_limit: config.plateau_limit,
        plateau_counter: 0,
        target_state,
        policy: FeedbackPolicy::new(kind, config.granularity),
        events: Vec::with_capacity(config.budget),
        bugs: Vec::new(),
        violations_total: 0,
        state_mutations: 0,
        pairs: Vec::new(),
    };

    for iteration in 1..=config.budget {
        let pair_id = format!("t{iteration}");
        let fail = |st: &mut GuidanceState<T::State>, message: String| GuidanceError::TargetFailure {
            iteration,
            message,
            events: std::mem::take(&mut st.events),
        };
        let executed = match target.generate_pair(&st.target_state, pair_id.clone(), &mut rng) {
            Ok(p) => p,
            Err(m) => return Err(fail(&mut st, m)),
        };
        let pair = match target.coverage(&executed, config.granularity) {
            Ok(p) => p,
            Err(m) => return Err(fail(&mut st, m)),
        };
        let new_units = st.policy.observe(&pair)?;
        let check = target.check(&executed);
        if check.violated {
            st.violations_total += 1;
            if let Some(bug) = &check.bug {
                if !st.bugs.contains(bug) {
                    st.bugs.push(bug.clone());
                }
            }
        }

        if new_units == 0 {
            st.plateau_counter += 1;
        } else {
            st.plateau_counter = 0;
        }
        let mutated_state = st.plateau_counter == config.plateau_limit;
        if mutated_state {
            target.mutate_state(&mut st.target_state, &mut rng);
            st.plateau_counter = 0;
            st.state_mutations += 1;
        }

        st.events.push(Event {
            iteration,
            pair_id,
            new_units,
            violation: check.violated,
            bug: check.bug,
            mutated_state,
        });
        if config.keep_pairs {
            st.pairs.push(pair);
        }
    }
    Ok(st)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub policy: PolicyKind,
    pub seed: u64,
    pub distinct_bugs: usize,
    pub iterations: usize,
    pub violations_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Tally {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub mean_distinct_bugs: f64,
    pub min_distinct_bugs: usize,
    pub max_distinct_bugs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub target: String,
    pub budget: usize,
    pub plateau_limit: usize,
    pub granularity: Granularity,
    pub rows: Vec<CompareRow>,
    pub summary: Vec<PolicySummary>,
    /// MCG against CCG, seed by seed.
    pub mcg_vs_ccg: Tally,
}

impl Comparison {
    pub fn mean(&self, policy: PolicyKind) -> f64 {
        self.summary
            .iter()
            .find(|s| s.policy == policy)
            .map_or(0.0, |s| s.mean_distinct_bugs)
    }

    pub fn to_csv(&self) -> Result<String, GuidanceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| GuidanceError::Output(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| GuidanceError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| GuidanceError::Output(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}

impl CompareRow {
    pub fn from_state<S>(policy: PolicyKind, state: &GuidanceState<S>) -> Self {
        CompareRow {
            policy,
            seed: state.seed,
            distinct_bugs: state.distinct_bugs(),
            iterations: state.events.len(),
            violations_total: state.violations_total,
        }
    }
}

impl Comparison {
    /// Summarize finished runs. The tally counts seeds that have a row for
    /// both policies.
    pub fn from_rows(
        target: String,
        budget: usize,
        plateau_limit: usize,
        granularity: Granularity,
        rows: Vec<CompareRow>,
    ) -> Self {
        let mut tally = Tally::default();
        let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
        seeds.dedup();
        for seed in seeds {
            let found = |p: PolicyKind| {
                rows.iter()
                    .find(|r| r.seed == seed && r.policy == p)
                    .map(|r| r.distinct_bugs)
            };
            if let (Some(ccg), Some(mcg)) = (found(PolicyKind::Ccg), found(PolicyKind::Mcg)) {
                match mcg.cmp(&ccg) {
                    std::cmp::Ordering::Greater => tally.wins += 1,
                    std::cmp::Ordering::Equal => tally.ties += 1,
                    std::cmp::Ordering::Less => tally.losses += 1,
                }
            }
        }
        let summary = PolicyKind::ALL
            .into_iter()
            .filter_map(|policy| {
                let counts: Vec<usize> = rows
                    .iter()
                    .filter(|r| r.policy == policy)
                    .map(|r| r.distinct_bugs)
                    .collect();
                Some(PolicySummary {
                    policy,
                    mean_distinct_bugs: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
                    min_distinct_bugs: *counts.iter().min()?,
                    max_distinct_bugs: *counts.iter().max()?,
                })
            })
            .collect();
        Comparison {
            target,
            budget,
            plateau_limit,
            granularity,
            rows,
            summary,
            mcg_vs_ccg: tally,
        }
    }
}

/// Run both policies on every seed.
pub fn compare<T: TargetAdapter>(
    target: &T,
    budget: usize,
    plateau_limit: usize,
    granularity: Granularity,
    seeds: &[u64],
) -> Result<Comparison, GuidanceError> {
    if seeds.len() < 2 {
        return Err(GuidanceError::TooFewSeeds(seeds.len()));
    }
    let mut rows = Vec::with_capacity(seeds.len() * 2);
    for &seed in seeds {
        let config = DriveConfig {
            budget,
            plateau_limit,
            seed,
            granularity,
            keep_pairs: false,
        };
        for policy in PolicyKind::ALL {
            rows.push(CompareRow::from_state(policy, &drive(target, policy, &config)?));
        }
    }
    Ok(Comparison::from_rows(
        target.describe(),
        budget,
        plateau_limit,
        granularity,
        rows,
    ))
}

/// Write one CSV/JSONL artifact, mapping I/O errors.
pub fn write_all(mut w: impl Write, text: &str) -> Result<(), GuidanceError> {
    w.write_all(text.as_bytes())
        .map_err(|e| GuidanceError::Output(e.to_string()))
}

/// Adapter for the built-in toy fixtures.
///
/// Parameters are split into context parameters, which come from a small
/// corpus of base contexts held as state, and free parameters, drawn afresh
/// for every pair. Mutating the state replaces the whole corpus.
#[derive(Debug, Clone)]
pub struct ToyAdapter {
    fixture: Fixture,
    relation: MetamorphicRelation,
    /// Inclusive range per parameter.
    domains: Vec<(i64, i64)>,
    context: Vec<usize>,
    corpus_size: usize,
}

impl ToyAdapter {
    pub fn new(
        fixture: Fixture,
        relation: &str,
        domains: Vec<(i64, i64)>,
        context: Vec<usize>,
        corpus_size: usize,
    ) -> Result<Self, GuidanceError> {
        let relation = fixture
            .relation(relation)
            .cloned()
            .ok_or_else(|| GuidanceError::Output(format!("{}: no relation `{relation}`", fixture.name)))?;
        if domains.len() != fixture.program.arity() {
            return Err(ToyError::ArityMismatch {
                program: fixture.program.name().to_owned(),
                expected: fixture.program.arity(),
                got: domains.len(),
            }
            .into());
        }
        Ok(ToyAdapter {
            fixture,
            relation,
            domains,
            context,
            corpus_size: corpus_size.max(1),
        })
    }

    /// The adapter used for guidance experiments on a named fixture.
    pub fn for_fixture(name: &str) -> Result<Self, GuidanceError> {
        use crate::toytarget::{builtin, MINIEVAL_MODES, MINIEVAL_OPS, MINIEVAL_VALUES};
        let fixture = builtin(name)?;
        match name {
            "minieval" | "minieval_fixed" => ToyAdapter::new(
                fixture,
                "swap",
                vec![
                    (0, MINIEVAL_OPS - 1),
                    (0, MINIEVAL_MODES - 1),
                    MINIEVAL_VALUES,
                    MINIEVAL_VALUES,
                ],
                vec![0, 1],
                DEFAULT_CORPUS_SIZE,
            ),
            "listing1" | "listing1_fixed" => ToyAdapter::new(fixture, "R1", vec![(-50, 50), (-50, 50)], vec![], 1),
            _ => ToyAdapter::new(fixture, "MR2", vec![(-10, 10)], vec![], 1),
        }
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }
}

impl TargetAdapter for ToyAdapter {
    type State = Vec<Vec<i64>>;
    type Pair = PairExecution;

    fn describe(&self) -> String {
        format!("{} ({})", self.fixture.name, self.relation.name)
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Self::State {
        (0..self.corpus_size)
            .map(|_| {
                self.context
                    .iter()
                    .map(|&i| rng.gen_range(self.domains[i].0..=self.domains[i].1))
                    .collect()
            })
            .collect()
    }

    fn generate_pair(&self, state: &Self::State, id: String, rng: &mut ChaCha8Rng) -> Result<PairExecution, String> {
        let base = &state[rng.gen_range(0..state.len())];
        let input: Vec<i64> = (0..self.domains.len())
            .map(|i| match self.context.iter().position(|&c| c == i) {
                Some(k) => base[k],
                None => rng.gen_range(self.domains[i].0..=self.domains[i].1),
            })
            .collect();
        PairExecution::execute(&self.fixture.program, &self.relation, id, &input).map_err(|e| e.to_string())
    }

    fn coverage(&self, pair: &PairExecution, granularity: Granularity) -> Result<TestPair, String> {
        pair.test_pair(granularity)
            .ok_or_else(|| format!("toy targets have no {granularity} coverage"))
    }

    fn check(&self, pair: &PairExecution) -> Check {
        Check {
            violated: pair.violated,
            bug: if pair.violated {
                self.fixture.attribute(pair).map(|b| b.id)
            } else {
                None
            },
        }
    }

    fn mutate_state(&self, state: &mut Self::State, rng: &mut ChaCha8Rng) {
        *state = self.initial_state(rng);
    }
}
