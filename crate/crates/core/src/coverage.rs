//! Coverage units, coverage maps and the set algebra the rest of the crate
//! is built on.
//!
//! A [`CoverageMap`] holds two sets at a single [`Granularity`]: the units
//! that were executed and the instrumented universe they were drawn from.
//! Combining operators never mix granularities.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// File namespace used for edge units, which have no source file.
pub const EDGE_NAMESPACE: &str = "<edges>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverageError {
    #[error("granularity mismatch: {left} vs {right}")]
    GranularityMismatch { left: Granularity, right: Granularity },
    #[error("coverage universe is empty")]
    EmptyUniverse,
    #[error("unit {unit} does not have granularity {expected}")]
    WrongUnitGranularity { unit: String, expected: Granularity },
    #[error("covered unit {0} is not part of the universe")]
    NotInUniverse(String),
    #[error("invalid locator: {0}")]
    InvalidLocator(String),
}

pub type Result<T, E = CoverageError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Line,
    Branch,
    Function,
    Edge,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Line,
        Granularity::Branch,
        Granularity::Function,
        Granularity::Edge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Line => "line",
            Granularity::Branch => "branch",
            Granularity::Function => "function",
            Granularity::Edge => "edge",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "line" => Ok(Granularity::Line),
            "branch" => Ok(Granularity::Branch),
            "function" => Ok(Granularity::Function),
            "edge" => Ok(Granularity::Edge),
            other => Err(format!("unknown granularity `{other}`")),
        }
    }
}

/// Position of a unit inside its file. The variant determines the granularity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locator {
    Line(u32),
    Branch { line: u32, block: u32, branch: u32 },
    Function(String),
    Edge(u32),
}

impl Locator {
    pub fn granularity(&self) -> Granularity {
        match self {
            Locator::Line(_) => Granularity::Line,
            Locator::Branch { .. } => Granularity::Branch,
            Locator::Function(_) => Granularity::Function,
            Locator::Edge(_) => Granularity::Edge,
        }
    }

    /// Decode the JSON form used by mccov documents and reports: an integer
    /// for line and edge units, `[line, block, branch]` for branches and a
    /// string for functions.
    pub fn from_json(value: &serde_json::Value, granularity: Granularity) -> Result<Self> {
        use serde_json::Value;
        let as_u32 = |v: &Value| -> Option<u32> { v.as_u64().and_then(|n| u32::try_from(n).ok()) };
        let loc = match granularity {
            Granularity::Line => as_u32(value).map(Locator::Line),
            Granularity::Edge => as_u32(value).map(Locator::Edge),
            Granularity::Function => value.as_str().map(|s| Locator::Function(s.to_owned())),
            Granularity::Branch => match value.as_array().map(Vec::as_slice) {
                Some([l, b, br]) => match (as_u32(l), as_u32(b), as_u32(br)) {
                    (Some(line), Some(block), Some(branch)) => Some(Locator::Branch { line, block, branch }),
                    _ => None,
                },
                _ => None,
            },
        };
        let loc =
            loc.ok_or_else(|| CoverageError::InvalidLocator(format!("`{value}` is not a {granularity} locator")))?;
        loc.validate()?;
        Ok(loc)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Locator::Line(0) | Locator::Branch { line: 0, .. } => {
                Err(CoverageError::InvalidLocator("line numbers start at 1".to_owned()))
            }
            _ => Ok(()),
        }
    }
}

impl Serialize for Locator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Locator::Line(n) | Locator::Edge(n) => serializer.serialize_u32(*n),
            Locator::Function(name) => serializer.serialize_str(name),
            Locator::Branch { line, block, branch } => {
                let mut seq = serializer.serialize_seq(Some(3))?;
                seq.serialize_element(line)?;
                seq.serialize_element(block)?;
                seq.serialize_element(branch)?;
                seq.end()
            }
        }
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::Line(n) => write!(f, "{n}"),
            Locator::Branch { line, block, branch } => write!(f, "{line}:{block}:{branch}"),
            Locator::Function(name) => write!(f, "{name}"),
            Locator::Edge(n) => write!(f, "edge{n}"),
        }
    }
}

/// A single instrumented unit: a line, branch, function or bitmap edge.
///
/// Units order by granularity, then file, then locator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CoverageUnit {
    pub file: String,
    #[serde(rename = "loc")]
    pub locator: Locator,
}

impl CoverageUnit {
    pub fn new(file: impl Into<String>, locator: Locator) -> Result<Self> {
        locator.validate()?;
        Ok(Self {
            file: file.into(),
            locator,
        })
    }

    /// Shorthand for a line unit. Panics on line 0.
    pub fn line(file: impl Into<String>, line: u32) -> Self {
        assert!(line >= 1, "line numbers start at 1");
        Self {
            file: file.into(),
            locator: Locator::Line(line),
        }
    }

    pub fn edge(index: u32) -> Self {
        Self {
            file: EDGE_NAMESPACE.to_owned(),
            locator: Locator::Edge(index),
        }
    }

    pub fn granularity(&self) -> Granularity {
        self.locator.granularity()
    }
}

impl Ord for CoverageUnit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.granularity()
            .cmp(&other.granularity())
            .then_with(|| self.file.cmp(&other.file))
            .then_with(|| self.locator.cmp(&other.locator))
    }
}

impl PartialOrd for CoverageUnit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CoverageUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.locator)
    }
}

/// Covered units and the instrumented universe at one granularity.
///
/// Invariants, checked on construction and preserved by every operation:
/// all units share the map's granularity and `covered ⊆ universe`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    granularity: Granularity,
    covered: BTreeSet<CoverageUnit>,
    // Shared: maps from one build usually have the same universe.
    universe: Arc<BTreeSet<CoverageUnit>>,
}

impl CoverageMap {
    pub fn empty(granularity: Granularity) -> Self {
        Self {
            granularity,
            covered: BTreeSet::new(),
            universe: Arc::default(),
        }
    }

    pub fn new(
        granularity: Granularity,
        covered: BTreeSet<CoverageUnit>,
        universe: BTreeSet<CoverageUnit>,
    ) -> Result<Self> {
        Self::with_universe(granularity, covered, Arc::new(universe))
    }

    /// Like [`CoverageMap::new`], sharing an existing universe.
    pub fn with_universe(
        granularity: Granularity,
        covered: BTreeSet<CoverageUnit>,
        universe: Arc<BTreeSet<CoverageUnit>>,
    ) -> Result<Self> {
        for unit in universe.iter().chain(covered.iter()) {
            if unit.granularity() != granularity {
                return Err(CoverageError::WrongUnitGranularity {
                    unit: unit.to_string(),
                    expected: granularity,
                });
            }
        }
        if let Some(stray) = covered.difference(&universe).next() {
            return Err(CoverageError::NotInUniverse(stray.to_string()));
        }
        Ok(Self {
            granularity,
            covered,
            universe,
        })
    }

    /// Line map over a single file, mostly useful for fixtures and tests.
    pub fn from_lines(
        file: &str,
        covered: impl IntoIterator<Item = u32>,
        universe: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        let to_units = |lines: &mut dyn Iterator<Item = u32>| -> Result<BTreeSet<CoverageUnit>> {
            lines.map(|l| CoverageUnit::new(file, Locator::Line(l))).collect()
        };
        let covered = to_units(&mut covered.into_iter())?;
        let universe = to_units(&mut universe.into_iter())?;
        Self::new(Granularity::Line, covered, universe)
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn covered(&self) -> &BTreeSet<CoverageUnit> {
        &self.covered
    }

    pub fn universe(&self) -> &BTreeSet<CoverageUnit> {
        &self.universe
    }

    pub fn shared_universe(&self) -> &Arc<BTreeSet<CoverageUnit>> {
        &self.universe
    }

    pub fn is_covered(&self, unit: &CoverageUnit) -> bool {
        self.covered.contains(unit)
    }

    fn check_same_granularity(&self, other: &Self) -> Result<()> {
        if self.granularity != other.granularity {
            return Err(CoverageError::GranularityMismatch {
                left: self.granularity,
                right: other.granularity,
            });
        }
        Ok(())
    }

    fn combine(
        &self,
        other: &Self,
        covered: impl Fn(&BTreeSet<CoverageUnit>, &BTreeSet<CoverageUnit>) -> BTreeSet<CoverageUnit>,
    ) -> Result<Self> {
        self.check_same_granularity(other)?;
        Ok(Self {
            granularity: self.granularity,
            covered: covered(&self.covered, &other.covered),
            universe: self.universe_union(other),
        })
    }

    fn universe_union(&self, other: &Self) -> Arc<BTreeSet<CoverageUnit>> {
        if Arc::ptr_eq(&self.universe, &other.universe) || other.universe.is_subset(&self.universe) {
            Arc::clone(&self.universe)
        } else if self.universe.is_subset(&other.universe) {
            Arc::clone(&other.universe)
        } else {
            Arc::new(self.universe.union(&other.universe).cloned().collect())
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a.union(b).cloned().collect())
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a.intersection(b).cloned().collect())
    }

    /// Units covered by exactly one of the two maps: the differential coverage.
    pub fn symmetric_difference(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a.symmetric_difference(b).cloned().collect())
    }

    /// In-place union, used by accumulating loops.
    pub fn absorb(&mut self, other: &Self) -> Result<()> {
        self.check_same_granularity(other)?;
        self.covered.extend(other.covered.iter().cloned());
        self.universe = self.universe_union(other);
        Ok(())
    }

    /// `100 · |covered| / |universe|`.
    pub fn coverage_percent(&self) -> Result<f64> {
        percent(self.covered.len(), self.universe.len())
    }
}

pub(crate) fn percent(count: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(CoverageError::EmptyUniverse);
    }
    Ok(100.0 * count as f64 / total as f64)
}

/// Round to two decimals, the precision percentages are reported at.
pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Strip `prefix` (when present) and collapse `.` and `..` segments so that
/// paths emitted on different machines compare equal.
pub fn normalize_path(path: &str, prefix: Option<&str>) -> String {
    let path = path.replace('\\', "/");
    let mut rest = path.as_str();
    if let Some(prefix) = prefix.filter(|p| !p.is_empty()) {
        let prefix = prefix.replace('\\', "/");
        if let Some(stripped) = rest.strip_prefix(prefix.as_str()) {
            rest = stripped.trim_start_matches('/');
        }
    }
    let absolute = rest.starts_with('/');
    let mut parts: Vec<&str> = Vec::new();
    for segment in rest.split('/') {
        match segment {
            "" | "." => {}
            ".." => {
                if matches!(parts.last(), Some(last) if *last != "..") {
                    parts.pop();
                } else if !absolute {
                    parts.push("..");
                }
            }
            s => parts.push(s),
        }
    }
    let joined = parts.join("/");
    if absolute {
        format!("/{joined}")
    } else {
        joined
    }
}

/// Serialize a unit set as a JSON array, in the set's total order.
pub(crate) fn serialize_units<S: Serializer>(
    units: &BTreeSet<CoverageUnit>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(units.iter())
}
