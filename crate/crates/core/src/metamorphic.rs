//! Metamorphic coverage for test pairs and suites.
//!
//! For a pair `t = (t_a, t_b)` the metamorphic coverage is the symmetric
//! difference of the coverage of both sides; for a suite it is the union of
//! the per-pair sets. A side may consist of several inputs, in which case its
//! coverage is the union over those inputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{
    percent, round2, serialize_units, CoverageError, CoverageMap, CoverageUnit, Granularity, Locator,
};
use crate::ingest::{load_artifact, ArtifactFormat, IngestError, IngestOptions};

pub const REPORT_FORMAT: &str = "mc-report";
pub const REPORT_VERSION: u32 = 1;
/// Default cap on the number of units listed per pair in a report.
pub const DEFAULT_UNIT_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum McError {
    #[error("pair `{0}` has an empty side")]
    EmptySide(String),
    #[error("suite contains no pairs")]
    EmptySuite,
    #[error("pair `{pair}`: the two sides were measured on different universes ({a} vs {b} units)")]
    UniverseMismatch { pair: String, a: usize, b: usize },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("report: {0}")]
    Report(String),
}

impl McError {
    /// True for contract violations between inputs (mismatched granularities
    /// or universes) as opposed to unreadable input.
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            McError::UniverseMismatch { .. } | McError::Coverage(CoverageError::GranularityMismatch { .. })
        )
    }
}

pub type Result<T, E = McError> = std::result::Result<T, E>;

/// A metamorphic test pair, each side holding the coverage of one or more inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPair {
    id: String,
    side_a: Vec<CoverageMap>,
    side_b: Vec<CoverageMap>,
}

impl TestPair {
    pub fn new(id: impl Into<String>, side_a: Vec<CoverageMap>, side_b: Vec<CoverageMap>) -> Result<Self> {
        let id = id.into();
        if side_a.is_empty() || side_b.is_empty() {
            return Err(McError::EmptySide(id));
        }
        let g = side_a[0].granularity();
        if let Some(bad) = side_a.iter().chain(&side_b).find(|m| m.granularity() != g) {
            return Err(CoverageError::GranularityMismatch {
                left: g,
                right: bad.granularity(),
            }
            .into());
        }
        Ok(Self { id, side_a, side_b })
    }

    /// Pair with a single input on each side.
    pub fn single(id: impl Into<String>, a: CoverageMap, b: CoverageMap) -> Result<Self> {
        Self::new(id, vec![a], vec![b])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn side_a(&self) -> &[CoverageMap] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[CoverageMap] {
        &self.side_b
    }

    pub fn granularity(&self) -> Granularity {
        self.side_a[0].granularity()
    }

    /// The same pair with its sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            id: self.id.clone(),
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
        }
    }
}

/// Union of the coverage of all inputs that make up one side.
pub fn side_coverage(side: &[CoverageMap]) -> Result<CoverageMap> {
    let (first, rest) = side.split_first().ok_or_else(|| McError::EmptySide(String::new()))?;
    let mut acc = first.clone();
    for m in rest {
        acc.absorb(m)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct McOptions {
    /// Reject pairs whose sides have different universes.
    pub strict: bool,
    /// Maximum number of units listed per pair in a report.
    pub unit_cap: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            strict: true,
            unit_cap: DEFAULT_UNIT_CAP,
        }
    }
}

/// Metamorphic coverage of one pair.
pub fn mc_pair(pair: &TestPair, strict: bool) -> Result<CoverageMap> {
    let a = side_coverage(&pair.side_a).map_err(|e| rename_side(e, &pair.id))?;
    let b = side_coverage(&pair.side_b).map_err(|e| rename_side(e, &pair.id))?;
    if a.universe() != b.universe() {
        if strict {
            return Err(McError::UniverseMismatch {
                pair: pair.id.clone(),
                a: a.universe().len(),
                b: b.universe().len(),
            });
        }
        warn!(
            "pair `{}`: sides have different universes ({} vs {} units), using their union",
            pair.id,
            a.universe().len(),
            b.universe().len()
        );
    }
    Ok(a.symmetric_difference(&b)?)
}

fn rename_side(e: McError, id: &str) -> McError {
    match e {
        McError::EmptySide(_) => McError::EmptySide(id.to_owned()),
        other => other,
    }
}

/// Per-pair entry in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    pub id: String,
    pub mc_size: usize,
    #[serde(serialize_with = "serialize_units")]
    pub mc_units: BTreeSet<CoverageUnit>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

/// Suite-level metamorphic coverage report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub format: &'static str,
    pub version: u32,
    pub granularity: Granularity,
    pub universe_size: usize,
    #[serde(serialize_with = "serialize_percent")]
    pub mc_percent: f64,
    #[serde(serialize_with = "serialize_percent")]
    pub union_coverage_percent: f64,
    #[serde(serialize_with = "serialize_units")]
    pub suite_mc: BTreeSet<CoverageUnit>,
    pub pairs: Vec<PairEntry>,
}

fn serialize_percent<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*v))
}

impl McReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("reports always serialize");
        out.push(b'\n');
        out
    }

    /// Read a report produced by [`McReport::to_json`]. Percentages come
    /// back at report precision (two decimals).
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        use serde_json::Value;
        let err = |m: &str| McError::Report(m.to_owned());
        let doc: Value = serde_json::from_slice(bytes).map_err(|e| McError::Report(e.to_string()))?;
        if doc.get("format").and_then(Value::as_str) != Some(REPORT_FORMAT) {
            return Err(err("`format` must be \"mc-report\""));
        }
        if doc.get("version").and_then(Value::as_u64) != Some(u64::from(REPORT_VERSION)) {
            return Err(err("`version` must be 1"));
        }
        let granularity: Granularity = doc
            .get("granularity")
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing `granularity`"))?
            .parse()
            .map_err(|e: String| McError::Report(e))?;
        let units = |v: Option<&Value>, what: &str| -> Result<BTreeSet<CoverageUnit>> {
            let arr = v
                .and_then(Value::as_array)
                .ok_or_else(|| McError::Report(format!("`{what}` must be an array")))?;
            arr.iter()
                .map(|u| {
                    let file = u
                        .get("file")
                        .and_then(Value::as_str)
                        .ok_or_else(|| McError::Report(format!("unit in `{what}` lacks `file`")))?;
                    let loc = u
                        .get("loc")
                        .ok_or_else(|| McError::Report(format!("unit in `{what}` lacks `loc`")))?;
                    let locator = Locator::from_json(loc, granularity)?;
                    Ok(CoverageUnit::new(file, locator)?)
                })
                .collect()
        };
        let number = |key: &str| -> Result<f64> {
            doc.get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| McError::Report(format!("missing `{key}`")))
        };
        let mut pairs = Vec::new();
        for p in doc
            .get("pairs")
            .and_then(Value::as_array)
            .ok_or_else(|| err("`pairs` must be an array"))?
        {
            pairs.push(PairEntry {
                id: p
                    .get("id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| err("pair lacks `id`"))?
                    .to_owned(),
                mc_size: p
                    .get("mc_size")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| err("pair lacks `mc_size`"))? as usize,
                mc_units: units(p.get("mc_units"), "mc_units")?,
                truncated: p.get("truncated").and_then(Value::as_bool).unwrap_or(false),
            });
        }
        Ok(Self {
            format: REPORT_FORMAT,
            version: REPORT_VERSION,
            granularity,
            universe_size: number("universe_size")? as usize,
            mc_percent: number("mc_percent")?,
            union_coverage_percent: number("union_coverage_percent")?,
            suite_mc: units(doc.get("suite_mc"), "suite_mc")?,
            pairs,
        })
    }
}

/// Suite result before it is rendered into a report.
#[derive(Debug, Clone)]
pub struct SuiteCoverage {
    /// Per-pair metamorphic coverage, in input order.
    pub per_pair: Vec<(String, CoverageMap)>,
    /// MC(T), with the union of all universes.
    pub suite_mc: CoverageMap,
    /// Union of every side of every pair.
    pub union: CoverageMap,
}

/// Compute per-pair and suite metamorphic coverage.
pub fn suite_coverage(pairs: &[TestPair], strict: bool) -> Result<SuiteCoverage> {
    let first = pairs.first().ok_or(McError::EmptySuite)?;
    let g = first.granularity();
    let mut suite_mc = CoverageMap::empty(g);
    let mut union = CoverageMap::empty(g);
    let mut per_pair = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mc = mc_pair(pair, strict)?;
        suite_mc.absorb(&mc)?;
        for side in pair.side_a.iter().chain(&pair.side_b) {
            union.absorb(side)?;
        }
        per_pair.push((pair.id.clone(), mc));
    }
    Ok(SuiteCoverage {
        per_pair,
        suite_mc,
        union,
    })
}

/// Metamorphic coverage report for a suite of pairs.
///
/// Both percentages share the union universe as denominator.
pub fn mc_suite(pairs: &[TestPair], opts: &McOptions) -> Result<McReport> {
    let suite = suite_coverage(pairs, opts.strict)?;
    let universe_size = suite.union.universe().len();
    let entries = suite
        .per_pair
        .into_iter()
        .map(|(id, mc)| {
            let size = mc.covered().len();
            PairEntry {
                id,
                mc_size: size,
                mc_units: mc.covered().iter().take(opts.unit_cap).cloned().collect(),
                truncated: size > opts.unit_cap,
            }
        })
        .collect();
    Ok(McReport {
        format: REPORT_FORMAT,
        version: REPORT_VERSION,
        granularity: suite.suite_mc.granularity(),
        universe_size,
        mc_percent: percent(suite.suite_mc.covered().len(), universe_size)?,
        union_coverage_percent: percent(suite.union.covered().len(), universe_size)?,
        suite_mc: suite.suite_mc.covered().clone(),
        pairs: entries,
    })
}

// ---------------------------------------------------------------------------
// Pair manifests

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub id: String,
    pub a: Vec<PathBuf>,
    pub b: Vec<PathBuf>,
}

/// `{"pairs":[{"id":..,"a":[paths],"b":[paths]}]}`; relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestPair>,
}

impl Manifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| {
            McError::Ingest(IngestError::Schema {
                field: "manifest".to_owned(),
                message: e.to_string(),
            })
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut manifest = Self::from_json(&bytes)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for pair in &mut manifest.pairs {
            for p in pair.a.iter_mut().chain(pair.b.iter_mut()) {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(manifest)
    }

    /// Load every artifact and assemble the pairs.
    pub fn load_pairs(
        &self,
        format: Option<ArtifactFormat>,
        granularity: Granularity,
        opts: &IngestOptions,
    ) -> Result<Vec<TestPair>> {
        let load_side = |paths: &[PathBuf]| -> Result<Vec<CoverageMap>> {
            paths
                .iter()
                .map(|p| Ok(load_artifact(p, format, granularity, opts)?))
                .collect()
        };
        self.pairs
            .iter()
            .map(|p| TestPair::new(p.id.clone(), load_side(&p.a)?, load_side(&p.b)?))
            .collect()
    }
}
