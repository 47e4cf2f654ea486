//! Suite-level statistics and bug-fix overlap.
//!
//! - coefficient of variation (sample standard deviation over mean),
//! - Pearson product-moment correlation,
//! - seeded random subset sampling,
//! - unified-diff parsing into post-fix line locations and the overlap
//!   check between a metamorphic coverage set and those locations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{normalize_path, CoverageUnit, Granularity, Locator};
use crate::metamorphic::McReport;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("sample `{0}` is empty")]
    EmptySample(String),
    #[error("sample `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("mean is zero; the coefficient of variation is undefined")]
    ZeroMean,
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("subset size {size} exceeds the {available} available items")]
    SizeTooLarge { size: usize, available: usize },
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("malformed hunk header at diff line {line}: `{text}`")]
    MalformedHunkHeader { line: usize, text: String },
    #[error("overlap needs line granularity, report has {0}")]
    WrongGranularity(Granularity),
    #[error("sample input: {0}")]
    Input(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

/// A labelled column of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(AnalysisError::EmptySample(label));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite(label));
        }
        Ok(Self { label, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Standard deviation with the `n − 1` denominator.
    pub fn sample_std_dev(&self) -> Result<f64> {
        let n = self.values.len();
        if n < 2 {
            return Err(AnalysisError::TooFewValues(n));
        }
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        Ok((ss / (n - 1) as f64).sqrt())
    }
}

/// σ/μ with σ the sample (`n − 1`) standard deviation.
pub fn coefficient_of_variation(sample: &Sample) -> Result<f64> {
    let sd = sample.sample_std_dev()?;
    let mean = sample.mean();
    if mean == 0.0 {
        return Err(AnalysisError::ZeroMean);
    }
    Ok(sd / mean)
}

/// Pearson product-moment correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &Sample, y: &Sample) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFewValues(x.len()));
    }
    let (mx, my) = (x.mean(), y.mean());
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.values.iter().zip(&y.values) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(AnalysisError::ZeroVariance(x.label.clone()));
    }
    if syy == 0.0 {
        return Err(AnalysisError::ZeroVariance(y.label.clone()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One random subset drawn by [`sample_subsets`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetDraw<T> {
    pub size: usize,
    pub repeat: usize,
    /// Drawn items, in their original order.
    pub items: Vec<T>,
}

/// For every size, draw `repeats` subsets uniformly without replacement.
///
/// The stream comes from ChaCha8 seeded with `seed`, so the same arguments
/// give the same subsets on every platform.
pub fn sample_subsets<T: Clone>(items: &[T], sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<SubsetDraw<T>>> {
    if repeats == 0 {
        return Err(AnalysisError::NoRepeats);
    }
    if let Some(&size) = sizes.iter().find(|&&s| s > items.len()) {
        return Err(AnalysisError::SizeTooLarge {
            size,
            available: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sizes.len() * repeats);
    for &size in sizes {
        for repeat in 0..repeats {
            let mut picked = index::sample(&mut rng, items.len(), size).into_vec();
            picked.sort_unstable();
            out.push(SubsetDraw {
                size,
                repeat,
                items: picked.into_iter().map(|i| items[i].clone()).collect(),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sample input

/// Read samples from CSV: a header row of labels, one column per sample.
/// Empty cells are skipped, so columns may differ in length.
pub fn samples_from_csv(bytes: &[u8]) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| AnalysisError::Input(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| AnalysisError::Input(e.to_string()))?;
        for (col, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.trim_end_matches('%').parse().map_err(|_| {
                AnalysisError::Input(format!("row {}, column {}: `{cell}` is not a number", row + 2, col + 1))
            })?;
            columns
                .get_mut(col)
                .ok_or_else(|| AnalysisError::Input(format!("row {} has more cells than the header", row + 2)))?
                .push(v);
        }
    }
    labels
        .into_iter()
        .zip(columns)
        .map(|(l, v)| Sample::new(l, v))
        .collect()
}

/// Read samples from `{"samples":[{"label":..,"values":[..]}]}`.
pub fn samples_from_json(bytes: &[u8]) -> Result<Vec<Sample>> {
    #[derive(Deserialize)]
    struct Doc {
        samples: Vec<Sample>,
    }
    let doc: Doc = serde_json::from_slice(bytes).map_err(|e| AnalysisError::Input(e.to_string()))?;
    doc.samples
        .into_iter()
        .map(|s| Sample::new(s.label, s.values))
        .collect()
}

// ---------------------------------------------------------------------------
// Bug-fix locations

/// Post-fix line numbers touched by a fix, per file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FixLocations {
    pub files: BTreeMap<String, BTreeSet<u32>>,
}

impl FixLocations {
    pub fn is_empty(&self) -> bool {
        self.files.values().all(BTreeSet::is_empty)
    }

    pub fn insert(&mut self, file: &str, line: u32) {
        self.files.entry(file.to_owned()).or_default().insert(line.max(1));
    }

    pub fn units(&self) -> impl Iterator<Item = CoverageUnit> + '_ {
        self.files
            .iter()
            .flat_map(|(f, lines)| lines.iter().map(move |&l| CoverageUnit::line(f.clone(), l)))
    }
}

fn diff_path(raw: &str) -> Option<String> {
    let path = raw.split('\t').next().unwrap_or(raw).trim();
    if path == "/dev/null" {
        return None;
    }
    let path = path.strip_prefix("b/").unwrap_or(path);
    Some(normalize_path(path, None))
}

/// `@@ -a[,b] +c[,d] @@` → (old_count, new_start, new_count).
fn parse_hunk_header(text: &str) -> Option<(u32, u32, u32)> {
    let body = text.strip_prefix("@@ ")?;
    let end = body.find(" @@")?;
    let mut ranges = body[..end].split_whitespace();
    let old = ranges.next()?.strip_prefix('-')?;
    let new = ranges.next()?.strip_prefix('+')?;
    if ranges.next().is_some() {
        return None;
    }
    let range = |r: &str| -> Option<(u32, u32)> {
        match r.split_once(',') {
            Some((s, c)) => Some((s.parse().ok()?, c.parse().ok()?)),
            None => Some((r.parse().ok()?, 1)),
        }
    };
    let (_, old_count) = range(old)?;
    let (new_start, new_count) = range(new)?;
    Some((old_count, new_start, new_count))
}

struct Hunk {
    old_left: u32,
    new_left: u32,
    new_start: u32,
    new_count: u32,
    next_new: u32,
    added: bool,
    deletion_anchor: Option<u32>,
}

/// Extract post-fix locations from a unified diff.
///
/// Every added line is recorded at its post-image line number. A hunk that
/// only deletes lines is recorded at the post-image line where the deletion
/// happened. Lines inside a hunk that carry no diff prefix (elision markers
/// such as `...`) are skipped without advancing the line counters.
pub fn parse_unified_diff(text: &[u8]) -> Result<FixLocations> {
    let text = String::from_utf8_lossy(text);
    let mut fix = FixLocations::default();
    let mut file: Option<String> = None;
    let mut hunk: Option<Hunk> = None;

    let finish = |hunk: Hunk, file: &Option<String>, fix: &mut FixLocations| {
        if let (false, Some(anchor), Some(f)) = (hunk.added, hunk.deletion_anchor, file) {
            let last = hunk.new_start + hunk.new_count.saturating_sub(1);
            fix.insert(f, anchor.min(last.max(1)));
        }
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if let Some(h) = hunk.as_mut() {
            if h.old_left > 0 || h.new_left > 0 {
                if line.starts_with('+') {
                    if let Some(f) = &file {
                        fix.insert(f, h.next_new);
                    }
                    h.added = true;
                    h.next_new += 1;
                    h.new_left = h.new_left.saturating_sub(1);
                    continue;
                } else if line.starts_with('-') {
                    h.deletion_anchor.get_or_insert(if h.new_count == 0 {
                        h.new_start.max(1)
                    } else {
                        h.next_new
                    });
                    h.old_left = h.old_left.saturating_sub(1);
                    continue;
                } else if line.starts_with(' ') || line.is_empty() {
                    h.next_new += 1;
                    h.old_left = h.old_left.saturating_sub(1);
                    h.new_left = h.new_left.saturating_sub(1);
                    continue;
                } else if !line.starts_with("@@") && !line.starts_with("diff ") {
                    // `\ No newline at end of file` or an elision marker.
                    continue;
                }
            }
            let done = hunk.take().expect("hunk is open");
            finish(done, &file, &mut fix);
        }

        if let Some(rest) = line.strip_prefix("+++ ") {
            file = diff_path(rest);
        } else if line.starts_with("--- ") || line.starts_with("diff ") {
            if line.starts_with("diff ") {
                file = None;
            }
        } else if line.starts_with("@@") {
            let (old_count, new_start, new_count) =
                parse_hunk_header(line).ok_or_else(|| AnalysisError::MalformedHunkHeader {
                    line: lineno,
                    text: line.to_owned(),
                })?;
            hunk = Some(Hunk {
                old_left: old_count,
                new_left: new_count,
                new_start,
                new_count,
                next_new: new_start.max(1),
                added: false,
                deletion_anchor: None,
            });
        }
    }
    if let Some(h) = hunk {
        finish(h, &file, &mut fix);
    }
    fix.files.retain(|_, lines| !lines.is_empty());
    Ok(fix)
}

fn paths_match(a: &str, b: &str) -> bool {
    fn ends_with_path(long: &str, short: &str) -> bool {
        long == short || long.ends_with(&format!("/{short}"))
    }
    ends_with_path(a, b) || ends_with_path(b, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapVerdict {
    Overlapping,
    NonOverlapping,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapResult {
    pub verdict: OverlapVerdict,
    /// Metamorphic coverage units that fall on a fix location.
    #[serde(serialize_with = "crate::coverage::serialize_units")]
    pub intersection: BTreeSet<CoverageUnit>,
}

/// Does the suite's metamorphic coverage touch at least one fixed line?
///
/// File paths match when equal or when one is a path suffix of the other,
/// so absolute coverage paths line up with repository-relative diff paths.
pub fn overlap(report: &McReport, fix: &FixLocations) -> Result<OverlapResult> {
    if report.granularity != Granularity::Line {
        return Err(AnalysisError::WrongGranularity(report.granularity));
    }
    let intersection: BTreeSet<CoverageUnit> = report
        .suite_mc
        .iter()
        .filter(|unit| {
            let Locator::Line(l) = unit.locator else {
                return false;
            };
            fix.files
                .iter()
                .any(|(f, lines)| lines.contains(&l) && paths_match(&unit.file, f))
        })
        .cloned()
        .collect();
    let verdict = if intersection.is_empty() {
        OverlapVerdict::NonOverlapping
    } else {
        OverlapVerdict::Overlapping
    };
    Ok(OverlapResult { verdict, intersection })
}
