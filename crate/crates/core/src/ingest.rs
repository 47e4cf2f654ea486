//! Parsers for per-input coverage artifacts and the mccov JSON writer.
//!
//! Three inputs are understood:
//!
//! - LCOV tracefiles (`TN`, `SF`, `FN`, `FNDA`, `DA`, `BRDA`, `end_of_record`;
//!   summary records are ignored and recomputed),
//! - mccov JSON v1, the crate's own interchange document,
//! - raw edge bitmaps, one byte per edge.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{normalize_path, CoverageError, CoverageMap, CoverageUnit, Granularity, Locator, EDGE_NAMESPACE};

/// Default AFL-style map size.
pub const DEFAULT_MAP_SIZE: usize = 1 << 16;

pub const MCCOV_FORMAT: &str = "mccov";
pub const MCCOV_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message} (`{token}`)")]
    Parse {
        line: usize,
        token: String,
        message: String,
    },
    #[error("{0} coverage is not available from LCOV input")]
    UnsupportedGranularity(Granularity),
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },
    #[error("bitmap has {actual} bytes, expected {expected}")]
    BadLength { actual: usize, expected: usize },
    #[error("cannot infer artifact format from `{0}`; pass an explicit format")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<IngestError>,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactFormat {
    Lcov,
    MccovJson,
    Bitmap,
}

impl ArtifactFormat {
    /// `.info`/`.lcov` are LCOV, `.json` is mccov, `.map`/`.bin` is a bitmap.
    pub fn infer(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("info") | Some("lcov") => Ok(ArtifactFormat::Lcov),
            Some("json") => Ok(ArtifactFormat::MccovJson),
            Some("map") | Some("bin") => Ok(ArtifactFormat::Bitmap),
            _ => Err(IngestError::UnknownFormat(path.display().to_string())),
        }
    }
}

impl std::str::FromStr for ArtifactFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lcov" | "info" => Ok(ArtifactFormat::Lcov),
            "json" | "mccov" => Ok(ArtifactFormat::MccovJson),
            "bitmap" | "map" => Ok(ArtifactFormat::Bitmap),
            other => Err(format!("unknown artifact format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Prefix removed from source paths before comparison.
    pub strip_prefix: Option<String>,
    /// Declared bitmap length; `None` means [`DEFAULT_MAP_SIZE`].
    pub map_size: Option<usize>,
}

/// All maps extracted from one artifact.
#[derive(Debug, Clone)]
pub struct CoverageArtifact {
    pub source: String,
    pub format: ArtifactFormat,
    pub maps: BTreeMap<Granularity, CoverageMap>,
}

// ---------------------------------------------------------------------------
// LCOV

#[derive(Debug, Default)]
struct LcovFile {
    lines: BTreeMap<u32, u64>,
    branches: BTreeMap<(u32, u32, u32), u64>,
    functions: BTreeMap<String, u64>,
}

fn parse_err(line: usize, token: &str, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        token: token.to_owned(),
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(line: usize, token: &str) -> Result<T> {
    token
        .trim()
        .parse()
        .map_err(|_| parse_err(line, token, "expected a non-negative integer"))
}

fn parse_lcov_records(text: &[u8], opts: &IngestOptions) -> Result<BTreeMap<String, LcovFile>> {
    let text = std::str::from_utf8(text).map_err(|e| parse_err(0, "", format!("tracefile is not UTF-8: {e}")))?;
    let mut files: BTreeMap<String, LcovFile> = BTreeMap::new();
    let mut current: Option<(String, LcovFile)> = None;

    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
        if line.is_empty() {
            continue;
        }
        if line == "end_of_record" {
            match current.take() {
                Some((path, data)) => merge_lcov_file(files.entry(path).or_default(), data),
                None => return Err(parse_err(lineno, line, "end_of_record without SF")),
            }
            continue;
        }
        let (kind, value) = line
            .split_once(':')
            .ok_or_else(|| parse_err(lineno, line, "expected `<KIND>:<fields>`"))?;
        match kind {
            "TN" | "VER" | "LF" | "LH" | "FNF" | "FNH" | "BRF" | "BRH" => {}
            "SF" => {
                if current.is_some() {
                    return Err(parse_err(lineno, line, "SF inside an unterminated record"));
                }
                current = Some((
                    normalize_path(value.trim(), opts.strip_prefix.as_deref()),
                    LcovFile::default(),
                ));
            }
            "DA" | "BRDA" | "FN" | "FNDA" => {
                let Some((_, data)) = current.as_mut() else {
                    return Err(parse_err(lineno, line, "record outside of an SF block"));
                };
                parse_lcov_data(kind, value, lineno, data)?;
            }
            other => return Err(parse_err(lineno, other, "unknown record kind")),
        }
    }
    if let Some((path, _)) = current {
        return Err(parse_err(text.lines().count(), &path, "missing end_of_record for SF"));
    }
    Ok(files)
}

fn parse_lcov_data(kind: &str, value: &str, lineno: usize, data: &mut LcovFile) -> Result<()> {
    let positive_line = |token: &str| -> Result<u32> {
        let n: u32 = field(lineno, token)?;
        if n == 0 {
            return Err(parse_err(lineno, token, "line numbers start at 1"));
        }
        Ok(n)
    };
    match kind {
        "DA" => {
            let mut parts = value.split(',');
            let (Some(l), Some(c)) = (parts.next(), parts.next()) else {
                return Err(parse_err(lineno, value, "DA needs `<line>,<count>`"));
            };
            let l = positive_line(l)?;
            let c: u64 = field(lineno, c)?;
            let slot = data.lines.entry(l).or_default();
            *slot = slot.saturating_add(c);
        }
        "BRDA" => {
            let parts: Vec<&str> = value.split(',').collect();
            let [l, block, branch, taken] = parts.as_slice() else {
                return Err(parse_err(lineno, value, "BRDA needs `<line>,<block>,<branch>,<taken>`"));
            };
            let key = (positive_line(l)?, field(lineno, block)?, field(lineno, branch)?);
            let taken: u64 = if taken.trim() == "-" { 0 } else { field(lineno, taken)? };
            let slot = data.branches.entry(key).or_default();
            *slot = slot.saturating_add(taken);
        }
        "FN" => {
            let Some((l, name)) = value.split_once(',') else {
                return Err(parse_err(lineno, value, "FN needs `<line>,<name>`"));
            };
            positive_line(l)?;
            data.functions.entry(name.trim().to_owned()).or_default();
        }
        "FNDA" => {
            let Some((c, name)) = value.split_once(',') else {
                return Err(parse_err(lineno, value, "FNDA needs `<count>,<name>`"));
            };
            let c: u64 = field(lineno, c)?;
            let slot = data.functions.entry(name.trim().to_owned()).or_default();
            *slot = slot.saturating_add(c);
        }
        _ => unreachable!("dispatch covers every data record"),
    }
    Ok(())
}

fn merge_lcov_file(into: &mut LcovFile, from: LcovFile) {
    for (k, c) in from.lines {
        let slot = into.lines.entry(k).or_default();
        *slot = slot.saturating_add(c);
    }
    for (k, c) in from.branches {
        let slot = into.branches.entry(k).or_default();
        *slot = slot.saturating_add(c);
    }
    for (k, c) in from.functions {
        let slot = into.functions.entry(k).or_default();
        *slot = slot.saturating_add(c);
    }
}

fn project_lcov(files: &BTreeMap<String, LcovFile>, granularity: Granularity) -> Result<CoverageMap> {
    let mut covered = BTreeSet::new();
    let mut universe = BTreeSet::new();
    let mut add = |unit: CoverageUnit, count: u64| {
        if count > 0 {
            covered.insert(unit.clone());
        }
        universe.insert(unit);
    };
    for (path, data) in files {
        match granularity {
            Granularity::Line => {
                for (&l, &c) in &data.lines {
                    add(CoverageUnit::new(path.as_str(), Locator::Line(l))?, c);
                }
            }
            Granularity::Branch => {
                for (&(line, block, branch), &c) in &data.branches {
                    add(
                        CoverageUnit::new(path.as_str(), Locator::Branch { line, block, branch })?,
                        c,
                    );
                }
            }
            Granularity::Function => {
                for (name, &c) in &data.functions {
                    add(CoverageUnit::new(path.as_str(), Locator::Function(name.clone()))?, c);
                }
            }
            Granularity::Edge => return Err(IngestError::UnsupportedGranularity(granularity)),
        }
    }
    Ok(CoverageMap::new(granularity, covered, universe)?)
}

/// Parse an LCOV tracefile at one granularity.
///
/// A unit with count 0 is in the universe but not covered; `BRDA` entries
/// whose taken field is `-` count as never taken. Duplicate records for the
/// same unit have their counts summed.
pub fn parse_lcov(text: &[u8], granularity: Granularity, opts: &IngestOptions) -> Result<CoverageMap> {
    if granularity == Granularity::Edge {
        return Err(IngestError::UnsupportedGranularity(granularity));
    }
    let files = parse_lcov_records(text, opts)?;
    project_lcov(&files, granularity)
}

/// Parse an LCOV tracefile once into line, branch and function maps.
pub fn parse_lcov_artifact(source: &str, text: &[u8], opts: &IngestOptions) -> Result<CoverageArtifact> {
    let files = parse_lcov_records(text, opts)?;
    let mut maps = BTreeMap::new();
    for g in [Granularity::Line, Granularity::Branch, Granularity::Function] {
        maps.insert(g, project_lcov(&files, g)?);
    }
    Ok(CoverageArtifact {
        source: source.to_owned(),
        format: ArtifactFormat::Lcov,
        maps,
    })
}

// ---------------------------------------------------------------------------
// mccov JSON v1

#[derive(Serialize)]
struct McCovDocOut<'a> {
    format: &'static str,
    version: u32,
    granularity: Granularity,
    files: Vec<McCovFileOut<'a>>,
}

#[derive(Serialize)]
struct McCovFileOut<'a> {
    path: &'a str,
    units: Vec<McCovUnitOut<'a>>,
}

#[derive(Serialize)]
struct McCovUnitOut<'a> {
    loc: &'a Locator,
    count: u64,
}

/// Serialize a map as an mccov JSON v1 document.
///
/// Files and units are emitted in ascending order; covered units carry
/// count 1 and uncovered ones count 0. The output ends with a newline.
pub fn emit_mccov_json(map: &CoverageMap) -> Vec<u8> {
    let mut files: Vec<McCovFileOut<'_>> = Vec::new();
    for unit in map.universe() {
        let entry = McCovUnitOut {
            loc: &unit.locator,
            count: u64::from(map.is_covered(unit)),
        };
        match files.last_mut() {
            Some(f) if f.path == unit.file => f.units.push(entry),
            _ => files.push(McCovFileOut {
                path: &unit.file,
                units: vec![entry],
            }),
        }
    }
    let doc = McCovDocOut {
        format: MCCOV_FORMAT,
        version: MCCOV_VERSION,
        granularity: map.granularity(),
        files,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("mccov document always serializes");
    out.push(b'\n');
    out
}

fn schema_err(field: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// Parse an mccov JSON v1 document.
///
/// When `granularity` is given it must match the document's declared one.
pub fn parse_mccov_json(text: &[u8], granularity: Option<Granularity>, opts: &IngestOptions) -> Result<CoverageMap> {
    use serde_json::Value;
    let doc: Value = serde_json::from_slice(text).map_err(|e| schema_err("$", format!("invalid JSON: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| schema_err("$", "expected an object"))?;
    let get = |key: &str| obj.get(key).ok_or_else(|| schema_err(key, "missing field"));

    if get("format")?.as_str() != Some(MCCOV_FORMAT) {
        return Err(schema_err("format", "expected \"mccov\""));
    }
    if get("version")?.as_u64() != Some(u64::from(MCCOV_VERSION)) {
        return Err(schema_err("version", "expected 1"));
    }
    let declared: Granularity = get("granularity")?
        .as_str()
        .ok_or_else(|| schema_err("granularity", "expected a string"))?
        .parse()
        .map_err(|e: String| schema_err("granularity", e))?;
    if let Some(wanted) = granularity {
        if wanted != declared {
            return Err(schema_err(
                "granularity",
                format!("document holds {declared} coverage, {wanted} requested"),
            ));
        }
    }
    let files = get("files")?
        .as_array()
        .ok_or_else(|| schema_err("files", "expected an array"))?;

    let mut covered = BTreeSet::new();
    let mut universe = BTreeSet::new();
    for (fi, file) in files.iter().enumerate() {
        let at = |k: &str| format!("files[{fi}].{k}");
        let path = file
            .get("path")
            .ok_or_else(|| schema_err(at("path"), "missing field"))?
            .as_str()
            .ok_or_else(|| schema_err(at("path"), "expected a string"))?;
        let path = if declared == Granularity::Edge {
            path.to_owned()
        } else {
            normalize_path(path, opts.strip_prefix.as_deref())
        };
        let units = file
            .get("units")
            .ok_or_else(|| schema_err(at("units"), "missing field"))?
            .as_array()
            .ok_or_else(|| schema_err(at("units"), "expected an array"))?;
        for (ui, unit) in units.iter().enumerate() {
            let at = |k: &str| format!("files[{fi}].units[{ui}].{k}");
            let loc = unit.get("loc").ok_or_else(|| schema_err(at("loc"), "missing field"))?;
            let loc = Locator::from_json(loc, declared).map_err(|e| schema_err(at("loc"), e.to_string()))?;
            let count = unit
                .get("count")
                .ok_or_else(|| schema_err(at("count"), "missing field"))?
                .as_u64()
                .ok_or_else(|| schema_err(at("count"), "expected a non-negative integer"))?;
            let unit = CoverageUnit {
                file: path.clone(),
                locator: loc,
            };
            if count > 0 {
                covered.insert(unit.clone());
            }
            universe.insert(unit);
        }
    }
    Ok(CoverageMap::new(declared, covered, universe)?)
}

// ---------------------------------------------------------------------------
// Bitmaps

/// Read a raw edge bitmap: every byte is one edge, nonzero means hit.
pub fn parse_bitmap(bytes: &[u8], map_size: Option<usize>) -> Result<CoverageMap> {
    let expected = map_size.unwrap_or(DEFAULT_MAP_SIZE);
    if bytes.len() != expected {
        return Err(IngestError::BadLength {
            actual: bytes.len(),
            expected,
        });
    }
    let mut covered = BTreeSet::new();
    let mut universe = BTreeSet::new();
    for (i, &b) in bytes.iter().enumerate() {
        let index = u32::try_from(i).map_err(|_| IngestError::BadLength {
            actual: bytes.len(),
            expected,
        })?;
        let unit = CoverageUnit {
            file: EDGE_NAMESPACE.to_owned(),
            locator: Locator::Edge(index),
        };
        if b > 0 {
            covered.insert(unit.clone());
        }
        universe.insert(unit);
    }
    Ok(CoverageMap::new(Granularity::Edge, covered, universe)?)
}

// ---------------------------------------------------------------------------
// Dispatch

/// Parse `bytes` in `format` at `granularity`.
pub fn parse_artifact(
    bytes: &[u8],
    format: ArtifactFormat,
    granularity: Granularity,
    opts: &IngestOptions,
) -> Result<CoverageMap> {
    match format {
        ArtifactFormat::Lcov => parse_lcov(bytes, granularity, opts),
        ArtifactFormat::MccovJson => parse_mccov_json(bytes, Some(granularity), opts),
        ArtifactFormat::Bitmap => {
            if granularity != Granularity::Edge {
                return Err(schema_err(
                    "granularity",
                    format!("bitmaps carry edge coverage, {granularity} requested"),
                ));
            }
            parse_bitmap(bytes, opts.map_size)
        }
    }
}

/// Read and parse a file, inferring the format from its extension unless
/// `format` is given. Errors name the file.
pub fn load_artifact(
    path: &Path,
    format: Option<ArtifactFormat>,
    granularity: Granularity,
    opts: &IngestOptions,
) -> Result<CoverageMap> {
    let wrap = |e: IngestError| IngestError::File {
        path: path.display().to_string(),
        source: Box::new(e),
    };
    let format = match format {
        Some(f) => f,
        None => ArtifactFormat::infer(path)?,
    };
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_artifact(&bytes, format, granularity, opts).map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IngestOptions {
        IngestOptions::default()
    }

    fn line_units(m: &BTreeSet<CoverageUnit>) -> Vec<String> {
        m.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn lcov_line_semantics() {
        let m = parse_lcov(b"SF:a.c\nDA:3,1\nDA:5,0\nend_of_record\n", Granularity::Line, &opts()).unwrap();
        assert_eq!(line_units(m.covered()), vec!["a.c:3"]);
        assert_eq!(line_units(m.universe()), vec!["a.c:3", "a.c:5"]);
    }

    #[test]
    fn lcov_branch_dash_is_not_taken() {
        let text = b"SF:a.c\nBRDA:10,0,1,-\nBRDA:10,0,0,4\nend_of_record\n";
        let m = parse_lcov(text, Granularity::Branch, &opts()).unwrap();
        assert_eq!(line_units(m.universe()), vec!["a.c:10:0:0", "a.c:10:0:1"]);
        assert_eq!(line_units(m.covered()), vec!["a.c:10:0:0"]);
    }

    #[test]
    fn lcov_functions_and_summaries() {
        let text = "TN:t\r\nSF:./src/../a.c\r\nFN:1,main\r\nFN:7,helper\r\nFNDA:2,main\r\nFNDA:0,helper\r\n\
                    FNF:2\r\nFNH:1\r\nDA:1,1\r\nLF:99\r\nLH:99\r\nend_of_record\r\n";
        let m = parse_lcov(text.as_bytes(), Granularity::Function, &opts()).unwrap();
        assert_eq!(line_units(m.universe()), vec!["a.c:helper", "a.c:main"]);
        assert_eq!(line_units(m.covered()), vec!["a.c:main"]);
        let lines = parse_lcov(text.as_bytes(), Granularity::Line, &opts()).unwrap();
        assert_eq!(lines.universe().len(), 1);
    }

    #[test]
    fn lcov_duplicate_da_sums_and_checksum_ignored() {
        let text = b"SF:a.c\nDA:4,0\nDA:4,0,abcd\nDA:6,0\nDA:6,3\nend_of_record\n";
        let m = parse_lcov(text, Granularity::Line, &opts()).unwrap();
        assert_eq!(line_units(m.covered()), vec!["a.c:6"]);
        assert_eq!(m.universe().len(), 2);
    }

    #[test]
    fn lcov_repeated_sf_blocks_merge() {
        let text = b"SF:a.c\nDA:1,0\nend_of_record\nSF:a.c\nDA:1,2\nDA:2,0\nend_of_record\n";
        let m = parse_lcov(text, Granularity::Line, &opts()).unwrap();
        assert_eq!(line_units(m.covered()), vec!["a.c:1"]);
        assert_eq!(m.universe().len(), 2);
    }

    #[test]
    fn lcov_errors_carry_line_numbers() {
        let err = parse_lcov(b"SF:a.c\nDA:x,1\nend_of_record\n", Granularity::Line, &opts()).unwrap_err();
        match err {
            IngestError::Parse { line, token, .. } => {
                assert_eq!(line, 2);
                assert_eq!(token, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_lcov(b"DA:1,1\n", Granularity::Line, &opts()),
            Err(IngestError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_lcov(b"SF:a.c\nDA:1,1\n", Granularity::Line, &opts()),
            Err(IngestError::Parse { .. })
        ));
        assert!(matches!(
            parse_lcov(b"SF:a.c\nBOGUS:1\nend_of_record\n", Granularity::Line, &opts()),
            Err(IngestError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_lcov(b"", Granularity::Edge, &opts()),
            Err(IngestError::UnsupportedGranularity(Granularity::Edge))
        ));
    }

    #[test]
    fn lcov_strip_prefix() {
        let o = IngestOptions {
            strip_prefix: Some("/home/ci/proj".into()),
            ..Default::default()
        };
        let m = parse_lcov(
            b"SF:/home/ci/proj/src/expr.c\nDA:1,1\nend_of_record\n",
            Granularity::Line,
            &o,
        )
        .unwrap();
        assert_eq!(line_units(m.covered()), vec!["src/expr.c:1"]);
    }

    #[test]
    fn mccov_single_entry_and_empty() {
        let doc = br#"{"format":"mccov","version":1,"granularity":"line","files":[{"path":"f","units":[{"loc":3,"count":2}]}]}"#;
        let m = parse_mccov_json(doc, None, &opts()).unwrap();
        assert_eq!(line_units(m.covered()), vec!["f:3"]);

        let empty = br#"{"format":"mccov","version":1,"granularity":"branch","files":[]}"#;
        let m = parse_mccov_json(empty, None, &opts()).unwrap();
        assert_eq!(m.granularity(), Granularity::Branch);
        assert!(m.universe().is_empty());
    }

    #[test]
    fn mccov_schema_errors_name_the_field() {
        let cases: [(&[u8], &str); 5] = [
            (br#"{"version":1,"granularity":"line","files":[]}"#, "format"),
            (br#"{"format":"mccov","version":2,"granularity":"line","files":[]}"#, "version"),
            (br#"{"format":"mccov","version":1,"granularity":"line","files":{}}"#, "files"),
            (
                br#"{"format":"mccov","version":1,"granularity":"line","files":[{"path":"f","units":[{"loc":"x","count":1}]}]}"#,
                "files[0].units[0].loc",
            ),
            (
                br#"{"format":"mccov","version":1,"granularity":"line","files":[{"path":"f","units":[{"loc":1}]}]}"#,
                "files[0].units[0].count",
            ),
        ];
        for (doc, expected) in cases {
            match parse_mccov_json(doc, None, &opts()) {
                Err(IngestError::Schema { field, .. }) => assert_eq!(field, expected),
                other => panic!("expected schema error for {expected}, got {other:?}"),
            }
        }
        let branch = br#"{"format":"mccov","version":1,"granularity":"branch","files":[]}"#;
        assert!(parse_mccov_json(branch, Some(Granularity::Line), &opts()).is_err());
    }

    #[test]
    fn mccov_empty_map_document() {
        let out = emit_mccov_json(&CoverageMap::empty(Granularity::Line));
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "{\n  \"format\": \"mccov\",\n  \"version\": 1,\n  \"granularity\": \"line\",\n  \"files\": []\n}\n"
        );
    }

    #[test]
    fn mccov_two_pair_round_trip_is_bit_exact() {
        let m = CoverageMap::from_lines("calc.c", [2, 4, 5, 6, 7], 2..=7).unwrap();
        let out = emit_mccov_json(&m);
        let back = parse_mccov_json(&out, Some(Granularity::Line), &opts()).unwrap();
        assert_eq!(back, m);
        assert_eq!(emit_mccov_json(&back), out);
        let text = String::from_utf8(out).unwrap();
        assert!(text.find("\"format\"").unwrap() < text.find("\"version\"").unwrap());
        assert!(text.find("\"granularity\"").unwrap() < text.find("\"files\"").unwrap());
    }

    #[test]
    fn bitmap_semantics() {
        let mut bytes = vec![0u8; DEFAULT_MAP_SIZE];
        let m = parse_bitmap(&bytes, None).unwrap();
        assert!(m.covered().is_empty());
        assert_eq!(m.universe().len(), DEFAULT_MAP_SIZE);

        bytes[7] = 1;
        let m = parse_bitmap(&bytes, None).unwrap();
        assert_eq!(m.covered().iter().collect::<Vec<_>>(), vec![&CoverageUnit::edge(7)]);

        assert!(matches!(
            parse_bitmap(&[0u8; 100], None),
            Err(IngestError::BadLength {
                actual: 100,
                expected: DEFAULT_MAP_SIZE
            })
        ));
        assert_eq!(parse_bitmap(&[0, 3, 0, 255], Some(4)).unwrap().covered().len(), 2);
    }

    #[test]
    fn format_inference() {
        assert_eq!(
            ArtifactFormat::infer(Path::new("x/a.info")).unwrap(),
            ArtifactFormat::Lcov
        );
        assert_eq!(
            ArtifactFormat::infer(Path::new("a.json")).unwrap(),
            ArtifactFormat::MccovJson
        );
        assert_eq!(
            ArtifactFormat::infer(Path::new("a.map")).unwrap(),
            ArtifactFormat::Bitmap
        );
        assert!(ArtifactFormat::infer(Path::new("a.txt")).is_err());
    }

    #[test]
    fn artifact_yields_consistent_universes() {
        let text = b"SF:a.c\nFN:1,f\nFNDA:1,f\nDA:1,1\nDA:2,1\nBRDA:2,0,0,1\nBRDA:2,0,1,0\nend_of_record\n";
        let art = parse_lcov_artifact("t.info", text, &opts()).unwrap();
        let lines = &art.maps[&Granularity::Line];
        for b in art.maps[&Granularity::Branch].covered() {
            let Locator::Branch { line, .. } = b.locator else {
                unreachable!()
            };
            assert!(lines.universe().contains(&CoverageUnit::line(b.file.clone(), line)));
        }
        assert_eq!(art.maps[&Granularity::Function].covered().len(), 1);
    }
}
