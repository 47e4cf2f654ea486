use std::collections::{BTreeMap, BTreeSet};

use metacov::coverage::EDGE_NAMESPACE;
use metacov::ingest::{emit_mccov_json, parse_bitmap, parse_lcov, parse_mccov_json, IngestError, IngestOptions};
use metacov::{CoverageMap, CoverageUnit, Granularity, Locator};
use proptest::prelude::*;
use proptest::sample::subsequence;

const PATHS: [&str; 4] = ["src/a.c", "src/util/b.c", "main.rs", "include/c.h"];

fn opts() -> IngestOptions {
    IngestOptions::default()
}

fn locator(g: Granularity) -> BoxedStrategy<Locator> {
    match g {
        Granularity::Line => (1..400u32).prop_map(Locator::Line).boxed(),
        Granularity::Branch => (1..100u32, 0..3u32, 0..4u32)
            .prop_map(|(line, block, branch)| Locator::Branch { line, block, branch })
            .boxed(),
        Granularity::Function => "[a-z_][a-z0-9_]{0,10}".prop_map(Locator::Function).boxed(),
        Granularity::Edge => (0..65_536u32).prop_map(Locator::Edge).boxed(),
    }
}

fn any_map() -> impl Strategy<Value = CoverageMap> {
    prop::sample::select(Granularity::ALL.to_vec()).prop_flat_map(|g| {
        let file = if g == Granularity::Edge {
            Just(EDGE_NAMESPACE).boxed()
        } else {
            prop::sample::select(PATHS.to_vec()).boxed()
        };
        prop::collection::vec((file, locator(g), any::<bool>()), 0..40).prop_map(move |units| {
            let mut universe = BTreeSet::new();
            let mut covered = BTreeSet::new();
            for (f, loc, hit) in units {
                let u = CoverageUnit::new(f, loc).unwrap();
                if hit {
                    covered.insert(u.clone());
                }
                universe.insert(u);
            }
            CoverageMap::new(g, covered, universe).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn mccov_round_trip(map in any_map()) {
        let bytes = emit_mccov_json(&map);
        let back = parse_mccov_json(&bytes, Some(map.granularity()), &opts()).unwrap();
        prop_assert_eq!(&back, &map);
        prop_assert_eq!(emit_mccov_json(&back), bytes);
    }
}

/// One synthetic `SF:` block together with the sets an independent reader expects.
#[derive(Debug, Clone)]
struct Block {
    path: &'static str,
    records: Vec<String>,
    lines: BTreeMap<u32, u64>,
    branches: BTreeMap<(u32, u32, u32), Option<u64>>,
    functions: BTreeMap<String, u64>,
}

fn block() -> impl Strategy<Value = Block> {
    (
        prop::sample::select(PATHS.to_vec()),
        prop::collection::vec((1..200u32, 0..4u64), 1..60),
        prop::collection::btree_map((1..200u32, 0..2u32, 0..3u32), prop::option::of(0..5u64), 0..20),
        prop::collection::btree_map("[a-z]{1,6}", 0..3u64, 0..6),
    )
        .prop_map(|(path, das, brdas, fns)| {
            let mut lines: BTreeMap<u32, u64> = BTreeMap::new();
            let mut records = Vec::new();
            for (line, count) in &das {
                *lines.entry(*line).or_default() += count;
                records.push(format!("DA:{line},{count}"));
            }
            for ((line, block, branch), taken) in &brdas {
                let taken = taken.map_or("-".to_owned(), |t| t.to_string());
                records.push(format!("BRDA:{line},{block},{branch},{taken}"));
            }
            for (i, (name, count)) in fns.iter().enumerate() {
                records.push(format!("FN:{},{name}", i + 1));
                records.push(format!("FNDA:{count},{name}"));
            }
            Block {
                path,
                records,
                lines,
                branches: brdas,
                functions: fns,
            }
        })
}

fn tracefile(blocks: &[Block], crlf: bool) -> String {
    let nl = if crlf { "\r\n" } else { "\n" };
    let mut out = format!("TN:synthetic{nl}");
    for b in blocks {
        out.push_str(&format!("SF:{}{nl}", b.path));
        for r in &b.records {
            out.push_str(r);
            out.push_str(nl);
        }
        out.push_str(&format!("LF:{}{nl}LH:0{nl}end_of_record{nl}", b.lines.len()));
    }
    out
}

/// Expected (covered, universe) per granularity, merging blocks for the same path.
fn expected(blocks: &[Block], g: Granularity) -> (BTreeSet<CoverageUnit>, BTreeSet<CoverageUnit>) {
    let mut counts: BTreeMap<CoverageUnit, u64> = BTreeMap::new();
    for b in blocks {
        let mut add = |loc: Locator, n: u64| {
            *counts.entry(CoverageUnit::new(b.path, loc).unwrap()).or_default() += n;
        };
        match g {
            Granularity::Line => b.lines.iter().for_each(|(&l, &n)| add(Locator::Line(l), n)),
            Granularity::Branch => b
                .branches
                .iter()
                .for_each(|(&(line, block, branch), t)| add(Locator::Branch { line, block, branch }, t.unwrap_or(0))),
            Granularity::Function => b
                .functions
                .iter()
                .for_each(|(f, &n)| add(Locator::Function(f.clone()), n)),
            Granularity::Edge => unreachable!(),
        }
    }
    let covered = counts.iter().filter(|(_, &n)| n > 0).map(|(u, _)| u.clone()).collect();
    (covered, counts.into_keys().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lcov_matches_independent_scan(blocks in prop::collection::vec(block(), 1..4), crlf in any::<bool>()) {
        let text = tracefile(&blocks, crlf);
        for g in [Granularity::Line, Granularity::Branch, Granularity::Function] {
            let map = parse_lcov(text.as_bytes(), g, &opts()).unwrap();
            let (covered, universe) = expected(&blocks, g);
            prop_assert_eq!(map.covered(), &covered);
            prop_assert_eq!(map.universe(), &universe);
        }
    }

    #[test]
    fn lcov_is_order_insensitive_within_a_block(b in block(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = b.clone();
        shuffled.records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        // FNDA must follow its FN; keep function records in their original order.
        shuffled.records.retain(|r| !r.starts_with("FN"));
        shuffled.records.extend(b.records.iter().filter(|r| r.starts_with("FN")).cloned());
        for g in [Granularity::Line, Granularity::Branch, Granularity::Function] {
            let original = parse_lcov(tracefile(std::slice::from_ref(&b), false).as_bytes(), g, &opts()).unwrap();
            let reordered = parse_lcov(tracefile(&[shuffled.clone()], false).as_bytes(), g, &opts()).unwrap();
            prop_assert_eq!(original, reordered);
        }
    }

    #[test]
    fn bitmap_counts_nonzero_bytes(bytes in prop::collection::vec(prop_oneof![3 => Just(0u8), 1 => any::<u8>()], 1..2_000)) {
        let map = parse_bitmap(&bytes, Some(bytes.len())).unwrap();
        let nonzero: BTreeSet<u32> = bytes.iter().enumerate().filter(|(_, &b)| b > 0).map(|(i, _)| i as u32).collect();
        let covered: BTreeSet<u32> = map
            .covered()
            .iter()
            .map(|u| match u.locator {
                Locator::Edge(i) => i,
                _ => unreachable!(),
            })
            .collect();
        prop_assert_eq!(covered, nonzero);
        prop_assert_eq!(map.universe().len(), bytes.len());
    }

    #[test]
    fn lcov_parse_is_deterministic(blocks in subsequence(vec![0usize, 1, 2], 0..=3)) {
        let text: String = blocks.iter().map(|i| format!("SF:f{i}.c\nDA:{},1\nend_of_record\n", i + 1)).collect();
        let a = parse_lcov(text.as_bytes(), Granularity::Line, &opts()).unwrap();
        let b = parse_lcov(text.as_bytes(), Granularity::Line, &opts()).unwrap();
        prop_assert_eq!(a.covered().len(), blocks.len());
        prop_assert_eq!(a, b);
    }
}

fn lines_of(set: &BTreeSet<CoverageUnit>) -> Vec<String> {
    set.iter().map(ToString::to_string).collect()
}

const GOLDEN: &str = "TN:golden\r\nSF:lib/parse.c\r\nFN:8,parse_header\r\nFN:30,parse_body\r\nFNDA:4,parse_header\r\nFNDA:0,parse_body\r\nDA:8,4\r\nDA:10,0\r\nDA:10,3\r\nDA:12,0,abcdef\r\nDA:30,0\r\nBRDA:10,0,0,4\r\nBRDA:10,0,1,-\r\nBRDA:12,0,0,0\r\nLF:4\r\nLH:2\r\nBRF:3\r\nBRH:1\r\nend_of_record\r\n";

#[test]
fn golden_tracefile_lines() {
    let m = parse_lcov(GOLDEN.as_bytes(), Granularity::Line, &opts()).unwrap();
    // DA:10 appears twice (0 and 3); the counts add up, so the line is covered.
    assert_eq!(lines_of(m.covered()), ["lib/parse.c:8", "lib/parse.c:10"]);
    assert_eq!(
        lines_of(m.universe()),
        ["lib/parse.c:8", "lib/parse.c:10", "lib/parse.c:12", "lib/parse.c:30"]
    );
}

#[test]
fn golden_tracefile_branches_and_functions() {
    let b = parse_lcov(GOLDEN.as_bytes(), Granularity::Branch, &opts()).unwrap();
    assert_eq!(lines_of(b.covered()), ["lib/parse.c:10:0:0"]);
    // `-` marks a branch that was never evaluated: instrumented, not covered.
    assert_eq!(
        lines_of(b.universe()),
        ["lib/parse.c:10:0:0", "lib/parse.c:10:0:1", "lib/parse.c:12:0:0"]
    );
    let f = parse_lcov(GOLDEN.as_bytes(), Granularity::Function, &opts()).unwrap();
    assert_eq!(lines_of(f.covered()), ["lib/parse.c:parse_header"]);
    assert_eq!(
        lines_of(f.universe()),
        ["lib/parse.c:parse_body", "lib/parse.c:parse_header"]
    );
}

#[test]
fn lcov_rejects_edges_and_reports_line_numbers() {
    assert!(matches!(
        parse_lcov(GOLDEN.as_bytes(), Granularity::Edge, &opts()),
        Err(IngestError::UnsupportedGranularity(Granularity::Edge))
    ));
    let err = parse_lcov(b"SF:a.c\nDA:3,1\nDA:x,1\nend_of_record\n", Granularity::Line, &opts()).unwrap_err();
    match err {
        IngestError::Parse { line, token, .. } => {
            assert_eq!(line, 3);
            assert!(token.contains('x'), "{token}");
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn calc_map_round_trips_bit_exactly() {
    let m = CoverageMap::from_lines("calc.c", [2, 4, 5, 6, 7], 2..=7).unwrap();
    let bytes = emit_mccov_json(&m);
    assert_eq!(parse_mccov_json(&bytes, None, &opts()).unwrap(), m);
    let doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 4);
    let text = String::from_utf8(bytes).unwrap();
    let order = ["\"format\"", "\"version\"", "\"granularity\"", "\"files\""].map(|k| text.find(k).unwrap());
    assert!(order.windows(2).all(|w| w[0] < w[1]), "keys out of order: {text}");
}

#[test]
fn empty_map_emits_empty_files_array() {
    let bytes = emit_mccov_json(&CoverageMap::empty(Granularity::Line));
    let doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(doc["files"], serde_json::json!([]));
    assert!(parse_mccov_json(&bytes, None, &opts()).unwrap().universe().is_empty());
}

#[test]
fn bitmap_defaults_and_bad_length() {
    let mut bytes = vec![0u8; 65_536];
    assert!(parse_bitmap(&bytes, None).unwrap().covered().is_empty());
    bytes[7] = 1;
    let m = parse_bitmap(&bytes, None).unwrap();
    assert_eq!(lines_of(m.covered()), [format!("{EDGE_NAMESPACE}:edge7")]);
    assert_eq!(m.universe().len(), 65_536);
    assert!(matches!(
        parse_bitmap(&[0u8; 100], None),
        Err(IngestError::BadLength {
            actual: 100,
            expected: 65_536
        })
    ));
}

#[test]
fn mccov_schema_errors_name_the_field() {
    let err = parse_mccov_json(
        br#"{"format":"mccov","version":1,"granularity":"line","files":[{"path":"a.c","units":[{"loc":3}]}]}"#,
        None,
        &opts(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("files[0].units[0].count"), "{err}");
}
