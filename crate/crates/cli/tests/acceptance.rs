//! End-to-end acceptance checks, one line of output per criterion.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use metacov::analysis::{overlap, parse_unified_diff, pearson, OverlapVerdict, Sample};
use metacov::guidance::{drive, CompareRow, Comparison, DriveConfig, PolicyKind, ToyAdapter};
use metacov::ingest::{emit_mccov_json, load_artifact, parse_lcov, parse_mccov_json, IngestOptions};
use metacov::toytarget::FIXTURES;
use metacov::{mc_suite, CoverageMap, CoverageUnit, Granularity, Locator, McOptions, McReport, TestPair};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn mc_json(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mc"))
        .args(args)
        .current_dir(data(""))
        .env("MC_NO_COLOR", "1")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("mc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn locs(units: &Value) -> Vec<u64> {
    units
        .as_array()
        .map(|a| a.iter().filter_map(|u| u["loc"].as_u64()).collect())
        .unwrap_or_default()
}

fn c1_worked_example() -> Outcome {
    let report = mc_json(&["suite", "calc.manifest.json", "--strip-prefix", "/build/"])?;
    let per_pair: Vec<Vec<u64>> = (0..2).map(|i| locs(&report["pairs"][i]["mc_units"])).collect();
    let suite = locs(&report["suite_mc"]);
    ensure!(per_pair == [vec![3, 5], vec![5]], "per-pair MC {per_pair:?}");
    ensure!(suite == [3, 5], "suite MC {suite:?}");
    Ok(format!("pairs {per_pair:?}, suite {suite:?}"))
}

fn c2_listing1() -> Outcome {
    let demo = mc_json(&["demo", "listing1", "--json"])?;
    let rows = demo["relations"].as_array().ok_or("no relations")?;
    let row = |name: &str| rows.iter().find(|r| r["relation"] == name).ok_or(format!("no {name}"));
    let (r1, r2) = (row("R1")?, row("R2")?);
    let mc = |r: &Value| -> Vec<String> {
        r["suite_mc"]
            .as_array()
            .unwrap()
            .iter()
            .map(|u| u.as_str().unwrap().to_owned())
            .collect()
    };
    let seeded = |r: &Value| r["seeded_mutants"]["score"].as_f64();
    ensure!(
        mc(r1) == ["calculate_difference:3", "calculate_difference:5"],
        "R1 MC {:?}",
        mc(r1)
    );
    ensure!(
        r1["violations"].as_u64().is_some_and(|v| v >= 1),
        "R1 violations {}",
        r1["violations"]
    );
    let killed = r1["seeded_mutants"]["killed"].as_array().ok_or("no seeded mutants")?;
    ensure!(
        killed
            .iter()
            .any(|k| k.as_str().is_some_and(|s| s.starts_with("calculate_difference:5:"))),
        "line-5 mutant not killed by R1"
    );
    ensure!(seeded(r1) == Some(1.0), "R1 score {:?}", seeded(r1));
    ensure!(mc(r2).is_empty(), "R2 MC {:?}", mc(r2));
    ensure!(r2["violations"] == 0, "R2 violations {}", r2["violations"]);
    ensure!(seeded(r2) == Some(0.0), "R2 score {:?}", seeded(r2));
    Ok(format!(
        "R1 MC {{3,5}} v={} score 1.0; R2 MC {{}} v=0 score 0.0",
        r1["violations"]
    ))
}

fn c3_cv_recomputation() -> Outcome {
    let cvs = |file: &str| -> Result<Vec<f64>, String> {
        let out = mc_json(&["analyze", "cv", "-i", file])?;
        Ok(out["results"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["cv"].as_f64().unwrap())
            .collect())
    };
    let (mcv, line) = (cvs("mc_columns.csv")?, cvs("line_columns.csv")?);
    let close =
        |got: &[f64], want: [f64; 2]| got.len() == 2 && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.01);
    ensure!(close(&mcv, [0.25, 0.24]), "MC columns {mcv:?}");
    ensure!(close(&line, [0.02, 0.02]), "line columns {line:?}");
    Ok(format!(
        "MC {:.4}/{:.4}, line {:.4}/{:.4}",
        mcv[0], mcv[1], line[0], line[1]
    ))
}

fn random_line_map(rng: &mut ChaCha8Rng) -> CoverageMap {
    let files = ["src/a.c", "src/b.c", "inc/c.h"];
    let mut universe = BTreeSet::new();
    let mut covered = BTreeSet::new();
    for _ in 0..rng.gen_range(0..30) {
        let u = CoverageUnit::line(*files.choose(rng).unwrap(), rng.gen_range(1..=12));
        if rng.gen_bool(0.5) {
            covered.insert(u.clone());
        }
        universe.insert(u);
    }
    CoverageMap::new(Granularity::Line, covered, universe).unwrap()
}

fn c4_set_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    const N: usize = 10_000;
    for i in 0..N {
        let (a, b) = (random_line_map(&mut rng), random_line_map(&mut rng));
        let sd = a.symmetric_difference(&b).map_err(|e| e.to_string())?;
        let u = a.union(&b).unwrap();
        let expected: BTreeSet<_> = u
            .covered()
            .difference(a.intersect(&b).unwrap().covered())
            .cloned()
            .collect();
        ensure!(sd.covered() == &expected, "case {i}: symdiff != union - intersection");
        ensure!(sd == b.symmetric_difference(&a).unwrap(), "case {i}: not symmetric");
        if !u.universe().is_empty() {
            ensure!(
                sd.coverage_percent().unwrap() <= u.coverage_percent().unwrap(),
                "case {i}: MC% above union%"
            );
        }
    }
    Ok(format!("{N} pairs, 0 failures"))
}

fn random_map(rng: &mut ChaCha8Rng) -> CoverageMap {
    let g = *Granularity::ALL.choose(rng).unwrap();
    let mut universe = BTreeSet::new();
    let mut covered = BTreeSet::new();
    for _ in 0..rng.gen_range(0..40) {
        let file = ["src/a.c", "lib/util/b.c", "main.rs"].choose(rng).unwrap().to_string();
        let u = match g {
            Granularity::Line => CoverageUnit::line(file, rng.gen_range(1..500)),
            Granularity::Branch => CoverageUnit::new(
                file,
                Locator::Branch {
                    line: rng.gen_range(1..100),
                    block: rng.gen_range(0..3),
                    branch: rng.gen_range(0..4),
                },
            )
            .unwrap(),
            Granularity::Function => {
                CoverageUnit::new(file, Locator::Function(format!("fn_{}", rng.gen_range(0..50)))).unwrap()
            }
            Granularity::Edge => CoverageUnit::edge(rng.gen_range(0..65_536)),
        };
        if rng.gen_bool(0.5) {
            covered.insert(u.clone());
        }
        universe.insert(u);
    }
    CoverageMap::new(g, covered, universe).unwrap()
}

fn c5_ingestion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = IngestOptions::default();
    for i in 0..1_000 {
        let map = random_map(&mut rng);
        let bytes = emit_mccov_json(&map);
        let back = parse_mccov_json(&bytes, Some(map.granularity()), &opts).map_err(|e| e.to_string())?;
        ensure!(back == map, "round trip {i} differs");
    }

    let text = std::fs::read(data("branches.info")).map_err(|e| e.to_string())?;
    let file = "lib/parse.c";
    let lines = |v: &[u32]| v.iter().map(|&l| CoverageUnit::line(file, l)).collect::<BTreeSet<_>>();
    let branch = |line, block, branch| CoverageUnit::new(file, Locator::Branch { line, block, branch }).unwrap();
    let func = |name: &str| CoverageUnit::new(file, Locator::Function(name.into())).unwrap();

    let line_map = parse_lcov(&text, Granularity::Line, &opts).map_err(|e| e.to_string())?;
    ensure!(
        line_map.universe() == &lines(&[8, 10, 12, 30]),
        "line universe {:?}",
        line_map.universe()
    );
    ensure!(
        line_map.covered() == &lines(&[8, 10]),
        "line covered {:?}",
        line_map.covered()
    );
    let br = parse_lcov(&text, Granularity::Branch, &opts).map_err(|e| e.to_string())?;
    ensure!(
        br.universe() == &BTreeSet::from([branch(10, 0, 0), branch(10, 0, 1), branch(12, 0, 0)]),
        "branch universe {:?}",
        br.universe()
    );
    ensure!(
        br.covered() == &BTreeSet::from([branch(10, 0, 0)]),
        "branch covered {:?}",
        br.covered()
    );
    let fns = parse_lcov(&text, Granularity::Function, &opts).map_err(|e| e.to_string())?;
    ensure!(
        fns.universe() == &BTreeSet::from([func("parse_header"), func("parse_body")]),
        "function universe"
    );
    ensure!(
        fns.covered() == &BTreeSet::from([func("parse_header")]),
        "function covered"
    );

    let strip = IngestOptions {
        strip_prefix: Some("/build/".into()),
        ..IngestOptions::default()
    };
    let side_a = load_artifact(&data("calc_a.info"), None, Granularity::Line, &strip).map_err(|e| e.to_string())?;
    let calc = |v: &[u32]| {
        v.iter()
            .map(|&l| CoverageUnit::line("src/calc.c", l))
            .collect::<BTreeSet<_>>()
    };
    ensure!(
        side_a.covered() == &calc(&[2, 4, 5, 6, 7]),
        "calc_a covered {:?}",
        side_a.covered()
    );
    Ok("1000 mccov round trips, LCOV goldens match".into())
}

fn report_for(mc: &BTreeSet<CoverageUnit>) -> McReport {
    let a = CoverageMap::new(Granularity::Line, mc.clone(), mc.clone()).unwrap();
    let b = CoverageMap::new(Granularity::Line, BTreeSet::new(), mc.clone()).unwrap();
    mc_suite(&[TestPair::single("t", a, b).unwrap()], &McOptions::default()).unwrap()
}

fn c6_overlap() -> Outcome {
    let files = ["src/expr.c", "src/where.c"];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut verdicts = [0usize; 2];
    for i in 0..500 {
        let mut text = String::new();
        let mut added: BTreeSet<CoverageUnit> = BTreeSet::new();
        let touched: Vec<&str> = files.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        for file in touched {
            text.push_str(&format!("--- a/{file}\n+++ b/{file}\n"));
            let (mut old, mut new) = (1u32, 1u32);
            for _ in 0..rng.gen_range(1..4) {
                let gap = rng.gen_range(1..20);
                old += gap;
                new += gap;
                let len = rng.gen_range(1..8);
                let mut ops: Vec<u8> = (0..len).map(|_| rng.gen_range(0..3)).collect();
                ops.push(1);
                let old_n = ops.iter().filter(|&&o| o != 1).count() as u32;
                let new_n = ops.iter().filter(|&&o| o != 2).count() as u32;
                text.push_str(&format!("@@ -{old},{old_n} +{new},{new_n} @@\n"));
                let mut line = new;
                for o in ops {
                    match o {
                        0 => {
                            text.push_str(" ctx\n");
                            line += 1;
                        }
                        1 => {
                            text.push_str("+new\n");
                            added.insert(CoverageUnit::line(file, line));
                            line += 1;
                        }
                        _ => text.push_str("-old\n"),
                    }
                }
                old += old_n;
                new += new_n;
            }
        }
        let count = rng.gen_range(1..20);
        let mc: BTreeSet<CoverageUnit> = (0..count)
            .map(|_| CoverageUnit::line(*files.choose(&mut rng).unwrap(), rng.gen_range(1..70)))
            .collect();
        let fix = parse_unified_diff(text.as_bytes()).map_err(|e| format!("case {i}: {e}"))?;
        let result = overlap(&report_for(&mc), &fix).map_err(|e| e.to_string())?;
        let brute: BTreeSet<CoverageUnit> = mc.intersection(&added).cloned().collect();
        let expected = if brute.is_empty() {
            OverlapVerdict::NonOverlapping
        } else {
            OverlapVerdict::Overlapping
        };
        ensure!(
            result.verdict == expected && result.intersection == brute,
            "case {i} disagrees"
        );
        verdicts[usize::from(brute.is_empty())] += 1;
    }

    let strip = IngestOptions {
        strip_prefix: Some("/build/".into()),
        ..IngestOptions::default()
    };
    let load = |n: &str| load_artifact(&data(n), None, Granularity::Line, &strip).unwrap();
    let pairs = [
        TestPair::single("t1", load("calc_a.info"), load("calc_b.info")).unwrap(),
        TestPair::single("t2", load("calc_a.info"), load("calc_c.info")).unwrap(),
    ];
    let report = mc_suite(&pairs, &McOptions::default()).map_err(|e| e.to_string())?;
    let verdict = |diff: &str| -> Result<OverlapVerdict, String> {
        let bytes = std::fs::read(data(diff)).map_err(|e| e.to_string())?;
        let fix = parse_unified_diff(&bytes).map_err(|e| e.to_string())?;
        Ok(overlap(&report, &fix).map_err(|e| e.to_string())?.verdict)
    };
    ensure!(
        verdict("fix_overlapping.diff")? == OverlapVerdict::Overlapping,
        "overlapping fixture"
    );
    ensure!(
        verdict("fix_elsewhere.diff")? == OverlapVerdict::NonOverlapping,
        "non-overlapping fixture"
    );
    Ok(format!(
        "500 instances ({} overlapping, {} not), fixtures ok",
        verdicts[0], verdicts[1]
    ))
}

fn c7_pearson() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sample = |v: &[f64]| Sample::new("s", v.to_vec()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(3..50);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let nf = n as f64;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let direct = (nf * sxy - sx * sy) / ((nf * sxx - sx * sx).sqrt() * (nf * syy - sy * sy).sqrt());
        let r = pearson(&sample(&x), &sample(&y)).map_err(|e| e.to_string())?;
        worst = worst.max((r - direct).abs());
        ensure!((r - direct).abs() <= 1e-12, "case {i}: {r} vs {direct}");
    }
    for (slope, want) in [(3.0, 1.0), (0.5, 1.0), (-2.0, -1.0), (-7.0, -1.0)] {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + 2.0).collect();
        let r = pearson(&sample(&x), &sample(&y)).map_err(|e| e.to_string())?;
        ensure!(r == want, "slope {slope}: {r}");
    }
    Ok(format!("100 samples, max deviation {worst:.1e}; exact ±1"))
}

fn c8_guidance() -> Outcome {
    let target = ToyAdapter::for_fixture("minieval").map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for seed in 1..=10u64 {
        let config = DriveConfig {
            budget: 2_000,
            plateau_limit: 20,
            seed,
            granularity: Granularity::Line,
            keep_pairs: false,
        };
        for policy in PolicyKind::ALL {
            let first = drive(&target, policy, &config).map_err(|e| e.to_string())?;
            let again = drive(&target, policy, &config).map_err(|e| e.to_string())?;
            ensure!(
                first.events_jsonl() == again.events_jsonl(),
                "{} seed {seed}: event log differs on rerun",
                policy.as_str()
            );
            rows.push(CompareRow::from_state(policy, &first));
        }
    }
    let c = Comparison::from_rows(target_name(&target), 2_000, 20, Granularity::Line, rows);
    let (ccg, mcg) = (c.mean(PolicyKind::Ccg), c.mean(PolicyKind::Mcg));
    let t = &c.mcg_vs_ccg;
    let detail = format!(
        "mean bugs MCG {mcg:.2} vs CCG {ccg:.2}; MCG {}W/{}T/{}L",
        t.wins, t.ties, t.losses
    );
    ensure!(mcg >= ccg, "{detail}: MCG mean below CCG");
    ensure!(t.wins + t.ties >= 7, "{detail}: fewer than 7 wins or ties");
    Ok(detail)
}

fn target_name(t: &ToyAdapter) -> String {
    use metacov::guidance::TargetAdapter;
    t.describe()
}

fn c9_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut names: Vec<&str> = FIXTURES.to_vec();
    names.sort_unstable();
    for i in 0..20 {
        let name = *names.choose(&mut rng).unwrap();
        let target = ToyAdapter::for_fixture(name).map_err(|e| e.to_string())?;
        let config = DriveConfig {
            budget: rng.gen_range(20..400),
            plateau_limit: rng.gen_range(1..30),
            seed: rng.gen(),
            granularity: *[Granularity::Line, Granularity::Branch].choose(&mut rng).unwrap(),
            keep_pairs: true,
        };
        let st = drive(&target, PolicyKind::Mcg, &config).map_err(|e| e.to_string())?;
        let report = mc_suite(&st.pairs, &McOptions::default()).map_err(|e| e.to_string())?;
        ensure!(
            st.policy.cumulative() == &report.suite_mc,
            "run {i} ({name}, seed {}): cumulative set differs from suite MC",
            config.seed
        );
    }
    Ok("20 runs, exact equality".into())
}

struct Criterion {
    id: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: "C1",
            limit: Some(Duration::from_secs(1)),
            run: c1_worked_example,
        },
        Criterion {
            id: "C2",
            limit: Some(Duration::from_secs(1)),
            run: c2_listing1,
        },
        Criterion {
            id: "C3",
            limit: Some(Duration::from_secs(1)),
            run: c3_cv_recomputation,
        },
        Criterion {
            id: "C4",
            limit: None,
            run: c4_set_algebra,
        },
        Criterion {
            id: "C5",
            limit: None,
            run: c5_ingestion,
        },
        Criterion {
            id: "C6",
            limit: None,
            run: c6_overlap,
        },
        Criterion {
            id: "C7",
            limit: None,
            run: c7_pearson,
        },
        Criterion {
            id: "C8",
            limit: Some(Duration::from_secs(60)),
            run: c8_guidance,
        },
        Criterion {
            id: "C9",
            limit: None,
            run: c9_consistency,
        },
    ];
    // Optional criterion ids on the command line restrict the run, e.g. `-- C4 C8`.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| filter.is_empty() || filter.iter().any(|f| f == c.id))
    {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(d), Some(limit)) if elapsed > limit => Err(format!("{d}; took longer than {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("{} PASS ({:.2}s) {detail}", c.id, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("{} FAIL ({:.2}s) {why}", c.id, elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
