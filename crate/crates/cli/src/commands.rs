use std::io::Read;
use std::path::{Path, PathBuf};

use metacov::analysis::{
    coefficient_of_variation, overlap, parse_unified_diff, pearson, sample_subsets, samples_from_csv,
    samples_from_json, FixLocations, Sample,
};
use metacov::coverage::normalize_path;
use metacov::guidance::{
    drive, events_jsonl, CompareRow, Comparison, DriveConfig, PolicyKind, TargetAdapter, ToyAdapter,
};
use metacov::ingest::{load_artifact, IngestOptions};
use metacov::metamorphic::{Manifest, McOptions};
use metacov::toytarget::{builtin, evaluate_relation, mutation_score, mutation_score_with, MutationScore};
use metacov::{mc_suite, McReport, TestPair};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    AnalyzeCommand, DemoArgs, DumpArgs, GuideArgs, OutputOpts, OverlapArgs, PairArgs, PolicyArg, ReportOpts,
    SampleFormat, SampleInput, SuiteArgs,
};
use crate::error::CliError;
use crate::render::{emit, emit_human, table, unit_set, Style};

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::io("stdin", e))?;
        return Ok(buf);
    }
    std::fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output serializes");
    out.push(b'\n');
    out
}

fn ingest_opts(o: &ReportOpts) -> IngestOptions {
    IngestOptions {
        strip_prefix: o.strip_prefix.clone(),
        map_size: o.map_size,
    }
}

fn mc_opts(o: &ReportOpts) -> McOptions {
    McOptions {
        strict: !o.no_strict,
        unit_cap: o.unit_cap,
    }
}

fn finish_report(report: &McReport, o: &ReportOpts) -> Result<()> {
    emit(&o.output.out, &report.to_json())?;
    if o.output.pretty {
        emit_human(&o.output.out, |style| crate::render::report_text(report, style))?;
    }
    if o.fail_if_empty && report.suite_mc.is_empty() {
        return Err(CliError::Policy("suite MC is empty (--fail-if-empty)".to_owned()));
    }
    Ok(())
}

pub fn pair(args: PairArgs) -> Result<()> {
    let o = &args.opts;
    let io = ingest_opts(o);
    let load = |paths: &[PathBuf]| -> Result<Vec<_>> {
        paths
            .iter()
            .map(|p| Ok(load_artifact(p, o.format, o.granularity, &io)?))
            .collect()
    };
    let pair = TestPair::new(args.id.clone(), load(&args.side_a)?, load(&args.side_b)?)?;
    finish_report(&mc_suite(&[pair], &mc_opts(o))?, o)
}

pub fn suite(args: SuiteArgs) -> Result<()> {
    let o = &args.opts;
    let pairs = Manifest::load(&args.manifest)?.load_pairs(o.format, o.granularity, &ingest_opts(o))?;
    finish_report(&mc_suite(&pairs, &mc_opts(o))?, o)
}

pub fn overlap_cmd(args: OverlapArgs) -> Result<()> {
    let report = McReport::from_json(&read(&args.report)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.report.display())))?;
    let mut fix =
        parse_unified_diff(&read(&args.diff)?).map_err(|e| CliError::Input(format!("{}: {e}", args.diff.display())))?;
    if let Some(prefix) = &args.strip_prefix {
        let mut stripped = FixLocations::default();
        for (file, lines) in &fix.files {
            for &l in lines {
                stripped.insert(&normalize_path(file, Some(prefix)), l);
            }
        }
        fix = stripped;
    }
    let result = overlap(&report, &fix)?;
    let mut doc = serde_json::to_value(&result).expect("overlap serializes");
    doc["fix"] = serde_json::to_value(&fix).expect("fix locations serialize");
    emit(&args.output.out, &json_bytes(&doc))?;
    if args.output.pretty {
        emit_human(&args.output.out, |style| {
            let verdict = serde_json::to_value(result.verdict).expect("verdict serializes");
            format!(
                "{}{}\n{}{}\n",
                style.bold("verdict       "),
                verdict.as_str().unwrap_or_default(),
                style.bold("intersection  "),
                unit_set(&result.intersection, 20, false)
            )
        })?;
    }
    Ok(())
}

fn load_samples(input: &SampleInput) -> Result<Vec<Sample>> {
    let format = input.format.unwrap_or_else(|| {
        if input.input.extension().is_some_and(|e| e == "json") {
            SampleFormat::Json
        } else {
            SampleFormat::Csv
        }
    });
    let bytes = read(&input.input)?;
    let parsed = match format {
        SampleFormat::Csv => samples_from_csv(&bytes),
        SampleFormat::Json => samples_from_json(&bytes),
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", input.input.display())))
}

fn pick<'a>(samples: &'a [Sample], label: Option<&str>, fallback: usize) -> Result<&'a Sample> {
    match label {
        Some(l) => samples
            .iter()
            .find(|s| s.label == l)
            .ok_or_else(|| CliError::Input(format!("no column named `{l}`"))),
        None => samples
            .get(fallback)
            .ok_or_else(|| CliError::Input(format!("input has {} column(s), pcc needs 2", samples.len()))),
    }
}

pub fn analyze(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Cv { input, column, output } => {
            let samples = load_samples(&input)?;
            let chosen: Vec<&Sample> = if column.is_empty() {
                samples.iter().collect()
            } else {
                column
                    .iter()
                    .map(|c| pick(&samples, Some(c), 0))
                    .collect::<Result<_>>()?
            };
            let mut results = Vec::new();
            let mut rows = Vec::new();
            for s in chosen {
                let cv = coefficient_of_variation(s)?;
                let sd = s.sample_std_dev()?;
                rows.push(vec![
                    s.label.clone(),
                    s.len().to_string(),
                    format!("{:.4}", s.mean()),
                    format!("{sd:.4}"),
                    format!("{cv:.2}"),
                ]);
                results.push(json!({"label": s.label, "n": s.len(), "mean": s.mean(), "std_dev": sd, "cv": cv}));
            }
            emit(
                &output.out,
                &json_bytes(&json!({"statistic": "cv", "results": results})),
            )?;
            pretty(&output, |style| {
                table(style, &["label", "n", "mean", "std_dev", "cv"], &rows)
            })
        }
        AnalyzeCommand::Pcc { input, x, y, output } => {
            let samples = load_samples(&input)?;
            let (sx, sy) = (pick(&samples, x.as_deref(), 0)?, pick(&samples, y.as_deref(), 1)?);
            let r = pearson(sx, sy)?;
            let doc = json!({"statistic": "pcc", "x": sx.label, "y": sy.label, "n": sx.len(), "pcc": r});
            emit(&output.out, &json_bytes(&doc))?;
            let row = vec![
                sx.label.clone(),
                sy.label.clone(),
                sx.len().to_string(),
                format!("{r:.4}"),
            ];
            pretty(&output, |style| table(style, &["x", "y", "n", "pcc"], &[row]))
        }
        AnalyzeCommand::Subsets {
            count,
            items,
            sizes,
            repeats,
            seed,
            output,
        } => {
            let items: Vec<String> = match (count, items) {
                (Some(n), _) => (0..n).map(|i| i.to_string()).collect(),
                (None, Some(path)) => String::from_utf8_lossy(&read(&path)?)
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_owned)
                    .collect(),
                (None, None) => unreachable!("clap requires --count or --items"),
            };
            let draws = sample_subsets(&items, &sizes, repeats, seed)?;
            emit(
                &output.out,
                &json_bytes(&json!({"seed": seed, "repeats": repeats, "draws": draws})),
            )?;
            let rows: Vec<Vec<String>> = draws
                .iter()
                .map(|d| vec![d.size.to_string(), d.repeat.to_string(), d.items.join(" ")])
                .collect();
            pretty(&output, |style| table(style, &["size", "repeat", "items"], &rows))
        }
    }
}

fn pretty(output: &OutputOpts, render: impl FnOnce(Style) -> String) -> Result<()> {
    if output.pretty {
        emit_human(&output.out, render)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScoreView {
    killed: Vec<String>,
    survived: Vec<String>,
    score: f64,
}

impl From<MutationScore> for ScoreView {
    fn from(s: MutationScore) -> Self {
        let score = s.score();
        ScoreView {
            killed: s.killed,
            survived: s.survived,
            score,
        }
    }
}

#[derive(Serialize)]
struct DemoRow {
    relation: String,
    transform: String,
    check: &'static str,
    suite_mc: Vec<String>,
    mc_percent: f64,
    violations: usize,
    pairs: usize,
    bugs_found: Vec<String>,
    seeded_mutants: Option<ScoreView>,
    all_mutants: ScoreView,
}

fn score_cell(s: Option<&ScoreView>) -> String {
    match s {
        Some(s) => format!(
            "{:.2} ({}/{})",
            s.score,
            s.killed.len(),
            s.killed.len() + s.survived.len()
        ),
        None => "-".to_owned(),
    }
}

pub fn demo(args: DemoArgs) -> Result<()> {
    let fixture = builtin(&args.fixture)?;
    let mutated = fixture.reference.as_ref().unwrap_or(&fixture.program);
    let seeded = fixture.seeded_mutants();
    let mut rows = Vec::new();
    for relation in &fixture.relations {
        let run = evaluate_relation(&fixture.program, relation, &fixture.seeds)?;
        if let Some((id, e)) = run.errors.first() {
            return Err(CliError::Input(format!("{id}: {e}")));
        }
        let report = mc_suite(&run.pairs(args.granularity), &McOptions::default())?;
        let mut bugs_found: Vec<String> = Vec::new();
        for e in run.violations() {
            if let Some(bug) = fixture.attribute(e) {
                if !bugs_found.contains(&bug.id) {
                    bugs_found.push(bug.id);
                }
            }
        }
        let seeded_mutants = if seeded.is_empty() {
            None
        } else {
            Some(mutation_score_with(&seeded, relation, &fixture.seeds)?.into())
        };
        rows.push(DemoRow {
            relation: relation.name.clone(),
            transform: relation.transform.to_string(),
            check: relation.check.name(),
            suite_mc: report.suite_mc.iter().map(ToString::to_string).collect(),
            mc_percent: metacov::coverage::round2(report.mc_percent),
            violations: run.violations().count(),
            pairs: run.executions.len(),
            bugs_found,
            seeded_mutants,
            all_mutants: mutation_score(mutated, relation, &fixture.seeds)?.into(),
        });
    }

    if args.json {
        let doc = json!({
            "fixture": fixture.name,
            "granularity": args.granularity,
            "seeds": fixture.seeds,
            "relations": rows,
        });
        return emit(&args.out, &json_bytes(&doc));
    }
    let style = if args.out == "-" {
        Style::detect(std::io::IsTerminal::is_terminal(&std::io::stdout()))
    } else {
        Style::detect(false)
    };
    let seeds: Vec<String> = fixture.seeds.iter().map(|s| format!("{s:?}")).collect();
    let mut text = format!(
        "{} {} ({} granularity, seeds {})\n\n",
        style.bold("fixture"),
        fixture.name,
        args.granularity,
        seeds.join(" ")
    );
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mc = if r.suite_mc.is_empty() {
                "∅".to_owned()
            } else {
                let prefix = format!("{}:", fixture.program.name());
                let bare: Vec<&str> = r
                    .suite_mc
                    .iter()
                    .map(|u| u.strip_prefix(&prefix).unwrap_or(u))
                    .collect();
                format!("{{{}}}", bare.join(", "))
            };
            let bug = if r.bugs_found.is_empty() {
                "missed".to_owned()
            } else {
                format!("found ({})", r.bugs_found.join(", "))
            };
            vec![
                r.relation.clone(),
                format!("{} / {}", r.transform, r.check),
                mc,
                format!("{}/{}", r.violations, r.pairs),
                bug,
                score_cell(r.seeded_mutants.as_ref()),
                score_cell(Some(&r.all_mutants)),
            ]
        })
        .collect();
    text.push_str(&table(
        style,
        &[
            "relation",
            "derive / check",
            "MC(T)",
            "violations",
            "bug",
            "seeded-mutant score",
            "all-mutant score",
        ],
        &cells,
    ));
    emit(&args.out, text.as_bytes())
}

fn parse_seed_range(text: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Input(format!("--seeds expects START..END, got `{text}`"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b): (u64, u64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

pub fn guide(args: GuideArgs) -> Result<()> {
    let target = ToyAdapter::for_fixture(&args.target)?;
    let mut seeds = args.seed.clone();
    if let Some(range) = &args.seeds {
        seeds.extend(parse_seed_range(range)?);
    }
    if seeds.is_empty() {
        seeds.push(1);
    }
    let policies: Vec<PolicyKind> = match args.policy {
        PolicyArg::Ccg => vec![PolicyKind::Ccg],
        PolicyArg::Mcg => vec![PolicyKind::Mcg],
        PolicyArg::Both => PolicyKind::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &seed in &seeds {
        let config = DriveConfig {
            budget: args.budget,
            plateau_limit: args.plateau,
            seed,
            granularity: args.granularity,
            keep_pairs: false,
        };
        for &policy in &policies {
            let state = drive(&target, policy, &config)?;
            rows.push(CompareRow::from_state(policy, &state));
            logs.push((policy, seed, events_jsonl(&state.events)));
        }
    }
    let comparison = Comparison::from_rows(target.describe(), args.budget, args.plateau, args.granularity, rows);

    emit(&args.output.out, comparison.to_csv()?.as_bytes())?;
    if let Some(path) = &args.summary {
        std::fs::write(path, comparison.to_json()).map_err(|e| CliError::io(path.display(), e))?;
    }
    if let Some(path) = &args.events {
        if let [(_, _, log)] = logs.as_slice() {
            std::fs::write(path, log).map_err(|e| CliError::io(path.display(), e))?;
        } else {
            std::fs::create_dir_all(path).map_err(|e| CliError::io(path.display(), e))?;
            for (policy, seed, log) in &logs {
                let file = path.join(format!("{policy}-seed{seed}.jsonl"));
                std::fs::write(&file, log).map_err(|e| CliError::io(file.display(), e))?;
            }
        }
    }
    pretty(&args.output, |style| guide_text(&comparison, style))
}

fn guide_text(c: &Comparison, style: Style) -> String {
    let rows: Vec<Vec<String>> = c
        .summary
        .iter()
        .map(|s| {
            vec![
                s.policy.to_string(),
                format!("{:.2}", s.mean_distinct_bugs),
                s.min_distinct_bugs.to_string(),
                s.max_distinct_bugs.to_string(),
            ]
        })
        .collect();
    let mut out = format!(
        "{} {}, budget {}, plateau {}, {} granularity\n",
        style.bold("target"),
        c.target,
        c.budget,
        c.plateau_limit,
        c.granularity
    );
    out.push_str(&table(style, &["policy", "mean bugs", "min", "max"], &rows));
    let t = c.mcg_vs_ccg;
    if t.wins + t.ties + t.losses > 0 {
        out.push_str(&format!(
            "mcg vs ccg: {} wins, {} ties, {} losses\n",
            t.wins, t.ties, t.losses
        ));
    }
    out
}

pub fn dump_program(args: DumpArgs) -> Result<()> {
    let fixture = builtin(&args.fixture)?;
    let program = if args.reference {
        fixture
            .reference
            .as_ref()
            .ok_or_else(|| CliError::Input(format!("{} has no separate reference program", fixture.name)))?
    } else {
        &fixture.program
    };
    emit("-", program.listing().as_bytes())
}
