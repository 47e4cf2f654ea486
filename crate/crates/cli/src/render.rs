use std::collections::BTreeSet;
use std::io::{self, IsTerminal, Write};

use metacov::{CoverageUnit, McReport};

use crate::error::CliError;

/// Terminal styling, off unless the stream is a terminal and `MC_NO_COLOR` is unset.
#[derive(Debug, Clone, Copy)]
pub struct Style {
    enabled: bool,
}

impl Style {
    pub fn detect(is_terminal: bool) -> Self {
        Style {
            enabled: is_terminal && std::env::var_os("MC_NO_COLOR").is_none(),
        }
    }

    pub fn bold(self, text: &str) -> String {
        if self.enabled {
            format!("\x1b[1m{text}\x1b[0m")
        } else {
            text.to_owned()
        }
    }
}

/// Write machine output to `out` (`-` is stdout).
pub fn emit(out: &str, bytes: &[u8]) -> Result<(), CliError> {
    if out == "-" {
        let mut stdout = io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|()| stdout.flush())
            .map_err(|e| CliError::io("stdout", e))
    } else {
        std::fs::write(out, bytes).map_err(|e| CliError::io(out, e))
    }
}

/// Write human-readable text to stderr when machine output goes to stdout,
/// and to stdout otherwise.
pub fn emit_human(out: &str, render: impl FnOnce(Style) -> String) -> Result<(), CliError> {
    if out == "-" {
        let style = Style::detect(io::stderr().is_terminal());
        io::stderr()
            .write_all(render(style).as_bytes())
            .map_err(|e| CliError::io("stderr", e))
    } else {
        let style = Style::detect(io::stdout().is_terminal());
        emit("-", render(style).as_bytes())
    }
}

/// Left-aligned columns separated by two spaces; the header is bold.
pub fn table(style: Style, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let last = cells.len().saturating_sub(1);
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            s.push_str(cell);
            if i < last {
                s.push_str(&" ".repeat(w - cell.chars().count() + 2));
            }
        }
        s.push('\n');
        s
    };
    let mut out = String::new();
    let padded = line(header.iter().map(|h| (*h).to_owned()).collect());
    out.push_str(&style.bold(padded.trim_end()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.clone()));
    }
    out
}

/// `{a, b}` or `∅`, listing at most `limit` units.
pub fn unit_set<'a>(units: impl IntoIterator<Item = &'a CoverageUnit>, limit: usize, bare: bool) -> String {
    let units: Vec<&CoverageUnit> = units.into_iter().collect();
    if units.is_empty() {
        return "∅".to_owned();
    }
    let mut shown: Vec<String> = units
        .iter()
        .take(limit)
        .map(|u| if bare { u.locator.to_string() } else { u.to_string() })
        .collect();
    if units.len() > limit {
        shown.push(format!("... +{} more", units.len() - limit));
    }
    format!("{{{}}}", shown.join(", "))
}

fn single_file(units: &BTreeSet<CoverageUnit>) -> bool {
    let mut files = units.iter().map(|u| &u.file);
    match files.next() {
        Some(first) => files.all(|f| f == first),
        None => true,
    }
}

pub fn report_text(report: &McReport, style: Style) -> String {
    let mut out = String::new();
    let facts = [
        ("granularity", report.granularity.to_string()),
        ("universe", format!("{} units", report.universe_size)),
        (
            "suite MC",
            format!("{} units ({:.2}%)", report.suite_mc.len(), report.mc_percent),
        ),
        ("union coverage", format!("{:.2}%", report.union_coverage_percent)),
    ];
    for (k, v) in facts {
        out.push_str(&format!("{}{v}\n", style.bold(&format!("{k:<16}"))));
    }
    out.push_str(&format!(
        "{}{}\n\n",
        style.bold(&format!("{:<16}", "MC(T)")),
        unit_set(&report.suite_mc, 20, false)
    ));
    let rows: Vec<Vec<String>> = report
        .pairs
        .iter()
        .map(|p| {
            let bare = single_file(&p.mc_units);
            vec![p.id.clone(), p.mc_size.to_string(), unit_set(&p.mc_units, 10, bare)]
        })
        .collect();
    out.push_str(&table(style, &["pair", "|MC|", "units"], &rows));
    out
}
