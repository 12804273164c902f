//! Human-readable tables and machine-readable CSV for study results.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use anyhow::Result;
use drmtest_core::study::StudyRow;

use crate::formats::sig;
use crate::harness::{Failure, KlmComparison};

/// `measure,test,alt,n,m,estimate,se,band`; failed columns get empty
/// estimates and band `failed`.
pub fn write_rows_csv<W: Write>(writer: W, rows: &[StudyRow], failures: &[Failure]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["measure", "test", "alt", "n", "m", "estimate", "se", "band"])?;
    for r in rows {
        w.write_record([
            r.measure.clone(),
            r.test.name().into(),
            r.alternative.clone(),
            r.n.to_string(),
            r.m.to_string(),
            sig(r.estimate(), 6),
            sig(r.se(), 6),
            r.band().name().into(),
        ])?;
    }
    for f in failures {
        w.write_record([
            f.measure.as_str(),
            "",
            "",
            "",
            &f.m.to_string(),
            "",
            "",
            "failed",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `test,alt,n,m,randomized,klm,delta,se_randomized,se_klm`.
pub fn write_klm_csv<W: Write>(writer: W, rows: &[KlmComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "test",
        "alt",
        "n",
        "m",
        "randomized",
        "klm",
        "delta",
        "se_randomized",
        "se_klm",
    ])?;
    for c in rows {
        let r = &c.randomized;
        w.write_record([
            r.test.name().into(),
            r.alternative.clone(),
            r.n.to_string(),
            r.m.to_string(),
            sig(r.estimate(), 6),
            sig(c.klm.estimate(), 6),
            sig(c.delta(), 6),
            sig(r.se(), 6),
            sig(c.klm.se(), 6),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cell text as in the reference tables: size as a multiple of `κ`, power
/// in percent.
pub fn cell(row: &StudyRow) -> String {
    match row.size_ratio() {
        Some(ratio) => format!("{ratio:.2}"),
        None => format!("{:.2}", 100.0 * row.estimate()),
    }
}

fn table<'a>(
    out: &mut String,
    title: &str,
    rows: &[&'a StudyRow],
    value: impl Fn(&'a StudyRow) -> String,
) {
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    let ms: BTreeSet<usize> = rows.iter().map(|r| r.m).collect();
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:>6} |", "n \\ m");
    for m in &ms {
        let _ = write!(out, "{m:>8}");
    }
    let _ = writeln!(out);
    for n in &ns {
        let _ = write!(out, "{n:>6} |");
        for m in &ms {
            match rows.iter().find(|r| r.n == *n && r.m == *m) {
                Some(r) => {
                    let _ = write!(out, "{:>8}", value(r));
                }
                None => {
                    let _ = write!(out, "{:>8}", "-");
                }
            }
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
}

fn groups(rows: &[StudyRow]) -> Vec<(String, &'static str, drmtest_core::TestKind, String)> {
    let mut keys = Vec::new();
    for r in rows {
        let key = (r.measure.clone(), r.method, r.test, r.alternative.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

/// One `n × m` table per measure, test and alternative.
pub fn render_tables(rows: &[StudyRow], failures: &[Failure]) -> String {
    let mut out = String::new();
    for (measure, method, test, alt) in groups(rows) {
        let sel: Vec<&StudyRow> = rows
            .iter()
            .filter(|r| {
                r.measure == measure && r.method == method && r.test == test && r.alternative == alt
            })
            .collect();
        let what = if sel[0].null {
            "size / kappa"
        } else {
            "power %"
        };
        let reps = sel[0].reps;
        let title = format!("{measure} [{method}] {test} {alt}: {what} (N = {reps})");
        table(&mut out, &title, &sel, cell);
    }
    for f in failures {
        let _ = writeln!(out, "skipped {} m = {}: {}", f.measure, f.m, f.error);
    }
    out
}

/// Differences randomized minus baseline, in percentage points.
pub fn render_klm(rows: &[KlmComparison]) -> String {
    let randomized: Vec<StudyRow> = rows.iter().map(|c| c.randomized.clone()).collect();
    let mut out = String::new();
    for (measure, _, test, alt) in groups(&randomized) {
        let sel: Vec<&KlmComparison> = rows
            .iter()
            .filter(|c| c.randomized.test == test && c.randomized.alternative == alt)
            .collect();
        let refs: Vec<&StudyRow> = sel.iter().map(|c| &c.randomized).collect();
        let title = if refs[0].null {
            format!("{measure} {test} {alt}: size / kappa, randomized | baseline")
        } else {
            format!("{measure} {test} {alt}: power difference randomized - baseline (pp)")
        };
        table(&mut out, &title, &refs, |r| {
            let c = sel
                .iter()
                .find(|c| std::ptr::eq(&c.randomized, r))
                .expect("row belongs to a comparison");
            if r.null {
                format!("{}|{}", cell(r), cell(&c.klm))
            } else {
                format!("{:.2}", 100.0 * c.delta())
            }
        });
    }
    out
}
