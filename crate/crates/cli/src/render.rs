//! Text and SVG renderings. Numbers shown here are for people; machine output
//! carries the exact rationals.

use std::fmt::Write as _;

use pargas_core::gcm::GasReport;
use pargas_core::scheduler::Schedule;
use pargas_core::{Rational, Time, TxSet};

const MAX_TEXT_COLUMNS: u64 = 120;
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

fn glyph(i: usize) -> char {
    const GLYPHS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    GLYPHS.get(i).map(|&c| c as char).unwrap_or('#')
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn denom(r: &Rational) -> u64 {
    r.denom().to_string().parse().unwrap_or(u64::MAX)
}

pub fn gas_text(report: &GasReport, block: &TxSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mechanism: {}", report.mechanism);
    let _ = writeln!(out, "v(T) = {}", report.block_value);
    let id_w = block
        .ids()
        .map(|id| id.as_str().len())
        .max()
        .unwrap_or(2)
        .max(2);
    let _ = writeln!(
        out,
        "{:<id_w$}  {:>8}  {:>12}  {:>10}  keys",
        "tx", "time", "gas", ""
    );
    for tx in block.iter() {
        let g = &report.per_tx[tx.id()];
        let keys: Vec<&str> = tx.keys().iter().map(|k| k.as_str()).collect();
        let _ = writeln!(
            out,
            "{:<id_w$}  {:>8}  {:>12}  {:>10}  {}",
            tx.id().as_str(),
            tx.time().to_string(),
            g.to_string(),
            approx_or_blank(g),
            keys.join(",")
        );
    }
    let _ = writeln!(
        out,
        "{:<id_w$}  {:>8}  {:>12}  {:>10}",
        "total",
        block.total_time().to_string(),
        report.total.to_string(),
        approx_or_blank(&report.total)
    );
    out
}

fn approx_or_blank(r: &Rational) -> String {
    if r.is_integer() {
        String::new()
    } else {
        r.approx()
    }
}

struct Bar<'a> {
    index: usize,
    id: &'a str,
    start: &'a Time,
    end: &'a Time,
}

fn bars<'a>(schedule: &'a Schedule, block: &'a TxSet) -> Vec<(String, Vec<Bar<'a>>)> {
    let mut keys: Vec<String> = block
        .iter()
        .flat_map(|tx| tx.keys().iter().map(|k| k.as_str().to_string()))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let row = block
                .iter()
                .enumerate()
                .filter(|(_, tx)| tx.keys().iter().any(|k| k.as_str() == key))
                .filter_map(|(index, tx)| {
                    schedule.slot(tx.id()).map(|s| Bar {
                        index,
                        id: tx.id().as_str(),
                        start: &s.start,
                        end: &s.end,
                    })
                })
                .collect();
            (key, row)
        })
        .collect()
}

/// Keys as rows, time as columns; each cell shows the transaction holding the key.
pub fn gantt_text(schedule: &Schedule, block: &TxSet, makespan: &Time) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "makespan: {}", makespan);
    if block.is_empty() {
        return out;
    }
    let mut per_unit = schedule
        .slots()
        .values()
        .flat_map(|s| [denom(&s.start), denom(&s.end)])
        .fold(1u64, |l, d| l.saturating_mul(d / gcd(l, d)));
    let span = makespan.to_f64();
    if per_unit as f64 * span > MAX_TEXT_COLUMNS as f64 {
        per_unit = ((MAX_TEXT_COLUMNS as f64 / span).floor() as u64).max(1);
        let _ = writeln!(
            out,
            "(scaled: one column = 1/{per_unit} time unit, approximate)"
        );
    }
    let columns = (span * per_unit as f64).ceil() as usize;
    let rows = bars(schedule, block);
    let key_w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(1);
    for (key, row) in &rows {
        let mut line = vec!['.'; columns];
        for bar in row {
            let from = (bar.start.to_f64() * per_unit as f64).round() as usize;
            let to = (bar.end.to_f64() * per_unit as f64).round() as usize;
            for c in line.iter_mut().take(to.min(columns)).skip(from) {
                *c = glyph(bar.index);
            }
        }
        let _ = writeln!(
            out,
            "{key:<key_w$} |{}|",
            line.into_iter().collect::<String>()
        );
    }
    for (i, tx) in block.iter().enumerate() {
        if let Some(s) = schedule.slot(tx.id()) {
            let _ = writeln!(
                out,
                "{} = {} [{}, {})",
                glyph(i),
                tx.id().as_str(),
                s.start,
                s.end
            );
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG Gantt chart: time on the x axis, one row per storage key.
pub fn gantt_svg(schedule: &Schedule, block: &TxSet, makespan: &Time, comment: &str) -> String {
    const LEFT: f64 = 80.0;
    const TOP: f64 = 40.0;
    const ROW: f64 = 28.0;
    const UNIT: f64 = 60.0;
    let rows = bars(schedule, block);
    let span = makespan.to_f64();
    let width = LEFT + span * UNIT + 30.0;
    let height = TOP + rows.len() as f64 * ROW + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(out, "<!-- {} -->", comment.replace("--", "- -"));
    let _ = writeln!(
        out,
        r#"<text x="{LEFT}" y="20" font-size="14">makespan {}</text>"#,
        escape(&makespan.to_string())
    );
    for (r, (key, row)) in rows.iter().enumerate() {
        let y = TOP + r as f64 * ROW;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + ROW / 2.0 + 4.0,
            escape(key)
        );
        for bar in row {
            let x = LEFT + bar.start.to_f64() * UNIT;
            let w = (bar.end.to_f64() - bar.start.to_f64()) * UNIT;
            let _ = writeln!(
                out,
                r#"<rect class="tx" data-tx="{id}" x="{x}" y="{}" width="{w}" height="{}" fill="{}" stroke="black"><title>{id} [{}, {})</title></rect>"#,
                y + 2.0,
                ROW - 4.0,
                PALETTE[bar.index % PALETTE.len()],
                escape(&bar.start.to_string()),
                escape(&bar.end.to_string()),
                id = escape(bar.id),
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="white">{}</text>"#,
                x + w / 2.0,
                y + ROW / 2.0 + 4.0,
                escape(bar.id)
            );
        }
    }
    let axis_y = TOP + rows.len() as f64 * ROW + 4.0;
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        LEFT + span * UNIT
    );
    let step = (span / 20.0).ceil().max(1.0) as usize;
    for t in (0..=span.floor() as usize).step_by(step) {
        let x = LEFT + t as f64 * UNIT;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="middle">{t}</text>"#,
            axis_y + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}
