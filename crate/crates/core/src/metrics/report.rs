use std::fmt::Write as _;

use super::evaluate::{EvaluationReport, SequenceMetrics};

/// Column order of every exported table.
pub const COLUMNS: [&str; 9] = ["HOTA", "DetA", "AssA", "MOTA", "MOTP", "IDF1", "FP", "FN", "IDSW"];

fn row(out: &mut String, label: &str, m: &SequenceMetrics) {
    let pct = |v: f64| format!("{:.3}", v * 100.0);
    let _ = writeln!(
        out,
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        label,
        pct(m.hota.hota),
        pct(m.hota.deta),
        pct(m.hota.assa),
        pct(m.clear.mota),
        pct(m.clear.motp),
        pct(m.id.idf1),
        m.clear.fp,
        m.clear.fn_,
        m.clear.idsw,
    );
}

fn header(out: &mut String) {
    let _ = write!(out, "{:<24}", "Sequence");
    for c in COLUMNS {
        let _ = write!(out, " {c:>8}");
    }
    out.push('\n');
}

/// Plain-text tables, one per group. Scores are printed as percentages with
/// three decimals; counts as integers.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for g in &report.groups {
        let _ = writeln!(
            out,
            "# {} / {} ({} sequences)",
            report.protocol,
            g.group,
            g.per_sequence.len()
        );
        header(&mut out);
        for (name, m) in &g.per_sequence {
            row(&mut out, name, m);
        }
        row(&mut out, "COMBINED", &g.pooled);
        out.push('\n');
    }
    if let Some(all) = &report.overall_pooled {
        let _ = writeln!(out, "# {} / all groups pooled", report.protocol);
        header(&mut out);
        row(&mut out, "COMBINED", all);
        out.push('\n');
    }
    if let Some(mean) = &report.group_mean {
        let _ = writeln!(out, "# {} / mean over groups", report.protocol);
        let _ = writeln!(
            out,
            "HOTA {:.3}  DetA {:.3}  AssA {:.3}  MOTA {:.3}  MOTP {:.3}  IDF1 {:.3}",
            mean.hota * 100.0,
            mean.deta * 100.0,
            mean.assa * 100.0,
            mean.mota * 100.0,
            mean.motp * 100.0,
            mean.idf1 * 100.0
        );
    }
    out
}

/// Machine-readable document; [`parse_machine`] reads it back exactly.
pub fn render_machine(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn parse_machine(text: &str) -> Result<EvaluationReport, serde_json::Error> {
    serde_json::from_str(text)
}
