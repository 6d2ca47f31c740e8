//! Textual abstractions of process-mining artifacts, sized for prompts.
//!
//! The line formats here are a stable contract: scripted agents and tests
//! match on them byte for byte.

use std::fmt::Write;

use crate::event_log::{Dfg, DfgComparison, FindingKind, VariantTable};

fn activity_counts(counts: &std::collections::BTreeMap<String, u64>) -> String {
    let mut sorted: Vec<_> = counts.iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    sorted
        .iter()
        .map(|(a, c)| format!("{a}={c}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn labeled(label: &str, body: &str) -> String {
    if body.is_empty() {
        format!("{label}:")
    } else {
        format!("{label}: {body}")
    }
}

/// Render the `top_k` most frequent edges of a DFG plus its start/end activities.
pub fn abstract_dfg(dfg: &Dfg, top_k: usize) -> String {
    assert!(top_k >= 1, "top_k must be at least 1");
    let mut edges: Vec<_> = dfg.edges.iter().collect();
    edges.sort_by(|a, b| b.1.frequency.cmp(&a.1.frequency).then_with(|| a.0.cmp(b.0)));
    let shown = top_k.min(edges.len());

    let mut out = format!("DFG (top {shown} edges of {}):\n", edges.len());
    for ((from, to), stats) in &edges[..shown] {
        let _ = writeln!(
            out,
            "{from} -> {to} (freq={}, avg_dur={:.1}s)",
            stats.frequency, stats.mean_duration_seconds
        );
    }
    out.push_str(&labeled("start", &activity_counts(&dfg.start_activities)));
    out.push('\n');
    out.push_str(&labeled("end", &activity_counts(&dfg.end_activities)));
    out
}

/// Render the `top_k` most frequent variants in table order.
pub fn abstract_variants(table: &VariantTable, top_k: usize) -> String {
    assert!(top_k >= 1, "top_k must be at least 1");
    let shown = top_k.min(table.len());
    let mut out = format!("Variants (top {shown} of {}):", table.len());
    for v in &table.variants[..shown] {
        let _ = write!(out, "\n{} (count={})", v.activities.join(","), v.count);
    }
    out
}

/// One line per finding, at most `limit` lines. Group A is the first DFG
/// passed to the comparison.
pub fn render_comparison(cmp: &DfgComparison, limit: usize) -> String {
    assert!(limit >= 1, "limit must be at least 1");
    if cmp.findings.is_empty() {
        return "no behavioral differences found".to_string();
    }
    cmp.findings
        .iter()
        .take(limit)
        .map(|f| {
            let (a, b) = (&f.edge.0, &f.edge.1);
            match f.kind {
                FindingKind::OnlyInA => format!(
                    "edge {a} -> {b}: only in group A (freq {} vs {})",
                    f.freq_a, f.freq_b
                ),
                FindingKind::OnlyInB => format!(
                    "edge {a} -> {b}: only in group B (freq {} vs {})",
                    f.freq_a, f.freq_b
                ),
                FindingKind::FrequencyShift => format!(
                    "edge {a} -> {b}: frequency shift (relative freq {:.3} vs {:.3}, freq {} vs {})",
                    f.relative_frequency_a(),
                    f.relative_frequency_b(),
                    f.freq_a,
                    f.freq_b
                ),
                FindingKind::DurationShift => format!(
                    "edge {a} -> {b}: duration shift (avg_dur {:.1}s vs {:.1}s)",
                    f.mean_duration_a, f.mean_duration_b
                ),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
