use std::collections::BTreeSet;

use serde::Serialize;

use super::{Dfg, EdgeStats};

pub const DEFAULT_SHIFT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_DURATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    OnlyInA,
    OnlyInB,
    FrequencyShift,
    DurationShift,
}

/// One behavioral difference between two DFGs.
///
/// For the edge-presence and frequency kinds `relative_difference` is
/// `freq_a/total_a - freq_b/total_b`. For [`FindingKind::DurationShift`] it is
/// `(dur_a - dur_b) / max(dur_a, dur_b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub edge: (String, String),
    pub freq_a: u64,
    pub freq_b: u64,
    pub total_a: u64,
    pub total_b: u64,
    pub relative_difference: f64,
    pub mean_duration_a: f64,
    pub mean_duration_b: f64,
    pub kind: FindingKind,
}

impl Finding {
    pub fn relative_frequency_a(&self) -> f64 {
        ratio(self.freq_a, self.total_a)
    }

    pub fn relative_frequency_b(&self) -> f64 {
        ratio(self.freq_b, self.total_b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DfgComparison {
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Minimum absolute difference in relative edge frequency, in [0, 1].
    pub shift_threshold: f64,
    /// Minimum relative difference in mean edge duration, in [0, 1].
    pub duration_threshold: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            shift_threshold: DEFAULT_SHIFT_THRESHOLD,
            duration_threshold: DEFAULT_DURATION_THRESHOLD,
        }
    }
}

fn ratio(n: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        n as f64 / total as f64
    }
}

/// Compare two DFGs with the default duration threshold.
///
/// # Panics
/// If `shift_threshold` is outside `[0, 1]`.
pub fn compare_dfgs(a: &Dfg, b: &Dfg, shift_threshold: f64) -> DfgComparison {
    compare_dfgs_with(
        a,
        b,
        &CompareOptions {
            shift_threshold,
            ..CompareOptions::default()
        },
    )
}

pub fn compare_dfgs_with(a: &Dfg, b: &Dfg, options: &CompareOptions) -> DfgComparison {
    assert!(
        (0.0..=1.0).contains(&options.shift_threshold),
        "shift threshold must lie in [0, 1]"
    );
    assert!(
        (0.0..=1.0).contains(&options.duration_threshold),
        "duration threshold must lie in [0, 1]"
    );
    let (total_a, total_b) = (a.total_frequency(), b.total_frequency());
    let keys: BTreeSet<&(String, String)> = a.edges.keys().chain(b.edges.keys()).collect();

    let mut findings = Vec::new();
    for key in keys {
        let ea = a.edges.get(key);
        let eb = b.edges.get(key);
        let stats =
            |e: Option<&EdgeStats>| e.map_or((0, 0.0), |e| (e.frequency, e.mean_duration_seconds));
        let (freq_a, mean_duration_a) = stats(ea);
        let (freq_b, mean_duration_b) = stats(eb);
        let make = |kind, relative_difference| Finding {
            edge: key.clone(),
            freq_a,
            freq_b,
            total_a,
            total_b,
            relative_difference,
            mean_duration_a,
            mean_duration_b,
            kind,
        };
        let freq_diff = ratio(freq_a, total_a) - ratio(freq_b, total_b);
        match (ea, eb) {
            (Some(_), None) => findings.push(make(FindingKind::OnlyInA, freq_diff)),
            (None, Some(_)) => findings.push(make(FindingKind::OnlyInB, freq_diff)),
            (Some(_), Some(_)) => {
                if freq_diff.abs() > options.shift_threshold {
                    findings.push(make(FindingKind::FrequencyShift, freq_diff));
                }
                let longest = mean_duration_a.max(mean_duration_b);
                if longest > 0.0 {
                    let dur_diff = (mean_duration_a - mean_duration_b) / longest;
                    if dur_diff.abs() > options.duration_threshold {
                        findings.push(make(FindingKind::DurationShift, dur_diff));
                    }
                }
            }
            (None, None) => unreachable!("key comes from one of the maps"),
        }
    }
    findings.sort_by(|x, y| {
        y.relative_difference
            .abs()
            .total_cmp(&x.relative_difference.abs())
            .then_with(|| x.edge.cmp(&y.edge))
            .then_with(|| x.kind.cmp(&y.kind))
    });
    DfgComparison { findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfg(edges: &[(&str, &str, u64, f64)]) -> Dfg {
        let mut d = Dfg::default();
        for (a, b, f, dur) in edges {
            d.edges.insert(
                (a.to_string(), b.to_string()),
                EdgeStats {
                    frequency: *f,
                    mean_duration_seconds: *dur,
                },
            );
        }
        d
    }

    #[test]
    fn edge_only_in_a() {
        let a = dfg(&[
            ("Request", "Extra Check", 5, 0.0),
            ("Request", "Review", 5, 0.0),
        ]);
        let b = dfg(&[("Request", "Review", 5, 0.0)]);
        let cmp = compare_dfgs(&a, &b, 0.05);
        let only: Vec<_> = cmp
            .findings
            .iter()
            .filter(|f| f.kind == FindingKind::OnlyInA)
            .collect();
        assert_eq!(only.len(), 1);
        assert_eq!(
            only[0].edge,
            ("Request".to_string(), "Extra Check".to_string())
        );
        assert_eq!((only[0].freq_a, only[0].freq_b), (5, 0));
    }

    #[test]
    fn identical_dfgs_have_no_findings() {
        let a = dfg(&[("a", "b", 3, 10.0), ("b", "c", 1, 0.0)]);
        assert!(compare_dfgs(&a, &a.clone(), 0.05).findings.is_empty());
    }

    #[test]
    fn frequency_shift_value() {
        let a = dfg(&[("x", "y", 9, 0.0), ("y", "z", 1, 0.0)]);
        let b = dfg(&[("x", "y", 1, 0.0), ("y", "z", 9, 0.0)]);
        let cmp = compare_dfgs(&a, &b, 0.05);
        let f = cmp.findings.iter().find(|f| f.edge.0 == "x").unwrap();
        assert_eq!(f.kind, FindingKind::FrequencyShift);
        assert!((f.relative_difference - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shift_threshold_is_strict() {
        let a = dfg(&[("x", "y", 1, 0.0), ("y", "z", 1, 0.0)]);
        let b = dfg(&[("x", "y", 1, 0.0), ("y", "z", 3, 0.0)]);
        // 0.5 - 0.25 = 0.25
        assert!(compare_dfgs(&a, &b, 0.25).findings.is_empty());
        assert_eq!(compare_dfgs(&a, &b, 0.2).findings.len(), 2);
    }

    #[test]
    fn duration_shift() {
        let a = dfg(&[("a", "b", 1, 100.0)]);
        let b = dfg(&[("a", "b", 1, 10.0)]);
        let cmp = compare_dfgs(&a, &b, 0.05);
        assert_eq!(cmp.findings.len(), 1);
        assert_eq!(cmp.findings[0].kind, FindingKind::DurationShift);
        assert!((cmp.findings[0].relative_difference - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_totals_give_zero_difference() {
        let cmp = compare_dfgs(&Dfg::default(), &Dfg::default(), 0.0);
        assert!(cmp.findings.is_empty());
        let a = dfg(&[("a", "b", 0, 0.0)]);
        let cmp = compare_dfgs(&a, &Dfg::default(), 0.0);
        assert_eq!(cmp.findings[0].relative_difference, 0.0);
    }

    #[test]
    fn sorted_by_magnitude() {
        let a = dfg(&[("a", "b", 1, 0.0), ("c", "d", 9, 0.0)]);
        let b = dfg(&[("e", "f", 1, 0.0)]);
        let cmp = compare_dfgs(&a, &b, 0.05);
        let mags: Vec<f64> = cmp
            .findings
            .iter()
            .map(|f| f.relative_difference.abs())
            .collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(cmp.findings[0].edge.0, "e");
    }

    #[test]
    #[should_panic(expected = "shift threshold")]
    fn threshold_out_of_range() {
        compare_dfgs(&Dfg::default(), &Dfg::default(), 1.5);
    }
}
