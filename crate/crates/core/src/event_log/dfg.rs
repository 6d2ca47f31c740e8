use std::collections::BTreeMap;

use serde::Serialize;

use super::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeStats {
    pub frequency: u64,
    pub mean_duration_seconds: f64,
}

/// Directly-follows graph with frequency and mean-duration annotations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Dfg {
    #[serde(serialize_with = "serialize_edges")]
    pub edges: BTreeMap<(String, String), EdgeStats>,
    pub start_activities: BTreeMap<String, u64>,
    pub end_activities: BTreeMap<String, u64>,
}

fn serialize_edges<S: serde::Serializer>(
    edges: &BTreeMap<(String, String), EdgeStats>,
    s: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(edges.len()))?;
    for ((from, to), stats) in edges {
        seq.serialize_element(&(from, to, stats))?;
    }
    seq.end()
}

impl Dfg {
    pub fn total_frequency(&self) -> u64 {
        self.edges.values().map(|e| e.frequency).sum()
    }

    pub fn frequency(&self, from: &str, to: &str) -> u64 {
        self.edges
            .get(&(from.to_string(), to.to_string()))
            .map_or(0, |e| e.frequency)
    }
}

/// Count directly-follows pairs, start/end activities, and mean pair durations.
pub fn discover_dfg(log: &EventLog) -> Dfg {
    // (frequency, summed duration in milliseconds)
    let mut acc: BTreeMap<(String, String), (u64, i64)> = BTreeMap::new();
    let mut dfg = Dfg::default();
    for trace in &log.traces {
        let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) else {
            continue;
        };
        *dfg.start_activities
            .entry(first.activity.clone())
            .or_default() += 1;
        *dfg.end_activities.entry(last.activity.clone()).or_default() += 1;
        for pair in trace.events.windows(2) {
            let millis = (pair[1].timestamp - pair[0].timestamp).num_milliseconds();
            let slot = acc
                .entry((pair[0].activity.clone(), pair[1].activity.clone()))
                .or_default();
            slot.0 += 1;
            slot.1 += millis;
        }
    }
    dfg.edges = acc
        .into_iter()
        .map(|(edge, (frequency, millis))| {
            let mean_duration_seconds = millis as f64 / frequency as f64 / 1000.0;
            (
                edge,
                EdgeStats {
                    frequency,
                    mean_duration_seconds,
                },
            )
        })
        .collect();
    dfg
}
