use std::collections::HashMap;

use serde::Serialize;

use super::EventLog;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub activities: Vec<String>,
    pub count: u64,
}

/// Variants ordered by count descending, then activity sequence ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VariantTable {
    pub variants: Vec<Variant>,
}

impl VariantTable {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn total_cases(&self) -> u64 {
        self.variants.iter().map(|v| v.count).sum()
    }
}

pub fn discover_variants(log: &EventLog) -> VariantTable {
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    for trace in &log.traces {
        let seq = trace.activities().map(str::to_owned).collect();
        *counts.entry(seq).or_default() += 1;
    }
    let mut variants: Vec<Variant> = counts
        .into_iter()
        .map(|(activities, count)| Variant { activities, count })
        .collect();
    variants.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.activities.cmp(&b.activities))
    });
    VariantTable { variants }
}
