use std::fmt;

use serde::{Deserialize, Serialize};

use super::{detect_conflicts, Dataset};

/// Dataset composition summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub dataset: String,
    pub instances: usize,
    pub mean_hops: f64,
    pub mean_edits: f64,
    pub conflicted: usize,
}

pub fn stats(ds: &Dataset) -> StatsRow {
    let n = ds.len();
    let mean = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    StatsRow {
        dataset: ds.name.clone(),
        instances: n,
        mean_hops: mean(ds.instances.iter().map(|i| i.hops()).sum()),
        mean_edits: mean(ds.instances.iter().map(|i| i.edits.len()).sum()),
        conflicted: detect_conflicts(ds).len(),
    }
}

impl StatsRow {
    pub const HEADER: &'static str = "dataset\tinstances\thops/instance\tedits/instance\tconflicted";
}

/// A single tab-separated row in [`StatsRow::HEADER`] column order.
impl fmt::Display for StatsRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{:.2}\t{:.2}\t{}",
            self.dataset, self.instances, self.mean_hops, self.mean_edits, self.conflicted
        )
    }
}
