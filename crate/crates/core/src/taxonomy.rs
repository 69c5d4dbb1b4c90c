//! Area/category taxonomy of the in-house benchmark and its reference counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Area {
    Sales,
    Operations,
    Marketing,
    Analysis,
}

impl Area {
    pub const ALL: [Area; 4] = [Area::Sales, Area::Operations, Area::Marketing, Area::Analysis];

    pub fn as_str(self) -> &'static str {
        match self {
            Area::Sales => "Sales",
            Area::Operations => "Operations",
            Area::Marketing => "Marketing",
            Area::Analysis => "Analysis",
        }
    }
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Area {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Area::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown area `{s}`"))
    }
}

/// One cell of the reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryCount {
    pub area: Area,
    pub category: &'static str,
    pub count: u32,
}

const fn cell(area: Area, category: &'static str, count: u32) -> CategoryCount {
    CategoryCount { area, category, count }
}

/// Reference area/category counts of the released 94-task benchmark.
pub const BENCHMARK_DISTRIBUTION: &[CategoryCount] = &[
    cell(Area::Sales, "Collect Business Contact Data", 14),
    cell(Area::Sales, "Complete Missing Fields (enrichment)", 6),
    cell(Area::Operations, "Build Multi-step Automation Workflows", 1),
    cell(Area::Operations, "Collect Data", 10),
    cell(Area::Operations, "Convert Formats", 2),
    cell(Area::Operations, "Retrieve PDF / Document / Report Content", 3),
    cell(Area::Operations, "Schedule & Manage Appointments & Calls", 3),
    cell(Area::Operations, "Structure Raw Data into Schema", 6),
    cell(Area::Operations, "Validate Contact Info", 3),
    cell(Area::Marketing, "Collect Business Contact Data", 4),
    cell(Area::Marketing, "Create Content", 7),
    cell(Area::Marketing, "Market & Competitive Research Reports", 10),
    cell(Area::Marketing, "Proofread, analyse and correct content", 3),
    cell(Area::Analysis, "Customer / User Interviews or Feedback Collection", 1),
    cell(Area::Analysis, "Generate Performance Dashboards & Summaries", 8),
    cell(Area::Analysis, "Market & Competitive Research Reports", 8),
    cell(Area::Analysis, "Run Exploratory Data Analysis", 5),
];

pub const BENCHMARK_TOTAL: u32 = 94;

pub fn area_total(area: Area) -> u32 {
    BENCHMARK_DISTRIBUTION
        .iter()
        .filter(|c| c.area == area)
        .map(|c| c.count)
        .sum()
}

/// True when `(area, category)` is a cell of the reference taxonomy.
pub fn is_known(area: Area, category: &str) -> bool {
    BENCHMARK_DISTRIBUTION
        .iter()
        .any(|c| c.area == area && c.category == category)
}

/// Distinct category names, in first-appearance order.
pub fn categories() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for c in BENCHMARK_DISTRIBUTION {
        if !out.contains(&c.category) {
            out.push(c.category);
        }
    }
    out
}
