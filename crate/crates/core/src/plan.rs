//! Execution plans, barrier disciplines and baseline plans.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};
use crate::platform::PlatformGraph;

/// Absolute tolerance on row sums of a plan.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Default number of hash buckets in the bucketized plan rendering.
pub const DEFAULT_BUCKETS: usize = 1024;

/// Push fractions per source/mapper pair and key-space fractions per reducer.
///
/// Every mapper sends the same share `y_k` of its output to reducer `k`, so
/// the shuffle matrix is implied by `reducer_fraction` and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionPlan {
    pub push_fraction: Vec<Vec<f64>>,
    pub reducer_fraction: Vec<f64>,
}

impl ExecutionPlan {
    /// Expanded mapper × reducer shuffle fractions (every row equals `y`).
    pub fn shuffle_fraction(&self) -> Vec<Vec<f64>> {
        let m = self.push_fraction.first().map_or(0, Vec::len);
        vec![self.reducer_fraction.clone(); m]
    }

    /// Bytes received by each mapper.
    pub fn mapper_load(&self, data: &[f64]) -> Vec<f64> {
        let m = self.push_fraction.first().map_or(0, Vec::len);
        let mut load = vec![0.0; m];
        for (row, &d) in self.push_fraction.iter().zip(data) {
            for (l, &x) in load.iter_mut().zip(row) {
                *l += d * x;
            }
        }
        load
    }

    /// Clips entries into [0, 1] and rescales each row to sum to one.
    /// Rows that sum to zero become uniform.
    pub fn normalized(&self) -> ExecutionPlan {
        fn fix(row: &[f64]) -> Vec<f64> {
            let clipped: Vec<f64> = row.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let sum: f64 = clipped.iter().sum();
            if sum > 0.0 {
                clipped.iter().map(|v| v / sum).collect()
            } else {
                vec![1.0 / row.len() as f64; row.len()]
            }
        }
        ExecutionPlan {
            push_fraction: self.push_fraction.iter().map(|r| fix(r)).collect(),
            reducer_fraction: fix(&self.reducer_fraction),
        }
    }
}

/// Synchronization discipline at a phase boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Barrier {
    /// Every node waits for all nodes to finish the previous phase.
    Global,
    /// A node waits only for its own inputs.
    Local,
    /// A node starts on the first piece of its input.
    Pipelined,
}

impl Barrier {
    pub const ALL: [Barrier; 3] = [Barrier::Global, Barrier::Local, Barrier::Pipelined];

    /// Combines a phase start time with its work duration.
    pub fn combine(self, start: f64, duration: f64) -> f64 {
        match self {
            Barrier::Global | Barrier::Local => start + duration,
            Barrier::Pipelined => start.max(duration),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Barrier::Global => 'G',
            Barrier::Local => 'L',
            Barrier::Pipelined => 'P',
        }
    }

    pub fn from_letter(c: char) -> Option<Barrier> {
        match c.to_ascii_uppercase() {
            'G' => Some(Barrier::Global),
            'L' => Some(Barrier::Local),
            'P' => Some(Barrier::Pipelined),
            _ => None,
        }
    }
}

/// Barriers at the push/map, map/shuffle and shuffle/reduce boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BarrierConfig {
    pub push_map: Barrier,
    pub map_shuffle: Barrier,
    pub shuffle_reduce: Barrier,
}

impl BarrierConfig {
    pub const ALL_GLOBAL: BarrierConfig = BarrierConfig::uniform(Barrier::Global);
    pub const ALL_LOCAL: BarrierConfig = BarrierConfig::uniform(Barrier::Local);
    pub const ALL_PIPELINED: BarrierConfig = BarrierConfig::uniform(Barrier::Pipelined);

    pub const fn new(push_map: Barrier, map_shuffle: Barrier, shuffle_reduce: Barrier) -> Self {
        Self {
            push_map,
            map_shuffle,
            shuffle_reduce,
        }
    }

    pub const fn uniform(b: Barrier) -> Self {
        Self::new(b, b, b)
    }

    pub fn boundaries(self) -> [Barrier; 3] {
        [self.push_map, self.map_shuffle, self.shuffle_reduce]
    }

    pub fn with_boundary(self, index: usize, b: Barrier) -> Self {
        let mut all = self.boundaries();
        all[index] = b;
        Self::new(all[0], all[1], all[2])
    }

    /// All 27 configurations.
    pub fn all() -> Vec<BarrierConfig> {
        let mut out = Vec::with_capacity(27);
        for a in Barrier::ALL {
            for b in Barrier::ALL {
                for c in Barrier::ALL {
                    out.push(Self::new(a, b, c));
                }
            }
        }
        out
    }
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self::ALL_GLOBAL
    }
}

impl fmt::Display for BarrierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}",
            self.push_map.letter(),
            self.map_shuffle.letter(),
            self.shuffle_reduce.letter()
        )
    }
}

impl FromStr for BarrierConfig {
    type Err = Error;

    /// Accepts `G-P-L`, `GPL` or a single letter applied to every boundary.
    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s.chars().filter(|c| *c != '-' && *c != '|').collect();
        let parsed: Option<Vec<Barrier>> = letters.iter().map(|&c| Barrier::from_letter(c)).collect();
        match parsed.as_deref() {
            Some([b]) => Ok(Self::uniform(*b)),
            Some([a, b, c]) => Ok(Self::new(*a, *b, *c)),
            _ => Err(Error::InvalidArgument(format!(
                "barrier configuration `{s}` must be three of G, L, P such as G-P-L"
            ))),
        }
    }
}

/// A single broken plan invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    PushEntry { source: String, mapper: String, value: f64 },
    PushRowSum { source: String, sum: f64 },
    ReducerEntry { reducer: String, value: f64 },
    ReducerSum { sum: f64 },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dimension {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected}, found {found}"),
            Self::PushEntry {
                source,
                mapper,
                value,
            } => write!(f, "push fraction ({source},{mapper}) = {value} is outside [0, 1]"),
            Self::PushRowSum { source, sum } => {
                write!(f, "push fractions of source {source} sum to {sum}, not 1")
            }
            Self::ReducerEntry { reducer, value } => {
                write!(f, "reducer fraction of {reducer} = {value} is outside [0, 1]")
            }
            Self::ReducerSum { sum } => write!(f, "reducer fractions sum to {sum}, not 1"),
        }
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Checks dimensions, entry ranges and row sums against `p`.
pub fn validate_plan(plan: &ExecutionPlan, p: &PlatformGraph) -> Result<(), Vec<PlanViolation>> {
    let mut out = Vec::new();
    let (s, m, r) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    if plan.push_fraction.len() != s {
        out.push(PlanViolation::Dimension {
            what: "push fraction rows (sources)",
            expected: s,
            found: plan.push_fraction.len(),
        });
    }
    if let Some(row) = plan.push_fraction.iter().find(|row| row.len() != m) {
        out.push(PlanViolation::Dimension {
            what: "push fraction columns (mappers)",
            expected: m,
            found: row.len(),
        });
    }
    if plan.reducer_fraction.len() != r {
        out.push(PlanViolation::Dimension {
            what: "reducer fractions",
            expected: r,
            found: plan.reducer_fraction.len(),
        });
    }
    if !out.is_empty() {
        return Err(out);
    }
    for (i, row) in plan.push_fraction.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if !in_unit(x) {
                out.push(PlanViolation::PushEntry {
                    source: p.sources[i].clone(),
                    mapper: p.mappers[j].clone(),
                    value: x,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= SUM_TOLERANCE) {
            out.push(PlanViolation::PushRowSum {
                source: p.sources[i].clone(),
                sum,
            });
        }
    }
    for (k, &y) in plan.reducer_fraction.iter().enumerate() {
        if !in_unit(y) {
            out.push(PlanViolation::ReducerEntry {
                reducer: p.reducers[k].clone(),
                value: y,
            });
        }
    }
    let sum: f64 = plan.reducer_fraction.iter().sum();
    if !((sum - 1.0).abs() <= SUM_TOLERANCE) {
        out.push(PlanViolation::ReducerSum { sum });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Every source spreads its data evenly over all mappers and every reducer
/// receives an equal share of the key space.
pub fn uniform_plan(p: &PlatformGraph) -> ExecutionPlan {
    let (s, m, r) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    ExecutionPlan {
        push_fraction: vec![vec![1.0 / m as f64; m]; s],
        reducer_fraction: vec![1.0 / r as f64; r],
    }
}

/// Every source splits its data evenly over the mappers of its own cluster;
/// the key space stays uniform.
pub fn affinity_plan(p: &PlatformGraph) -> Result<ExecutionPlan> {
    let r = p.num_reducers();
    let mut push = Vec::with_capacity(p.num_sources());
    for src in &p.sources {
        let cluster = p.cluster(src).unwrap_or_default();
        let local: Vec<bool> = p.mappers.iter().map(|m| p.cluster(m) == Some(cluster)).collect();
        let count = local.iter().filter(|l| **l).count();
        if count == 0 {
            return Err(Error::NoLocalMapper {
                source_id: src.clone(),
                cluster: cluster.to_string(),
            });
        }
        push.push(
            local
                .iter()
                .map(|&l| if l { 1.0 / count as f64 } else { 0.0 })
                .collect(),
        );
    }
    Ok(ExecutionPlan {
        push_fraction: push,
        reducer_fraction: vec![1.0 / r as f64; r],
    })
}

/// Number of hash buckets per reducer out of `total`, proportional to the
/// reducer fractions. Each reducer gets `floor(y_k·total)` buckets and the
/// remainder goes to the largest fractional parts (lower index on ties), so
/// the counts always add up to `total`.
pub fn bucket_counts(reducer_fraction: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = reducer_fraction.iter().map(|y| y * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(assigned);
    for &k in order.iter().cycle().take(remaining.max(1) * counts.len().max(1)) {
        if remaining == 0 {
            break;
        }
        counts[k] += 1;
        remaining -= 1;
    }
    counts
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sources: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mappers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reducers: Option<Vec<String>>,
    push: Vec<Vec<f64>>,
    reducer_fractions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shuffle: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    buckets: Option<BucketSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketSection {
    total: usize,
    /// Buckets owned by each reducer.
    counts: Vec<usize>,
    /// First bucket of each reducer's contiguous range.
    starts: Vec<usize>,
}

/// Renders a plan with the expanded shuffle matrix and a bucket assignment.
pub fn plan_to_string(
    plan: &ExecutionPlan,
    p: &PlatformGraph,
    scenario: &str,
    bucket_total: usize,
) -> String {
    let counts = bucket_counts(&plan.reducer_fraction, bucket_total);
    let starts = counts
        .iter()
        .scan(0usize, |acc, &c| {
            let s = *acc;
            *acc += c;
            Some(s)
        })
        .collect();
    let file = PlanFile {
        scenario: Some(scenario.to_string()),
        sources: Some(p.sources.clone()),
        mappers: Some(p.mappers.clone()),
        reducers: Some(p.reducers.clone()),
        push: plan.push_fraction.clone(),
        reducer_fractions: plan.reducer_fraction.clone(),
        shuffle: Some(plan.shuffle_fraction()),
        buckets: Some(BucketSection {
            total: bucket_total,
            counts,
            starts,
        }),
    };
    toml::to_string(&file).expect("plan serializes")
}

pub fn save_plan(
    plan: &ExecutionPlan,
    p: &PlatformGraph,
    scenario: &str,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, plan_to_string(plan, p, scenario, DEFAULT_BUCKETS))
        .map_err(|e| io_error(path, e))
}

/// Parses plan text for platform `p`. Rows within [`SUM_TOLERANCE`] of one
/// are renormalized; anything else is reported as a violation.
pub fn parse_plan(text: &str, origin: &str, p: &PlatformGraph) -> Result<ExecutionPlan> {
    let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse {
        location: origin.to_string(),
        message: e.to_string(),
    })?;
    for (what, ids, expected) in [
        ("sources", &file.sources, &p.sources),
        ("mappers", &file.mappers, &p.mappers),
        ("reducers", &file.reducers, &p.reducers),
    ] {
        if let Some(ids) = ids {
            if ids != expected {
                return Err(Error::Dimension(format!(
                    "plan {what} {ids:?} do not match scenario {what} {expected:?}"
                )));
            }
        }
    }
    let plan = ExecutionPlan {
        push_fraction: file.push,
        reducer_fraction: file.reducer_fractions,
    };
    match validate_plan(&plan, p) {
        Ok(()) => Ok(plan.normalized()),
        Err(v) => {
            if let Some(PlanViolation::Dimension { .. }) = v.first() {
                Err(Error::Dimension(
                    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
                ))
            } else {
                Err(Error::InvalidPlan(v))
            }
        }
    }
}

pub fn load_plan(path: &Path, p: &PlatformGraph) -> Result<ExecutionPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_plan(&text, &path.display().to_string(), p)
}
