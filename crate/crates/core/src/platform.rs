//! Platform graph, workload and scenario construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};
use crate::units::{format_data, format_rate, parse_data, parse_rate, GB, KB, MB};

/// Sources, mappers and reducers joined by complete bipartite link layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformGraph {
    pub sources: Vec<String>,
    pub mappers: Vec<String>,
    pub reducers: Vec<String>,
    /// Bytes/s from each source (rows) to each mapper (columns).
    pub push_bandwidth: Vec<Vec<f64>>,
    /// Bytes/s from each mapper (rows) to each reducer (columns).
    pub shuffle_bandwidth: Vec<Vec<f64>>,
    /// Bytes/s of map processing per mapper.
    pub map_capacity: Vec<f64>,
    /// Bytes/s of reduce processing per reducer.
    pub reduce_capacity: Vec<f64>,
    pub cluster_of: BTreeMap<String, String>,
}

impl PlatformGraph {
    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_mappers(&self) -> usize {
        self.mappers.len()
    }

    pub fn num_reducers(&self) -> usize {
        self.reducers.len()
    }

    pub fn cluster(&self, node: &str) -> Option<&str> {
        self.cluster_of.get(node).map(String::as_str)
    }

    /// Cluster labels in order of first appearance among sources, mappers, reducers.
    pub fn clusters(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for id in self.sources.iter().chain(&self.mappers).chain(&self.reducers) {
            if let Some(c) = self.cluster_of.get(id) {
                if seen.insert(c.clone()) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// Multiplies every bandwidth and capacity by `factor`.
    pub fn scaled(&self, factor: f64) -> PlatformGraph {
        let scale = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect()
        };
        PlatformGraph {
            push_bandwidth: scale(&self.push_bandwidth),
            shuffle_bandwidth: scale(&self.shuffle_bandwidth),
            map_capacity: self.map_capacity.iter().map(|v| v * factor).collect(),
            reduce_capacity: self.reduce_capacity.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Input volume per source and the map output/input size ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    /// Bytes initially held by each source.
    pub data_at_source: Vec<f64>,
    pub alpha: f64,
}

impl Workload {
    pub fn total_data(&self) -> f64 {
        self.data_at_source.iter().sum()
    }

    pub fn validate(&self, sources: usize) -> Result<()> {
        if self.data_at_source.len() != sources {
            return Err(Error::Dimension(format!(
                "workload has {} source volumes for {} sources",
                self.data_at_source.len(),
                sources
            )));
        }
        if let Some((i, d)) = self
            .data_at_source
            .iter()
            .enumerate()
            .find(|(_, d)| !d.is_finite() || **d < 0.0)
        {
            return Err(Error::InvalidWorkload(format!(
                "data at source {i} is {d}, must be finite and non-negative"
            )));
        }
        if self.total_data() <= 0.0 {
            return Err(Error::InvalidWorkload("total data must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidWorkload(format!(
                "alpha is {}, must be finite and positive",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub platform: PlatformGraph,
    pub workload: Workload,
}

impl Scenario {
    /// Bundles a platform and workload after checking both.
    pub fn new(name: impl Into<String>, platform: PlatformGraph, workload: Workload) -> Result<Self> {
        validate_platform(&platform).map_err(Error::InvalidPlatform)?;
        workload.validate(platform.num_sources())?;
        Ok(Self {
            name: name.into(),
            platform,
            workload,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.workload.alpha = alpha;
        self
    }
}

/// A single broken platform invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum PlatformViolation {
    EmptyRole { role: &'static str },
    DuplicateId { id: String },
    Shape {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    PushBandwidth { source: String, mapper: String, value: f64 },
    ShuffleBandwidth { mapper: String, reducer: String, value: f64 },
    MapCapacity { mapper: String, value: f64 },
    ReduceCapacity { reducer: String, value: f64 },
    MissingCluster { node: String },
}

impl fmt::Display for PlatformViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyRole { role } => write!(f, "no {role} declared"),
            Self::DuplicateId { id } => write!(f, "identifier {id} is used more than once"),
            Self::Shape {
                what,
                expected,
                found,
            } => write!(
                f,
                "{what} is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Self::PushBandwidth {
                source,
                mapper,
                value,
            } => write!(
                f,
                "push bandwidth ({source},{mapper}) = {value} must be finite and positive"
            ),
            Self::ShuffleBandwidth {
                mapper,
                reducer,
                value,
            } => write!(
                f,
                "shuffle bandwidth ({mapper},{reducer}) = {value} must be finite and positive"
            ),
            Self::MapCapacity { mapper, value } => {
                write!(f, "map capacity of {mapper} = {value} must be finite and positive")
            }
            Self::ReduceCapacity { reducer, value } => {
                write!(f, "reduce capacity of {reducer} = {value} must be finite and positive")
            }
            Self::MissingCluster { node } => write!(f, "node {node} has no cluster label"),
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn matrix_shape(m: &[Vec<f64>], cols: usize) -> (usize, usize) {
    let found_cols = m.iter().map(Vec::len).find(|&l| l != cols).unwrap_or(cols);
    (m.len(), found_cols)
}

/// Checks every platform invariant and reports all violations found.
pub fn validate_platform(p: &PlatformGraph) -> Result<(), Vec<PlatformViolation>> {
    let mut out = Vec::new();
    let (s, m, r) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    for (role, n) in [("sources", s), ("mappers", m), ("reducers", r)] {
        if n == 0 {
            out.push(PlatformViolation::EmptyRole { role });
        }
    }
    let mut seen = BTreeSet::new();
    for id in p.sources.iter().chain(&p.mappers).chain(&p.reducers) {
        if !seen.insert(id) {
            out.push(PlatformViolation::DuplicateId { id: id.clone() });
        }
        if !p.cluster_of.contains_key(id) {
            out.push(PlatformViolation::MissingCluster { node: id.clone() });
        }
    }
    let push_shape = matrix_shape(&p.push_bandwidth, m);
    if push_shape != (s, m) {
        out.push(PlatformViolation::Shape {
            what: "push bandwidth matrix",
            expected: (s, m),
            found: push_shape,
        });
    } else {
        for (i, row) in p.push_bandwidth.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !positive(v) {
                    out.push(PlatformViolation::PushBandwidth {
                        source: p.sources[i].clone(),
                        mapper: p.mappers[j].clone(),
                        value: v,
                    });
                }
            }
        }
    }
    let shuffle_shape = matrix_shape(&p.shuffle_bandwidth, r);
    if shuffle_shape != (m, r) {
        out.push(PlatformViolation::Shape {
            what: "shuffle bandwidth matrix",
            expected: (m, r),
            found: shuffle_shape,
        });
    } else {
        for (j, row) in p.shuffle_bandwidth.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if !positive(v) {
                    out.push(PlatformViolation::ShuffleBandwidth {
                        mapper: p.mappers[j].clone(),
                        reducer: p.reducers[k].clone(),
                        value: v,
                    });
                }
            }
        }
    }
    if p.map_capacity.len() != m {
        out.push(PlatformViolation::Shape {
            what: "map capacity vector",
            expected: (m, 1),
            found: (p.map_capacity.len(), 1),
        });
    } else {
        for (j, &v) in p.map_capacity.iter().enumerate() {
            if !positive(v) {
                out.push(PlatformViolation::MapCapacity {
                    mapper: p.mappers[j].clone(),
                    value: v,
                });
            }
        }
    }
    if p.reduce_capacity.len() != r {
        out.push(PlatformViolation::Shape {
            what: "reduce capacity vector",
            expected: (r, 1),
            found: (p.reduce_capacity.len(), 1),
        });
    } else {
        for (k, &v) in p.reduce_capacity.iter().enumerate() {
            if !positive(v) {
                out.push(PlatformViolation::ReduceCapacity {
                    reducer: p.reducers[k].clone(),
                    value: v,
                });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Two clusters, each holding one source, one mapper and one reducer.
/// Links inside a cluster run at 100 MBps, links across at 10 MBps, every
/// node computes at 100 MBps, and the sources hold 150 GB and 50 GB.
pub fn make_two_cluster_example() -> Scenario {
    let ids = |p: &str| vec![format!("{p}1"), format!("{p}2")];
    let (sources, mappers, reducers) = (ids("D"), ids("M"), ids("R"));
    let link = |a: usize, b: usize| if a == b { 100.0 * MB } else { 10.0 * MB };
    let matrix: Vec<Vec<f64>> = (0..2).map(|a| (0..2).map(|b| link(a, b)).collect()).collect();
    let mut cluster_of = BTreeMap::new();
    for c in 0..2 {
        for id in [&sources[c], &mappers[c], &reducers[c]] {
            cluster_of.insert(id.clone(), format!("cluster{}", c + 1));
        }
    }
    let platform = PlatformGraph {
        sources,
        mappers,
        reducers,
        push_bandwidth: matrix.clone(),
        shuffle_bandwidth: matrix,
        map_capacity: vec![100.0 * MB; 2],
        reduce_capacity: vec![100.0 * MB; 2],
        cluster_of,
    };
    let workload = Workload {
        data_at_source: vec![150.0 * GB, 50.0 * GB],
        alpha: 1.0,
    };
    Scenario::new("two-cluster-example", platform, workload).expect("example is well formed")
}

/// One source, mapper and reducer; every rate is 1 B/s and the source holds 1 B.
pub fn make_unit_scenario() -> Scenario {
    let mut cluster_of = BTreeMap::new();
    for id in ["s0", "m0", "r0"] {
        cluster_of.insert(id.to_string(), "c0".to_string());
    }
    let platform = PlatformGraph {
        sources: vec!["s0".into()],
        mappers: vec!["m0".into()],
        reducers: vec!["r0".into()],
        push_bandwidth: vec![vec![1.0]],
        shuffle_bandwidth: vec![vec![1.0]],
        map_capacity: vec![1.0],
        reduce_capacity: vec![1.0],
        cluster_of,
    };
    let workload = Workload {
        data_at_source: vec![1.0],
        alpha: 1.0,
    };
    Scenario::new("unit", platform, workload).expect("unit instance is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Continent {
    Us,
    Eu,
    Asia,
}

impl Continent {
    fn index(self) -> usize {
        self as usize
    }
}

/// Slowest and fastest measured link bandwidth in KBps between clusters,
/// indexed by sending continent then receiving continent (US, EU, Asia).
pub const CONTINENT_BANDWIDTH_KBPS: [[(f64, f64); 3]; 3] = [
    [(216.0, 9405.0), (110.0, 2267.0), (61.0, 3305.0)],
    [(794.0, 2734.0), (4475.0, 11053.0), (1502.0, 1593.0)],
    [(401.0, 3610.0), (290.0, 1071.0), (23762.0, 23875.0)],
];

/// Range of per-node compute rates in bytes per second.
pub const COMPUTE_RATE_RANGE: (f64, f64) = (9.0 * MB, 90.0 * MB);

/// Input held by every source in generated environments.
pub const ENVIRONMENT_DATA_PER_SOURCE: f64 = 256.0 * MB;

/// Nodes of each role in generated environments.
pub const ENVIRONMENT_NODES_PER_ROLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvironmentKind {
    LocalDc,
    IntraContinental,
    Global4,
    Global8,
}

impl EnvironmentKind {
    pub const ALL: [EnvironmentKind; 4] = [
        EnvironmentKind::LocalDc,
        EnvironmentKind::IntraContinental,
        EnvironmentKind::Global4,
        EnvironmentKind::Global8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LocalDc => "local-dc",
            Self::IntraContinental => "intra-continental",
            Self::Global4 => "global-4",
            Self::Global8 => "global-8",
        }
    }

    /// Cluster labels and their continents.
    pub fn clusters(self) -> &'static [(&'static str, Continent)] {
        use Continent::*;
        const G8: [(&str, Continent); 8] = [
            ("us-ucsb", Us),
            ("us-tamu", Us),
            ("eu-berlin", Eu),
            ("asia-nitech", Asia),
            ("us-hpl", Us),
            ("us-uiuc", Us),
            ("eu-essex", Eu),
            ("asia-wide", Asia),
        ];
        match self {
            Self::LocalDc => &[("us-tamu", Us)],
            Self::IntraContinental => &[("us-tamu", Us), ("us-ucsb", Us)],
            Self::Global4 => &G8[..4],
            Self::Global8 => &G8,
        }
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownEnvironment(s.to_string()))
    }
}

/// Generates a seeded environment with eight nodes of each role.
///
/// Nodes are spread evenly over the clusters of `kind`. Every ordered pair of
/// clusters gets one bandwidth drawn uniformly from the range for its
/// continent pair; all links between those clusters, for push and shuffle
/// alike, share it. Each cluster draws one compute rate used by its mappers
/// and reducers.
pub fn make_environment(kind: EnvironmentKind, seed: u64) -> Scenario {
    let clusters = kind.clusters();
    let c = clusters.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut link = vec![vec![0.0; c]; c];
    for (a, row) in link.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let (lo, hi) = CONTINENT_BANDWIDTH_KBPS[clusters[a].1.index()][clusters[b].1.index()];
            *v = rng.random_range(lo..=hi) * KB;
        }
    }
    let compute: Vec<f64> = (0..c)
        .map(|_| rng.random_range(COMPUTE_RATE_RANGE.0..=COMPUTE_RATE_RANGE.1))
        .collect();

    let n = ENVIRONMENT_NODES_PER_ROLE;
    let per = n / c;
    let cluster_index = |node: usize| node / per;
    let ids = |p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let (sources, mappers, reducers) = (ids("s"), ids("m"), ids("r"));
    let mut cluster_of = BTreeMap::new();
    for i in 0..n {
        let label = clusters[cluster_index(i)].0.to_string();
        for id in [&sources[i], &mappers[i], &reducers[i]] {
            cluster_of.insert(id.clone(), label.clone());
        }
    }
    let layer = || -> Vec<Vec<f64>> {
        (0..n)
            .map(|a| (0..n).map(|b| link[cluster_index(a)][cluster_index(b)]).collect())
            .collect()
    };
    let capacity: Vec<f64> = (0..n).map(|i| compute[cluster_index(i)]).collect();
    let platform = PlatformGraph {
        sources,
        mappers,
        reducers,
        push_bandwidth: layer(),
        shuffle_bandwidth: layer(),
        map_capacity: capacity.clone(),
        reduce_capacity: capacity,
        cluster_of,
    };
    let workload = Workload {
        data_at_source: vec![ENVIRONMENT_DATA_PER_SOURCE; n],
        alpha: 1.0,
    };
    Scenario::new(format!("{}-seed{seed}", kind.name()), platform, workload)
        .expect("generated environments are well formed")
}

// ---------------------------------------------------------------------------
// Scenario files

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    clusters: Vec<String>,
    sources: Vec<SourceEntry>,
    mappers: Vec<ComputeEntry>,
    reducers: Vec<ComputeEntry>,
    push_bandwidth: BandwidthSpec,
    shuffle_bandwidth: BandwidthSpec,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceEntry {
    id: String,
    cluster: String,
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComputeEntry {
    id: String,
    cluster: String,
    capacity: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthSpec {
    Matrix(Vec<Vec<String>>),
    Shorthand { intra: String, inter: String },
}

fn unit_err(field: String, e: crate::units::UnitError) -> Error {
    Error::Unit {
        field,
        message: e.to_string(),
    }
}

fn expand_bandwidth(
    spec: &BandwidthSpec,
    field: &str,
    rows: &[(String, String)],
    cols: &[(String, String)],
) -> Result<Vec<Vec<f64>>> {
    match spec {
        BandwidthSpec::Shorthand { intra, inter } => {
            let intra = parse_rate(intra).map_err(|e| unit_err(format!("{field}.intra"), e))?;
            let inter = parse_rate(inter).map_err(|e| unit_err(format!("{field}.inter"), e))?;
            Ok(rows
                .iter()
                .map(|(_, ca)| {
                    cols.iter()
                        .map(|(_, cb)| if ca == cb { intra } else { inter })
                        .collect()
                })
                .collect())
        }
        BandwidthSpec::Matrix(m) => {
            if m.len() != rows.len() || m.iter().any(|r| r.len() != cols.len()) {
                return Err(Error::Dimension(format!(
                    "{field} must be {}x{}",
                    rows.len(),
                    cols.len()
                )));
            }
            m.iter()
                .enumerate()
                .map(|(a, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(b, v)| {
                            parse_rate(v).map_err(|e| unit_err(format!("{field}[{a}][{b}]"), e))
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Parses scenario text; `origin` names the input in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
        location: origin.to_string(),
        message: e.to_string(),
    })?;
    let known: BTreeSet<&String> = file.clusters.iter().collect();
    let mut cluster_of = BTreeMap::new();
    let mut check = |role: &str, idx: usize, id: &str, cluster: &str| -> Result<()> {
        if !known.is_empty() && !known.contains(&cluster.to_string()) {
            return Err(Error::Parse {
                location: format!("{origin}: {role}[{idx}].cluster"),
                message: format!("cluster `{cluster}` is not listed in `clusters`"),
            });
        }
        cluster_of.insert(id.to_string(), cluster.to_string());
        Ok(())
    };
    let mut data = Vec::new();
    for (i, s) in file.sources.iter().enumerate() {
        check("sources", i, &s.id, &s.cluster)?;
        data.push(parse_data(&s.data).map_err(|e| unit_err(format!("sources[{i}].data"), e))?);
    }
    let mut map_capacity = Vec::new();
    for (j, m) in file.mappers.iter().enumerate() {
        check("mappers", j, &m.id, &m.cluster)?;
        map_capacity
            .push(parse_rate(&m.capacity).map_err(|e| unit_err(format!("mappers[{j}].capacity"), e))?);
    }
    let mut reduce_capacity = Vec::new();
    for (k, r) in file.reducers.iter().enumerate() {
        check("reducers", k, &r.id, &r.cluster)?;
        reduce_capacity.push(
            parse_rate(&r.capacity).map_err(|e| unit_err(format!("reducers[{k}].capacity"), e))?,
        );
    }
    let src: Vec<(String, String)> = file.sources.iter().map(|s| (s.id.clone(), s.cluster.clone())).collect();
    let map: Vec<(String, String)> = file.mappers.iter().map(|s| (s.id.clone(), s.cluster.clone())).collect();
    let red: Vec<(String, String)> = file.reducers.iter().map(|s| (s.id.clone(), s.cluster.clone())).collect();
    let push_bandwidth = expand_bandwidth(&file.push_bandwidth, "push_bandwidth", &src, &map)?;
    let shuffle_bandwidth = expand_bandwidth(&file.shuffle_bandwidth, "shuffle_bandwidth", &map, &red)?;
    let platform = PlatformGraph {
        sources: src.into_iter().map(|p| p.0).collect(),
        mappers: map.into_iter().map(|p| p.0).collect(),
        reducers: red.into_iter().map(|p| p.0).collect(),
        push_bandwidth,
        shuffle_bandwidth,
        map_capacity,
        reduce_capacity,
        cluster_of,
    };
    let workload = Workload {
        data_at_source: data,
        alpha: file.alpha,
    };
    Scenario::new(file.name, platform, workload)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

/// Renders a scenario with full matrices and exact unit values.
pub fn scenario_to_string(s: &Scenario) -> String {
    let p = &s.platform;
    let cluster = |id: &String| p.cluster_of.get(id).cloned().unwrap_or_default();
    let file = ScenarioFile {
        name: s.name.clone(),
        alpha: s.workload.alpha,
        clusters: p.clusters(),
        sources: p
            .sources
            .iter()
            .zip(&s.workload.data_at_source)
            .map(|(id, &d)| SourceEntry {
                id: id.clone(),
                cluster: cluster(id),
                data: format_data(d),
            })
            .collect(),
        mappers: p
            .mappers
            .iter()
            .zip(&p.map_capacity)
            .map(|(id, &c)| ComputeEntry {
                id: id.clone(),
                cluster: cluster(id),
                capacity: format_rate(c),
            })
            .collect(),
        reducers: p
            .reducers
            .iter()
            .zip(&p.reduce_capacity)
            .map(|(id, &c)| ComputeEntry {
                id: id.clone(),
                cluster: cluster(id),
                capacity: format_rate(c),
            })
            .collect(),
        push_bandwidth: BandwidthSpec::Matrix(
            p.push_bandwidth
                .iter()
                .map(|r| r.iter().map(|&v| format_rate(v)).collect())
                .collect(),
        ),
        shuffle_bandwidth: BandwidthSpec::Matrix(
            p.shuffle_bandwidth
                .iter()
                .map(|r| r.iter().map(|&v| format_rate(v)).collect())
                .collect(),
        ),
    };
    toml::to_string(&file).expect("scenario serializes")
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_string(s)).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_platform() -> PlatformGraph {
        let mut cluster_of = BTreeMap::new();
        for id in ["s0", "m0", "r0"] {
            cluster_of.insert(id.to_string(), "c".to_string());
        }
        PlatformGraph {
            sources: vec!["s0".into()],
            mappers: vec!["m0".into()],
            reducers: vec!["r0".into()],
            push_bandwidth: vec![vec![1.0]],
            shuffle_bandwidth: vec![vec![1.0]],
            map_capacity: vec![1.0],
            reduce_capacity: vec![1.0],
            cluster_of,
        }
    }

    #[test]
    fn minimal_graph_is_valid() {
        assert_eq!(validate_platform(&unit_platform()), Ok(()));
    }

    #[test]
    fn zero_push_bandwidth_names_the_edge() {
        let mut p = unit_platform();
        p.push_bandwidth[0][0] = 0.0;
        let v = validate_platform(&p).unwrap_err();
        assert_eq!(
            v,
            vec![PlatformViolation::PushBandwidth {
                source: "s0".into(),
                mapper: "m0".into(),
                value: 0.0
            }]
        );
        assert!(v[0].to_string().contains("(s0,m0)"));
    }

    #[test]
    fn negative_capacity_names_the_node() {
        let mut p = unit_platform();
        p.reduce_capacity[0] = -3.0;
        let v = validate_platform(&p).unwrap_err();
        assert_eq!(
            v,
            vec![PlatformViolation::ReduceCapacity {
                reducer: "r0".into(),
                value: -3.0
            }]
        );
    }

    #[test]
    fn duplicate_ids_and_shapes_reported_together() {
        let mut p = unit_platform();
        p.reducers[0] = "m0".into();
        p.map_capacity.push(1.0);
        let v = validate_platform(&p).unwrap_err();
        assert!(v.contains(&PlatformViolation::DuplicateId { id: "m0".into() }));
        assert!(v.iter().any(|x| matches!(x, PlatformViolation::Shape { what: "map capacity vector", .. })));
    }

    #[test]
    fn two_cluster_example_values() {
        let s = make_two_cluster_example();
        let p = &s.platform;
        assert_eq!(p.push_bandwidth[0][0], 100e6);
        assert_eq!(p.push_bandwidth[0][1], 10e6);
        assert_eq!(s.workload.data_at_source, vec![150e9, 50e9]);
        assert!(p.map_capacity.iter().chain(&p.reduce_capacity).all(|&c| c == 100e6));
        assert_eq!(p.cluster("D2"), p.cluster("M2"));
        assert_ne!(p.cluster("D2"), p.cluster("M1"));
    }

    #[test]
    fn environment_kinds_parse() {
        for k in EnvironmentKind::ALL {
            assert_eq!(k.name().parse::<EnvironmentKind>().unwrap(), k);
        }
        assert!(matches!(
            "global-16".parse::<EnvironmentKind>(),
            Err(Error::UnknownEnvironment(_))
        ));
    }

    #[test]
    fn local_dc_is_one_cluster() {
        let s = make_environment(EnvironmentKind::LocalDc, 7);
        let labels: BTreeSet<_> = s.platform.cluster_of.values().collect();
        assert_eq!(labels.len(), 1);
        assert_eq!(s.platform.num_mappers(), 8);
    }

    #[test]
    fn shorthand_bandwidth_and_units() {
        let text = r#"
name = "t"
clusters = ["a", "b"]
sources = [{ id = "s1", cluster = "a", data = "1GB" }, { id = "s2", cluster = "b", data = "2GB" }]
mappers = [{ id = "m1", cluster = "a", capacity = "100MBps" }, { id = "m2", cluster = "b", capacity = "100MBps" }]
reducers = [{ id = "r1", cluster = "a", capacity = "100MBps" }, { id = "r2", cluster = "b", capacity = "100MBps" }]
push_bandwidth = { intra = "100MBps", inter = "10MBps" }
shuffle_bandwidth = [["100MBps", "10MBps"], ["10MBps", "100MBps"]]
"#;
        let s = parse_scenario(text, "inline").unwrap();
        assert_eq!(s.platform.push_bandwidth, vec![vec![100e6, 10e6], vec![10e6, 100e6]]);
        assert_eq!(s.platform.shuffle_bandwidth, s.platform.push_bandwidth);
        assert_eq!(s.workload.alpha, 1.0);
    }

    #[test]
    fn unit_error_names_field() {
        let text = r#"
name = "t"
sources = [{ id = "s1", cluster = "a", data = "1GB" }]
mappers = [{ id = "m1", cluster = "a", capacity = "5MiBps/sec" }]
reducers = [{ id = "r1", cluster = "a", capacity = "1MBps" }]
push_bandwidth = { intra = "1MBps", inter = "1MBps" }
shuffle_bandwidth = { intra = "1MBps", inter = "1MBps" }
"#;
        match parse_scenario(text, "inline") {
            Err(Error::Unit { field, .. }) => assert_eq!(field, "mappers[0].capacity"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_dimension_mismatch() {
        let text = r#"
name = "t"
sources = [{ id = "s1", cluster = "a", data = "1GB" }]
mappers = [{ id = "m1", cluster = "a", capacity = "1MBps" }]
reducers = [{ id = "r1", cluster = "a", capacity = "1MBps" }]
push_bandwidth = [["1MBps", "2MBps"]]
shuffle_bandwidth = { intra = "1MBps", inter = "1MBps" }
"#;
        assert!(matches!(parse_scenario(text, "inline"), Err(Error::Dimension(_))));
    }

    #[test]
    fn syntax_error_carries_location() {
        let err = parse_scenario("name = \n", "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("bad.toml"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }
}
