//! Discrete-event execution of a plan on dedicated links and compute nodes.
//!
//! Two engines share the gate rules and timeline reconstruction. The fluid
//! engine (`chunk_size == 0`) moves data at continuous rates: every server is
//! a queue drained at its capacity, or at its inflow once the queue is empty.
//! The chunked engine moves whole pieces of at most `chunk_size` bytes and
//! processes them first in, first out.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::makespan::{evaluate, phase_breakdown, PhaseBreakdown, PhaseTimeline};
use crate::plan::{Barrier, BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};
use crate::units::MB;

/// Piece size used when none is given, matching a common input split size.
pub const DEFAULT_CHUNK_SIZE: f64 = 64.0 * MB;

/// Relative tolerance of the byte conservation check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-12;

/// Remaining amounts below this fraction of a server's volume count as zero.
const SNAP: f64 = 1e-12;

/// Upper bound on the pieces a chunked run may create.
const MAX_PIECES: f64 = 2e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Bytes per piece; zero selects the fluid engine.
    pub chunk_size: f64,
    pub barriers: BarrierConfig,
}

impl SimConfig {
    pub fn fluid(barriers: BarrierConfig) -> Self {
        Self {
            chunk_size: 0.0,
            barriers,
        }
    }

    pub fn chunked(chunk_size: f64, barriers: BarrierConfig) -> Self {
        Self {
            chunk_size,
            barriers,
        }
    }

    pub fn is_fluid(&self) -> bool {
        self.chunk_size == 0.0
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::chunked(DEFAULT_CHUNK_SIZE, BarrierConfig::ALL_GLOBAL)
    }
}

/// A link or compute node of the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entity {
    PushLink { source: usize, mapper: usize },
    Mapper(usize),
    ShuffleLink { mapper: usize, reducer: usize },
    Reducer(usize),
}

impl Entity {
    /// Node id, or `from->to` for a link.
    pub fn label(&self, p: &PlatformGraph) -> String {
        match *self {
            Entity::PushLink { source, mapper } => format!("{}->{}", p.sources[source], p.mappers[mapper]),
            Entity::Mapper(j) => p.mappers[j].clone(),
            Entity::ShuffleLink { mapper, reducer } => {
                format!("{}->{}", p.mappers[mapper], p.reducers[reducer])
            }
            Entity::Reducer(k) => p.reducers[k].clone(),
        }
    }

    fn is_link(&self) -> bool {
        matches!(self, Entity::PushLink { .. } | Entity::ShuffleLink { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TransferStart,
    TransferEnd,
    ComputeStart,
    ComputeEnd,
    BarrierRelease,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TransferStart => "transfer_start",
            Self::TransferEnd => "transfer_end",
            Self::ComputeStart => "compute_start",
            Self::ComputeEnd => "compute_end",
            Self::BarrierRelease => "barrier_release",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub entity: Entity,
    pub kind: EventKind,
    /// Bytes moved or processed by the piece; zero for barrier releases.
    pub bytes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config: SimConfig,
    /// Events in time order.
    pub events: Vec<SimEvent>,
    pub measured_timeline: PhaseTimeline,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    time: f64,
    entity: &'a str,
    event: &'a str,
    bytes: f64,
}

impl SimTrace {
    pub fn makespan(&self) -> f64 {
        self.measured_timeline.makespan
    }

    pub fn breakdown(&self) -> PhaseBreakdown {
        self.measured_timeline.phase_breakdown
    }

    /// CSV with columns `time,entity,event,bytes`.
    pub fn to_csv(&self, p: &PlatformGraph) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.events {
            w.serialize(TraceRow {
                time: e.time,
                entity: &e.entity.label(p),
                event: e.kind.name(),
                bytes: e.bytes,
            })
            .expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
    }
}

/// Runs `plan` on `p` and records every transfer, computation and barrier
/// release.
pub fn simulate(p: &PlatformGraph, w: &Workload, plan: &ExecutionPlan, cfg: SimConfig) -> Result<SimTrace> {
    evaluate(p, w, plan, cfg.barriers)?;
    if !(cfg.chunk_size.is_finite() && cfg.chunk_size >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chunk size must be a finite number of bytes >= 0, got {}",
            cfg.chunk_size
        )));
    }
    let mut net = Network::new(p, w, plan, cfg.barriers);
    let mut events = if cfg.is_fluid() {
        run_fluid(&mut net)?
    } else {
        run_chunked(&mut net, cfg.chunk_size)?
    };
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(SimTrace {
        config: cfg,
        events,
        measured_timeline: net.timeline(),
    })
}

/// Index arithmetic for servers stored stage by stage: push links, mappers,
/// shuffle links, reducers.
#[derive(Debug, Clone, Copy)]
struct Layout {
    s: usize,
    m: usize,
    r: usize,
}

impl Layout {
    fn push(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    fn mapper(&self, j: usize) -> usize {
        self.s * self.m + j
    }

    fn link(&self, j: usize, k: usize) -> usize {
        self.s * self.m + self.m + j * self.r + k
    }

    fn reducer(&self, k: usize) -> usize {
        self.s * self.m + self.m + self.m * self.r + k
    }

    fn len(&self) -> usize {
        self.reducer(self.r)
    }

    /// Index range of the stage feeding the server at `idx`.
    fn previous_stage(&self, e: Entity) -> std::ops::Range<usize> {
        match e {
            Entity::PushLink { .. } => 0..0,
            Entity::Mapper(_) => 0..self.mapper(0),
            Entity::ShuffleLink { .. } => self.mapper(0)..self.link(0, 0),
            Entity::Reducer(_) => self.link(0, 0)..self.reducer(0),
        }
    }
}

#[derive(Debug, Clone)]
struct Server {
    entity: Entity,
    volume: f64,
    capacity: f64,
    /// Upstream servers and the bytes delivered here per byte they process.
    inputs: Vec<(usize, f64)>,
    outputs: Vec<(usize, f64)>,
    gate: Option<f64>,
    done: Option<f64>,
}

impl Server {
    fn snap(&self) -> f64 {
        SNAP * self.volume
    }

    fn kinds(&self) -> (EventKind, EventKind) {
        if self.entity.is_link() {
            (EventKind::TransferStart, EventKind::TransferEnd)
        } else {
            (EventKind::ComputeStart, EventKind::ComputeEnd)
        }
    }
}

struct Network {
    layout: Layout,
    barriers: BarrierConfig,
    servers: Vec<Server>,
}

impl Network {
    fn new(p: &PlatformGraph, w: &Workload, plan: &ExecutionPlan, barriers: BarrierConfig) -> Self {
        let layout = Layout {
            s: p.num_sources(),
            m: p.num_mappers(),
            r: p.num_reducers(),
        };
        let load = plan.mapper_load(&w.data_at_source);
        let y = &plan.reducer_fraction;
        let mut servers = Vec::with_capacity(layout.len());
        for i in 0..layout.s {
            for j in 0..layout.m {
                servers.push(Server {
                    entity: Entity::PushLink { source: i, mapper: j },
                    volume: w.data_at_source[i] * plan.push_fraction[i][j],
                    capacity: p.push_bandwidth[i][j],
                    inputs: Vec::new(),
                    outputs: vec![(layout.mapper(j), 1.0)],
                    gate: None,
                    done: None,
                });
            }
        }
        for j in 0..layout.m {
            servers.push(Server {
                entity: Entity::Mapper(j),
                volume: load[j],
                capacity: p.map_capacity[j],
                inputs: (0..layout.s).map(|i| (layout.push(i, j), 1.0)).collect(),
                outputs: (0..layout.r).map(|k| (layout.link(j, k), w.alpha * y[k])).collect(),
                gate: None,
                done: None,
            });
        }
        for j in 0..layout.m {
            for k in 0..layout.r {
                servers.push(Server {
                    entity: Entity::ShuffleLink { mapper: j, reducer: k },
                    volume: w.alpha * y[k] * load[j],
                    capacity: p.shuffle_bandwidth[j][k],
                    inputs: vec![(layout.mapper(j), w.alpha * y[k])],
                    outputs: vec![(layout.reducer(k), 1.0)],
                    gate: None,
                    done: None,
                });
            }
        }
        for k in 0..layout.r {
            let inputs: Vec<(usize, f64)> = (0..layout.m).map(|j| (layout.link(j, k), 1.0)).collect();
            let volume = inputs.iter().map(|&(s, _)| servers[s].volume).sum();
            servers.push(Server {
                entity: Entity::Reducer(k),
                volume,
                capacity: p.reduce_capacity[k],
                inputs,
                outputs: Vec::new(),
                gate: None,
                done: None,
            });
        }
        Self {
            layout,
            barriers,
            servers,
        }
    }

    fn barrier(&self, e: Entity) -> Option<Barrier> {
        match e {
            Entity::PushLink { .. } => None,
            Entity::Mapper(_) => Some(self.barriers.push_map),
            Entity::ShuffleLink { .. } => Some(self.barriers.map_shuffle),
            Entity::Reducer(_) => Some(self.barriers.shuffle_reduce),
        }
    }

    fn inputs_done(&self, idx: usize) -> bool {
        self.servers[idx].inputs.iter().all(|&(s, _)| self.servers[s].done.is_some())
    }

    /// Global: the whole previous stage has finished. Local: this server's
    /// own inputs have. Pipelined: always open.
    fn gate_ready(&self, idx: usize) -> bool {
        let e = self.servers[idx].entity;
        match self.barrier(e) {
            None | Some(Barrier::Pipelined) => true,
            Some(Barrier::Local) => self.inputs_done(idx),
            Some(Barrier::Global) => self.layout.previous_stage(e).all(|s| self.servers[s].done.is_some()),
        }
    }

    /// Opens every gate whose condition holds at `t`.
    fn open_gates(&mut self, t: f64, events: &mut Vec<SimEvent>) -> bool {
        let mut changed = false;
        for idx in 0..self.servers.len() {
            if self.servers[idx].gate.is_none() && self.gate_ready(idx) {
                self.servers[idx].gate = Some(t);
                changed = true;
                let e = self.servers[idx].entity;
                if matches!(self.barrier(e), Some(Barrier::Global | Barrier::Local)) {
                    events.push(SimEvent {
                        time: t,
                        entity: e,
                        kind: EventKind::BarrierRelease,
                        bytes: 0.0,
                    });
                }
            }
        }
        changed
    }

    fn all_done(&self) -> bool {
        self.servers.iter().all(|s| s.done.is_some())
    }

    fn done_at(&self, idx: usize) -> f64 {
        self.servers[idx].done.expect("simulation finished")
    }

    fn gate_at(&self, idx: usize) -> f64 {
        self.servers[idx].gate.expect("simulation finished")
    }

    /// Measured times in the shape of the analytic timeline. A phase behind a
    /// global or local barrier starts at its gate release; behind a pipelined
    /// one its start is the end of the node's inputs, as in the model.
    fn timeline(&self) -> PhaseTimeline {
        let l = self.layout;
        let b = self.barriers;
        let push_end: Vec<f64> = (0..l.m)
            .map(|j| (0..l.s).map(|i| self.done_at(l.push(i, j))).fold(0.0, f64::max))
            .collect();
        let map_end: Vec<f64> = (0..l.m).map(|j| self.done_at(l.mapper(j))).collect();
        let map_start: Vec<f64> = (0..l.m)
            .map(|j| match b.push_map {
                Barrier::Pipelined => push_end[j],
                _ => self.gate_at(l.mapper(j)),
            })
            .collect();
        let shuffle_start: Vec<f64> = (0..l.m)
            .map(|j| match b.map_shuffle {
                Barrier::Pipelined => map_end[j],
                _ if l.r > 0 => self.gate_at(l.link(j, 0)),
                _ => map_end[j],
            })
            .collect();
        let shuffle_link_end: Vec<Vec<f64>> = (0..l.m)
            .map(|j| (0..l.r).map(|k| self.done_at(l.link(j, k))).collect())
            .collect();
        let shuffle_end: Vec<f64> = (0..l.r)
            .map(|k| shuffle_link_end.iter().map(|row| row[k]).fold(0.0, f64::max))
            .collect();
        let reduce_start: Vec<f64> = (0..l.r)
            .map(|k| match b.shuffle_reduce {
                Barrier::Pipelined => shuffle_end[k],
                _ => self.gate_at(l.reducer(k)),
            })
            .collect();
        let reduce_end: Vec<f64> = (0..l.r).map(|k| self.done_at(l.reducer(k))).collect();
        let makespan = reduce_end.iter().copied().fold(0.0, f64::max);
        let mut t = PhaseTimeline {
            barriers: b,
            push_end,
            map_start,
            map_end,
            shuffle_start,
            shuffle_link_end,
            shuffle_end,
            reduce_start,
            reduce_end,
            makespan,
            phase_breakdown: PhaseBreakdown::default(),
        };
        t.phase_breakdown = phase_breakdown(&t);
        t
    }
}

fn run_fluid(net: &mut Network) -> Result<Vec<SimEvent>> {
    let n = net.servers.len();
    let mut received: Vec<f64> = net
        .servers
        .iter()
        .map(|s| if s.inputs.is_empty() { s.volume } else { 0.0 })
        .collect();
    let mut processed = vec![0.0; n];
    let mut rate = vec![0.0; n];
    let mut inflow = vec![0.0; n];
    let mut started = vec![false; n];
    let mut events = Vec::new();
    let mut t = 0.0;
    // Every step finishes a server or empties a queue; rates only change at
    // those moments, so the step count is bounded by a small multiple of n².
    for _ in 0..(8 * n * n + 64) {
        loop {
            let mut changed = false;
            for idx in 0..n {
                let s = &net.servers[idx];
                if s.done.is_some() || s.gate.is_none() || !net.inputs_done(idx) {
                    continue;
                }
                received[idx] = s.volume;
                if s.volume - processed[idx] <= s.snap() {
                    processed[idx] = s.volume;
                    if s.volume > 0.0 {
                        events.push(SimEvent {
                            time: t,
                            entity: s.entity,
                            kind: s.kinds().1,
                            bytes: s.volume,
                        });
                    }
                    net.servers[idx].done = Some(t);
                    changed = true;
                }
            }
            changed |= net.open_gates(t, &mut events);
            if !changed {
                break;
            }
        }
        if net.all_done() {
            return Ok(events);
        }

        for idx in 0..n {
            let s = &net.servers[idx];
            inflow[idx] = s.inputs.iter().map(|&(u, f)| f * rate[u]).sum();
            rate[idx] = if s.done.is_some() || s.gate.is_none() {
                0.0
            } else if received[idx] - processed[idx] > s.snap() {
                s.capacity
            } else {
                processed[idx] = received[idx];
                s.capacity.min(inflow[idx])
            };
            if rate[idx] > 0.0 && !started[idx] {
                started[idx] = true;
                events.push(SimEvent {
                    time: t,
                    entity: s.entity,
                    kind: s.kinds().0,
                    bytes: s.volume,
                });
            }
        }

        let mut dt = f64::INFINITY;
        for (idx, s) in net.servers.iter().enumerate() {
            if rate[idx] > 0.0 {
                dt = dt.min((s.volume - processed[idx]) / rate[idx]);
            }
            let queue = received[idx] - processed[idx];
            if queue > 0.0 && rate[idx] > inflow[idx] {
                dt = dt.min(queue / (rate[idx] - inflow[idx]));
            }
        }
        if !dt.is_finite() {
            return Err(Error::Simulation(format!("no progress possible at t = {t}")));
        }
        t += dt;
        for (idx, s) in net.servers.iter().enumerate() {
            received[idx] = (received[idx] + inflow[idx] * dt).min(s.volume);
            processed[idx] = (processed[idx] + rate[idx] * dt).min(received[idx]);
            if s.volume - received[idx] <= s.snap() {
                received[idx] = s.volume;
            }
            if received[idx] - processed[idx] <= s.snap() {
                processed[idx] = received[idx];
            }
        }
    }
    Err(Error::Simulation("fluid engine exceeded its step bound".into()))
}

/// Splits `bytes` into pieces of `chunk` bytes and a final remainder.
fn split(bytes: f64, chunk: f64, queue: &mut VecDeque<f64>) {
    if bytes <= 0.0 {
        return;
    }
    let whole = (bytes / chunk).floor();
    let mut left = bytes;
    for _ in 0..whole as usize {
        if left <= chunk {
            break;
        }
        queue.push_back(chunk);
        left -= chunk;
    }
    queue.push_back(left);
}

fn run_chunked(net: &mut Network, chunk: f64) -> Result<Vec<SimEvent>> {
    let l = net.layout;
    let pieces = |v: f64| (v / chunk).ceil();
    let push_pieces: f64 = (0..l.s * l.m).map(|i| pieces(net.servers[i].volume)).sum();
    let estimate: f64 = net.servers.iter().map(|s| pieces(s.volume)).sum::<f64>()
        + 2.0 * push_pieces * l.r as f64;
    if estimate > MAX_PIECES {
        return Err(Error::Simulation(format!(
            "chunk size {chunk} B creates about {estimate:.2e} pieces (limit {MAX_PIECES:.0e}); use a larger chunk"
        )));
    }
    let smallest = net
        .servers
        .iter()
        .filter(|s| s.entity.is_link() && s.volume > 0.0)
        .map(|s| s.volume)
        .fold(f64::INFINITY, f64::min);
    if chunk >= smallest {
        log::warn!("chunk size {chunk} B is not below the smallest link volume {smallest} B");
    }

    let n = net.servers.len();
    let mut queue: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
    for i in 0..l.s * l.m {
        split(net.servers[i].volume, chunk, &mut queue[i]);
    }
    let mut busy: Vec<Option<f64>> = vec![None; n];
    // Completion times are non-negative, so their bit patterns sort like the
    // numbers. Transfers sort before computations at equal times.
    let mut pending: BinaryHeap<Reverse<(u64, bool, usize)>> = BinaryHeap::new();
    let mut events = Vec::new();
    let mut t = 0.0f64;
    loop {
        loop {
            let mut changed = false;
            for idx in 0..n {
                let s = &net.servers[idx];
                if s.done.is_none()
                    && s.gate.is_some()
                    && busy[idx].is_none()
                    && queue[idx].is_empty()
                    && net.inputs_done(idx)
                {
                    net.servers[idx].done = Some(t);
                    changed = true;
                }
            }
            for idx in 0..n {
                let s = &net.servers[idx];
                if busy[idx].is_none() && s.gate.is_some() {
                    if let Some(piece) = queue[idx].pop_front() {
                        busy[idx] = Some(piece);
                        events.push(SimEvent {
                            time: t,
                            entity: s.entity,
                            kind: s.kinds().0,
                            bytes: piece,
                        });
                        let end = t + piece / s.capacity;
                        pending.push(Reverse((end.to_bits(), !s.entity.is_link(), idx)));
                        changed = true;
                    }
                }
            }
            changed |= net.open_gates(t, &mut events);
            if !changed {
                break;
            }
        }
        let Some(Reverse((bits, _, _))) = pending.peek().copied() else {
            break;
        };
        t = f64::from_bits(bits);
        while let Some(&Reverse((b, _, idx))) = pending.peek() {
            if b != bits {
                break;
            }
            pending.pop();
            let piece = busy[idx].take().expect("completion of a busy server");
            let s = &net.servers[idx];
            events.push(SimEvent {
                time: t,
                entity: s.entity,
                kind: s.kinds().1,
                bytes: piece,
            });
            for &(dst, factor) in &s.outputs {
                if factor > 0.0 {
                    split(piece * factor, chunk, &mut queue[dst]);
                }
            }
        }
    }
    if net.all_done() {
        Ok(events)
    } else {
        Err(Error::Simulation(format!("chunked engine stalled at t = {t}")))
    }
}

/// Bytes that arrived somewhere other than the plan says.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationViolation {
    pub entity: String,
    pub expected: f64,
    pub observed: f64,
}

impl fmt::Display for ConservationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {} B, trace carries {} B", self.entity, self.expected, self.observed)
    }
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Compares the bytes delivered by `transfer_end` events with the plan:
/// every link carries its share, every mapper receives `Σ_i D_i x_ij` and
/// every reducer receives `α y_k` times the bytes the mappers received.
pub fn conservation_violations(
    p: &PlatformGraph,
    w: &Workload,
    plan: &ExecutionPlan,
    trace: &SimTrace,
) -> Vec<ConservationViolation> {
    let (s, m, r) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    let mut push = vec![vec![Neumaier::default(); m]; s];
    let mut shuffle = vec![vec![Neumaier::default(); r]; m];
    for e in trace.events.iter().filter(|e| e.kind == EventKind::TransferEnd) {
        match e.entity {
            Entity::PushLink { source, mapper } => push[source][mapper].add(e.bytes),
            Entity::ShuffleLink { mapper, reducer } => shuffle[mapper][reducer].add(e.bytes),
            _ => {}
        }
    }
    let load = plan.mapper_load(&w.data_at_source);
    let mapped: f64 = load.iter().sum();
    let mut out = Vec::new();
    let mut check = |entity: String, expected: f64, observed: f64| {
        if (observed - expected).abs() > CONSERVATION_TOLERANCE * expected.abs().max(1.0) {
            out.push(ConservationViolation {
                entity,
                expected,
                observed,
            });
        }
    };
    for i in 0..s {
        for j in 0..m {
            let link = Entity::PushLink { source: i, mapper: j };
            check(link.label(p), w.data_at_source[i] * plan.push_fraction[i][j], push[i][j].value());
        }
    }
    for j in 0..m {
        let mut total = Neumaier::default();
        for row in &push {
            total.add(row[j].value());
        }
        check(p.mappers[j].clone(), load[j], total.value());
        for k in 0..r {
            let link = Entity::ShuffleLink { mapper: j, reducer: k };
            check(link.label(p), w.alpha * plan.reducer_fraction[k] * load[j], shuffle[j][k].value());
        }
    }
    for k in 0..r {
        let mut total = Neumaier::default();
        for row in &shuffle {
            total.add(row[k].value());
        }
        check(p.reducers[k].clone(), w.alpha * mapped * plan.reducer_fraction[k], total.value());
    }
    out
}

/// Least-squares line of measured on predicted makespans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `measured = slope · predicted + intercept` over `(predicted, measured)` pairs.
pub fn correlate(pairs: &[(f64, f64)]) -> Result<Fit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::InvalidArgument(
            "all predicted values are equal; the fit is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = pairs.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - residual / syy } else { 1.0 };
    Ok(Fit {
        slope,
        intercept,
        r_squared,
    })
}
