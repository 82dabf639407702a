use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;

use super::kpis::{exp_inverse_cdf, kpis_from_records, FlowKpis, MeanKpis, PacketRecord};
use super::{Result, SimConfig, SimError};
use crate::netmodel::{NetworkGraph, PathSpec, TrafficMatrix};
use crate::seed::{self, derive_indexed};

/// Draws one on phase and one off phase length (seconds) by inverse CDF.
pub fn sample_onoff<R: Rng + ?Sized>(tau_on: f64, tau_off: f64, rng: &mut R) -> (f64, f64) {
    let t_on = exp_inverse_cdf(rng.gen::<f64>(), tau_on);
    let t_off = exp_inverse_cdf(rng.gen::<f64>(), tau_off);
    (t_on, t_off)
}

/// One radio (or wired link) transmission, for invariant checks in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub node: usize,
    pub link: usize,
    pub packet: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub transmissions: Vec<Transmission>,
    /// Packet ids accepted into each link queue, in arrival order.
    pub enqueued: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Emit { flow: usize },
    TxDone { server: usize },
    Arrive { packet: usize },
    Retry { node: usize },
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Packet {
    flow: usize,
    record: usize,
    hop: usize,
    /// Sequence number of the last enqueue, used for FIFO head selection.
    enq_seq: u64,
}

struct Source {
    rng: seed::Rng,
    interval: f64,
    tau_on: f64,
    tau_off: f64,
    on_end: f64,
    off_len: f64,
}

impl Source {
    /// Next emission instant strictly after an emission at `t`.
    fn next_emission(&mut self, t: f64) -> f64 {
        let next = t + self.interval;
        if next < self.on_end {
            return next;
        }
        let mut on_start = self.on_end + self.off_len;
        loop {
            let (t_on, t_off) = sample_onoff(self.tau_on, self.tau_off, &mut self.rng);
            self.on_end = on_start + t_on;
            self.off_len = t_off;
            if t_on > 0.0 {
                return on_start;
            }
            on_start = self.on_end + t_off;
        }
    }
}

#[derive(Default)]
struct Radio {
    sending: Option<(usize, usize)>,
    backing_off: bool,
}

struct Sim<'a> {
    graph: &'a NetworkGraph,
    paths: &'a [PathSpec],
    config: &'a SimConfig,
    heap: BinaryHeap<Event>,
    seq: u64,
    packets: Vec<Packet>,
    records: Vec<Vec<PacketRecord>>,
    queues: Vec<VecDeque<usize>>,
    // Wired mode: packet in service on each link.
    link_busy: Vec<Option<usize>>,
    // Wireless mode.
    radios: Vec<Radio>,
    interferers: Vec<Vec<usize>>,
    backoff_rngs: Vec<seed::Rng>,
    trace: Option<SimTrace>,
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event { time, seq: self.seq, kind });
    }

    fn wireless(&self) -> bool {
        self.config.interference_radius_m.is_some()
    }

    fn service_time(&self, link: usize) -> f64 {
        self.config.packet_bits() / (self.graph.link(link).capacity_kbps * 1000.0)
    }

    fn enqueue(&mut self, packet: usize, t: f64) {
        let p = &self.packets[packet];
        let link = self.paths[p.flow].links[p.hop];
        if self.wireless() {
            if self.queues[link].len() >= self.config.queue_capacity {
                return;
            }
            self.accept(link, packet);
            let node = self.graph.link(link).src;
            let radio = &self.radios[node];
            if radio.sending.is_none() && !radio.backing_off {
                self.try_transmit(node, t);
            }
        } else if self.link_busy[link].is_none() {
            self.accept(link, packet);
            self.queues[link].pop_back();
            self.start_wired(link, packet, t);
        } else if self.queues[link].len() < self.config.queue_capacity {
            self.accept(link, packet);
        }
        // Otherwise the packet is dropped: its record keeps `recv_time = None`.
    }

    fn accept(&mut self, link: usize, packet: usize) {
        self.seq += 1;
        self.packets[packet].enq_seq = self.seq;
        self.queues[link].push_back(packet);
        if let Some(tr) = self.trace.as_mut() {
            tr.enqueued[link].push(packet);
        }
    }

    fn record_tx(&mut self, node: usize, link: usize, packet: usize, start: f64, end: f64) {
        if let Some(tr) = self.trace.as_mut() {
            tr.transmissions.push(Transmission { node, link, packet, start, end });
        }
    }

    fn start_wired(&mut self, link: usize, packet: usize, t: f64) {
        let end = t + self.service_time(link);
        self.link_busy[link] = Some(packet);
        self.record_tx(self.graph.link(link).src, link, packet, t, end);
        self.schedule(end, EventKind::TxDone { server: link });
    }

    fn medium_busy(&self, node: usize) -> bool {
        self.interferers[node].iter().any(|&m| self.radios[m].sending.is_some())
    }

    fn try_transmit(&mut self, node: usize, t: f64) {
        // Oldest head-of-line packet across this node's outgoing links.
        let head = self
            .graph
            .out_links(node)
            .iter()
            .filter_map(|&l| self.queues[l].front().map(|&p| (self.packets[p].enq_seq, l)))
            .min();
        let Some((_, link)) = head else { return };
        if self.medium_busy(node) {
            let mean = self.config.backoff_mean_s;
            let wait = exp_inverse_cdf(self.backoff_rngs[node].gen::<f64>(), mean);
            self.radios[node].backing_off = true;
            self.schedule(t + wait, EventKind::Retry { node });
            return;
        }
        let packet = self.queues[link].pop_front().expect("head exists");
        let end = t + self.service_time(link);
        self.radios[node].sending = Some((packet, link));
        self.record_tx(node, link, packet, t, end);
        self.schedule(end, EventKind::TxDone { server: node });
    }

    fn forward(&mut self, packet: usize, t: f64) {
        let arrival = t + self.config.prop_delay_s;
        self.schedule(arrival, EventKind::Arrive { packet });
    }

    fn run(&mut self, sources: &mut [Source]) {
        let duration = self.config.duration_s;
        while let Some(Event { time: t, kind, .. }) = self.heap.pop() {
            match kind {
                EventKind::Emit { flow } => {
                    let record = self.records[flow].len();
                    self.records[flow].push(PacketRecord { send_time: t, recv_time: None });
                    let packet = self.packets.len();
                    self.packets.push(Packet { flow, record, hop: 0, enq_seq: 0 });
                    self.enqueue(packet, t);
                    let next = sources[flow].next_emission(t);
                    if next < duration {
                        self.schedule(next, EventKind::Emit { flow });
                    }
                }
                EventKind::TxDone { server } => {
                    if self.wireless() {
                        let (packet, _) =
                            self.radios[server].sending.take().expect("radio was sending");
                        self.forward(packet, t);
                        if !self.radios[server].backing_off {
                            self.try_transmit(server, t);
                        }
                    } else {
                        let packet = self.link_busy[server].take().expect("link was busy");
                        self.forward(packet, t);
                        if let Some(next) = self.queues[server].pop_front() {
                            self.start_wired(server, next, t);
                        }
                    }
                }
                EventKind::Arrive { packet } => {
                    let p = &mut self.packets[packet];
                    p.hop += 1;
                    if p.hop == self.paths[p.flow].links.len() {
                        self.records[p.flow][p.record].recv_time = Some(t);
                    } else {
                        self.enqueue(packet, t);
                    }
                }
                EventKind::Retry { node } => {
                    self.radios[node].backing_off = false;
                    if self.radios[node].sending.is_none() {
                        self.try_transmit(node, t);
                    }
                }
            }
        }
    }
}

fn check_inputs(
    graph: &NetworkGraph,
    paths: &[PathSpec],
    traffic: &TrafficMatrix,
    config: &SimConfig,
) -> Result<()> {
    if paths.len() != traffic.len() {
        return Err(SimError::InvalidArgument(format!(
            "{} paths but {} traffic rows",
            paths.len(),
            traffic.len()
        )));
    }
    for p in paths {
        p.validate(graph)?;
    }
    traffic.validate()?;
    config.validate()
}

pub fn simulate(
    graph: &NetworkGraph,
    paths: &[PathSpec],
    traffic: &TrafficMatrix,
    config: &SimConfig,
) -> Result<Vec<FlowKpis>> {
    run_sim(graph, paths, traffic, config, false).map(|(k, _)| k)
}

/// Like [`simulate`] but also returns every transmission and enqueue.
pub fn simulate_traced(
    graph: &NetworkGraph,
    paths: &[PathSpec],
    traffic: &TrafficMatrix,
    config: &SimConfig,
) -> Result<(Vec<FlowKpis>, SimTrace)> {
    run_sim(graph, paths, traffic, config, true).map(|(k, t)| (k, t.expect("tracing enabled")))
}

fn run_sim(
    graph: &NetworkGraph,
    paths: &[PathSpec],
    traffic: &TrafficMatrix,
    config: &SimConfig,
    traced: bool,
) -> Result<(Vec<FlowKpis>, Option<SimTrace>)> {
    check_inputs(graph, paths, traffic, config)?;
    let n = graph.node_count();
    let interferers = match config.interference_radius_m {
        Some(radius) => (0..n)
            .map(|a| (0..n).filter(|&b| b != a && graph.distance(a, b) <= radius).collect())
            .collect(),
        None => vec![Vec::new(); n],
    };
    let interval = config.packet_bits() / (traffic.data_rate_kbps * 1000.0);
    let mut sources: Vec<Source> = traffic
        .rows
        .iter()
        .enumerate()
        .map(|(f, row)| Source {
            rng: seed::rng(derive_indexed(config.seed, "flow", f as u64)),
            interval,
            tau_on: row.tau_on,
            tau_off: row.tau_off,
            on_end: 0.0,
            off_len: 0.0,
        })
        .collect();
    let mut sim = Sim {
        graph,
        paths,
        config,
        heap: BinaryHeap::new(),
        seq: 0,
        packets: Vec::new(),
        records: vec![Vec::new(); paths.len()],
        queues: vec![VecDeque::new(); graph.link_count()],
        link_busy: vec![None; graph.link_count()],
        radios: (0..n).map(|_| Radio::default()).collect(),
        interferers,
        backoff_rngs: (0..n)
            .map(|i| seed::rng(derive_indexed(config.seed, "backoff", i as u64)))
            .collect(),
        trace: traced.then(|| SimTrace {
            transmissions: Vec::new(),
            enqueued: vec![Vec::new(); graph.link_count()],
        }),
    };
    // Every source opens with an on phase at t = 0.
    for (flow, src) in sources.iter_mut().enumerate() {
        let first = src.next_emission(-src.interval);
        if first < config.duration_s {
            sim.schedule(first, EventKind::Emit { flow });
        }
    }
    sim.run(&mut sources);
    let kpis = sim.records.iter().map(|r| kpis_from_records(r, config)).collect();
    Ok((kpis, sim.trace))
}

/// Runs `runs` independent simulations with seeds `seed, seed + 1, ...` and
/// averages each flow's KPIs over the runs where they are defined.
pub fn simulate_avg(
    graph: &NetworkGraph,
    paths: &[PathSpec],
    traffic: &TrafficMatrix,
    config: &SimConfig,
    runs: usize,
) -> Result<Vec<MeanKpis>> {
    if runs == 0 {
        return Err(SimError::InvalidArgument("at least one run is required".into()));
    }
    let all: Vec<Vec<FlowKpis>> = (0..runs as u64)
        .map(|r| simulate(graph, paths, traffic, &config.clone().with_seed(config.seed.wrapping_add(r))))
        .collect::<Result<_>>()?;
    Ok((0..paths.len())
        .map(|f| MeanKpis::average(&all.iter().map(|run| &run[f]).collect::<Vec<_>>()))
        .collect())
}
