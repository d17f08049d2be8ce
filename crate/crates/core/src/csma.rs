//! Carrier-sensing graphs, feasible-state enumeration, and the stationary
//! throughput of an ideal CSMA network.
//!
//! Links assigned to one channel form an undirected conflict graph: two
//! links are joined when either transmitter's signal arrives at the other
//! above the carrier-sense threshold, so they can never transmit together.
//! The sets of links that *can* transmit together are exactly the
//! independent sets of that graph. Modelling transmission/back-off cycles
//! as a continuous-time reversible Markov chain gives each feasible state
//! `F` the stationary weight `prod_k rho_k^{F(k)}`, and a link's throughput
//! is the rate-weighted probability mass of the states it is active in.
//!
//! Sensing edges are evaluated on large-scale fading alone (unit small-scale
//! gain): a per-draw graph would lose the stationarity the closed form
//! rests on.

use serde::{Deserialize, Serialize};

use crate::arms::{Allocation, TransmissionMode};
use crate::channel::{map_rate, compute_sinr, FadingDraw, LinkId, PhyParams, Topology};
use crate::error::{Error, Result};

/// One CSMA contender: a station's transmission occupying one or more
/// channels as a single back-off entity. Plain links occupy one band;
/// a bonded transmission occupies several and lives in the union conflict
/// graph of its channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contender {
    pub sta: usize,
    /// Bitmask of occupied bands (bit b set = a link on band b's channel).
    pub bands: u8,
}

impl Contender {
    pub fn occupies(&self, band: usize) -> bool {
        self.bands >> band & 1 == 1
    }

    pub fn band_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..8).filter(|&b| self.occupies(b))
    }
}

/// Per-channel (or, under bonding, per channel-group) conflict graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarrierSenseGraph {
    pub vertices: Vec<Contender>,
    /// Unordered conflict pairs as sorted `(i, j)` vertex indices.
    pub edges: Vec<(usize, usize)>,
    /// Band indices this graph covers; a single entry except when bonded
    /// contenders tie channels together.
    pub channels: Vec<usize>,
    /// Neighbour bitmask per vertex.
    adjacency: Vec<u32>,
}

impl CarrierSenseGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbours(&self, v: usize) -> u32 {
        self.adjacency[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a] >> b & 1 == 1
    }
}

/// Would a transmission from `tx` block `rx`'s carrier sense on `band`?
/// Both directions of a pair are checked by the graph builder; either one
/// suffices for a conflict.
fn senses(topology: &Topology, params: &PhyParams, tx: usize, rx: usize, band: usize) -> bool {
    let gain = params.link_gain(band, topology.sta_sta_distance(tx, rx));
    gain * params.transmit_power_mw() >= params.carrier_sense_threshold_mw()
}

/// Build the conflict graph over an explicit contender set. Two contenders
/// conflict when they share a channel on which either one's received power
/// at the other meets the sense threshold.
pub fn graph_for_contenders(
    topology: &Topology,
    contenders: &[Contender],
    channels: Vec<usize>,
    params: &PhyParams,
) -> CarrierSenseGraph {
    let n = contenders.len();
    let mut adjacency = vec![0u32; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let shared = contenders[i].bands & contenders[j].bands;
            if shared == 0 {
                continue;
            }
            let a = contenders[i].sta;
            let b = contenders[j].sta;
            let conflict = (0..8).filter(|&band| shared >> band & 1 == 1).any(|band| {
                senses(topology, params, a, b, band) || senses(topology, params, b, a, band)
            });
            if conflict {
                adjacency[i] |= 1 << j;
                adjacency[j] |= 1 << i;
                edges.push((i, j));
            }
        }
    }
    CarrierSenseGraph { vertices: contenders.to_vec(), edges, channels, adjacency }
}

/// Conflict graph of one channel under an allocation: vertices are the
/// stations with a link on `band`.
pub fn build_graph(
    topology: &Topology,
    allocation: &Allocation,
    band: usize,
    params: &PhyParams,
) -> CarrierSenseGraph {
    let contenders: Vec<Contender> = allocation
        .configs
        .iter()
        .enumerate()
        .filter(|(_, cfg)| cfg.has_band(band))
        .map(|(sta, _)| Contender { sta, bands: 1 << band })
        .collect();
    graph_for_contenders(topology, &contenders, vec![band], params)
}

/// All independent sets of a conflict graph, each encoded as a vertex
/// bitmask, in ascending mask order. The empty state is always present and
/// the set is closed under subsets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibleStateSet {
    pub states: Vec<u32>,
    pub n_vertices: usize,
}

impl FeasibleStateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Position of a state in the canonical ordering.
    pub fn position(&self, state: u32) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// Render a state as a bit-string with vertex 0 leftmost.
    pub fn bit_string(&self, state: u32) -> String {
        (0..self.n_vertices)
            .map(|v| if state >> v & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

/// Enumerate the independent sets of `graph`, refusing graphs above the
/// vertex cap (the state space is exponential in the vertex count).
pub fn enumerate_feasible_states(
    graph: &CarrierSenseGraph,
    cap: usize,
) -> Result<FeasibleStateSet> {
    let n = graph.n_vertices();
    if n > cap.min(32) {
        return Err(Error::StateSpaceOverflow {
            band: graph.channels.first().copied().unwrap_or(0),
            vertices: n,
            cap: cap.min(32),
        });
    }
    let mut states = Vec::new();
    // Depth-first over vertices: skip or, when no neighbour is already set,
    // take. Visits each independent set exactly once.
    fn recurse(v: usize, n: usize, mask: u32, adjacency: &[u32], out: &mut Vec<u32>) {
        if v == n {
            out.push(mask);
            return;
        }
        recurse(v + 1, n, mask, adjacency, out);
        if adjacency[v] & mask == 0 {
            recurse(v + 1, n, mask | 1 << v, adjacency, out);
        }
    }
    recurse(0, n, 0, &graph.adjacency, &mut states);
    states.sort_unstable();
    Ok(FeasibleStateSet { states, n_vertices: n })
}

/// Stationary law of the reversible CSMA chain over a feasible-state set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtrmResult {
    /// One probability per state, aligned with `FeasibleStateSet::states`.
    pub probabilities: Vec<f64>,
    /// Access intensity per vertex, as supplied.
    pub access_intensity: Vec<f64>,
}

/// Stationary probability of each feasible state: weight
/// `prod_k rho_k^{F(k)}` normalised over the whole set (empty product = 1).
pub fn stationary_distribution(states: &FeasibleStateSet, rho: &[f64]) -> Result<CtrmResult> {
    if rho.len() != states.n_vertices {
        return Err(Error::InvalidParams(format!(
            "rho has {} entries for {} vertices",
            rho.len(),
            states.n_vertices
        )));
    }
    if rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParams("access intensities must be strictly positive".into()));
    }
    let weights: Vec<f64> = states
        .states
        .iter()
        .map(|&s| {
            (0..states.n_vertices)
                .filter(|&k| s >> k & 1 == 1)
                .map(|k| rho[k])
                .product::<f64>()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(CtrmResult {
        probabilities: weights.iter().map(|w| w / z).collect(),
        access_intensity: rho.to_vec(),
    })
}

/// Per-vertex throughput: the rate-weighted stationary mass of the states
/// the vertex is active in. `rates(i, k)` is the rate of vertex `k` in the
/// `i`-th state and must be defined whenever `k` is active there.
pub fn link_throughput<F>(states: &FeasibleStateSet, ctrm: &CtrmResult, rates: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let mut out = vec![0.0; states.n_vertices];
    for (i, &s) in states.states.iter().enumerate() {
        let p = ctrm.probabilities[i];
        for k in 0..states.n_vertices {
            if s >> k & 1 == 1 {
                out[k] += rates(i, k) * p;
            }
        }
    }
    out
}

/// Station-level and total network throughput.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkThroughput {
    /// Throughput per station, summed over its links, in Mbps.
    pub per_device: Vec<f64>,
    /// Sum of per-device values, in Mbps.
    pub total: f64,
}

/// Full pipeline for one fading draw: conflict graphs per channel group,
/// feasible states, per-state SINR-to-rate evaluation (interference comes
/// from the other contenders active in the same state on the same channel),
/// stationary law, and aggregation per station.
pub fn network_throughput(
    topology: &Topology,
    allocation: &Allocation,
    fading: &FadingDraw,
    params: &PhyParams,
    mode: TransmissionMode,
) -> Result<NetworkThroughput> {
    let contenders = allocation.contenders(mode);
    throughput_of_contenders(topology, &contenders, fading, params)
}

/// Same pipeline over an explicit contender set; stations without a
/// contender simply stay silent. Used for partial allocations.
pub fn throughput_of_contenders(
    topology: &Topology,
    contenders: &[Contender],
    fading: &FadingDraw,
    params: &PhyParams,
) -> Result<NetworkThroughput> {
    let n_bands = params.n_bands();
    let mut per_device = vec![0.0; topology.n_stas()];

    for group in channel_groups(contenders, n_bands) {
        let members: Vec<Contender> = contenders
            .iter()
            .filter(|c| group.iter().any(|&b| c.occupies(b)))
            .copied()
            .collect();
        if members.is_empty() {
            continue;
        }
        let graph = graph_for_contenders(topology, &members, group.clone(), params);
        let states = enumerate_feasible_states(&graph, params.state_cap)?;
        let rho = vec![params.access_intensity; graph.n_vertices()];
        let ctrm = stationary_distribution(&states, &rho)?;

        // Rate of each active contender in each state, per occupied band.
        let rate_table: Vec<Vec<f64>> = states
            .states
            .iter()
            .map(|&s| {
                (0..graph.n_vertices())
                    .map(|k| {
                        if s >> k & 1 == 0 {
                            return 0.0;
                        }
                        state_rate(topology, &graph, s, k, fading, params)
                    })
                    .collect()
            })
            .collect();

        let per_vertex = link_throughput(&states, &ctrm, |i, k| rate_table[i][k]);
        for (k, t) in per_vertex.iter().enumerate() {
            per_device[graph.vertices[k].sta] += t;
        }
    }

    let total = per_device.iter().sum();
    Ok(NetworkThroughput { per_device, total })
}

/// Rate of contender `k` in state `s`: the sum over its occupied bands of
/// the rate mapped from the SINR against the other contenders active on
/// that band in `s`.
fn state_rate(
    topology: &Topology,
    graph: &CarrierSenseGraph,
    state: u32,
    k: usize,
    fading: &FadingDraw,
    params: &PhyParams,
) -> f64 {
    let me = graph.vertices[k];
    me.band_indices()
        .map(|band| {
            let link = LinkId { sta: me.sta, band };
            let active: Vec<LinkId> = graph
                .vertices
                .iter()
                .enumerate()
                .filter(|&(j, c)| j != k && state >> j & 1 == 1 && c.occupies(band))
                .map(|(_, c)| LinkId { sta: c.sta, band })
                .collect();
            let gamma = compute_sinr(link, &active, topology, fading, params);
            map_rate(gamma, params)
        })
        .sum()
}

/// Partition bands into groups that must be analysed jointly: bands tied
/// together by a multi-band contender share a group. Groups are returned
/// in ascending order of their lowest band; bands without any contender
/// are dropped.
fn channel_groups(contenders: &[Contender], n_bands: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n_bands).collect();
    fn find(parent: &mut Vec<usize>, b: usize) -> usize {
        if parent[b] == b {
            b
        } else {
            let root = find(parent, parent[b]);
            parent[b] = root;
            root
        }
    }
    for c in contenders {
        let bands: Vec<usize> = c.band_indices().filter(|&b| b < n_bands).collect();
        for w in bands.windows(2) {
            let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[ra] = rb;
        }
    }
    let occupied: Vec<bool> = (0..n_bands)
        .map(|b| contenders.iter().any(|c| c.occupies(b)))
        .collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for b in 0..n_bands {
        if !occupied[b] {
            continue;
        }
        let root = find(&mut parent, b);
        match groups.iter_mut().find(|g| find(&mut parent, g[0]) == root) {
            Some(g) => g.push(b),
            None => groups.push(vec![b]),
        }
    }
    groups
}

/// Debug view of a graph and its state space: vertices, edges, and states
/// as bit-strings with vertex 0 leftmost.
pub fn debug_dump(graph: &CarrierSenseGraph, states: &FeasibleStateSet) -> serde_json::Value {
    serde_json::json!({
        "channels": graph.channels,
        "vertices": graph.vertices,
        "edges": graph.edges,
        "states": states.states.iter().map(|&s| states.bit_string(s)).collect::<Vec<_>>(),
    })
}
