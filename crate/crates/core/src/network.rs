//! Multicast network model: canonical single-source-per-message DAGs with
//! ancestrally labeled edges, flow analysis, and the code parameters derived
//! from them.
//!
//! Edge indices are 0-based everywhere in this API. The 1-based "labels" used
//! in network files (`coeffs` keys) and CLI output are always `index + 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("network contains a directed cycle")]
    CycleDetected,
    #[error("degree violation: {0}")]
    DegreeViolation(String),
    #[error("infeasible degrees: {0}")]
    InfeasibleDegrees(String),
    #[error("no flow solution for sink {sink}: min-cut below r")]
    NoFlow { sink: usize },
    #[error("network is not in canonical form: {0}")]
    NotCanonical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Relay,
    Sink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

/// A directed edge between node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// A multicast network. Immutable after construction; every analysis below is
/// a pure function of the value.
///
/// In canonical form: edges `0..r` leave the `r` source nodes (one each), sink
/// `beta` observes the consecutive edge block ending at label `k_beta`
/// (1-based), source and observed edges never carry random coefficients, and
/// the edge order is ancestral, so the encoding matrix built from it is
/// strictly upper triangular.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    r: usize,
    d: usize,
    random_edges: BTreeSet<usize>,
    /// (in_edge, out_edge) -> coefficient, for deterministic out-edges only.
    /// Values are reduced modulo q when a code is built over F_q.
    fixed_coefficients: BTreeMap<(usize, usize), u64>,
    /// 1-based label of the last observed edge per sink; empty when some sink
    /// block is not a consecutive run of r edges.
    sink_offsets: Vec<usize>,
}

/// One set of r pairwise edge-disjoint source-to-sink paths for a sink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub sink: usize,
    pub edge_set: BTreeSet<usize>,
}

/// Parameters controlling the success-probability bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    /// Max over sinks of the random-edge count in that sink's most favorable
    /// flow solution.
    pub nu: usize,
    /// Total number of edges carrying random coefficients.
    pub eta: usize,
    /// Per-sink prefix counts of random edges (non-decreasing, ends at eta).
    pub eta_per_sink: Vec<usize>,
    /// Number of topology-allowed positions in the encoding matrix:
    /// sum over nodes of in-degree times out-degree.
    pub sigma: usize,
    /// sigma / E^2.
    pub rho: f64,
}

impl NetworkSpec {
    /// Builds a network from parts, validating structure (unique ids, index
    /// ranges, kind counts, acyclicity) but not canonical form.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        r: usize,
        d: usize,
        random_edges: BTreeSet<usize>,
        fixed_coefficients: BTreeMap<(usize, usize), u64>,
    ) -> Result<Self, NetworkError> {
        if r == 0 {
            return Err(NetworkError::Parse("r must be at least 1".into()));
        }
        if d == 0 {
            return Err(NetworkError::Parse("d must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(NetworkError::Parse(format!("duplicate node id {:?}", n.id)));
            }
        }
        let sources = nodes.iter().filter(|n| n.kind == NodeKind::Source).count();
        if sources != r {
            return Err(NetworkError::Parse(format!(
                "r = {r} but {sources} source nodes declared"
            )));
        }
        let sinks = nodes.iter().filter(|n| n.kind == NodeKind::Sink).count();
        if sinks != d {
            return Err(NetworkError::Parse(format!(
                "d = {d} but {sinks} sink nodes declared"
            )));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= nodes.len() || e.head >= nodes.len() {
                return Err(NetworkError::Parse(format!(
                    "edge {} references an unknown node",
                    i + 1
                )));
            }
            if e.tail == e.head {
                return Err(NetworkError::CycleDetected);
            }
        }
        for &e in &random_edges {
            if e >= edges.len() {
                return Err(NetworkError::Parse(format!(
                    "random edge label {} out of range",
                    e + 1
                )));
            }
        }
        for &(i, j) in fixed_coefficients.keys() {
            if i >= edges.len() || j >= edges.len() {
                return Err(NetworkError::Parse(
                    "coefficient edge label out of range".into(),
                ));
            }
            if edges[i].head != edges[j].tail {
                return Err(NetworkError::Parse(format!(
                    "coefficient ({}, {}) does not follow an in/out edge pair",
                    i + 1,
                    j + 1
                )));
            }
            if random_edges.contains(&j) {
                return Err(NetworkError::Parse(format!(
                    "edge {} is random but has a fixed coefficient",
                    j + 1
                )));
            }
        }
        let mut net = NetworkSpec {
            nodes,
            edges,
            r,
            d,
            random_edges,
            fixed_coefficients,
            sink_offsets: Vec::new(),
        };
        net.topological_node_order()?;
        net.sink_offsets = net.consecutive_sink_offsets().unwrap_or_default();
        Ok(net)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn random_edges(&self) -> &BTreeSet<usize> {
        &self.random_edges
    }

    #[inline]
    pub fn fixed_coefficients(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.fixed_coefficients
    }

    /// 1-based label of the last observed edge for each sink, when every sink
    /// block is consecutive.
    pub fn sink_offsets(&self) -> &[usize] {
        &self.sink_offsets
    }

    /// Node indices of source nodes, in declaration order.
    pub fn source_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Source)
            .collect()
    }

    /// Node indices of sink nodes, in declaration order.
    pub fn sink_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Sink)
            .collect()
    }

    pub fn in_edges(&self, node: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].head == node)
            .collect()
    }

    pub fn out_edges(&self, node: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].tail == node)
            .collect()
    }

    /// Edge indices observed by sink `beta` (its in-edges, ascending).
    pub fn observed_edges(&self, beta: usize) -> Vec<usize> {
        let sink = self.sink_nodes()[beta];
        self.in_edges(sink)
    }

    fn consecutive_sink_offsets(&self) -> Option<Vec<usize>> {
        let mut offsets = Vec::with_capacity(self.d);
        for beta in 0..self.d {
            let obs = self.observed_edges(beta);
            if obs.len() != self.r {
                return None;
            }
            let last = *obs.last()?;
            if obs.first()? + self.r - 1 != last {
                return None;
            }
            offsets.push(last + 1); // 1-based label of the block end
        }
        Some(offsets)
    }

    fn topological_node_order(&self) -> Result<Vec<usize>, NetworkError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[e.head] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut i = 0;
        while i < queue.len() {
            let v = queue[i];
            i += 1;
            order.push(v);
            for e in &self.edges {
                if e.tail == v {
                    indegree[e.head] -= 1;
                    if indegree[e.head] == 0 {
                        queue.push(e.head);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(NetworkError::CycleDetected);
        }
        Ok(order)
    }

    /// Checks every canonical-form invariant. `Ok(())` means codes, critical
    /// matrices, and parameters may be built directly on this network.
    pub fn validate_canonical(&self) -> Result<(), NetworkError> {
        // Ancestral order: anything feeding an edge's tail has a smaller index.
        for j in 0..self.edges.len() {
            let tail = self.edges[j].tail;
            for i in 0..self.edges.len() {
                if self.edges[i].head == tail && i >= j {
                    return Err(NetworkError::NotCanonical(format!(
                        "edge {} feeds edge {} but is not labeled before it",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        // Source and sink degrees.
        let sources = self.source_nodes();
        for &s in &sources {
            if !self.in_edges(s).is_empty() || self.out_edges(s).len() != 1 {
                return Err(NetworkError::NotCanonical(format!(
                    "source {:?} must have in-degree 0 and out-degree 1",
                    self.nodes[s].id
                )));
            }
        }
        for &t in &self.sink_nodes() {
            if self.in_edges(t).len() != self.r || !self.out_edges(t).is_empty() {
                return Err(NetworkError::NotCanonical(format!(
                    "sink {:?} must have in-degree r and out-degree 0",
                    self.nodes[t].id
                )));
            }
        }
        // Edges 0..r are the source output edges, in source order.
        for (alpha, &s) in sources.iter().enumerate() {
            if alpha >= self.edges.len() || self.edges[alpha].tail != s {
                return Err(NetworkError::NotCanonical(format!(
                    "edge {} must leave source {:?}",
                    alpha + 1,
                    self.nodes[s].id
                )));
            }
        }
        // Sink blocks: consecutive, ordered, disjoint, past the source edges.
        let offsets = self.consecutive_sink_offsets().ok_or_else(|| {
            NetworkError::NotCanonical("sink observed edges are not consecutive blocks".into())
        })?;
        let mut prev = self.r; // treat sources as block 0
        for (beta, &k) in offsets.iter().enumerate() {
            if k < prev + self.r {
                return Err(NetworkError::NotCanonical(format!(
                    "sink {} block ends at label {} which overlaps earlier edges",
                    beta + 1,
                    k
                )));
            }
            prev = k;
        }
        // Random edges: never source edges, never observed edges, never past
        // the last sink block (they would not affect any sink there).
        let k_last = *offsets.last().expect("d >= 1");
        for &e in &self.random_edges {
            if e < self.r {
                return Err(NetworkError::NotCanonical(format!(
                    "source edge {} cannot be random",
                    e + 1
                )));
            }
            if e >= k_last {
                return Err(NetworkError::NotCanonical(format!(
                    "random edge {} lies past the last sink block",
                    e + 1
                )));
            }
        }
        for beta in 0..self.d {
            for &e in &self.observed_edges(beta) {
                if self.random_edges.contains(&e) {
                    return Err(NetworkError::NotCanonical(format!(
                        "observed edge {} cannot be random",
                        e + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Unit-capacity max-flow value from the sources to sink `beta`.
    pub fn min_cut(&self, beta: usize) -> usize {
        let n = self.nodes.len();
        let super_source = n;
        let sink = self.sink_nodes()[beta];
        // Arc list with residual capacities; arcs 2i / 2i+1 are a pair.
        let mut arcs: Vec<(usize, usize, i32)> = Vec::new();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let push_arc =
            |arcs: &mut Vec<(usize, usize, i32)>, adj: &mut Vec<Vec<usize>>, u: usize, v: usize| {
                adj[u].push(arcs.len());
                arcs.push((u, v, 1));
                adj[v].push(arcs.len());
                arcs.push((v, u, 0));
            };
        for s in self.source_nodes() {
            push_arc(&mut arcs, &mut adj, super_source, s);
        }
        for e in &self.edges {
            push_arc(&mut arcs, &mut adj, e.tail, e.head);
        }
        let mut flow = 0usize;
        loop {
            // BFS for an augmenting path.
            let mut parent_arc = vec![usize::MAX; n + 1];
            let mut visited = vec![false; n + 1];
            visited[super_source] = true;
            let mut queue = vec![super_source];
            let mut qi = 0;
            while qi < queue.len() {
                let u = queue[qi];
                qi += 1;
                for &a in &adj[u] {
                    let (_, v, cap) = arcs[a];
                    if cap > 0 && !visited[v] {
                        visited[v] = true;
                        parent_arc[v] = a;
                        queue.push(v);
                    }
                }
            }
            if !visited[sink] {
                break;
            }
            let mut v = sink;
            while v != super_source {
                let a = parent_arc[v];
                arcs[a].2 -= 1;
                arcs[a ^ 1].2 += 1;
                v = arcs[a].0;
            }
            flow += 1;
        }
        flow
    }

    /// Exhaustively enumerates all flow solutions for sink `beta`: sets of r
    /// pairwise edge-disjoint paths carrying each source edge to a distinct
    /// observed edge.
    pub fn enumerate_flow_solutions(&self, beta: usize) -> Result<Vec<FlowSolution>, NetworkError> {
        self.validate_canonical()?;
        if self.min_cut(beta) < self.r {
            return Err(NetworkError::NoFlow { sink: beta });
        }
        assert!(
            self.edges.len() <= 64,
            "flow enumeration is limited to 64 edges"
        );
        let observed: BTreeSet<usize> = self.observed_edges(beta).into_iter().collect();
        let out_by_node: Vec<Vec<usize>> =
            (0..self.nodes.len()).map(|v| self.out_edges(v)).collect();

        let mut solutions: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        let mut used = 0u64;

        // Routes source edge `alpha` (edge index alpha in canonical form) to
        // some unused observed edge, then recurses on the next source. Paths
        // are edge-disjoint via the `used` bitmask; r paths ending at distinct
        // observed edges saturate all r of them.
        fn route(
            net: &NetworkSpec,
            observed: &BTreeSet<usize>,
            out_by_node: &[Vec<usize>],
            alpha: usize,
            used: &mut u64,
            solutions: &mut BTreeSet<BTreeSet<usize>>,
        ) {
            if alpha == net.r {
                let set: BTreeSet<usize> = (0..net.edges.len())
                    .filter(|&e| *used & (1 << e) != 0)
                    .collect();
                solutions.insert(set);
                return;
            }
            extend(net, observed, out_by_node, alpha, alpha, used, solutions);
        }

        // Extends the current path ending at edge `e`. An observed edge ends
        // the path (its head is the sink); anything else continues through the
        // out-edges of its head.
        fn extend(
            net: &NetworkSpec,
            observed: &BTreeSet<usize>,
            out_by_node: &[Vec<usize>],
            alpha: usize,
            e: usize,
            used: &mut u64,
            solutions: &mut BTreeSet<BTreeSet<usize>>,
        ) {
            let bit = 1u64 << e;
            debug_assert_eq!(*used & bit, 0);
            *used |= bit;
            if observed.contains(&e) {
                route(net, observed, out_by_node, alpha + 1, used, solutions);
            } else {
                for &g in &out_by_node[net.edges[e].head] {
                    if *used & (1 << g) == 0 {
                        extend(net, observed, out_by_node, alpha, g, used, solutions);
                    }
                }
            }
            *used &= !bit;
        }

        route(self, &observed, &out_by_node, 0, &mut used, &mut solutions);
        debug_assert!(!solutions.is_empty(), "min-cut >= r guarantees a solution");
        Ok(solutions
            .into_iter()
            .map(|edge_set| FlowSolution {
                sink: beta,
                edge_set,
            })
            .collect())
    }

    /// Derives nu, eta, per-sink eta, sigma, and rho. Requires canonical form
    /// and a flow solution for every sink.
    pub fn compute_parameters(&self) -> Result<NetworkParameters, NetworkError> {
        self.validate_canonical()?;
        let eta = self.random_edges.len();
        let eta_per_sink: Vec<usize> = self
            .sink_offsets
            .iter()
            .map(|&k| {
                self.random_edges
                    .iter()
                    .filter(|&&e| e >= self.r && e < k)
                    .count()
            })
            .collect();
        // nu: per sink take the most favorable (fewest random edges) flow
        // solution, then the maximum across sinks. This reading is isolated
        // here so it can be swapped if needed.
        let mut nu = 0usize;
        for beta in 0..self.d {
            let solutions = self.enumerate_flow_solutions(beta)?;
            let best = solutions
                .iter()
                .map(|s| s.edge_set.intersection(&self.random_edges).count())
                .min()
                .expect("enumeration returned at least one solution");
            nu = nu.max(best);
        }
        let sigma: usize = (0..self.nodes.len())
            .map(|v| self.in_edges(v).len() * self.out_edges(v).len())
            .sum();
        let e2 = self.edges.len() * self.edges.len();
        Ok(NetworkParameters {
            nu,
            eta,
            eta_per_sink,
            sigma,
            rho: sigma as f64 / e2 as f64,
        })
    }
}

/// The 15-edge canonical butterfly: two messages, two sinks, nine random
/// coding edges, and four deterministic duplication edges feeding the sinks.
pub fn butterfly() -> NetworkSpec {
    let node = |id: &str, kind: NodeKind| Node {
        id: id.into(),
        kind,
    };
    let nodes = vec![
        node("s1", NodeKind::Source),
        node("s2", NodeKind::Source),
        node("A", NodeKind::Relay),
        node("B", NodeKind::Relay),
        node("C", NodeKind::Relay),
        node("D", NodeKind::Relay),
        node("N1", NodeKind::Relay),
        node("N2", NodeKind::Relay),
        node("T1a", NodeKind::Relay),
        node("T1b", NodeKind::Relay),
        node("T2a", NodeKind::Relay),
        node("T2b", NodeKind::Relay),
        node("t1", NodeKind::Sink),
        node("t2", NodeKind::Sink),
    ];
    let idx = |id: &str| nodes.iter().position(|n| n.id == id).unwrap();
    let edge = |tail: &str, head: &str| Edge {
        tail: idx(tail),
        head: idx(head),
    };
    let edges = vec![
        edge("s1", "A"),   // 1
        edge("s2", "B"),   // 2
        edge("A", "C"),    // 3
        edge("A", "N1"),   // 4
        edge("N1", "T1a"), // 5
        edge("B", "C"),    // 6
        edge("B", "N2"),   // 7
        edge("N2", "T2a"), // 8
        edge("C", "D"),    // 9
        edge("D", "T1b"),  // 10
        edge("D", "T2b"),  // 11
        edge("T1a", "t1"), // 12 duplicates 5
        edge("T1b", "t1"), // 13 duplicates 10
        edge("T2a", "t2"), // 14 duplicates 8
        edge("T2b", "t2"), // 15 duplicates 11
    ];
    let random_edges: BTreeSet<usize> = (2..11).collect(); // labels 3..11
    let fixed_coefficients: BTreeMap<(usize, usize), u64> =
        [((4, 11), 1), ((9, 12), 1), ((7, 13), 1), ((10, 14), 1)]
            .into_iter()
            .collect();
    let net = NetworkSpec::new(nodes, edges, 2, 2, random_edges, fixed_coefficients)
        .expect("builtin butterfly is well-formed");
    net.validate_canonical()
        .expect("builtin butterfly is canonical");
    net
}

// ---------------------------------------------------------------------------
// Network file format
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct NetworkFile {
    r: usize,
    d: usize,
    nodes: Vec<NodeFile>,
    edges: Vec<EdgeFile>,
}

#[derive(Deserialize)]
struct NodeFile {
    id: String,
    kind: NodeKind,
}

#[derive(Deserialize)]
struct EdgeFile {
    tail: String,
    head: String,
    #[serde(default)]
    random: bool,
    /// Map from 1-based in-edge label to coefficient, for deterministic edges.
    #[serde(default)]
    coeffs: Option<BTreeMap<String, u64>>,
}

/// Parses a JSON network document. Edge order in the file defines the
/// ancestral labeling. The result may be canonical already or a raw graph to
/// pass through [`normalize_network`].
pub fn parse_network(text: &str) -> Result<NetworkSpec, NetworkError> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
    let nodes: Vec<Node> = file
        .nodes
        .iter()
        .map(|n| Node {
            id: n.id.clone(),
            kind: n.kind,
        })
        .collect();
    let node_idx: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    if node_idx.len() != nodes.len() {
        return Err(NetworkError::Parse("duplicate node id".into()));
    }
    let mut edges = Vec::with_capacity(file.edges.len());
    let mut random_edges = BTreeSet::new();
    let mut fixed_coefficients = BTreeMap::new();
    for (j, e) in file.edges.iter().enumerate() {
        let tail = *node_idx
            .get(e.tail.as_str())
            .ok_or_else(|| NetworkError::Parse(format!("unknown node {:?}", e.tail)))?;
        let head = *node_idx
            .get(e.head.as_str())
            .ok_or_else(|| NetworkError::Parse(format!("unknown node {:?}", e.head)))?;
        edges.push(Edge { tail, head });
        if e.random {
            random_edges.insert(j);
            if e.coeffs.is_some() {
                return Err(NetworkError::Parse(format!(
                    "edge {} is random but has fixed coefficients",
                    j + 1
                )));
            }
        }
        if let Some(coeffs) = &e.coeffs {
            for (label, &value) in coeffs {
                let in_label: usize = label
                    .parse()
                    .map_err(|_| NetworkError::Parse(format!("bad edge label {label:?}")))?;
                if in_label == 0 || in_label > file.edges.len() {
                    return Err(NetworkError::Parse(format!(
                        "coefficient label {in_label} out of range"
                    )));
                }
                fixed_coefficients.insert((in_label - 1, j), value);
            }
        }
    }
    let net = NetworkSpec::new(
        nodes,
        edges,
        file.r,
        file.d,
        random_edges,
        fixed_coefficients,
    )?;
    // File-level degree checks: what a document may declare is stricter than
    // what the in-process normalizer accepts.
    for &s in &net.source_nodes() {
        if !net.in_edges(s).is_empty() {
            return Err(NetworkError::DegreeViolation(format!(
                "source {:?} has incoming edges",
                net.nodes[s].id
            )));
        }
        if net.out_edges(s).is_empty() {
            return Err(NetworkError::DegreeViolation(format!(
                "source {:?} has no outgoing edge",
                net.nodes[s].id
            )));
        }
    }
    for &t in &net.sink_nodes() {
        let din = net.in_edges(t).len();
        if din != net.r {
            return Err(NetworkError::DegreeViolation(format!(
                "sink {:?} has {} incoming edges, expected r = {}",
                net.nodes[t].id, din, net.r
            )));
        }
        if !net.out_edges(t).is_empty() {
            return Err(NetworkError::DegreeViolation(format!(
                "sink {:?} has outgoing edges",
                net.nodes[t].id
            )));
        }
    }
    Ok(net)
}

/// Brings a raw acyclic graph into canonical form:
///
/// * a source without (in-degree 0, out-degree 1) gets an auxiliary source
///   node in front of it;
/// * a receiver whose inputs cannot serve directly as observed edges gets an
///   auxiliary sink fed by duplication edges (deterministic, coefficient 1,
///   one per selected input); a receiver with more than r inputs first gets r
///   random combiner edges;
/// * edges are relabeled ancestrally with source edges first and sink blocks
///   consecutive, disjoint, ascending at the end.
///
/// Canonical inputs are returned unchanged.
pub fn normalize_network(raw: &NetworkSpec) -> Result<NetworkSpec, NetworkError> {
    if raw.validate_canonical().is_ok() {
        return Ok(raw.clone());
    }

    let mut nodes = raw.nodes.clone();
    let mut edges = raw.edges.clone();
    // Randomness / coefficients tracked by working edge index.
    let mut random: BTreeSet<usize> = raw.random_edges.clone();
    let mut coeffs: BTreeMap<(usize, usize), u64> = raw.fixed_coefficients.clone();
    let mut source_edge_of: Vec<usize> = Vec::with_capacity(raw.r);
    // Observed (duplication or retained) edges per sink, in final block order.
    let mut observed_of: Vec<Vec<usize>> = Vec::with_capacity(raw.d);

    for s in raw.source_nodes() {
        let din = raw.in_edges(s).len();
        let douts = raw.out_edges(s);
        // A message-injection edge cannot itself be random (it has nothing to
        // draw coefficients from), so such a source is demoted too.
        if din == 0 && douts.len() == 1 && !random.contains(&douts[0]) {
            source_edge_of.push(douts[0]);
            continue;
        }
        if douts.is_empty() {
            return Err(NetworkError::DegreeViolation(format!(
                "source {:?} has no outgoing edge",
                raw.nodes[s].id
            )));
        }
        // Demote and prepend an auxiliary source.
        nodes[s].kind = NodeKind::Relay;
        let aux = nodes.len();
        nodes.push(Node {
            id: format!("__src_{}", raw.nodes[s].id),
            kind: NodeKind::Source,
        });
        let inject = edges.len();
        edges.push(Edge { tail: aux, head: s });
        source_edge_of.push(inject);
        // The demoted node forwards the message to its deterministic
        // out-edges unless the caller declared something else.
        for &j in &douts {
            if !random.contains(&j) {
                coeffs.entry((inject, j)).or_insert(1);
            }
        }
    }

    for t in raw.sink_nodes() {
        let ins = raw.in_edges(t);
        let douts = raw.out_edges(t);
        if ins.len() < raw.r {
            return Err(NetworkError::InfeasibleDegrees(format!(
                "receiver {:?} has {} incoming edges, fewer than r = {}",
                raw.nodes[t].id,
                ins.len(),
                raw.r
            )));
        }
        let direct_ok = ins.len() == raw.r
            && douts.is_empty()
            && ins.iter().all(|e| !random.contains(e))
            && ins.iter().all(|&e| !source_edge_of.contains(&e));
        if direct_ok {
            observed_of.push(ins);
            continue;
        }
        // Demote the receiver and hang an auxiliary sink off it.
        nodes[t].kind = NodeKind::Relay;
        let aux_sink = nodes.len();
        nodes.push(Node {
            id: format!("__obs_{}", raw.nodes[t].id),
            kind: NodeKind::Sink,
        });
        let selected: Vec<usize> = if ins.len() == raw.r {
            ins
        } else {
            // More inputs than messages: r random combiner edges first.
            let mut combiners = Vec::with_capacity(raw.r);
            for i in 0..raw.r {
                let mix = nodes.len();
                nodes.push(Node {
                    id: format!("__mix{}_{}", i + 1, raw.nodes[t].id),
                    kind: NodeKind::Relay,
                });
                let c = edges.len();
                edges.push(Edge { tail: t, head: mix });
                random.insert(c);
                combiners.push(c);
            }
            combiners
        };
        let mut block = Vec::with_capacity(raw.r);
        for &e in &selected {
            let dup = edges.len();
            edges.push(Edge {
                tail: edges[e].head,
                head: aux_sink,
            });
            coeffs.insert((e, dup), 1);
            block.push(dup);
        }
        observed_of.push(block);
    }

    // Relabel: source edges, then internal edges in topological-tail order,
    // then the sink blocks.
    let interim = NetworkSpec {
        nodes: nodes.clone(),
        edges: edges.clone(),
        r: raw.r,
        d: raw.d,
        random_edges: random.clone(),
        fixed_coefficients: coeffs.clone(),
        sink_offsets: Vec::new(),
    };
    let node_order = interim.topological_node_order()?;
    let mut rank = vec![0usize; nodes.len()];
    for (pos, &v) in node_order.iter().enumerate() {
        rank[v] = pos;
    }
    let observed_flat: BTreeSet<usize> = observed_of.iter().flatten().copied().collect();
    let mut internal: Vec<usize> = (0..edges.len())
        .filter(|e| !source_edge_of.contains(e) && !observed_flat.contains(e))
        .collect();
    internal.sort_by_key(|&e| (rank[edges[e].tail], e));

    let mut order: Vec<usize> = Vec::with_capacity(edges.len());
    order.extend(&source_edge_of);
    order.extend(&internal);
    for block in &observed_of {
        order.extend(block);
    }
    let mut new_index = vec![0usize; edges.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let new_edges: Vec<Edge> = order.iter().map(|&old| edges[old]).collect();
    let new_random: BTreeSet<usize> = random.iter().map(|&e| new_index[e]).collect();
    let new_coeffs: BTreeMap<(usize, usize), u64> = coeffs
        .iter()
        .map(|(&(i, j), &v)| ((new_index[i], new_index[j]), v))
        .collect();

    let result = NetworkSpec::new(nodes, new_edges, raw.r, raw.d, new_random, new_coeffs)?;
    result.validate_canonical().map_err(|e| {
        NetworkError::NotCanonical(format!("normalization produced a non-canonical graph: {e}"))
    })?;
    Ok(result)
}
