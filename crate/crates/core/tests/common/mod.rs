//! Shared test networks: hand-built canonical fixtures plus a seeded random
//! generator of canonical multicast networks.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlnc_core::network::{normalize_network, Edge, NetworkSpec, Node, NodeKind};

pub fn node(id: &str, kind: NodeKind) -> Node {
    Node {
        id: id.into(),
        kind,
    }
}

/// The (4 choose 2) combination network: two messages fan out to four coded
/// middle edges, and each of the six sinks observes a distinct pair of them.
/// Decoding everywhere needs four pairwise independent coefficient vectors,
/// which exist over F_3 but not over F_2.
pub fn combination_network() -> NetworkSpec {
    let mut nodes = vec![
        node("s1", NodeKind::Source),
        node("s2", NodeKind::Source),
        node("hub", NodeKind::Relay),
    ];
    for i in 1..=4 {
        nodes.push(node(&format!("m{i}"), NodeKind::Relay));
    }
    let pairs = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];
    for (i, j) in pairs {
        nodes.push(node(&format!("t{i}{j}"), NodeKind::Sink));
    }
    let idx = |id: &str, nodes: &[Node]| nodes.iter().position(|n| n.id == id).unwrap();
    let mut edges = vec![
        Edge {
            tail: idx("s1", &nodes),
            head: idx("hub", &nodes),
        },
        Edge {
            tail: idx("s2", &nodes),
            head: idx("hub", &nodes),
        },
    ];
    let mut random_edges = BTreeSet::new();
    for i in 1..=4usize {
        random_edges.insert(edges.len());
        edges.push(Edge {
            tail: idx("hub", &nodes),
            head: idx(&format!("m{i}"), &nodes),
        });
    }
    let mut fixed = BTreeMap::new();
    for (i, j) in pairs {
        for mid in [i, j] {
            let dup = edges.len();
            edges.push(Edge {
                tail: idx(&format!("m{mid}"), &nodes),
                head: idx(&format!("t{i}{j}"), &nodes),
            });
            // The middle node's single input is edge 2 + (mid - 1).
            fixed.insert((1 + mid, dup), 1);
        }
    }
    let net = NetworkSpec::new(nodes, edges, 2, 6, random_edges, fixed).unwrap();
    net.validate_canonical().unwrap();
    net
}

/// Both messages meet at one hub that emits two coded edges; every sink
/// observes duplicates of the same two coded signals. All sinks share one
/// decoding event, so the all-sinks success probability is
/// (1 - 1/q)^2 (1 + 1/q), above the eta = 2 bound.
pub fn shared_bottleneck_network(d: usize) -> NetworkSpec {
    let mut nodes = vec![
        node("s1", NodeKind::Source),
        node("s2", NodeKind::Source),
        node("hub", NodeKind::Relay),
        node("p", NodeKind::Relay),
        node("q", NodeKind::Relay),
    ];
    for i in 1..=d {
        nodes.push(node(&format!("t{i}"), NodeKind::Sink));
    }
    let mut edges = vec![
        Edge { tail: 0, head: 2 },
        Edge { tail: 1, head: 2 },
        Edge { tail: 2, head: 3 },
        Edge { tail: 2, head: 4 },
    ];
    let random_edges: BTreeSet<usize> = [2usize, 3].into_iter().collect();
    let mut fixed = BTreeMap::new();
    for i in 0..d {
        let sink = 5 + i;
        let dup_p = edges.len();
        edges.push(Edge {
            tail: 3,
            head: sink,
        });
        fixed.insert((2, dup_p), 1);
        let dup_q = edges.len();
        edges.push(Edge {
            tail: 4,
            head: sink,
        });
        fixed.insert((3, dup_q), 1);
    }
    let net = NetworkSpec::new(nodes, edges, 2, d, random_edges, fixed).unwrap();
    net.validate_canonical().unwrap();
    net
}

/// Single source, single sink, a line of `hops` random coding edges. The
/// decode polynomial is one monomial, so the success probability equals
/// (1 - 1/q)^eta exactly.
pub fn chain_network(hops: usize) -> NetworkSpec {
    assert!(hops >= 1);
    let mut nodes = vec![node("s", NodeKind::Source)];
    for i in 1..=hops {
        nodes.push(node(&format!("n{i}"), NodeKind::Relay));
    }
    nodes.push(node("t", NodeKind::Sink));
    let mut edges = vec![Edge { tail: 0, head: 1 }];
    let mut random_edges = BTreeSet::new();
    for i in 1..hops {
        random_edges.insert(edges.len());
        edges.push(Edge {
            tail: i,
            head: i + 1,
        });
    }
    // Final random edge into the sink would not be canonical; tap it.
    random_edges.insert(edges.len());
    edges.push(Edge {
        tail: hops,
        head: hops + 1,
    });
    let raw = NetworkSpec::new(nodes, edges, 1, 1, random_edges, BTreeMap::new()).unwrap();
    normalize_network(&raw).unwrap()
}

/// Two disjoint branches from the source rejoin before the sink; every flow
/// solution crosses two of the four random edges.
pub fn parallel_paths_network() -> NetworkSpec {
    let text = r#"{"r":1,"d":1,"nodes":[
        {"id":"s","kind":"source"},{"id":"h","kind":"relay"},
        {"id":"p","kind":"relay"},{"id":"q","kind":"relay"},
        {"id":"j","kind":"relay"},{"id":"t","kind":"sink"}],
        "edges":[
          {"tail":"s","head":"h"},
          {"tail":"h","head":"p","random":true},
          {"tail":"h","head":"q","random":true},
          {"tail":"p","head":"j","random":true},
          {"tail":"q","head":"j","random":true},
          {"tail":"j","head":"t","coeffs":{"4":1,"5":1}}
        ]}"#;
    rlnc_core::parse_network(text).unwrap()
}

/// Seeded random layered DAG in canonical form: r sources into a width-r
/// first layer, one or two wider middle layers, receivers observing r
/// distinct last-layer nodes. All interior edges carry random coefficients.
pub fn random_layered_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(1..=2usize);
    let d = rng.random_range(1..=2usize);
    let extra_layers = rng.random_range(1..=2usize);

    let mut nodes: Vec<Node> = (0..r)
        .map(|a| node(&format!("s{}", a + 1), NodeKind::Source))
        .collect();
    let mut edges: Vec<Edge> = Vec::new();
    let mut random_edges = BTreeSet::new();

    let mut prev_layer: Vec<usize> = Vec::new();
    for a in 0..r {
        let v = nodes.len();
        nodes.push(node(&format!("l0_{a}"), NodeKind::Relay));
        edges.push(Edge { tail: a, head: v });
        prev_layer.push(v);
    }
    for layer in 1..=extra_layers {
        let width = rng.random_range(r.max(2)..=3usize);
        let mut this_layer = Vec::with_capacity(width);
        for w in 0..width {
            let v = nodes.len();
            nodes.push(node(&format!("l{layer}_{w}"), NodeKind::Relay));
            let fan_in = rng.random_range(1..=prev_layer.len().min(2));
            let mut feeds: Vec<usize> = prev_layer.clone();
            for _ in 0..fan_in {
                let pick = rng.random_range(0..feeds.len());
                let u = feeds.swap_remove(pick);
                random_edges.insert(edges.len());
                edges.push(Edge { tail: u, head: v });
            }
            this_layer.push(v);
        }
        prev_layer = this_layer;
    }
    for b in 0..d {
        let sink = nodes.len();
        nodes.push(node(&format!("t{}", b + 1), NodeKind::Sink));
        let mut feeds = prev_layer.clone();
        for _ in 0..r {
            let pick = rng.random_range(0..feeds.len());
            let u = feeds.swap_remove(pick);
            random_edges.insert(edges.len());
            edges.push(Edge {
                tail: u,
                head: sink,
            });
        }
    }
    let raw = NetworkSpec::new(nodes, edges, r, d, random_edges, BTreeMap::new()).unwrap();
    let net = normalize_network(&raw).unwrap();
    net.validate_canonical().unwrap();
    net
}

/// A mixed bag of canonical networks for the algebraic suites.
pub fn algebra_suite_networks() -> Vec<(String, NetworkSpec)> {
    let mut nets = vec![
        ("butterfly".to_string(), rlnc_core::butterfly()),
        ("combination".to_string(), combination_network()),
        ("shared2".to_string(), shared_bottleneck_network(2)),
        ("shared3".to_string(), shared_bottleneck_network(3)),
        ("chain4".to_string(), chain_network(4)),
        ("parallel".to_string(), parallel_paths_network()),
    ];
    for seed in [101u64, 202, 303] {
        nets.push((format!("random{seed}"), random_layered_network(seed)));
    }
    nets
}
