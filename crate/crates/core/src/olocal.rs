//! Sequential simulator for algorithms that are shown one node at a time,
//! observe a bounded-radius ball around it (with identity correspondence to
//! everything shown before), and must immediately orient the presented node's
//! edges. Includes the validity checker for sinkless orientation with exact
//! partial-output extendability.

use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

pub type INodeId = u32;
pub type Token = u32;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("node {node}: ports must be exactly 1..=degree, got {got:?}")]
    BadPorts { node: INodeId, got: Vec<u8> },
    #[error("asymmetric adjacency at nodes {0} and {1}")]
    Asymmetric(INodeId, INodeId),
    #[error("instance must be a connected tree")]
    NotATree,
    #[error("decision at node {node} must cover {expected} ports, got {got}")]
    BadDecision { node: INodeId, expected: usize, got: usize },
}

/// An undirected tree with a port numbering: each node numbers its incident
/// edges 1..=degree. Algorithms never see node ids.
#[derive(Clone)]
pub struct Instance {
    adj: Vec<Vec<(INodeId, u8)>>,
}

impl Instance {
    pub fn new(adj: Vec<Vec<(INodeId, u8)>>) -> Result<Self, InstanceError> {
        let n = adj.len();
        for (v, nbrs) in adj.iter().enumerate() {
            let mut ports: Vec<u8> = nbrs.iter().map(|&(_, p)| p).collect();
            ports.sort_unstable();
            if ports != (1..=nbrs.len() as u8).collect::<Vec<u8>>() {
                return Err(InstanceError::BadPorts { node: v as INodeId, got: ports });
            }
            for &(w, _) in nbrs {
                if !adj[w as usize].iter().any(|&(x, _)| x == v as INodeId) {
                    return Err(InstanceError::Asymmetric(v as INodeId, w));
                }
            }
        }
        let edges: usize = adj.iter().map(|a| a.len()).sum::<usize>() / 2;
        if n > 0 && edges != n - 1 {
            return Err(InstanceError::NotATree);
        }
        if n > 0 {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0u32]);
            seen[0] = true;
            let mut count = 1usize;
            while let Some(v) = queue.pop_front() {
                for &(w, _) in &adj[v as usize] {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        count += 1;
                        queue.push_back(w);
                    }
                }
            }
            if count != n {
                return Err(InstanceError::NotATree);
            }
        }
        Ok(Instance { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: INodeId) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: INodeId) -> &[(INodeId, u8)] {
        &self.adj[v as usize]
    }

    pub fn neighbor_at_port(&self, v: INodeId, port: u8) -> Option<INodeId> {
        self.adj[v as usize].iter().find(|&&(_, p)| p == port).map(|&(w, _)| w)
    }

    pub fn port_to(&self, v: INodeId, w: INodeId) -> Option<u8> {
        self.adj[v as usize].iter().find(|&&(x, _)| x == w).map(|&(_, p)| p)
    }

    pub fn adjacency(&self) -> &[Vec<(INodeId, u8)>] {
        &self.adj
    }

    pub fn distances_from(&self, v: INodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        dist[v as usize] = 0;
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &self.adj[u as usize] {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Ported edge list as JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let mut edges = Vec::new();
        for v in 0..self.n() as INodeId {
            for &(w, p) in &self.adj[v as usize] {
                if v < w {
                    let back = self.port_to(w, v).expect("symmetric");
                    edges.push(serde_json::json!({
                        "a": v, "b": w, "port_a": p, "port_b": back,
                    }));
                }
            }
        }
        serde_json::json!({ "n": self.n(), "edges": edges })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let n = value["n"].as_u64().ok_or("missing n")? as usize;
        let mut adj: Vec<Vec<(INodeId, u8)>> = vec![Vec::new(); n];
        for e in value["edges"].as_array().ok_or("missing edges")? {
            let a = e["a"].as_u64().ok_or("edge a")? as INodeId;
            let b = e["b"].as_u64().ok_or("edge b")? as INodeId;
            let pa = e["port_a"].as_u64().ok_or("edge port_a")? as u8;
            let pb = e["port_b"].as_u64().ok_or("edge port_b")? as u8;
            adj[a as usize].push((b, pa));
            adj[b as usize].push((a, pb));
        }
        Instance::new(adj).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ViewNode {
    pub token: Token,
    pub degree: u8,
    pub dist: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ViewEdge {
    pub a: Token,
    pub b: Token,
    pub port_a: u8,
    pub port_b: u8,
}

/// Everything an algorithm learns from one query: the ball around the center
/// as a graph over stable opaque tokens, with true degrees and both port
/// numbers of every revealed edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct View {
    pub center: Token,
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<ViewEdge>,
}

impl View {
    pub fn center_degree(&self) -> u8 {
        self.nodes.iter().find(|n| n.token == self.center).expect("center present").degree
    }

    pub fn degree_of(&self, token: Token) -> Option<u8> {
        self.nodes.iter().find(|n| n.token == token).map(|n| n.degree)
    }

    /// Neighbor token behind the center's given port, when revealed.
    pub fn neighbor_at_port(&self, port: u8) -> Option<Token> {
        for e in &self.edges {
            if e.a == self.center && e.port_a == port {
                return Some(e.b);
            }
            if e.b == self.center && e.port_b == port {
                return Some(e.a);
            }
        }
        None
    }

    /// Structure with tokens renamed to first-appearance ranks; two views
    /// with disjoint histories are isomorphic including ports iff their
    /// shapes agree.
    pub fn shape(&self) -> (u32, Vec<(u32, u8, u32)>, Vec<(u32, u32, u8, u8)>) {
        let mut rank: HashMap<Token, u32> = HashMap::new();
        for n in &self.nodes {
            let next = rank.len() as u32;
            rank.entry(n.token).or_insert(next);
        }
        (
            rank[&self.center],
            self.nodes.iter().map(|n| (rank[&n.token], n.degree, n.dist)).collect(),
            self.edges
                .iter()
                .map(|e| (rank[&e.a], rank[&e.b], e.port_a, e.port_b))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDir {
    Out,
    In,
}

/// Orientation of every edge incident to the queried node, indexed by port.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Decision {
    pub dirs: Vec<EdgeDir>,
}

impl Decision {
    pub fn single_out(out_port: u8, degree: usize) -> Decision {
        Decision {
            dirs: (1..=degree as u8)
                .map(|p| if p == out_port { EdgeDir::Out } else { EdgeDir::In })
                .collect(),
        }
    }

    pub fn all_in(degree: usize) -> Decision {
        Decision { dirs: vec![EdgeDir::In; degree] }
    }

    pub fn dir_at_port(&self, port: u8) -> EdgeDir {
        self.dirs[port as usize - 1]
    }

    pub fn out_ports(&self) -> Vec<u8> {
        self.dirs
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == EdgeDir::Out)
            .map(|(i, _)| i as u8 + 1)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TranscriptRecord {
    pub step: usize,
    pub query: Token,
    pub revealed_tokens: Vec<Token>,
    pub view: View,
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::json!({
                "step": r.step,
                "query": r.query,
                "revealed_tokens": r.revealed_tokens,
                "decision": r.decision.as_ref().map(|d| d.out_ports()),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Query-side state of one run: stable token assignment, presented nodes, and
/// the revealed views in order.
pub struct Session<'a> {
    inst: &'a Instance,
    locality: u32,
    token_of: HashMap<INodeId, Token>,
    presented: Vec<INodeId>,
    views: Vec<View>,
    dist_cache: Vec<Vec<u32>>,
}

impl<'a> Session<'a> {
    pub fn new(inst: &'a Instance, locality: u32) -> Self {
        Session {
            inst,
            locality,
            token_of: HashMap::new(),
            presented: Vec::new(),
            views: Vec::new(),
            dist_cache: Vec::new(),
        }
    }

    pub fn locality(&self) -> u32 {
        self.locality
    }

    pub fn presented(&self) -> &[INodeId] {
        &self.presented
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn token_of(&self, v: INodeId) -> Option<Token> {
        self.token_of.get(&v).copied()
    }

    pub fn known_nodes(&self) -> Vec<INodeId> {
        self.token_of.keys().copied().collect()
    }

    /// Reveals the ball of radius `locality` around `v`. Nodes are visited in
    /// breadth-first order following ascending ports, so token minting never
    /// depends on instance ids; previously seen nodes keep their tokens.
    pub fn reveal(&mut self, v: INodeId) -> View {
        let (order, dist) = self.ball(v);
        for &u in &order {
            let next = self.token_of.len() as Token;
            self.token_of.entry(u).or_insert(next);
        }
        let in_ball: HashSet<INodeId> = order.iter().copied().collect();
        let nodes: Vec<ViewNode> = order
            .iter()
            .map(|&u| ViewNode {
                token: self.token_of[&u],
                degree: self.inst.degree(u) as u8,
                dist: dist[&u],
            })
            .collect();
        let mut edges = Vec::new();
        for &u in &order {
            for &(w, p) in self.inst.neighbors(u) {
                if !in_ball.contains(&w) {
                    continue;
                }
                let (ta, tb) = (self.token_of[&u], self.token_of[&w]);
                if ta < tb {
                    edges.push(ViewEdge {
                        a: ta,
                        b: tb,
                        port_a: p,
                        port_b: self.inst.port_to(w, u).expect("symmetric"),
                    });
                }
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        let view = View { center: self.token_of[&v], nodes, edges };
        self.presented.push(v);
        self.dist_cache.push(self.inst.distances_from(v));
        self.views.push(view.clone());
        view
    }

    fn ball(&self, v: INodeId) -> (Vec<INodeId>, HashMap<INodeId, u32>) {
        let mut dist: HashMap<INodeId, u32> = HashMap::from([(v, 0)]);
        let mut order = vec![v];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            if dist[&u] == self.locality {
                continue;
            }
            let mut nbrs = self.inst.neighbors(u).to_vec();
            nbrs.sort_by_key(|&(_, p)| p);
            for (w, _) in nbrs {
                if !dist.contains_key(&w) {
                    dist.insert(w, dist[&u] + 1);
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        (order, dist)
    }

    /// A node is seen when some presented node lies within `locality` of it.
    pub fn node_seen(&self, v: INodeId) -> bool {
        self.dist_cache.iter().any(|d| d[v as usize] <= self.locality)
    }

    /// An edge is seen when some presented node lies within `locality` of
    /// both endpoints.
    pub fn edge_seen(&self, u: INodeId, w: INodeId) -> bool {
        self.dist_cache
            .iter()
            .any(|d| d[u as usize] <= self.locality && d[w as usize] <= self.locality)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Conflict,
    Sink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Ok,
    Violation { kind: ViolationKind, nodes: Vec<INodeId> },
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

/// Checks a partial output: `Ok` means the decided orientations extend to a
/// total orientation in which every node of degree at least 3 has an outgoing
/// edge and adjacent nodes agree per edge.
pub fn validate_sinkless_orientation(
    inst: &Instance,
    decisions: &BTreeMap<INodeId, Decision>,
) -> Verdict {
    let n = inst.n();
    // resolve each edge; for the key (u, w) with u < w, true means u -> w
    let mut oriented: HashMap<(INodeId, INodeId), bool> = HashMap::new();
    for (&v, d) in decisions {
        for &(w, p) in inst.neighbors(v) {
            let dir_out = d.dir_at_port(p) == EdgeDir::Out;
            let key = (v.min(w), v.max(w));
            let claimed = if v == key.0 { dir_out } else { !dir_out };
            if let Some(&prev) = oriented.get(&key) {
                if prev != claimed {
                    return Verdict::Violation {
                        kind: ViolationKind::Conflict,
                        nodes: vec![key.0, key.1],
                    };
                }
            } else {
                oriented.insert(key, claimed);
            }
        }
    }

    let has_out = |v: INodeId| -> bool {
        inst.neighbors(v).iter().any(|&(w, _)| {
            let key = (v.min(w), v.max(w));
            oriented.get(&key).map(|&d| (v == key.0) == d).unwrap_or(false)
        })
    };
    let constrained = |v: INodeId| inst.degree(v) >= 3;

    // crisp witness first: a node whose edges are all decided inward
    for v in 0..n as INodeId {
        if constrained(v) && !has_out(v) {
            let all_decided = inst
                .neighbors(v)
                .iter()
                .all(|&(w, _)| oriented.contains_key(&(v.min(w), v.max(w))));
            if all_decided {
                return Verdict::Violation { kind: ViolationKind::Sink, nodes: vec![v] };
            }
        }
    }

    // exact extendability over the free edges by tree DP:
    // feas[v][0] - subtree of v satisfiable with v's parent edge out of v
    // feas[v][1] - satisfiable with the parent edge into v
    // (fixed or absent parent edges carry the same value in both slots)
    if n == 0 {
        return Verdict::Ok;
    }
    let root: INodeId = 0;
    let mut parent = vec![u32::MAX; n];
    let mut order = Vec::with_capacity(n);
    {
        let mut stack = vec![root];
        let mut visited = vec![false; n];
        visited[0] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(w, _) in inst.neighbors(v) {
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    parent[w as usize] = v;
                    stack.push(w);
                }
            }
        }
    }
    let edge_state = |a: INodeId, b: INodeId| -> Option<bool> {
        // Some(true): oriented a -> b
        let key = (a.min(b), a.max(b));
        oriented.get(&key).map(|&d| (a == key.0) == d)
    };
    let mut feas = vec![[false; 2]; n];
    for &v in order.iter().rev() {
        let p = parent[v as usize];
        let children: Vec<INodeId> = inst
            .neighbors(v)
            .iter()
            .map(|&(w, _)| w)
            .filter(|&w| w != p)
            .collect();
        let mut fixed_out = false;
        let mut ok_all = true;
        let mut exists_feed = false; // some free child edge can point v -> c
        for &c in &children {
            match edge_state(v, c) {
                Some(d) => {
                    fixed_out |= d;
                    ok_all &= feas[c as usize][0];
                }
                None => {
                    let out_of_c = feas[c as usize][0]; // edge c -> v
                    let into_c = feas[c as usize][1]; // edge v -> c
                    if !(out_of_c || into_c) {
                        ok_all = false;
                    }
                    if into_c {
                        exists_feed = true;
                    }
                }
            }
        }
        let eval = |parent_out_of_v: Option<bool>| -> bool {
            ok_all && (!constrained(v) || fixed_out || parent_out_of_v == Some(true) || exists_feed)
        };
        if p == u32::MAX {
            let ok = eval(None);
            feas[v as usize] = [ok, ok];
        } else {
            match edge_state(v, p) {
                Some(d) => {
                    let ok = eval(Some(d));
                    feas[v as usize] = [ok, ok];
                }
                None => {
                    feas[v as usize] = [eval(Some(true)), eval(Some(false))];
                }
            }
        }
    }
    if feas[root as usize][0] {
        Verdict::Ok
    } else {
        let blame = order
            .iter()
            .copied()
            .find(|&v| !(feas[v as usize][0] || feas[v as usize][1]))
            .unwrap_or(root);
        Verdict::Violation { kind: ViolationKind::Sink, nodes: vec![blame] }
    }
}

/// Runs an algorithm over a query sequence. Decisions are immutable once
/// made; the transcript records every view and decision.
pub fn run(
    inst: &Instance,
    queries: &[INodeId],
    alg: &mut crate::algorithms::Algorithm,
    locality: u32,
) -> Result<(Transcript, BTreeMap<INodeId, Decision>), InstanceError> {
    let mut session = Session::new(inst, locality);
    let mut transcript = Transcript::default();
    let mut decisions = BTreeMap::new();
    for (i, &q) in queries.iter().enumerate() {
        let tokens_before = session.token_of.len() as Token;
        let view = session.reveal(q);
        let tokens_after = session.token_of.len() as Token;
        let decision = alg.decide(&view);
        if decision.dirs.len() != inst.degree(q) {
            return Err(InstanceError::BadDecision {
                node: q,
                expected: inst.degree(q),
                got: decision.dirs.len(),
            });
        }
        decisions.insert(q, decision.clone());
        transcript.records.push(TranscriptRecord {
            step: i + 1,
            query: view.center,
            revealed_tokens: (tokens_before..tokens_after).collect(),
            view,
            decision: Some(decision),
        });
    }
    Ok((transcript, decisions))
}
