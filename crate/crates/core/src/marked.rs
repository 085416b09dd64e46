//! Marked trees and the two operations that grow them, the builder that
//! executes a construction tree's program from the two-node seed while
//! checking the inductive invariants, the adjacency oracle, the
//! distance-correctness checkers, the canonical query sequence, and the
//! symmetric-view verifier.

use crate::canon::ported_branch_encoding;
use crate::ctree::{ConstructionTree, NodeId, NodeKind};
use crate::label::{is_final_substring, Label, STAR};
use crate::labelings::{compute_labelings, EdgeLabeling};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use thiserror::Error;

pub type GNodeId = u32;

#[derive(Debug, Error)]
pub enum MarkedError {
    #[error("node {0} is marked")]
    Marked(GNodeId),
    #[error("node {0} is already marked")]
    AlreadyMarked(GNodeId),
    #[error("node {0} is not a leaf")]
    NotALeaf(GNodeId),
    #[error("node {0} is not a 2-leaf (1-leaf reflection is only allowed on the seed graph)")]
    NotTwoLeaf(GNodeId),
    #[error("step {step}: expected exactly one node labeled {label}, found {found}")]
    LabelNotUnique { step: usize, label: String, found: usize },
    #[error("step {step} ({clause}): {detail}")]
    Invariant { step: usize, clause: &'static str, detail: String },
    #[error("node budget {budget} exceeded: build needs {demanded} nodes")]
    Budget { demanded: usize, budget: usize },
    #[error("canonical sequence: {0}")]
    Canonical(String),
    #[error("{0}")]
    Other(String),
}

/// Tree with persistent node identities, node labels, marks, and per-endpoint
/// port numbers. Ports stay within `1..=delta` and are distinct per node;
/// nodes copied next to already-marked structure may skip low port values
/// until the instance is padded to full degree.
#[derive(Clone)]
pub struct MarkedTree {
    delta: u8,
    labels: Vec<Label>,
    marked: Vec<bool>,
    adj: Vec<Vec<(GNodeId, u8)>>,
}

impl MarkedTree {
    /// The two-node seed: labels 1 and 2, one edge with port 1 at both ends.
    pub fn seed(delta: u8) -> Self {
        MarkedTree {
            delta,
            labels: vec![
                Label::new(delta, vec![1]).expect("valid"),
                Label::new(delta, vec![2]).expect("valid"),
            ],
            marked: vec![false, false],
            adj: vec![vec![(1, 1)], vec![(0, 1)]],
        }
    }

    pub fn delta(&self) -> u8 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: GNodeId) -> &Label {
        &self.labels[v as usize]
    }

    pub fn is_marked(&self, v: GNodeId) -> bool {
        self.marked[v as usize]
    }

    pub fn degree(&self, v: GNodeId) -> usize {
        self.adj[v as usize].len()
    }

    /// Neighbors with this node's own port on the connecting edge.
    pub fn neighbors(&self, v: GNodeId) -> &[(GNodeId, u8)] {
        &self.adj[v as usize]
    }

    pub fn port_to(&self, v: GNodeId, w: GNodeId) -> Option<u8> {
        self.adj[v as usize].iter().find(|&&(n, _)| n == w).map(|&(_, p)| p)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = GNodeId> {
        0..self.labels.len() as GNodeId
    }

    pub fn find_by_label(&self, label: &Label) -> Vec<GNodeId> {
        self.node_ids().filter(|&v| self.label(v) == label).collect()
    }

    pub fn is_leaf(&self, v: GNodeId) -> bool {
        self.degree(v) == 1
    }

    /// 2-leaf: a leaf whose position-0 symbol is 2.
    pub fn is_two_leaf(&self, v: GNodeId) -> bool {
        self.is_leaf(v) && self.label(v).sym(0) == Some(2)
    }

    /// The maximal connected unmarked component containing `v`.
    pub fn unmarked_component(&self, v: GNodeId) -> Vec<GNodeId> {
        debug_assert!(!self.marked[v as usize]);
        let mut seen = HashSet::from([v]);
        let mut queue = VecDeque::from([v]);
        let mut out = vec![v];
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &self.adj[u as usize] {
                if !self.marked[w as usize] && seen.insert(w) {
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out
    }

    /// All maximal unmarked components.
    pub fn unmarked_components(&self) -> Vec<Vec<GNodeId>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for v in self.node_ids() {
            if self.marked[v as usize] || seen[v as usize] {
                continue;
            }
            let comp = self.unmarked_component(v);
            for &u in &comp {
                seen[u as usize] = true;
            }
            out.push(comp);
        }
        out
    }

    /// BFS distances from `v` over the whole tree.
    pub fn distances_from(&self, v: GNodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
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

    fn add_edge(&mut self, a: GNodeId, pa: u8, b: GNodeId, pb: u8) {
        self.adj[a as usize].push((b, pa));
        self.adj[b as usize].push((a, pb));
    }

    fn new_node(&mut self, label: Label) -> GNodeId {
        let id = self.labels.len() as GNodeId;
        self.labels.push(label);
        self.marked.push(false);
        self.adj.push(Vec::new());
        id
    }

    /// Canonical description keyed by label: (marked, sorted neighbor
    /// records). Labels are unique in well-formed builds, so equality of
    /// these maps is label-identity of graphs.
    pub fn canonical_by_label(&self) -> BTreeMap<String, (bool, Vec<(String, u8, u8)>)> {
        let mut out = BTreeMap::new();
        for v in self.node_ids() {
            let mut nbrs: Vec<(String, u8, u8)> = self.adj[v as usize]
                .iter()
                .map(|&(w, p)| {
                    let back = self.port_to(w, v).expect("symmetric edge");
                    (self.label(w).to_string(), p, back)
                })
                .collect();
            nbrs.sort();
            out.insert(self.label(v).to_string(), (self.marked[v as usize], nbrs));
        }
        out
    }

    /// Plain adjacency lists, for shape comparisons.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        self.adj
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(w, _)| w).collect())
            .collect()
    }

    /// DOT rendering; marked nodes filled.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph marked_tree {\n");
        for v in self.node_ids() {
            let style = if self.marked[v as usize] { ", style=filled, fillcolor=gray" } else { "" };
            out.push_str(&format!("  n{} [label=\"{}\"{}];\n", v, self.label(v), style));
        }
        for v in self.node_ids() {
            for &(w, p) in &self.adj[v as usize] {
                if v < w {
                    let back = self.port_to(w, v).unwrap();
                    out.push_str(&format!(
                        "  n{} -- n{} [taillabel=\"{}\", headlabel=\"{}\"];\n",
                        v, w, p, back
                    ));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Joins `delta - 1` relabeled copies of `v`'s unmarked component at `v`;
/// the original component becomes copy 1 and `v`'s ports are renumbered so
/// port `i` enters copy `i`. Pre-existing node ids persist.
pub fn reflect(g: &MarkedTree, v: GNodeId) -> Result<MarkedTree, MarkedError> {
    if g.is_marked(v) {
        return Err(MarkedError::Marked(v));
    }
    if !g.is_leaf(v) {
        return Err(MarkedError::NotALeaf(v));
    }
    let seed_case = g.len() == 2 && g.marked.iter().all(|m| !m);
    if !g.is_two_leaf(v) && !seed_case {
        return Err(MarkedError::NotTwoLeaf(v));
    }
    let comp: Vec<GNodeId> = g.unmarked_component(v);
    let comp_set: HashSet<GNodeId> = comp.iter().copied().collect();
    let delta = g.delta;

    let mut out = g.clone();
    // copy 1 is the original; its non-center labels take prefix 1
    for &w in &comp {
        if w != v {
            out.labels[w as usize] = g.label(w).prepend(1).expect("valid");
        }
    }
    // fresh copies 2..=delta with prefix c, inheriting ports
    for c in 2..=delta {
        let mut map: HashMap<GNodeId, GNodeId> = HashMap::new();
        for &w in &comp {
            if w != v {
                let id = out.new_node(g.label(w).prepend(c).expect("valid"));
                map.insert(w, id);
            }
        }
        for &w in &comp {
            if w == v {
                continue;
            }
            for &(nbr, port) in g.neighbors(w) {
                if nbr == v {
                    // center-side port assigned during the renumbering below
                    out.adj[map[&w] as usize].push((v, port));
                    out.adj[v as usize].push((map[&w], 0));
                } else if comp_set.contains(&nbr) && w < nbr {
                    let back = g.port_to(nbr, w).expect("symmetric edge");
                    out.add_edge(map[&w], port, map[&nbr], back);
                }
            }
        }
    }
    // star the center and renumber its ports: port 1 into copy 1 (the
    // original neighbor), port c into copy c
    out.labels[v as usize] = g.label(v).prepend(STAR).expect("valid");
    let mut copy_index = 1u8;
    for entry in out.adj[v as usize].iter_mut() {
        entry.1 = copy_index;
        copy_index += 1;
    }
    Ok(out)
}

/// Marks `v`.
pub fn split(g: &MarkedTree, v: GNodeId) -> Result<MarkedTree, MarkedError> {
    if g.is_marked(v) {
        return Err(MarkedError::AlreadyMarked(v));
    }
    let mut out = g.clone();
    out.marked[v as usize] = true;
    Ok(out)
}

/// Adjacency predicted from the labels alone: two distinct unmarked nodes are
/// neighbors exactly when their labels agree on every position `>= 1` where
/// both carry digits.
pub fn neighbor_oracle(g: &MarkedTree, v: GNodeId, w: GNodeId) -> Result<bool, MarkedError> {
    if v == w {
        return Err(MarkedError::Other(format!("identical nodes {v}")));
    }
    if g.is_marked(v) {
        return Err(MarkedError::Marked(v));
    }
    if g.is_marked(w) {
        return Err(MarkedError::Marked(w));
    }
    let (a, b) = (g.label(v), g.label(w));
    let upto = a.len().min(b.len());
    for j in 1..upto {
        let (x, y) = (a.sym(j).unwrap(), b.sym(j).unwrap());
        if x != STAR && y != STAR && x != y {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Reflect,
    Split,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildStep {
    pub index: usize,
    pub t_node: NodeId,
    pub op: OpKind,
    pub target: GNodeId,
}

/// Full record of a build: per-step snapshots, the mirror map from reflect
/// nodes of the construction tree to their reflection centers, and the node
/// order used.
pub struct BuildTrace {
    pub delta: u8,
    pub order: Vec<NodeId>,
    pub steps: Vec<BuildStep>,
    /// snapshots[i] is the graph after i operations; snapshots[0] is the seed
    pub snapshots: Vec<MarkedTree>,
    pub mirror: BTreeMap<NodeId, GNodeId>,
}

impl std::fmt::Debug for BuildTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BuildTrace(delta={}, steps={}, final_nodes={})",
            self.delta,
            self.steps.len(),
            self.final_graph().len()
        )
    }
}

impl BuildTrace {
    pub fn final_graph(&self) -> &MarkedTree {
        self.snapshots.last().expect("at least the seed")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

/// Ancestor-first orders over the nodes of `t`.
pub enum BuildOrder {
    /// layer by layer, ids ascending within a layer
    Layers,
    /// depth-first pre-order, children in stored order
    DepthFirst,
    Custom(Vec<NodeId>),
}

fn order_nodes(t: &ConstructionTree, order: &BuildOrder) -> Result<Vec<NodeId>, MarkedError> {
    let seq = match order {
        BuildOrder::Layers => {
            let mut v: Vec<NodeId> = t.node_ids().collect();
            v.sort_by_key(|&x| (t.layer_of(x), x));
            v
        }
        BuildOrder::DepthFirst => {
            let mut out = Vec::with_capacity(t.len());
            let mut stack = vec![t.root()];
            while let Some(v) = stack.pop() {
                out.push(v);
                for &c in t.children(v).iter().rev() {
                    stack.push(c);
                }
            }
            out
        }
        BuildOrder::Custom(v) => v.clone(),
    };
    if seq.len() != t.len() {
        return Err(MarkedError::Other("order must cover every node".into()));
    }
    let mut placed = vec![false; t.len()];
    for &v in &seq {
        if let Some(p) = t.parent(v) {
            if !placed[p as usize] {
                return Err(MarkedError::Other(format!(
                    "order visits node {v} before its parent"
                )));
            }
        }
        placed[v as usize] = true;
    }
    Ok(seq)
}

/// Executes the reflect/split program of `t` from the seed. With `check` set,
/// asserts the five inductive invariants at every step and fails hard on the
/// first violation.
pub fn build_input_tree(
    t: &ConstructionTree,
    order: BuildOrder,
    check: bool,
) -> Result<BuildTrace, MarkedError> {
    let seq = order_nodes(t, &order)?;
    let labeling = check.then(|| compute_labelings(t));
    let mut g = MarkedTree::seed(t.b());
    let mut trace = BuildTrace {
        delta: t.b(),
        order: seq.clone(),
        steps: Vec::with_capacity(seq.len()),
        snapshots: vec![g.clone()],
        mirror: BTreeMap::new(),
    };
    let mut processed: HashSet<NodeId> = HashSet::new();

    for (step0, &tn) in seq.iter().enumerate() {
        let step = step0 + 1;
        let want = t.label(tn);
        let matches = g.find_by_label(want);
        if matches.len() != 1 {
            return Err(MarkedError::LabelNotUnique {
                step,
                label: want.to_string(),
                found: matches.len(),
            });
        }
        let target = matches[0];
        let op = match t.kind(tn) {
            NodeKind::Reflect => OpKind::Reflect,
            NodeKind::Split => OpKind::Split,
        };
        if check {
            check_pre(&g, step, target, op)?;
        }
        g = match op {
            OpKind::Reflect => {
                trace.mirror.insert(tn, target);
                reflect(&g, target)?
            }
            OpKind::Split => split(&g, target)?,
        };
        processed.insert(tn);
        if check {
            check_post(t, labeling.as_ref().unwrap(), &g, step, &processed)?;
        }
        trace.steps.push(BuildStep { index: step, t_node: tn, op, target });
        trace.snapshots.push(g.clone());
    }
    Ok(trace)
}

fn check_pre(g: &MarkedTree, step: usize, target: GNodeId, op: OpKind) -> Result<(), MarkedError> {
    if g.is_marked(target) {
        return Err(MarkedError::Invariant {
            step,
            clause: "node-class",
            detail: format!("target {} is marked", g.label(target)),
        });
    }
    if op == OpKind::Reflect {
        let seed_case = g.len() == 2;
        if !g.is_leaf(target) {
            return Err(MarkedError::Invariant {
                step,
                clause: "node-class",
                detail: format!("reflection target {} is not a leaf", g.label(target)),
            });
        }
        if !seed_case && !g.is_two_leaf(target) {
            return Err(MarkedError::Invariant {
                step,
                clause: "node-class",
                detail: format!("reflection target {} is not a 2-leaf", g.label(target)),
            });
        }
    }
    Ok(())
}

fn check_post(
    t: &ConstructionTree,
    labeling: &EdgeLabeling,
    g: &MarkedTree,
    step: usize,
    processed: &HashSet<NodeId>,
) -> Result<(), MarkedError> {
    let fail = |clause: &'static str, detail: String| MarkedError::Invariant { step, clause, detail };

    // distinct labels, independent as a set
    let labels: Vec<Label> = g.node_ids().map(|v| g.label(v).clone()).collect();
    {
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(fail("label-independence", format!("duplicate label {l}")));
            }
        }
        if let Some((x, y)) = crate::label::independence_witness(&labels)
            .map_err(|e| fail("label-independence", e.to_string()))?
        {
            return Err(fail(
                "label-independence",
                format!("{x} is a final substring of {y}"),
            ));
        }
    }

    // alternation: every edge joins a 1-node and a 2-node
    for v in g.node_ids() {
        for &(w, _) in g.neighbors(v) {
            if g.label(v).sym(0) == g.label(w).sym(0) {
                return Err(fail(
                    "two-node-law",
                    format!("edge {} -- {} joins equal 0-symbols", g.label(v), g.label(w)),
                ));
            }
        }
    }

    // components <-> crossing edges, with matching 2-leaf and interior labels
    let crossing: Vec<NodeId> = t
        .node_ids()
        .filter(|&c| {
            !processed.contains(&c)
                && t.parent(c).map(|p| processed.contains(&p)).unwrap_or(false)
        })
        .collect();
    let comps = g.unmarked_components();
    if comps.len() != crossing.len() {
        return Err(fail(
            "component-bijection",
            format!("{} components vs {} crossing edges", comps.len(), crossing.len()),
        ));
    }
    let mut used: HashSet<NodeId> = HashSet::new();
    for comp in &comps {
        let mut two_leaves = BTreeSet::new();
        let mut interior = BTreeSet::new();
        for &u in comp {
            if g.is_two_leaf(u) {
                two_leaves.insert(g.label(u).clone());
            } else {
                interior.insert(g.label(u).clone());
            }
        }
        let matched = crossing
            .iter()
            .copied()
            .find(|&c| labeling.psi_of(c) == &two_leaves && labeling.pi_of(c) == &interior);
        let Some(edge_child) = matched else {
            return Err(fail(
                "component-bijection",
                format!(
                    "no crossing edge labels a component with 2-leaves {:?} and interior {:?}",
                    two_leaves, interior
                ),
            ));
        };
        if !used.insert(edge_child) {
            return Err(fail(
                "component-bijection",
                format!("crossing edge below {} matched twice", t.label(edge_child)),
            ));
        }

        // 2-node degree law within the component
        let comp_set: HashSet<GNodeId> = comp.iter().copied().collect();
        for &u in comp {
            if g.label(u).sym(0) == Some(2) && !g.is_leaf(u) {
                let deg_in = g
                    .neighbors(u)
                    .iter()
                    .filter(|&&(w, _)| comp_set.contains(&w))
                    .count();
                if deg_in != g.delta() as usize {
                    return Err(fail(
                        "two-node-law",
                        format!(
                            "2-node {} has component degree {} != {}",
                            g.label(u),
                            deg_in,
                            g.delta()
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// The query order: reflect nodes of the construction tree ranked deepest
/// layer first (ties broken by label), each resolved to the mirror node whose
/// final label extends it. The root's mirror therefore comes last, after all
/// of its neighbors.
pub fn canonical_sequence(
    t: &ConstructionTree,
    trace: &BuildTrace,
) -> Result<Vec<GNodeId>, MarkedError> {
    let mut reflect_nodes = t.reflect_nodes();
    reflect_nodes.sort_by(|&a, &b| {
        t.layer_of(b)
            .cmp(&t.layer_of(a))
            .then_with(|| t.label(a).cmp(t.label(b)))
    });
    let g = trace.final_graph();
    let mut out = Vec::with_capacity(reflect_nodes.len());
    for u in reflect_nodes {
        let lu = t.label(u);
        let mut hits = Vec::new();
        for (_, &m) in trace.mirror.iter() {
            if is_final_substring(lu, g.label(m)).map_err(|e| MarkedError::Canonical(e.to_string()))? {
                hits.push(m);
            }
        }
        match hits.as_slice() {
            [m] => out.push(*m),
            _ => {
                return Err(MarkedError::Canonical(format!(
                    "{} mirror nodes extend reflect label {lu}",
                    hits.len()
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Full,
    PathOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    /// smallest split-target-to-2-leaf distance observed, if any split step
    /// saw a 2-leaf in its component
    pub minimum: Option<u32>,
    pub splits_checked: usize,
}

/// Replays the build and reports the minimum distance from any split target
/// to a 2-leaf of its unmarked component. `Full` replays the whole program
/// (gated by `node_budget` on the final graph size); `PathOnly` replays only
/// the ops along the first-child root-leaf path, which by the copy symmetry
/// of the reflection operation covers every split layer.
pub fn check_distance_correct(
    t: &ConstructionTree,
    mode: DistanceMode,
    node_budget: usize,
) -> Result<DistanceReport, MarkedError> {
    let program: Vec<NodeId> = match mode {
        DistanceMode::Full => {
            let splits = t.node_ids().filter(|&v| t.kind(v) == NodeKind::Split).count();
            if splits > node_budget {
                return Err(MarkedError::Budget { demanded: splits, budget: node_budget });
            }
            order_nodes(t, &BuildOrder::Layers)?
        }
        DistanceMode::PathOnly => {
            let mut path = vec![t.root()];
            loop {
                let v = *path.last().unwrap();
                let ch = t.children(v);
                if ch.is_empty() {
                    break;
                }
                let next = if ch.len() == 1 {
                    ch[0]
                } else {
                    t.jth_child(v, 1).map_err(|e| MarkedError::Other(e.to_string()))?
                };
                path.push(next);
            }
            path
        }
    };
    let mut g = MarkedTree::seed(t.b());
    let mut minimum: Option<u32> = None;
    let mut splits_checked = 0usize;
    for (step0, &tn) in program.iter().enumerate() {
        let matches = g.find_by_label(t.label(tn));
        let [target] = matches.as_slice() else {
            return Err(MarkedError::LabelNotUnique {
                step: step0 + 1,
                label: t.label(tn).to_string(),
                found: matches.len(),
            });
        };
        let target = *target;
        match t.kind(tn) {
            NodeKind::Reflect => g = reflect(&g, target)?,
            NodeKind::Split => {
                splits_checked += 1;
                update_min_distance(&g, target, &mut minimum);
                g = split(&g, target)?;
            }
        }
    }
    Ok(DistanceReport { minimum, splits_checked })
}

fn update_min_distance(g: &MarkedTree, target: GNodeId, minimum: &mut Option<u32>) {
    let comp = g.unmarked_component(target);
    let dist = g.distances_from(target);
    for &u in &comp {
        if u != target && g.is_two_leaf(u) {
            let d = dist[u as usize];
            if minimum.map(|m| d < m).unwrap_or(true) {
                *minimum = Some(d);
            }
        }
    }
}

/// Verifies, for every non-final entry of the canonical sequence, that the
/// branches hanging off the entry's edges look identical within the region a
/// bounded-radius sequential algorithm could have assembled: the chained
/// closure over entries seen so far with hop bound `2d - 2`, a final hop of
/// `d - 1`, cut at earlier entries. Returns the number of comparisons made.
pub fn check_symmetric_views(
    trace: &BuildTrace,
    seq: &[GNodeId],
    d: u32,
) -> Result<usize, MarkedError> {
    let g = trace.final_graph();
    let dist: Vec<Vec<u32>> = g.node_ids().map(|v| g.distances_from(v)).collect();
    let mut comparisons = 0usize;
    for i in 1..seq.len() {
        let w_i = seq[i - 1];
        let blockers: HashSet<GNodeId> = seq[..i - 1].iter().copied().collect();

        // closure over entries with index <= i
        let allowed = &seq[..i];
        let mut closure: HashSet<GNodeId> = HashSet::from([w_i]);
        loop {
            let mut grew = false;
            for &m in allowed {
                if closure.contains(&m) {
                    continue;
                }
                if closure.iter().any(|&c| dist[c as usize][m as usize] <= 2 * d - 2) {
                    closure.insert(m);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        // final hop
        let near: HashSet<GNodeId> = g
            .node_ids()
            .filter(|&v| closure.iter().any(|&c| dist[c as usize][v as usize] <= d - 1))
            .collect();
        // reachability from w_i avoiding earlier entries
        let mut scope: HashSet<GNodeId> = HashSet::new();
        if !blockers.contains(&w_i) {
            let mut queue = VecDeque::from([w_i]);
            scope.insert(w_i);
            while let Some(u) = queue.pop_front() {
                for &(w, _) in g.neighbors(u) {
                    if !blockers.contains(&w) && near.contains(&w) && scope.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }

        let neighbors_fn = |v: GNodeId| -> Vec<(u32, u8, u8)> {
            g.neighbors(v)
                .iter()
                .map(|&(w, p)| (w, p, g.port_to(w, v).unwrap()))
                .collect()
        };
        let in_scope = |v: GNodeId| scope.contains(&v);
        let mut encodings = Vec::new();
        for &(nbr, _) in g.neighbors(w_i) {
            if scope.contains(&nbr) {
                encodings.push(ported_branch_encoding(&neighbors_fn, &in_scope, w_i, nbr));
            }
        }
        for pair in encodings.windows(2) {
            comparisons += 1;
            if pair[0] != pair[1] {
                return Err(MarkedError::Other(format!(
                    "asymmetric branches at sequence entry {i}: {} vs {}",
                    pair[0], pair[1]
                )));
            }
        }
        // equality is transitive; count the implied pairs as compared
        let k = encodings.len();
        if k > 2 {
            comparisons += k * (k - 1) / 2 - (k - 1);
        }
    }
    Ok(comparisons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctree::build_t2;

    fn l(s: &str) -> Label {
        Label::parse(s, 3).unwrap()
    }

    #[test]
    fn seed_reflection_makes_star() {
        let g = MarkedTree::seed(3);
        let g1 = reflect(&g, 0).unwrap();
        assert_eq!(g1.len(), 4);
        assert_eq!(g1.label(0).to_string(), "*1");
        let mut leaves: Vec<String> = g1
            .node_ids()
            .filter(|&v| v != 0)
            .map(|v| g1.label(v).to_string())
            .collect();
        leaves.sort();
        assert_eq!(leaves, vec!["12", "22", "32"]);
        let mut ports: Vec<u8> = g1.neighbors(0).iter().map(|&(_, p)| p).collect();
        ports.sort();
        assert_eq!(ports, vec![1, 2, 3]);
    }

    #[test]
    fn second_reflection_matches_labelings() {
        let g = MarkedTree::seed(3);
        let g1 = reflect(&g, 0).unwrap();
        let v12 = g1.find_by_label(&l("12"))[0];
        let g2 = reflect(&g1, v12).unwrap();
        let mut labels: Vec<String> = g2.node_ids().map(|v| g2.label(v).to_string()).collect();
        labels.sort();
        let mut expected =
            vec!["*12", "1*1", "122", "132", "2*1", "222", "232", "3*1", "322", "332"];
        expected.sort();
        assert_eq!(labels, expected);
        // port c at the center enters copy c
        let center = g2.find_by_label(&l("*12"))[0];
        for &(nbr, p) in g2.neighbors(center) {
            let top = g2.label(nbr).sym(g2.label(nbr).len() - 1).unwrap();
            assert_eq!(top, p, "port {p} must enter copy {p}");
        }
    }

    #[test]
    fn reflect_preconditions() {
        let g = MarkedTree::seed(3);
        let g1 = reflect(&g, 0).unwrap();
        assert!(matches!(reflect(&g1, 0), Err(MarkedError::NotALeaf(_))));
        let g1m = split(&g1, 1).unwrap();
        assert!(matches!(reflect(&g1m, 1), Err(MarkedError::Marked(_))));
        assert!(matches!(split(&g1m, 1), Err(MarkedError::AlreadyMarked(_))));
    }

    #[test]
    fn split_separates_components() {
        let g = MarkedTree::seed(3);
        let g1 = reflect(&g, 0).unwrap();
        let v12 = g1.find_by_label(&l("12"))[0];
        let g2 = reflect(&g1, v12).unwrap();
        let center = g2.find_by_label(&l("*12"))[0];
        let g3 = split(&g2, center).unwrap();
        let comps = g3.unmarked_components();
        assert_eq!(comps.len(), 3);
        for comp in comps {
            assert_eq!(comp.len(), 3);
            let mut ls: Vec<String> = comp.iter().map(|&v| g3.label(v).to_string()).collect();
            ls.sort();
            let i = ls[1].chars().next().unwrap();
            assert_eq!(ls, vec![format!("{i}*1"), format!("{i}22"), format!("{i}32")]);
        }
    }

    #[test]
    fn build_t2_full_trace() {
        let t = build_t2(3).unwrap();
        let trace = build_input_tree(&t, BuildOrder::Layers, true).unwrap();
        let g = trace.final_graph();
        assert_eq!(g.len(), 40);
        assert!(g.node_ids().all(|v| g.is_marked(v)));
        assert_eq!(trace.steps.len(), 54);
        assert_eq!(trace.mirror.len(), 14);
    }

    #[test]
    fn build_orders_agree() {
        let t = build_t2(3).unwrap();
        let a = build_input_tree(&t, BuildOrder::Layers, true).unwrap();
        let b = build_input_tree(&t, BuildOrder::DepthFirst, true).unwrap();
        assert_eq!(
            a.final_graph().canonical_by_label(),
            b.final_graph().canonical_by_label()
        );
    }

    #[test]
    fn corrupted_tree_fails_at_first_affected_step() {
        let t = build_t2(3).unwrap();
        // swap two reflect labels in layer 4
        let mut labels: Vec<Label> = t.node_ids().map(|v| t.label(v).clone()).collect();
        let a = t.find_by_label(&l("122")).unwrap();
        let b = t.find_by_label(&l("222")).unwrap();
        labels.swap(a as usize, b as usize);
        let parent: Vec<NodeId> = t
            .node_ids()
            .map(|v| t.parent(v).unwrap_or(crate::ctree::NO_PARENT))
            .collect();
        let children: Vec<Vec<NodeId>> = t.node_ids().map(|v| t.children(v).to_vec()).collect();
        let bad = ConstructionTree::new(3, labels, parent, children).unwrap();
        let err = build_input_tree(&bad, BuildOrder::Layers, true).unwrap_err();
        assert!(
            matches!(err, MarkedError::Invariant { .. } | MarkedError::LabelNotUnique { .. }),
            "{err}"
        );
    }

    #[test]
    fn neighbor_oracle_matches_adjacency_everywhere() {
        let t = build_t2(3).unwrap();
        let trace = build_input_tree(&t, BuildOrder::Layers, true).unwrap();
        for g in &trace.snapshots {
            let unmarked: Vec<GNodeId> = g.node_ids().filter(|&v| !g.is_marked(v)).collect();
            for (ai, &a) in unmarked.iter().enumerate() {
                for &b in &unmarked[ai + 1..] {
                    let actual = g.neighbors(a).iter().any(|&(w, _)| w == b);
                    assert_eq!(
                        neighbor_oracle(g, a, b).unwrap(),
                        actual,
                        "{} vs {}",
                        g.label(a),
                        g.label(b)
                    );
                }
            }
        }
    }

    #[test]
    fn canonical_sequence_t2() {
        let t = build_t2(3).unwrap();
        let trace = build_input_tree(&t, BuildOrder::Layers, true).unwrap();
        let seq = canonical_sequence(&t, &trace).unwrap();
        assert_eq!(seq.len(), 14);
        let g = trace.final_graph();
        // deepest layer first: nine deepest mirrors, then the middle three,
        // then the root chain
        assert_eq!(g.label(seq[0]).to_string(), "*1132");
        assert_eq!(g.label(seq[8]).to_string(), "*3332");
        assert_eq!(g.label(seq[9]).to_string(), "*122");
        assert_eq!(g.label(seq[12]).to_string(), "*12");
        assert_eq!(g.label(seq[13]).to_string(), "111*1");
        let mirrors: HashSet<GNodeId> = trace.mirror.values().copied().collect();
        assert!(seq.iter().all(|m| mirrors.contains(m)));
        // the final entry's neighbors were all queried earlier
        let last = seq[13];
        for &(nbr, _) in g.neighbors(last) {
            assert!(seq[..13].contains(&nbr), "neighbor {} unqueried", g.label(nbr));
        }
    }

    #[test]
    fn t2_is_distance_2_correct() {
        let t = build_t2(3).unwrap();
        let report = check_distance_correct(&t, DistanceMode::Full, 1 << 20).unwrap();
        assert_eq!(report.minimum, Some(2));
        assert_eq!(report.splits_checked, 40);
        let path = check_distance_correct(&t, DistanceMode::PathOnly, 1 << 20).unwrap();
        assert_eq!(path.minimum, Some(2));
        assert_eq!(path.splits_checked, 4);
    }

    #[test]
    fn symmetric_views_hold_on_t2() {
        let t = build_t2(3).unwrap();
        let trace = build_input_tree(&t, BuildOrder::Layers, true).unwrap();
        let seq = canonical_sequence(&t, &trace).unwrap();
        let comparisons = check_symmetric_views(&trace, &seq, 2).unwrap();
        assert!(comparisons > 0);
    }
}
