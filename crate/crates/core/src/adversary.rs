//! The adaptive adversary: pads the built input tree to a full-degree
//! instance, queries the canonical sequence, tracks the lowest port each
//! algorithm orients outward with probability at least `1/delta`, and swaps
//! the unseen hinterlands behind ports so that every forced outgoing edge
//! feeds the final query, which then cannot avoid an invalid output. Also
//! hosts the asymptotic radius reporter.

use crate::algorithms::Algorithm;
use crate::ctree::ConstructionTree;
use crate::marked::{
    build_input_tree, canonical_sequence, check_distance_correct, BuildOrder, DistanceMode,
    MarkedError, MarkedTree,
};
use crate::olocal::{
    validate_sinkless_orientation, Decision, EdgeDir, INodeId, Instance, InstanceError, Session,
    Verdict, View, ViolationKind,
};
use crate::tower::power_tower_exceeds;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("n = {n} too small: need at least {min}")]
    NTooSmall { n: usize, min: usize },
    #[error("step {step}: {msg}")]
    Step { step: usize, msg: String },
    #[error("build: {0}")]
    Marked(#[from] MarkedError),
    #[error("instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("{0}")]
    Other(String),
}

/// Pads every node of the built tree to degree `delta` with fresh leaves,
/// then extends one leaf below `path_anchor` into a path until the instance
/// holds exactly `n` nodes. Existing ports never change; new ports fill the
/// free slots in ascending order.
pub fn pad_graph(
    g: &MarkedTree,
    n: usize,
    path_anchor: Option<u32>,
) -> Result<Instance, AdversaryError> {
    let delta = g.delta() as usize;
    let min = delta * g.len();
    if n < min {
        return Err(AdversaryError::NTooSmall { n, min });
    }
    let mut adj: Vec<Vec<(INodeId, u8)>> = g
        .node_ids()
        .map(|v| g.neighbors(v).to_vec())
        .collect();
    let mut first_leaf_of: BTreeMap<u32, INodeId> = BTreeMap::new();
    for v in 0..g.len() as u32 {
        let used: HashSet<u8> = adj[v as usize].iter().map(|&(_, p)| p).collect();
        for p in 1..=delta as u8 {
            if used.contains(&p) {
                continue;
            }
            let leaf = adj.len() as INodeId;
            adj.push(vec![(v, 1)]);
            adj[v as usize].push((leaf, p));
            first_leaf_of.entry(v).or_insert(leaf);
        }
    }
    // grow the remainder as a path below the anchor's first fresh leaf
    let mut tip = {
        let anchor = path_anchor.unwrap_or(0);
        // fall back to the smallest node owning a fresh leaf
        *first_leaf_of
            .get(&anchor)
            .or_else(|| first_leaf_of.first_key_value().map(|(_, l)| l))
            .ok_or_else(|| AdversaryError::Other("no fresh leaf to anchor the path".into()))?
    };
    while adj.len() < n {
        let next = adj.len() as INodeId;
        let port_at_tip = adj[tip as usize].len() as u8 + 1;
        adj.push(vec![(tip, 1)]);
        adj[tip as usize].push((next, port_at_tip));
        tip = next;
    }
    Ok(Instance::new(adj)?)
}

/// Weighted set of algorithm states whose weights are joint probabilities of
/// the event chain conditioned on so far.
pub struct Mixture {
    pub states: Vec<(Algorithm, BigRational)>,
}

impl Mixture {
    pub fn new(alg: Algorithm) -> Self {
        Mixture { states: vec![(alg, BigRational::one())] }
    }

    pub fn total(&self) -> BigRational {
        self.states.iter().map(|(_, w)| w.clone()).sum()
    }

    /// Conditional probability of each port being oriented outward at the
    /// current query, plus the all-inward mass.
    pub fn port_out_probabilities(&self, view: &View) -> (Vec<BigRational>, BigRational) {
        let deg = view.center_degree() as usize;
        let zero = || BigRational::new(BigInt::from(0), BigInt::from(1));
        let mut per_port = vec![zero(); deg];
        let mut all_in = zero();
        for (alg, w) in &self.states {
            for (d, p) in alg.distribution(view) {
                let wp = w * &p;
                if d.out_ports().is_empty() {
                    all_in += &wp;
                }
                for port in d.out_ports() {
                    per_port[port as usize - 1] += &wp;
                }
            }
        }
        let total = self.total();
        for x in per_port.iter_mut() {
            *x /= &total;
        }
        all_in /= &total;
        (per_port, all_in)
    }

    /// Keeps only the branches whose decision orients `port` outward,
    /// advancing each; returns the conditional probability of the event.
    pub fn condition_on_port_out(&mut self, view: &View, port: u8) -> BigRational {
        let before = self.total();
        let mut next = Vec::new();
        for (alg, w) in &self.states {
            for (d, p) in alg.distribution(view) {
                if d.dir_at_port(port) == EdgeDir::Out {
                    let mut adv = alg.clone();
                    adv.advance(view, &d);
                    next.push((adv, w * &p));
                }
            }
        }
        self.states = next;
        self.total() / before
    }

    /// Keeps only the all-inward branches.
    pub fn condition_on_all_in(&mut self, view: &View) -> BigRational {
        let before = self.total();
        let mut next = Vec::new();
        for (alg, w) in &self.states {
            for (d, p) in alg.distribution(view) {
                if d.out_ports().is_empty() {
                    let mut adv = alg.clone();
                    adv.advance(view, &d);
                    next.push((adv, w * &p));
                }
            }
        }
        self.states = next;
        self.total() / before
    }
}

/// The region eligible for rewiring at `v`: nodes not yet presented,
/// reachable from `v` through unpresented nodes along edges the algorithm has
/// already seen, tagged by the port of `v` behind which they sit.
pub fn swap_region(
    inst: &Instance,
    session: &Session,
    v: INodeId,
) -> (HashSet<INodeId>, HashMap<INodeId, u8>) {
    let presented: HashSet<INodeId> = session.presented().iter().copied().collect();
    let mut set = HashSet::new();
    let mut branch = HashMap::new();
    let mut queue = VecDeque::new();
    for &(w, p) in inst.neighbors(v) {
        if !presented.contains(&w) && session.edge_seen(v, w) {
            set.insert(w);
            branch.insert(w, p);
            queue.push_back(w);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &(x, _) in inst.neighbors(u) {
            if x == v || presented.contains(&x) || set.contains(&x) {
                continue;
            }
            if session.edge_seen(u, x) {
                set.insert(x);
                let b = branch[&u];
                branch.insert(x, b);
                queue.push_back(x);
            }
        }
    }
    (set, branch)
}

/// The involution swapping the branches behind ports 1 and `q` of `v` within
/// the swap region, built by following equal port numbers; fails when the two
/// branches are not port-isomorphic there.
fn port_following_involution(
    inst: &Instance,
    region: &HashSet<INodeId>,
    v: INodeId,
    q: u8,
) -> Result<HashMap<INodeId, INodeId>, String> {
    let a0 = inst.neighbor_at_port(v, 1).ok_or("query node has no port 1")?;
    let b0 = inst.neighbor_at_port(v, q).ok_or("query node lacks the forced port")?;
    if !region.contains(&a0) || !region.contains(&b0) {
        return Err("branch endpoint outside the swap region".into());
    }
    if inst.port_to(a0, v) != inst.port_to(b0, v) {
        return Err("branch endpoints disagree on their port toward the query node".into());
    }
    let mut map: HashMap<INodeId, INodeId> = HashMap::from([(a0, b0), (b0, a0)]);
    let mut stack = vec![(a0, b0, v, v)];
    while let Some((x, y, px, py)) = stack.pop() {
        let mut ix: Vec<(INodeId, u8)> = inst
            .neighbors(x)
            .iter()
            .copied()
            .filter(|&(c, _)| c != px && region.contains(&c))
            .collect();
        let mut iy: Vec<(INodeId, u8)> = inst
            .neighbors(y)
            .iter()
            .copied()
            .filter(|&(c, _)| c != py && region.contains(&c))
            .collect();
        ix.sort_by_key(|&(_, p)| p);
        iy.sort_by_key(|&(_, p)| p);
        if ix.len() != iy.len() {
            return Err(format!("inner degrees differ at {x} vs {y}"));
        }
        for (&(cx, p1), &(cy, p2)) in ix.iter().zip(iy.iter()) {
            if p1 != p2 {
                return Err(format!("inner ports differ at {x} vs {y}"));
            }
            if inst.port_to(cx, x) != inst.port_to(cy, y) {
                return Err(format!("far ports differ below {x} vs {y}"));
            }
            if map.contains_key(&cx) || map.contains_key(&cy) {
                return Err("region is not a tree".into());
            }
            map.insert(cx, cy);
            map.insert(cy, cx);
            stack.push((cx, cy, x, y));
        }
    }
    Ok(map)
}

/// Applies the swap: every edge from a mapped node to outside the region
/// re-attaches to the node's partner with both port numbers carried over,
/// and the two port numbers at the queried node exchange places. Moving the
/// hinterlands alone would only relabel the instance; exchanging the two
/// ports at `v` is what puts the remaining construction behind the forced
/// port without touching anything the algorithm has seen.
fn apply_swap(
    inst: &Instance,
    region: &HashSet<INodeId>,
    xi: &HashMap<INodeId, INodeId>,
    v: INodeId,
    q: u8,
) -> Result<Instance, InstanceError> {
    let mut adj: Vec<Vec<(INodeId, u8)>> = Vec::with_capacity(inst.n());
    for x in 0..inst.n() as INodeId {
        let mut entries = Vec::new();
        if let Some(&partner) = xi.get(&x) {
            // keep region-internal edges, inherit the partner's boundary ones
            for &(nbr, p) in inst.neighbors(x) {
                if region.contains(&nbr) {
                    entries.push((nbr, p));
                }
            }
            for &(nbr, p) in inst.neighbors(partner) {
                if !region.contains(&nbr) {
                    entries.push((nbr, p));
                }
            }
        } else {
            for &(nbr, p) in inst.neighbors(x) {
                let target = if !region.contains(&x) {
                    // far endpoints inside the swapped branches move
                    xi.get(&nbr).copied().unwrap_or(nbr)
                } else {
                    nbr
                };
                entries.push((target, p));
            }
        }
        adj.push(entries);
    }
    for entry in adj[v as usize].iter_mut() {
        if entry.1 == 1 {
            entry.1 = q;
        } else if entry.1 == q {
            entry.1 = 1;
        }
    }
    Instance::new(adj)
}

/// A violation already materialized by the decision at `node`: a conflict on
/// one of its edges, or the node declaring every incident edge inward while
/// being degree-constrained.
fn realized_violation(
    inst: &Instance,
    decisions: &BTreeMap<INodeId, Decision>,
    node: INodeId,
    step: usize,
) -> Option<ViolationSummary> {
    let d = decisions.get(&node)?;
    for &(nbr, p) in inst.neighbors(node) {
        if let Some(dn) = decisions.get(&nbr) {
            let back = inst.port_to(nbr, node).expect("symmetric");
            let here_out = d.dir_at_port(p) == EdgeDir::Out;
            let there_out = dn.dir_at_port(back) == EdgeDir::Out;
            if here_out == there_out {
                return Some(ViolationSummary { step, node, kind: ViolationKind::Conflict });
            }
        }
    }
    if inst.degree(node) >= 3 && d.out_ports().is_empty() {
        return Some(ViolationSummary { step, node, kind: ViolationKind::Sink });
    }
    None
}

fn replay_views(inst: &Instance, queries: &[INodeId], locality: u32, expected: &[View]) -> bool {
    let mut session = Session::new(inst, locality);
    for (i, &q) in queries.iter().enumerate() {
        if session.reveal(q) != expected[i] {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    /// exact conditional probabilities, no sampling
    Oracle,
    /// one realized run; the forced port is read off the realized decision
    Single,
    /// forced port estimated from forked samples, then one realized run
    Sample,
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub locality: u32,
    pub n: usize,
    pub mode: AttackMode,
    /// forks per step in `Sample` mode
    pub samples: usize,
    /// frequency slack in `Sample` mode
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct ViolationSummary {
    pub step: usize,
    pub node: INodeId,
    pub kind: ViolationKind,
}

pub struct AttackOutcome {
    pub mode: AttackMode,
    pub locality: u32,
    /// measured distance-correctness of the source tree
    pub distance: u32,
    /// locality <= distance - 1: the regime in which failure is guaranteed
    pub strict: bool,
    pub steps: usize,
    pub rewires: usize,
    pub rollbacks: usize,
    pub violation: Option<ViolationSummary>,
    pub survived: bool,
    /// conditional probability of each forced event (oracle mode)
    pub ledger: Vec<BigRational>,
    pub ledger_product: Option<BigRational>,
    /// product >= delta^-(number of mirrors), when a product exists
    pub ledger_bound_ok: Option<bool>,
    pub queries: Vec<INodeId>,
    pub instance: Instance,
}

impl AttackOutcome {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": format!("{:?}", self.mode),
            "locality": self.locality,
            "distance_correctness": self.distance,
            "strict": self.strict,
            "steps": self.steps,
            "rewires": self.rewires,
            "rollbacks": self.rollbacks,
            "violation": self.violation.as_ref().map(|v| serde_json::json!({
                "step": v.step, "node": v.node, "kind": v.kind,
            })),
            "survived": self.survived,
            "ledger": self.ledger.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "ledger_product": self.ledger_product.as_ref().map(|r| r.to_string()),
            "ledger_bound_ok": self.ledger_bound_ok,
            "queries": self.queries,
            "instance": self.instance.to_json(),
        })
    }
}

/// Builds the padded instance and query sequence for `t` and runs the attack
/// against `alg`. In the strict regime (locality at most the measured
/// distance-correctness minus one) every structural assertion is fatal; with
/// more locality the rewiring falls back to no-ops whenever the transcript
/// replay detects visibility, and no failure is claimed.
pub fn attack(
    t: &ConstructionTree,
    alg: Algorithm,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AdversaryError> {
    let trace = build_input_tree(t, BuildOrder::Layers, true)?;
    let distance = check_distance_correct(t, DistanceMode::Full, 1 << 22)?
        .minimum
        .ok_or_else(|| AdversaryError::Other("tree has no observable split distance".into()))?;
    let strict = cfg.locality <= distance.saturating_sub(1);
    let seq = canonical_sequence(t, &trace)?;
    let mirror_set: HashSet<u32> = seq.iter().copied().collect();
    let g_t = trace.final_graph();
    let anchor = g_t
        .node_ids()
        .find(|v| !mirror_set.contains(v))
        .unwrap_or(0);
    let mut inst = pad_graph(g_t, cfg.n, Some(anchor))?;
    let mut w: Vec<INodeId> = seq;
    let total_mirrors = w.len();

    let mut queried: Vec<INodeId> = Vec::new();
    let mut views: Vec<View> = Vec::new();
    let mut ledger: Vec<BigRational> = Vec::new();
    let mut forced: Vec<(INodeId, u8)> = Vec::new();
    let mut decisions: BTreeMap<INodeId, Decision> = BTreeMap::new();
    let mut rewires = 0usize;
    let mut rollbacks = 0usize;
    let mut violation: Option<ViolationSummary> = None;

    let mut mixture = matches!(cfg.mode, AttackMode::Oracle).then(|| Mixture::new(alg.clone()));
    let mut live = alg;

    let delta = t.b() as u64;
    let threshold = BigRational::new(BigInt::from(1), BigInt::from(delta));

    'steps: for i in 0..total_mirrors {
        let step = i + 1;
        let node = w[i];
        // reveal on the current instance by replaying the session
        let view = {
            let mut session = Session::new(&inst, cfg.locality);
            for &qq in &queried {
                session.reveal(qq);
            }
            session.reveal(node)
        };
        queried.push(node);
        views.push(view.clone());

        let last = step == total_mirrors;
        // the forced port for this step, if the adversary forces one
        let q: Option<u8> = match cfg.mode {
            AttackMode::Oracle => {
                let mix = mixture.as_mut().expect("oracle mode");
                if last {
                    // all incident edges already forced inward: any decision
                    // fails, no conditioning left to do
                    None
                } else {
                    let (per_port, _all_in) = mix.port_out_probabilities(&view);
                    let pick = per_port.iter().position(|p| *p >= threshold).map(|i| i as u8 + 1);
                    match pick {
                        Some(port) => {
                            let factor = mix.condition_on_port_out(&view, port);
                            if strict && factor < threshold {
                                return Err(AdversaryError::Step {
                                    step,
                                    msg: format!("forced event probability {factor} below 1/{delta}"),
                                });
                            }
                            ledger.push(factor);
                            forced.push((node, port));
                            Some(port)
                        }
                        None => {
                            // the algorithm realizes an all-inward decision
                            // with positive probability: immediate loss
                            let factor = mix.condition_on_all_in(&view);
                            ledger.push(factor);
                            violation = Some(ViolationSummary {
                                step,
                                node,
                                kind: ViolationKind::Sink,
                            });
                            break 'steps;
                        }
                    }
                }
            }
            AttackMode::Single | AttackMode::Sample => {
                let estimated = if cfg.mode == AttackMode::Sample && !last {
                    let deg = view.center_degree() as usize;
                    let mut counts = vec![0usize; deg];
                    for s in 0..cfg.samples {
                        let mut f = live.fork(s as u64);
                        let d = f.decide(&view);
                        for p in d.out_ports() {
                            counts[p as usize - 1] += 1;
                        }
                    }
                    counts
                        .iter()
                        .position(|&c| c as f64 / cfg.samples as f64 >= 1.0 / delta as f64 - cfg.eps)
                        .map(|i| i as u8 + 1)
                } else {
                    None
                };
                let decision = live.decide(&view);
                decisions.insert(node, decision.clone());
                // realized violations only: a conflict on a just-decided
                // edge, or an all-inward decision at a constrained node;
                // extendability is judged once the sequence ends
                if let Some(v) = realized_violation(&inst, &decisions, node, step) {
                    violation = Some(v);
                    break 'steps;
                }
                if last {
                    None
                } else {
                    let realized = decision.out_ports().first().copied();
                    let port = match cfg.mode {
                        AttackMode::Sample => estimated.or(realized),
                        _ => realized,
                    };
                    if let Some(p) = port {
                        forced.push((node, p));
                    }
                    port
                }
            }
        };

        // rewire so the forced edge leads into the remaining construction
        if let Some(q) = q {
            if q != 1 {
                let attempt = (|| -> Result<(Instance, HashMap<INodeId, INodeId>), String> {
                    let (region, _branch) = {
                        let mut session = Session::new(&inst, cfg.locality);
                        for &qq in &queried {
                            session.reveal(qq);
                        }
                        swap_region(&inst, &session, node)
                    };
                    let xi = port_following_involution(&inst, &region, node, q)?;
                    let swapped =
                        apply_swap(&inst, &region, &xi, node, q).map_err(|e| e.to_string())?;
                    if !replay_views(&swapped, &queried, cfg.locality, &views) {
                        return Err("transcript replay differs on the rewired instance".into());
                    }
                    Ok((swapped, xi))
                })();
                match attempt {
                    Ok((swapped, xi)) => {
                        inst = swapped;
                        for entry in w.iter_mut().skip(i + 1) {
                            if let Some(&to) = xi.get(entry) {
                                *entry = to;
                            }
                        }
                        rewires += 1;
                    }
                    Err(msg) => {
                        if strict {
                            return Err(AdversaryError::Step { step, msg });
                        }
                        rollbacks += 1;
                    }
                }
            }
        }

        if last && violation.is_none() {
            // structural claim: every edge at the final query was forced
            // inward by an earlier step
            let all_forced_in = inst.neighbors(node).iter().all(|&(nbr, _)| {
                inst.port_to(nbr, node)
                    .map(|p| forced.contains(&(nbr, p)))
                    .unwrap_or(false)
            });
            match cfg.mode {
                AttackMode::Oracle => {
                    if all_forced_in {
                        ledger.push(BigRational::one());
                        violation = Some(ViolationSummary {
                            step,
                            node,
                            kind: ViolationKind::Sink,
                        });
                    } else if strict {
                        return Err(AdversaryError::Step {
                            step,
                            msg: "an edge at the final query escaped the forced chain".into(),
                        });
                    }
                }
                _ => {
                    if strict && !all_forced_in {
                        return Err(AdversaryError::Step {
                            step,
                            msg: "an edge at the final query escaped the forced chain".into(),
                        });
                    }
                }
            }
        }
    }

    // final verdict over the realized output, including extendability
    if violation.is_none() && !matches!(cfg.mode, AttackMode::Oracle) {
        if let Verdict::Violation { kind, nodes } = validate_sinkless_orientation(&inst, &decisions)
        {
            violation = Some(ViolationSummary { step: queried.len(), node: nodes[0], kind });
        }
    }

    let ledger_product = (cfg.mode == AttackMode::Oracle).then(|| {
        ledger
            .iter()
            .fold(BigRational::one(), |acc, f| acc * f)
    });
    let ledger_bound_ok = ledger_product.as_ref().map(|p| {
        let bound = BigRational::new(
            BigInt::from(1),
            BigInt::from(delta).pow(total_mirrors as u32),
        );
        *p >= bound
    });
    Ok(AttackOutcome {
        mode: cfg.mode,
        locality: cfg.locality,
        distance,
        strict,
        steps: queried.len(),
        rewires,
        rollbacks,
        survived: violation.is_none(),
        violation,
        ledger,
        ledger_product,
        ledger_bound_ok,
        queries: queried,
        instance: inst,
    })
}

/// Input size for the radius reporter: either an explicit integer or the
/// symbolic value `delta^(P_delta(i, delta+1)) + 1`, which cannot be
/// materialized for interesting `i`.
#[derive(Debug, Clone)]
pub enum Magnitude {
    Exact(BigUint),
    TowerPlusOne { index: u32 },
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub delta: u32,
    /// largest index whose threshold the input exceeds, if any
    pub index: Option<u32>,
    pub radius: BigUint,
    /// thresholds probed: (index, exceeded)
    pub witness: Vec<(u32, bool)>,
}

impl BoundReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "index": self.index,
            "radius": self.radius.to_string(),
            "witness": self.witness,
        })
    }
}

/// Largest `i` with `n > delta^(P_delta(i, delta+1))` and the radius `2^(i-1)`
/// it certifies; trivial radius 1 when even the first threshold is not met.
pub fn bound_report(n: &Magnitude, delta: u32) -> BoundReport {
    let exceeds = |i: u32| -> bool {
        match n {
            Magnitude::Exact(x) => power_tower_exceeds(x, delta, i),
            Magnitude::TowerPlusOne { index } => i <= *index,
        }
    };
    let mut witness = Vec::new();
    let first = exceeds(2);
    witness.push((2, first));
    if !first {
        return BoundReport { delta, index: None, radius: BigUint::one(), witness };
    }
    let mut i = 2u32;
    while i < 64 {
        let e = exceeds(i + 1);
        witness.push((i + 1, e));
        if e {
            i += 1;
        } else {
            break;
        }
    }
    BoundReport { delta, index: Some(i), radius: BigUint::one() << (i - 1), witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::AlgKind;
    use crate::canon::tree_encoding;
    use crate::ctree::build_t2;

    fn t2_trace() -> (ConstructionTree, MarkedTree) {
        let t = build_t2(3).unwrap();
        let trace = build_input_tree(&t, BuildOrder::Layers, false).unwrap();
        let g = trace.final_graph().clone();
        (t, g)
    }

    #[test]
    fn pad_graph_counts_and_ports() {
        let (_, g) = t2_trace();
        let inst = pad_graph(&g, 120, None).unwrap();
        assert_eq!(inst.n(), 120);
        for v in 0..g.len() as u32 {
            assert_eq!(inst.degree(v), 3, "node {v}");
            // original adjacencies and ports survive
            for &(w, p) in g.neighbors(v) {
                assert_eq!(inst.port_to(v, w), Some(p));
            }
        }
    }

    #[test]
    fn pad_graph_rejects_small_n() {
        let (_, g) = t2_trace();
        assert!(matches!(
            pad_graph(&g, 119, None),
            Err(AdversaryError::NTooSmall { .. })
        ));
    }

    #[test]
    fn port1_attack_is_swap_free_and_wins() {
        let t = build_t2(3).unwrap();
        let alg = Algorithm::new(AlgKind::FixedPort(1), 120, 1, 0);
        let cfg = AttackConfig { locality: 1, n: 120, mode: AttackMode::Single, samples: 0, eps: 0.0 };
        let out = attack(&t, alg, &cfg).unwrap();
        assert!(out.strict);
        assert_eq!(out.rewires, 0);
        assert!(!out.survived);
        let v = out.violation.unwrap();
        assert_eq!(v.step, 14);
        assert_eq!(v.kind, ViolationKind::Conflict);
    }

    #[test]
    fn port2_attack_rewires_and_wins() {
        let t = build_t2(3).unwrap();
        let alg = Algorithm::new(AlgKind::FixedPort(2), 120, 1, 0);
        let cfg = AttackConfig { locality: 1, n: 120, mode: AttackMode::Single, samples: 0, eps: 0.0 };
        let out = attack(&t, alg, &cfg).unwrap();
        assert!(out.rewires > 0);
        assert!(!out.survived);
        // the rewired instance is still the same unported tree as the padded
        // base (same anchor choice as the attack)
        let t2 = build_t2(3).unwrap();
        let trace = build_input_tree(&t2, BuildOrder::Layers, false).unwrap();
        let seq = canonical_sequence(&t2, &trace).unwrap();
        let mirror_set: std::collections::HashSet<u32> = seq.iter().copied().collect();
        let g = trace.final_graph();
        let anchor = g.node_ids().find(|v| !mirror_set.contains(v)).unwrap();
        let base = pad_graph(g, 120, Some(anchor)).unwrap();
        let enc_base = tree_encoding(
            &base
                .adjacency()
                .iter()
                .map(|ns| ns.iter().map(|&(w, _)| w).collect())
                .collect::<Vec<Vec<u32>>>(),
        );
        let enc_out = tree_encoding(
            &out.instance
                .adjacency()
                .iter()
                .map(|ns| ns.iter().map(|&(w, _)| w).collect())
                .collect::<Vec<Vec<u32>>>(),
        );
        assert_eq!(enc_base, enc_out);
    }

    #[test]
    fn uniform_oracle_ledger_meets_bound() {
        let t = build_t2(3).unwrap();
        let alg = Algorithm::new(AlgKind::UniformSingleOut, 120, 1, 7);
        let cfg = AttackConfig { locality: 1, n: 120, mode: AttackMode::Oracle, samples: 0, eps: 0.0 };
        let out = attack(&t, alg, &cfg).unwrap();
        assert!(!out.survived);
        let product = out.ledger_product.clone().unwrap();
        let expected = BigRational::new(BigInt::from(1), BigInt::from(3).pow(13));
        assert_eq!(product, expected);
        assert_eq!(out.ledger_bound_ok, Some(true));
    }

    #[test]
    fn all_in_algorithm_loses_immediately() {
        let t = build_t2(3).unwrap();
        let alg = Algorithm::new(AlgKind::AdversarialWorst, 120, 1, 0);
        let cfg = AttackConfig { locality: 1, n: 120, mode: AttackMode::Oracle, samples: 0, eps: 0.0 };
        let out = attack(&t, alg, &cfg).unwrap();
        assert!(!out.survived);
        assert_eq!(out.violation.as_ref().unwrap().step, 1);
    }

    #[test]
    fn cautious_survives_with_extra_locality() {
        let t = build_t2(3).unwrap();
        let alg = Algorithm::new(AlgKind::Cautious2Hop, 120, 2, 0);
        let cfg = AttackConfig { locality: 2, n: 120, mode: AttackMode::Single, samples: 0, eps: 0.0 };
        let out = attack(&t, alg, &cfg).unwrap();
        assert!(!out.strict);
        assert!(out.survived, "violation: {:?}", out.violation);
    }

    #[test]
    fn bound_report_examples() {
        // n = 3^162 exceeds 3^81 but not 3^(3^81)
        let n = Magnitude::Exact(BigUint::from(3u32).pow(162));
        let r = bound_report(&n, 3);
        assert_eq!(r.index, Some(2));
        assert_eq!(r.radius, BigUint::from(2u32));

        let small = Magnitude::Exact(BigUint::from(1_000_000u32));
        let r = bound_report(&small, 4);
        assert_eq!(r.index, None);
        assert_eq!(r.radius, BigUint::one());

        for i in 2..=6u32 {
            let sym = Magnitude::TowerPlusOne { index: i };
            let r = bound_report(&sym, 4);
            assert_eq!(r.index, Some(i));
            assert_eq!(r.radius, BigUint::one() << (i - 1));
        }
    }

    #[test]
    fn bound_report_monotone() {
        let values = [10u32, 100, 1_000_000];
        let mut last = BigUint::default();
        for v in values {
            let r = bound_report(&Magnitude::Exact(BigUint::from(v)), 3);
            assert!(r.radius >= last);
            last = r.radius;
        }
    }
}
