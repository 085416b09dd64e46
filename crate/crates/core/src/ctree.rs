//! Layered, labeled rooted trees whose labeling drives the reflect/split
//! program: topology checks (balancedness, well-nesting, the unique layer
//! pairing) and the eight labeling checks, plus the concrete tree family used
//! throughout.

use crate::label::{
    clearing_witness, independence_witness, Label, LabelError, STAR,
};
use serde::{Deserialize, Serialize};
use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub type NodeId = u32;
pub const NO_PARENT: NodeId = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Reflect,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerClass {
    Reflect,
    Split,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree must have at least one node")]
    Empty,
    #[error("tree must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("parent/children arrays disagree at node {0}")]
    Inconsistent(NodeId),
    #[error("node {0} is unreachable from the root")]
    Unreachable(NodeId),
    #[error("base must be >= 3 at the tree layer, got {0}")]
    BadBase(u8),
    #[error("label error: {0}")]
    Label(#[from] LabelError),
    #[error("node {node} is not an internal split node")]
    NotInternalSplit { node: NodeId },
    #[error("no child of {node} carries symbol {j} at position {pos}")]
    NoSuchChild { node: NodeId, j: u8, pos: usize },
    #[error("tree is not well-nested: {0}")]
    NotWellNested(WellNestError),
}

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum WellNestError {
    #[error("layer list is empty")]
    Empty,
    #[error("layer {0} mixes reflect and split nodes")]
    MixedLayer(u16),
    #[error("{reflect} reflect layers but {split} split layers")]
    UnequalCounts { reflect: usize, split: usize },
    #[error("the first layer must be a reflect layer")]
    FirstNotReflect,
    #[error("the last layer must be a split layer")]
    LastNotSplit,
    #[error("no balancing index for reflect layer {0}")]
    NoBalancingIndex(u16),
    #[error("the first reflect layer must pair with the last layer, got {got}")]
    RootPairNotLast { got: u16 },
    #[error("reflect layer {i} must pair below {phi_i}, but layer {j} pairs to {phi_j}")]
    CrossingPairs { i: u16, j: u16, phi_i: u16, phi_j: u16 },
}

/// Pairing of reflect layers to split layers by 1-based layer index, computed
/// with the minimal-balancing scan: the partner of reflect layer `i` is the
/// smallest `j > i` such that layers `i..=j` hold equally many reflect and
/// split layers.
pub fn compute_phi(classes: &[LayerClass]) -> Result<BTreeMap<u16, u16>, WellNestError> {
    if classes.is_empty() {
        return Err(WellNestError::Empty);
    }
    let reflect = classes.iter().filter(|c| **c == LayerClass::Reflect).count();
    let split = classes.len() - reflect;
    if classes[0] != LayerClass::Reflect {
        return Err(WellNestError::FirstNotReflect);
    }
    if *classes.last().unwrap() != LayerClass::Split {
        return Err(WellNestError::LastNotSplit);
    }
    if reflect != split {
        return Err(WellNestError::UnequalCounts { reflect, split });
    }
    let i_max = classes.len() as u16;
    let mut phi = BTreeMap::new();
    for (idx, class) in classes.iter().enumerate() {
        if *class != LayerClass::Reflect {
            continue;
        }
        let i = idx as u16 + 1;
        let mut balance = 0i32;
        let mut paired = None;
        for (jdx, c) in classes.iter().enumerate().skip(idx) {
            balance += match c {
                LayerClass::Reflect => 1,
                LayerClass::Split => -1,
            };
            if balance == 0 {
                paired = Some(jdx as u16 + 1);
                break;
            }
        }
        let j = paired.ok_or(WellNestError::NoBalancingIndex(i))?;
        phi.insert(i, j);
    }
    if phi[&1] != i_max {
        return Err(WellNestError::RootPairNotLast { got: phi[&1] });
    }
    // the scan yields the unique candidate; verify the nesting clause
    let reflect_ids: Vec<u16> = phi.keys().copied().collect();
    for (a, &i) in reflect_ids.iter().enumerate() {
        for &j in &reflect_ids[a + 1..] {
            if j < phi[&i] && phi[&j] > phi[&i] {
                return Err(WellNestError::CrossingPairs {
                    i,
                    j,
                    phi_i: phi[&i],
                    phi_j: phi[&j],
                });
            }
        }
    }
    Ok(phi)
}

/// Derived layer indexing of a well-nested tree: reflect/split ranks keyed by
/// layer index.
#[derive(Debug, Clone)]
pub struct LayerIndices {
    pub phi: BTreeMap<u16, u16>,
    /// layer index -> reflect index (1-based), for reflect layers
    pub reflect_index: BTreeMap<u16, u16>,
    /// layer index -> split index (1-based), for split layers
    pub split_index: BTreeMap<u16, u16>,
}

/// Arena-backed rooted tree with ordered children and one label per node.
#[derive(Clone)]
pub struct ConstructionTree {
    b: u8,
    labels: Vec<Label>,
    parent: Vec<NodeId>,
    children: Vec<Vec<NodeId>>,
    layer_of: Vec<u16>,
    layers: Vec<Vec<NodeId>>,
    indices: OnceCell<Option<LayerIndices>>,
}

impl ConstructionTree {
    pub fn new(
        b: u8,
        labels: Vec<Label>,
        parent: Vec<NodeId>,
        children: Vec<Vec<NodeId>>,
    ) -> Result<Self, TreeError> {
        if b < 3 {
            return Err(TreeError::BadBase(b));
        }
        let n = labels.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        if parent.len() != n || children.len() != n {
            return Err(TreeError::Inconsistent(0));
        }
        let roots: Vec<NodeId> = (0..n as NodeId).filter(|&v| parent[v as usize] == NO_PARENT).collect();
        if roots.len() != 1 {
            return Err(TreeError::RootCount(roots.len()));
        }
        for (v, ch) in children.iter().enumerate() {
            for &c in ch {
                if c as usize >= n || parent[c as usize] != v as NodeId {
                    return Err(TreeError::Inconsistent(v as NodeId));
                }
            }
        }
        // layer = 1 + depth, computed by BFS; also checks reachability
        let mut layer_of = vec![0u16; n];
        let mut queue = std::collections::VecDeque::new();
        layer_of[roots[0] as usize] = 1;
        queue.push_back(roots[0]);
        let mut seen = 1usize;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v as usize] {
                if layer_of[c as usize] != 0 {
                    return Err(TreeError::Inconsistent(c));
                }
                layer_of[c as usize] = layer_of[v as usize] + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            let missing = (0..n).find(|&v| layer_of[v] == 0).unwrap();
            return Err(TreeError::Unreachable(missing as NodeId));
        }
        let max_layer = *layer_of.iter().max().unwrap() as usize;
        let mut layers = vec![Vec::new(); max_layer];
        for v in 0..n {
            layers[layer_of[v] as usize - 1].push(v as NodeId);
        }
        Ok(ConstructionTree {
            b,
            labels,
            parent,
            children,
            layer_of,
            layers,
            indices: OnceCell::new(),
        })
    }

    pub fn b(&self) -> u8 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> NodeId {
        (0..self.labels.len() as NodeId)
            .find(|&v| self.parent[v as usize] == NO_PARENT)
            .expect("validated at construction")
    }

    pub fn label(&self, v: NodeId) -> &Label {
        &self.labels[v as usize]
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        let p = self.parent[v as usize];
        (p != NO_PARENT).then_some(p)
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v as usize]
    }

    /// 1-based layer index (= 1 + distance from root).
    pub fn layer_of(&self, v: NodeId) -> u16 {
        self.layer_of[v as usize]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_members(&self, layer: u16) -> &[NodeId] {
        &self.layers[layer as usize - 1]
    }

    pub fn kind(&self, v: NodeId) -> NodeKind {
        if self.children[v as usize].len() == 1 {
            NodeKind::Reflect
        } else {
            NodeKind::Split
        }
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v as usize].is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        0..self.labels.len() as NodeId
    }

    pub fn reflect_nodes(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&v| self.kind(v) == NodeKind::Reflect).collect()
    }

    pub fn split_nodes(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&v| self.kind(v) == NodeKind::Split).collect()
    }

    /// Class of each layer, or the index of a mixed layer.
    pub fn layer_classes(&self) -> Result<Vec<LayerClass>, u16> {
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, members) in self.layers.iter().enumerate() {
            let mut class = None;
            for &v in members {
                let k = match self.kind(v) {
                    NodeKind::Reflect => LayerClass::Reflect,
                    NodeKind::Split => LayerClass::Split,
                };
                match class {
                    None => class = Some(k),
                    Some(c) if c != k => return Err(i as u16 + 1),
                    _ => {}
                }
            }
            out.push(class.expect("layers are nonempty"));
        }
        Ok(out)
    }

    /// Layer indexing derived from the pairing, when the tree is well-nested.
    pub fn indices(&self) -> Option<&LayerIndices> {
        self.indices
            .get_or_init(|| {
                let classes = self.layer_classes().ok()?;
                let phi = compute_phi(&classes).ok()?;
                let mut reflect_index = BTreeMap::new();
                let mut split_index = BTreeMap::new();
                for (rank, (&i, &j)) in phi.iter().enumerate() {
                    reflect_index.insert(i, rank as u16 + 1);
                    split_index.insert(j, rank as u16 + 1);
                }
                Some(LayerIndices { phi, reflect_index, split_index })
            })
            .as_ref()
    }

    /// Split index of a split node, when defined.
    pub fn split_index_of(&self, v: NodeId) -> Option<u16> {
        let idx = self.indices()?;
        idx.split_index.get(&self.layer_of(v)).copied()
    }

    /// Reflect index of a reflect node, when defined.
    pub fn reflect_index_of(&self, v: NodeId) -> Option<u16> {
        let idx = self.indices()?;
        idx.reflect_index.get(&self.layer_of(v)).copied()
    }

    /// The ancestor of `v` lying in the given layer.
    pub fn ancestor_in_layer(&self, v: NodeId, layer: u16) -> Option<NodeId> {
        let mut cur = v;
        loop {
            if self.layer_of(cur) == layer {
                return Some(cur);
            }
            cur = self.parent(cur)?;
        }
    }

    /// The child of internal split node `v` whose label carries symbol `j` at
    /// the split index of `v`.
    pub fn jth_child(&self, v: NodeId, j: u8) -> Result<NodeId, TreeError> {
        if self.children[v as usize].len() != self.b as usize {
            return Err(TreeError::NotInternalSplit { node: v });
        }
        let si = self
            .split_index_of(v)
            .ok_or(TreeError::NotInternalSplit { node: v })? as usize;
        for &c in &self.children[v as usize] {
            if self.labels[c as usize].sym(si) == Some(j) {
                return Ok(c);
            }
        }
        Err(TreeError::NoSuchChild { node: v, j, pos: si })
    }

    pub fn find_by_label(&self, label: &Label) -> Option<NodeId> {
        self.node_ids().find(|&v| self.label(v) == label)
    }
}

impl fmt::Debug for ConstructionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConstructionTree(b={}, n={}, layers={})", self.b, self.len(), self.layers.len())
    }
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    BBalanced,
    WellNested,
    RootLabelOne,
    ReflectLabelLength,
    ReflectLabelsDistinct,
    ReflectStarFree,
    ReflectIndependent,
    ReflectClearing,
    SplitLabelLength,
    SplitStarPosition,
    ChildPartition,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn check(&self, name: CheckName) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:?}: {}", c.name, if c.pass { "pass" } else { "FAIL" })?;
            if let Some(w) = &c.witness {
                write!(f, " ({w})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Runs the topology and labeling checks, reporting each individually.
pub fn validate(t: &ConstructionTree) -> ValidationReport {
    let mut checks = Vec::new();
    let b = t.b;

    // balancedness: child counts in {0, 1, b}, uniform per layer
    let mut balanced = CheckResult { name: CheckName::BBalanced, pass: true, witness: None };
    'bb: for (li, members) in t.layers.iter().enumerate() {
        let mut layer_count: Option<usize> = None;
        for &v in members {
            let c = t.children(v).len();
            if !(c == 0 || c == 1 || c == b as usize) {
                balanced.pass = false;
                balanced.witness = Some(format!("node {} has {} children", t.label(v), c));
                break 'bb;
            }
            match layer_count {
                None => layer_count = Some(c),
                Some(k) if k != c => {
                    balanced.pass = false;
                    balanced.witness = Some(format!(
                        "layer {} mixes child counts {} and {}",
                        li + 1,
                        k,
                        c
                    ));
                    break 'bb;
                }
                _ => {}
            }
        }
    }
    checks.push(balanced.clone());

    // well-nesting via the pairing scan
    let classes = t.layer_classes();
    let phi_result = match &classes {
        Ok(cl) => compute_phi(cl),
        Err(layer) => Err(WellNestError::MixedLayer(*layer)),
    };
    checks.push(CheckResult {
        name: CheckName::WellNested,
        pass: phi_result.is_ok(),
        witness: phi_result.as_ref().err().map(|e| e.to_string()),
    });

    let root = t.root();
    checks.push(CheckResult {
        name: CheckName::RootLabelOne,
        pass: t.label(root).syms() == [1],
        witness: (t.label(root).syms() != [1]).then(|| format!("root label is {}", t.label(root))),
    });

    let reflect_nodes = t.reflect_nodes();

    // distinctness of reflect labels
    {
        let mut seen = std::collections::HashMap::new();
        let mut res = CheckResult { name: CheckName::ReflectLabelsDistinct, pass: true, witness: None };
        for &v in &reflect_nodes {
            if let Some(&w) = seen.get(t.label(v)) {
                let _: NodeId = w;
                res.pass = false;
                res.witness = Some(format!("label {} occurs twice", t.label(v)));
                break;
            }
            seen.insert(t.label(v).clone(), v);
        }
        checks.push(res);
    }

    // star-freedom of reflect labels
    {
        let bad = reflect_nodes.iter().find(|&&v| !t.label(v).is_star_free());
        checks.push(CheckResult {
            name: CheckName::ReflectStarFree,
            pass: bad.is_none(),
            witness: bad.map(|&v| format!("reflect label {} contains *", t.label(v))),
        });
    }

    // independence and clearing of the reflect label set
    {
        let labels: Vec<Label> = reflect_nodes.iter().map(|&v| t.label(v).clone()).collect();
        let indep = independence_witness(&labels);
        checks.push(match indep {
            Ok(None) => CheckResult { name: CheckName::ReflectIndependent, pass: true, witness: None },
            Ok(Some((x, y))) => CheckResult {
                name: CheckName::ReflectIndependent,
                pass: false,
                witness: Some(format!("{x} is a final substring of {y}")),
            },
            Err(e) => CheckResult {
                name: CheckName::ReflectIndependent,
                pass: false,
                witness: Some(e.to_string()),
            },
        });
        let all_star_free = labels.iter().all(|l| l.is_star_free());
        if all_star_free && !labels.is_empty() {
            let clr = clearing_witness(&labels, b);
            checks.push(match clr {
                Ok(None) => CheckResult { name: CheckName::ReflectClearing, pass: true, witness: None },
                Ok(Some(w)) => CheckResult {
                    name: CheckName::ReflectClearing,
                    pass: false,
                    witness: Some(format!("uncovered string {w}")),
                },
                Err(e) => CheckResult {
                    name: CheckName::ReflectClearing,
                    pass: false,
                    witness: Some(e.to_string()),
                },
            });
        } else {
            checks.push(CheckResult {
                name: CheckName::ReflectClearing,
                pass: false,
                witness: Some("not evaluated: reflect labels not star-free or empty".into()),
            });
        }
    }

    // the remaining checks need the layer indexing
    if let Some(idx) = t.indices() {
        // reflect label lengths equal the reflect index
        {
            let mut res = CheckResult { name: CheckName::ReflectLabelLength, pass: true, witness: None };
            'rl: for (&layer, &ri) in &idx.reflect_index {
                for &v in t.layer_members(layer) {
                    if t.label(v).len() != ri as usize {
                        res.pass = false;
                        res.witness = Some(format!(
                            "reflect node {} in layer {} has length {} != {}",
                            t.label(v),
                            layer,
                            t.label(v).len(),
                            ri
                        ));
                        break 'rl;
                    }
                }
            }
            checks.push(res);
        }

        // split label lengths: 1 + number of shallower reflect layers
        {
            let mut res = CheckResult { name: CheckName::SplitLabelLength, pass: true, witness: None };
            'sl: for (&layer, _) in &idx.split_index {
                let expected = 1 + idx.reflect_index.keys().filter(|&&l| l < layer).count();
                for &v in t.layer_members(layer) {
                    if t.label(v).len() != expected {
                        res.pass = false;
                        res.witness = Some(format!(
                            "split node {} in layer {} has length {} != {}",
                            t.label(v),
                            layer,
                            t.label(v).len(),
                            expected
                        ));
                        break 'sl;
                    }
                }
            }
            checks.push(res);
        }

        // star position and prefix agreement with the matching reflect ancestor
        {
            let mut res = CheckResult { name: CheckName::SplitStarPosition, pass: true, witness: None };
            'ss: for (&layer, &si) in &idx.split_index {
                let anc_layer = idx
                    .phi
                    .iter()
                    .find(|(_, &j)| j == layer)
                    .map(|(&i, _)| i)
                    .expect("phi is a bijection");
                for &v in t.layer_members(layer) {
                    let lv = t.label(v);
                    let fail = |msg: String, res: &mut CheckResult| {
                        res.pass = false;
                        res.witness = Some(msg);
                    };
                    if lv.star_position() != Some(si as usize) {
                        fail(
                            format!("split node {lv} must hold its unique * at position {si}"),
                            &mut res,
                        );
                        break 'ss;
                    }
                    let Some(anc) = t.ancestor_in_layer(v, anc_layer) else {
                        fail(format!("split node {lv} has no ancestor in layer {anc_layer}"), &mut res);
                        break 'ss;
                    };
                    let la = t.label(anc);
                    for p in 0..si as usize {
                        if lv.sym(p) != la.sym(p) {
                            fail(
                                format!("split node {lv} disagrees with ancestor {la} at position {p}"),
                                &mut res,
                            );
                            break 'ss;
                        }
                    }
                }
            }
            checks.push(res);
        }

        // children of each internal split partition their subtrees by the
        // symbol at the split index
        {
            let mut res = CheckResult { name: CheckName::ChildPartition, pass: true, witness: None };
            // iterative DFS with a stack of (position, required symbol)
            let mut constraints: Vec<(usize, u8)> = Vec::new();
            enum Ev {
                Enter(NodeId, Option<(usize, u8)>),
                Leave(bool),
            }
            let mut stack = vec![Ev::Enter(root, None)];
            'cp: while let Some(ev) = stack.pop() {
                match ev {
                    Ev::Leave(pushed) => {
                        if pushed {
                            constraints.pop();
                        }
                    }
                    Ev::Enter(v, c) => {
                        let pushed = if let Some(c) = c {
                            constraints.push(c);
                            true
                        } else {
                            false
                        };
                        stack.push(Ev::Leave(pushed));
                        let lv = t.label(v);
                        for &(pos, sym) in &constraints {
                            if lv.sym(pos) != Some(sym) {
                                res.pass = false;
                                res.witness = Some(format!(
                                    "node {lv} must carry symbol {sym} at position {pos}"
                                ));
                                break 'cp;
                            }
                        }
                        let ch = t.children(v);
                        if ch.len() == b as usize {
                            let Some(si) = idx.split_index.get(&t.layer_of(v)) else {
                                res.pass = false;
                                res.witness = Some(format!("internal node {lv} lies outside split layers"));
                                break 'cp;
                            };
                            let si = *si as usize;
                            let mut seen = [false; 10];
                            for &cnode in ch {
                                let Some(s) = t.label(cnode).sym(si) else {
                                    res.pass = false;
                                    res.witness = Some(format!(
                                        "child {} too short for split position {si}",
                                        t.label(cnode)
                                    ));
                                    break 'cp;
                                };
                                if s == STAR || s as usize >= seen.len() || seen[s as usize] {
                                    res.pass = false;
                                    res.witness = Some(format!(
                                        "children of {lv} do not carry distinct digits at position {si}"
                                    ));
                                    break 'cp;
                                }
                                seen[s as usize] = true;
                                stack.push(Ev::Enter(cnode, Some((si, s))));
                            }
                        } else {
                            for &cnode in ch {
                                stack.push(Ev::Enter(cnode, None));
                            }
                        }
                    }
                }
            }
            checks.push(res);
        }
    }

    ValidationReport { checks }
}

// ---------------------------------------------------------------------------
// the concrete tree family

/// Builds the base tree of the family for branching factor `delta`: a chain of
/// reflect/split layer pairs, one per terminal digit `2..=delta`, closed by a
/// leaf layer whose labels carry `*` at position 1.
pub fn build_t2(delta: u8) -> Result<ConstructionTree, TreeError> {
    build_t2_chained(delta, delta)
}

/// The same construction with the digit chain capped at `max_digit`; with
/// `max_digit = 3` this reproduces the three-chain labeling for any `delta`,
/// which fails the clearing check as soon as `delta > 3`.
pub fn build_t2_chained(delta: u8, max_digit: u8) -> Result<ConstructionTree, TreeError> {
    if delta < 3 {
        return Err(TreeError::BadBase(delta));
    }
    if max_digit < 2 || max_digit > delta {
        return Err(TreeError::BadBase(max_digit));
    }
    let b = delta;
    let mut labels: Vec<Label> = Vec::new();
    let mut parent: Vec<NodeId> = Vec::new();
    let mut children: Vec<Vec<NodeId>> = Vec::new();
    let push = |label: Label, par: NodeId, parent: &mut Vec<NodeId>, labels: &mut Vec<Label>, children: &mut Vec<Vec<NodeId>>| -> NodeId {
        let id = labels.len() as NodeId;
        labels.push(label);
        parent.push(par);
        children.push(Vec::new());
        if par != NO_PARENT {
            children[par as usize].push(id);
        }
        id
    };

    let root = push(Label::new(b, vec![1])?, NO_PARENT, &mut parent, &mut labels, &mut children);
    let n12 = push(Label::new(b, vec![2, 1])?, root, &mut parent, &mut labels, &mut children);
    let s12 = push(Label::new(b, vec![2, 1, STAR])?, n12, &mut parent, &mut labels, &mut children);

    // one reflect + split layer pair per digit d = 2..=max_digit; layer
    // members are generated in lexicographic label order so ids stay
    // layer-contiguous
    let mut prev_split_layer: Vec<NodeId> = vec![s12];
    for d in 2..=max_digit {
        let mut reflect_layer = Vec::new();
        let mut split_layer = Vec::new();
        for &sp in &prev_split_layer {
            // child label: parent's underlying chain with position 1 bumped
            // from d to d+1 and a fresh top digit
            let base_syms: Vec<u8> = labels[sp as usize]
                .syms()
                .iter()
                .copied()
                .filter(|&s| s != STAR)
                .collect();
            for k in 1..=b {
                let mut syms = base_syms.clone();
                syms[1] = d;
                syms.push(k);
                let r = push(Label::new(b, syms)?, sp, &mut parent, &mut labels, &mut children);
                reflect_layer.push(r);
            }
        }
        for &r in &reflect_layer {
            let mut syms = labels[r as usize].syms().to_vec();
            syms.push(STAR);
            let s = push(Label::new(b, syms)?, r, &mut parent, &mut labels, &mut children);
            split_layer.push(s);
        }
        prev_split_layer = split_layer;
    }

    // leaf layer: fresh top digit, star moved to position 1, position 0 = 1
    for &sp in &prev_split_layer {
        let chain: Vec<u8> = labels[sp as usize]
            .syms()
            .iter()
            .copied()
            .filter(|&s| s != STAR)
            .collect();
        // chain = [2, max_digit, c_1, .., c_{max_digit-1}]
        for p in 1..=b {
            let mut syms = vec![1u8, STAR];
            syms.extend_from_slice(&chain[2..]);
            syms.push(p);
            push(Label::new(b, syms)?, sp, &mut parent, &mut labels, &mut children);
        }
    }

    ConstructionTree::new(b, labels, parent, children)
}

// ---------------------------------------------------------------------------
// serialization

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: NodeId,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    label: String,
    kind: NodeKind,
}

#[derive(Serialize, Deserialize)]
struct JsonTree {
    b: u8,
    nodes: Vec<JsonNode>,
}

impl ConstructionTree {
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<JsonNode> = self
            .node_ids()
            .map(|v| JsonNode {
                id: v,
                parent: self.parent(v),
                children: self.children(v).to_vec(),
                label: self.label(v).to_string(),
                kind: self.kind(v),
            })
            .collect();
        serde_json::to_value(JsonTree { b: self.b, nodes }).expect("serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let jt: JsonTree = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
        let n = jt.nodes.len();
        let mut labels = vec![None; n];
        let mut parent = vec![NO_PARENT; n];
        let mut children = vec![Vec::new(); n];
        for node in &jt.nodes {
            let i = node.id as usize;
            if i >= n || labels[i].is_some() {
                return Err(format!("bad node id {}", node.id));
            }
            labels[i] = Some(Label::parse(&node.label, jt.b).map_err(|e| e.to_string())?);
            parent[i] = node.parent.unwrap_or(NO_PARENT);
            children[i] = node.children.clone();
        }
        let labels: Vec<Label> = labels
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or("missing node ids")?;
        let tree = ConstructionTree::new(jt.b, labels, parent, children).map_err(|e| e.to_string())?;
        for node in &jt.nodes {
            if tree.kind(node.id) != node.kind {
                return Err(format!("node {} kind does not match its child count", node.id));
            }
        }
        Ok(tree)
    }

    /// DOT rendering: circles for reflect nodes, diamonds for split nodes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph construction_tree {\n");
        for v in self.node_ids() {
            let shape = match self.kind(v) {
                NodeKind::Reflect => "circle",
                NodeKind::Split => "diamond",
            };
            out.push_str(&format!("  n{} [label=\"{}\", shape={}];\n", v, self.label(v), shape));
        }
        for v in self.node_ids() {
            for &c in self.children(v) {
                out.push_str(&format!("  n{} -- n{};\n", v, c));
            }
        }
        out.push_str("}\n");
        out
    }
}
