//! The layer-doubling transformation: the twice-visiting depth-first sequence
//! of a tree's reflect nodes, the pattern-compressed implicit form of the
//! transformed tree (one padded label per layer), on-demand node resolution,
//! and explicit materialization under a node budget.

use crate::ctree::{ConstructionTree, NodeId, NodeKind, TreeError, NO_PARENT};
use crate::label::{pad, Label, LabelError, PaddedLabel, STAR};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

pub use crate::tower::power_tower_exceeds;

#[derive(Debug, Error)]
pub enum FtreeError {
    #[error("materialization needs {demanded} nodes, budget is {budget}")]
    Capacity { demanded: BigUint, budget: u64 },
    #[error("layer {0} out of range")]
    LayerRange(usize),
    #[error("assignment does not match the layer's free positions")]
    BadAssignment,
    #[error("tree error: {0}")]
    Tree(#[from] TreeError),
    #[error("label error: {0}")]
    Label(#[from] LabelError),
}

/// One appearance of a reflect node in the depth-first sequence.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DfsEntry {
    pub t_node: NodeId,
    pub late: bool,
    /// number of late entries strictly before this one
    pub lambda: u32,
    /// 1-based rank of the node's first appearance
    pub early_rank: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct DfsSequence {
    pub entries: Vec<DfsEntry>,
}

/// The unique depth-first traversal visiting lower-numbered children first;
/// every reflect node appears once on the way down and once on the way up.
pub fn dfs_sequence(t: &ConstructionTree) -> DfsSequence {
    enum Ev {
        Visit(NodeId),
        Close(NodeId),
    }
    let mut entries: Vec<(NodeId, bool)> = Vec::new();
    let mut stack = vec![Ev::Visit(t.root())];
    while let Some(ev) = stack.pop() {
        match ev {
            Ev::Visit(v) => match t.kind(v) {
                NodeKind::Reflect => {
                    entries.push((v, false));
                    stack.push(Ev::Close(v));
                    stack.push(Ev::Visit(t.children(v)[0]));
                }
                NodeKind::Split => {
                    let order = visit_order(t, v);
                    for &c in order.iter().rev() {
                        stack.push(Ev::Visit(c));
                    }
                }
            },
            Ev::Close(v) => entries.push((v, true)),
        }
    }
    let mut rank_of = std::collections::HashMap::new();
    let mut next_rank = 0u32;
    let mut lambda = 0u32;
    let mut out = Vec::with_capacity(entries.len());
    for (v, late) in entries {
        let early_rank = if late {
            rank_of[&v]
        } else {
            next_rank += 1;
            rank_of.insert(v, next_rank);
            next_rank
        };
        out.push(DfsEntry { t_node: v, late, lambda, early_rank });
        if late {
            lambda += 1;
        }
    }
    DfsSequence { entries: out }
}

/// Children in ascending order of the symbol at the split index, falling back
/// to stored order when the index is unavailable.
fn visit_order(t: &ConstructionTree, v: NodeId) -> Vec<NodeId> {
    let mut ch = t.children(v).to_vec();
    if ch.len() == t.b() as usize {
        if let Some(si) = t.split_index_of(v) {
            ch.sort_by_key(|&c| t.label(c).sym(si as usize));
        }
    }
    ch
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FLayerKind {
    Reflect,
    InternalSplit,
    LeafSplit,
}

/// One layer of the transformed tree: every node of the layer is a filling of
/// the same padded pattern, one per digit assignment on the free positions.
#[derive(Debug, Clone, Serialize)]
pub struct FLayer {
    pub pattern: PaddedLabel,
    /// sorted free positions of the pattern
    pub free_positions: Vec<u16>,
    pub kind: FLayerKind,
    pub size: BigUint,
    pub t_node: NodeId,
    pub late: bool,
    pub early_rank: u32,
}

/// Pattern-compressed form of the transformed tree. A node address is
/// `(layer, digits)` with one digit per free position, ascending position
/// order; a node in layer `i` connects to the nodes of layer `i + 1` agreeing
/// with it on all of layer `i`'s free positions.
#[derive(Debug, Clone)]
pub struct ImplicitFTree {
    pub b: u8,
    pub layers: Vec<FLayer>,
}

/// Builds the implicit transformed tree of `t`.
pub fn f_implicit(t: &ConstructionTree) -> Result<ImplicitFTree, FtreeError> {
    let seq = dfs_sequence(t);
    let total = seq.entries.len();
    let mut layers = Vec::with_capacity(total);
    let mut free: Vec<u16> = Vec::new(); // sorted early ranks gone late
    for (i, e) in seq.entries.iter().enumerate() {
        let label = t.label(e.t_node);
        let pattern = if e.late {
            pad(&label.prepend(STAR)?, &free)?
        } else {
            pad(label, &free)?
        };
        let kind = if !e.late {
            FLayerKind::Reflect
        } else if i + 1 == total {
            FLayerKind::LeafSplit
        } else {
            FLayerKind::InternalSplit
        };
        layers.push(FLayer {
            pattern,
            free_positions: free.clone(),
            kind,
            size: BigUint::from(t.b() as u32).pow(free.len() as u32),
            t_node: e.t_node,
            late: e.late,
            early_rank: e.early_rank,
        });
        if e.late {
            let pos = e.early_rank as u16;
            let at = free.binary_search(&pos).unwrap_err();
            free.insert(at, pos);
        }
    }
    Ok(ImplicitFTree { b: t.b(), layers })
}

/// Resolved view of one implicit node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicitNode {
    pub label: Label,
    pub parent: Option<(usize, Vec<u8>)>,
    pub children: Vec<(usize, Vec<u8>)>,
}

impl ImplicitFTree {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Exact node count of the explicit tree.
    pub fn total_nodes(&self) -> BigUint {
        self.layers.iter().map(|l| l.size.clone()).sum()
    }

    /// Resolves the node of 1-based `layer` addressed by `digits` (one digit
    /// per free position, ascending position order).
    pub fn implicit_node(&self, layer: usize, digits: &[u8]) -> Result<ImplicitNode, FtreeError> {
        if layer == 0 || layer > self.layers.len() {
            return Err(FtreeError::LayerRange(layer));
        }
        let l = &self.layers[layer - 1];
        if digits.len() != l.free_positions.len()
            || digits.iter().any(|&d| d == 0 || d > self.b)
        {
            return Err(FtreeError::BadAssignment);
        }
        let label = l.pattern.fill(digits)?;
        let parent = if layer == 1 {
            None
        } else {
            let prev = &self.layers[layer - 2];
            if prev.late {
                // drop the coordinate introduced by the previous layer
                let pos = prev.early_rank as u16;
                let at = l
                    .free_positions
                    .binary_search(&pos)
                    .map_err(|_| FtreeError::BadAssignment)?;
                let mut parent_digits = digits.to_vec();
                parent_digits.remove(at);
                Some((layer - 1, parent_digits))
            } else {
                Some((layer - 1, digits.to_vec()))
            }
        };
        let children = if layer == self.layers.len() {
            Vec::new()
        } else if l.late {
            let pos = l.early_rank as u16;
            let next = &self.layers[layer];
            let at = next
                .free_positions
                .binary_search(&pos)
                .map_err(|_| FtreeError::BadAssignment)?;
            (1..=self.b)
                .map(|d| {
                    let mut child = digits.to_vec();
                    child.insert(at, d);
                    (layer + 1, child)
                })
                .collect()
        } else {
            vec![(layer + 1, digits.to_vec())]
        };
        Ok(ImplicitNode { label, parent, children })
    }

    /// Checks the pattern-level shape of every layer: kinds alternate with the
    /// early/late flags, reflect patterns are star-free, split patterns hold
    /// their star at the source node's early rank, free-position counts equal
    /// the number of earlier split layers, and consecutive sizes obey the
    /// stay/multiply law.
    pub fn check_patterns(&self) -> Result<(), String> {
        let mut splits_before = 0usize;
        for (i, l) in self.layers.iter().enumerate() {
            let reflect = !l.late;
            if reflect != (l.kind == FLayerKind::Reflect) {
                return Err(format!("layer {}: kind does not match early/late flag", i + 1));
            }
            if l.free_positions.len() != splits_before {
                return Err(format!(
                    "layer {}: {} free positions, {} earlier split layers",
                    i + 1,
                    l.free_positions.len(),
                    splits_before
                ));
            }
            let stripped = l.pattern.strip().map_err(|e| e.to_string())?;
            if reflect {
                if !stripped.is_star_free() {
                    return Err(format!("layer {}: reflect pattern contains *", i + 1));
                }
            } else {
                if l.pattern.sym(l.early_rank as usize) != Some(STAR) {
                    return Err(format!(
                        "layer {}: split pattern must hold * at position {}",
                        i + 1,
                        l.early_rank
                    ));
                }
            }
            if i + 1 < self.layers.len() {
                let next = &self.layers[i + 1];
                let expected = if l.late {
                    &l.size * BigUint::from(self.b as u32)
                } else {
                    l.size.clone()
                };
                if next.size != expected {
                    return Err(format!("layer {}: size law violated", i + 2));
                }
            }
            if l.late {
                splits_before += 1;
            }
        }
        Ok(())
    }

    /// Compact serialized form: the traversal plus per-layer patterns.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "b": self.b,
            "layers": self.layers.iter().map(|l| serde_json::json!({
                "pattern": l.pattern.to_string(),
                "kind": l.kind,
                "size": l.size.to_string(),
                "t_node": l.t_node,
                "late": l.late,
                "early_rank": l.early_rank,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Materializes the explicit tree, or its first `layer_limit` layers, while
/// the node count stays within `node_budget`.
pub fn f_materialize(
    f: &ImplicitFTree,
    layer_limit: Option<usize>,
    node_budget: u64,
) -> Result<ConstructionTree, FtreeError> {
    let upto = layer_limit.unwrap_or(f.layers.len()).min(f.layers.len());
    let demanded: BigUint = f.layers[..upto].iter().map(|l| l.size.clone()).sum();
    if demanded > BigUint::from(node_budget) {
        return Err(FtreeError::Capacity { demanded, budget: node_budget });
    }
    let b = f.b as u64;
    let sizes: Vec<u64> = f.layers[..upto]
        .iter()
        .map(|l| l.size.to_u64().expect("within budget"))
        .collect();
    let mut offsets = Vec::with_capacity(upto + 1);
    let mut acc = 0u64;
    for &s in &sizes {
        offsets.push(acc);
        acc += s;
    }
    offsets.push(acc);
    let n = acc as usize;

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut parent: Vec<NodeId> = vec![NO_PARENT; n];
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];

    for (li, layer) in f.layers[..upto].iter().enumerate() {
        let m = layer.free_positions.len();
        let mut digits = vec![1u8; m];
        // slot of the coordinate introduced by the previous layer, if late
        let prev_late_slot = if li > 0 && f.layers[li - 1].late {
            let pos = f.layers[li - 1].early_rank as u16;
            Some(
                layer
                    .free_positions
                    .binary_search(&pos)
                    .expect("previous layer's rank is free here"),
            )
        } else {
            None
        };
        for idx in 0..sizes[li] {
            // decode idx into digits (slot 0 least significant)
            let mut rest = idx;
            for d in digits.iter_mut() {
                *d = (rest % b) as u8 + 1;
                rest /= b;
            }
            let id = (offsets[li] + idx) as usize;
            labels[id] = Some(layer.pattern.fill(&digits)?);
            if li > 0 {
                let pidx = match prev_late_slot {
                    None => idx,
                    Some(t) => {
                        let stride = b.pow(t as u32);
                        (idx / (stride * b)) * stride + idx % stride
                    }
                };
                let pid = offsets[li - 1] + pidx;
                parent[id] = pid as NodeId;
            }
        }
    }
    for id in 0..n {
        let p = parent[id];
        if p != NO_PARENT {
            children[p as usize].push(id as NodeId);
        }
    }
    let labels: Vec<Label> = labels.into_iter().map(|l| l.expect("filled")).collect();
    Ok(ConstructionTree::new(f.b, labels, parent, children)?)
}

/// Total node count without materializing: the sum of `b^lambda` over the
/// traversal.
pub fn f_node_count(t: &ConstructionTree) -> BigUint {
    let seq = dfs_sequence(t);
    let b = BigUint::from(t.b() as u32);
    let mut total = BigUint::zero();
    let mut power = BigUint::one();
    let mut last_lambda = 0u32;
    for e in &seq.entries {
        while last_lambda < e.lambda {
            power *= &b;
            last_lambda += 1;
        }
        total += &power;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctree::build_t2;

    #[test]
    fn dfs_t2_shape() {
        let t = build_t2(3).unwrap();
        let seq = dfs_sequence(&t);
        assert_eq!(seq.entries.len(), 28);
        assert_eq!(seq.entries.iter().filter(|e| e.late).count(), 14);
        let first = &seq.entries[0];
        assert_eq!(t.label(first.t_node).to_string(), "1");
        assert!(!first.late);
        assert_eq!(first.lambda, 0);
        let second = &seq.entries[1];
        assert_eq!(t.label(second.t_node).to_string(), "12");
        assert!(!second.late);
        let last = seq.entries.last().unwrap();
        assert_eq!(t.label(last.t_node).to_string(), "1");
        assert!(last.late);
        assert_eq!(last.lambda, 13);
        // each node appears once early then once late
        let mut seen = std::collections::HashSet::new();
        for e in &seq.entries {
            if e.late {
                assert!(seen.contains(&e.t_node));
            } else {
                assert!(seen.insert(e.t_node));
            }
        }
    }

    #[test]
    fn implicit_t2_layers() {
        let t = build_t2(3).unwrap();
        let f = f_implicit(&t).unwrap();
        assert_eq!(f.layer_count(), 28);
        assert_eq!(f.layers[0].pattern.to_string(), "1");
        assert_eq!(f.layers[0].size, BigUint::from(1u32));
        assert_eq!(f.layers[27].size, BigUint::from(3u32).pow(13));
        assert_eq!(f.total_nodes(), BigUint::from(2_484_488u32));
        assert_eq!(f.total_nodes(), f_node_count(&t));
        f.check_patterns().unwrap();
    }

    #[test]
    fn implicit_node_round_trips() {
        let t = build_t2(3).unwrap();
        let f = f_implicit(&t).unwrap();
        // layer 6 carries one free position
        let l6 = &f.layers[5];
        assert_eq!(l6.free_positions.len(), 1);
        let info = f.implicit_node(6, &[2]).unwrap();
        let pos = l6.free_positions[0] as usize;
        assert_eq!(info.label.sym(pos), Some(2));
        for (p, s) in l6.pattern.syms().iter().enumerate() {
            if p != pos {
                assert_eq!(info.label.sym(p), Some(*s));
            }
        }
        // parent(child(x)) == x on sampled addresses
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let layer = rng.random_range(1..=f.layer_count());
            let m = f.layers[layer - 1].free_positions.len();
            let digits: Vec<u8> = (0..m).map(|_| rng.random_range(1..=3u8)).collect();
            let node = f.implicit_node(layer, &digits).unwrap();
            for (cl, cd) in &node.children {
                let child = f.implicit_node(*cl, cd).unwrap();
                let (pl, pd) = child.parent.unwrap();
                assert_eq!((pl, pd), (layer, digits.clone()));
            }
        }
    }

    #[test]
    fn materialize_prefix() {
        let t = build_t2(3).unwrap();
        let f = f_implicit(&t).unwrap();
        let prefix = f_materialize(&f, Some(5), 1 << 20).unwrap();
        assert_eq!(prefix.len(), 5);
        for v in prefix.node_ids() {
            let expected = f
                .implicit_node(prefix.layer_of(v) as usize, &decode(&f, &prefix, v))
                .unwrap();
            assert_eq!(prefix.label(v), &expected.label);
        }
    }

    fn decode(f: &ImplicitFTree, t: &ConstructionTree, v: NodeId) -> Vec<u8> {
        // node ids are layer-contiguous in materialization order
        let layer = t.layer_of(v) as usize;
        let offset: u64 = f.layers[..layer - 1]
            .iter()
            .map(|l| l.size.to_u64().unwrap())
            .sum();
        let mut idx = v as u64 - offset;
        let m = f.layers[layer - 1].free_positions.len();
        let mut digits = vec![0u8; m];
        for d in digits.iter_mut() {
            *d = (idx % 3) as u8 + 1;
            idx /= 3;
        }
        digits
    }

    #[test]
    fn budget_refusal() {
        let t = build_t2(3).unwrap();
        let f = f_implicit(&t).unwrap();
        match f_materialize(&f, None, 1000) {
            Err(FtreeError::Capacity { demanded, budget }) => {
                assert_eq!(demanded, BigUint::from(2_484_488u32));
                assert_eq!(budget, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_two_layer_tree_sequence() {
        use crate::ctree::ConstructionTree;
        use crate::label::Label;
        // one reflect node over one leaf; labeling is not clearing but the
        // traversal only needs the topology
        let labels = vec![Label::parse("1", 3).unwrap(), Label::parse("*1", 3).unwrap()];
        let t = ConstructionTree::new(3, labels, vec![NO_PARENT, 0], vec![vec![1], vec![]]).unwrap();
        let seq = dfs_sequence(&t);
        assert_eq!(seq.entries.len(), 2);
        assert!(!seq.entries[0].late);
        assert!(seq.entries[1].late);
        assert_eq!((seq.entries[0].lambda, seq.entries[1].lambda), (0, 0));
    }
}
