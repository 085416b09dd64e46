//! The two auxiliary edge labelings of a construction tree. Edges point from
//! child to parent and are keyed by their child endpoint. For the edge above
//! each node, `psi` predicts the labels of the 2-leaves of the matching
//! unmarked component of the evolving input tree, and `pi` the labels of the
//! remaining component nodes.

use crate::ctree::{ConstructionTree, NodeId, NodeKind};
use crate::label::{Label, STAR};
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct EdgeLabeling {
    /// keyed by child node id; the root has no entry
    pub psi: Vec<Option<BTreeSet<Label>>>,
    pub pi: Vec<Option<BTreeSet<Label>>>,
}

impl EdgeLabeling {
    pub fn psi_of(&self, child: NodeId) -> &BTreeSet<Label> {
        self.psi[child as usize].as_ref().expect("non-root edge")
    }

    pub fn pi_of(&self, child: NodeId) -> &BTreeSet<Label> {
        self.pi[child as usize].as_ref().expect("non-root edge")
    }
}

/// Top-down derivation of both labelings over the whole tree.
pub fn compute_labelings(t: &ConstructionTree) -> EdgeLabeling {
    let n = t.len();
    let mut psi: Vec<Option<BTreeSet<Label>>> = vec![None; n];
    let mut pi: Vec<Option<BTreeSet<Label>>> = vec![None; n];
    let root = t.root();
    let delta = t.b();

    // base: the edge whose head is the root
    for &c in t.children(root) {
        psi[c as usize] = Some(base_psi(delta));
        pi[c as usize] = Some(base_pi(delta));
    }

    let mut queue: std::collections::VecDeque<NodeId> = t.children(root).iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        let psi_v = psi[v as usize].clone().expect("set before enqueue");
        let pi_v = pi[v as usize].clone().expect("set before enqueue");
        for &u in t.children(v) {
            let (p, q) = step(t, v, u, &psi_v, &pi_v);
            psi[u as usize] = Some(p);
            pi[u as usize] = Some(q);
            queue.push_back(u);
        }
    }
    EdgeLabeling { psi, pi }
}

fn base_psi(delta: u8) -> BTreeSet<Label> {
    (1..=delta)
        .map(|i| Label::new(delta, vec![2, i]).expect("valid"))
        .collect()
}

fn base_pi(delta: u8) -> BTreeSet<Label> {
    [Label::new(delta, vec![1, STAR]).expect("valid")].into()
}

/// One application of the recursion for edge `(u, v)` given the labeling of
/// the edge above `v`.
fn step(
    t: &ConstructionTree,
    v: NodeId,
    u: NodeId,
    psi_v: &BTreeSet<Label>,
    pi_v: &BTreeSet<Label>,
) -> (BTreeSet<Label>, BTreeSet<Label>) {
    let delta = t.b();
    let lv = t.label(v);
    match t.kind(v) {
        NodeKind::Reflect => {
            let mut p = BTreeSet::new();
            for z in psi_v {
                if z == lv {
                    continue;
                }
                for i in 1..=delta {
                    p.insert(z.prepend(i).expect("valid"));
                }
            }
            let mut q = BTreeSet::new();
            for z in pi_v {
                if z == lv {
                    continue;
                }
                for i in 1..=delta {
                    q.insert(z.prepend(i).expect("valid"));
                }
            }
            q.insert(lv.prepend(STAR).expect("valid"));
            (p, q)
        }
        NodeKind::Split => {
            let j = lv.star_position().expect("split labels hold one star");
            let i = t.label(u).sym(j).expect("child reaches the star position");
            let keep = |z: &&Label| z.sym(j) == Some(i);
            (
                psi_v.iter().filter(keep).cloned().collect(),
                pi_v.iter().filter(keep).cloned().collect(),
            )
        }
    }
}

/// The same derivation along a single root-to-node path of labels, for trees
/// kept implicit. `path[k]` is the label of the k-th node from the root; the
/// result holds one (psi, pi) pair per edge, the pair at index k labeling the
/// edge whose child is `path[k + 1]`.
pub fn path_labelings(
    delta: u8,
    path: &[Label],
) -> Vec<(BTreeSet<Label>, BTreeSet<Label>)> {
    let mut out = Vec::new();
    if path.len() < 2 {
        return out;
    }
    let mut psi = base_psi(delta);
    let mut pi = base_pi(delta);
    out.push((psi.clone(), pi.clone()));
    for k in 1..path.len() - 1 {
        let v = &path[k];
        let u = &path[k + 1];
        if let Some(j) = v.star_position() {
            let i = u.sym(j).expect("child reaches the star position");
            psi = psi.iter().filter(|z| z.sym(j) == Some(i)).cloned().collect();
            pi = pi.iter().filter(|z| z.sym(j) == Some(i)).cloned().collect();
        } else {
            let mut p = BTreeSet::new();
            for z in &psi {
                if z == v {
                    continue;
                }
                for i in 1..=delta {
                    p.insert(z.prepend(i).expect("valid"));
                }
            }
            let mut q = BTreeSet::new();
            for z in &pi {
                if z == v {
                    continue;
                }
                for i in 1..=delta {
                    q.insert(z.prepend(i).expect("valid"));
                }
            }
            q.insert(v.prepend(STAR).expect("valid"));
            psi = p;
            pi = q;
        }
        out.push((psi.clone(), pi.clone()));
    }
    out
}
