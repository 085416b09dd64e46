//! Canonical encodings for tree isomorphism: unlabeled rooted subtrees,
//! whole unported trees (rooted at the centroid set), and port-preserving
//! rooted branch encodings.

/// Canonical bracket encoding of the rooted subtree below `root`, ignoring
/// labels and ports. Two subtrees are isomorphic as rooted trees iff their
/// encodings agree.
pub fn rooted_encoding(children: &dyn Fn(u32) -> Vec<u32>, root: u32) -> String {
    // post-order with explicit stack; children encodings sorted
    fn rec(children: &dyn Fn(u32) -> Vec<u32>, v: u32) -> String {
        let mut parts: Vec<String> = children(v).into_iter().map(|c| rec(children, c)).collect();
        parts.sort();
        format!("({})", parts.concat())
    }
    rec(children, root)
}

/// Canonical encoding of an entire tree given by an adjacency list, invariant
/// under relabeling. Rooting happens at the 1- or 2-element center.
pub fn tree_encoding(adj: &[Vec<u32>]) -> String {
    let n = adj.len();
    if n == 0 {
        return String::new();
    }
    if n == 1 {
        return "()".into();
    }
    // peel leaves to find the center
    let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut frontier: Vec<u32> = (0..n as u32).filter(|&v| deg[v as usize] <= 1).collect();
    let mut removed = vec![false; n];
    let mut remaining = n;
    while remaining > 2 {
        let mut next = Vec::new();
        for &v in &frontier {
            removed[v as usize] = true;
            remaining -= 1;
            for &w in &adj[v as usize] {
                if !removed[w as usize] {
                    deg[w as usize] -= 1;
                    if deg[w as usize] == 1 {
                        next.push(w);
                    }
                }
            }
        }
        frontier = next;
    }
    let centers: Vec<u32> = (0..n as u32).filter(|&v| !removed[v as usize]).collect();
    let encode_from = |root: u32| -> String {
        fn rec(adj: &[Vec<u32>], v: u32, parent: Option<u32>) -> String {
            let mut parts: Vec<String> = adj[v as usize]
                .iter()
                .filter(|&&w| Some(w) != parent)
                .map(|&w| rec(adj, w, Some(v)))
                .collect();
            parts.sort();
            format!("({})", parts.concat())
        }
        rec(adj, root, None)
    };
    centers.into_iter().map(encode_from).min().expect("tree has a center")
}

/// Port-preserving encoding of the branch hanging off `root` through the edge
/// to `first`. Nodes encode their remaining edges sorted by own port, with
/// both endpoint ports included, so two branches get equal encodings exactly
/// when there is an isomorphism fixing `root` and preserving all port numbers
/// on branch edges (the ports at `root` itself are not encoded).
pub fn ported_branch_encoding(
    neighbors: &dyn Fn(u32) -> Vec<(u32, u8, u8)>, // (other, my_port, other_port)
    in_scope: &dyn Fn(u32) -> bool,
    root: u32,
    first: u32,
) -> String {
    fn rec(
        neighbors: &dyn Fn(u32) -> Vec<(u32, u8, u8)>,
        in_scope: &dyn Fn(u32) -> bool,
        v: u32,
        parent: u32,
    ) -> String {
        let mut parts: Vec<(u8, String)> = Vec::new();
        for (w, my_port, other_port) in neighbors(v) {
            if w == parent || !in_scope(w) {
                continue;
            }
            let sub = rec(neighbors, in_scope, w, v);
            parts.push((my_port, format!("[{my_port}>{other_port}{sub}]")));
        }
        parts.sort();
        let inner: String = parts.into_iter().map(|(_, s)| s).collect();
        format!("({inner})")
    }
    let port_at_first = neighbors(first)
        .into_iter()
        .find(|&(w, _, _)| w == root)
        .map(|(_, p, _)| p)
        .expect("first must neighbor root");
    format!("{}{}", port_at_first, rec(neighbors, in_scope, first, root))
}
