//! Node orderings with small dependent sets for a pair of trees.
//!
//! Given an ordering of the nodes of a tree, the dependent set of the `i`-th
//! node is the set of earlier nodes whose tree path to it crosses no other
//! earlier node. Conditioned on its dependent set, a variable of a
//! tree-structured distribution is independent of every other earlier
//! variable. [`order_two_trees`] builds one ordering for two trees at once in
//! which the union of the two dependent sets never exceeds five nodes, so two
//! tree-structured distributions on different trees share a factorization
//! whose blocks touch at most six variables ([`two_tree_factorization`]).
//!
//! The construction picks nodes one at a time while tracking, for each tree,
//! the connected components of the unpicked nodes and each component's
//! boundary (picked nodes adjacent to it). After every pick, all components
//! of both forests have boundary at most 2 except at most one component, in
//! either tree, with boundary 3. The next node is always picked inside that
//! exceptional component (or, if there is none, inside the first tree's
//! component holding the smallest unpicked index), using the component's
//! boundary children to choose a splitting node.

use std::collections::VecDeque;
use std::path::Path;

use crate::decomposition::{Block, Factorization};
use crate::error::{Error, Result};

/// Undirected tree, rooted for the ordering construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    adj: Vec<Vec<usize>>,
    root: usize,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl Tree {
    /// Tree on nodes `0..n` rooted at node 0.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_root(n, edges, 0)
    }

    pub fn with_root(n: usize, edges: &[(usize, usize)], root: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTree("a tree needs at least one node".into()));
        }
        if root >= n {
            return Err(Error::InvalidTree(format!("root {root} out of range")));
        }
        if edges.len() != n - 1 {
            return Err(Error::InvalidTree(format!(
                "{} edges for {n} nodes",
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTree(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidTree(format!("self-loop at {a}")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        let mut parent = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    depth[u] = depth[v] + 1;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        if reached != n {
            return Err(Error::InvalidTree("graph is not connected".into()));
        }
        Ok(Tree {
            adj,
            root,
            parent,
            depth,
        })
    }

    /// Parse an edge list, one `u v` pair per line. Blank lines and lines
    /// starting with `#` are skipped. The node count is one more than the
    /// largest index, or `n` if given.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => edges.push((a, b)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two node indices, got {line:?}",
                        i + 1
                    )))
                }
            }
        }
        let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1);
        Tree::new(n.unwrap_or(inferred), &edges)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_edge_list(&text, None)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .filter_map(|v| self.parent[v].map(|p| (p, v)))
            .collect()
    }

    /// Lowest common ancestor by parent climbing.
    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("deeper node has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("deeper node has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        a
    }

    /// Parent lists of the tree oriented away from its root.
    pub fn parent_lists(&self) -> Vec<Vec<usize>> {
        self.parent.iter().map(|p| p.iter().copied().collect()).collect()
    }
}

/// Prefix nodes whose path to `v` contains no other prefix node.
pub fn dependent_set(tree: &Tree, prefix: &[usize], v: usize) -> Result<Vec<usize>> {
    let n = tree.n();
    if v >= n {
        return Err(Error::InvalidTree(format!("node {v} out of range")));
    }
    let mut in_prefix = vec![false; n];
    for &u in prefix {
        if u >= n {
            return Err(Error::InvalidTree(format!("prefix node {u} out of range")));
        }
        in_prefix[u] = true;
    }
    if in_prefix[v] {
        return Err(Error::NodeInPrefix(v));
    }
    let mut seen = vec![false; n];
    seen[v] = true;
    let mut stack = vec![v];
    let mut out = Vec::new();
    while let Some(w) = stack.pop() {
        for &u in tree.neighbors(w) {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            if in_prefix[u] {
                out.push(u);
            } else {
                stack.push(u);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Boundary sizes of the components of `tree` minus `picked`, recomputed
/// from scratch.
pub fn boundary_sizes(tree: &Tree, picked: &[usize]) -> Vec<usize> {
    let n = tree.n();
    let mut is_picked = vec![false; n];
    for &u in picked {
        is_picked[u] = true;
    }
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if is_picked[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut boundary = Vec::new();
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(w) = stack.pop() {
            for &u in tree.neighbors(w) {
                if is_picked[u] {
                    boundary.push(u);
                } else if comp[u] == usize::MAX {
                    comp[u] = id;
                    stack.push(u);
                }
            }
        }
        // In a tree every outside neighbour touches a component exactly once.
        sizes.push(boundary.len());
    }
    sizes
}

/// Whether the ordering invariant holds for `picked`: every component of
/// both forests has boundary at most 2, except at most one with boundary 3.
pub fn ordering_invariant_holds(tp: &Tree, tq: &Tree, picked: &[usize]) -> bool {
    let mut threes = 0;
    for b in boundary_sizes(tp, picked)
        .into_iter()
        .chain(boundary_sizes(tq, picked))
    {
        match b {
            0..=2 => {}
            3 => threes += 1,
            _ => return false,
        }
    }
    threes <= 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingResult {
    pub order: Vec<usize>,
    /// Dependent set in the first tree of each position's node.
    pub dep_sets_p: Vec<Vec<usize>>,
    pub dep_sets_q: Vec<Vec<usize>>,
    /// Union of the two dependent sets, ascending.
    pub pi_sets: Vec<Vec<usize>>,
}

impl OrderingResult {
    pub fn max_pi(&self) -> usize {
        self.pi_sets.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
struct Component {
    nodes: Vec<usize>,
    boundary: Vec<usize>,
}

/// Components of one forest with incrementally maintained boundaries.
struct Forest<'a> {
    tree: &'a Tree,
    comp_of: Vec<usize>,
    comps: Vec<Option<Component>>,
}

const PICKED: usize = usize::MAX;

impl<'a> Forest<'a> {
    fn new(tree: &'a Tree) -> Self {
        let n = tree.n();
        Forest {
            tree,
            comp_of: vec![0; n],
            comps: vec![Some(Component {
                nodes: (0..n).collect(),
                boundary: Vec::new(),
            })],
        }
    }

    fn comp(&self, id: usize) -> &Component {
        self.comps[id].as_ref().expect("live component")
    }

    fn boundary_of_node(&self, v: usize) -> &[usize] {
        &self.comp(self.comp_of[v]).boundary
    }

    /// Remove `x`, splitting its component. Returns ids of the new components.
    fn remove(&mut self, x: usize) -> Vec<usize> {
        let old_id = self.comp_of[x];
        let old = self.comps[old_id].take().expect("x lies in a live component");
        self.comp_of[x] = PICKED;
        let mut created = Vec::new();
        for &start in self.tree.neighbors(x) {
            if self.comp_of[start] != old_id {
                continue;
            }
            let id = self.comps.len();
            let mut nodes = vec![start];
            self.comp_of[start] = id;
            let mut i = 0;
            while i < nodes.len() {
                let w = nodes[i];
                i += 1;
                for &u in self.tree.neighbors(w) {
                    if self.comp_of[u] == old_id {
                        self.comp_of[u] = id;
                        nodes.push(u);
                    }
                }
            }
            self.comps.push(Some(Component {
                nodes,
                boundary: vec![x],
            }));
            created.push(id);
        }
        for &b in &old.boundary {
            // b touches exactly one node of the old component.
            if let Some(&w) = self.tree.neighbors(b).iter().find(|&&w| {
                let c = self.comp_of[w];
                c != PICKED && created.contains(&c)
            }) {
                let c = self.comp_of[w];
                self.comps[c].as_mut().unwrap().boundary.push(b);
            }
        }
        for &c in &created {
            self.comps[c].as_mut().unwrap().boundary.sort_unstable();
        }
        created
    }

    /// Splitting node inside component `id` chosen from the boundary nodes
    /// that hang below the component in the rooted tree.
    fn split_point(&self, id: usize) -> usize {
        let t = self.tree;
        let comp = self.comp(id);
        let children: Vec<usize> = comp
            .boundary
            .iter()
            .copied()
            .filter(|&b| t.parent(b).is_some_and(|p| self.comp_of[p] == id))
            .collect();
        let pick = match children.as_slice() {
            [] => *comp
                .nodes
                .iter()
                .min_by_key(|&&v| (t.depth(v), v))
                .expect("components are non-empty"),
            [c] => t.parent(*c).expect("boundary child has a parent"),
            [a, b] => t.lca(*a, *b),
            [a, b, c] => [t.lca(*a, *b), t.lca(*a, *c), t.lca(*b, *c)]
                .into_iter()
                .max_by_key(|&v| (t.depth(v), std::cmp::Reverse(v)))
                .unwrap(),
            _ => {
                // Unreachable while the invariant holds; fall back to the
                // deepest pairwise LCA over all children.
                let mut best = children[0];
                let mut best_key = (0usize, std::cmp::Reverse(usize::MAX));
                for i in 0..children.len() {
                    for j in i + 1..children.len() {
                        let l = t.lca(children[i], children[j]);
                        let key = (t.depth(l), std::cmp::Reverse(l));
                        if key > best_key {
                            best_key = key;
                            best = l;
                        }
                    }
                }
                best
            }
        };
        debug_assert_eq!(self.comp_of[pick], id, "split point lies in the component");
        pick
    }

    #[cfg(debug_assertions)]
    fn matches_scratch(&self, picked: &[usize]) -> bool {
        let mut inc: Vec<usize> = self
            .comps
            .iter()
            .flatten()
            .map(|c| c.boundary.len())
            .collect();
        let mut scratch = boundary_sizes(self.tree, picked);
        inc.sort_unstable();
        scratch.sort_unstable();
        inc == scratch
    }
}

/// Order the nodes of two trees so every position's dependent sets in both
/// trees have a union of at most five nodes.
pub fn order_two_trees(tp: &Tree, tq: &Tree) -> Result<OrderingResult> {
    if tp.n() != tq.n() {
        return Err(Error::NodeSetMismatch(tp.n(), tq.n()));
    }
    let n = tp.n();
    let mut forests = [Forest::new(tp), Forest::new(tq)];
    // (forest index, component id) of the component allowed boundary 3.
    let mut exception: Option<(usize, usize)> = None;
    let mut picked = vec![false; n];
    let mut next_unpicked = 0;

    let mut result = OrderingResult {
        order: Vec::with_capacity(n),
        dep_sets_p: Vec::with_capacity(n),
        dep_sets_q: Vec::with_capacity(n),
        pi_sets: Vec::with_capacity(n),
    };

    for _ in 0..n {
        let (side, comp) = match exception {
            Some(e) => e,
            None => {
                while picked[next_unpicked] {
                    next_unpicked += 1;
                }
                (0, forests[0].comp_of[next_unpicked])
            }
        };
        let x = forests[side].split_point(comp);

        let dp = forests[0].boundary_of_node(x).to_vec();
        let dq = forests[1].boundary_of_node(x).to_vec();
        let mut pi: Vec<usize> = dp.iter().chain(&dq).copied().collect();
        pi.sort_unstable();
        pi.dedup();

        exception = None;
        for (f, forest) in forests.iter_mut().enumerate() {
            for id in forest.remove(x) {
                if forest.comp(id).boundary.len() >= 3 {
                    debug_assert!(exception.is_none(), "two components with boundary 3");
                    exception.get_or_insert((f, id));
                }
            }
        }
        picked[x] = true;
        result.order.push(x);
        result.dep_sets_p.push(dp);
        result.dep_sets_q.push(dq);
        result.pi_sets.push(pi);

        #[cfg(debug_assertions)]
        {
            debug_assert!(forests[0].matches_scratch(&result.order));
            debug_assert!(forests[1].matches_scratch(&result.order));
            debug_assert!(ordering_invariant_holds(tp, tq, &result.order));
        }
    }
    Ok(result)
}

/// Common factorization of any pair of distributions that are Markov on
/// `tp` and `tq` respectively: singleton blocks in the order of
/// [`order_two_trees`], each conditioned on its dependent-set union.
pub fn two_tree_factorization(tp: &Tree, tq: &Tree) -> Result<Factorization> {
    let ord = order_two_trees(tp, tq)?;
    let blocks = ord
        .order
        .iter()
        .zip(ord.pi_sets)
        .map(|(&v, pi)| Block::new(vec![v], pi))
        .collect();
    Factorization::new(blocks, &(0..tp.n()).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Tree {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Tree::new(n, &edges).unwrap()
    }

    fn star(n: usize, center: usize) -> Tree {
        let edges: Vec<_> = (0..n).filter(|&v| v != center).map(|v| (center, v)).collect();
        Tree::new(n, &edges).unwrap()
    }

    #[test]
    fn tree_validation() {
        assert!(Tree::new(3, &[(0, 1)]).is_err());
        assert!(Tree::new(3, &[(0, 1), (0, 1)]).is_err());
        assert!(Tree::new(2, &[(1, 1)]).is_err());
        assert!(Tree::new(2, &[(0, 2)]).is_err());
        assert!(Tree::new(0, &[]).is_err());
        assert!(Tree::new(1, &[]).is_ok());
    }

    #[test]
    fn parse_edge_list() {
        let t = Tree::parse_edge_list("# path\n0 1\n\n1 2\n", None).unwrap();
        assert_eq!(t.n(), 3);
        assert_eq!(t.parent(2), Some(1));
        assert!(Tree::parse_edge_list("0 1 2\n", None).is_err());
        assert!(Tree::parse_edge_list("0 x\n", None).is_err());
    }

    #[test]
    fn dependent_set_examples() {
        let t = path(3); // a=0, b=1, c=2
        assert_eq!(dependent_set(&t, &[], 1).unwrap(), Vec::<usize>::new());
        assert_eq!(dependent_set(&t, &[0], 2).unwrap(), vec![0]);
        assert_eq!(dependent_set(&t, &[0, 2], 1).unwrap(), vec![0, 2]);
        assert!(matches!(dependent_set(&t, &[0], 0), Err(Error::NodeInPrefix(0))));
    }

    #[test]
    fn lca_on_path_and_star() {
        let t = path(5);
        assert_eq!(t.lca(3, 4), 3);
        let s = star(5, 0);
        assert_eq!(s.lca(3, 4), 0);
    }

    #[test]
    fn star_orders() {
        let s = star(6, 2);
        // Any order beginning at the center.
        let order = [2, 0, 1, 3, 4, 5];
        for i in 1..order.len() {
            assert_eq!(dependent_set(&s, &order[..i], order[i]).unwrap(), vec![2]);
        }
        let r = order_two_trees(&s, &s).unwrap();
        assert!(r.max_pi() <= 1);
    }

    #[test]
    fn identical_paths_have_small_unions() {
        let p = path(12);
        let r = order_two_trees(&p, &p).unwrap();
        assert!(r.max_pi() <= 2);
        assert_eq!(r.dep_sets_p, r.dep_sets_q);
    }

    #[test]
    fn dep_sets_match_the_oracle() {
        let p = path(7);
        let s = star(7, 3);
        let r = order_two_trees(&p, &s).unwrap();
        for i in 0..7 {
            let prefix = &r.order[..i];
            assert_eq!(r.dep_sets_p[i], dependent_set(&p, prefix, r.order[i]).unwrap());
            assert_eq!(r.dep_sets_q[i], dependent_set(&s, prefix, r.order[i]).unwrap());
        }
        let mut sorted = r.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn path_versus_star_factorization() {
        let p = path(4);
        let s = star(4, 0);
        let f = two_tree_factorization(&p, &s).unwrap();
        assert!(f.blocks().iter().all(|b| b.cond.len() <= 3));
    }

    #[test]
    fn node_set_mismatch() {
        assert!(matches!(
            order_two_trees(&path(3), &path(4)),
            Err(Error::NodeSetMismatch(3, 4))
        ));
    }

    #[test]
    fn single_node() {
        let t = Tree::new(1, &[]).unwrap();
        let r = order_two_trees(&t, &t).unwrap();
        assert_eq!(r.order, vec![0]);
        assert_eq!(r.pi_sets, vec![Vec::<usize>::new()]);
    }
}
