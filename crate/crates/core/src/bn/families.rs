//! Graph families used by tests and experiments.

use rand::seq::SliceRandom;
use rand::Rng;

use super::Dag;

/// `n` isolated nodes.
pub fn empty(n: usize) -> Dag {
    Dag::new(vec![Vec::new(); n]).expect("edgeless graph is acyclic")
}

/// Markov chain `0 -> 1 -> ... -> n-1`.
pub fn chain(n: usize) -> Dag {
    let parents = (0..n)
        .map(|v| if v == 0 { vec![] } else { vec![v - 1] })
        .collect();
    Dag::new(parents).expect("chain is acyclic")
}

/// Star with center 0 and an edge to every other node.
pub fn star(n: usize) -> Dag {
    let parents = (0..n)
        .map(|v| if v == 0 { vec![] } else { vec![0] })
        .collect();
    Dag::new(parents).expect("star is acyclic")
}

/// Uniformly random labeled tree on `n` nodes as an edge list (Prüfer decoding).
pub fn random_tree_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BTreeSet<usize> =
        (0..n).filter(|&v| degree[v] == 1).collect();
    for &c in &code {
        let leaf = *leaves.iter().next().expect("a Prüfer step always has a leaf");
        leaves.remove(&leaf);
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let mut rest = leaves.into_iter();
    let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
    edges.push((a, b));
    edges
}

/// Orient an undirected tree away from `root`.
pub(crate) fn orient_tree(n: usize, edges: &[(usize, usize)], root: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parents = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                parents[u].push(v);
                stack.push(u);
            }
        }
    }
    parents
}

/// Uniform random tree rooted at a random node, edges directed away from it.
pub fn random_tree_parents<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dag {
    let edges = random_tree_edges(n, rng);
    let root = if n == 0 { 0 } else { rng.gen_range(0..n) };
    Dag::new(orient_tree(n, &edges, root)).expect("oriented tree is acyclic")
}

/// Random DAG with in-degree at most `d`: a random topological order, each
/// node choosing between 0 and `min(d, earlier)` parents among earlier nodes.
pub fn random_dag<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Dag {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut parents = vec![Vec::new(); n];
    for i in 1..n {
        let k = rng.gen_range(0..=d.min(i));
        parents[order[i]] = order[..i].choose_multiple(rng, k).copied().collect();
    }
    Dag::new(parents).expect("parents precede children in the drawn order")
}
