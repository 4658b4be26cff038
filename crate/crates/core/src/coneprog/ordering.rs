//! Minimum-degree fill-reducing ordering on an explicit elimination graph.

use std::collections::BTreeSet;

/// Returns `perm` with `perm[k]` the original index eliminated `k`-th. Ties
/// are broken by the smaller index, so the result is deterministic.
pub(crate) fn minimum_degree(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &nbrs {
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_a_permutation() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 0)];
        let mut p = minimum_degree(6, &edges);
        assert_eq!(p[0], 5);
        p.sort();
        assert_eq!(p, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn star_center_goes_last() {
        let edges: Vec<(usize, usize)> = (1..8).map(|k| (0, k)).collect();
        let p = minimum_degree(8, &edges);
        assert!(p[..6].iter().all(|&v| v != 0));
    }
}
