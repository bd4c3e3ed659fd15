use std::collections::VecDeque;

use super::CsrMatrix;

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`. Each connected component is started
/// from a pseudo-peripheral vertex found by repeated breadth-first sweeps.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree, &mut level);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], level: &mut [usize]) -> (usize, Vec<usize>) {
    let mut touched = vec![start];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        depth = depth.max(level[v]);
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                touched.push(w);
                queue.push_back(w);
            }
        }
    }
    let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == depth).collect();
    for &v in &touched {
        level[v] = usize::MAX;
    }
    (depth, last)
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], level: &mut [usize]) -> usize {
    let mut current = seed;
    let (mut depth, mut last) = bfs_levels(current, adj, level);
    for _ in 0..8 {
        let candidate = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
        let (d, l) = bfs_levels(candidate, adj, level);
        if d <= depth {
            break;
        }
        current = candidate;
        depth = d;
        last = l;
    }
    current
}
