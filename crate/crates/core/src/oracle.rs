//! Exhaustive graph searches used as independent checks on the closed-form routing.
//!
//! Everything here works on an explicit adjacency list built from the edge
//! list, never on digit arithmetic.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::constellation::Topology;

/// Undirected adjacency lists indexed by node index.
pub fn adjacency(topo: &Topology) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); topo.node_count()];
    for e in topo.edges() {
        adj[e.from].push(e.to);
        adj[e.to].push(e.from);
    }
    adj
}

/// Hop distances from `src`; unreachable nodes get u32::MAX.
pub fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut q = VecDeque::new();
    dist[src] = 0;
    q.push_back(src);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Largest BFS eccentricity over all sources.
pub fn diameter(adj: &[Vec<usize>]) -> u32 {
    (0..adj.len())
        .map(|s| bfs(adj, s).into_iter().max().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Item {
    // Reversed so BinaryHeap pops the smallest cost.
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Single-source shortest paths with non-negative weights.
/// Returns (distance, predecessor); the source's predecessor is itself.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> (Vec<f64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    prev[src] = src;
    heap.push(Item(0.0, src));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Item(nd, v));
            }
        }
    }
    (dist, prev)
}

/// Walks predecessors back from `dst`; None if unreachable.
pub fn trace_back(prev: &[usize], src: usize, dst: usize) -> Option<Vec<usize>> {
    if prev[dst] == usize::MAX {
        return None;
    }
    let mut out = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        out.push(cur);
    }
    out.reverse();
    Some(out)
}

/// Maximum number of internally node-disjoint s-d paths (unit node capacities).
pub fn max_node_disjoint(adj: &[Vec<usize>], s: usize, d: usize) -> usize {
    if s == d {
        return 0;
    }
    // Node v splits into in = 2v and out = 2v+1.
    let n = adj.len() * 2;
    let mut head: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut to = Vec::new();
    let mut cap: Vec<i32> = Vec::new();
    let mut add = |head: &mut Vec<Vec<usize>>, a: usize, b: usize, c: i32| {
        head[a].push(to.len());
        to.push(b);
        cap.push(c);
        head[b].push(to.len());
        to.push(a);
        cap.push(0);
    };
    let big = adj.len() as i32 + 1;
    for (v, nbrs) in adj.iter().enumerate() {
        let c = if v == s || v == d { big } else { 1 };
        add(&mut head, 2 * v, 2 * v + 1, c);
        for &w in nbrs {
            add(&mut head, 2 * v + 1, 2 * w, 1);
        }
    }
    let (src, sink) = (2 * s + 1, 2 * d);
    let mut flow = 0;
    loop {
        let mut via = vec![usize::MAX; n];
        let mut q = VecDeque::from([src]);
        via[src] = usize::MAX - 1;
        while let Some(u) = q.pop_front() {
            if u == sink {
                break;
            }
            for &e in &head[u] {
                if cap[e] > 0 && via[to[e]] == usize::MAX {
                    via[to[e]] = e;
                    q.push_back(to[e]);
                }
            }
        }
        if via[sink] == usize::MAX {
            return flow;
        }
        let mut v = sink;
        while v != src {
            let e = via[v];
            cap[e] -= 1;
            cap[e ^ 1] += 1;
            v = to[e ^ 1];
        }
        flow += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dijkstra_takes_cheap_arc_of_triangle() {
        let adj = vec![
            vec![(1, 5.0), (2, 1.0)],
            vec![(0, 5.0), (2, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
        ];
        let (dist, prev) = dijkstra(&adj, 0);
        assert_eq!(dist[1], 2.0);
        assert_eq!(trace_back(&prev, 0, 1).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn ring_diameter_and_cuts() {
        let n = 7;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n, (i + n - 1) % n]).collect();
        assert_eq!(diameter(&adj), 3);
        assert_eq!(max_node_disjoint(&adj, 0, 3), 2);
        assert_eq!(max_node_disjoint(&adj, 0, 1), 2);
    }

    #[test]
    fn complete_graph_disjoint_count() {
        let n = 5;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        // Direct edge plus one path through each of the other three nodes.
        assert_eq!(max_node_disjoint(&adj, 0, 1), 4);
    }
}
