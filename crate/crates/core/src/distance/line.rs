//! One-dimensional fast path.
//!
//! On the line a segment from `a` to `b` passes through every node between
//! them, so it decomposes into consecutive-neighbour hops at no extra cost.
//! The graph therefore only needs arcs between neighbours in sorted order
//! plus one arc per edge: `O(m log m)` for `m` edges.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::PathResult;
use crate::model::Norm;

/// Heap key: value, then edge count, then node index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Key {
    pub value: f64,
    pub n: u32,
    pub node: u32,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.n.cmp(&other.n))
            .then(self.node.cmp(&other.node))
    }
}

/// `(value, n)` comparison used for label updates.
#[inline]
pub(super) fn better(v: f64, n: u32, than_v: f64, than_n: u32) -> bool {
    v < than_v || (v == than_v && n < than_n)
}

const NONE: u32 = u32::MAX;

pub(super) fn shortest_path_1d(x: f64, y: f64, edges: &[f64]) -> PathResult {
    let m = edges.len() / 2;
    let n_nodes = 2 + 2 * m;
    let pos = |i: usize| -> f64 {
        match i {
            0 => x,
            1 => y,
            _ => edges[i - 2],
        }
    };
    let mut order: Vec<u32> = (0..n_nodes as u32).collect();
    order.sort_unstable_by(|&a, &b| pos(a as usize).total_cmp(&pos(b as usize)).then(a.cmp(&b)));
    let mut rank = vec![0u32; n_nodes];
    for (r, &i) in order.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    let mut value = vec![f64::INFINITY; n_nodes];
    let mut count = vec![u32::MAX; n_nodes];
    let mut pred = vec![NONE; n_nodes];
    let mut done = vec![false; n_nodes];
    let mut heap = BinaryHeap::new();
    value[0] = 0.0;
    count[0] = 0;
    heap.push(Reverse(Key { value: 0.0, n: 0, node: 0 }));
    // y is reachable directly; this bounds the search from the start
    value[1] = (x - y).abs();
    count[1] = 0;
    pred[1] = 0;
    heap.push(Reverse(Key {
        value: value[1],
        n: 0,
        node: 1,
    }));
    while let Some(Reverse(k)) = heap.pop() {
        let u = k.node as usize;
        if done[u] || k.value != value[u] || k.n != count[u] {
            continue;
        }
        done[u] = true;
        if u == 1 {
            break;
        }
        let pu = pos(u);
        let mut relax = |w: usize, nv: f64, nn: u32, heap: &mut BinaryHeap<Reverse<Key>>| {
            if done[w] || !better(nv, nn, value[w], count[w]) {
                return;
            }
            // nothing beyond the current bound for y can help
            if w != 1 && !better(nv, nn, value[1], count[1]) {
                return;
            }
            value[w] = nv;
            count[w] = nn;
            pred[w] = u as u32;
            heap.push(Reverse(Key {
                value: nv,
                n: nn,
                node: w as u32,
            }));
        };
        let r = rank[u] as usize;
        if r > 0 {
            let w = order[r - 1] as usize;
            relax(w, k.value + (pu - pos(w)), k.n, &mut heap);
        }
        if r + 1 < n_nodes {
            let w = order[r + 1] as usize;
            relax(w, k.value + (pos(w) - pu), k.n, &mut heap);
        }
        if u >= 2 {
            let w = u ^ 1;
            relax(w, k.value + 1.0, k.n + 1, &mut heap);
        }
    }
    // recover the oriented edges used, in path order
    let mut used = Vec::new();
    let mut cur = 1usize;
    while cur != 0 {
        let p = pred[cur] as usize;
        if p >= 2 && cur >= 2 && p ^ 1 == cur && count[cur] == count[p] + 1 {
            used.push((p, cur));
        }
        cur = p;
    }
    used.reverse();
    let coords: Vec<[f64; 1]> = (0..n_nodes).map(|i| [pos(i)]).collect();
    let seq: Vec<(&[f64], &[f64])> = used
        .iter()
        .map(|&(a, b)| (&coords[a][..], &coords[b][..]))
        .collect();
    PathResult::from_edge_sequence(&[x], &[y], Norm::L2, &seq)
}
