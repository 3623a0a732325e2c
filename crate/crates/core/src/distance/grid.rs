//! General-dimension engine: Dijkstra over "just crossed an edge" states.
//!
//! From a settled state at point `p` with label `g`, a segment to endpoint
//! `w` is only worth taking if the edge at `w` is crossed next, so the move
//! `p -> w -> partner(w)` is relaxed as one step of cost `|p - w| + 1`. The
//! target `y` is relaxed directly. Candidate endpoints come from a uniform
//! spatial grid, restricted to the sup-norm cube of radius
//! `bound(y) - g - 1`; every supported norm dominates the sup norm, so the
//! cube contains all useful endpoints. The bound starts at `|x - y|`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::line::{better, Key};
use super::PathResult;
use crate::model::{norm_dist, Norm};

struct Grid {
    d: usize,
    h: f64,
    cells: HashMap<Vec<i64>, Vec<u32>>,
    n_points: usize,
}

impl Grid {
    fn new(d: usize, pts: &[f64]) -> Self {
        let n = pts.len() / d.max(1);
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in pts.chunks_exact(d) {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let ext = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let per_axis = (n as f64).powf(1.0 / d as f64).ceil().max(1.0);
        let h = if ext > 0.0 { ext / per_axis } else { 1.0 };
        let mut g = Grid {
            d,
            h,
            cells: HashMap::new(),
            n_points: n,
        };
        for (i, p) in pts.chunks_exact(d).enumerate() {
            let key = g.key(p);
            g.cells.entry(key).or_default().push(i as u32);
        }
        g
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|c| (c / self.h).floor() as i64).collect()
    }

    /// Calls `f` for every point whose cell meets the cube `p ± r`.
    fn for_each_near<F: FnMut(usize)>(&self, p: &[f64], r: f64, mut f: F) {
        if r < 0.0 {
            return;
        }
        let lo: Vec<i64> = p.iter().map(|c| ((c - r) / self.h).floor() as i64).collect();
        let hi: Vec<i64> = p.iter().map(|c| ((c + r) / self.h).floor() as i64).collect();
        let n_cells = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a + 1) as f64)
            .product::<f64>();
        if n_cells > self.cells.len() as f64 || n_cells > self.n_points as f64 {
            for ids in self.cells.values() {
                ids.iter().for_each(|&i| f(i as usize));
            }
            return;
        }
        let mut key = lo.clone();
        loop {
            if let Some(ids) = self.cells.get(&key) {
                ids.iter().for_each(|&i| f(i as usize));
            }
            let mut i = 0;
            loop {
                if i == self.d {
                    return;
                }
                if key[i] < hi[i] {
                    key[i] += 1;
                    break;
                }
                key[i] = lo[i];
                i += 1;
            }
        }
    }
}

const NONE: u32 = u32::MAX;

pub(super) fn shortest_path_grid(d: usize, norm: Norm, x: &[f64], y: &[f64], edges: &[f64]) -> PathResult {
    let m = edges.len() / (2 * d);
    // endpoint e has coordinates edges[e*d..], partner e ^ 1
    let grid = Grid::new(d, edges);
    let n_states = 2 * m + 1;
    let point = |s: usize| -> &[f64] {
        if s == 0 {
            x
        } else {
            &edges[(s - 1) * d..s * d]
        }
    };
    let mut value = vec![f64::INFINITY; n_states];
    let mut count = vec![u32::MAX; n_states];
    let mut pred = vec![NONE; n_states];
    let mut done = vec![false; n_states];
    // best route to y: (value, n, last state)
    let mut best_v = norm_dist(x, y, norm);
    let mut best_n = 0u32;
    let mut best_from = 0usize;
    let mut heap = BinaryHeap::new();
    value[0] = 0.0;
    count[0] = 0;
    heap.push(Reverse(Key { value: 0.0, n: 0, node: 0 }));
    while let Some(Reverse(k)) = heap.pop() {
        let u = k.node as usize;
        if done[u] || k.value != value[u] || k.n != count[u] {
            continue;
        }
        if !better(k.value, k.n, best_v, best_n) {
            break;
        }
        done[u] = true;
        let pu = point(u);
        let to_y = k.value + norm_dist(pu, y, norm);
        if better(to_y, k.n, best_v, best_n) {
            best_v = to_y;
            best_n = k.n;
            best_from = u;
        }
        let cap = best_v - k.value - 1.0;
        grid.for_each_near(pu, cap, |e| {
            let target = (e ^ 1) + 1;
            if done[target] {
                return;
            }
            let seg = norm_dist(pu, &edges[e * d..(e + 1) * d], norm);
            let nv = k.value + seg + 1.0;
            let nn = k.n + 1;
            if better(nv, nn, best_v, best_n) && better(nv, nn, value[target], count[target]) {
                value[target] = nv;
                count[target] = nn;
                pred[target] = u as u32;
                heap.push(Reverse(Key {
                    value: nv,
                    n: nn,
                    node: target as u32,
                }));
            }
        });
    }
    let mut used = Vec::new();
    let mut cur = best_from;
    while cur != 0 {
        let e_to = cur - 1;
        used.push((e_to ^ 1, e_to));
        cur = pred[cur] as usize;
    }
    used.reverse();
    let seq: Vec<(&[f64], &[f64])> = used
        .iter()
        .map(|&(a, b)| (&edges[a * d..(a + 1) * d], &edges[b * d..(b + 1) * d]))
        .collect();
    PathResult::from_edge_sequence(x, y, norm, &seq)
}
