//! Long-range percolation on a box of `Z^d` and its graph distance.
//!
//! The box is `[-L/2, L/2)^d` (with `lo = -floor(L/2)`). Nearest-neighbour
//! edges are implicit; long edges join non-adjacent pairs independently with
//! probability `1 - exp(-beta |x - y|^{-s})`.
//!
//! The sampler walks displacement classes: for a fixed displacement `v`, the
//! positions `x` with `x, x + v` in the box are scanned with geometric skips
//! (`floor(E / lambda_v)`, `E ~ Exp(1)`), so the work is one draw per class
//! plus one per edge. Every class owns a ChaCha stream number under the
//! graph key, which makes the output independent of scheduling.

use std::collections::VecDeque;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, CsvTable, F17};
use crate::model::{norm_len, Budget, ModelParams};
use crate::rng::{RandomStream, SeedSpec};

/// Largest vertex count accepted by the naive all-pairs sampler.
pub const NAIVE_MAX_VERTICES: usize = 4096;

/// Unreached marker in a [`DistanceField`]; never produced for in-box vertices.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

/// A sampled box of `Z^d`.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    pub params: ModelParams,
    pub side: usize,
    pub seed: Option<SeedSpec>,
    /// Sorted `(a, b)` vertex-index pairs with `a < b`.
    long_edges: Vec<(usize, usize)>,
    adjacency: OnceLock<Csr>,
}

/// Per-pair connection probability for displacement `v`; zero for adjacent
/// or identical vertices, whose status is fixed.
pub fn pair_probability(params: &ModelParams, v: &[i64]) -> f64 {
    let l1: i64 = v.iter().map(|c| c.abs()).sum();
    if l1 <= 1 {
        return 0.0;
    }
    -(-class_rate(params, v)).exp_m1()
}

/// `beta |v|^{-s}`.
fn class_rate(params: &ModelParams, v: &[i64]) -> f64 {
    let vf: Vec<f64> = v.iter().map(|&c| c as f64).collect();
    params.beta * norm_len(&vf, params.norm).powf(-params.s)
}

/// Displacements with `|v|_1 > 1`, one representative per `{v, -v}` (first
/// non-zero coordinate positive), in a fixed order.
fn displacement_classes(d: usize, side: usize) -> Vec<Vec<i64>> {
    let m = side as i64 - 1;
    let mut out = Vec::new();
    let mut v = vec![-m; d];
    loop {
        let first = v.iter().find(|c| **c != 0).copied().unwrap_or(0);
        let l1: i64 = v.iter().map(|c| c.abs()).sum();
        if first > 0 && l1 > 1 {
            out.push(v.clone());
        }
        let mut i = 0;
        loop {
            if i == d {
                return out;
            }
            if v[i] < m {
                v[i] += 1;
                break;
            }
            v[i] = -m;
            i += 1;
        }
    }
}

impl LatticeGraph {
    fn with_edges(params: ModelParams, side: usize, seed: Option<SeedSpec>, mut long_edges: Vec<(usize, usize)>) -> Self {
        long_edges.sort_unstable();
        long_edges.dedup();
        LatticeGraph {
            params,
            side,
            seed,
            long_edges,
            adjacency: OnceLock::new(),
        }
    }

    /// Builds a graph from explicit long edges given as coordinates.
    pub fn from_edges(params: &ModelParams, side: usize, edges: &[(Vec<i64>, Vec<i64>)]) -> Result<Self> {
        params.validate()?;
        check_side(params.d, side)?;
        let shell = LatticeGraph::with_edges(*params, side, None, Vec::new());
        let mut list = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (ia, ib) = (shell.index_of(a)?, shell.index_of(b)?);
            let l1: i64 = a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum();
            if a.len() != params.d || b.len() != params.d || l1 <= 1 {
                return Err(Error::Domain("long edge must join non-adjacent vertices".into()));
            }
            list.push((ia.min(ib), ia.max(ib)));
        }
        Ok(LatticeGraph::with_edges(*params, side, None, list))
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    /// Lowest coordinate of the box.
    pub fn lo(&self) -> i64 {
        -((self.side / 2) as i64)
    }

    pub fn n_vertices(&self) -> usize {
        self.side.pow(self.dim() as u32)
    }

    pub fn n_long_edges(&self) -> usize {
        self.long_edges.len()
    }

    pub fn index_of(&self, x: &[i64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::Domain("vertex has wrong dimension".into()));
        }
        let lo = self.lo();
        let mut idx = 0usize;
        for &c in x.iter().rev() {
            let off = c - lo;
            if off < 0 || off >= self.side as i64 {
                return Err(Error::Domain(format!("vertex {x:?} outside the box")));
            }
            idx = idx * self.side + off as usize;
        }
        Ok(idx)
    }

    pub fn coords_of(&self, mut idx: usize) -> Vec<i64> {
        let lo = self.lo();
        (0..self.dim())
            .map(|_| {
                let c = (idx % self.side) as i64 + lo;
                idx /= self.side;
                c
            })
            .collect()
    }

    /// Long edges as coordinate pairs.
    pub fn long_edges(&self) -> impl Iterator<Item = (Vec<i64>, Vec<i64>)> + '_ {
        self.long_edges
            .iter()
            .map(|&(a, b)| (self.coords_of(a), self.coords_of(b)))
    }

    pub fn long_edge_indices(&self) -> &[(usize, usize)] {
        &self.long_edges
    }

    /// Copy with one more long edge (used for perturbation tests).
    pub fn with_extra_edge(&self, a: &[i64], b: &[i64]) -> Result<Self> {
        let mut edges: Vec<_> = self.long_edges().collect();
        edges.push((a.to_vec(), b.to_vec()));
        let mut g = LatticeGraph::from_edges(&self.params, self.side, &edges)?;
        g.seed = self.seed.clone();
        Ok(g)
    }

    fn csr(&self) -> &Csr {
        self.adjacency.get_or_init(|| {
            let n = self.n_vertices();
            let mut deg = vec![0usize; n + 1];
            for &(a, b) in &self.long_edges {
                deg[a + 1] += 1;
                deg[b + 1] += 1;
            }
            for i in 0..n {
                deg[i + 1] += deg[i];
            }
            let mut fill = deg.clone();
            let mut targets = vec![0usize; deg[n]];
            for &(a, b) in &self.long_edges {
                targets[fill[a]] = b;
                fill[a] += 1;
                targets[fill[b]] = a;
                fill[b] += 1;
            }
            Csr {
                offsets: deg,
                targets,
            }
        })
    }

    /// JSON Lines: header record, then `{"e":[x,y]}` per long edge.
    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Header<'a> {
            kind: &'static str,
            version: &'static str,
            format_version: u32,
            params_hash: String,
            d: usize,
            s: F17,
            beta: F17,
            eta: F17,
            norm: &'a str,
            side: usize,
            box_lo: i64,
            seed: Option<String>,
            n_edges: usize,
        }
        let p = &self.params;
        let header = Header {
            kind: "lattice_graph",
            version: io::ARTIFACT_VERSION,
            format_version: 1,
            params_hash: io::params_hash(p),
            d: p.d,
            s: F17(p.s),
            beta: F17(p.beta),
            eta: F17(p.eta),
            norm: p.norm.as_str(),
            side: self.side,
            box_lo: self.lo(),
            seed: self.seed.as_ref().map(SeedSpec::label),
            n_edges: self.n_long_edges(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for (a, b) in self.long_edges() {
            out.push_str(&serde_json::to_string(&serde_json::json!({ "e": [a, b] }))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            d: usize,
            s: f64,
            beta: f64,
            eta: f64,
            norm: String,
            side: usize,
        }
        #[derive(Deserialize)]
        struct Rec {
            e: [Vec<i64>; 2],
        }
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let h: Header = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Parse("empty graph file".into()))?,
        )?;
        let params = ModelParams {
            d: h.d,
            s: h.s,
            beta: h.beta,
            eta: h.eta,
            norm: h.norm.parse()?,
        };
        let mut edges = Vec::new();
        for l in lines {
            let [a, b] = serde_json::from_str::<Rec>(l)?.e;
            edges.push((a, b));
        }
        LatticeGraph::from_edges(&params, h.side, &edges)
    }
}

fn check_side(d: usize, side: usize) -> Result<()> {
    if side < 2 {
        return Err(Error::Domain(format!("box side L = {side} must be >= 2")));
    }
    let n = (side as f64).powi(d as i32);
    if n > u32::MAX as f64 {
        return Err(Error::Budget {
            estimate: n,
            budget: u32::MAX as f64,
        });
    }
    Ok(())
}

/// Expected number of long edges in the box.
pub fn expected_long_edges(params: &ModelParams, side: usize) -> f64 {
    displacement_classes(params.d, side)
        .iter()
        .map(|v| positions(side, v) as f64 * pair_probability(params, v))
        .sum()
}

fn positions(side: usize, v: &[i64]) -> usize {
    v.iter().map(|c| side - c.unsigned_abs() as usize).product()
}

/// Samples the long edges of the box by displacement class.
pub fn sample_lattice_graph(params: &ModelParams, side: usize, seed: &SeedSpec, budget: &Budget) -> Result<LatticeGraph> {
    params.validate()?;
    check_side(params.d, side)?;
    let classes = displacement_classes(params.d, side);
    let estimate: f64 = classes
        .iter()
        .map(|v| positions(side, v) as f64 * pair_probability(params, v))
        .sum();
    budget.check(estimate + classes.len() as f64 * 1e-3)?;
    let key = seed.key();
    let d = params.d;
    let per_class: Vec<Vec<(usize, usize)>> = classes
        .par_iter()
        .enumerate()
        .map(|(ci, v)| {
            let lambda = class_rate(params, v);
            let mut rng = RandomStream::from_key(key, ci as u64);
            // ranges of the base point per axis
            let ext: Vec<usize> = v.iter().map(|c| side - c.unsigned_abs() as usize).collect();
            let start: Vec<usize> = v.iter().map(|&c| if c < 0 { c.unsigned_abs() as usize } else { 0 }).collect();
            let total: usize = ext.iter().product();
            let mut out = Vec::new();
            let mut pos = 0f64;
            loop {
                pos += (rng.exponential() / lambda).floor();
                if pos >= total as f64 {
                    break;
                }
                let mut k = pos as usize;
                let mut a = 0usize;
                let mut b = 0usize;
                let mut stride = 1usize;
                for i in 0..d {
                    let xi = start[i] + k % ext[i];
                    k /= ext[i];
                    let yi = (xi as i64 + v[i]) as usize;
                    a += xi * stride;
                    b += yi * stride;
                    stride *= side;
                }
                out.push((a.min(b), a.max(b)));
                pos += 1.0;
            }
            out
        })
        .collect();
    let edges: Vec<(usize, usize)> = per_class.into_iter().flatten().collect();
    Ok(LatticeGraph::with_edges(*params, side, Some(seed.clone()), edges))
}

/// Reference sampler: one Bernoulli draw per unordered pair. Test oracle only.
pub fn sample_lattice_naive(params: &ModelParams, side: usize, seed: &SeedSpec) -> Result<LatticeGraph> {
    params.validate()?;
    check_side(params.d, side)?;
    let shell = LatticeGraph::with_edges(*params, side, Some(seed.clone()), Vec::new());
    let n = shell.n_vertices();
    if n > NAIVE_MAX_VERTICES {
        return Err(Error::Budget {
            estimate: (n * n) as f64 / 2.0,
            budget: (NAIVE_MAX_VERTICES * NAIVE_MAX_VERTICES) as f64 / 2.0,
        });
    }
    let mut rng = seed.stream();
    let coords: Vec<Vec<i64>> = (0..n).map(|i| shell.coords_of(i)).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let v: Vec<i64> = coords[b].iter().zip(&coords[a]).map(|(p, q)| p - q).collect();
            let p = pair_probability(params, &v);
            if p > 0.0 && rng.uniform() < p {
                edges.push((a, b));
            }
        }
    }
    Ok(LatticeGraph::with_edges(*params, side, Some(seed.clone()), edges))
}

/// Graph distances from one origin to every vertex of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub origin: Vec<i64>,
    pub side: usize,
    pub lo: i64,
    pub dist: Vec<u32>,
}

impl DistanceField {
    pub fn get(&self, x: &[i64]) -> Option<u32> {
        let mut idx = 0usize;
        for &c in x.iter().rev() {
            let off = c - self.lo;
            if off < 0 || off >= self.side as i64 {
                return None;
            }
            idx = idx * self.side + off as usize;
        }
        Some(self.dist[idx])
    }

    /// CSV with offset columns `x0..` then `distance`.
    pub fn to_csv(&self, params: &ModelParams, seed_label: &str) -> CsvTable {
        let d = self.origin.len();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.push("distance".into());
        let mut t = CsvTable::new(header).with_comment(io::provenance_comment(params, seed_label));
        for (mut idx, &dv) in self.dist.iter().enumerate() {
            let mut row = Vec::with_capacity(d + 1);
            for i in 0..d {
                row.push(((idx % self.side) as i64 + self.lo - self.origin[i]).to_string());
                idx /= self.side;
            }
            row.push(dv.to_string());
            t.push(row);
        }
        t
    }
}

/// Breadth-first search within the box.
pub fn bfs_distance(graph: &LatticeGraph, origin: &[i64]) -> Result<DistanceField> {
    let src = graph.index_of(origin)?;
    let n = graph.n_vertices();
    let d = graph.dim();
    let side = graph.side;
    let csr = graph.csr();
    let mut dist = vec![UNREACHED; n];
    dist[src] = 0;
    let mut queue = VecDeque::with_capacity(1024);
    queue.push_back(src);
    let mut strides = vec![1usize; d];
    for i in 1..d {
        strides[i] = strides[i - 1] * side;
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u] + 1;
        for &st in &strides {
            let ci = (u / st) % side;
            if ci > 0 && dist[u - st] == UNREACHED {
                dist[u - st] = du;
                queue.push_back(u - st);
            }
            if ci + 1 < side && dist[u + st] == UNREACHED {
                dist[u + st] = du;
                queue.push_back(u + st);
            }
        }
        for &w in &csr.targets[csr.offsets[u]..csr.offsets[u + 1]] {
            if dist[w] == UNREACHED {
                dist[w] = du;
                queue.push_back(w);
            }
        }
    }
    Ok(DistanceField {
        origin: origin.to_vec(),
        side,
        lo: graph.lo(),
        dist,
    })
}

/// Distances at offsets within sup-radius `radius` of the origin, plus the
/// long edges with both endpoints in that region.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub origin: Vec<i64>,
    /// `(offset from origin, distance)`, offsets in index order.
    pub points: Vec<(Vec<i64>, u32)>,
    pub long_edges: Vec<(Vec<i64>, Vec<i64>)>,
}

pub fn distance_profile(graph: &LatticeGraph, origin: &[i64], radius: u64) -> Result<Profile> {
    let field = bfs_distance(graph, origin)?;
    let lo = graph.lo();
    let hi = lo + graph.side as i64 - 1;
    let r = radius as i64;
    if origin.iter().any(|&c| c - r < lo || c + r > hi) {
        return Err(Error::Precondition(format!(
            "profile radius {radius} leaves the box [{lo}, {hi}]"
        )));
    }
    let inside = |x: &[i64]| x.iter().zip(origin).all(|(a, o)| (a - o).abs() <= r);
    let mut points = Vec::new();
    for (idx, &dv) in field.dist.iter().enumerate() {
        let x = graph.coords_of(idx);
        if inside(&x) {
            let off = x.iter().zip(origin).map(|(a, o)| a - o).collect();
            points.push((off, dv));
        }
    }
    let long_edges = graph
        .long_edges()
        .filter(|(a, b)| inside(a) && inside(b))
        .map(|(a, b)| {
            let sub = |p: Vec<i64>| p.iter().zip(origin).map(|(a, o)| a - o).collect::<Vec<_>>();
            (sub(a), sub(b))
        })
        .collect();
    Ok(Profile {
        origin: origin.to_vec(),
        points,
        long_edges,
    })
}
