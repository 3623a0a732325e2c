//! Exact chemical and restricted distances on a finite edge sample.
//!
//! A path from `x` to `y` alternates straight segments (cost = length) and
//! edge crossings (cost 1 each). On a finite edge set the infimum is a
//! shortest-path problem whose nodes are `x`, `y` and the edge endpoints:
//! any segment may be straightened between consecutive edge endpoints
//! (triangle inequality), and crossing an edge twice never helps since the
//! loop between the two crossings can be cut out at no extra cost.
//!
//! Admissibility: an edge may be used iff both endpoints lie in the open
//! ball `B(x, R)`, with `R = 2|x - y|` for the restricted distance and
//! `R = 2|x - y|^{gt^{-k}}` for the k-th inflated variant (`gt = (1+gamma)/2`).
//!
//! Ties between equal values are broken by fewer edges, then by node order.

mod brute;
mod grid;
mod line;

use serde::Serialize;

use crate::continuum::{sample_continuum_edges, subsample_window, EdgeSample, Window};
use crate::error::{Error, Result};
use crate::io::{self, CsvTable, F17};
use crate::model::{norm_dist, Budget, ModelParams, Norm};
use crate::rng::SeedSpec;

pub use brute::{brute_force_distance, N_SMALL};

/// One move of a witness path.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Segment { from: Vec<f64>, to: Vec<f64> },
    Edge { from: Vec<f64>, to: Vec<f64> },
}

/// A distance value with its decomposition and witness path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub value: f64,
    pub n_edges: u32,
    pub seg_len: f64,
    pub path: Vec<Step>,
}

impl PathResult {
    /// The empty path: one straight segment.
    pub fn direct(x: &[f64], y: &[f64], norm: Norm) -> Self {
        let len = norm_dist(x, y, norm);
        PathResult {
            value: len,
            n_edges: 0,
            seg_len: len,
            path: vec![Step::Segment {
                from: x.to_vec(),
                to: y.to_vec(),
            }],
        }
    }

    /// Builds the result from a list of oriented edges, in path order.
    pub(crate) fn from_edge_sequence(x: &[f64], y: &[f64], norm: Norm, edges: &[(&[f64], &[f64])]) -> Self {
        let mut path = Vec::with_capacity(2 * edges.len() + 1);
        let mut seg_len = 0.0;
        let mut cur = x;
        for &(a, b) in edges {
            seg_len += norm_dist(cur, a, norm);
            path.push(Step::Segment {
                from: cur.to_vec(),
                to: a.to_vec(),
            });
            path.push(Step::Edge {
                from: a.to_vec(),
                to: b.to_vec(),
            });
            cur = b;
        }
        seg_len += norm_dist(cur, y, norm);
        path.push(Step::Segment {
            from: cur.to_vec(),
            to: y.to_vec(),
        });
        let n_edges = edges.len() as u32;
        PathResult {
            value: n_edges as f64 + seg_len,
            n_edges,
            seg_len,
            path,
        }
    }

    /// `{value, n_edges, seg_len, path:[...]}` with 17-digit floats.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Move {
            kind: &'static str,
            from: Vec<F17>,
            to: Vec<F17>,
        }
        #[derive(Serialize)]
        struct Out {
            value: F17,
            n_edges: u32,
            seg_len: F17,
            path: Vec<Move>,
        }
        let conv = |v: &[f64]| v.iter().map(|c| F17(*c)).collect::<Vec<_>>();
        let out = Out {
            value: F17(self.value),
            n_edges: self.n_edges,
            seg_len: F17(self.seg_len),
            path: self
                .path
                .iter()
                .map(|s| match s {
                    Step::Segment { from, to } => Move {
                        kind: "segment",
                        from: conv(from),
                        to: conv(to),
                    },
                    Step::Edge { from, to } => Move {
                        kind: "edge",
                        from: conv(from),
                        to: conv(to),
                    },
                })
                .collect(),
        };
        Ok(serde_json::to_string(&out)?)
    }
}

/// Admissibility radius `2|x - y|^{gt^{-k}}`.
pub fn admissibility_radius(dist_xy: f64, gamma_tilde: f64, k: u32) -> f64 {
    2.0 * dist_xy.powf(gamma_tilde.powi(-(k as i32)))
}

/// Edges of `sample` with both endpoints in the open ball `B(x, radius)`,
/// flattened as `[a_0.., b_0.., a_1.., ...]`.
fn admissible_edges(sample: &EdgeSample, x: &[f64], radius: f64) -> Vec<f64> {
    let norm = sample.norm;
    let mut out = Vec::new();
    for (u, v) in sample.edges() {
        if norm_dist(u, x, norm) < radius && norm_dist(v, x, norm) < radius {
            out.extend_from_slice(u);
            out.extend_from_slice(v);
        }
    }
    out
}

/// Exact shortest path over a flat list of admissible edges; dispatches to
/// the one-dimensional fast path when `d = 1`.
pub fn shortest_path(d: usize, norm: Norm, x: &[f64], y: &[f64], edges: &[f64]) -> PathResult {
    if d == 1 {
        line::shortest_path_1d(x[0], y[0], edges)
    } else {
        grid::shortest_path_grid(d, norm, x, y, edges)
    }
}

/// The general-dimension engine, also usable for `d = 1` (cross-checks).
pub fn shortest_path_general(d: usize, norm: Norm, x: &[f64], y: &[f64], edges: &[f64]) -> PathResult {
    grid::shortest_path_grid(d, norm, x, y, edges)
}

fn check_query(sample: &EdgeSample, x: &[f64], y: &[f64], radius: f64) -> Result<()> {
    if x.len() != sample.dim() || y.len() != sample.dim() {
        return Err(Error::Domain("query point has wrong dimension".into()));
    }
    let ball = Window {
        center: x.to_vec(),
        radius,
    };
    if radius > 0.0 && !sample.window.contains_window(&ball, sample.norm) {
        return Err(Error::Precondition(format!(
            "sample window (center {:?}, radius {}) does not contain B(x, {radius})",
            sample.window.center, sample.window.radius
        )));
    }
    Ok(())
}

/// Restricted distance: paths whose edges stay in `B(x, 2|x - y|)`.
pub fn restricted_distance(sample: &EdgeSample, x: &[f64], y: &[f64]) -> Result<PathResult> {
    restricted_distance_k(sample, x, y, 0)
}

/// Inflated restricted distance with admissibility ball `B(x, 2|x-y|^{gt^{-k}})`.
pub fn restricted_distance_k(sample: &EdgeSample, x: &[f64], y: &[f64], k: u32) -> Result<PathResult> {
    let norm = sample.norm;
    let dxy = norm_dist(x, y, norm);
    let gt = 0.5 * (1.0 + sample.provenance.params.gamma());
    let radius = admissibility_radius(dxy, gt, k);
    check_query(sample, x, y, radius)?;
    if dxy <= 1.0 {
        // using an edge costs at least 1
        return Ok(PathResult::direct(x, y, norm));
    }
    let edges = admissible_edges(sample, x, radius);
    Ok(shortest_path(sample.dim(), norm, x, y, &edges))
}

/// Restricted distance on a fresh sample of the smallest admissible window.
pub fn sample_restricted_distance(
    params: &ModelParams,
    x: &[f64],
    y: &[f64],
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<PathResult> {
    let dxy = norm_dist(x, y, params.norm);
    if dxy <= 1.0 {
        return Ok(PathResult::direct(x, y, params.norm));
    }
    let w = Window::new(x.to_vec(), 2.0 * dxy)?;
    let sample = sample_continuum_edges(params, &w, 1.0, seed, budget)?;
    restricted_distance(&sample, x, y)
}

/// Distance using every edge of the sample (no admissibility restriction).
pub fn window_distance(sample: &EdgeSample, x: &[f64], y: &[f64]) -> Result<PathResult> {
    if x.len() != sample.dim() || y.len() != sample.dim() {
        return Err(Error::Domain("query point has wrong dimension".into()));
    }
    let mut edges = Vec::with_capacity(2 * sample.dim() * sample.len());
    for (u, v) in sample.edges() {
        edges.extend_from_slice(u);
        edges.extend_from_slice(v);
    }
    Ok(shortest_path(sample.dim(), sample.norm, x, y, &edges))
}

/// Values of the inflated family for `k = 0..=k_max` on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct KLadderResult {
    pub values: Vec<PathResult>,
    /// The two largest computed `k` give the same value.
    pub stabilized: bool,
    /// `k_max` was lowered to respect the budget.
    pub truncated: bool,
    pub requested_k_max: u32,
    pub n_edges_sampled: usize,
}

impl KLadderResult {
    pub fn k_max(&self) -> u32 {
        self.values.len() as u32 - 1
    }

    pub fn best(&self) -> &PathResult {
        self.values.last().expect("ladder has k = 0")
    }

    /// CSV with columns `k, value, stabilized`.
    pub fn to_csv(&self, params: &ModelParams, seed_label: &str) -> CsvTable {
        let mut t = CsvTable::new(["k", "value", "stabilized"]).with_comment(io::provenance_comment(params, seed_label));
        for (k, r) in self.values.iter().enumerate() {
            t.push(vec![k.to_string(), io::fmt_f64(r.value), self.stabilized.to_string()]);
        }
        t
    }
}

/// Samples once at the largest admissibility window and evaluates every
/// inflated restricted distance on nested sub-windows of that sample.
pub fn full_distance_estimate(
    params: &ModelParams,
    x: &[f64],
    y: &[f64],
    k_max: u32,
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<KLadderResult> {
    params.validate()?;
    if k_max < 1 {
        return Err(Error::Domain("k_max must be >= 1".into()));
    }
    let dxy = norm_dist(x, y, params.norm);
    let gt = 0.5 * (1.0 + params.gamma());
    let window_for = |k: u32| Window::new(x.to_vec(), admissibility_radius(dxy, gt, k).max(1.0));
    let mut k_top = k_max;
    let sample = loop {
        let w = window_for(k_top)?;
        match sample_continuum_edges(params, &w, 1.0, seed, budget) {
            Ok(s) => break s,
            Err(Error::Budget { .. }) if k_top > 0 => k_top -= 1,
            Err(e) => return Err(e),
        }
    };
    let mut values = Vec::with_capacity(k_top as usize + 1);
    for k in 0..=k_top {
        let inner = subsample_window(&sample, &window_for(k)?)?;
        values.push(restricted_distance_k(&inner, x, y, k)?);
    }
    let stabilized = values.len() >= 2 && values[values.len() - 1].value == values[values.len() - 2].value;
    Ok(KLadderResult {
        values,
        stabilized,
        truncated: k_top < k_max,
        requested_k_max: k_max,
        n_edges_sampled: sample.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn sample_1d(edges: &[(f64, f64)], radius: f64) -> EdgeSample {
        let params = ModelParams::new(1, 1.5, 1.0).unwrap();
        let e: Vec<_> = edges.iter().map(|&(a, b)| (vec![a], vec![b])).collect();
        EdgeSample::from_edges(&params, Window::centered(1, radius).unwrap(), 1.0, &e).unwrap()
    }

    #[test]
    fn empty_sample_is_direct() {
        let s = sample_1d(&[], 30.0);
        let r = restricted_distance(&s, &[0.0], &[10.0]).unwrap();
        assert_eq!(r.value, 10.0);
        assert_eq!(r.n_edges, 0);
    }

    #[test]
    fn single_useful_edge() {
        let s = sample_1d(&[(0.5, 9.5)], 30.0);
        let r = restricted_distance(&s, &[0.0], &[10.0]).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.n_edges, 1);
        assert_eq!(r.value, r.n_edges as f64 + r.seg_len);
        assert_eq!(r.path.len(), 3);
    }

    #[test]
    fn edge_outside_ball_is_ignored() {
        let s = sample_1d(&[(-25.0, -15.0)], 30.0);
        let r = restricted_distance(&s, &[0.0], &[10.0]).unwrap();
        assert_eq!(r.value, 10.0);
    }

    #[test]
    fn window_too_small() {
        let s = sample_1d(&[], 15.0);
        assert!(matches!(
            restricted_distance(&s, &[0.0], &[10.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn admissibility_radius_k3() {
        let r = admissibility_radius(10f64.exp(), 0.875, 3);
        let expect = 2.0 * (10.0 / 0.875f64.powi(3)).exp();
        assert!((r / expect - 1.0).abs() < 1e-12);
        assert!((10.0 / 0.875f64.powi(3) - 14.93).abs() < 5e-3);
    }

    #[test]
    fn k_zero_equals_restricted() {
        let params = ModelParams::new(1, 1.5, 1.0).unwrap();
        for i in 0..50 {
            let w = Window::centered(1, 400.0).unwrap();
            let s = sample_continuum_edges(&params, &w, 1.0, &SeedSpec::with_path(4, &[i]), &Budget::default()).unwrap();
            let a = restricted_distance(&s, &[0.0], &[60.0]).unwrap();
            let b = restricted_distance_k(&s, &[0.0], &[60.0], 0).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_ladder_stabilizes() {
        let params = ModelParams::new(1, 1.5, 1e-12).unwrap();
        let r = full_distance_estimate(&params, &[0.0], &[5.0], 2, &SeedSpec::new(1), &Budget::default()).unwrap();
        assert!(r.stabilized && !r.truncated);
        assert!(r.values.iter().all(|v| v.value == 5.0));
    }

    #[test]
    fn ladder_truncates_on_budget() {
        let params = ModelParams::new(1, 1.5, 1.0).unwrap();
        let r = full_distance_estimate(&params, &[0.0], &[200.0], 6, &SeedSpec::new(2), &Budget::new(1e5)).unwrap();
        assert!(r.truncated);
        assert!(r.k_max() < 6);
        for w in r.values.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
    }

    #[test]
    fn path_json_shape() {
        let s = sample_1d(&[(0.5, 9.5)], 30.0);
        let r = restricted_distance(&s, &[0.0], &[10.0]).unwrap();
        let j: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(j["n_edges"], 1);
        assert_eq!(j["path"].as_array().unwrap().len(), 3);
        assert_eq!(j["path"][1]["kind"], "edge");
    }
}
