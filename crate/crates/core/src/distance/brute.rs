//! Exhaustive oracle: minimum over every ordered sequence of distinct
//! admissible edges, each in either orientation. Branches whose partial cost
//! already exceeds the best complete value are cut (all costs are
//! non-negative, so this cannot lose the optimum).

use rayon::prelude::*;

use super::PathResult;
use crate::continuum::Window;
use crate::error::{Error, Result};
use crate::model::{norm_dist, Norm};

/// Largest edge count accepted by the oracle.
pub const N_SMALL: usize = 8;

struct Search<'a> {
    norm: Norm,
    y: &'a [f64],
    edges: &'a [(Vec<f64>, Vec<f64>)],
    best: f64,
    best_n: usize,
    best_seq: Vec<(usize, bool)>,
    stack: Vec<(usize, bool)>,
    used: Vec<bool>,
}

impl Search<'_> {
    fn end(&self, i: usize, flip: bool) -> &[f64] {
        let (a, b) = &self.edges[i];
        if flip {
            a
        } else {
            b
        }
    }

    fn start(&self, i: usize, flip: bool) -> &[f64] {
        let (a, b) = &self.edges[i];
        if flip {
            b
        } else {
            a
        }
    }

    fn dfs(&mut self, cur: &[f64], cost: f64) {
        let total = cost + norm_dist(cur, self.y, self.norm);
        let n = self.stack.len();
        if total < self.best || (total == self.best && n < self.best_n) {
            self.best = total;
            self.best_n = n;
            self.best_seq = self.stack.clone();
        }
        if cost + 1.0 > self.best {
            return;
        }
        for i in 0..self.edges.len() {
            if self.used[i] {
                continue;
            }
            for flip in [false, true] {
                let c = cost + norm_dist(cur, self.start(i, flip), self.norm) + 1.0;
                if c > self.best {
                    continue;
                }
                self.used[i] = true;
                self.stack.push((i, flip));
                let next = self.end(i, flip).to_vec();
                self.dfs(&next, c);
                self.stack.pop();
                self.used[i] = false;
            }
        }
    }
}

/// Exact distance from `x` to `y` using edges with both endpoints in `ball`.
pub fn brute_force_distance(
    edges: &[(Vec<f64>, Vec<f64>)],
    x: &[f64],
    y: &[f64],
    ball: &Window,
    norm: Norm,
) -> Result<PathResult> {
    if edges.len() > N_SMALL {
        return Err(Error::Domain(format!(
            "brute force accepts at most {N_SMALL} edges, got {}",
            edges.len()
        )));
    }
    let admissible: Vec<(Vec<f64>, Vec<f64>)> = edges
        .iter()
        .filter(|(a, b)| ball.contains(a, norm) && ball.contains(b, norm))
        .cloned()
        .collect();
    let direct = norm_dist(x, y, norm);
    // one independent search per first move, run in parallel
    let firsts: Vec<(usize, bool)> = (0..admissible.len())
        .flat_map(|i| [(i, false), (i, true)])
        .collect();
    let results: Vec<(f64, usize, Vec<(usize, bool)>)> = firsts
        .par_iter()
        .map(|&(i, flip)| {
            let mut s = Search {
                norm,
                y,
                edges: &admissible,
                best: direct,
                best_n: 0,
                best_seq: Vec::new(),
                stack: vec![(i, flip)],
                used: vec![false; admissible.len()],
            };
            s.used[i] = true;
            let c = norm_dist(x, s.start(i, flip), norm) + 1.0;
            if c <= direct {
                let next = s.end(i, flip).to_vec();
                s.dfs(&next, c);
            }
            (s.best, s.best_n, s.best_seq)
        })
        .collect();
    let mut best = (direct, 0usize, Vec::new());
    for r in results {
        if r.0 < best.0 || (r.0 == best.0 && r.1 < best.1) {
            best = r;
        }
    }
    let seq: Vec<(&[f64], &[f64])> = best
        .2
        .iter()
        .map(|&(i, flip)| {
            let (a, b) = &admissible[i];
            if flip {
                (&b[..], &a[..])
            } else {
                (&a[..], &b[..])
            }
        })
        .collect();
    Ok(PathResult::from_edge_sequence(x, y, norm, &seq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_edges() {
        let w = Window::centered(1, 100.0).unwrap();
        let r = brute_force_distance(&[], &[0.0], &[10.0], &w, Norm::L2).unwrap();
        assert_eq!(r.value, 10.0);
    }

    #[test]
    fn one_edge_closed_form() {
        let w = Window::centered(2, 100.0).unwrap();
        let mut rng = crate::rng::SeedSpec::new(1).stream();
        for _ in 0..200 {
            let mut pt = || vec![20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0];
            let (x, y, a, b) = (pt(), pt(), pt(), pt());
            let n = Norm::L2;
            let expect = norm_dist(&x, &y, n)
                .min(norm_dist(&x, &a, n) + 1.0 + norm_dist(&b, &y, n))
                .min(norm_dist(&x, &b, n) + 1.0 + norm_dist(&a, &y, n));
            let r = brute_force_distance(&[(a, b)], &x, &y, &w, n).unwrap();
            assert!((r.value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_too_many() {
        let w = Window::centered(1, 100.0).unwrap();
        let e = vec![(vec![0.0], vec![5.0]); 9];
        assert!(brute_force_distance(&e, &[0.0], &[1.0], &w, Norm::L2).is_err());
    }
}
