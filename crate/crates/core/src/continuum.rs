//! Poisson edge process on `R^d x R^d` restricted to a window ball.
//!
//! The process has intensity `beta |u - v|^{-s} du dv` on unordered pairs.
//! Sampling draws `N ~ Poisson(mu_bar)` candidates where `mu_bar` ignores the
//! window clipping: `u` uniform in the window, a cone-uniform direction and a
//! length from the truncated density `r^{d-1-s}` on `[ell_min, 2M]`. A
//! candidate is kept iff `u + w` also lies in the window. Kept candidates form
//! a Poisson process of ordered pairs with intensity `(beta/2)|u-v|^{-s}`,
//! which is exactly the unordered process after canonical ordering. Cost is
//! proportional to the number of candidates.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::io::{self, F17};
use crate::model::{euclid_len, norm_dist, norm_len, Budget, ModelParams, Norm};
use crate::quad::tanh_sinh_split;
use crate::rng::{RandomStream, SeedSpec};

/// Open ball `{p : |p - center| < radius}` in the model norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Window {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("window radius {radius} must be > 0")));
        }
        Ok(Window { center, radius })
    }

    pub fn centered(d: usize, radius: f64) -> Result<Self> {
        Window::new(vec![0.0; d], radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, p: &[f64], norm: Norm) -> bool {
        norm_dist(p, &self.center, norm) < self.radius
    }

    /// Whether the ball `inner` lies inside this ball.
    pub fn contains_window(&self, inner: &Window, norm: Norm) -> bool {
        norm_dist(&inner.center, &self.center, norm) + inner.radius
            <= self.radius * (1.0 + 1e-12)
    }

    /// Lebesgue volume of the window.
    pub fn volume(&self, norm: Norm) -> f64 {
        norm.unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: ModelParams,
    pub seed: Option<SeedSpec>,
    /// Set when `ell_min > 1`, which drops edges that could matter.
    pub approximate: bool,
}

/// A finite realization of the edge process inside a window.
///
/// Edges are stored once, canonically ordered (`|u|_2 < |v|_2`, ties broken
/// lexicographically); both orientations are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSample {
    d: usize,
    pub norm: Norm,
    pub window: Window,
    pub ell_min: f64,
    coords: Vec<f64>,
    pub provenance: Provenance,
}

/// `true` iff `(u, v)` is in canonical order.
pub fn is_canonical(u: &[f64], v: &[f64]) -> bool {
    let (nu, nv) = (euclid_len(u), euclid_len(v));
    if nu != nv {
        return nu < nv;
    }
    for (a, b) in u.iter().zip(v) {
        if a != b {
            return a < b;
        }
    }
    false
}

impl EdgeSample {
    pub fn empty(params: &ModelParams, window: Window, ell_min: f64) -> Self {
        EdgeSample {
            d: params.d,
            norm: params.norm,
            window,
            ell_min,
            coords: Vec::new(),
            provenance: Provenance {
                params: *params,
                seed: None,
                approximate: ell_min > 1.0,
            },
        }
    }

    /// Builds a sample from explicit edges, validating every endpoint.
    pub fn from_edges(
        params: &ModelParams,
        window: Window,
        ell_min: f64,
        edges: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<Self> {
        let mut s = EdgeSample::empty(params, window, ell_min);
        for (u, v) in edges {
            if u.len() != s.d || v.len() != s.d {
                return Err(Error::Domain("edge endpoint has wrong dimension".into()));
            }
            if !s.window.contains(u, s.norm) || !s.window.contains(v, s.norm) {
                return Err(Error::Domain("edge endpoint outside window".into()));
            }
            if norm_dist(u, v, s.norm) < ell_min {
                return Err(Error::Domain("edge shorter than ell_min".into()));
            }
            s.push(u, v);
        }
        Ok(s)
    }

    fn push(&mut self, u: &[f64], v: &[f64]) {
        if is_canonical(u, v) {
            self.coords.extend_from_slice(u);
            self.coords.extend_from_slice(v);
        } else {
            self.coords.extend_from_slice(v);
            self.coords.extend_from_slice(u);
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.coords.len() / (2 * self.d)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn edge(&self, i: usize) -> (&[f64], &[f64]) {
        let b = 2 * self.d * i;
        (&self.coords[b..b + self.d], &self.coords[b + self.d..b + 2 * self.d])
    }

    pub fn edges(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.coords
            .chunks_exact(2 * self.d)
            .map(move |c| c.split_at(self.d))
    }

    pub fn edge_len(&self, i: usize) -> f64 {
        let (u, v) = self.edge(i);
        norm_dist(u, v, self.norm)
    }

    /// Keeps the edges whose endpoints both satisfy `keep`.
    pub fn filter_endpoints<F: Fn(&[f64]) -> bool>(&self, window: Window, keep: F) -> EdgeSample {
        let mut coords = Vec::new();
        for (u, v) in self.edges() {
            if keep(u) && keep(v) {
                coords.extend_from_slice(u);
                coords.extend_from_slice(v);
            }
        }
        EdgeSample {
            d: self.d,
            norm: self.norm,
            window,
            ell_min: self.ell_min,
            coords,
            provenance: self.provenance.clone(),
        }
    }

    /// Maps every edge `(u, v)` to `(a u, a v)`; the image is distributed as a
    /// sample with `beta' = a^{s-2d} beta` on the scaled window.
    pub fn scaled(&self, a: f64) -> EdgeSample {
        let mut out = self.clone();
        for c in &mut out.coords {
            *c *= a;
        }
        out.window.center.iter_mut().for_each(|c| *c *= a);
        out.window.radius *= a;
        out.ell_min *= a;
        let p = &mut out.provenance.params;
        p.beta *= a.powf(p.s - 2.0 * p.d as f64);
        out
    }

    /// Asserts the stored-edge invariants; used by tests and `selftest`.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, (u, v)) in self.edges().enumerate() {
            if !is_canonical(u, v) {
                return Err(Error::Precondition(format!("edge {i} not canonical")));
            }
            if !self.window.contains(u, self.norm) || !self.window.contains(v, self.norm) {
                return Err(Error::Precondition(format!("edge {i} leaves the window")));
            }
            if norm_dist(u, v, self.norm) < self.ell_min {
                return Err(Error::Precondition(format!("edge {i} shorter than ell_min")));
            }
        }
        Ok(())
    }

    /// JSON Lines export: header record, then one `{"e":[[u..],[v..]]}` per edge.
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
            window_center: Vec<F17>,
            window_radius: F17,
            ell_min: F17,
            approximate: bool,
            seed: Option<String>,
            n_edges: usize,
        }
        #[derive(Serialize)]
        struct Rec {
            e: [Vec<F17>; 2],
        }
        let p = &self.provenance.params;
        let header = Header {
            kind: "edge_sample",
            version: io::ARTIFACT_VERSION,
            format_version: 1,
            params_hash: io::params_hash(p),
            d: self.d,
            s: F17(p.s),
            beta: F17(p.beta),
            eta: F17(p.eta),
            norm: self.norm.as_str(),
            window_center: self.window.center.iter().map(|c| F17(*c)).collect(),
            window_radius: F17(self.window.radius),
            ell_min: F17(self.ell_min),
            approximate: self.provenance.approximate,
            seed: self.provenance.seed.as_ref().map(|s| s.label()),
            n_edges: self.len(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for (u, v) in self.edges() {
            let r = Rec {
                e: [
                    u.iter().map(|c| F17(*c)).collect(),
                    v.iter().map(|c| F17(*c)).collect(),
                ],
            };
            out.push_str(&serde_json::to_string(&r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Reads the format written by [`EdgeSample::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            d: usize,
            s: f64,
            beta: f64,
            eta: f64,
            norm: String,
            window_center: Vec<f64>,
            window_radius: f64,
            ell_min: f64,
        }
        #[derive(Deserialize)]
        struct Rec {
            e: [Vec<f64>; 2],
        }
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let h: Header = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Parse("empty edge file".into()))?,
        )?;
        let params = ModelParams {
            d: h.d,
            s: h.s,
            beta: h.beta,
            eta: h.eta,
            norm: h.norm.parse()?,
        };
        params.validate()?;
        let window = Window::new(h.window_center, h.window_radius)?;
        let mut edges = Vec::new();
        for l in lines {
            let [u, v] = serde_json::from_str::<Rec>(l)?.e;
            edges.push((u, v));
        }
        EdgeSample::from_edges(&params, window, h.ell_min, &edges)
    }
}

/// Uniform point in the unit ball of `norm`, written to `out`.
pub fn sample_unit_ball(rng: &mut RandomStream, norm: Norm, out: &mut [f64]) {
    let d = out.len();
    match norm {
        Norm::LInf => {
            for c in out.iter_mut() {
                *c = 2.0 * rng.uniform() - 1.0;
            }
        }
        Norm::L2 => {
            sample_cone_direction(rng, norm, out);
            let r = rng.uniform().powf(1.0 / d as f64);
            out.iter_mut().for_each(|c| *c *= r);
        }
        Norm::L1 => {
            // (E_1..E_d)/(E_1+..+E_{d+1}) is uniform on the simplex interior.
            let mut total = rng.exponential();
            for c in out.iter_mut() {
                *c = rng.exponential();
                total += *c;
            }
            for c in out.iter_mut() {
                *c = rng.sign() * *c / total;
            }
        }
    }
}

/// Direction distributed by the cone measure of the unit sphere of `norm`:
/// a uniform point of the unit ball projected radially to its boundary.
pub fn sample_cone_direction(rng: &mut RandomStream, norm: Norm, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = rng.sign();
        return;
    }
    match norm {
        Norm::L2 => loop {
            for c in out.iter_mut() {
                *c = rng.normal();
            }
            let n = norm_len(out, Norm::L2);
            if n > 0.0 {
                out.iter_mut().for_each(|c| *c /= n);
                return;
            }
        },
        Norm::L1 | Norm::LInf => loop {
            sample_unit_ball(rng, norm, out);
            let n = norm_len(out, norm);
            if n > 0.0 {
                out.iter_mut().for_each(|c| *c /= n);
                return;
            }
        },
    }
}

/// `int_lo^hi r^{d-1-s} dr`.
fn radial_power_integral(d: usize, s: f64, lo: f64, hi: f64) -> f64 {
    let a = d as f64 - s;
    (hi.powf(a) - lo.powf(a)) / a
}

/// Mean number of candidates: the edge mass with the window clipping ignored.
pub fn candidate_mass(params: &ModelParams, window: &Window, ell_min: f64) -> f64 {
    let hi = 2.0 * window.radius;
    if hi <= ell_min {
        return 0.0;
    }
    let d = params.d;
    let v = params.norm.unit_ball_volume(d);
    0.5 * params.beta * window.volume(params.norm) * d as f64 * v
        * radial_power_integral(d, params.s, ell_min, hi)
}

/// Direction-averaged overlap `E_theta |B ∩ (B + r theta)|` of a radius-`m`
/// ball with its translates, `theta` cone-distributed.
pub fn mean_overlap(norm: Norm, d: usize, m: f64, r: f64) -> Result<f64> {
    if r >= 2.0 * m {
        return Ok(0.0);
    }
    let two_m = 2.0 * m;
    if d == 1 {
        return Ok(two_m - r);
    }
    match norm {
        Norm::L2 => {
            // lens volume of two radius-m balls at distance r
            let x = 1.0 - (r / two_m).powi(2);
            let vol = norm.unit_ball_volume(d) * m.powi(d as i32);
            Ok(vol * beta_reg((d as f64 + 1.0) / 2.0, 0.5, x))
        }
        Norm::LInf => Ok((two_m - r) * (two_m - 0.5 * r).powi(d as i32 - 1)),
        Norm::L1 if d == 2 => Ok(0.5 * (two_m - r) * (two_m - 0.5 * r)),
        Norm::L1 => Err(Error::Unsupported(format!(
            "window clipping profile for the L1 ball in d = {d}"
        ))),
    }
}

/// Mean number of unordered edges with length in `[ell_lo, ell_hi)` and both
/// endpoints in the window.
pub fn expected_edge_mass(params: &ModelParams, window: &Window, ell_lo: f64, ell_hi: f64) -> Result<f64> {
    params.validate()?;
    let m = window.radius;
    if !(ell_lo >= 1.0 && ell_lo <= ell_hi && ell_hi <= 2.0 * m * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "band [{ell_lo}, {ell_hi}) must satisfy 1 <= lo <= hi <= 2M = {}",
            2.0 * m
        )));
    }
    if ell_lo == ell_hi {
        return Ok(0.0);
    }
    let (d, s, beta) = (params.d, params.s, params.beta);
    if d == 1 {
        // int (2M - w) beta w^{-s} dw
        let prim = |w: f64| 2.0 * m * w.powf(1.0 - s) / (1.0 - s) - w.powf(2.0 - s) / (2.0 - s);
        return Ok(beta * (prim(ell_hi) - prim(ell_lo)));
    }
    let v = params.norm.unit_ball_volume(d);
    let norm = params.norm;
    mean_overlap(norm, d, m, ell_lo)?;
    // integrate over t = ln r
    let integrand = |t: f64| {
        let r = t.exp();
        r.powf(d as f64 - s) * mean_overlap(norm, d, m, r).unwrap_or(0.0)
    };
    let integral = tanh_sinh_split(integrand, ell_lo.ln(), ell_hi.ln(), 1e-12, 16);
    Ok(0.5 * beta * d as f64 * v * integral)
}

/// Exact sample of the edge process in `window` with lengths `>= ell_min`.
pub fn sample_continuum_edges(
    params: &ModelParams,
    window: &Window,
    ell_min: f64,
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<EdgeSample> {
    params.validate()?;
    if window.dim() != params.d {
        return Err(Error::Domain("window dimension differs from d".into()));
    }
    if !(ell_min >= 1.0) {
        return Err(Error::Domain(format!("ell_min = {ell_min} must be >= 1")));
    }
    let mu_bar = candidate_mass(params, window, ell_min);
    budget.check(mu_bar)?;
    let mut sample = EdgeSample::empty(params, window.clone(), ell_min);
    sample.provenance.seed = Some(seed.clone());
    if mu_bar <= 0.0 {
        return Ok(sample);
    }
    let mut rng = seed.stream();
    let n = Poisson::new(mu_bar)
        .map_err(|e| Error::Domain(format!("poisson mean {mu_bar}: {e}")))?
        .sample(&mut rng) as u64;
    let d = params.d;
    let m = window.radius;
    let a = d as f64 - params.s;
    let lo_a = ell_min.powf(a);
    let hi_a = (2.0 * m).powf(a);
    let mut u = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut dir = vec![0.0; d];
    sample.coords.reserve((n as usize).min(1 << 26) * 2 * d);
    for _ in 0..n {
        sample_unit_ball(&mut rng, params.norm, &mut u);
        for (ui, ci) in u.iter_mut().zip(&window.center) {
            *ui = ci + m * *ui;
        }
        let len = (lo_a + rng.uniform() * (hi_a - lo_a)).powf(1.0 / a);
        sample_cone_direction(&mut rng, params.norm, &mut dir);
        for i in 0..d {
            v[i] = u[i] + len * dir[i];
        }
        if window.contains(&v, params.norm) {
            sample.push(&u, &v);
        }
    }
    Ok(sample)
}

/// Restriction of `sample` to the sub-window `inner`.
pub fn subsample_window(sample: &EdgeSample, inner: &Window) -> Result<EdgeSample> {
    if inner.dim() != sample.dim() {
        return Err(Error::Domain("window dimension mismatch".into()));
    }
    if !sample.window.contains_window(inner, sample.norm) {
        return Err(Error::Domain("inner window is not contained in the sample window".into()));
    }
    let norm = sample.norm;
    Ok(sample.filter_endpoints(inner.clone(), |p| inner.contains(p, norm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh;
    use approx::assert_relative_eq;

    fn p(d: usize, s: f64) -> ModelParams {
        ModelParams::new(d, s, 1.0).unwrap()
    }

    #[test]
    fn window_5000_mass_matches_quadrature() {
        let params = p(1, 1.4);
        let w = Window::centered(1, 2500.0).unwrap();
        let mu = expected_edge_mass(&params, &w, 1.0, 5000.0).unwrap();
        let oracle = tanh_sinh(|x| (5000.0 - x) * x.powf(-1.4), 1.0, 5000.0, 1e-13);
        let closed = 12500.0 * (1.0 - 5000f64.powf(-0.4)) - (5000f64.powf(0.6) - 1.0) / 0.6;
        assert_relative_eq!(mu, oracle, max_relative = 1e-9);
        assert_relative_eq!(mu, closed, max_relative = 1e-12);
        assert!((mu - 1.181e4).abs() < 5.0);
    }

    #[test]
    fn empty_band_and_linearity() {
        let params = p(1, 1.4);
        let w = Window::centered(1, 100.0).unwrap();
        assert_eq!(expected_edge_mass(&params, &w, 3.0, 3.0).unwrap(), 0.0);
        let a = expected_edge_mass(&params, &w, 1.0, 50.0).unwrap();
        let b = expected_edge_mass(&params.with_beta(2.0).unwrap(), &w, 1.0, 50.0).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        assert!(expected_edge_mass(&params, &w, 0.5, 10.0).is_err());
        assert!(expected_edge_mass(&params, &w, 1.0, 250.0).is_err());
    }

    #[test]
    fn overlap_profiles_match_monte_carlo() {
        // E_theta |B ∩ (B + r theta)| against a direct Monte Carlo estimate.
        let mut rng = SeedSpec::new(5).stream();
        for (norm, d) in [(Norm::L2, 2), (Norm::L2, 3), (Norm::LInf, 2), (Norm::LInf, 3), (Norm::L1, 2)] {
            let m = 1.0;
            for r in [0.3, 1.0, 1.7] {
                let exact = mean_overlap(norm, d, m, r).unwrap();
                let n = 200_000;
                let mut hits = 0usize;
                let mut x = vec![0.0; d];
                let mut th = vec![0.0; d];
                for _ in 0..n {
                    sample_unit_ball(&mut rng, norm, &mut x);
                    sample_cone_direction(&mut rng, norm, &mut th);
                    let y: Vec<f64> = x.iter().zip(&th).map(|(a, b)| a - r * b).collect();
                    if norm_len(&y, norm) < m {
                        hits += 1;
                    }
                }
                let vol = norm.unit_ball_volume(d);
                let est = vol * hits as f64 / n as f64;
                let phat = hits as f64 / n as f64;
                let sd = vol * (phat * (1.0 - phat) / n as f64).sqrt();
                assert!((est - exact).abs() < 4.0 * sd + 1e-9, "{norm:?} d={d} r={r}: {est} vs {exact}");
            }
        }
    }

    #[test]
    fn l1_high_dim_clipping_unsupported() {
        assert!(matches!(mean_overlap(Norm::L1, 3, 1.0, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tiny_beta_gives_empty_sample() {
        let params = ModelParams::new(1, 1.5, 1e-9).unwrap();
        let w = Window::centered(1, 100.0).unwrap();
        let mu = candidate_mass(&params, &w, 1.0);
        assert!(1.0 - (-mu).exp() < 1e-4);
        let mut nonempty = 0;
        for i in 0..200 {
            let s = sample_continuum_edges(&params, &w, 1.0, &SeedSpec::with_path(1, &[i]), &Budget::default()).unwrap();
            nonempty += usize::from(!s.is_empty());
        }
        assert_eq!(nonempty, 0);
    }

    #[test]
    fn samples_satisfy_invariants() {
        for norm in Norm::ALL {
            for d in 1..=3 {
                let params = ModelParams::new(d, 1.5 * d as f64, 1.0).unwrap().with_norm(norm);
                let w = Window::new(vec![1.0; d], 20.0).unwrap();
                let s = sample_continuum_edges(&params, &w, 1.0, &SeedSpec::new(d as u64), &Budget::default()).unwrap();
                s.check_invariants().unwrap();
                assert!(!s.is_empty());
            }
        }
    }

    #[test]
    fn budget_refusal_reports_estimate() {
        let params = p(1, 1.5);
        let w = Window::centered(1, 1e9).unwrap();
        match sample_continuum_edges(&params, &w, 1.0, &SeedSpec::new(0), &Budget::new(1e6)) {
            Err(Error::Budget { estimate, .. }) => assert!(estimate > 1e9),
            other => panic!("expected budget refusal, got {other:?}"),
        }
    }

    #[test]
    fn subsample_identity_and_containment() {
        let params = p(1, 1.5);
        let w = Window::centered(1, 300.0).unwrap();
        let s = sample_continuum_edges(&params, &w, 1.0, &SeedSpec::new(3), &Budget::default()).unwrap();
        let same = subsample_window(&s, &w).unwrap();
        assert_eq!(same.len(), s.len());
        let outside = Window::new(vec![250.0], 100.0).unwrap();
        assert!(subsample_window(&s, &outside).is_err());
        let tiny = Window::new(vec![0.0], 0.4).unwrap();
        assert!(subsample_window(&s, &tiny).unwrap().is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let params = ModelParams::new(2, 3.0, 1.0).unwrap();
        let w = Window::centered(2, 10.0).unwrap();
        let s = sample_continuum_edges(&params, &w, 1.0, &SeedSpec::new(9), &Budget::default()).unwrap();
        let text = s.to_jsonl().unwrap();
        let back = EdgeSample::from_jsonl(&text).unwrap();
        assert_eq!(back.len(), s.len());
        for (a, b) in s.edges().zip(back.edges()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cone_direction_linf_faces_balanced() {
        let mut rng = SeedSpec::new(17).stream();
        let mut counts = [0usize; 4];
        let mut th = [0.0; 2];
        let n = 100_000;
        for _ in 0..n {
            sample_cone_direction(&mut rng, Norm::LInf, &mut th);
            let face = if th[0].abs() >= th[1].abs() {
                if th[0] > 0.0 { 0 } else { 1 }
            } else if th[1] > 0.0 {
                2
            } else {
                3
            };
            counts[face] += 1;
        }
        let e = n as f64 / 4.0;
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - e).abs() < 3.0 * sd, "{counts:?}");
        }
    }
}
