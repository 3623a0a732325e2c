//! Monte Carlo scaling experiments: the doubly exponential ladder, the limit
//! profile, exponent regressions and tail frequencies.
//!
//! Ladder level `n` evaluates `2^{-n} D(0, r^{gamma^{-n}} W)`. Each replicate
//! draws one `W` and `replicas_per_w` independent edge samples, so the level
//! variance splits into the variance of conditional means (`a_hat`) and the
//! mean conditional variance (`b_hat`).

use rayon::prelude::*;
use serde::Serialize;

use crate::distance::sample_restricted_distance;
use crate::error::{Error, Result};
use crate::io::{self, CsvTable};
use crate::lattice::{bfs_distance, sample_lattice_graph, UNREACHED};
use crate::model::{norm_len, Budget, ModelParams};
use crate::randomization::{draw_w, w_truncation, z_rate};
use crate::rng::SeedSpec;
use crate::stats::{ks_critical_one_sided, ks_one_sided, mean, ols, spearman, spearman_p_negative, variance, LinearFit, MeanCi};

/// Acceptance band for the ratio of consecutive raw level means.
pub const RATIO_BAND: (f64, f64) = (1.7, 2.3);
/// Acceptance band for the fitted exponent, relative to the target.
pub const DELTA_BAND: (f64, f64) = (0.8, 1.25);
/// `W` truncation tolerance used by ladders.
pub const LADDER_W_TOL: f64 = 1e-3;
/// Lattice box side as a multiple of `|x|`.
pub const LATTICE_BOX_FACTOR: u64 = 4;
/// Minimum sample size for the domination test.
pub const DOMINATION_MIN_SAMPLES: usize = 200;

/// Which way the ladder scales move with the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScaleConvention {
    /// `r^{gamma^{-n}}`: the scales used throughout.
    Inverse,
    /// `r^{gamma^n}`: kept only to demonstrate that it degenerates.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    pub r: f64,
    pub n_max: usize,
    pub replicates: usize,
    pub replicas_per_w: usize,
    pub convention: ScaleConvention,
}

impl LadderConfig {
    pub fn new(r: f64, n_max: usize, replicates: usize, replicas_per_w: usize) -> Self {
        LadderConfig {
            r,
            n_max,
            replicates,
            replicas_per_w,
            convention: ScaleConvention::Inverse,
        }
    }

    pub fn scale(&self, gamma: f64, n: usize) -> f64 {
        let e = match self.convention {
            ScaleConvention::Inverse => gamma.powi(-(n as i32)),
            ScaleConvention::Direct => gamma.powi(n as i32),
        };
        self.r.powf(e)
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 1.0 && self.r <= std::f64::consts::E) {
            return Err(Error::Domain(format!("r = {} must lie in (1, e]", self.r)));
        }
        if self.replicates < 2 {
            return Err(Error::Domain("ladder needs >= 2 replicates".into()));
        }
        if self.replicas_per_w < 2 {
            return Err(Error::Domain("ladder needs >= 2 replicas per W".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderLevel {
    pub n: usize,
    #[serde(serialize_with = "io::ser_f64")]
    pub scale: f64,
    /// `values[i][j]`: replicate `i`, replica `j`, already multiplied by `2^{-n}`.
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
    pub mean: MeanCi,
    #[serde(serialize_with = "io::ser_f64")]
    pub a_hat: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub b_hat: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub c_hat: f64,
}

impl LadderLevel {
    /// `2^n m_n`, the unscaled mean distance.
    pub fn raw_mean(&self) -> f64 {
        self.mean.mean * 2f64.powi(self.n as i32)
    }

    fn from_values(n: usize, scale: f64, values: Vec<Vec<f64>>) -> Self {
        let cond_means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
        let cond_vars: Vec<f64> = values.iter().map(|v| variance(v)).collect();
        // replicas of one replicate share W, so only the replicate means are
        // independent; the CI comes from them (same mean, balanced design)
        let m = MeanCi::from_samples(&cond_means);
        LadderLevel {
            n,
            scale,
            a_hat: variance(&cond_means),
            b_hat: mean(&cond_vars),
            c_hat: m.mean * m.mean,
            mean: m,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingLadder {
    pub params: ModelParams,
    #[serde(serialize_with = "io::ser_f64")]
    pub r: f64,
    pub replicas_per_w: usize,
    pub convention: ScaleConvention,
    pub w_truncation_k: usize,
    pub levels: Vec<LadderLevel>,
    /// Levels above the last one were dropped by the budget.
    pub truncated: bool,
    pub seed: String,
}

impl ScalingLadder {
    /// Ratios `2^{n+1} m_{n+1} / (2^n m_n)` as `(n, ratio)`.
    pub fn raw_ratios(&self) -> Vec<(usize, f64)> {
        self.levels
            .windows(2)
            .map(|w| (w[0].n, w[1].raw_mean() / w[0].raw_mean()))
            .collect()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "n", "scale", "count", "mean", "ci_half_width", "raw_mean", "a_hat", "b_hat", "c_hat",
        ])
        .with_comment(io::provenance_comment(&self.params, &self.seed));
        for l in &self.levels {
            t.push(vec![
                l.n.to_string(),
                io::fmt_f64(l.scale),
                l.mean.n.to_string(),
                io::fmt_f64(l.mean.mean),
                io::fmt_f64(l.mean.half_width),
                io::fmt_f64(l.raw_mean()),
                io::fmt_f64(l.a_hat),
                io::fmt_f64(l.b_hat),
                io::fmt_f64(l.c_hat),
            ]);
        }
        t
    }

    /// Every replica value, one row each.
    pub fn values_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["n", "replicate", "replica", "value"])
            .with_comment(io::provenance_comment(&self.params, &self.seed));
        for l in &self.levels {
            for (i, row) in l.values.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    t.push(vec![l.n.to_string(), i.to_string(), j.to_string(), io::fmt_f64(*v)]);
                }
            }
        }
        t
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: &'static str,
            version: &'static str,
            params_hash: String,
            #[serde(flatten)]
            ladder: &'a ScalingLadder,
        }
        Ok(serde_json::to_string(&Summary {
            kind: "ladder",
            version: io::ARTIFACT_VERSION,
            params_hash: io::params_hash(&self.params),
            ladder: self,
        })?)
    }
}

/// Ladder with an arbitrary distance sampler `dist(target, seed)`.
///
/// Level `n` replicate `i` uses `seed.child(n).child(i)`: child 0 drives `W`,
/// child `1 + j` is replica `j`. A budget refusal at some level ends the
/// ladder there with `truncated` set.
pub fn run_ladder_with<F>(params: &ModelParams, cfg: &LadderConfig, seed: &SeedSpec, dist: F) -> Result<ScalingLadder>
where
    F: Fn(&[f64], &SeedSpec) -> Result<f64> + Sync,
{
    params.validate()?;
    cfg.validate()?;
    let tr = w_truncation(params, LADDER_W_TOL)?;
    let a = z_rate(params)?;
    let g = params.gamma();
    let mut levels = Vec::new();
    let mut truncated = false;
    for n in 0..=cfg.n_max {
        let scale = cfg.scale(g, n);
        let factor = 0.5f64.powi(n as i32);
        let lseed = seed.child(n as u64);
        let rows: Result<Vec<Vec<f64>>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|i| {
                let rs = lseed.child(i as u64);
                let mut w = vec![0.0; params.d];
                draw_w(&mut rs.child(0).stream(), params, a, tr.k, g, &mut w);
                let target: Vec<f64> = w.iter().map(|c| c * scale).collect();
                (0..cfg.replicas_per_w)
                    .map(|j| dist(&target, &rs.child(1 + j as u64)).map(|v| v * factor))
                    .collect()
            })
            .collect();
        match rows {
            Ok(rows) => levels.push(LadderLevel::from_values(n, scale, rows)),
            Err(Error::Budget { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ScalingLadder {
        params: *params,
        r: cfg.r,
        replicas_per_w: cfg.replicas_per_w,
        convention: cfg.convention,
        w_truncation_k: tr.k,
        levels,
        truncated,
        seed: seed.label(),
    })
}

/// Ladder of restricted distances on fresh continuum samples.
pub fn run_ladder(params: &ModelParams, cfg: &LadderConfig, seed: &SeedSpec, budget: &Budget) -> Result<ScalingLadder> {
    let origin = vec![0.0; params.d];
    run_ladder_with(params, cfg, seed, |t, s| {
        Ok(sample_restricted_distance(params, &origin, t, s, budget)?.value)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LEstimate {
    pub value: MeanCi,
    /// Additive constant in `m_{n+1} <= m_n + C 2^{-n}`.
    #[serde(serialize_with = "io::ser_f64")]
    pub c_hat: f64,
    /// `c_hat` was fitted rather than supplied.
    pub c_fitted: bool,
    /// Levels `n` where `m_{n+1}` exceeds `m_n + C 2^{-n}` beyond both CIs.
    pub violations: Vec<usize>,
}

impl LEstimate {
    pub fn near_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `L(r)` as the top-level mean, with the near-monotonicity diagnostic.
///
/// Without a supplied constant, `C` is fitted on the first half of the level
/// transitions (the smallest `C` they need) and checked on all of them.
pub fn estimate_l(ladder: &ScalingLadder, c: Option<f64>) -> Result<LEstimate> {
    let lv = &ladder.levels;
    if lv.len() < 3 {
        return Err(Error::InsufficientSamples { need: 3, got: lv.len() });
    }
    let steps: Vec<(usize, f64)> = lv
        .windows(2)
        .map(|w| (w[0].n, (w[1].mean.mean - w[0].mean.mean) * 2f64.powi(w[0].n as i32)))
        .collect();
    let (c_hat, c_fitted) = match c {
        Some(c) => (c, false),
        None => {
            let half = steps.len().div_ceil(2);
            (steps[..half].iter().map(|s| s.1).fold(0.0, f64::max), true)
        }
    };
    let violations = lv
        .windows(2)
        .filter(|w| w[1].mean.lo() > w[0].mean.hi() + c_hat * 0.5f64.powi(w[0].n as i32))
        .map(|w| w[0].n)
        .collect();
    Ok(LEstimate {
        value: lv.last().unwrap().mean,
        c_hat,
        c_fitted,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiPoint {
    #[serde(serialize_with = "io::ser_f64")]
    pub r: f64,
    pub l_hat: MeanCi,
    /// `L(r) / (log r)^Delta` from the ladder at `r`.
    pub phi: MeanCi,
    /// The same from an independent ladder at `r^gamma` run one level longer.
    pub phi_shifted: MeanCi,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiProfile {
    pub params: ModelParams,
    pub points: Vec<PhiPoint>,
    /// Second differences of `t -> L(e^t)` with their CI slack.
    pub second_differences: Vec<(f64, f64)>,
    pub seed: String,
}

impl PhiProfile {
    pub fn convex_within_ci(&self) -> bool {
        self.second_differences.iter().all(|(d2, slack)| *d2 >= -slack)
    }

    pub fn all_agree(&self) -> bool {
        self.points.iter().all(|p| p.agrees)
    }

    pub fn positive(&self) -> bool {
        self.points.iter().all(|p| p.phi.lo() > 0.0)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["r", "l_hat", "l_ci", "phi", "phi_ci", "phi_shifted", "phi_shifted_ci", "agrees"])
            .with_comment(io::provenance_comment(&self.params, &self.seed));
        for p in &self.points {
            t.push(vec![
                io::fmt_f64(p.r),
                io::fmt_f64(p.l_hat.mean),
                io::fmt_f64(p.l_hat.half_width),
                io::fmt_f64(p.phi.mean),
                io::fmt_f64(p.phi.half_width),
                io::fmt_f64(p.phi_shifted.mean),
                io::fmt_f64(p.phi_shifted.half_width),
                p.agrees.to_string(),
            ]);
        }
        t
    }
}

fn scale_ci(m: &MeanCi, f: f64) -> MeanCi {
    MeanCi {
        mean: m.mean * f,
        half_width: m.half_width * f.abs(),
        n: m.n,
    }
}

/// Evenly spaced grid of `log r` over one log-period `[e^gamma, e]`.
pub fn phi_grid(gamma: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| {
            let t = gamma + (1.0 - gamma) * i as f64 / (points - 1) as f64;
            t.exp()
        })
        .collect()
}

/// `phi(r)` over a grid; ladder at `r` (seed child `2i`) and at `r^gamma`
/// with one extra level (seed child `2i + 1`).
pub fn phi_profile_with<F>(params: &ModelParams, grid: &[f64], base: &LadderConfig, seed: &SeedSpec, dist: F) -> Result<PhiProfile>
where
    F: Fn(&[f64], &SeedSpec) -> Result<f64> + Sync,
{
    if grid.len() < 8 {
        return Err(Error::InsufficientSamples { need: 8, got: grid.len() });
    }
    let c = params.derive()?;
    let g = c.gamma;
    let mut points = Vec::with_capacity(grid.len());
    let mut ls = Vec::with_capacity(grid.len());
    for (i, &r) in grid.iter().enumerate() {
        let cfg = LadderConfig { r, ..base.clone() };
        let own = run_ladder_with(params, &cfg, &seed.child(2 * i as u64), &dist)?;
        let sh_cfg = LadderConfig {
            r: r.powf(g),
            n_max: base.n_max + 1,
            ..base.clone()
        };
        let shifted = run_ladder_with(params, &sh_cfg, &seed.child(2 * i as u64 + 1), &dist)?;
        if own.truncated || shifted.truncated {
            return Err(Error::Budget {
                estimate: f64::NAN,
                budget: f64::NAN,
            });
        }
        let l = own.levels.last().unwrap().mean;
        let ls_ = shifted.levels.last().unwrap().mean;
        let denom = r.ln().powf(c.delta);
        let phi = scale_ci(&l, 1.0 / denom);
        let phi_shifted = scale_ci(&ls_, 1.0 / (r.powf(g).ln().powf(c.delta)));
        points.push(PhiPoint {
            r,
            l_hat: l,
            agrees: phi.agrees_with(&phi_shifted),
            phi,
            phi_shifted,
        });
        ls.push((r.ln(), l));
    }
    let second_differences = ls
        .windows(3)
        .map(|w| {
            let (t0, a) = w[0];
            let (t1, b) = w[1];
            let (t2, cc) = w[2];
            let h0 = t1 - t0;
            let h1 = t2 - t1;
            // divided second difference on a possibly uneven grid
            let d2 = 2.0 * (a.mean / (h0 * (h0 + h1)) - b.mean / (h0 * h1) + cc.mean / (h1 * (h0 + h1)));
            let slack = 2.0
                * ((a.half_width / (h0 * (h0 + h1))).powi(2)
                    + (b.half_width / (h0 * h1)).powi(2)
                    + (cc.half_width / (h1 * (h0 + h1))).powi(2))
                .sqrt();
            (d2, slack)
        })
        .collect();
    Ok(PhiProfile {
        params: *params,
        points,
        second_differences,
        seed: seed.label(),
    })
}

pub fn phi_profile(params: &ModelParams, grid: &[f64], base: &LadderConfig, seed: &SeedSpec, budget: &Budget) -> Result<PhiProfile> {
    let origin = vec![0.0; params.d];
    phi_profile_with(params, grid, base, seed, |t, s| {
        Ok(sample_restricted_distance(params, &origin, t, s, budget)?.value)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistanceKind {
    /// Graph distance on a box of `Z^d` of side `4|x|`.
    Lattice,
    /// Restricted distance on the continuum model.
    Continuum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaFit {
    pub kind: DistanceKind,
    pub params: ModelParams,
    #[serde(serialize_with = "io::ser_vec_f64")]
    pub scales: Vec<f64>,
    /// Mean of `log D` per scale.
    pub mean_log: Vec<MeanCi>,
    pub fit: LinearFit,
    #[serde(serialize_with = "io::ser_f64")]
    pub target: f64,
    pub seed: String,
}

impl DeltaFit {
    pub fn delta_hat(&self) -> f64 {
        self.fit.slope
    }

    pub fn in_band(&self) -> bool {
        let d = self.delta_hat();
        d >= DELTA_BAND.0 * self.target && d <= DELTA_BAND.1 * self.target
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["scale", "log_log_scale", "mean_log_distance", "ci_half_width"])
            .with_comment(io::provenance_comment(&self.params, &self.seed));
        for (x, m) in self.scales.iter().zip(&self.mean_log) {
            t.push(vec![
                io::fmt_f64(*x),
                io::fmt_f64(x.ln().ln()),
                io::fmt_f64(m.mean),
                io::fmt_f64(m.half_width),
            ]);
        }
        t
    }
}

/// Lattice graph distance from the origin to `(|x|, 0, ..)` on a fresh box.
pub fn lattice_distance(params: &ModelParams, x_len: u64, seed: &SeedSpec, budget: &Budget) -> Result<u32> {
    let side = (LATTICE_BOX_FACTOR * x_len) as usize;
    let g = sample_lattice_graph(params, side, seed, budget)?;
    let f = bfs_distance(&g, &vec![0; params.d])?;
    let mut x = vec![0i64; params.d];
    x[0] = x_len as i64;
    let v = f.get(&x).expect("target inside box");
    debug_assert_ne!(v, UNREACHED);
    Ok(v)
}

fn continuum_distance(params: &ModelParams, x_len: f64, seed: &SeedSpec, budget: &Budget) -> Result<f64> {
    let origin = vec![0.0; params.d];
    let mut x = origin.clone();
    x[0] = x_len;
    Ok(sample_restricted_distance(params, &origin, &x, seed, budget)?.value)
}

/// Regression of the mean of `log D(0, x)` on `log log |x|` from per-scale
/// means. Exposed for synthetic checks.
pub fn delta_from_means(scales: &[f64], mean_log: &[f64]) -> Result<LinearFit> {
    let xs: Vec<f64> = scales.iter().map(|x| x.ln().ln()).collect();
    ols(&xs, mean_log)
}

/// Scale `i` replicate `j` uses `seed.child(i).child(j)`.
pub fn delta_regression(
    params: &ModelParams,
    kind: DistanceKind,
    scales: &[f64],
    replicates: usize,
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<DeltaFit> {
    params.validate()?;
    if scales.len() < 4 {
        return Err(Error::InsufficientSamples { need: 4, got: scales.len() });
    }
    let ll: Vec<f64> = scales.iter().map(|x| x.ln()).collect();
    let (lo, hi) = ll.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo > 0.0 && hi >= 2.0 * lo * (1.0 - 1e-12)) {
        return Err(Error::Domain("scales must span a doubling of log|x|".into()));
    }
    let mut mean_log = Vec::with_capacity(scales.len());
    for (i, &x) in scales.iter().enumerate() {
        let s = seed.child(i as u64);
        let logs: Result<Vec<f64>> = (0..replicates)
            .into_par_iter()
            .map(|j| {
                let rs = s.child(j as u64);
                let v = match kind {
                    DistanceKind::Lattice => lattice_distance(params, x.round() as u64, &rs, budget)? as f64,
                    DistanceKind::Continuum => continuum_distance(params, x, &rs, budget)?,
                };
                Ok(v.ln())
            })
            .collect();
        mean_log.push(MeanCi::from_samples(&logs?));
    }
    let fit = delta_from_means(scales, &mean_log.iter().map(|m| m.mean).collect::<Vec<_>>())?;
    Ok(DeltaFit {
        kind,
        params: *params,
        scales: scales.to_vec(),
        mean_log,
        fit,
        target: params.delta(),
        seed: seed.label(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub x: u64,
    pub n: u64,
    #[serde(serialize_with = "io::ser_f64")]
    pub p_hat: f64,
    /// No replicate met the bound: excluded from the fit.
    pub censored: bool,
    /// `n >= |x|`, where the bound holds trivially: excluded from the fit.
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub params: ModelParams,
    pub points: Vec<TailPoint>,
    /// Slope of `log P` against `log |x|` over usable points.
    pub slope: Option<LinearFit>,
    /// Envelope constants of `P <= c1 exp(c2 n^{1/Delta}) |x|^{-s}`.
    #[serde(serialize_with = "io::ser_opt_f64")]
    pub c1_hat: Option<f64>,
    #[serde(serialize_with = "io::ser_opt_f64")]
    pub c2_hat: Option<f64>,
    /// `(c, P(D <= c (log|x|)^Delta))` at the largest scale.
    pub c_sweep: Vec<(f64, f64)>,
    pub seed: String,
}

impl TailFit {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["x", "n", "p_hat", "censored", "trivial"])
            .with_comment(io::provenance_comment(&self.params, &self.seed));
        for p in &self.points {
            t.push(vec![
                p.x.to_string(),
                p.n.to_string(),
                io::fmt_f64(p.p_hat),
                p.censored.to_string(),
                p.trivial.to_string(),
            ]);
        }
        t
    }

    pub fn sweep_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["c", "p_hat"]).with_comment(io::provenance_comment(&self.params, &self.seed));
        for (c, p) in &self.c_sweep {
            t.push(vec![io::fmt_f64(*c), io::fmt_f64(*p)]);
        }
        t
    }
}

/// Lattice distances, replicate `j` at scale `i` from `seed.child(i).child(j)`.
pub fn lattice_distance_samples(
    params: &ModelParams,
    x_list: &[u64],
    replicates: usize,
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<Vec<Vec<u32>>> {
    x_list
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let s = seed.child(i as u64);
            (0..replicates)
                .into_par_iter()
                .map(|j| lattice_distance(params, x, &s.child(j as u64), budget))
                .collect()
        })
        .collect()
}

/// Tail frequencies from precomputed distance samples.
pub fn tail_fit_from_samples<N>(params: &ModelParams, x_list: &[u64], samples: &[Vec<u32>], n_of: N, c_grid: &[f64], seed_label: &str) -> Result<TailFit>
where
    N: Fn(u64) -> u64,
{
    let delta = params.delta();
    let mut points = Vec::with_capacity(x_list.len());
    for (&x, ds) in x_list.iter().zip(samples) {
        let n = n_of(x);
        let hits = ds.iter().filter(|&&d| d as u64 <= n).count();
        let p = hits as f64 / ds.len() as f64;
        points.push(TailPoint {
            x,
            n,
            p_hat: p,
            censored: hits == 0,
            trivial: n >= x,
        });
    }
    let usable: Vec<&TailPoint> = points.iter().filter(|p| !p.censored && !p.trivial).collect();
    let slope = if usable.len() >= 2 {
        let lx: Vec<f64> = usable.iter().map(|p| (p.x as f64).ln()).collect();
        let lp: Vec<f64> = usable.iter().map(|p| p.p_hat.ln()).collect();
        Some(ols(&lx, &lp)?)
    } else {
        None
    };
    // log P + s log|x| = log c1 + c2 n^{1/Delta}: c2 by least squares, then
    // c1 as the smallest envelope over the usable points.
    let (c1_hat, c2_hat) = if usable.len() >= 2 {
        let u: Vec<f64> = usable.iter().map(|p| (p.n as f64).powf(1.0 / delta)).collect();
        let y: Vec<f64> = usable.iter().map(|p| p.p_hat.ln() + params.s * (p.x as f64).ln()).collect();
        match ols(&u, &y) {
            Ok(f) => {
                let c2 = f.slope.max(0.0);
                let lc1 = u.iter().zip(&y).map(|(a, b)| b - c2 * a).fold(f64::NEG_INFINITY, f64::max);
                (Some(lc1.exp()), Some(c2))
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    let c_sweep = match (x_list.iter().zip(samples).max_by_key(|(x, _)| **x), c_grid.is_empty()) {
        (Some((&x, ds)), false) => {
            let base = (x as f64).ln().powf(delta);
            c_grid
                .iter()
                .map(|&c| {
                    let hits = ds.iter().filter(|&&d| (d as f64) <= c * base).count();
                    (c, hits as f64 / ds.len() as f64)
                })
                .collect()
        }
        _ => Vec::new(),
    };
    Ok(TailFit {
        params: *params,
        points,
        slope,
        c1_hat,
        c2_hat,
        c_sweep,
        seed: seed_label.to_string(),
    })
}

/// Tail frequencies of the lattice distance with bound `n_of(|x|)`.
#[allow(clippy::too_many_arguments)]
pub fn tail_check<N>(
    params: &ModelParams,
    n_of: N,
    x_list: &[u64],
    replicates: usize,
    c_grid: &[f64],
    seed: &SeedSpec,
    budget: &Budget,
) -> Result<TailFit>
where
    N: Fn(u64) -> u64,
{
    params.validate()?;
    let samples = lattice_distance_samples(params, x_list, replicates, seed, budget)?;
    tail_fit_from_samples(params, x_list, &samples, n_of, c_grid, &seed.label())
}

/// Default bound `(log|x|)^Delta / 4`, rounded down.
pub fn default_tail_n(params: &ModelParams) -> impl Fn(u64) -> u64 {
    let delta = params.delta();
    move |x| ((x as f64).ln().powf(delta) / 4.0).floor() as u64
}

/// Halving sweep `1, 1/2, ..., 2^{-(k-1)}`.
pub fn c_sweep_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| 0.5f64.powi(i as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationResult {
    #[serde(serialize_with = "io::ser_f64")]
    pub statistic: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub critical: f64,
    pub pass: bool,
}

/// One-sided two-sample test of `lhs <=_law rhs`, i.e. `F_lhs >= F_rhs`
/// up to the 1% band.
pub fn domination_test(lhs: &[f64], rhs: &[f64]) -> Result<DominationResult> {
    for s in [lhs, rhs] {
        if s.len() < DOMINATION_MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                need: DOMINATION_MIN_SAMPLES,
                got: s.len(),
            });
        }
    }
    let statistic = ks_one_sided(lhs, rhs);
    let critical = ks_critical_one_sided(lhs.len(), rhs.len(), 0.01);
    Ok(DominationResult {
        statistic,
        critical,
        pass: statistic <= critical,
    })
}

/// Spearman trend of `b_hat` over levels `n >= from`: `(rho, one-sided p)`.
pub fn b_hat_trend(ladder: &ScalingLadder, from: usize) -> (f64, f64) {
    let (n, b): (Vec<f64>, Vec<f64>) = ladder
        .levels
        .iter()
        .filter(|l| l.n >= from)
        .map(|l| (l.n as f64, l.b_hat))
        .unzip();
    (spearman(&n, &b), spearman_p_negative(&n, &b))
}

/// Norm of the ladder target for a replicate, for diagnostics.
pub fn ladder_w_norm(params: &ModelParams, seed: &SeedSpec, level: usize, replicate: usize) -> Result<f64> {
    let tr = w_truncation(params, LADDER_W_TOL)?;
    let a = z_rate(params)?;
    let mut w = vec![0.0; params.d];
    let rs = seed.child(level as u64).child(replicate as u64);
    draw_w(&mut rs.child(0).stream(), params, a, tr.k, params.gamma(), &mut w);
    Ok(norm_len(&w, params.norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::CsvTable;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn p15() -> ModelParams {
        ModelParams::new(1, 1.5, 1.0).unwrap()
    }

    fn synthetic(means: &[f64]) -> ScalingLadder {
        let levels = means
            .iter()
            .enumerate()
            .map(|(n, &m)| LadderLevel::from_values(n, 1.0, vec![vec![m; 4]; 4]))
            .collect();
        ScalingLadder {
            params: p15(),
            r: E,
            replicas_per_w: 4,
            convention: ScaleConvention::Inverse,
            w_truncation_k: 0,
            levels,
            truncated: false,
            seed: "seed:0".into(),
        }
    }

    #[test]
    fn empty_sample_gives_scaled_w() {
        let params = p15();
        let cfg = LadderConfig::new(E, 0, 4, 2);
        let seed = SeedSpec::new(3);
        let lad = run_ladder_with(&params, &cfg, &seed, |t, _| Ok(t[0].abs())).unwrap();
        for (i, row) in lad.levels[0].values.iter().enumerate() {
            let w = ladder_w_norm(&params, &seed, 0, i).unwrap();
            for v in row {
                assert_relative_eq!(*v, E * w, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn scales_grow_doubly_exponentially() {
        let cfg = LadderConfig::new(E, 8, 2, 2);
        for n in 0..=8 {
            assert_relative_eq!(cfg.scale(0.75, n).ln(), 0.75f64.powi(-(n as i32)), max_relative = 1e-12);
        }
    }

    #[test]
    fn exponent_convention() {
        let params = p15();
        let mut cfg = LadderConfig::new(E, 6, 40, 2);
        let seed = SeedSpec::new(4);
        let b = Budget::default();
        let good = run_ladder(&params, &cfg, &seed, &b).unwrap();
        let raw: Vec<f64> = good.levels.iter().map(|l| l.raw_mean()).collect();
        assert!(raw.windows(2).all(|w| w[1] > w[0]), "{raw:?}");
        cfg.convention = ScaleConvention::Direct;
        let bad = run_ladder(&params, &cfg, &seed, &b).unwrap();
        let top = bad.levels.last().unwrap();
        // scales shrink to 1, so values collapse to |W|
        assert!(top.scale < 1.25);
        assert!(top.raw_mean() < raw[0]);
    }

    #[test]
    fn synthetic_l_estimate() {
        let means: Vec<f64> = (0..6).map(|n| 5.0 + 0.5f64.powi(n)).collect();
        let lad = synthetic(&means);
        let est = estimate_l(&lad, Some(2.0)).unwrap();
        assert_relative_eq!(est.value.mean, 5.0 + 0.5f64.powi(5), max_relative = 1e-15);
        assert!(est.near_monotone());
        let fitted = estimate_l(&lad, None).unwrap();
        assert!(fitted.near_monotone() && fitted.c_fitted);
        // a jump late in the ladder is flagged
        let mut bad = means.clone();
        bad[5] = 9.0;
        assert!(!estimate_l(&synthetic(&bad), Some(2.0)).unwrap().near_monotone());
        assert!(estimate_l(&synthetic(&means[..2]), None).is_err());
    }

    #[test]
    fn level_ci_counts_replicates_not_replicas() {
        // replicas sharing W are perfectly correlated here
        let values: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 4]).collect();
        let lv = LadderLevel::from_values(0, 1.0, values);
        let per_w: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(lv.mean, MeanCi::from_samples(&per_w));
        assert_eq!(lv.mean.n, 10);
        assert_eq!(lv.b_hat, 0.0);
    }

    #[test]
    fn l_vanishes_at_r_one() {
        let params = p15();
        // every value is 2^{-n} |W| up to O(1e-6 (4/3)^n): the top level is ~0
        let cfg = LadderConfig::new(1.0 + 1e-6, 14, 50, 4);
        let lad = run_ladder(&params, &cfg, &SeedSpec::new(5), &Budget::default()).unwrap();
        let est = estimate_l(&lad, None).unwrap();
        assert!(est.value.mean < 1e-5, "{:?}", est.value);
        assert!(est.value.lo() < 1e-5);
    }

    #[test]
    fn phi_identity_for_exact_inputs() {
        // gamma^Delta = 1/2 makes 2^{-n} (log r^{gamma^{-n}})^Delta level-free
        let c = p15().derive().unwrap();
        let r: f64 = 2.0;
        for n in 0..10 {
            let v = 0.5f64.powi(n) * (r.ln() * c.gamma.powi(-n)).powf(c.delta);
            assert_relative_eq!(v, r.ln().powf(c.delta), max_relative = 1e-12);
        }
        let g = phi_grid(c.gamma, 8);
        assert_relative_eq!(g[0], c.gamma.exp(), max_relative = 1e-15);
        assert_relative_eq!(g[7], E, max_relative = 1e-15);
    }

    #[test]
    fn phi_profile_on_exact_sampler() {
        // distance (log|t|)^Delta for |t| > e, |t| below: phi is constant
        let params = p15();
        let c = params.derive().unwrap();
        let dist = move |t: &[f64], _: &SeedSpec| {
            let a = t[0].abs();
            Ok(if a > E { a.ln().powf(c.delta) } else { a })
        };
        let grid = phi_grid(c.gamma, 8);
        let base = LadderConfig::new(E, 10, 20, 2);
        let prof = phi_profile_with(&params, &grid, &base, &SeedSpec::new(6), dist).unwrap();
        assert!(prof.positive());
        assert!(prof.all_agree());
        assert!(phi_profile_with(&params, &grid[..7], &base, &SeedSpec::new(6), |_, _| Ok(1.0)).is_err());
    }

    #[test]
    fn regression_identity() {
        let scales: Vec<f64> = (8..=16).map(|k| 2f64.powi(k)).collect();
        let delta = p15().delta();
        let ys: Vec<f64> = scales.iter().map(|x| delta * x.ln().ln()).collect();
        let f = delta_from_means(&scales, &ys).unwrap();
        assert!((f.slope - delta).abs() < 1e-6);
    }

    #[test]
    fn delta_regression_preconditions() {
        let params = p15();
        let b = Budget::default();
        assert!(delta_regression(&params, DistanceKind::Lattice, &[256.0, 512.0, 1024.0], 2, &SeedSpec::new(1), &b).is_err());
        assert!(delta_regression(&params, DistanceKind::Lattice, &[256.0, 300.0, 400.0, 4096.0], 2, &SeedSpec::new(1), &b).is_err());
    }

    #[test]
    fn trivial_tail_bound_is_excluded() {
        let params = p15();
        let xs = [256u64, 512];
        let t = tail_check(&params, |x| x, &xs, 10, &[], &SeedSpec::new(7), &Budget::default()).unwrap();
        for p in &t.points {
            assert_eq!(p.p_hat, 1.0);
            assert!(p.trivial);
        }
        assert!(t.slope.is_none());
    }

    #[test]
    fn censored_points_are_flagged() {
        let params = p15();
        let xs = [256u64, 512, 1024];
        let samples = vec![vec![5, 50, 60], vec![70, 80, 90], vec![7, 9, 200]];
        let t = tail_fit_from_samples(&params, &xs, &samples, |_| 10, &[1.0, 0.01], "s").unwrap();
        assert!(!t.points[0].censored && t.points[1].censored && !t.points[2].censored);
        let f = t.slope.unwrap();
        assert_eq!(f.n, 2);
        assert_relative_eq!(f.slope, (2.0f64 / 3.0 / (1.0 / 3.0)).ln() / 4f64.ln(), max_relative = 1e-12);
        assert_eq!(t.c_sweep.len(), 2);
        assert!(t.c_sweep[1].1 <= t.c_sweep[0].1);
    }

    #[test]
    fn domination_examples() {
        let mut rng = SeedSpec::new(8).stream();
        let a: Vec<f64> = (0..500).map(|_| rng.exponential()).collect();
        let r = domination_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
        let up: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!(domination_test(&a, &up).unwrap().pass);
        let down: Vec<f64> = a.iter().map(|x| x - 1.0).collect();
        assert!(!domination_test(&a, &down).unwrap().pass);
        assert!(domination_test(&a[..100], &a).is_err());
    }

    #[test]
    fn ladder_is_thread_independent() {
        let params = p15();
        let cfg = LadderConfig::new(E, 4, 16, 4);
        let seed = SeedSpec::new(9);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_ladder(&params, &cfg, &seed, &Budget::default()).unwrap().values_csv().to_string())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn ladder_csv_round_trip() {
        let lad = synthetic(&[1.0, 2.0, 3.0]);
        let t = CsvTable::parse(&lad.to_csv().to_string()).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(io::parse_params_hash(t.comment.as_deref().unwrap()), Some(io::params_hash(&p15()).as_str()));
        let j: serde_json::Value = serde_json::from_str(&lad.summary_json().unwrap()).unwrap();
        assert_eq!(j["kind"], "ladder");
        assert_eq!(j["levels"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn budget_truncates_ladder() {
        let params = p15();
        let cfg = LadderConfig::new(E, 30, 2, 2);
        let lad = run_ladder(&params, &cfg, &SeedSpec::new(10), &Budget::new(1e4)).unwrap();
        assert!(lad.truncated);
        assert!(lad.levels.len() < 31);
    }
}
