//! Random targets of the subadditivity recursion.
//!
//! `Z` has density proportional to `exp(-a |z|^{2d})` with `a = eta beta c0`.
//! Writing `z = r theta` (cone-measure polar coordinates), the radial density
//! is `∝ r^{d-1} exp(-a r^{2d})`; the substitution `t = r^{2d}` makes `T =
//! |Z|^{2d}` a Gamma(1/2, rate a) variable, i.e. `T = N^2 / (2a)` for a
//! standard normal `N`. The rejection sampler below is the oracle for this.
//!
//! `W = Z_0 prod_{k>=1} |Z_k|^{gamma^k}` is truncated at `K` factors, where
//! `K` is chosen from exact tail quantiles of `|log |Z||`.

use serde::Serialize;
use statrs::function::erf::{erf, erfc};

use crate::continuum::sample_cone_direction;
use crate::error::{Error, Result};
use crate::io::{self, F17};
use crate::model::{norm_len, ModelParams};
use crate::rng::{RandomStream, SeedSpec};
use crate::stats::{ks_two_sample, mean};

/// Total failure probability allowed for the truncation of `W`.
pub const W_TAIL_CONFIDENCE: f64 = 1e-6;

/// A draw of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSample {
    pub z: Vec<f64>,
    pub params: ModelParams,
    pub seed: SeedSpec,
}

/// A draw of the truncated fixed-point variable.
#[derive(Debug, Clone, PartialEq)]
pub struct WSample {
    pub w: Vec<f64>,
    /// Number of factors after `Z_0`.
    pub k: usize,
    /// Multiplicative tail lies within `exp(±tail_bound)` w.p. `>= 1 - 1e-6`.
    pub tail_bound: f64,
}

/// `a = eta beta c0`.
pub fn z_rate(params: &ModelParams) -> Result<f64> {
    let c = params.derive()?;
    Ok(params.eta * params.beta * c.c0)
}

/// Draws `Z` into `out` using a precomputed rate `a`.
pub fn draw_z(rng: &mut RandomStream, params: &ModelParams, a: f64, out: &mut [f64]) {
    let n = rng.normal();
    let t = n * n / (2.0 * a);
    let r = t.powf(1.0 / (2.0 * params.d as f64));
    sample_cone_direction(rng, params.norm, out);
    out.iter_mut().for_each(|c| *c *= r);
}

pub fn sample_z(params: &ModelParams, seed: &SeedSpec) -> Result<ZSample> {
    let a = z_rate(params)?;
    let mut z = vec![0.0; params.d];
    draw_z(&mut seed.stream(), params, a, &mut z);
    Ok(ZSample {
        z,
        params: *params,
        seed: seed.clone(),
    })
}

/// Oracle: uniform proposals on `[-R, R]^d` with `a R^{2d} >= 40`, accepted
/// with probability `exp(-a |z|^{2d})`. Mass outside the box is `< e^{-40}`
/// relative, since every supported norm dominates the sup norm.
pub fn sample_z_rejection(params: &ModelParams, seed: &SeedSpec) -> Result<ZSample> {
    let a = z_rate(params)?;
    let two_d = 2.0 * params.d as f64;
    let r = (40.0 / a).powf(1.0 / two_d);
    let mut rng = seed.stream();
    let mut z = vec![0.0; params.d];
    loop {
        for c in z.iter_mut() {
            *c = r * (2.0 * rng.uniform() - 1.0);
        }
        if rng.uniform() < (-a * norm_len(&z, params.norm).powf(two_d)).exp() {
            return Ok(ZSample {
                z,
                params: *params,
                seed: seed.clone(),
            });
        }
    }
}

/// `P(|log|Z|| > q)`, exact: `T = |Z|^{2d}` has `P(T > t) = erfc(sqrt(a t))`.
pub fn log_abs_z_tail(a: f64, d: usize, q: f64) -> f64 {
    let two_d = 2.0 * d as f64;
    erfc((a * (two_d * q).exp()).sqrt()) + erf((a * (-two_d * q).exp()).sqrt())
}

/// Smallest `q` (to 1e-12) with `P(|log|Z|| > q) <= p`.
fn log_abs_z_quantile(a: f64, d: usize, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while log_abs_z_tail(a, d, hi) > p {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if log_abs_z_tail(a, d, mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Truncation rule for `W`, recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WTruncation {
    pub k: usize,
    #[serde(serialize_with = "io::ser_f64")]
    pub tol: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub gamma: f64,
    /// `q_j` with `P(|log|Z|| > q_j) <= 1e-6 * 2^{-j}`, `j = 1, 2, ...`
    #[serde(serialize_with = "io::ser_vec_f64")]
    pub quantiles: Vec<f64>,
    /// `sum_j gamma^{K+j} q_j`, the bound on `|log tail|`.
    #[serde(serialize_with = "io::ser_f64")]
    pub bound: f64,
}

/// Chooses `K`: on the event `|log|Z_{K+j}|| <= q_j` for all `j` (probability
/// `>= 1 - 1e-6` by the union bound), `|sum_{k>K} gamma^k log|Z_k|| <= tol`.
pub fn w_truncation(params: &ModelParams, tol: f64) -> Result<WTruncation> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be > 0")));
    }
    let a = z_rate(params)?;
    let gamma = params.gamma();
    let mut quantiles = Vec::new();
    let mut s0 = 0.0;
    for j in 1..=400 {
        let p = W_TAIL_CONFIDENCE * 0.5f64.powi(j);
        let q = log_abs_z_quantile(a, params.d, p);
        let term = gamma.powi(j) * q;
        quantiles.push(q);
        s0 += term;
        if term < 1e-17 * s0 {
            break;
        }
    }
    let k = ((tol / s0).ln() / gamma.ln()).ceil().max(0.0) as usize;
    Ok(WTruncation {
        k,
        tol,
        gamma,
        quantiles,
        bound: s0 * gamma.powi(k as i32),
    })
}

/// Draws `W` with exponent `gamma` (the negative control passes another).
pub fn draw_w(rng: &mut RandomStream, params: &ModelParams, a: f64, k: usize, exponent: f64, out: &mut [f64]) {
    draw_z(rng, params, a, out);
    let mut log_factor = 0.0;
    let mut g = 1.0;
    let mut z = vec![0.0; params.d];
    for _ in 0..k {
        g *= exponent;
        draw_z(rng, params, a, &mut z);
        log_factor += g * norm_len(&z, params.norm).ln();
    }
    let f = log_factor.exp();
    out.iter_mut().for_each(|c| *c *= f);
}

pub fn sample_w(params: &ModelParams, tol: f64, seed: &SeedSpec) -> Result<WSample> {
    let tr = w_truncation(params, tol)?;
    let a = z_rate(params)?;
    let mut w = vec![0.0; params.d];
    draw_w(&mut seed.stream(), params, a, tr.k, params.gamma(), &mut w);
    Ok(WSample {
        w,
        k: tr.k,
        tail_bound: tr.bound,
    })
}

/// Samples `|W|` and `|W'|^e |Z|` with independent `W, W', Z`.
pub fn fixed_point_samples(params: &ModelParams, n: usize, tol: f64, exponent: f64, seed: &SeedSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let tr = w_truncation(params, tol)?;
    let a = z_rate(params)?;
    let g = params.gamma();
    let d = params.d;
    let norm = params.norm;
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    let mut w = vec![0.0; d];
    let mut z = vec![0.0; d];
    for i in 0..n as u64 {
        let mut rng = seed.child(0).child(i).stream();
        draw_w(&mut rng, params, a, tr.k, g, &mut w);
        lhs.push(norm_len(&w, norm));
        let mut rng = seed.child(1).child(i).stream();
        draw_w(&mut rng, params, a, tr.k, exponent, &mut w);
        draw_z(&mut rng, params, a, &mut z);
        rhs.push(norm_len(&w, norm).powf(exponent) * norm_len(&z, norm));
    }
    Ok((lhs, rhs))
}

/// Two-sample KS statistic between `|W|` and `|W'|^gamma |Z|`.
pub fn fixed_point_statistic(params: &ModelParams, n: usize, seed: &SeedSpec) -> Result<f64> {
    if n < 1000 {
        return Err(Error::InsufficientSamples { need: 1000, got: n });
    }
    let (l, r) = fixed_point_samples(params, n, 1e-3, params.gamma(), seed)?;
    Ok(ks_two_sample(&l, &r))
}

/// One realization of the right side of the subadditivity bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityDraw {
    #[serde(serialize_with = "io::ser_f64")]
    pub gamma1: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub gamma2: f64,
    #[serde(serialize_with = "io::ser_f64")]
    pub theta: f64,
    #[serde(serialize_with = "io::ser_vec_f64")]
    pub z: Vec<f64>,
    #[serde(serialize_with = "io::ser_vec_f64")]
    pub z_prime: Vec<f64>,
    pub a_indicator: bool,
    /// `A(x)` was forced because the smallness conditions fail at this `|x|`.
    pub forced: bool,
    #[serde(serialize_with = "io::ser_f64")]
    pub rhs_value: f64,
}

/// Whether `A(x)` is the whole sample space at this `|x|`.
pub fn a_forced(params: &ModelParams, x_len: f64) -> bool {
    let g = params.gamma();
    1.0 + 2.0 * x_len.powf(-(1.0 - g) / 2.0) > params.eta.powf(-1.0 / params.s)
        || 4.0 * x_len.powf((1.0 + g) / 2.0) >= x_len
}

/// `theta = 2d[(1 + gamma)/2 - max(gamma1, gamma2)]`.
pub fn theta(params: &ModelParams, gamma1: f64, gamma2: f64) -> f64 {
    2.0 * params.d as f64 * (0.5 * (1.0 + params.gamma()) - gamma1.max(gamma2))
}

fn check_gammas(params: &ModelParams, gamma1: f64, gamma2: f64) -> Result<()> {
    let top = 0.5 * (1.0 + params.gamma());
    let ok = gamma1 > 0.0
        && gamma2 > 0.0
        && gamma1 < top
        && gamma2 < top
        && ((gamma1 + gamma2) * params.d as f64 - params.s).abs() <= 1e-12 * params.s;
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "need 0 < gamma1, gamma2 < {top} and d(gamma1 + gamma2) = s; got {gamma1}, {gamma2}"
        )))
    }
}

/// Draws `Z, Z'`, evaluates `A(x)` and composes
/// `D(0, |x|^g1 Z) + D'(0, |x|^g2 Z') + 1 + |x| 1_A` with two independent
/// distance replicas from `dist_sampler(target, replica_seed)`.
pub fn subadditivity_draw<F>(
    params: &ModelParams,
    x: &[f64],
    gamma1: f64,
    gamma2: f64,
    mut dist_sampler: F,
    seed: &SeedSpec,
) -> Result<SubadditivityDraw>
where
    F: FnMut(&[f64], &SeedSpec) -> Result<f64>,
{
    check_gammas(params, gamma1, gamma2)?;
    let a = z_rate(params)?;
    let d = params.d;
    let mut z = vec![0.0; d];
    let mut zp = vec![0.0; d];
    draw_z(&mut seed.child(0).stream(), params, a, &mut z);
    draw_z(&mut seed.child(1).stream(), params, a, &mut zp);
    let xl = norm_len(x, params.norm);
    let forced = a_forced(params, xl);
    let top = 0.5 * (1.0 + params.gamma());
    let a_ind = forced
        || norm_len(&z, params.norm) > xl.powf(top - gamma1)
        || norm_len(&zp, params.norm) > xl.powf(top - gamma2);
    let t1: Vec<f64> = z.iter().map(|c| c * xl.powf(gamma1)).collect();
    let t2: Vec<f64> = zp.iter().map(|c| c * xl.powf(gamma2)).collect();
    let d1 = dist_sampler(&t1, &seed.child(2))?;
    let d2 = dist_sampler(&t2, &seed.child(3))?;
    let rhs = d1 + d2 + 1.0 + if a_ind { xl } else { 0.0 };
    Ok(SubadditivityDraw {
        gamma1,
        gamma2,
        theta: theta(params, gamma1, gamma2),
        z,
        z_prime: zp,
        a_indicator: a_ind,
        forced,
        rhs_value: rhs,
    })
}

/// JSON Lines batch: one `{kind, params_hash, seed, value}` per draw.
pub fn draws_to_jsonl(kind: &str, params: &ModelParams, seed: &SeedSpec, values: &[Vec<f64>]) -> Result<String> {
    #[derive(Serialize)]
    struct Rec<'a> {
        kind: &'a str,
        params_hash: &'a str,
        seed: String,
        value: Vec<F17>,
    }
    let hash = io::params_hash(params);
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        let r = Rec {
            kind,
            params_hash: &hash,
            seed: seed.child(i as u64).label(),
            value: v.iter().map(|c| F17(*c)).collect(),
        };
        out.push_str(&serde_json::to_string(&r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Sample mean of `|Z|^{2d}`; its expectation is `1 / (2a)`.
pub fn mean_radial_power(params: &ModelParams, n: usize, seed: &SeedSpec) -> Result<f64> {
    let a = z_rate(params)?;
    let mut rng = seed.stream();
    let mut z = vec![0.0; params.d];
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            draw_z(&mut rng, params, a, &mut z);
            norm_len(&z, params.norm).powi(2 * params.d as i32)
        })
        .collect();
    Ok(mean(&xs))
}
