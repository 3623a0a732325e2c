//! Double-exponential (tanh-sinh) quadrature.
//!
//! Robust to integrable endpoint singularities, which appear in the
//! window-clipping profiles and in radial integrals over norm balls.

use std::f64::consts::FRAC_PI_2;

/// Integrates `f` over `[a, b]` to roughly `tol` relative accuracy.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -tanh_sinh(f, b, a, tol);
    }
    let half = 0.5 * (b - a);
    let t_max = 6.5;
    let mut h = 0.5;
    // level 0: nodes at multiples of h
    let mut sum = half * FRAC_PI_2 * f(a + half);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += pair(&mut f, t, a, b, half);
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            add += pair(&mut f, t, a, b, half);
            k += 2;
        }
        sum += add;
        let next = sum * h;
        let err = (next - estimate).abs();
        estimate = next;
        if err <= tol * estimate.abs().max(1e-300) {
            break;
        }
    }
    estimate
}

/// Contribution of the symmetric nodes `±t`.
fn pair<F: FnMut(f64) -> f64>(f: &mut F, t: f64, a: f64, b: f64, half: f64) -> f64 {
    let u = FRAC_PI_2 * t.sinh();
    let cu = u.cosh();
    let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
    // distance of the node from the nearer endpoint, without cancellation
    let gap = half * (-u).exp() / cu;
    let mut s = 0.0;
    if gap > 0.0 {
        let xl = a + gap;
        let xr = b - gap;
        if xl > a && xl < b {
            s += w * f(xl);
        }
        if xr > a && xr < b {
            s += w * f(xr);
        }
    }
    s
}

/// Splits `[a, b]` into `pieces` equal sub-intervals and sums their integrals.
pub fn tanh_sinh_split<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, pieces: usize) -> f64 {
    let n = pieces.max(1);
    let step = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + step * i as f64;
            let hi = if i + 1 == n { b } else { lo + step };
            tanh_sinh(&mut f, lo, hi, tol)
        })
        .sum()
}
