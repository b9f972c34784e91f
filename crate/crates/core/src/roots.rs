//! Derivative-free scalar kernels shared by the certificate code.

/// Absolute tolerance on the root location.
pub(crate) const ROOT_TOL: f64 = 1e-10;
/// Points used to bracket roots and seed maximizations.
pub(crate) const SCAN_POINTS: usize = 1000;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Bisection on `[lo, hi]` down to adjacent floats. The caller guarantees `f(lo)` and `f(hi)` have
/// opposite signs (or one is zero).
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `f` on a uniform grid over the open interval `(lo, hi)` and returns
/// the first bracketing sub-interval.
pub(crate) fn scan_bracket(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let step = (hi - lo) / (SCAN_POINTS as f64 + 1.0);
    let mut prev_x = lo + step;
    let mut prev_f = f(prev_x);
    for k in 2..=SCAN_POINTS {
        let x = lo + step * k as f64;
        let fx = f(x);
        if prev_f == 0.0 || (fx > 0.0) != (prev_f > 0.0) {
            return Some((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    None
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Grid scan of `SCAN_POINTS + 1` points over `[lo, hi]` followed by a
/// golden-section refinement around the best grid point. Endpoints are
/// candidates.
pub(crate) fn grid_golden_max(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut best = (0usize, f(lo));
    for k in 1..=SCAN_POINTS {
        let v = f(lo + step * k as f64);
        if v > best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    let a = lo + step * k.saturating_sub(1) as f64;
    let b = (lo + step * (k + 1) as f64).min(hi);
    let (x, v) = golden_max(f, a, b);
    if v >= best.1 {
        (x, v)
    } else {
        (lo + step * k as f64, best.1)
    }
}
