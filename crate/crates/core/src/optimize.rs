//! One-dimensional maximisation: a coarse grid scan followed by golden-section
//! refinement around the best grid point.
//!
//! The grid guards against secondary maxima; golden section then narrows the
//! bracket `[best - step, best + step]` to the requested tolerance.

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// Returns `(x, f(x))` once the bracket is narrower than `tol`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 < f2 {
        (x2, f2)
    } else {
        (x1, f1)
    }
}

/// Scans `f` at `lo + k * step` for every grid point inside `[lo, hi]`, then
/// refines around the winner to `tol`.
///
/// Grid ties go to the larger abscissa. The refined point replaces the grid
/// winner only if it is strictly better, so a maximum sitting exactly on a
/// grid point (for instance at the interval end) is returned exactly.
pub fn grid_then_golden<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    step: f64,
    tol: f64,
) -> (f64, f64) {
    let steps = ((hi - lo) / step).round() as u64;
    let mut best_x = lo;
    let mut best_f = f64::NEG_INFINITY;
    for k in 0..=steps {
        let x = if k == steps {
            hi
        } else {
            lo + (k as f64) * step
        };
        let fx = f(x);
        if fx >= best_f {
            best_f = fx;
            best_x = x;
        }
    }
    let a = (best_x - step).max(lo);
    let b = (best_x + step).min(hi);
    if b - a <= tol {
        return (best_x, best_f);
    }
    let (x, fx) = golden_max(&f, a, b, tol);
    if fx > best_f {
        (x, fx)
    } else {
        (best_x, best_f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
    }

    #[test]
    fn grid_escapes_local_maximum() {
        // Two bumps; the taller one is at 0.8.
        let f = |x: f64| (-(x - 0.2f64).powi(2) * 200.0).exp() + 2.0 * (-(x - 0.8f64).powi(2) * 200.0).exp();
        let (x, _) = grid_then_golden(f, 0.0, 1.0, 1e-2, 1e-7);
        assert!((x - 0.8).abs() < 1e-6, "{x}");
    }

    #[test]
    fn endpoint_maximum_is_exact() {
        let (x, fx) = grid_then_golden(|x| x, 0.0, 0.5, 1e-4, 1e-6);
        assert_eq!(x, 0.5);
        assert_eq!(fx, 0.5);
    }

    #[test]
    fn ties_prefer_larger_abscissa() {
        let (x, _) = grid_then_golden(|_| 1.0, 0.0, 1.0, 0.25, 1e-6);
        assert_eq!(x, 1.0);
    }
}
