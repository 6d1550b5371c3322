//! Derivative-free one-dimensional search.

use crate::Interval;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMin {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section minimization of `f` over `bounds` until the bracket is no
/// wider than `tol`. Assumes `f` is unimodal on the interval; the returned
/// point is the best interior probe, endpoints are not evaluated.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, bounds: Interval, tol: f64) -> LineMin {
    let (mut a, mut b) = (bounds.lo, bounds.hi);
    if !(b - a > tol) {
        let x = bounds.midpoint();
        return LineMin {
            x,
            value: f(x),
            evaluations: 1,
        };
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
        // guards against a bracket that stops shrinking in floating point
        if evaluations > 400 {
            break;
        }
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    LineMin {
        x,
        value,
        evaluations,
    }
}

/// Maximization counterpart of [`golden_section_min`].
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, bounds: Interval, tol: f64) -> LineMin {
    let m = golden_section_min(|x| -f(x), bounds, tol);
    LineMin {
        value: -m.value,
        ..m
    }
}
