use crate::numerics::{find_root, Interval, Tolerance};
use crate::scalar::Real;

const SCAN: usize = 4097;

// Maps t in the unit scan range onto the domain.
fn scan_point<T: Real>(domain: &Interval<T>, u: T) -> T {
    let one = T::one();
    match (domain.lo.is_finite(), domain.hi.is_finite()) {
        (true, true) => domain.lo + u * domain.width(),
        (true, false) => domain.lo + u / (one - u),
        (false, true) => domain.hi - (one - u) / u,
        (false, false) => {
            let t = u + u - one;
            t / (one - t * t)
        }
    }
}

fn uniform_nodes<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let last = T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * T::from_usize(i).unwrap() / last
            }
        })
        .collect()
}

/// Strictly increasing grid of `n >= 2` nodes with the default tolerance.
pub fn build_grid<T: Real>(
    domain: Interval<T>,
    n: usize,
    density_hint: Option<&dyn Fn(T) -> T>,
) -> Vec<T> {
    build_grid_with(domain, n, density_hint, &Tolerance::default())
}

/// Without a hint: uniform on finite domains, uniform under the
/// improper-domain map otherwise (interior points only). With a hint:
/// uniform over the region where the hint exceeds `tol.abs` times its
/// peak.
pub fn build_grid_with<T: Real>(
    domain: Interval<T>,
    n: usize,
    density_hint: Option<&dyn Fn(T) -> T>,
    tol: &Tolerance<T>,
) -> Vec<T> {
    let n = n.max(2);
    let mapped = || {
        if domain.is_finite() {
            uniform_nodes(domain.lo, domain.hi, n)
        } else {
            let denom = T::from_usize(n + 1).unwrap();
            (0..n)
                .map(|i| scan_point(&domain, T::from_usize(i + 1).unwrap() / denom))
                .collect()
        }
    };
    let Some(hint) = density_hint else {
        return mapped();
    };

    let denom = T::from_usize(SCAN + 1).unwrap();
    let xs: Vec<T> = (0..SCAN)
        .map(|i| scan_point(&domain, T::from_usize(i + 1).unwrap() / denom))
        .collect();
    let vals: Vec<T> = xs
        .iter()
        .map(|&x| {
            let v = hint(x);
            if v.is_finite() {
                v
            } else {
                T::zero()
            }
        })
        .collect();
    let peak = vals.iter().cloned().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return mapped();
    }
    let thr = tol.abs * peak;
    let first = vals.iter().position(|&v| v >= thr).unwrap();
    let last = vals.iter().rposition(|&v| v >= thr).unwrap();
    let root_tol = Tolerance::default().with_abs(thr * T::lit(1e-6));
    let cut = |outer: usize, inner: usize| -> T {
        let (a, b) = if xs[outer] < xs[inner] {
            (xs[outer], xs[inner])
        } else {
            (xs[inner], xs[outer])
        };
        Interval::new(a, b)
            .ok()
            .and_then(|br| find_root(|x| hint(x) - thr, br, &root_tol).ok())
            .unwrap_or(xs[inner])
    };
    let lo = if first == 0 {
        if domain.lo.is_finite() {
            domain.lo
        } else {
            xs[0]
        }
    } else {
        cut(first - 1, first)
    };
    let hi = if last == SCAN - 1 {
        if domain.hi.is_finite() {
            domain.hi
        } else {
            xs[SCAN - 1]
        }
    } else {
        cut(last + 1, last)
    };
    if !(lo < hi) {
        let w = T::lit(1e-6) * (T::one() + lo.abs());
        return uniform_nodes(lo - w, lo + w, n);
    }
    uniform_nodes(lo, hi, n)
}
