use crate::error::{Error, Result};
use crate::numerics::{Interval, Tolerance};
use crate::scalar::Real;

// 15-point Kronrod extension of the 7-point Gauss rule, positive half.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Where an integrand concentrates its mass. Improper half-lines are
/// mapped around `center` with length unit `scale`.
#[derive(Debug, Clone, Copy)]
pub struct Hint<T> {
    pub center: T,
    pub scale: T,
}

#[derive(Clone, Copy)]
enum Map<T> {
    Finite,
    Upper { c: T, s: T },
    Lower { c: T, s: T },
}

impl<T: Real> Map<T> {
    #[inline]
    fn apply(&self, t: T) -> (T, T) {
        match *self {
            Map::Finite => (t, T::one()),
            Map::Upper { c, s } => {
                let q = T::one() - t;
                (c + s * t / q, s / (q * q))
            }
            Map::Lower { c, s } => {
                let q = T::one() - t;
                (c - s * t / q, s / (q * q))
            }
        }
    }
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn eval_mapped<T: Real>(f: &impl Fn(T) -> T, map: Map<T>, t: T) -> Result<T> {
    let (x, jac) = map.apply(t);
    if !x.is_finite() || !jac.is_finite() {
        return Ok(T::zero());
    }
    let y = f(x);
    if y == T::zero() {
        return Ok(T::zero());
    }
    if !y.is_finite() {
        return Err(Error::NonFinite { at: x.as_f64() });
    }
    Ok(y * jac)
}

fn kronrod<T: Real>(f: &impl Fn(T) -> T, map: Map<T>, a: T, b: T) -> Result<(T, T)> {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = eval_mapped(f, map, c)?;
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let pair = eval_mapped(f, map, c - dx)? + eval_mapped(f, map, c + dx)?;
        k = k + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            g = g + pair * T::lit(WG[j / 2]);
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

fn adaptive<T: Real>(
    f: &impl Fn(T) -> T,
    map: Map<T>,
    a: T,
    b: T,
    tol: &Tolerance<T>,
) -> Result<T> {
    let (value, error) = kronrod(f, map, a, b)?;
    let mut segments = vec![Segment { a, b, value, error }];
    loop {
        let total: T = segments.iter().map(|s| s.value).sum();
        let err: T = segments.iter().map(|s| s.error).sum();
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= tol.max_subdivisions {
            return Err(Error::NonConvergence {
                subdivisions: segments.len(),
                estimate: total.as_f64(),
                error: err.as_f64(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // cannot bisect further in floating point
            return Err(Error::NonConvergence {
                subdivisions: segments.len() + 1,
                estimate: total.as_f64(),
                error: err.as_f64(),
            });
        }
        let (v1, e1) = kronrod(f, map, s.a, mid)?;
        let (v2, e2) = kronrod(f, map, mid, s.b)?;
        segments.push(Segment {
            a: s.a,
            b: mid,
            value: v1,
            error: e1,
        });
        segments.push(Segment {
            a: mid,
            b: s.b,
            value: v2,
            error: e2,
        });
    }
}

fn integrate_piece<T: Real>(
    f: &impl Fn(T) -> T,
    lo: T,
    hi: T,
    center: T,
    scale: T,
    tol: &Tolerance<T>,
) -> Result<T> {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(f, Map::Finite, lo, hi, tol),
        (true, false) => adaptive(f, Map::Upper { c: lo, s: scale }, T::zero(), T::one(), tol),
        (false, true) => adaptive(f, Map::Lower { c: hi, s: scale }, T::zero(), T::one(), tol),
        (false, false) => {
            let half = Tolerance {
                abs: tol.abs * T::lit(0.5),
                ..*tol
            };
            Ok(integrate_piece(f, lo, center, center, scale, &half)?
                + integrate_piece(f, center, hi, center, scale, &half)?)
        }
    }
}

/// Adaptive Gauss–Kronrod (7/15) quadrature with global bisection.
/// Infinite ends are mapped onto the unit interval with `x = c ± t/(1-t)`.
pub fn integrate<T: Real>(
    f: impl Fn(T) -> T,
    domain: Interval<T>,
    tol: &Tolerance<T>,
) -> Result<T> {
    let center = if domain.lo.is_finite() {
        domain.lo
    } else if domain.hi.is_finite() {
        domain.hi
    } else {
        T::zero()
    };
    integrate_piece(&f, domain.lo, domain.hi, center, T::one(), tol)
}

/// Like [`integrate`], but splits the domain at `hint.center` and uses
/// `hint.scale` as the length unit of the improper-end maps.
pub fn integrate_with<T: Real>(
    f: impl Fn(T) -> T,
    domain: Interval<T>,
    hint: Hint<T>,
    tol: &Tolerance<T>,
) -> Result<T> {
    let scale = if hint.scale > T::zero() && hint.scale.is_finite() {
        hint.scale
    } else {
        T::one()
    };
    if !domain.interior(hint.center) {
        let c = if domain.lo.is_finite() {
            domain.lo
        } else {
            domain.hi
        };
        return integrate_piece(&f, domain.lo, domain.hi, c, scale, tol);
    }
    let half = Tolerance {
        abs: tol.abs * T::lit(0.5),
        ..*tol
    };
    let c = hint.center;
    Ok(integrate_piece(&f, domain.lo, c, c, scale, &half)?
        + integrate_piece(&f, c, domain.hi, c, scale, &half)?)
}

/// Fixed-order Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

/// Nodes by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> GaussLegendre<T> {
    assert!(n >= 1);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussLegendre {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

impl<T: Real> GaussLegendre<T> {
    pub fn integrate(&self, f: impl Fn(T) -> T, a: T, b: T) -> T {
        let half = T::lit(0.5);
        let c = half * (a + b);
        let h = half * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + h * x))
            .sum::<T>()
            * h
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Location and height of the maximum of a log-integrand, with a length
/// scale from the local curvature.
#[derive(Debug, Clone, Copy)]
pub struct Peak<T> {
    pub mode: T,
    pub log_peak: T,
    pub scale: T,
    pub log_integral: T,
}

fn clamp_into<T: Real>(x: T, prev: T, domain: &Interval<T>) -> T {
    let half = T::lit(0.5);
    if x <= domain.lo {
        half * (prev + domain.lo)
    } else if x >= domain.hi {
        half * (prev + domain.hi)
    } else {
        x
    }
}

/// Maximizes `g` over the interior of `domain` from `start`: outward
/// doubling to bracket the maximum, then golden-section refinement.
/// Returns `(argmax, max)`. Fails if `g` keeps increasing towards an
/// infinite end or is `-inf` everywhere probed.
pub fn maximize<T: Real>(
    g: impl Fn(T) -> T,
    domain: Interval<T>,
    start: T,
    step: T,
) -> Result<(T, T)> {
    let eval = |x: T| {
        let v = g(x);
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    };
    let step = if step > T::zero() && step.is_finite() {
        step
    } else {
        T::one()
    };
    let mut x = if domain.interior(start) {
        start
    } else if domain.is_finite() {
        T::lit(0.5) * (domain.lo + domain.hi)
    } else if domain.lo.is_finite() {
        domain.lo + step
    } else {
        domain.hi - step
    };
    let mut gx = eval(x);
    if gx == T::neg_infinity() {
        let mut found = false;
        let mut d = step;
        'probe: for _ in 0..200 {
            for dir in [T::one(), -T::one()] {
                let y = clamp_into(x + dir * d, x, &domain);
                let gy = eval(y);
                if gy > T::neg_infinity() {
                    x = y;
                    gx = gy;
                    found = true;
                    break 'probe;
                }
            }
            d = d * T::lit(2.0);
        }
        if !found {
            return Err(Error::PosteriorNotNormalizable {
                reason: "density vanishes everywhere probed".to_string(),
            });
        }
    }

    // Pick an uphill direction.
    let mut d = step;
    let (mut a, b, mut c);
    let (mut ga, gb, mut gc);
    loop {
        let l = clamp_into(x - d, x, &domain);
        let r = clamp_into(x + d, x, &domain);
        let gl = eval(l);
        let gr = eval(r);
        if gl <= gx && gr <= gx {
            if gl == gx && gr == gx && d > T::epsilon() * (T::one() + x.abs()) {
                d = d * T::lit(0.25);
                if d < T::lit(1e-3) * step {
                    // flat neighbourhood: accept x
                    return Ok((x, gx));
                }
                continue;
            }
            a = l;
            b = x;
            c = r;
            ga = gl;
            gb = gx;
            gc = gr;
            break;
        }
        let dir = if gr > gl { T::one() } else { -T::one() };
        let (mut prev, mut gprev) = (x, gx);
        let (mut cur, mut gcur) = if dir > T::zero() { (r, gr) } else { (l, gl) };
        let mut dd = d;
        let mut iter = 0;
        loop {
            iter += 1;
            dd = dd * T::lit(2.0);
            let next = clamp_into(cur + dir * dd, cur, &domain);
            let gnext = eval(next);
            if gnext < gcur {
                a = prev;
                b = cur;
                c = next;
                ga = gprev;
                gb = gcur;
                gc = gnext;
                break;
            }
            if iter > 400 || next == cur {
                let toward_infinite = if dir > T::zero() {
                    !domain.hi.is_finite()
                } else {
                    !domain.lo.is_finite()
                };
                if toward_infinite {
                    return Err(Error::PosteriorNotNormalizable {
                        reason: "log-integrand increases without bound towards an infinite end"
                            .to_string(),
                    });
                }
                return Ok((next, gnext));
            }
            prev = cur;
            gprev = gcur;
            cur = next;
            gcur = gnext;
        }
        if a > c {
            std::mem::swap(&mut a, &mut c);
            std::mem::swap(&mut ga, &mut gc);
        }
        break;
    }
    let _ = (ga, gc);

    // Golden-section refinement on [a, c] around b.
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut best = (b, gb);
    let (mut lo, mut hi) = (a, c);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut g1 = eval(x1);
    let mut g2 = eval(x2);
    for _ in 0..200 {
        if hi - lo <= T::lit(1e-12) * (T::one() + best.0.abs()) {
            break;
        }
        if g1 >= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = eval(x2);
        }
        if g1 > best.1 {
            best = (x1, g1);
        }
        if g2 > best.1 {
            best = (x2, g2);
        }
    }
    Ok(best)
}

/// Length scale of a log-integrand around its mode: `1/sqrt(-g'')` when the
/// curvature is negative and finite, else the distance to a drop of one nat.
pub fn local_scale<T: Real>(
    g: &impl Fn(T) -> T,
    mode: T,
    peak: T,
    domain: &Interval<T>,
    step: T,
) -> T {
    let d = T::lit(1e-3) * step.max(T::lit(1e-6) * (T::one() + mode.abs()));
    if domain.interior(mode - d) && domain.interior(mode + d) {
        let c2 = (g(mode + d) - peak - peak + g(mode - d)) / (d * d);
        if c2 < T::zero() && c2.is_finite() {
            return T::one() / (-c2).sqrt();
        }
    }
    let mut best = T::infinity();
    for dir in [T::one(), -T::one()] {
        let mut w = step;
        for _ in 0..200 {
            let y = mode + dir * w;
            if !domain.interior(y) {
                let edge = if dir > T::zero() {
                    domain.hi
                } else {
                    domain.lo
                };
                w = (edge - mode).abs();
                break;
            }
            if g(y) < peak - T::one() {
                break;
            }
            w = w * T::lit(2.0);
        }
        best = best.min(w);
    }
    if best.is_finite() && best > T::zero() {
        best
    } else {
        step
    }
}

/// `ln ∫ exp(g)` over `domain` for a unimodal log-integrand, evaluated
/// relative to its peak so that neither over- nor underflow occurs.
pub fn log_integrate_peaked<T: Real>(
    g: impl Fn(T) -> T,
    domain: Interval<T>,
    start: T,
    step: T,
    tol: &Tolerance<T>,
) -> Result<Peak<T>> {
    let (mode, log_peak) = maximize(&g, domain, start, step)?;
    if !log_peak.is_finite() {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!("log-integrand peak is {log_peak}"),
        });
    }
    let scale = local_scale(&g, mode, log_peak, &domain, step);
    let mass = integrate_with(
        |x| {
            let v = g(x) - log_peak;
            if v.is_nan() {
                T::zero()
            } else {
                v.exp()
            }
        },
        domain,
        Hint {
            center: mode,
            scale,
        },
        tol,
    )
    .map_err(|e| match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => Error::PosteriorNotNormalizable {
            reason: format!("normalization integral did not converge: {e}"),
        },
        other => other,
    })?;
    if !(mass > T::zero()) || !mass.is_finite() {
        return Err(Error::PosteriorNotNormalizable {
            reason: format!("normalization integral is {mass}"),
        });
    }
    Ok(Peak {
        mode,
        log_peak,
        scale,
        log_integral: log_peak + mass.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    #[test]
    fn standard_normal_over_real_line() {
        let v = integrate(
            |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Interval::real_line(),
            &tol(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scale_posterior_over_half_line() {
        // ∫ σ^-2 e^{-1/σ} dσ = ∫ e^{-u} du = 1
        let v = integrate(
            |s: f64| (-1.0 / s).exp() / (s * s),
            Interval::positive(),
            &tol().with_subdivisions(200),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn constant_on_unit_interval() {
        let v = integrate(|_| 1.0f64, Interval::unit(), &tol()).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let t = Tolerance::<f32>::default().with_rel(1e-5).with_abs(1e-6);
        let v = integrate(|x: f32| (-x).exp(), Interval::positive(), &t).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
    }

    #[test]
    fn non_integrable_tail_does_not_converge() {
        let r = integrate(|x: f64| 1.0 / (1.0 + x), Interval::positive(), &tol());
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn nan_in_interior_is_reported() {
        let r = integrate(
            |x: f64| if x > 0.5 { f64::NAN } else { 1.0 },
            Interval::unit(),
            &tol(),
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn hinted_integration_finds_offset_peak() {
        let c = 250.0;
        let f = |x: f64| {
            (-0.5 * ((x - c) / 0.01).powi(2)).exp() / (0.01 * (2.0 * std::f64::consts::PI).sqrt())
        };
        let v = integrate_with(
            f,
            Interval::real_line(),
            Hint {
                center: c,
                scale: 0.01,
            },
            &tol(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gauss_legendre_is_exact_for_degree_15() {
        let gl = gauss_legendre::<f64>(8);
        let v = gl.integrate(|x| x.powi(14) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = gl.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn maximize_finds_interior_and_edge_modes() {
        let (m, _) =
            maximize(|x: f64| -(x - 3.0).powi(2), Interval::real_line(), 0.0, 1.0).unwrap();
        assert!((m - 3.0).abs() < 1e-6);
        let (m, _) = maximize(|x: f64| -x, Interval::positive(), 5.0, 1.0).unwrap();
        assert!(m < 1e-6);
        assert!(maximize(|x: f64| x, Interval::real_line(), 0.0, 1.0).is_err());
    }

    #[test]
    fn log_integration_of_narrow_peak() {
        // ∫ exp(1000 - (x-7)^2 / (2·1e-4)) dx = e^1000 · sqrt(2π)·1e-2
        let p = log_integrate_peaked(
            |x: f64| 1000.0 - (x - 7.0).powi(2) / 2e-4,
            Interval::real_line(),
            0.0,
            1.0,
            &tol(),
        )
        .unwrap();
        let expect = 1000.0 + ((2.0 * std::f64::consts::PI).sqrt() * 1e-2).ln();
        assert!((p.log_integral - expect).abs() < 1e-9);
        assert!((p.mode - 7.0).abs() < 1e-6);
    }
}
