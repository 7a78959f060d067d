//! Boundary curves of subordination domains.
//!
//! The domain is `{rate < 1}` and the rate is monotone along the relevant
//! one-parameter family (in `theta` on the half-line, in `y` on the line,
//! in `r` on the circle), so every boundary value is found by bracketed
//! bisection. Boundary values are then pushed forward by `Psi` to support
//! locations.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{Kind, Mode, SubordinationContext};

const TOL_ABS: f64 = 1e-12;
const TOL_REL: f64 = 1e-14;
const MAX_DOUBLINGS: usize = 200;

/// Rate with quadrature divergence read as `+inf`: it only happens when the
/// kernel is too sharply peaked to resolve, where the rate is far above 1.
fn rate_or_inf(v: Result<f64>) -> Result<f64> {
    match v {
        Err(Error::SingularIntegral(_)) => Ok(f64::INFINITY),
        r => r,
    }
}

/// Bisection on `[lo, hi]` for a predicate false at `lo` and true at `hi`.
/// Returns the final `hi`.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, abs: f64, rel: f64, mut upper: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..4000 {
        if hi - lo <= abs.min(rel * hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Root of an increasing function on a bracket by the Illinois variant of
/// regula falsi, falling back to bisection when progress stalls.
pub(crate) fn solve_increasing(
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    tol: f64,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let mut side = 0i32;
    for it in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mut x = if it % 8 == 7 || !(fhi - flo).is_finite() || fhi == flo {
            0.5 * (lo + hi)
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = g(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if flo.abs() < fhi.abs() { lo } else { hi })
}

fn need(ctx: &SubordinationContext, k: Kind) -> Result<()> {
    if ctx.kind() != k {
        return Err(Error::UnsupportedKind);
    }
    Ok(())
}

/// `I_r(theta)`; `theta = 0` gives the boundary limit (possibly `+inf`).
pub fn i_r_eval(ctx: &SubordinationContext, r: f64, theta: f64) -> Result<f64> {
    need(ctx, Kind::MultiplicativePositive)?;
    if !(r > 0.0) || !(0.0..=PI).contains(&theta) {
        return Err(Error::DomainViolation(format!("r={r}, theta={theta}")));
    }
    if theta == 0.0 {
        return ctx.rate_limit(r);
    }
    if theta >= PI {
        return Ok(0.0);
    }
    ctx.rate(C64::from_polar(r, theta))
}

/// Boundary angle `f(r)`: zero when `I_r(0) <= 1`, else the root of
/// `I_r(theta) = 1`.
pub fn f_of_r(ctx: &SubordinationContext, r: f64) -> Result<f64> {
    if i_r_eval(ctx, r, 0.0)? <= 1.0 {
        return Ok(0.0);
    }
    let f = bisect(0.0, PI, TOL_ABS, TOL_REL, |t| Ok(rate_or_inf(i_r_eval(ctx, r, t))? <= 1.0))?;
    if ctx.mode == Mode::SurrogatePsi {
        for frac in [0.25, 0.5, 0.75] {
            let t = f + (PI - f) * frac;
            if i_r_eval(ctx, r, t)? > 1.0 {
                return Err(Error::NonIntervalSet(r));
            }
        }
    }
    Ok(f)
}

/// Boundary height `f(x)` on the line.
pub fn f_of_x_additive(ctx: &SubordinationContext, x: f64) -> Result<f64> {
    need(ctx, Kind::AdditiveReal)?;
    if ctx.rate_limit(x)? <= 1.0 {
        return Ok(0.0);
    }
    let scale = x.abs().max(1.0);
    let rate = |y: f64| rate_or_inf(ctx.rate(C64::new(x, y)));
    let mut hi = scale;
    let mut n = 0;
    while rate(hi)? > 1.0 {
        hi *= 2.0;
        n += 1;
        if n > MAX_DOUBLINGS {
            return Err(Error::BracketingFailed(MAX_DOUBLINGS));
        }
    }
    bisect(0.0, hi, TOL_ABS * scale, TOL_REL, |y| Ok(rate(y)? <= 1.0))
}

/// Boundary radius `R(zeta)` on the circle, for `zeta = e^{i phi}`.
pub fn r_of_zeta(ctx: &SubordinationContext, phi: f64) -> Result<f64> {
    Ok(1.0 - gap_of_zeta(ctx, phi)?)
}

/// `1 - R(zeta)`, resolved in relative precision.
pub fn gap_of_zeta(ctx: &SubordinationContext, phi: f64) -> Result<f64> {
    need(ctx, Kind::MultiplicativeCircle)?;
    if ctx.rate_limit(phi)? <= 1.0 {
        return Ok(0.0);
    }
    bisect(0.0, 1.0, TOL_ABS, TOL_REL, |g| Ok(rate_or_inf(ctx.rate_circle_polar(phi, g))? <= 1.0))
}

/// A solved boundary point: parameter (`x`, `r` or the angle of `zeta`),
/// boundary value (`f(x)`, `f(r)` or `R(zeta)`), the point `w` on the
/// boundary (nudged inside by a tiny offset where the value is degenerate)
/// and `Psi(w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub param: f64,
    pub value: f64,
    pub w: C64,
    pub psi: C64,
}

impl BoundaryPoint {
    /// Support location hit by this point: `Re Psi` on the line, `1/Psi`
    /// on the half-line, the angle of `conj Psi` on the circle.
    pub fn location(&self, kind: Kind) -> f64 {
        match kind {
            Kind::AdditiveReal => self.psi.re,
            Kind::MultiplicativePositive => 1.0 / self.psi.norm(),
            Kind::MultiplicativeCircle => (-self.psi.arg()).rem_euclid(2.0 * PI),
        }
    }

    /// True when the boundary value sits at its degenerate end (zero
    /// density unless the companion charges the point).
    pub fn degenerate(&self, kind: Kind) -> bool {
        match kind {
            Kind::MultiplicativeCircle => self.value > 1.0 - 1e-12,
            _ => self.value < 1e-10,
        }
    }
}

pub fn boundary_point(ctx: &SubordinationContext, param: f64) -> Result<BoundaryPoint> {
    let (value, w) = match ctx.kind() {
        Kind::AdditiveReal => {
            let f = f_of_x_additive(ctx, param)?;
            let w = if f > 0.0 { C64::new(param, f) } else { ctx.limit_point(param) };
            (f, w)
        }
        Kind::MultiplicativePositive => {
            let f = f_of_r(ctx, param)?;
            let w = if f > 0.0 { C64::from_polar(param, f) } else { ctx.limit_point(param) };
            (f, w)
        }
        Kind::MultiplicativeCircle => {
            let g = gap_of_zeta(ctx, param)?;
            let w = if g > 0.0 { C64::from_polar(1.0 - g, param) } else { ctx.limit_point(param) };
            (1.0 - g, w)
        }
    };
    let psi = ctx.psi(w)?;
    Ok(BoundaryPoint { param, value, w, psi })
}

/// `h(r) = Psi(r e^{i f(r)})`, a positive real.
pub fn h_of_r(ctx: &SubordinationContext, r: f64) -> Result<f64> {
    need(ctx, Kind::MultiplicativePositive)?;
    Ok(boundary_point(ctx, r)?.psi.norm())
}

/// Inverse of the increasing homeomorphism `h`.
pub fn h_inverse(ctx: &SubordinationContext, s: f64) -> Result<f64> {
    need(ctx, Kind::MultiplicativePositive)?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DomainViolation(format!("{s}")));
    }
    let g = |lr: f64| -> Result<f64> { Ok(h_of_r(ctx, lr.exp())?.ln() - s.ln()) };
    let (lo, hi, flo, fhi) = bracket_increasing(&g, 0.0, 1.0)?;
    let lr = solve_increasing(lo, hi, flo, fhi, 1e-14, g)?;
    Ok(lr.exp())
}

/// Grow a bracket `[lo, hi]` around a sign change of an increasing `g`,
/// starting at `x0` with step `step` and doubling.
pub(crate) fn bracket_increasing(g: &dyn Fn(f64) -> Result<f64>, x0: f64, step: f64) -> Result<(f64, f64, f64, f64)> {
    let f0 = g(x0)?;
    if f0 == 0.0 {
        return Ok((x0, x0, 0.0, 0.0));
    }
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut d = step;
    let (mut a, mut fa) = (x0, f0);
    for _ in 0..MAX_DOUBLINGS {
        let b = x0 + dir * d;
        let fb = g(b)?;
        if (fb >= 0.0) != (fa >= 0.0) || fb == 0.0 {
            return Ok(if dir > 0.0 { (a, b, fa, fb) } else { (b, a, fb, fa) });
        }
        a = b;
        fa = fb;
        d *= 2.0;
    }
    Err(Error::BracketingFailed(MAX_DOUBLINGS))
}

/// Boundary point whose `Psi`-image is the support location `t`.
pub fn point_at_location(ctx: &SubordinationContext, t: f64) -> Result<BoundaryPoint> {
    match ctx.kind() {
        Kind::AdditiveReal => {
            let g = |x: f64| -> Result<f64> { Ok(boundary_point(ctx, x)?.psi.re - t) };
            let x0 = t - ctx.base.gamma.v();
            let (lo, hi, flo, fhi) = bracket_increasing(&g, x0, 0.25 * t.abs().max(1.0))?;
            let x = solve_increasing(lo, hi, flo, fhi, 1e-15 * t.abs().max(1.0), g)?;
            boundary_point(ctx, x)
        }
        Kind::MultiplicativePositive => {
            if !(t > 0.0) {
                return Err(Error::DomainViolation(format!("{t}")));
            }
            let r = h_inverse(ctx, 1.0 / t)?;
            boundary_point(ctx, r)
        }
        Kind::MultiplicativeCircle => {
            let lift = |phi: f64| -> Result<f64> {
                let b = boundary_point(ctx, phi)?;
                let e = ctx.exponent(b.w)?;
                Ok(phi + ctx.base.gamma.v() + e.im)
            };
            let g0 = lift(0.0)?;
            let target = -t;
            let k = ((g0 - target) / (2.0 * PI)).ceil();
            let target = target + 2.0 * PI * k;
            let g = |phi: f64| -> Result<f64> { Ok(lift(phi)? - target) };
            let phi = solve_increasing(0.0, 2.0 * PI, g0 - target, g0 + 2.0 * PI - target, 1e-15, g)?;
            boundary_point(ctx, phi)
        }
    }
}

/// Traced boundary: samples sorted by parameter.
#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    pub kind: Kind,
    pub samples: Vec<BoundaryPoint>,
}

impl BoundaryCurve {
    /// Piecewise-linear interpolation of the boundary value, for seeding.
    pub fn interpolate(&self, p: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || p < s[0].param || p > s[s.len() - 1].param {
            return None;
        }
        let i = s.partition_point(|q| q.param < p);
        if i == 0 {
            return Some(s[0].value);
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let u = (p - a.param) / (b.param - a.param);
        Some(a.value + u * (b.value - a.value))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,boundary_value,psi_re,psi_im\n");
        for s in &self.samples {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", s.param, s.value, s.psi.re, s.psi.im));
        }
        out
    }
}

/// Solve the boundary at every grid parameter.
pub fn trace_curve(ctx: &SubordinationContext, grid: &[f64]) -> Result<BoundaryCurve> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    let samples: Vec<BoundaryPoint> = grid.par_iter().map(|&p| boundary_point(ctx, p)).collect::<Result<_>>()?;
    let n = samples.len();
    let slope = |i: usize| (samples[i + 1].value - samples[i].value).abs() / (samples[i + 1].param - samples[i].param);
    for i in 0..n.saturating_sub(1) {
        let jump = (samples[i + 1].value - samples[i].value).abs();
        let dp = samples[i + 1].param - samples[i].param;
        let mut est: f64 = 0.0;
        if i > 0 {
            est = est.max(slope(i - 1));
        }
        if i + 2 < n {
            est = est.max(slope(i + 1));
        }
        if n > 2 && jump > 1e-6 && jump > 100.0 * dp * est {
            return Err(Error::RefinementNeeded(samples[i].param));
        }
    }
    Ok(BoundaryCurve { kind: ctx.kind(), samples })
}

/// `w` in the domain with `Psi(w) = z`, by Newton continuation from a
/// point where the inverse is known.
pub fn invert_interior(ctx: &SubordinationContext, z: C64) -> Result<C64> {
    ctx.check_domain(z)?;
    let kind = ctx.kind();
    let conj = kind != Kind::MultiplicativeCircle && z.im < 0.0;
    let zt = if conj { z.conj() } else { z };
    let no = || Error::NoConvergence(format!("inverting Psi at {z}"));
    if (kind == Kind::AdditiveReal && zt.im == 0.0) || (kind == Kind::MultiplicativeCircle && z.norm() >= 1.0) {
        return Err(Error::DomainViolation(format!("{z}")));
    }
    // starting point and path s -> z(s), s in [0, 1], with z(1) = zt
    let (start, path): (C64, Box<dyn Fn(f64) -> C64 + Sync>) = match kind {
        Kind::AdditiveReal => {
            let big = 1e3 * (1.0 + zt.norm());
            let z0 = zt + C64::new(0.0, big);
            let w0 = z0 - (ctx.psi(z0)? - z0);
            (w0, Box::new(move |s: f64| zt + C64::new(0.0, big * (1.0 - s))))
        }
        Kind::MultiplicativePositive => {
            let rho = zt.norm();
            let g = |lx: f64| -> Result<f64> { Ok((-ctx.psi(C64::new(-lx.exp(), 0.0))?.re).ln() - rho.ln()) };
            let (lo, hi, flo, fhi) = bracket_increasing(&g, rho.ln(), 1.0)?;
            let lx = solve_increasing(lo, hi, flo, fhi, 1e-15, g)?;
            let a = zt.arg();
            (C64::new(-lx.exp(), 0.0), Box::new(move |s: f64| C64::from_polar(rho, PI + s * (a - PI))))
        }
        Kind::MultiplicativeCircle => {
            let eps = 1e-6;
            let d = ctx.psi(C64::new(eps, 0.0))? / eps;
            let z0 = zt * 1e-6;
            (z0 / d, Box::new(move |s: f64| zt * (1e-6 + s * (1.0 - 1e-6))))
        }
    };
    let newton = |w0: C64, target: C64| -> Result<Option<C64>> {
        let mut w = w0;
        for _ in 0..60 {
            let v = ctx.psi(w)?;
            let r = v - target;
            if r.norm() < 1e-13 * (1.0 + target.norm()) {
                return Ok(Some(w));
            }
            let h = 1e-7 * w.norm().max(1e-3);
            let h = match kind {
                Kind::MultiplicativeCircle => h.min(0.5 * (1.0 - w.norm())),
                Kind::AdditiveReal => h.min(0.5 * w.im.abs()),
                Kind::MultiplicativePositive => h.min(0.5 * if w.re > 0.0 { w.im.abs() } else { w.norm() }),
            };
            let d = (ctx.psi(w + h)? - ctx.psi(w - h)?) / (2.0 * h);
            let step = r / d;
            let mut lam = 1.0;
            let mut ok = false;
            for _ in 0..40 {
                let nw = w - step * lam;
                let inside = match kind {
                    Kind::MultiplicativeCircle => nw.norm() < 1.0,
                    _ => nw.im > 0.0 || (kind == Kind::MultiplicativePositive && nw.im == 0.0 && nw.re < 0.0),
                };
                if inside {
                    if let Ok(nv) = ctx.psi(nw) {
                        if (nv - target).norm() < r.norm() || lam < 1e-3 {
                            w = nw;
                            ok = true;
                            break;
                        }
                    }
                }
                lam *= 0.5;
            }
            if !ok {
                return Ok(None);
            }
        }
        let r = (ctx.psi(w)? - target).norm();
        Ok(if r < 1e-11 * (1.0 + target.norm()) { Some(w) } else { None })
    };
    let mut w = start;
    let mut s = 0.0f64;
    let mut ds = 0.125f64;
    while s < 1.0 {
        let ns = (s + ds).min(1.0);
        let guess = w;
        match newton(guess, path(ns))? {
            Some(nw) => {
                w = nw;
                s = ns;
                ds = (ds * 1.5).min(0.25);
            }
            None => {
                ds *= 0.5;
                if ds < 1e-9 {
                    return Err(no());
                }
            }
        }
    }
    // the inverse must land in the domain (rate < 1)
    if ctx.rate(w)? > 1.0 + 1e-9 {
        return Err(no());
    }
    Ok(if conj { w.conj() } else { w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{power_generator, GeneratorSpec};
    use crate::measures::{Carrier, MeasureSpec};

    fn pos(gamma: f64, s: MeasureSpec) -> SubordinationContext {
        SubordinationContext::pure(&GeneratorSpec::new(Kind::MultiplicativePositive, gamma, s).unwrap())
    }

    #[test]
    fn i_r_values() {
        let ctx = pos(1.0, MeasureSpec::dirac(Carrier::PositiveHalfLine, 1i64));
        assert_eq!(i_r_eval(&ctx, 1.0, PI).unwrap(), 0.0);
        assert!((i_r_eval(&ctx, 1.0, PI / 2.0).unwrap() - 2.0 / PI).abs() < 1e-14);
        let ctx = pos(1.0, MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(0i64, 0.3));
        assert!((i_r_eval(&ctx, 1.0, 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(f_of_r(&ctx, 1.0).unwrap(), 0.0);
        assert!((h_of_r(&ctx, 1.0).unwrap() - 0.3f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn f_for_delta_one() {
        let ctx = pos(1.0, MeasureSpec::dirac(Carrier::PositiveHalfLine, 1i64));
        let f = f_of_r(&ctx, 1.0).unwrap();
        // oracle: sin t / (t (1 - cos t)) = 1
        let g = |t: f64| t.sin() / (t * (1.0 - t.cos())) - 1.0;
        let (mut a, mut b) = (0.1, 3.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m) > 0.0 {
                a = m
            } else {
                b = m
            }
        }
        assert!((f - a).abs() < 1e-11, "{f} vs {a}");
        let h2 = h_of_r(&ctx, 2.0).unwrap();
        assert!((h_inverse(&ctx, h2).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn circle_radius() {
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0i64, MeasureSpec::dirac(Carrier::Circle, 0i64)).unwrap();
        let ctx = SubordinationContext::pure(&g);
        assert!((ctx.rate_limit(PI).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(r_of_zeta(&ctx, PI).unwrap(), 1.0);
        let r = r_of_zeta(&ctx, 0.0).unwrap();
        // oracle: (r^2 - 1)/log r = (1 - r)^2
        let g = |r: f64| (r * r - 1.0) / r.ln() - (1.0 - r).powi(2);
        assert!(g(r).abs() < 1e-10, "{r}");
    }

    #[test]
    fn semicircle_boundary() {
        let ctx = SubordinationContext::pure(&GeneratorSpec::semicircle(1i64));
        assert!((f_of_x_additive(&ctx, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(f_of_x_additive(&ctx, 2.0).unwrap(), 0.0);
        let ctx = power_generator(&MeasureSpec::bernoulli(), 2.0, Kind::AdditiveReal).unwrap();
        assert!((f_of_x_additive(&ctx, 0.0).unwrap() - 1.0).abs() < 1e-9);
        let grid: Vec<f64> = (0..401).map(|i| -2.0 + 4.0 * i as f64 / 400.0).collect();
        let ctx = SubordinationContext::pure(&GeneratorSpec::semicircle(1i64));
        let c = trace_curve(&ctx, &grid).unwrap();
        for s in &c.samples {
            if s.param.abs() <= 0.99 {
                assert!((s.value - (1.0 - s.param * s.param).sqrt()).abs() < 1e-9);
            }
        }
        assert!(trace_curve(&ctx, &[]).unwrap().samples.is_empty());
    }

    #[test]
    fn inversion() {
        let ctx = SubordinationContext::pure(&GeneratorSpec::semicircle(1i64));
        let w = invert_interior(&ctx, C64::new(0.0, 2.0)).unwrap();
        assert!((w - C64::new(0.0, 1.0 + 2f64.sqrt())).norm() < 1e-10);
        let ctx = pos(1.0, MeasureSpec::dirac(Carrier::PositiveHalfLine, 1i64));
        let z = C64::new(0.7, 0.3);
        let w = invert_interior(&ctx, z).unwrap();
        assert!((ctx.psi(w).unwrap() - z).norm() < 1e-10);
        let r = 1.3;
        let b = boundary_point(&ctx, r).unwrap();
        let w = invert_interior(&ctx, b.psi + C64::new(0.0, 1e-8)).unwrap();
        assert!((w - b.w).norm() < 1e-6);
    }
}
