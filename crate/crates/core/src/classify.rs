//! Classification of boundary zeros into the sets A, B, C.
//!
//! A point `alpha` on the real boundary of the subordination domain (f = 0
//! on the line and half-line, R = 1 on the circle) is a zero exactly when
//! one of the set inequalities holds; the inequalities come from the chain
//! rule for Julia-Caratheodory derivatives. Equality means the derivative
//! is infinite at the image point, which matters for the cusp shape.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{power_generator, GeneratorSpec, Kind, SubordinationContext};
use crate::measures::{self, Carrier, Hot, MeasureSpec};
use crate::num::{q_to_f64, Num, Q};
use crate::poly::Side;

/// Ties closer than this are reported with `equality_flag` set.
pub const EQUALITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ZeroSet {
    A,
    B,
    C,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroClassification {
    pub kind: Kind,
    /// Boundary point: real point, or angle on the circle.
    pub alpha: Num,
    /// Image of `alpha` in the support of the law.
    pub location: f64,
    pub set_label: ZeroSet,
    pub lhs: Num,
    pub rhs: Num,
    pub equality_flag: bool,
}

fn finish(kind: Kind, alpha: &Num, location: f64, label: ZeroSet, lhs: Num, rhs: Num) -> Result<ZeroClassification> {
    let equality_flag = match (lhs.q(), rhs.q()) {
        (Some(a), Some(b)) => a == b,
        _ => (lhs.v() - rhs.v()).abs() < EQUALITY_TOL,
    };
    if !(lhs.v() <= rhs.v() + EQUALITY_TOL) && !equality_flag {
        return Err(Error::NotAZero(format!("{alpha}: {label:?} test gives {} > {}", lhs.v(), rhs.v())));
    }
    Ok(ZeroClassification { kind, alpha: alpha.clone(), location, set_label: label, lhs, rhs, equality_flag })
}

fn diverges(what: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::SingularIntegral(_) => Error::DivergentClassifierIntegral(what.to_string()),
        e => e,
    }
}

/// `int f dm` near a real singular point, divergence mapped to a
/// classifier error.
fn real_int(m: &MeasureSpec, f: &dyn Fn(f64) -> f64, at: f64, what: &str) -> Result<f64> {
    let hot = [Hot { at, width: 1e-9 * at.abs().max(1.0) }];
    let v = m.integrate_re(f, &hot).map_err(diverges(what))?;
    if !v.is_finite() {
        return Err(Error::DivergentClassifierIntegral(what.to_string()));
    }
    Ok(v)
}

fn atom_mass(m: &MeasureSpec, at: f64) -> (f64, Option<Q>) {
    let tol = 1e-12 * at.abs().max(1.0);
    let circle = m.carrier == Carrier::Circle;
    let close = |p: f64| {
        if circle {
            let d = (p - at).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) <= tol
        } else {
            (p - at).abs() <= tol
        }
    };
    let v = m.logical_atoms().iter().filter(|a| close(a.0)).map(|a| a.1).sum();
    let exact = if circle {
        None
    } else {
        m.logical_atoms_exact().map(|a| a.iter().filter(|x| close(q_to_f64(&x.0))).fold(Q::zero(), |s, x| s + x.1.clone()))
    };
    (v, exact)
}

fn num_of(v: f64, q: Option<Q>) -> Num {
    match q {
        Some(q) => Num::exact(q),
        None => Num::float(v),
    }
}

/// Exact sum of `f(t) m` over the atoms of an atomic generator measure.
fn exact_atomic_sum(sigma: &MeasureSpec, f: impl Fn(&Q) -> Option<Q>) -> Option<Q> {
    if !sigma.pieces.is_empty() || sigma.mass_at_infinity() != 0.0 {
        return None;
    }
    let mut s = Q::zero();
    for (t, m) in sigma.logical_atoms_exact()? {
        s += f(&t)? * m;
    }
    Some(s)
}

fn location_of(ctx: &SubordinationContext, param: f64) -> Result<f64> {
    let psi = ctx.psi(ctx.limit_point(param))?;
    Ok(match ctx.kind() {
        Kind::AdditiveReal => psi.re,
        Kind::MultiplicativePositive => 1.0 / psi.norm(),
        Kind::MultiplicativeCircle => (-psi.arg()).rem_euclid(2.0 * PI),
    })
}

/// `G(alpha)` and `int dmu/(alpha - t)^2` at a real point outside the
/// density support; exact when the data allow it.
fn g_and_d2(mu: &MeasureSpec, alpha: &Num) -> Result<((f64, Option<Q>), (f64, Option<Q>))> {
    let a = alpha.v();
    if let Some(aq) = alpha.q() {
        if let Some(ts) = mu.cauchy_taylor_exact(aq, 2, Side::Upper) {
            if let (Some(g), Some(g1)) = (ts.coeff(0).0, ts.coeff(1).0) {
                return Ok(((q_to_f64(&g), Some(g.clone())), (-q_to_f64(&g1), Some(-g1))));
            }
        }
    }
    let g = real_int(mu, &|t| 1.0 / (a - t), a, "G at the boundary point")?;
    let d2 = real_int(mu, &|t| 1.0 / ((a - t) * (a - t)), a, "int dmu/(alpha-t)^2")?;
    Ok(((g, None), (d2, None)))
}

fn check_no_density(mu: &MeasureSpec, at: f64, alpha: &Num) -> Result<()> {
    if mu.density_at(at) > 1e-12 {
        return Err(Error::NotAZero(format!("{alpha}: the first factor has positive density there")));
    }
    Ok(())
}

/// Classify a zero `alpha` of the boundary function for `mu1` convolved
/// with the infinitely divisible law of `g`.
pub fn classify_zero(mu1: &MeasureSpec, g: &GeneratorSpec, alpha: &Num) -> Result<ZeroClassification> {
    let mu1 = measures::validate(mu1, true)?;
    g.validate()?;
    let kind = g.kind;
    if mu1.carrier != kind.carrier() {
        return Err(Error::UnsupportedCarrier);
    }
    let ctx = SubordinationContext::surrogate(g, &mu1)?;
    let a = alpha.v();
    if kind == Kind::MultiplicativePositive && !(a > 0.0) {
        return Err(Error::NotAZero(format!("{alpha}: must be positive")));
    }
    let lim = ctx.rate_limit(a)?;
    if lim > 1.0 + 1e-6 {
        return Err(Error::NotAZero(format!("{alpha}: boundary rate limit {lim} exceeds 1")));
    }
    let loc = location_of(&ctx, a)?;
    let sigma = &g.sigma;
    match kind {
        Kind::AdditiveReal => {
            let (m, mq) = atom_mass(&mu1, a);
            if m > 0.0 {
                if sigma.logical_atoms().iter().any(|x| x.0 == 0.0) {
                    return Err(Error::DivergentClassifierIntegral("int (1+1/t^2) dsigma".into()));
                }
                let v = real_int(sigma, &|t| 1.0 + 1.0 / (t * t), 0.0, "int (1+1/t^2) dsigma")?;
                let q = exact_atomic_sum(sigma, |t| if t.is_zero() { None } else { Some(Q::from_integer(1.into()) + (t * t).recip()) });
                return finish(kind, alpha, loc, ZeroSet::A, num_of(v, q), num_of(m, mq));
            }
            check_no_density(&mu1, a, alpha)?;
            let ((gv, gq), (d2, d2q)) = g_and_d2(&mu1, alpha)?;
            let is_c = match &gq {
                Some(q) => q.is_zero(),
                None => gv.abs() < 1e-13,
            };
            let one = Num::one();
            if is_c {
                let var = real_int(sigma, &|t| 1.0 + t * t, 0.0, "variance of the second factor")?;
                let var_q = exact_atomic_sum(sigma, |t| Some(Q::from_integer(1.into()) + t * t));
                let lhs_q = var_q.zip(d2q).map(|(x, y)| x * y);
                return finish(kind, alpha, loc, ZeroSet::C, num_of(var * d2, lhs_q), one);
            }
            let s = real_int(sigma, &|t| (1.0 + t * t) / (1.0 - t * gv).powi(2), 1.0 / gv, "int (1+t^2)/(1-tG)^2 dsigma")?;
            let s_q = gq.as_ref().and_then(|gq| {
                exact_atomic_sum(sigma, |t| {
                    let d = Q::from_integer(1.into()) - t * gq;
                    if d.is_zero() {
                        None
                    } else {
                        Some((Q::from_integer(1.into()) + t * t) / (d.clone() * d))
                    }
                })
            });
            let lhs_q = s_q.zip(d2q).map(|(x, y)| x * y);
            finish(kind, alpha, loc, ZeroSet::B, num_of(s * d2, lhs_q), one)
        }
        Kind::MultiplicativePositive => {
            let inf = sigma.mass_at_infinity();
            let (m, mq) = atom_mass(&mu1, 1.0 / a);
            if m > 0.0 {
                let v = real_int(sigma, &|t| (1.0 + t * t) / ((1.0 - t) * (1.0 - t)), 1.0, "int (1+t^2)/(1-t)^2 dsigma")? + inf;
                return finish(kind, alpha, loc, ZeroSet::A, Num::float(v), num_of(m, mq));
            }
            check_no_density(&mu1, 1.0 / a, alpha)?;
            let at = 1.0 / a;
            let psi = real_int(&mu1, &|t| a * t / (1.0 - a * t), at, "psi at the boundary point")?;
            let d2 = real_int(&mu1, &|t| 1.0 / ((1.0 - a * t) * (1.0 - a * t)), at, "int dmu/(1-alpha t)^2")?;
            if (1.0 + psi).abs() < 1e-13 {
                if inf > 0.0 {
                    return Err(Error::DivergentClassifierIntegral("int (1+t^2) dsigma".into()));
                }
                let v = real_int(sigma, &|t| 1.0 + t * t, 0.0, "int (1+t^2) dsigma")?;
                return finish(kind, alpha, loc, ZeroSet::C, Num::float(d2 * v), Num::one());
            }
            let eta = psi / (1.0 + psi);
            let w = real_int(&mu1, &|t| a * t / ((1.0 - a * t) * (1.0 - a * t)), at, "int alpha t/(1-alpha t)^2 dmu")?;
            let s = real_int(sigma, &|t| (1.0 + t * t) / ((eta - t) * (eta - t)), eta, "int (1+t^2)/(eta-t)^2 dsigma")? + inf;
            finish(kind, alpha, loc, ZeroSet::B, Num::float(w * s), Num::float(1.0 / ((1.0 - eta) * (1.0 - eta))))
        }
        Kind::MultiplicativeCircle => {
            let (m, _) = atom_mass(&mu1, (-a).rem_euclid(2.0 * PI));
            let one = C64::new(1.0, 0.0);
            if m > 0.0 {
                let v = circle_int(sigma, &|x| 1.0 / (one - C64::from_polar(1.0, x)).norm_sqr(), 0.0, "int dsigma/|1-xi|^2")?;
                return finish(kind, alpha, loc, ZeroSet::A, Num::float(v), Num::float(m / 2.0));
            }
            check_no_density(&mu1, (-a).rem_euclid(2.0 * PI), alpha)?;
            let (eta, c) = circle_eta_derivative(&mu1, a)?;
            let s = circle_int(sigma, &|x| 1.0 / (eta - C64::from_polar(1.0, x)).norm_sqr(), eta.arg(), "int dsigma/|eta-xi|^2")?;
            finish(kind, alpha, loc, ZeroSet::B, Num::float(c * s), Num::ratio(1, 2))
        }
    }
}

fn circle_int(m: &MeasureSpec, f: &dyn Fn(f64) -> f64, at: f64, what: &str) -> Result<f64> {
    let hot = [Hot { at, width: 1e-9 }];
    let v = m.integrate_re(f, &hot).map_err(diverges(what))?;
    if !v.is_finite() {
        return Err(Error::DivergentClassifierIntegral(what.to_string()));
    }
    Ok(v)
}

/// Boundary value `eta(t)` at `t = e^{i alpha}` and the modulus of the
/// Julia-Caratheodory derivative there,
/// `lim (1-|eta(rt)|^2)/(1-r^2) = int dmu(s)/|1-st|^2 / |1+psi(t)|^2`.
fn circle_eta_derivative(mu: &MeasureSpec, alpha: f64) -> Result<(C64, f64)> {
    let t = C64::from_polar(1.0, alpha);
    let at = (-alpha).rem_euclid(2.0 * PI);
    let hot = [Hot { at, width: 1e-9 }];
    let psi = mu
        .integrate(&|x| {
            let s = C64::from_polar(1.0, x);
            s * t / (1.0 - s * t)
        }, &hot)
        .map_err(diverges("psi at the boundary point"))?;
    let d = circle_int(mu, &|x| 1.0 / (1.0 - C64::from_polar(1.0, x) * t).norm_sqr(), at, "int dmu/|1-st|^2")?;
    let c = d / (1.0 + psi).norm_sqr();
    Ok((psi / (1.0 + psi), c))
}

/// Classify a zero of the boundary function for the power `nu^order`.
/// On the circle `alpha` is the angle of the point where `eta_nu` is
/// evaluated.
pub fn classify_semigroup_zero(nu: &MeasureSpec, order: f64, kind: Kind, alpha: &Num) -> Result<ZeroClassification> {
    let nu = measures::validate(nu, true)?;
    let ctx = power_generator(&nu, order, kind)?;
    let a = alpha.v();
    let k = order;
    let threshold = 1.0 - 1.0 / k;
    let bound = k / (k - 1.0);
    match kind {
        Kind::AdditiveReal => {
            let loc = location_of(&ctx, a)?;
            let (m, mq) = atom_mass(&nu, a);
            if m > 0.0 {
                return finish(kind, alpha, loc, ZeroSet::A, Num::float(threshold), num_of(m, mq));
            }
            check_no_density(&nu, a, alpha)?;
            let ((gv, gq), (d2, d2q)) = g_and_d2(&nu, alpha)?;
            if gq.as_ref().map_or(gv == 0.0, |q| q.is_zero()) {
                return Err(Error::NotAZero(format!("{alpha}: G vanishes, so F is infinite")));
            }
            // F(alpha)^2 int dnu/(alpha-t)^2 = d2 / G^2
            let lhs_q = gq.zip(d2q).map(|(g, d)| d / (g.clone() * g));
            finish(kind, alpha, loc, ZeroSet::B, num_of(d2 / (gv * gv), lhs_q), Num::float(bound))
        }
        Kind::MultiplicativePositive => {
            if !(a > 0.0) {
                return Err(Error::NotAZero(format!("{alpha}: must be positive")));
            }
            let loc = location_of(&ctx, a)?;
            let (m, mq) = atom_mass(&nu, 1.0 / a);
            if m > 0.0 {
                return finish(kind, alpha, loc, ZeroSet::A, Num::float(threshold), num_of(m, mq));
            }
            check_no_density(&nu, 1.0 / a, alpha)?;
            let at = 1.0 / a;
            let psi = real_int(&nu, &|t| a * t / (1.0 - a * t), at, "psi at the boundary point")?;
            let eta = psi / (1.0 + psi);
            if !(eta > 0.0) || eta == 1.0 {
                return Err(Error::NotAZero(format!("{alpha}: eta = {eta} outside (0, inf) minus 1")));
            }
            let w = real_int(&nu, &|t| a * t / ((1.0 - a * t) * (1.0 - a * t)), at, "int alpha t/(1-alpha t)^2 dnu")?;
            finish(kind, alpha, loc, ZeroSet::B, Num::float((1.0 - eta).powi(2) * w), Num::float(bound * eta))
        }
        Kind::MultiplicativeCircle => {
            let t = C64::from_polar(1.0, a);
            let eta = circle_eta_derivative(&nu, a).ok().map(|x| x.0);
            // squared contexts are parametrized in the domain of nu boxtimes nu,
            // whose point over t is t^2/eta_nu(t)
            let param = match (ctx.is_squared(), eta) {
                (true, Some(e)) => (t * t / e).arg(),
                _ => a,
            };
            let loc = location_of(&ctx, param)?;
            let (m, _) = atom_mass(&nu, (-a).rem_euclid(2.0 * PI));
            if m > 0.0 {
                return finish(kind, alpha, loc, ZeroSet::A, Num::float(threshold), Num::float(m));
            }
            check_no_density(&nu, (-a).rem_euclid(2.0 * PI), alpha)?;
            let (eta, c) = circle_eta_derivative(&nu, a)?;
            if (eta.norm() - 1.0).abs() > 1e-9 || (eta - 1.0).norm() < 1e-12 {
                return Err(Error::NotAZero(format!("{alpha}: eta = {eta} is not on the circle minus 1")));
            }
            finish(kind, alpha, loc, ZeroSet::B, Num::float(c), Num::float(bound))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DensityPiece;
    use crate::num::q;

    fn wishart_mu1() -> MeasureSpec {
        MeasureSpec::new(Carrier::RealLine).with_piece(DensityPiece::poly(
            Num::from(-2i64),
            Num::from(1i64),
            Num::zero(),
            vec![Num::zero(), Num::zero(), Num::zero(), Num::zero(), Num::ratio(5, 33)],
        ))
    }

    #[test]
    fn wishart_equality() {
        let g = GeneratorSpec::free_poisson(Num::ratio(20, 11), Num::ratio(44, 65));
        let c = classify_zero(&wishart_mu1(), &g, &Num::zero()).unwrap();
        assert_eq!(c.set_label, ZeroSet::B);
        assert!(c.equality_flag);
        assert_eq!(c.lhs.q(), Some(&q(1, 1)));
    }

    #[test]
    fn bernoulli_semicircle_equality() {
        let c = classify_zero(&MeasureSpec::bernoulli(), &GeneratorSpec::semicircle(1i64), &Num::zero()).unwrap();
        assert_eq!(c.set_label, ZeroSet::C);
        assert!(c.equality_flag);
    }

    #[test]
    fn synthetic_atom() {
        let mu1 = MeasureSpec::new(Carrier::RealLine).with_atom(0i64, Num::ratio(9, 10)).with_atom(5i64, Num::ratio(1, 10));
        // (1 + 1/t^2) at t = 1 is 2, so mass 1/4 gives 1/2
        let sigma = MeasureSpec::new(Carrier::RealLine).with_atom(1i64, Num::ratio(1, 4));
        let g = GeneratorSpec::new(Kind::AdditiveReal, 0i64, sigma).unwrap();
        let c = classify_zero(&mu1, &g, &Num::zero()).unwrap();
        assert_eq!(c.set_label, ZeroSet::A);
        assert_eq!(c.lhs.q(), Some(&q(1, 2)));
        assert!(!c.equality_flag);
    }

    #[test]
    fn semigroup_examples() {
        let nu = MeasureSpec::new(Carrier::RealLine).with_atom(0i64, Num::ratio(4, 5)).with_atom(1i64, Num::ratio(1, 5));
        let c = classify_semigroup_zero(&nu, 2.0, Kind::AdditiveReal, &Num::zero()).unwrap();
        assert_eq!(c.set_label, ZeroSet::A);
        assert!(c.location.abs() < 1e-9);

        let c = classify_semigroup_zero(&MeasureSpec::bernoulli(), 2.0, Kind::AdditiveReal, &Num::from(3i64)).unwrap();
        assert_eq!(c.set_label, ZeroSet::B);
        assert_eq!(c.lhs.q(), Some(&q(10, 9)));

        let nu = MeasureSpec::dirac(Carrier::Circle, 0i64);
        let c = classify_semigroup_zero(&nu, 2.0, Kind::MultiplicativeCircle, &Num::float(PI)).unwrap();
        assert_eq!(c.set_label, ZeroSet::B);
        assert!((c.lhs.v() - 1.0).abs() < 1e-12 && (c.rhs.v() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_zero_rejected() {
        let r = classify_zero(&MeasureSpec::bernoulli(), &GeneratorSpec::semicircle(1i64), &Num::ratio(1, 2));
        assert!(matches!(r, Err(Error::NotAZero(_))));
    }
}
