//! Finite measures on the real line, the positive half-line and the unit
//! circle, and their Cauchy, moment, eta and Herglotz transforms.
//!
//! A measure is a list of atoms plus density pieces. Circle positions are
//! angles in `[0, 2pi)`. The dual measure (pushforward by `t -> 1/t`, or by
//! conjugation on the circle) is represented by a `reflected` flag, so the
//! involution is exact and every integral is taken in stored coordinates.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Num, Q};
use crate::poly::{cauchy_piece_taylor, recip_series, Poly, Scalar, Side, TaylorSeries};
use crate::quad::{self, clustered_breaks, QuadOpts};

pub type ComplexPoint = C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Carrier {
    #[serde(rename = "real")]
    RealLine,
    #[serde(rename = "positive")]
    PositiveHalfLine,
    #[serde(rename = "circle")]
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    CauchyG,
    ReciprocalF,
    PsiMoment,
    Eta,
    HerglotzH,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Form {
    /// `sum_j coeffs[j] (s - center)^j` on the piece interval.
    Poly { center: Num, coeffs: Vec<Num> },
    Semicircle { mean: Num, variance: Num },
    Arcsine,
    /// Continuous part of the free Poisson law; for `rate < 1` the atom of
    /// mass `1 - rate` at 0 must be listed separately.
    FreePoisson { rate: Num, scale: Num },
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityPiece {
    pub a: Num,
    pub b: Num,
    pub form: Form,
    pub weight: Num,
    pf: Option<Poly<f64>>,
}

impl DensityPiece {
    pub fn poly(a: Num, b: Num, center: Num, coeffs: Vec<Num>) -> DensityPiece {
        let pf = Poly::new(center.v(), coeffs.iter().map(|c| c.v()).collect());
        DensityPiece { a, b, form: Form::Poly { center, coeffs }, weight: Num::one(), pf: Some(pf) }
    }

    pub fn semicircle(mean: Num, variance: Num) -> DensityPiece {
        let r = 2.0 * variance.v().sqrt();
        DensityPiece {
            a: Num::float(mean.v() - r),
            b: Num::float(mean.v() + r),
            form: Form::Semicircle { mean, variance },
            weight: Num::one(),
            pf: None,
        }
    }

    pub fn arcsine(a: Num, b: Num) -> DensityPiece {
        DensityPiece { a, b, form: Form::Arcsine, weight: Num::one(), pf: None }
    }

    pub fn free_poisson(rate: Num, scale: Num) -> DensityPiece {
        let (l, s) = (rate.v(), scale.v());
        DensityPiece {
            a: Num::float(s * (1.0 - l.sqrt()).powi(2)),
            b: Num::float(s * (1.0 + l.sqrt()).powi(2)),
            form: Form::FreePoisson { rate, scale },
            weight: Num::one(),
            pf: None,
        }
    }

    pub fn uniform(a: Num, b: Num) -> DensityPiece {
        DensityPiece { a, b, form: Form::Uniform, weight: Num::one(), pf: None }
    }

    pub fn weighted(mut self, w: Num) -> DensityPiece {
        self.weight = w;
        self
    }

    pub fn exact_poly(&self) -> Option<Poly<Q>> {
        match &self.form {
            Form::Poly { center, coeffs } => {
                let c = center.q()?.clone();
                let w = self.weight.q()?.clone();
                let mut v = Vec::with_capacity(coeffs.len());
                for x in coeffs {
                    v.push(x.q()?.clone() * w.clone());
                }
                Some(Poly::new(c, v))
            }
            _ => None,
        }
    }

    pub fn float_poly(&self) -> Option<Poly<f64>> {
        self.pf.as_ref().map(|p| Poly::new(p.center, p.coeffs.iter().map(|c| c * self.weight.v()).collect()))
    }

    pub fn mass(&self) -> f64 {
        let w = self.weight.v();
        match &self.form {
            Form::Poly { .. } => {
                let p = self.pf.as_ref().unwrap();
                w * p.integrate(&self.a.v(), &self.b.v())
            }
            Form::FreePoisson { rate, .. } => w * rate.v().min(1.0),
            _ => w,
        }
    }

    pub fn mass_exact(&self) -> Option<Q> {
        match &self.form {
            Form::Poly { .. } => Some(self.exact_poly()?.integrate(self.a.q()?, self.b.q()?)),
            Form::FreePoisson { .. } => None,
            _ => self.weight.q().cloned(),
        }
    }

    /// Density at stored coordinate `s` (w.r.t. `ds`).
    pub fn density(&self, s: f64) -> f64 {
        let (a, b) = (self.a.v(), self.b.v());
        if s < a || s > b {
            return 0.0;
        }
        let w = self.weight.v();
        match &self.form {
            Form::Poly { .. } => w * self.pf.as_ref().unwrap().eval(&s),
            Form::Semicircle { mean, variance } => {
                let v = variance.v();
                let x = s - mean.v();
                w * (4.0 * v - x * x).max(0.0).sqrt() / (2.0 * PI * v)
            }
            Form::Arcsine => w / (PI * ((s - a) * (b - s)).max(1e-300).sqrt()),
            Form::FreePoisson { scale, .. } => {
                w * ((b - s) * (s - a)).max(0.0).sqrt() / (2.0 * PI * scale.v() * s)
            }
            Form::Uniform => w / (b - a),
        }
    }

    /// Closed-form `int ds/(z - s)` against this piece when available.
    fn cauchy_closed(&self, z: C64) -> Option<C64> {
        let w = self.weight.v();
        let (a, b) = (self.a.v(), self.b.v());
        match &self.form {
            Form::Semicircle { mean, variance } => {
                let v = variance.v();
                let sd = v.sqrt();
                let zeta = z - mean.v();
                // rationalized form, free of cancellation for large zeta
                Some(2.0 * w / (zeta + (zeta - 2.0 * sd).sqrt() * (zeta + 2.0 * sd).sqrt()))
            }
            Form::Arcsine => Some(w / ((z - a).sqrt() * (z - b).sqrt())),
            Form::FreePoisson { rate, scale } => {
                let (l, s) = (rate.v(), scale.v());
                let (num, p) = (z + s * (1.0 - l), (z - a).sqrt() * (z - b).sqrt());
                let full = if (num + p).norm() >= (num - p).norm() { 2.0 / (num + p) } else { (num - p) / (2.0 * s * z) };
                let atom = (1.0 - l).max(0.0);
                Some(w * (full - atom / z))
            }
            Form::Uniform => Some(w * ((z - a).ln() - (z - b).ln()) / (b - a)),
            Form::Poly { .. } => None,
        }
    }

    /// Integrate `f(s) dmu(s)` over the piece, with panels clustered at
    /// the stored-coordinate hot spots `(point, width)`.
    fn integrate(&self, f: &dyn Fn(f64) -> C64, hot: &[(f64, f64)], opts: QuadOpts) -> std::result::Result<C64, quad::Divergent> {
        let (a, b) = (self.a.v(), self.b.v());
        let w = self.weight.v();
        match &self.form {
            Form::Poly { .. } | Form::Uniform => {
                let mut pts = vec![a, b];
                for &(h, wd) in hot {
                    clustered_breaks(a, b, h, wd, &mut pts);
                }
                pts.sort_by(f64::total_cmp);
                match &self.form {
                    Form::Uniform => quad::integrate(|s| f(s) * (w / (b - a)), &pts, opts),
                    _ => {
                        let p = self.pf.as_ref().unwrap();
                        quad::integrate(|s| f(s) * (w * p.eval(&s)), &pts, opts)
                    }
                }
            }
            _ => {
                // s = c + r cos(phi) removes the endpoint singularities
                let c = 0.5 * (a + b);
                let r = 0.5 * (b - a);
                let mut pts = vec![0.0, PI];
                for &(h, wd) in hot {
                    let x = ((h - c) / r).clamp(-1.0, 1.0);
                    let phi = x.acos();
                    let sphi = phi.sin();
                    let wphi = if sphi * r > wd { wd / (r * sphi) } else { (2.0 * wd / r).sqrt() };
                    clustered_breaks(0.0, PI, phi, wphi.max(1e-16), &mut pts);
                }
                pts.sort_by(f64::total_cmp);
                let weight: Box<dyn Fn(f64) -> f64> = match &self.form {
                    Form::Semicircle { .. } => Box::new(move |phi: f64| w * 2.0 / PI * phi.sin().powi(2)),
                    Form::Arcsine => Box::new(move |_| w / PI),
                    Form::FreePoisson { scale, .. } => {
                        let sc = scale.v();
                        Box::new(move |phi: f64| {
                            let s = c + r * phi.cos();
                            w * r * r * phi.sin().powi(2) / (2.0 * PI * sc * s)
                        })
                    }
                    _ => unreachable!(),
                };
                quad::integrate(|phi| f(c + r * phi.cos()) * weight(phi), &pts, opts)
            }
        }
    }
}

/// A point where an integrand is nearly singular, in logical coordinates
/// (real position, or angle on the circle), with the peak width.
#[derive(Clone, Copy, Debug)]
pub struct Hot {
    pub at: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpec {
    pub carrier: Carrier,
    pub atoms: Vec<(Num, Num)>,
    pub pieces: Vec<DensityPiece>,
    pub infinity_mass: Num,
    pub reflected: bool,
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y >= 2.0 * PI {
        0.0
    } else {
        y
    }
}

impl MeasureSpec {
    pub fn new(carrier: Carrier) -> MeasureSpec {
        MeasureSpec { carrier, atoms: Vec::new(), pieces: Vec::new(), infinity_mass: Num::zero(), reflected: false }
    }

    pub fn with_atom(mut self, pos: impl Into<Num>, mass: impl Into<Num>) -> MeasureSpec {
        let mut p = pos.into();
        if self.carrier == Carrier::Circle {
            let v = p.v();
            if !(0.0..2.0 * PI).contains(&v) {
                p = Num::float(wrap_angle(v));
            }
        }
        self.atoms.push((p, mass.into()));
        self
    }

    pub fn with_piece(mut self, p: DensityPiece) -> MeasureSpec {
        self.pieces.push(p);
        self
    }

    pub fn with_infinity_mass(mut self, m: impl Into<Num>) -> MeasureSpec {
        self.infinity_mass = m.into();
        self
    }

    pub fn dirac(carrier: Carrier, pos: impl Into<Num>) -> MeasureSpec {
        MeasureSpec::new(carrier).with_atom(pos, Num::one())
    }

    /// `(delta_{-1} + delta_1)/2` on the line.
    pub fn bernoulli() -> MeasureSpec {
        MeasureSpec::new(Carrier::RealLine).with_atom(-1i64, Num::ratio(1, 2)).with_atom(1i64, Num::ratio(1, 2))
    }

    pub fn semicircle(mean: f64, variance: f64) -> MeasureSpec {
        MeasureSpec::new(Carrier::RealLine).with_piece(DensityPiece::semicircle(Num::from_f64(mean), Num::from_f64(variance)))
    }

    /// Normalized arclength on the circle.
    pub fn haar() -> MeasureSpec {
        MeasureSpec::new(Carrier::Circle).with_piece(DensityPiece::uniform(Num::zero(), Num::float(2.0 * PI)))
    }

    /// Stored coordinate to logical coordinate.
    fn to_logical(&self, s: f64) -> f64 {
        if !self.reflected {
            return s;
        }
        match self.carrier {
            Carrier::PositiveHalfLine => 1.0 / s,
            Carrier::Circle => -s,
            Carrier::RealLine => s,
        }
    }

    fn hot_to_stored(&self, h: Hot) -> Vec<(f64, f64)> {
        match (self.carrier, self.reflected) {
            (Carrier::PositiveHalfLine, true) => {
                if h.at <= 0.0 {
                    vec![]
                } else {
                    vec![(1.0 / h.at, h.width / (h.at * h.at))]
                }
            }
            (Carrier::Circle, refl) => {
                let a = if refl { -h.at } else { h.at };
                (-2..=2).map(|k| (a + 2.0 * PI * k as f64, h.width)).collect()
            }
            _ => vec![(h.at, h.width)],
        }
    }

    /// Atoms at finite logical positions, as `(position, mass)`.
    pub fn logical_atoms(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::with_capacity(self.atoms.len() + 1);
        for (p, m) in &self.atoms {
            if self.reflected && self.carrier == Carrier::PositiveHalfLine && p.v() == 0.0 {
                continue;
            }
            let pos = if self.carrier == Carrier::Circle && self.reflected {
                wrap_angle(-p.v())
            } else {
                self.to_logical(p.v())
            };
            v.push((pos, m.v()));
        }
        if self.reflected && self.carrier == Carrier::PositiveHalfLine && self.infinity_mass.v() > 0.0 {
            v.push((0.0, self.infinity_mass.v()));
        }
        v
    }

    /// Exact logical atoms when available.
    pub fn logical_atoms_exact(&self) -> Option<Vec<(Q, Q)>> {
        if self.carrier == Carrier::Circle {
            return None;
        }
        let mut v = Vec::new();
        for (p, m) in &self.atoms {
            let (p, m) = (p.q()?.clone(), m.q()?.clone());
            if self.reflected && self.carrier == Carrier::PositiveHalfLine {
                if p.is_zero() {
                    continue;
                }
                v.push((p.recip(), m));
            } else {
                v.push((p, m));
            }
        }
        if self.reflected && self.infinity_mass.v() > 0.0 {
            v.push((Q::zero(), self.infinity_mass.q()?.clone()));
        }
        Some(v)
    }

    /// Mass sitting at `+infinity` (positive carrier only).
    pub fn mass_at_infinity(&self) -> f64 {
        if self.carrier != Carrier::PositiveHalfLine {
            return 0.0;
        }
        if self.reflected {
            self.atoms.iter().filter(|(p, _)| p.v() == 0.0).map(|(_, m)| m.v()).sum()
        } else {
            self.infinity_mass.v()
        }
    }

    pub fn total_mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(_, m)| m.v()).sum();
        let p: f64 = self.pieces.iter().map(|p| p.mass()).sum();
        a + p + self.infinity_mass.v()
    }

    pub fn total_mass_exact(&self) -> Option<Q> {
        let mut s = self.infinity_mass.q()?.clone();
        for (_, m) in &self.atoms {
            s += m.q()?.clone();
        }
        for p in &self.pieces {
            s += p.mass_exact()?;
        }
        Some(s)
    }

    /// Taylor coefficients of `G` at a real point, continued from the given
    /// half-plane, in exact arithmetic. `None` unless every piece is a
    /// rational polynomial not ending at `alpha` and no atom sits there.
    pub fn cauchy_taylor_exact(&self, alpha: &Q, depth: usize, side: Side) -> Option<TaylorSeries<Q>> {
        if self.carrier == Carrier::Circle || self.reflected {
            return None;
        }
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let (a, b) = (p.a.q()?.clone(), p.b.q()?.clone());
            let poly = match &p.form {
                Form::Poly { .. } => p.exact_poly()?,
                Form::Uniform => Poly::new(Q::zero(), vec![p.weight.q()?.clone() / (b.clone() - a.clone())]),
                _ => return None,
            };
            pieces.push((poly, a, b));
        }
        cauchy_taylor_generic(&self.logical_atoms_exact()?, &pieces, alpha, depth, side)
    }

    /// Float counterpart of [`MeasureSpec::cauchy_taylor_exact`], for
    /// polynomial pieces with irrational data.
    pub fn cauchy_taylor_float(&self, alpha: f64, depth: usize, side: Side) -> Option<TaylorSeries<f64>> {
        if self.carrier == Carrier::Circle || self.reflected {
            return None;
        }
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let (a, b) = (p.a.v(), p.b.v());
            let poly = match &p.form {
                Form::Poly { .. } => p.float_poly()?,
                Form::Uniform => Poly::new(0.0, vec![p.weight.v() / (b - a)]),
                _ => return None,
            };
            pieces.push((poly, a, b));
        }
        cauchy_taylor_generic(&self.logical_atoms(), &pieces, &alpha, depth, side)
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// `int f(t) dmu(t)` over finite logical points. Circle integrands
    /// receive the angle. Divergence is reported as `SingularIntegral`.
    pub fn integrate(&self, f: &dyn Fn(f64) -> C64, hot: &[Hot]) -> Result<C64> {
        self.integrate_opts(f, hot, QuadOpts::default())
    }

    pub fn integrate_opts(&self, f: &dyn Fn(f64) -> C64, hot: &[Hot], opts: QuadOpts) -> Result<C64> {
        let mut acc = C64::zero();
        for (t, m) in self.logical_atoms() {
            if m != 0.0 {
                acc += f(t) * m;
            }
        }
        if self.pieces.is_empty() {
            return Ok(acc);
        }
        let hs: Vec<(f64, f64)> = hot.iter().flat_map(|h| self.hot_to_stored(*h)).collect();
        for p in &self.pieces {
            let g = |s: f64| f(self.to_logical(s));
            let v = p.integrate(&g, &hs, opts).map_err(|d| Error::SingularIntegral(self.to_logical(d.at)))?;
            acc += v;
        }
        Ok(acc)
    }

    pub fn integrate_re(&self, f: &dyn Fn(f64) -> f64, hot: &[Hot]) -> Result<f64> {
        Ok(self.integrate(&|t| C64::new(f(t), 0.0), hot)?.re)
    }

    /// Logical density at a finite point (w.r.t. `dt`, or `dtheta` on the
    /// circle), ignoring atoms.
    pub fn density_at(&self, t: f64) -> f64 {
        let (s, jac) = match (self.carrier, self.reflected) {
            (Carrier::PositiveHalfLine, true) => {
                if t <= 0.0 {
                    return 0.0;
                }
                (1.0 / t, 1.0 / (t * t))
            }
            (Carrier::Circle, true) => (-t, 1.0),
            _ => (t, 1.0),
        };
        let mut d = 0.0;
        for p in &self.pieces {
            if self.carrier == Carrier::Circle {
                for k in -2..=2 {
                    d += p.density(s + 2.0 * PI * k as f64);
                }
            } else {
                d += p.density(s);
            }
        }
        d * jac
    }

    /// Cauchy transform `int dmu/(z - t)` without domain checks.
    pub fn cauchy(&self, z: C64) -> Result<C64> {
        if self.carrier == Carrier::Circle {
            let f = |th: f64| 1.0 / (z - C64::from_polar(1.0, th));
            let h = Hot { at: z.arg(), width: (1.0 - z.norm()).abs() };
            return self.integrate(&f, &[h]);
        }
        if !self.reflected {
            let mut acc = C64::zero();
            for (t, m) in self.logical_atoms() {
                acc += m / (z - t);
            }
            let mut rest = Vec::new();
            for p in &self.pieces {
                match p.cauchy_closed(z) {
                    Some(v) => acc += v,
                    None => rest.push(p),
                }
            }
            if !rest.is_empty() {
                let h = [(z.re, z.im.abs())];
                for p in rest {
                    acc += p
                        .integrate(&|s| 1.0 / (z - s), &h, QuadOpts::default())
                        .map_err(|d| Error::SingularIntegral(d.at))?;
                }
            }
            return Ok(acc);
        }
        // G_{mu*}(w) = -psi_mu(w)/w
        if z == C64::zero() {
            return Err(Error::TransformUndefined("0".into()));
        }
        let mut base = self.clone();
        base.reflected = false;
        Ok(-base.psi(z)? / z)
    }

    /// Moment generating transform `int tz/(1 - tz) dmu` without checks.
    pub fn psi(&self, z: C64) -> Result<C64> {
        match self.carrier {
            Carrier::Circle => {
                let mut acc = C64::zero();
                for (th, m) in self.logical_atoms() {
                    let t = C64::from_polar(1.0, th);
                    acc += m * t * z / (1.0 - t * z);
                }
                if self.pieces.is_empty() {
                    return Ok(acc);
                }
                let mut rest = Vec::new();
                for p in &self.pieces {
                    if let (Form::Uniform, false) = (&p.form, self.reflected) {
                        let (a, b) = (p.a.v(), p.b.v());
                        let i = C64::i();
                        let v = i * (1.0 - z * C64::from_polar(1.0, b)).ln() - i * (1.0 - z * C64::from_polar(1.0, a)).ln();
                        acc += v * (p.weight.v() / (b - a));
                    } else {
                        rest.push(p.clone());
                    }
                }
                if !rest.is_empty() {
                    let mut m = self.clone();
                    m.atoms.clear();
                    m.pieces = rest;
                    let f = |th: f64| {
                        let t = C64::from_polar(1.0, th);
                        t * z / (1.0 - t * z)
                    };
                    let h = Hot { at: -z.arg(), width: (1.0 - z.norm()).abs() };
                    acc += m.integrate(&f, &[h])?;
                }
                Ok(acc)
            }
            _ => {
                if z == C64::zero() {
                    return Ok(C64::zero());
                }
                let inf = self.mass_at_infinity();
                if self.reflected {
                    // psi_{mu*}(z) = -z G_mu(z), with mu's atom at 0 sent to infinity
                    let mut base = self.clone();
                    base.reflected = false;
                    base.infinity_mass = Num::zero();
                    base.atoms.retain(|(p, _)| p.v() != 0.0);
                    return Ok(-z * base.cauchy(z)? - inf);
                }
                let mut base = self.clone();
                base.infinity_mass = Num::zero();
                let reach = self.pieces.iter().map(|p| p.b.v().abs()).fold(0.0, f64::max);
                if z.norm() * reach < 0.25 {
                    // near the origin G(1/z)/z - m cancels; integrate directly
                    let mut acc = C64::zero();
                    for (t, m) in self.logical_atoms() {
                        acc += m * t * z / (1.0 - t * z);
                    }
                    for p in &self.pieces {
                        acc += p
                            .integrate(&|s| s * z / (1.0 - s * z), &[], QuadOpts::default())
                            .map_err(|d| Error::SingularIntegral(d.at))?;
                    }
                    return Ok(acc - inf);
                }
                let w = 1.0 / z;
                Ok(base.cauchy(w)? * w - base.total_mass() - inf)
            }
        }
    }

    pub fn eta(&self, z: C64) -> Result<C64> {
        let p = self.psi(z)?;
        Ok(p / (1.0 + p))
    }

    /// Herglotz transform `int (t+z)/(t-z) dmu` on the circle.
    pub fn herglotz(&self, z: C64) -> Result<C64> {
        // H_mu = 1 + 2 psi_{mu*}
        let mut d = self.clone();
        d.reflected = !d.reflected;
        Ok(self.total_mass() + 2.0 * d.psi(z)?)
    }

    fn check_domain(&self, which: Transform, z: C64) -> Result<()> {
        let bad = || Err(Error::PointOnCarrier(format!("{z}")));
        if !z.re.is_finite() || !z.im.is_finite() {
            return bad();
        }
        match (self.carrier, which) {
            (Carrier::Circle, _) => {
                if z.norm() >= 1.0 {
                    return bad();
                }
            }
            (_, Transform::HerglotzH) => return Err(Error::UnsupportedCarrier),
            (Carrier::RealLine, _) => {
                if z.im == 0.0 {
                    return bad();
                }
            }
            (Carrier::PositiveHalfLine, Transform::PsiMoment | Transform::Eta) => {
                if z.im == 0.0 && z.re > 0.0 {
                    return bad();
                }
            }
            (Carrier::PositiveHalfLine, _) => {
                if z.im == 0.0 && z.re >= 0.0 {
                    return bad();
                }
            }
        }
        Ok(())
    }
}

/// Evaluate a classical transform of `m` at `z`.
pub fn eval_transform(m: &MeasureSpec, which: Transform, z: ComplexPoint) -> Result<ComplexPoint> {
    m.check_domain(which, z)?;
    match which {
        Transform::CauchyG => m.cauchy(z),
        Transform::ReciprocalF => {
            let g = m.cauchy(z)?;
            if g.norm() < 1e-300 {
                return Err(Error::TransformUndefined(format!("{z}")));
            }
            Ok(1.0 / g)
        }
        Transform::PsiMoment => m.psi(z),
        Transform::Eta => m.eta(z),
        Transform::HerglotzH => m.herglotz(z),
    }
}

fn cauchy_taylor_generic<T: Scalar>(atoms: &[(T, T)], pieces: &[(Poly<T>, T, T)], alpha: &T, depth: usize, side: Side) -> Option<TaylorSeries<T>> {
    let mut acc: TaylorSeries<T> = TaylorSeries::zero(depth);
    for (p, m) in atoms {
        if p == alpha {
            return None;
        }
        // m/(z - p) about z = alpha
        let s = recip_series(&(alpha.clone() - p.clone()), depth);
        for (x, y) in acc.rat.iter_mut().zip(s) {
            *x = x.clone() + m.clone() * y;
        }
    }
    for (poly, a, b) in pieces {
        if a == alpha || b == alpha {
            return None;
        }
        acc.add(&cauchy_piece_taylor(poly, a, b, alpha, depth, side));
    }
    Some(acc)
}

/// Pushforward under `t -> 1/t` (conjugation on the circle).
pub fn dual_measure(m: &MeasureSpec) -> Result<MeasureSpec> {
    match m.carrier {
        Carrier::RealLine => Err(Error::UnsupportedCarrier),
        Carrier::PositiveHalfLine => {
            if m.logical_atoms().iter().any(|&(p, w)| p == 0.0 && w > 0.0) {
                return Err(Error::AtomAtZero);
            }
            Ok(dual_sigma(m))
        }
        Carrier::Circle => Ok(dual_sigma(m)),
    }
}

/// Pushforward allowing the exchange of `0` and `+infinity`, as needed for
/// Levy-Hincin measures on the half-line.
pub fn dual_sigma(m: &MeasureSpec) -> MeasureSpec {
    let mut d = m.clone();
    d.reflected = !d.reflected;
    d
}

/// Pushforward under `t -> scale t + shift`.
pub fn affine_map(m: &MeasureSpec, scale: f64, shift: f64) -> Result<MeasureSpec> {
    affine_map_exact(m, &Num::from_f64(scale), &Num::from_f64(shift))
}

pub fn affine_map_exact(m: &MeasureSpec, scale: &Num, shift: &Num) -> Result<MeasureSpec> {
    let s = scale.v();
    if !s.is_finite() || s == 0.0 || !shift.v().is_finite() {
        return Err(Error::InvalidScale);
    }
    match m.carrier {
        Carrier::RealLine => {}
        Carrier::PositiveHalfLine => {
            if !shift.is_zero() {
                return Err(Error::ShiftNotAllowed);
            }
            if s < 0.0 {
                return Err(Error::InvalidScale);
            }
            if m.reflected {
                // logical scaling by s is stored scaling by 1/s
                let mut inner = m.clone();
                inner.reflected = false;
                let mut out = affine_map_exact(&inner, &scale.recip(), shift)?;
                out.reflected = true;
                return Ok(out);
            }
        }
        Carrier::Circle => {
            if !shift.is_zero() {
                return Err(Error::ShiftNotAllowed);
            }
            if s == 1.0 {
                return Ok(m.clone());
            }
            if s == -1.0 {
                return Ok(rotate(m, PI));
            }
            return Err(Error::InvalidScale);
        }
    }
    let map = |x: &Num| scale.mul(x).add(shift);
    let mut out = MeasureSpec::new(m.carrier);
    out.infinity_mass = m.infinity_mass.clone();
    out.reflected = m.reflected;
    out.atoms = m.atoms.iter().map(|(p, w)| (map(p), w.clone())).collect();
    for p in &m.pieces {
        let (mut a, mut b) = (map(&p.a), map(&p.b));
        if s < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
        let np = match &p.form {
            Form::Poly { center, coeffs } => {
                // density p((x - shift)/scale)/|scale|
                let inv = scale.recip();
                let absinv = if s < 0.0 { inv.neg() } else { inv.clone() };
                let mut pw = absinv.clone();
                let mut cs = Vec::with_capacity(coeffs.len());
                for c in coeffs {
                    cs.push(c.mul(&pw));
                    pw = pw.mul(&inv);
                }
                DensityPiece::poly(a, b, map(center), cs)
            }
            Form::Semicircle { mean, variance } => DensityPiece::semicircle(map(mean), variance.mul(scale).mul(scale)),
            Form::Arcsine => DensityPiece::arcsine(a, b),
            Form::Uniform => DensityPiece::uniform(a, b),
            Form::FreePoisson { rate, scale: sc } => {
                if s < 0.0 || !shift.is_zero() {
                    return Err(Error::InvalidPiece("free Poisson pieces admit only positive dilations".into()));
                }
                DensityPiece::free_poisson(rate.clone(), sc.mul(scale))
            }
        };
        out.pieces.push(np.weighted(p.weight.clone()));
    }
    Ok(out)
}

/// Rotation of a circle measure by `angle`.
pub fn rotate(m: &MeasureSpec, angle: f64) -> MeasureSpec {
    let a = if m.reflected { -angle } else { angle };
    let mut out = m.clone();
    for (p, _) in out.atoms.iter_mut() {
        *p = Num::float(wrap_angle(p.v() + a));
    }
    for p in out.pieces.iter_mut() {
        let (lo, hi) = (p.a.v() + a, p.b.v() + a);
        let k = (lo / (2.0 * PI)).floor() * 2.0 * PI;
        let mut np = match &p.form {
            Form::Poly { center, coeffs } => DensityPiece::poly(Num::float(lo - k), Num::float(hi - k), Num::float(center.v() + a - k), coeffs.clone()),
            _ => DensityPiece::uniform(Num::float(lo - k), Num::float(hi - k)),
        };
        np.weight = p.weight.clone();
        *p = np;
    }
    out
}

/// `int t^k dmu`.
pub fn moment(m: &MeasureSpec, k: u32) -> Result<f64> {
    if k == 0 {
        return Ok(m.total_mass());
    }
    if m.mass_at_infinity() > 0.0 {
        return Err(Error::DivergentMoment(k));
    }
    if let Some(q) = moment_exact(m, k) {
        return Ok(crate::num::q_to_f64(&q));
    }
    let v = if m.carrier == Carrier::Circle {
        m.integrate(&|th| C64::from_polar(1.0, k as f64 * th), &[])
    } else {
        m.integrate(&|t| C64::new(t.powi(k as i32), 0.0), &[])
    };
    v.map(|c| c.re).map_err(|_| Error::DivergentMoment(k))
}

/// Exact moment when all data are rational and unreflected (or reflected
/// with atoms only).
pub fn moment_exact(m: &MeasureSpec, k: u32) -> Option<Q> {
    if m.carrier == Carrier::Circle {
        return None;
    }
    if m.reflected && !m.pieces.is_empty() {
        return None;
    }
    let mut s = Q::zero();
    for (t, w) in m.logical_atoms_exact()? {
        s += num_traits::pow(t, k as usize) * w;
    }
    if k == 0 {
        s += m.infinity_mass.q()?.clone();
    }
    for p in &m.pieces {
        let mut poly = p.exact_poly()?;
        let tk = Poly::new(Q::zero(), {
            let mut v = vec![Q::zero(); k as usize + 1];
            v[k as usize] = Q::from_integer(1.into());
            v
        });
        poly = poly.mul(&tk);
        s += poly.integrate(p.a.q()?, p.b.q()?);
    }
    Some(s)
}

/// Check the invariants; `probability` additionally demands unit mass.
pub fn validate(m: &MeasureSpec, probability: bool) -> Result<MeasureSpec> {
    for (p, w) in &m.atoms {
        if w.is_negative() {
            return Err(Error::NegativeMass(w.v()));
        }
        let x = p.v();
        if !x.is_finite() {
            return Err(Error::OffCarrierAtom(x));
        }
        match m.carrier {
            Carrier::PositiveHalfLine if x < 0.0 => return Err(Error::OffCarrierAtom(x)),
            Carrier::Circle if !(0.0..2.0 * PI).contains(&x) => return Err(Error::OffCarrierAtom(x)),
            _ => {}
        }
    }
    if m.infinity_mass.is_negative() {
        return Err(Error::NegativeMass(m.infinity_mass.v()));
    }
    if m.infinity_mass.v() > 0.0 && m.carrier != Carrier::PositiveHalfLine {
        return Err(Error::InvalidPiece("mass at infinity exists only on the half-line".into()));
    }
    let mut iv = Vec::new();
    for p in &m.pieces {
        if p.weight.is_negative() {
            return Err(Error::NegativeMass(p.weight.v()));
        }
        let (a, b) = (p.a.v(), p.b.v());
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidPiece(format!("interval [{a}, {b}]")));
        }
        if m.carrier == Carrier::PositiveHalfLine && a < 0.0 {
            return Err(Error::OffCarrierAtom(a));
        }
        if m.carrier == Carrier::Circle && b - a > 2.0 * PI + 1e-12 {
            return Err(Error::InvalidPiece("arc longer than the circle".into()));
        }
        match &p.form {
            Form::Poly { .. } => {
                let pf = p.pf.as_ref().unwrap();
                let scale: f64 = pf.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
                for i in 0..1024 {
                    let s = a + (b - a) * i as f64 / 1023.0;
                    if pf.eval(&s) < -1e-12 * scale.max(1.0) {
                        return Err(Error::InvalidPiece(format!("polynomial negative at {s}")));
                    }
                }
            }
            Form::Semicircle { variance, .. } if !(variance.v() > 0.0) => {
                return Err(Error::InvalidPiece("variance must be positive".into()))
            }
            Form::FreePoisson { rate, scale } if !(rate.v() > 0.0 && scale.v() > 0.0) => {
                return Err(Error::InvalidPiece("rate and scale must be positive".into()))
            }
            _ => {}
        }
        if m.carrier == Carrier::Circle && !matches!(p.form, Form::Poly { .. } | Form::Uniform) {
            return Err(Error::InvalidPiece("only uniform and polynomial arcs on the circle".into()));
        }
        iv.push((a, b));
    }
    if m.carrier == Carrier::Circle {
        let base: Vec<(f64, f64)> = iv.clone();
        for (a, b) in base {
            iv.push((a + 2.0 * PI, b + 2.0 * PI));
            iv.push((a - 2.0 * PI, b - 2.0 * PI));
        }
    }
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in iv.windows(2) {
        if w[1].0 < w[0].1 - 1e-12 {
            return Err(Error::OverlappingPieces(w[1].0));
        }
    }
    if probability {
        let tm = match m.total_mass_exact() {
            Some(q) => crate::num::q_to_f64(&q),
            None => m.total_mass(),
        };
        if (tm - 1.0).abs() > 1e-12 {
            return Err(Error::MassNotOne(tm));
        }
    }
    Ok(m.clone())
}

// JSON schema

#[derive(Serialize, Deserialize)]
struct PolyJson {
    center: Num,
    coeffs: Vec<Num>,
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    interval: Option<[Num; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    poly: Option<PolyJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    weight: Option<Num>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    carrier: Carrier,
    #[serde(default)]
    atoms: Vec<(Num, Num)>,
    #[serde(default)]
    pieces: Vec<PieceJson>,
    #[serde(default = "Num::zero")]
    infinity_mass: Num,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    reflected: bool,
}

fn param(p: &serde_json::Map<String, serde_json::Value>, k: &str) -> std::result::Result<Num, String> {
    let v = p.get(k).ok_or_else(|| format!("missing parameter {k}"))?;
    serde_json::from_value(v.clone()).map_err(|e| e.to_string())
}

impl TryFrom<PieceJson> for DensityPiece {
    type Error = String;
    fn try_from(j: PieceJson) -> std::result::Result<Self, String> {
        let empty = serde_json::Map::new();
        let params = j.params.as_ref().unwrap_or(&empty);
        let weight = match (&j.weight, params.get("weight")) {
            (Some(w), _) => w.clone(),
            (None, Some(_)) => param(params, "weight")?,
            _ => Num::one(),
        };
        let piece = if let Some(poly) = j.poly {
            let [a, b] = j.interval.ok_or("polynomial piece needs an interval")?;
            DensityPiece::poly(a, b, poly.center, poly.coeffs)
        } else {
            let fam = j.family.ok_or("piece needs poly or family")?;
            let interval = |name: &str| -> std::result::Result<(Num, Num), String> {
                match &j.interval {
                    Some([a, b]) => Ok((a.clone(), b.clone())),
                    None => Ok((param(params, "a").map_err(|_| format!("{name} needs a and b"))?, param(params, "b")?)),
                }
            };
            match fam.as_str() {
                "semicircle" => DensityPiece::semicircle(param(params, "mean")?, param(params, "variance")?),
                "arcsine" => {
                    let (a, b) = interval("arcsine")?;
                    DensityPiece::arcsine(a, b)
                }
                "free_poisson" | "marchenko_pastur" => {
                    DensityPiece::free_poisson(param(params, "rate")?, param(params, "scale")?)
                }
                "uniform" => {
                    let (a, b) = interval("uniform")?;
                    DensityPiece::uniform(a, b)
                }
                other => return Err(format!("unknown family {other}")),
            }
        };
        Ok(piece.weighted(weight))
    }
}

impl From<&DensityPiece> for PieceJson {
    fn from(p: &DensityPiece) -> PieceJson {
        let weight = if p.weight == Num::one() { None } else { Some(p.weight.clone()) };
        let mut params = serde_json::Map::new();
        let mut put = |k: &str, v: &Num| {
            params.insert(k.into(), serde_json::to_value(v).unwrap());
        };
        let (family, poly, interval) = match &p.form {
            Form::Poly { center, coeffs } => {
                (None, Some(PolyJson { center: center.clone(), coeffs: coeffs.clone() }), Some([p.a.clone(), p.b.clone()]))
            }
            Form::Semicircle { mean, variance } => {
                put("mean", mean);
                put("variance", variance);
                (Some("semicircle"), None, None)
            }
            Form::Arcsine => (Some("arcsine"), None, Some([p.a.clone(), p.b.clone()])),
            Form::Uniform => (Some("uniform"), None, Some([p.a.clone(), p.b.clone()])),
            Form::FreePoisson { rate, scale } => {
                put("rate", rate);
                put("scale", scale);
                (Some("free_poisson"), None, None)
            }
        };
        PieceJson {
            interval,
            poly,
            family: family.map(String::from),
            params: if params.is_empty() { None } else { Some(params) },
            weight,
        }
    }
}

impl Serialize for MeasureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureJson {
            carrier: self.carrier,
            atoms: self.atoms.clone(),
            pieces: self.pieces.iter().map(PieceJson::from).collect(),
            infinity_mass: self.infinity_mass.clone(),
            reflected: self.reflected,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MeasureJson::deserialize(d)?;
        let mut m = MeasureSpec::new(j.carrier);
        for (p, w) in j.atoms {
            m = m.with_atom(p, w);
        }
        for p in j.pieces {
            m.pieces.push(DensityPiece::try_from(p).map_err(serde::de::Error::custom)?);
        }
        m.infinity_mass = j.infinity_mass;
        m.reflected = j.reflected;
        Ok(m)
    }
}

pub fn parse_measure(s: &str) -> Result<MeasureSpec> {
    serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn eta_of_point_mass() {
        let m = MeasureSpec::dirac(Carrier::PositiveHalfLine, 2i64);
        let v = eval_transform(&m, Transform::Eta, C64::new(-1.0, 0.0)).unwrap();
        assert!(close(v, C64::new(-2.0, 0.0), 1e-14));
        let d0 = MeasureSpec::dirac(Carrier::PositiveHalfLine, 0i64);
        let v = eval_transform(&d0, Transform::PsiMoment, C64::new(-1.0, 1.0)).unwrap();
        assert_eq!(v, C64::zero());
    }

    #[test]
    fn semicircle_cauchy() {
        let m = MeasureSpec::semicircle(0.0, 1.0);
        let v = eval_transform(&m, Transform::CauchyG, C64::new(0.0, 2.0)).unwrap();
        assert!(close(v, C64::new(0.0, 1.0 - 2f64.sqrt()), 1e-14));
    }

    #[test]
    fn haar_psi_vanishes() {
        let v = eval_transform(&MeasureSpec::haar(), Transform::PsiMoment, C64::new(0.5, 0.0)).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let z = C64::new(0.3, 0.05);
        let fams = [
            DensityPiece::semicircle(Num::from_f64(0.2), Num::from_f64(0.7)),
            DensityPiece::arcsine(Num::from_f64(-1.0), Num::from_f64(2.0)),
            DensityPiece::free_poisson(Num::from_f64(0.4), Num::from_f64(1.5)),
            DensityPiece::free_poisson(Num::from_f64(2.5), Num::from_f64(0.5)),
            DensityPiece::uniform(Num::from_f64(-0.5), Num::from_f64(1.0)),
        ];
        for p in fams {
            let closed = p.cauchy_closed(z).unwrap();
            let q = p.integrate(&|s| 1.0 / (z - s), &[(z.re, z.im)], QuadOpts::default()).unwrap();
            assert!(close(closed, q, 1e-10), "{:?}: {closed} vs {q}", p.form);
        }
    }

    #[test]
    fn circle_arc_closed_form() {
        let m = MeasureSpec::new(Carrier::Circle).with_piece(DensityPiece::uniform(Num::from_f64(0.5), Num::from_f64(2.0)));
        let z = C64::new(0.2, 0.6);
        let closed = m.psi(z).unwrap();
        let f = |th: f64| {
            let t = C64::from_polar(1.0, th);
            t * z / (1.0 - t * z) / 1.5
        };
        let q = quad::integrate(f, &[0.5, 2.0], QuadOpts::default()).unwrap();
        assert!(close(closed, q, 1e-12));
    }

    #[test]
    fn dual_is_exact_involution() {
        let m = MeasureSpec::new(Carrier::PositiveHalfLine)
            .with_atom(4i64, Num::ratio(1, 2))
            .with_piece(DensityPiece::poly(Num::ratio(1, 1), Num::ratio(3, 1), Num::zero(), vec![Num::ratio(1, 4)]));
        let d = dual_measure(&m).unwrap();
        assert_eq!(d.logical_atoms()[0], (0.25, 0.5));
        assert_eq!(dual_measure(&d).unwrap(), m);
        let z = C64::new(-2.0, 0.0);
        let a = d.eta(z).unwrap() * m.eta(1.0 / z).unwrap();
        assert!((a - 1.0).norm() < 1e-10);
    }

    #[test]
    fn dual_of_atom_at_zero() {
        let s = MeasureSpec::dirac(Carrier::PositiveHalfLine, 0i64);
        assert_eq!(dual_measure(&s), Err(Error::AtomAtZero));
        let d = dual_sigma(&s);
        assert_eq!(d.mass_at_infinity(), 1.0);
        assert!(d.logical_atoms().is_empty());
    }

    #[test]
    fn affine_examples() {
        let m = affine_map(&MeasureSpec::semicircle(0.0, 1.0), 2.0, 0.0).unwrap();
        match &m.pieces[0].form {
            Form::Semicircle { variance, .. } => assert_eq!(variance.v(), 4.0),
            _ => panic!(),
        }
        let b = affine_map(&MeasureSpec::bernoulli(), 1.0 / 2f64.sqrt(), 0.0).unwrap();
        assert!((b.logical_atoms()[1].0 - 0.5f64.sqrt()).abs() < 1e-15);
        let p = affine_map(&MeasureSpec::dirac(Carrier::PositiveHalfLine, 3i64), 2.0, 0.0).unwrap();
        assert_eq!(p.logical_atoms(), vec![(6.0, 1.0)]);
        assert_eq!(
            affine_map(&MeasureSpec::dirac(Carrier::PositiveHalfLine, 3i64), 2.0, 1.0),
            Err(Error::ShiftNotAllowed)
        );
    }

    #[test]
    fn affine_poly_keeps_mass() {
        let m = MeasureSpec::new(Carrier::RealLine).with_piece(DensityPiece::poly(
            Num::ratio(-2, 1),
            Num::ratio(1, 1),
            Num::zero(),
            vec![Num::zero(), Num::zero(), Num::zero(), Num::zero(), Num::ratio(5, 33)],
        ));
        let a = affine_map_exact(&m, &Num::ratio(-3, 1), &Num::ratio(1, 2)).unwrap();
        assert_eq!(a.total_mass_exact().unwrap(), q(1, 1));
        let x = 0.7;
        assert!((a.density_at(-3.0 * x + 0.5) - m.density_at(x) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn moments() {
        assert!(moment(&MeasureSpec::semicircle(0.0, 1.0), 1).unwrap().abs() < 1e-14);
        assert_eq!(moment(&MeasureSpec::bernoulli(), 2).unwrap(), 1.0);
        let m = MeasureSpec::new(Carrier::RealLine).with_piece(DensityPiece::poly(
            Num::ratio(-2, 1),
            Num::ratio(1, 1),
            Num::zero(),
            vec![Num::zero(), Num::zero(), Num::zero(), Num::zero(), Num::ratio(5, 33)],
        ));
        assert_eq!(moment_exact(&m, 0).unwrap(), q(1, 1));
        let s2 = moment(&MeasureSpec::semicircle(0.0, 1.0), 2).unwrap();
        assert!((s2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let m = MeasureSpec::new(Carrier::RealLine).with_atom(0i64, Num::from_f64(-0.1));
        assert!(matches!(validate(&m, true), Err(Error::NegativeMass(_))));
        let m = MeasureSpec::new(Carrier::RealLine).with_atom(0i64, 0.5).with_atom(1i64, 0.6);
        assert!(matches!(validate(&m, true), Err(Error::MassNotOne(_))));
        let b = MeasureSpec::bernoulli();
        assert_eq!(validate(&b, true).unwrap(), b);
        let o = MeasureSpec::new(Carrier::RealLine)
            .with_piece(DensityPiece::uniform(Num::zero(), Num::one()).weighted(Num::ratio(1, 2)))
            .with_piece(DensityPiece::uniform(Num::ratio(1, 2), Num::ratio(3, 2)).weighted(Num::ratio(1, 2)));
        assert!(matches!(validate(&o, true), Err(Error::OverlappingPieces(_))));
        let off = MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(-1i64, 1i64);
        assert!(matches!(validate(&off, true), Err(Error::OffCarrierAtom(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"carrier":"real","atoms":[[0,"1/2"]],"pieces":[{"interval":[-2,1],"poly":{"center":0,"coeffs":[0,0,0,0,"5/33"]},"weight":0.5},{"family":"semicircle","params":{"mean":0,"variance":1,"weight":0}}]}"#;
        let m = parse_measure(s).unwrap();
        assert_eq!(m.total_mass_exact(), Some(q(1, 1)));
        assert!((m.total_mass() - 1.0).abs() < 1e-15);
        let back: MeasureSpec = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
