//! Lévy–Hinčin continuations of inverse transforms and the subordination
//! contexts built from them.
//!
//! Every context evaluates a function of the form
//!
//! * `Psi(z) = gamma + z + E(z)` (additive), or
//! * `Psi(z) = gamma * z * exp(E(z))` (multiplicative),
//!
//! together with a rate (`J`, `I` or `T`) whose comparison with 1 decides
//! whether a point lies in the subordination domain. Rates are assembled
//! from positive integrals so they stay accurate near the boundary.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{self, dual_sigma, Carrier, Hot, MeasureSpec};
use crate::num::{Num, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "additive")]
    AdditiveReal,
    #[serde(rename = "positive")]
    MultiplicativePositive,
    #[serde(rename = "circle")]
    MultiplicativeCircle,
}

impl Kind {
    pub fn carrier(self) -> Carrier {
        match self {
            Kind::AdditiveReal => Carrier::RealLine,
            Kind::MultiplicativePositive => Carrier::PositiveHalfLine,
            Kind::MultiplicativeCircle => Carrier::Circle,
        }
    }

    pub fn from_carrier(c: Carrier) -> Kind {
        match c {
            Carrier::RealLine => Kind::AdditiveReal,
            Carrier::PositiveHalfLine => Kind::MultiplicativePositive,
            Carrier::Circle => Kind::MultiplicativeCircle,
        }
    }
}

/// Pair `(gamma, sigma)`. On the circle `gamma` is an angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: Kind,
    pub gamma: Num,
    pub sigma: MeasureSpec,
}

impl GeneratorSpec {
    pub fn new(kind: Kind, gamma: impl Into<Num>, sigma: MeasureSpec) -> Result<GeneratorSpec> {
        let g = GeneratorSpec { kind, gamma: gamma.into(), sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.carrier != self.kind.carrier() {
            return Err(Error::UnsupportedCarrier);
        }
        measures::validate(&self.sigma, false)?;
        let v = self.gamma.v();
        if !v.is_finite() {
            return Err(Error::Parse("gamma must be finite".into()));
        }
        if self.kind == Kind::MultiplicativePositive && v <= 0.0 {
            return Err(Error::Parse("gamma must be positive".into()));
        }
        Ok(())
    }

    /// `gamma = 0`, `sigma = beta delta_0`: the centered semicircle law of
    /// variance `beta`.
    pub fn semicircle(beta: impl Into<Num>) -> GeneratorSpec {
        let s = MeasureSpec::new(Carrier::RealLine).with_atom(Num::zero(), beta);
        GeneratorSpec { kind: Kind::AdditiveReal, gamma: Num::zero(), sigma: s }
    }

    /// Free Poisson law with R-transform `lambda*beta/(1 - beta z)`.
    pub fn free_poisson(lambda: impl Into<Num>, beta: impl Into<Num>) -> GeneratorSpec {
        let (l, b) = (lambda.into(), beta.into());
        let d = Num::one().add(&b.mul(&b));
        let gamma = l.mul(&b).div(&d);
        let mass = l.mul(&b).mul(&b).div(&d);
        let s = MeasureSpec::new(Carrier::RealLine).with_atom(b, mass);
        GeneratorSpec { kind: Kind::AdditiveReal, gamma, sigma: s }
    }

    pub fn gamma_c(&self) -> C64 {
        match self.kind {
            Kind::MultiplicativeCircle => C64::from_polar(1.0, self.gamma.v()),
            _ => C64::new(self.gamma.v(), 0.0),
        }
    }

    pub fn identity(kind: Kind) -> GeneratorSpec {
        let gamma = if kind == Kind::MultiplicativePositive { Num::one() } else { Num::zero() };
        GeneratorSpec { kind, gamma, sigma: MeasureSpec::new(kind.carrier()) }
    }

    fn check_domain(&self, z: C64) -> Result<()> {
        let bad = || Err(Error::DomainViolation(format!("{z}")));
        if !z.re.is_finite() || !z.im.is_finite() {
            return bad();
        }
        match self.kind {
            Kind::AdditiveReal if z.im == 0.0 => bad(),
            Kind::MultiplicativePositive if z.im == 0.0 && z.re > 0.0 => bad(),
            Kind::MultiplicativeCircle if z.norm() >= 1.0 => bad(),
            _ => Ok(()),
        }
    }
}

/// `int (1+tz)/(z-t) dsigma` for sigma on the line (no checks).
fn nevanlinna(sigma: &MeasureSpec, z: C64) -> Result<C64> {
    let hot = [Hot { at: z.re, width: z.im.abs() }];
    sigma.integrate(&|t| (1.0 + t * z) / (z - t), &hot)
}

/// `int (1+tz)/(z-t) dsigma - z sigma(inf)` for sigma on `[0, inf]`.
fn u_positive(sigma: &MeasureSpec, z: C64) -> Result<C64> {
    let hot = [Hot { at: z.re, width: z.im.abs() }];
    let v = sigma.integrate(&|t| (1.0 + t * z) / (z - t), &hot)?;
    Ok(v - z * sigma.mass_at_infinity())
}

fn u_raw(g: &GeneratorSpec, z: C64) -> Result<C64> {
    match g.kind {
        Kind::AdditiveReal => nevanlinna(&g.sigma, z),
        Kind::MultiplicativePositive => u_positive(&g.sigma, z),
        Kind::MultiplicativeCircle => g.sigma.herglotz(z),
    }
}

/// The integral part of the generator: `u`, `N_sigma` or `H_sigma`.
pub fn u_eval(g: &GeneratorSpec, z: C64) -> Result<C64> {
    g.check_domain(z)?;
    u_raw(g, z)
}

fn phi_raw(g: &GeneratorSpec, z: C64) -> Result<C64> {
    let u = u_raw(g, z)?;
    Ok(match g.kind {
        Kind::AdditiveReal => g.gamma_c() + z + u,
        _ => g.gamma_c() * z * u.exp(),
    })
}

/// `Phi(z)` for the law with generator `g`.
pub fn phi_eval(g: &GeneratorSpec, z: C64) -> Result<C64> {
    g.check_domain(z)?;
    phi_raw(g, z)
}

/// `(1/gamma, sigma pushed forward by t -> 1/t)`, so that
/// `Phi_*(z) Phi(1/z) = 1`.
pub fn dual_generator(g: &GeneratorSpec) -> Result<GeneratorSpec> {
    if g.kind != Kind::MultiplicativePositive {
        return Err(Error::UnsupportedKind);
    }
    Ok(GeneratorSpec { kind: g.kind, gamma: g.gamma.recip(), sigma: dual_sigma(&g.sigma) })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    PureInfDiv,
    SurrogatePsi,
    PowerAdditive { beta: f64 },
    PowerPositive { k: f64 },
    PowerCircle { k: f64, base_measure: MeasureSpec },
}

/// The continuation `Psi` of the inverse of a subordination function.
///
/// In power modes `base` only carries the kind; the law being raised to a
/// power is the companion.
#[derive(Clone, Debug)]
pub struct SubordinationContext {
    pub base: GeneratorSpec,
    pub companion: Option<MeasureSpec>,
    pub mode: Mode,
    /// Circle powers of a law whose eta vanishes inside the disk are taken
    /// as powers of `nu (x) nu` of half the order.
    squared: bool,
    mean: C64,
}

/// Relative offset used for boundary limits of composed integrals.
const LIMIT_OFFSET: f64 = 1e-11;

impl SubordinationContext {
    pub fn pure(g: &GeneratorSpec) -> SubordinationContext {
        SubordinationContext { base: g.clone(), companion: None, mode: Mode::PureInfDiv, squared: false, mean: C64::zero() }
    }

    /// Context for `mu1 (*) nu_g`, with `Psi` the continuation of the inverse
    /// of the subordination function of `mu1`.
    pub fn surrogate(g: &GeneratorSpec, mu1: &MeasureSpec) -> Result<SubordinationContext> {
        if mu1.carrier != g.kind.carrier() {
            return Err(Error::UnsupportedCarrier);
        }
        let mu1 = measures::validate(mu1, true)?;
        Ok(SubordinationContext {
            base: g.clone(),
            companion: Some(mu1),
            mode: Mode::SurrogatePsi,
            squared: false,
            mean: C64::zero(),
        })
    }

    pub fn kind(&self) -> Kind {
        self.base.kind
    }

    pub fn is_squared(&self) -> bool {
        self.squared
    }

    /// Order actually used in the exponent (halved after squaring).
    fn eff_order(&self) -> f64 {
        match &self.mode {
            Mode::PowerCircle { k, .. } if self.squared => k / 2.0,
            Mode::PowerCircle { k, .. } => *k,
            Mode::PowerPositive { k } => *k,
            Mode::PowerAdditive { beta } => *beta,
            _ => 1.0,
        }
    }

    fn comp(&self) -> &MeasureSpec {
        self.companion.as_ref().expect("context without companion")
    }

    pub fn check_domain(&self, z: C64) -> Result<()> {
        self.base.check_domain(z)
    }

    /// `F_{mu1}` (additive), `eta_{mu1}` (multiplicative) for the companion.
    fn inner(&self, z: C64) -> Result<C64> {
        let m = self.comp();
        match self.kind() {
            Kind::AdditiveReal => Ok(1.0 / m.cauchy(z)?),
            _ => m.eta(z),
        }
    }

    /// Exponent part `E(z)` of `Psi`.
    pub fn exponent(&self, z: C64) -> Result<C64> {
        self.check_domain(z)?;
        self.exponent_raw(z)
    }

    fn exponent_raw(&self, z: C64) -> Result<C64> {
        match &self.mode {
            Mode::PureInfDiv => u_raw(&self.base, z),
            Mode::SurrogatePsi => {
                let w = self.inner(z)?;
                if self.kind() == Kind::MultiplicativePositive && w.im == 0.0 && w.re > 0.0 {
                    return Err(Error::DomainViolation(format!("{z}")));
                }
                u_raw(&self.base, w)
            }
            Mode::PowerAdditive { beta } => {
                let f = 1.0 / self.comp().cauchy(z)?;
                Ok((beta - 1.0) * (z - f))
            }
            Mode::PowerPositive { k } => {
                if z.im < 0.0 {
                    return Ok(self.exponent_raw(z.conj())?.conj());
                }
                let eta = self.comp().eta(z)?;
                if eta == C64::zero() {
                    return Err(Error::EtaVanishes(format!("{z}")));
                }
                // arguments of z and eta both taken in [0, pi]
                let az = z.im.atan2(z.re);
                let ae = eta.im.max(0.0).atan2(eta.re);
                let lr = z.norm().ln() - eta.norm().ln();
                Ok((k - 1.0) * C64::new(lr, az - ae))
            }
            Mode::PowerCircle { .. } => {
                let kk = self.eff_order();
                if self.squared {
                    let (_, lk) = self.omega2(z)?;
                    Ok(-2.0 * (kk - 1.0) * lk)
                } else {
                    Ok(-(kk - 1.0) * self.log_kappa(z)?)
                }
            }
        }
    }

    /// `Psi(z)`.
    pub fn psi(&self, z: C64) -> Result<C64> {
        self.check_domain(z)?;
        let e = self.exponent_raw(z)?;
        let g = self.base.gamma_c();
        Ok(match self.kind() {
            Kind::AdditiveReal => g + z + e,
            _ => g * z * e.exp(),
        })
    }

    /// `eta_nu(z)/z`, continued to `z = 0` by the mean.
    fn kappa(&self, z: C64) -> Result<C64> {
        if z.norm() < 1e-9 {
            return Ok(self.mean);
        }
        let p = self.comp().psi(z)?;
        Ok(p / (z * (1.0 + p)))
    }

    /// `log kappa(z)`, continued along the segment `[0, z]` from the
    /// principal logarithm of the mean.
    fn log_kappa(&self, z: C64) -> Result<C64> {
        let mut n = 8usize;
        'refine: loop {
            let mut prev = self.mean;
            let mut acc = self.mean.ln();
            for j in 1..=n {
                let k = self.kappa(z * (j as f64 / n as f64))?;
                if k == C64::zero() {
                    return Err(Error::EtaVanishes(format!("{}", z * (j as f64 / n as f64))));
                }
                let d = (k / prev).ln();
                if d.im.abs() > 1.0 {
                    if n >= 4096 {
                        return Err(Error::EtaVanishes(format!("{z}")));
                    }
                    n *= 2;
                    continue 'refine;
                }
                acc += d;
                prev = k;
            }
            return Ok(acc);
        }
    }

    /// Subordination function `w = omega(z)` of `nu (x) nu`, solving
    /// `w = z kappa(w)` by Newton continuation along `[0, z]`; also returns
    /// `log kappa(w)` continued along the path.
    fn omega2(&self, z: C64) -> Result<(C64, C64)> {
        let mut n = 8usize;
        'refine: loop {
            let mut w = C64::zero();
            let mut prev = self.mean;
            let mut acc = self.mean.ln();
            for j in 1..=n {
                let zj = z * (j as f64 / n as f64);
                let mut x = if j == 1 { self.mean * zj } else { w * (j as f64 / (j - 1) as f64) };
                if x.norm() >= 1.0 {
                    x = w;
                }
                let mut ok = false;
                for _ in 0..40 {
                    let k = self.kappa(x)?;
                    let h = 1e-6 * x.norm().max(1e-3);
                    let dk = (self.kappa(x + h)? - self.kappa(x - h)?) / (2.0 * h);
                    let f = x - zj * k;
                    let step = f / (1.0 - zj * dk);
                    let mut nx = x - step;
                    let mut damp = 0;
                    while nx.norm() >= 1.0 && damp < 30 {
                        nx = x - step * 0.5f64.powi(damp + 1);
                        damp += 1;
                    }
                    if nx.norm() >= 1.0 || !nx.re.is_finite() {
                        break;
                    }
                    let done = (nx - x).norm() <= 1e-15 * (1.0 + x.norm());
                    x = nx;
                    if done {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    let k = self.kappa(x)?;
                    ok = (x - zj * k).norm() < 1e-13;
                }
                if !ok {
                    if n >= 1024 {
                        return Err(Error::NoConvergence(format!("subordination of nu(x)nu at {z}")));
                    }
                    n *= 2;
                    continue 'refine;
                }
                let k = self.kappa(x)?;
                let d = (k / prev).ln();
                if d.im.abs() > 1.0 {
                    if n >= 1024 {
                        return Err(Error::NoConvergence(format!("log continuation at {z}")));
                    }
                    n *= 2;
                    continue 'refine;
                }
                acc += d;
                prev = k;
                w = x;
            }
            return Ok((w, acc));
        }
    }

    /// Transform of the law whose boundary values give the density:
    /// `G_c` on the line, `eta_c` otherwise. The companion is `delta_0` /
    /// `delta_1` in pure mode, `mu1` for surrogates and `nu` for powers.
    pub fn companion_transform(&self, z: C64) -> Result<C64> {
        match (&self.mode, self.kind()) {
            (Mode::PureInfDiv, Kind::AdditiveReal) => Ok(1.0 / z),
            (Mode::PureInfDiv, _) => Ok(z),
            (_, Kind::AdditiveReal) => self.comp().cauchy(z),
            (Mode::PowerCircle { .. }, _) if self.squared => {
                let (w, lk) = self.omega2(z)?;
                Ok(w * lk.exp())
            }
            _ => self.comp().eta(z),
        }
    }

    /// On the circle, `(1 - |eta_c(z)|^2)/(1 - |z|^2)` computed without
    /// cancellation (except after squaring).
    pub fn companion_defect(&self, z: C64) -> Result<f64> {
        match (&self.mode, self.kind()) {
            (_, k) if k != Kind::MultiplicativeCircle => Err(Error::UnsupportedKind),
            (Mode::PureInfDiv, _) => Ok(1.0),
            (Mode::PowerCircle { .. }, _) if self.squared => {
                let eta = self.companion_transform(z)?;
                let r = z.norm();
                Ok((1.0 - eta.norm_sqr()) / ((1.0 - r) * (1.0 + r)))
            }
            _ => poisson_defect(self.comp(), z),
        }
    }

    /// Rate deciding membership in the domain: `Im Psi = y(1 - J)` on the
    /// line, `arg Psi = theta(1 - I)` on the half-line and
    /// `log|Psi| = -log r (1 - T)` on the circle.
    pub fn rate(&self, z: C64) -> Result<f64> {
        self.check_domain(z)?;
        match self.kind() {
            Kind::AdditiveReal => self.rate_additive(z),
            Kind::MultiplicativePositive => self.rate_positive(z),
            Kind::MultiplicativeCircle => self.rate_circle(z),
        }
    }

    fn rate_additive(&self, z: C64) -> Result<f64> {
        let z = if z.im < 0.0 { z.conj() } else { z };
        let sig = &self.base.sigma;
        let kern = |w: C64| -> Result<f64> {
            let hot = [Hot { at: w.re, width: w.im }];
            sig.integrate_re(&|t| (1.0 + t * t) / (w - t).norm_sqr(), &hot)
        };
        match &self.mode {
            Mode::PureInfDiv => kern(z),
            Mode::SurrogatePsi => {
                let (ratio, w) = im_ratio_f(self.comp(), z)?;
                Ok(ratio * kern(w)?)
            }
            Mode::PowerAdditive { beta } => {
                let (ratio, _) = im_ratio_f(self.comp(), z)?;
                Ok((beta - 1.0) * (ratio - 1.0))
            }
            _ => unreachable!(),
        }
    }

    fn rate_positive(&self, z: C64) -> Result<f64> {
        let z = if z.im < 0.0 { z.conj() } else { z };
        let theta = z.im.atan2(z.re);
        let sig = &self.base.sigma;
        let inf = sig.mass_at_infinity();
        let kern = |w: C64| -> Result<f64> {
            let hot = [Hot { at: w.re, width: w.im }];
            Ok(sig.integrate_re(&|t| (1.0 + t * t) / (w - t).norm_sqr(), &hot)? + inf)
        };
        match &self.mode {
            Mode::PureInfDiv => Ok(z.im / theta * kern(z)?),
            Mode::SurrogatePsi => {
                let (imw, w) = im_eta(self.comp(), z)?;
                Ok(imw / theta * kern(w)?)
            }
            Mode::PowerPositive { k } => {
                // arg(eta/z) from positive pieces
                let m = self.comp();
                let hot = [Hot { at: 1.0 / z.norm(), width: theta / z.norm() }];
                let pz = m.integrate(&|t| t / (1.0 - t * z), &hot)?;
                let one_p = 1.0 + pz * z;
                let ang = pz.im.atan2(pz.re) - one_p.im.atan2(one_p.re);
                Ok((k - 1.0) * ang / theta)
            }
            _ => unreachable!(),
        }
    }

    fn rate_circle(&self, z: C64) -> Result<f64> {
        let r = z.norm();
        self.rate_circle_polar(z.arg(), 1.0 - r)
    }

    /// Circle rate at `(1 - gap) e^{i phi}`, with `1 - r^2` formed from
    /// `gap` directly.
    pub fn rate_circle_polar(&self, phi: f64, gap: f64) -> Result<f64> {
        let z = C64::from_polar(1.0 - gap, phi);
        self.check_domain(z)?;
        let s = gap * (2.0 - gap);
        let lr = -0.5 * (-s).ln_1p();
        let fac = s / lr;
        let sig = &self.base.sigma;
        let kern = |w: C64| -> Result<f64> {
            let hot = [Hot { at: w.arg(), width: 1.0 - w.norm() }];
            sig.integrate_re(&|th| 1.0 / (C64::from_polar(1.0, th) - w).norm_sqr(), &hot)
        };
        match &self.mode {
            Mode::PureInfDiv => Ok(fac * kern(z)?),
            Mode::SurrogatePsi => {
                let d = poisson_defect(self.comp(), z)?;
                let w = self.comp().eta(z)?;
                Ok(fac * d * kern(w)?)
            }
            Mode::PowerCircle { .. } => {
                let kk = self.eff_order();
                let d = self.companion_defect(z)?;
                let num = (-s).ln_1p() - (-s * d).ln_1p();
                Ok((kk - 1.0) * num / (-(-s).ln_1p()))
            }
            _ => unreachable!(),
        }
    }

    /// Boundary limit of the rate: `y -> 0` at `x`, `theta -> 0` at `r`, or
    /// `r -> 1` at angle `phi`. Pure modes integrate the singular kernel
    /// directly (`+inf` when it diverges); composed modes evaluate at a tiny
    /// offset.
    pub fn rate_limit(&self, param: f64) -> Result<f64> {
        if let Mode::PureInfDiv = self.mode {
            let sig = &self.base.sigma;
            let lim = |f: &dyn Fn(f64) -> f64, at: f64, hit: &dyn Fn(f64) -> bool| -> Result<f64> {
                if sig.logical_atoms().iter().any(|&(t, m)| m > 0.0 && hit(t)) {
                    return Ok(f64::INFINITY);
                }
                let hot = [Hot { at, width: 1e-12 * at.abs().max(1.0) }];
                match sig.integrate(&|t| C64::new(f(t), 0.0), &hot) {
                    Ok(v) if v.re.is_finite() => Ok(v.re),
                    Ok(_) | Err(Error::SingularIntegral(_)) => Ok(f64::INFINITY),
                    Err(e) => Err(e),
                }
            };
            return match self.kind() {
                Kind::AdditiveReal => {
                    let x = param;
                    lim(&|t| (1.0 + t * t) / ((x - t) * (x - t)), x, &|t| t == x)
                }
                Kind::MultiplicativePositive => {
                    let r = param;
                    let v = lim(&|t| (1.0 + t * t) / ((r - t) * (r - t)), r, &|t| t == r)?;
                    Ok(r * (v + sig.mass_at_infinity()))
                }
                Kind::MultiplicativeCircle => {
                    let phi = param;
                    let v = lim(
                        &|th| 1.0 / (2.0 - 2.0 * (th - phi).cos()),
                        phi,
                        &|th| ((th - phi).rem_euclid(2.0 * PI)).min((phi - th).rem_euclid(2.0 * PI)) == 0.0,
                    )?;
                    Ok(2.0 * v)
                }
            };
        }
        // a divergent kernel integral at the offset point means the limit is infinite
        match self.rate(self.limit_point(param)) {
            Err(Error::SingularIntegral(_)) => Ok(f64::INFINITY),
            r => r,
        }
    }

    /// The point at tiny offset from the boundary used for limits.
    pub fn limit_point(&self, param: f64) -> C64 {
        match self.kind() {
            Kind::AdditiveReal => C64::new(param, LIMIT_OFFSET * param.abs().max(1.0)),
            Kind::MultiplicativePositive => C64::from_polar(param, LIMIT_OFFSET),
            Kind::MultiplicativeCircle => C64::from_polar(1.0 - LIMIT_OFFSET, param),
        }
    }
}

/// `(Im F(z)/Im z, F(z))` for `F = 1/G_m`.
fn im_ratio_f(m: &MeasureSpec, z: C64) -> Result<(f64, C64)> {
    let g = m.cauchy(z)?;
    let hot = [Hot { at: z.re, width: z.im }];
    let p = m.integrate_re(&|t| 1.0 / (z - t).norm_sqr(), &hot)?;
    Ok((p / g.norm_sqr(), 1.0 / g))
}

/// `(Im eta_m(z), eta_m(z))` with the imaginary part from a positive
/// integral; `z` in the upper half-plane.
fn im_eta(m: &MeasureSpec, z: C64) -> Result<(f64, C64)> {
    let p = m.psi(z)?;
    let r = z.norm();
    let hot = [Hot { at: 1.0 / r, width: z.im / (r * r) }];
    let ip = m.integrate_re(&|t| t / (1.0 - t * z).norm_sqr(), &hot)? * z.im;
    Ok((ip / (1.0 + p).norm_sqr(), p / (1.0 + p)))
}

/// `(1 - |eta_m(z)|^2)/(1 - |z|^2)` for a probability measure on the circle.
fn poisson_defect(m: &MeasureSpec, z: C64) -> Result<f64> {
    let p = m.psi(z)?;
    let hot = [Hot { at: -z.arg(), width: 1.0 - z.norm() }];
    let d = m.integrate_re(&|th| 1.0 / (1.0 - C64::from_polar(1.0, th) * z).norm_sqr(), &hot)?;
    Ok(d / (1.0 + p).norm_sqr())
}

/// Surrogate replacement of `(mu1, nu_g)` by `(nu1, nu2)`, where `nu2` has
/// a one-point generator and `nu1 (*) nu2` has the same subordination
/// function for the first factor.
#[derive(Clone, Debug)]
pub struct SurrogatePair {
    pub kind: Kind,
    pub beta: Num,
    pub gamma_prime: Num,
    pub nu2: GeneratorSpec,
    sigma: MeasureSpec,
    mu1: MeasureSpec,
}

impl SurrogatePair {
    /// `G_{nu1}` on the line, `psi_{nu1}` otherwise.
    pub fn nu1_transform(&self, z: C64) -> Result<C64> {
        let b = self.beta.v();
        match self.kind {
            Kind::AdditiveReal => {
                let f = 1.0 / self.mu1.cauchy(z)?;
                let hot = [Hot { at: f.re, width: f.im.abs() }];
                Ok(self.sigma.integrate(&|t| (1.0 + t * t) / (f - t), &hot)? / b)
            }
            Kind::MultiplicativePositive => {
                let e = self.mu1.eta(z)?;
                let hot = [Hot { at: e.re, width: e.im.abs() }];
                let v = self.sigma.integrate(&|s| e * (1.0 + s * s) / (s * (s - e)), &hot)?;
                Ok(v / (2.0 * b))
            }
            Kind::MultiplicativeCircle => {
                let e = self.mu1.eta(z)?;
                Ok(dual_sigma(&self.sigma).psi(e)? / b)
            }
        }
    }

    pub fn nu1_eta(&self, z: C64) -> Result<C64> {
        let p = self.nu1_transform(z)?;
        Ok(p / (1.0 + p))
    }
}

fn exact_atoms(m: &MeasureSpec) -> Option<Vec<(Q, Q)>> {
    if !m.pieces.is_empty() {
        return None;
    }
    m.logical_atoms_exact()
}

pub fn surrogate_pair(g: &GeneratorSpec, mu1: &MeasureSpec) -> Result<SurrogatePair> {
    let sig = &g.sigma;
    let mu1 = measures::validate(mu1, true)?;
    let (beta, gamma_prime, nu2_sigma) = match g.kind {
        Kind::AdditiveReal => {
            let beta = match exact_atoms(sig) {
                Some(at) => Num::exact(at.iter().map(|(t, m)| m * (Q::from_integer(1.into()) + t * t)).sum()),
                None => Num::float(sig.integrate_re(&|t| 1.0 + t * t, &[])?),
            };
            let shift = match exact_atoms(sig) {
                Some(at) => Num::exact(at.iter().map(|(t, m)| m * t).sum()),
                None => Num::float(sig.integrate_re(&|t| t, &[])?),
            };
            let s2 = MeasureSpec::new(Carrier::RealLine).with_atom(Num::zero(), beta.clone());
            (beta, g.gamma.add(&shift), s2)
        }
        Kind::MultiplicativePositive => {
            if sig.mass_at_infinity() > 0.0 || sig.logical_atoms().iter().any(|&(t, m)| t == 0.0 && m > 0.0) {
                return Err(Error::BetaDivergent);
            }
            if sig.pieces.iter().any(|p| p.a.v() <= 0.0 && !sig.reflected) {
                // density reaching 0 makes int ds/s diverge unless it vanishes there
                let v = sig.integrate(&|s| C64::new(1.0 / s, 0.0), &[]);
                if v.is_err() || !v.unwrap().re.is_finite() {
                    return Err(Error::BetaDivergent);
                }
            }
            let (beta, lg) = match exact_atoms(sig) {
                Some(at) => {
                    let b: Q = at.iter().map(|(s, m)| m * (s + s.recip())).sum::<Q>() / Q::from_integer(2.into());
                    let l: f64 = at.iter().map(|(s, m)| crate::num::q_to_f64(&(m * (s - s.recip())))).sum::<f64>() / 2.0;
                    (Num::exact(b), l)
                }
                None => {
                    let b = sig.integrate_re(&|s| s + 1.0 / s, &[]).map_err(|_| Error::BetaDivergent)? / 2.0;
                    let l = sig.integrate_re(&|s| s - 1.0 / s, &[]).map_err(|_| Error::BetaDivergent)? / 2.0;
                    (Num::float(b), l)
                }
            };
            if !beta.v().is_finite() {
                return Err(Error::BetaDivergent);
            }
            let gp = if lg == 0.0 { g.gamma.clone() } else { Num::float(g.gamma.v() * lg.exp()) };
            let s2 = MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(Num::one(), beta.clone());
            (beta, gp, s2)
        }
        Kind::MultiplicativeCircle => {
            let m1 = sig.integrate(&|th| C64::from_polar(1.0, th), &[])?;
            if m1.norm() < 1e-14 * sig.total_mass().max(1e-300) {
                return Err(Error::CircleMeanZero);
            }
            let beta = match sig.total_mass_exact() {
                Some(q) => Num::exact(q),
                None => Num::float(sig.total_mass()),
            };
            let s2 = MeasureSpec::new(Carrier::Circle).with_atom(Num::zero(), beta.clone());
            (beta, g.gamma.clone(), s2)
        }
    };
    if beta.is_zero() {
        return Err(Error::BetaZero);
    }
    let nu2 = GeneratorSpec { kind: g.kind, gamma: gamma_prime.clone(), sigma: nu2_sigma };
    Ok(SurrogatePair { kind: g.kind, beta, gamma_prime, nu2, sigma: sig.clone(), mu1 })
}

/// Number of zeros of `eta_nu(z)/z` in the disk, by the argument principle
/// on `|z| = 0.999`.
pub fn circle_eta_zeros(nu: &MeasureSpec) -> Result<usize> {
    let n = 4096;
    let rho = 0.999;
    let kap = |z: C64| -> Result<C64> {
        let p = nu.psi(z)?;
        Ok(p / (z * (1.0 + p)))
    };
    let k0 = kap(C64::from_polar(rho, 0.0))?;
    let mut prev = k0;
    let mut total = 0.0;
    for j in 1..=n {
        let k = kap(C64::from_polar(rho, 2.0 * PI * j as f64 / n as f64))?;
        total += (k / prev).arg();
        prev = k;
    }
    Ok((total / (2.0 * PI)).round().max(0.0) as usize)
}

/// Context for the power `nu^{(*) order}` (free additive or multiplicative
/// convolution power).
pub fn power_generator(nu: &MeasureSpec, order: f64, kind: Kind) -> Result<SubordinationContext> {
    if !(order > 1.0) || !order.is_finite() {
        return Err(Error::OrderTooSmall);
    }
    if nu.carrier != kind.carrier() {
        return Err(Error::UnsupportedCarrier);
    }
    let nu = measures::validate(nu, true)?;
    let mut ctx = SubordinationContext {
        base: GeneratorSpec::identity(kind),
        companion: Some(nu.clone()),
        mode: Mode::PureInfDiv,
        squared: false,
        mean: C64::zero(),
    };
    match kind {
        Kind::AdditiveReal => ctx.mode = Mode::PowerAdditive { beta: order },
        Kind::MultiplicativePositive => {
            if nu.logical_atoms().iter().any(|&(t, m)| t == 0.0 && (m - 1.0).abs() < 1e-15) {
                return Err(Error::Degenerate("delta_0 has no nontrivial powers".into()));
            }
            ctx.mode = Mode::PowerPositive { k: order }
        }
        Kind::MultiplicativeCircle => {
            let mean = nu.integrate(&|th| C64::from_polar(1.0, th), &[])?;
            if mean.norm() < 1e-14 {
                return Err(Error::CircleMeanZero);
            }
            ctx.mean = mean;
            ctx.mode = Mode::PowerCircle { k: order, base_measure: nu.clone() };
            if circle_eta_zeros(&nu)? > 0 {
                if order < 2.0 {
                    return Err(Error::EtaVanishes("inside the disk; order below 2".into()));
                }
                ctx.squared = true;
            }
        }
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn spec_values() {
        let g = GeneratorSpec::semicircle(1i64);
        assert!(close(phi_eval(&g, C64::new(0.0, 2.0)).unwrap(), C64::new(0.0, 1.5), 1e-14));

        let s = MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(1i64, 0.7);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, s).unwrap();
        assert!(close(phi_eval(&g, C64::new(-1.0, 0.0)).unwrap(), C64::new(-1.0, 0.0), 1e-14));

        let s = MeasureSpec::new(Carrier::Circle).with_atom(0i64, 0.4);
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0i64, s).unwrap();
        assert_eq!(phi_eval(&g, C64::zero()).unwrap(), C64::zero());
        assert!(close(u_eval(&g, C64::zero()).unwrap(), C64::new(0.4, 0.0), 1e-15));

        let s = MeasureSpec::dirac(Carrier::PositiveHalfLine, 0i64);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, s).unwrap();
        assert!(close(u_eval(&g, C64::new(0.0, 2.0)).unwrap(), C64::new(0.0, -0.5), 1e-15));

        let s = MeasureSpec::new(Carrier::PositiveHalfLine).with_infinity_mass(0.7);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, s).unwrap();
        assert!(close(u_eval(&g, C64::new(1.0, 1.0)).unwrap(), C64::new(-0.7, -0.7), 1e-15));
    }

    #[test]
    fn dual_identity() {
        let s = MeasureSpec::dirac(Carrier::PositiveHalfLine, 3i64);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 2i64, s).unwrap();
        let d = dual_generator(&g).unwrap();
        assert_eq!(d.gamma.q().unwrap(), &crate::num::q(1, 2));
        assert_eq!(d.sigma.logical_atoms(), vec![(1.0 / 3.0, 1.0)]);
        let p = phi_eval(&d, C64::new(-2.0, 0.0)).unwrap() * phi_eval(&g, C64::new(-0.5, 0.0)).unwrap();
        assert!((p - 1.0).norm() < 1e-12);

        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, MeasureSpec::dirac(Carrier::PositiveHalfLine, 0i64)).unwrap();
        let d = dual_generator(&g).unwrap();
        assert_eq!(d.sigma.mass_at_infinity(), 1.0);
        assert!(dual_generator(&GeneratorSpec::semicircle(1i64)).is_err());
    }

    #[test]
    fn contexts_match_closed_forms() {
        let ctx = power_generator(&MeasureSpec::bernoulli(), 2.0, Kind::AdditiveReal).unwrap();
        let v = ctx.psi(C64::new(0.0, 2.0)).unwrap();
        assert!(close(v, C64::new(0.0, 1.5), 1e-13), "{v}");

        // surrogate with mu1 = delta_2 on the half-line: Psi(z) = Phi(2z)/2
        let s = MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(0.5, 0.3).with_atom(4i64, 0.2);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1.5, s).unwrap();
        let ctx = SubordinationContext::surrogate(&g, &MeasureSpec::dirac(Carrier::PositiveHalfLine, 2i64)).unwrap();
        for z in [C64::new(-1.0, 0.0), C64::new(0.3, 0.7)] {
            let want = phi_eval(&g, 2.0 * z).unwrap() / 2.0;
            assert!(close(ctx.psi(z).unwrap(), want, 1e-13));
        }

        // circle surrogate with mu1 = delta_1 is the identity composition
        let s = MeasureSpec::new(Carrier::Circle).with_atom(1.0, 0.5);
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0.3, s).unwrap();
        let ctx = SubordinationContext::surrogate(&g, &MeasureSpec::dirac(Carrier::Circle, 0i64)).unwrap();
        let z = C64::new(0.2, -0.4);
        assert!(close(ctx.psi(z).unwrap(), phi_eval(&g, z).unwrap(), 1e-13));
    }

    #[test]
    fn powers_of_point_masses() {
        let ctx = power_generator(&MeasureSpec::dirac(Carrier::PositiveHalfLine, 2i64), 3.0, Kind::MultiplicativePositive).unwrap();
        // delta_2^{(x)3} = delta_8: Psi(z) = z^3/(2z)^2 = z/4 and eta = 2 z
        let z = C64::new(-0.7, 0.4);
        assert!(close(ctx.psi(z).unwrap(), z / 4.0, 1e-13));

        let ctx = power_generator(&MeasureSpec::dirac(Carrier::Circle, 0i64), 2.5, Kind::MultiplicativeCircle).unwrap();
        assert!(close(ctx.psi(z * 0.5).unwrap(), z * 0.5, 1e-13));
        assert!(power_generator(&MeasureSpec::bernoulli(), 1.0, Kind::AdditiveReal).is_err());
    }

    #[test]
    fn squared_circle_power_agrees_with_integer_power() {
        // eta = z(z + 0.2)/(1 + 0.2 z) has a zero at -0.2
        let nu = MeasureSpec::new(Carrier::Circle).with_atom(0i64, 0.6).with_atom(PI, 0.4);
        assert_eq!(circle_eta_zeros(&nu).unwrap(), 1);
        let ctx = power_generator(&nu, 3.0, Kind::MultiplicativeCircle).unwrap();
        assert!(ctx.is_squared());
        // both factorizations must give the same eta of nu^(x)3: solve
        // w (w/eta_nu(w))^2 = Psi(z) near 0 and compare eta_nu(w)
        let z = C64::new(0.03, 0.05);
        let target = ctx.psi(z).unwrap();
        let want = ctx.companion_transform(z).unwrap();
        let f = |w: C64| {
            let e = nu.eta(w).unwrap();
            w * (w / e) * (w / e) - target
        };
        let mut w = target * 0.04;
        for _ in 0..50 {
            let h = 1e-7;
            let d = (f(w + h) - f(w - h)) / (2.0 * h);
            w -= f(w) / d;
        }
        let got = nu.eta(w).unwrap();
        assert!(close(got, want, 1e-9), "{got} vs {want}");
    }

    #[test]
    fn surrogate_pairs() {
        let mu1 = MeasureSpec::bernoulli();
        let p = surrogate_pair(&GeneratorSpec::semicircle(1i64), &mu1).unwrap();
        assert_eq!(p.beta.v(), 1.0);
        let z = C64::new(0.3, 0.8);
        assert!(close(p.nu1_transform(z).unwrap(), 1.0 / (1.0 / mu1.cauchy(z).unwrap()), 1e-14));

        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, MeasureSpec::dirac(Carrier::PositiveHalfLine, 1i64)).unwrap();
        let p = surrogate_pair(&g, &MeasureSpec::dirac(Carrier::PositiveHalfLine, 2i64)).unwrap();
        assert_eq!(p.beta.v(), 1.0);
        assert_eq!(p.gamma_prime.v(), 1.0);

        let s = MeasureSpec::new(Carrier::Circle).with_atom(0i64, 0.5);
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0i64, s).unwrap();
        let p = surrogate_pair(&g, &MeasureSpec::dirac(Carrier::Circle, 0i64)).unwrap();
        assert_eq!(p.beta.v(), 0.5);
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0i64, MeasureSpec::haar()).unwrap();
        assert_eq!(surrogate_pair(&g, &MeasureSpec::dirac(Carrier::Circle, 0i64)).unwrap_err(), Error::CircleMeanZero);
    }

    #[test]
    fn rates_match_definitions() {
        // I_1(pi/2) for sigma = delta_1 is 2/pi
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, MeasureSpec::dirac(Carrier::PositiveHalfLine, 1i64)).unwrap();
        let ctx = SubordinationContext::pure(&g);
        assert!((ctx.rate(C64::new(0.0, 1.0)).unwrap() - 2.0 / PI).abs() < 1e-14);
        // arg Psi = theta (1 - I)
        let z = C64::from_polar(1.3, 0.9);
        let lhs = ctx.psi(z).unwrap().arg();
        assert!((lhs - 0.9 * (1.0 - ctx.rate(z).unwrap())).abs() < 1e-13);

        // surrogate on the line: Im Psi = y (1 - J)
        let g = GeneratorSpec::free_poisson(2i64, 0.5);
        let ctx = SubordinationContext::surrogate(&g, &MeasureSpec::bernoulli()).unwrap();
        let z = C64::new(0.4, 0.3);
        assert!((ctx.psi(z).unwrap().im - 0.3 * (1.0 - ctx.rate(z).unwrap())).abs() < 1e-13);

        // circle: log|Psi| = -log r (1 - T)
        let nu = MeasureSpec::new(Carrier::Circle).with_atom(0.3, 0.7).with_atom(2.0, 0.3);
        let ctx = power_generator(&nu, 2.5, Kind::MultiplicativeCircle).unwrap();
        let z = C64::from_polar(0.8, 1.1);
        let lhs = ctx.psi(z).unwrap().norm().ln();
        assert!((lhs - 0.8f64.ln() * (1.0 - ctx.rate(z).unwrap())).abs() < 1e-12);
    }
}
