//! Densities, atoms and zero sets read off boundary curves.
//!
//! At a boundary point `w` with support location `x = Psi(w)` the density
//! is a boundary value of the companion transform:
//!
//! * line: `p(x) = -Im G_c(w) / pi`;
//! * half-line: `x p(x) = Im[1/(1 - eta_c(w))] / pi`, with `Psi(w) = 1/x`;
//! * circle: `p = (1 - |eta_c(w)|^2) / (2 pi |1 - eta_c(w)|^2)` w.r.t. the
//!   angle, at `conj Psi(w)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{self, boundary_point, point_at_location, BoundaryPoint};
use crate::error::{Error, Result};
use crate::generators::{power_generator, GeneratorSpec, Kind, Mode, SubordinationContext};
use crate::measures::{self, Carrier, MeasureSpec};
use crate::quad::{self, QuadOpts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointFlag {
    Ok,
    /// Boundary value at its degenerate end: the density vanishes.
    ZeroSet,
    /// The location carries an atom.
    Singular,
    /// The solver failed here; the value is meaningless.
    Failed,
}

impl fmt::Display for PointFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointFlag::Ok => "ok",
            PointFlag::ZeroSet => "zero-set",
            PointFlag::Singular => "singular",
            PointFlag::Failed => "failed",
        })
    }
}

type Evaluator = Arc<dyn Fn(f64) -> Result<(f64, PointFlag)> + Send + Sync>;

/// Density values on a grid of support locations.
///
/// `values` is w.r.t. `dt` on the line and half-line and w.r.t. the angle
/// on the circle. `alt` holds `t p(t)` (density w.r.t. `dx/x`) on the
/// half-line and the density w.r.t. normalized arclength on the circle.
#[derive(Clone)]
pub struct DensityProfile {
    pub carrier: Carrier,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub alt: Option<Vec<f64>>,
    pub flags: Vec<PointFlag>,
    pub atoms: Vec<(f64, f64)>,
    pub discontinuities: Vec<f64>,
    pub description: String,
    /// Largest negative value clamped to zero.
    pub clamped: f64,
    evaluator: Option<Evaluator>,
}

impl fmt::Debug for DensityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityProfile")
            .field("carrier", &self.carrier)
            .field("points", &self.grid.len())
            .field("atoms", &self.atoms)
            .field("discontinuities", &self.discontinuities)
            .field("description", &self.description)
            .finish()
    }
}

impl DensityProfile {
    /// Profile from raw values, without a way to re-evaluate.
    pub fn from_values(carrier: Carrier, grid: Vec<f64>, values: Vec<f64>, atoms: Vec<(f64, f64)>) -> DensityProfile {
        let flags = values.iter().map(|&v| if v > 0.0 { PointFlag::Ok } else { PointFlag::ZeroSet }).collect();
        DensityProfile {
            carrier,
            grid,
            values,
            alt: None,
            flags,
            atoms,
            discontinuities: Vec::new(),
            description: "values".into(),
            clamped: 0.0,
            evaluator: None,
        }
    }

    /// Density at an arbitrary location, re-solved from the boundary.
    pub fn eval(&self, t: f64) -> Result<(f64, PointFlag)> {
        match &self.evaluator {
            Some(e) => e(t),
            None => Err(Error::Degenerate("profile has no evaluator".into())),
        }
    }

    pub fn has_evaluator(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("location,value,flag\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!("{:.17e},{:.17e},{}\n", self.grid[i], self.values[i], self.flags[i]));
        }
        out
    }

    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "carrier": self.carrier,
            "description": self.description,
            "atoms": self.atoms,
            "discontinuities": self.discontinuities,
            "points": self.grid.len(),
            "failed": self.flags.iter().filter(|f| **f == PointFlag::Failed).count(),
            "clamped": self.clamped,
        })
    }
}

/// Density at a solved boundary point: `(value, alt, flag)`.
pub fn density_at_boundary(ctx: &SubordinationContext, b: &BoundaryPoint) -> Result<(f64, f64, PointFlag)> {
    let kind = ctx.kind();
    if b.degenerate(kind) {
        return Ok((0.0, 0.0, PointFlag::ZeroSet));
    }
    let c = ctx.companion_transform(b.w)?;
    Ok(match kind {
        Kind::AdditiveReal => {
            let p = -c.im / PI;
            (p, p, PointFlag::Ok)
        }
        Kind::MultiplicativePositive => {
            let q = (1.0 / (1.0 - c)).im / PI;
            let t = b.location(kind);
            (q / t, q, PointFlag::Ok)
        }
        Kind::MultiplicativeCircle => {
            let gap = 1.0 - b.value;
            let s = gap * (2.0 - gap);
            let d = ctx.companion_defect(b.w)?;
            let p = s * d / (2.0 * PI * (1.0 - c).norm_sqr());
            (p, 2.0 * PI * p, PointFlag::Ok)
        }
    })
}

fn near(a: f64, b: f64, carrier: Carrier) -> bool {
    let d = match carrier {
        Carrier::Circle => {
            let x = (a - b).rem_euclid(2.0 * PI);
            x.min(2.0 * PI - x)
        }
        _ => (a - b).abs(),
    };
    d <= 1e-9 * b.abs().max(1.0)
}

/// Density at support location `t`, with atoms and solver failures
/// reflected in the flag.
pub fn density_at_location(ctx: &SubordinationContext, atoms: &[(f64, f64)], t: f64) -> (f64, f64, PointFlag) {
    let carrier = ctx.kind().carrier();
    if atoms.iter().any(|&(a, _)| near(t, a, carrier)) {
        return (0.0, 0.0, PointFlag::Singular);
    }
    if carrier == Carrier::PositiveHalfLine && t <= 0.0 {
        return (0.0, 0.0, PointFlag::ZeroSet);
    }
    match point_at_location(ctx, t).and_then(|b| density_at_boundary(ctx, &b)) {
        Ok((v, a, f)) => (v, a, f),
        Err(_) => (f64::NAN, f64::NAN, PointFlag::Failed),
    }
}

/// Atoms `(location, mass)` and discontinuity points of the law described
/// by the context.
pub fn detect_atoms_full(ctx: &SubordinationContext) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let kind = ctx.kind();
    let mut atoms = Vec::new();
    let mut dset = Vec::new();
    let push = |loc: f64, mass: f64, atoms: &mut Vec<(f64, f64)>, dset: &mut Vec<f64>| {
        if mass >= -1e-12 {
            dset.push(loc);
        }
        if mass > 1e-14 {
            atoms.push((loc, mass));
        }
    };
    match &ctx.mode {
        Mode::PureInfDiv => {
            let (loc, mass) = infdiv_atom(ctx)?;
            if let Some(m) = mass {
                push(loc, m, &mut atoms, &mut dset);
            }
        }
        Mode::SurrogatePsi => {
            let mu1 = ctx.companion.as_ref().unwrap();
            let pure = SubordinationContext::pure(&ctx.base);
            let (b, mb) = infdiv_atom(&pure)?;
            if let Some(mb) = mb {
                for (a, ma) in mu1.logical_atoms() {
                    if kind == Kind::MultiplicativePositive && a == 0.0 {
                        continue;
                    }
                    let loc = match kind {
                        Kind::AdditiveReal => a + b,
                        Kind::MultiplicativePositive => a * b,
                        Kind::MultiplicativeCircle => (a + b).rem_euclid(2.0 * PI),
                    };
                    push(loc, ma + mb - 1.0, &mut atoms, &mut dset);
                }
            }
            if kind == Kind::MultiplicativePositive {
                let m0: f64 = mu1.logical_atoms().iter().filter(|a| a.0 == 0.0).map(|a| a.1).sum();
                if m0 > 0.0 {
                    push(0.0, m0, &mut atoms, &mut dset);
                }
            }
        }
        Mode::PowerAdditive { beta } => {
            for (a, m) in ctx.companion.as_ref().unwrap().logical_atoms() {
                push(beta * a, beta * m - (beta - 1.0), &mut atoms, &mut dset);
            }
        }
        Mode::PowerPositive { k } => {
            for (a, m) in ctx.companion.as_ref().unwrap().logical_atoms() {
                if a == 0.0 {
                    push(0.0, m, &mut atoms, &mut dset);
                } else {
                    push(a.powf(*k), k * m - (k - 1.0), &mut atoms, &mut dset);
                }
            }
        }
        Mode::PowerCircle { k, base_measure } => {
            for (a, m) in base_measure.logical_atoms() {
                let mass = k * m - (k - 1.0);
                if mass < -1e-12 {
                    continue;
                }
                let phi = if ctx.is_squared() { -2.0 * a } else { -a };
                let psi = ctx.psi(ctx.limit_point(phi))?;
                push((-psi.arg()).rem_euclid(2.0 * PI), mass, &mut atoms, &mut dset);
            }
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    dset.sort_by(f64::total_cmp);
    Ok((atoms, dset))
}

/// Atom location and mass (`None` when the boundary limit exceeds 1) of an
/// infinitely divisible law.
fn infdiv_atom(ctx: &SubordinationContext) -> Result<(f64, Option<f64>)> {
    let param = match ctx.kind() {
        Kind::AdditiveReal => 0.0,
        Kind::MultiplicativePositive => 1.0,
        Kind::MultiplicativeCircle => 0.0,
    };
    let lim = ctx.rate_limit(param)?;
    if lim > 1.0 + 1e-12 {
        return Ok((f64::NAN, None));
    }
    let psi = ctx.psi(ctx.limit_point(param))?;
    let loc = match ctx.kind() {
        Kind::AdditiveReal => psi.re,
        Kind::MultiplicativePositive => 1.0 / psi.norm(),
        Kind::MultiplicativeCircle => (-psi.arg()).rem_euclid(2.0 * PI),
    };
    Ok((loc, Some(1.0 - lim)))
}

pub fn detect_atoms(ctx: &SubordinationContext) -> Result<Vec<(f64, f64)>> {
    Ok(detect_atoms_full(ctx)?.0)
}

/// Evaluate the density of the context's law on a grid of locations.
pub fn profile_for_context(ctx: &SubordinationContext, grid: &[f64], description: String) -> Result<DensityProfile> {
    let (atoms, dset) = detect_atoms_full(ctx)?;
    let pts: Vec<(f64, f64, PointFlag)> = grid.par_iter().map(|&t| density_at_location(ctx, &atoms, t)).collect();
    let mut clamped: f64 = 0.0;
    let mut values = Vec::with_capacity(grid.len());
    let mut alt = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for (v, a, f) in pts {
        let (v, a) = if v < 0.0 {
            clamped = clamped.max(-v);
            (0.0, a.max(0.0))
        } else {
            (v, a)
        };
        values.push(v);
        alt.push(a);
        flags.push(f);
    }
    let kind = ctx.kind();
    let c2 = ctx.clone();
    let atoms2 = atoms.clone();
    let evaluator: Evaluator = Arc::new(move |t| {
        let (v, _, f) = density_at_location(&c2, &atoms2, t);
        if f == PointFlag::Failed {
            return Err(Error::NoConvergence(format!("density at {t}")));
        }
        Ok((v.max(0.0), f))
    });
    Ok(DensityProfile {
        carrier: kind.carrier(),
        grid: grid.to_vec(),
        values,
        alt: if kind == Kind::AdditiveReal { None } else { Some(alt) },
        flags,
        atoms,
        discontinuities: dset,
        description,
        clamped,
        evaluator: Some(evaluator),
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn nondegenerate(g: &GeneratorSpec) -> Result<()> {
    g.validate()?;
    if g.sigma.is_zero() {
        return Err(Error::Degenerate("sigma is zero: the law is a point mass".into()));
    }
    Ok(())
}

pub fn density_infdiv(g: &GeneratorSpec, grid: &[f64]) -> Result<DensityProfile> {
    nondegenerate(g)?;
    check_grid(grid)?;
    let ctx = SubordinationContext::pure(g);
    profile_for_context(&ctx, grid, "infinitely divisible law".into())
}

fn is_haar(m: &MeasureSpec) -> bool {
    m.carrier == Carrier::Circle
        && m.atoms.is_empty()
        && m.pieces.len() == 1
        && matches!(m.pieces[0].form, measures::Form::Uniform)
        && (m.pieces[0].b.v() - m.pieces[0].a.v() - 2.0 * PI).abs() < 1e-12
}

pub fn density_convolution(mu1: &MeasureSpec, g: &GeneratorSpec, grid: &[f64]) -> Result<DensityProfile> {
    nondegenerate(g)?;
    check_grid(grid)?;
    if is_haar(mu1) {
        // Haar measure absorbs every factor
        let n = grid.len();
        let mut p = DensityProfile::from_values(Carrier::Circle, grid.to_vec(), vec![1.0 / (2.0 * PI); n], vec![]);
        p.alt = Some(vec![1.0; n]);
        p.description = "Haar measure".into();
        p.evaluator = Some(Arc::new(|_| Ok((1.0 / (2.0 * PI), PointFlag::Ok))));
        return Ok(p);
    }
    let ctx = SubordinationContext::surrogate(g, mu1)?;
    profile_for_context(&ctx, grid, "free convolution".into())
}

pub fn density_semigroup(nu: &MeasureSpec, order: f64, kind: Kind, grid: &[f64]) -> Result<DensityProfile> {
    check_grid(grid)?;
    let ctx = power_generator(nu, order, kind)?;
    profile_for_context(&ctx, grid, format!("convolution power of order {order}"))
}

/// Total mass of a profile: the continuous part integrated between the
/// grid ends plus the atoms.
///
/// With an evaluator, each interval of positivity is located precisely and
/// integrated adaptively (the square-root edges defeat plain trapezoids);
/// otherwise the trapezoid rule on the grid is used.
pub fn profile_mass(p: &DensityProfile) -> Result<f64> {
    profile_mass_tol(p, 1e-10)
}

/// `profile_mass` with relative quadrature tolerance `rel`; edges are
/// located to `1e-3 rel` of the local scale.
pub fn profile_mass_tol(p: &DensityProfile, rel: f64) -> Result<f64> {
    let n = p.grid.len();
    if n < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    let periodic = p.carrier == Carrier::Circle && (p.grid[n - 1] - p.grid[0] - 2.0 * PI).abs() < 1e-9;
    if !periodic && (p.values[0] > 1e-4 || p.values[n - 1] > 1e-4) {
        return Err(Error::SupportNotCovered(p.values[0], p.values[n - 1]));
    }
    let atoms: f64 = p
        .atoms
        .iter()
        .filter(|a| a.0 >= p.grid[0] - 1e-12 && a.0 <= p.grid[n - 1] + 1e-12)
        .map(|a| a.1)
        .sum();
    let atoms = if periodic { p.atoms.iter().map(|a| a.1).sum() } else { atoms };
    let Some(ev) = &p.evaluator else {
        let mut s = 0.0;
        for i in 0..n - 1 {
            s += 0.5 * (p.values[i] + p.values[i + 1]) * (p.grid[i + 1] - p.grid[i]);
        }
        return Ok(s + atoms);
    };
    let positive = |i: usize| p.flags[i] == PointFlag::Ok && p.values[i] > 0.0;
    let is_pos = |t: f64| -> Result<bool> {
        let (v, f) = ev(t)?;
        Ok(f == PointFlag::Ok && v > 0.0)
    };
    // maximal runs of positive grid points, widened to the true edges
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        if !positive(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && positive(i + 1) {
            i += 1;
        }
        let lo = if start == 0 {
            p.grid[0]
        } else {
            let (a, b) = (p.grid[start - 1], p.grid[start]);
            boundary::bisect(a, b, 1e-3 * rel * b.abs().max(1.0), 1e-15, &is_pos)?
        };
        let hi = if i == n - 1 {
            p.grid[n - 1]
        } else {
            let (a, b) = (p.grid[i], p.grid[i + 1]);
            let x = boundary::bisect(-b, -a, 1e-3 * rel * b.abs().max(1.0), 1e-15, |t| is_pos(-t))?;
            -x
        };
        runs.push((lo, hi));
        i += 1;
    }
    let mut total = 0.0;
    for (lo, hi) in runs {
        let mut pts = vec![lo, hi];
        for &d in p.discontinuities.iter().chain(p.atoms.iter().map(|a| &a.0)) {
            if d > lo && d < hi {
                pts.push(d);
            }
        }
        let k = 8;
        for j in 1..k {
            pts.push(lo + (hi - lo) * j as f64 / k as f64);
        }
        pts.sort_by(f64::total_cmp);
        let err = std::cell::Cell::new(None);
        let v = quad::integrate_real(
            |t| match ev(t) {
                Ok((v, _)) => v,
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            },
            &pts,
            QuadOpts { rel, abs: 1e-2 * rel, max_panels: 4000 },
        )
        .map_err(|d| Error::SingularIntegral(d.at))?;
        if let Some(e) = err.take() {
            return Err(e);
        }
        total += v;
    }
    Ok(total + atoms)
}

/// Grid of `n` points from `a` to `b` inclusive.
/// Speed `|d location / d param|` of the boundary curve at `b`, as
/// `|Psi'(w)| |w'(param)|`. The slope of the curve comes from implicit
/// differentiation of `rate = 1`; the tangent formula built from
/// `Re Psi'` alone loses all accuracy at the ends of a run, where `Psi'`
/// vanishes. Derivatives are Richardson-extrapolated central differences
/// with steps well inside the domain.
pub fn boundary_speed(ctx: &SubordinationContext, b: &BoundaryPoint) -> Result<f64> {
    let kind = ctx.kind();
    // interior coordinates (s, v): (x, y), (log r, theta), (phi, gap)
    let (s, v) = match kind {
        Kind::AdditiveReal => (b.w.re, b.w.im),
        Kind::MultiplicativePositive => (b.w.norm().ln(), b.w.arg()),
        Kind::MultiplicativeCircle => (b.w.arg(), 1.0 - b.w.norm()),
    };
    let point = |s: f64, v: f64| match kind {
        Kind::AdditiveReal => C64::new(s, v),
        Kind::MultiplicativePositive => C64::from_polar(s.exp(), v),
        Kind::MultiplicativeCircle => C64::from_polar(1.0 - v, s),
    };
    let room = match kind {
        Kind::AdditiveReal => v,
        Kind::MultiplicativePositive => v.min(PI - v),
        Kind::MultiplicativeCircle => v.min(1.0 - v),
    };
    let h = 1e-2 * room;
    let rate = |s: f64, v: f64| -> Result<f64> {
        match kind {
            Kind::MultiplicativeCircle => ctx.rate_circle_polar(s, v),
            _ => ctx.rate(point(s, v)),
        }
    };
    let diff = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let d = |h: f64| -> Result<f64> { Ok((g(h)? - g(-h)?) / (2.0 * h)) };
        Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
    };
    let rs = diff(&|e| rate(s + e, v))?;
    let rv = diff(&|e| rate(s, v + e))?;
    let dv = -rs / rv;
    let tangent = match kind {
        Kind::AdditiveReal => C64::new(1.0, dv),
        Kind::MultiplicativePositive => b.w * C64::new(1.0, dv),
        Kind::MultiplicativeCircle => C64::from_polar(1.0, s) * C64::new(-dv, 1.0 - v),
    };
    let w = b.w;
    let central = |e: f64| -> Result<C64> { Ok((ctx.psi(w + e)? - ctx.psi(w - e)?) / (2.0 * e)) };
    let hw = 1e-2 * match kind {
        Kind::AdditiveReal => w.im,
        Kind::MultiplicativePositive => if w.re > 0.0 { w.im.abs() } else { w.norm() },
        Kind::MultiplicativeCircle => 1.0 - w.norm(),
    };
    let dpsi = (4.0 * central(0.5 * hw)? - central(hw)?) / 3.0;
    let speed = dpsi.norm() * tangent.norm();
    Ok(match kind {
        Kind::AdditiveReal => speed,
        Kind::MultiplicativePositive => speed / b.psi.norm_sqr(),
        Kind::MultiplicativeCircle => speed / b.psi.norm(),
    })
}

/// Total mass of the context's law, integrating the density against the
/// boundary parametrization instead of inverting locations. The parameter
/// is `x` on `[lo, hi]` for the line, `log r` on `[lo, hi]` for the
/// half-line and the angle on `[0, 2 pi]` for the circle (the bounds are
/// then ignored). The boundary must be degenerate at both ends of a
/// non-periodic range.
pub fn mass_by_parameter(ctx: &SubordinationContext, lo: f64, hi: f64, rel: f64) -> Result<f64> {
    let kind = ctx.kind();
    let (lo, hi) = if kind == Kind::MultiplicativeCircle { (0.0, 2.0 * PI) } else { (lo, hi) };
    let to_param = |u: f64| if kind == Kind::MultiplicativePositive { u.exp() } else { u };
    let rate = |u: f64| ctx.rate_limit(to_param(u));
    let open = |u: f64| -> Result<bool> { Ok(rate(u)? > 1.0) };
    const SCAN: usize = 400;
    let grid = linspace(lo, hi, SCAN + 1);
    let vals: Vec<f64> = grid.iter().map(|&u| rate(u)).collect::<Result<_>>()?;
    let pos: Vec<bool> = vals.iter().map(|&v| v > 1.0).collect();
    if kind != Kind::MultiplicativeCircle && (pos[0] || pos[SCAN]) {
        return Err(Error::SupportNotCovered(lo, hi));
    }
    let tol = 1e-13 * (hi - lo);
    let widen_left = |closed: f64, inside: f64| boundary::bisect(closed, inside, tol, 1e-16, open);
    let widen_right = |inside: f64, closed: f64| Ok::<f64, Error>(-boundary::bisect(-closed, -inside, tol, 1e-16, |u| open(-u))?);
    let mut runs = Vec::new();
    let mut i = 0;
    while i <= SCAN {
        if !pos[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < SCAN && pos[i + 1] {
            i += 1;
        }
        let a = if start == 0 { grid[0] } else { widen_left(grid[start - 1], grid[start])? };
        let b = if i == SCAN { grid[SCAN] } else { widen_right(grid[i], grid[i + 1])? };
        runs.push((a, b));
        i += 1;
    }
    // a run narrower than the scan spacing shows up as a sampled peak below 1
    for i in 1..SCAN {
        if pos[i] || !(vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1]) {
            continue;
        }
        if let Some(peak) = peak_above_one(&rate, grid[i - 1], grid[i + 1])? {
            runs.push((widen_left(grid[i - 1], peak)?, widen_right(peak, grid[i + 1])?));
        }
    }
    let integrand = |u: f64| -> f64 {
        let inner = || -> Result<f64> {
            let b = boundary_point(ctx, to_param(u))?;
            let (p, _, flag) = density_at_boundary(ctx, &b)?;
            if flag != PointFlag::Ok {
                return Ok(0.0);
            }
            Ok(p.max(0.0) * boundary_speed(ctx, &b)?)
        };
        inner().unwrap_or(f64::NAN)
    };
    let opts = QuadOpts { rel, abs: 1e-2 * rel, max_panels: 4000 };
    let mut total = 0.0;
    for (a, b) in runs {
        let v = quad::integrate_real(integrand, &[a, b], opts).map_err(|d| Error::SingularIntegral(d.at))?;
        if !v.is_finite() {
            return Err(Error::NoConvergence(format!("mass integrand on [{a}, {b}]")));
        }
        total += v;
    }
    let atoms: f64 = detect_atoms(ctx)?.iter().map(|a| a.1).sum();
    Ok(total + atoms)
}

/// A point of `(a, b)` where `rate > 1`, searched by a fine scan and a
/// golden-section climb from its best sample.
fn peak_above_one(rate: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<Option<f64>> {
    const N: usize = 32;
    let xs = linspace(a, b, N + 1);
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, &x) in xs.iter().enumerate().take(N).skip(1) {
        let v = rate(x)?;
        if v > 1.0 {
            return Ok(Some(x));
        }
        if v > best.0 {
            best = (v, j);
        }
    }
    let (mut lo, mut hi) = (xs[best.1 - 1], xs[best.1 + 1]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (rate(x1)?, rate(x2)?);
    for _ in 0..60 {
        if f1.max(f2) > 1.0 {
            return Ok(Some(if f1 > f2 { x1 } else { x2 }));
        }
        if f1 > f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = rate(x1)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = rate(x2)?;
        }
    }
    Ok(None)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluate the density directly at boundary parameters (no location
/// inversion); returns `(location, value)` pairs sorted by location.
pub fn profile_by_parameter(ctx: &SubordinationContext, params: &[f64]) -> Result<Vec<(f64, f64)>> {
    let kind = ctx.kind();
    let mut v: Vec<(f64, f64)> = params
        .par_iter()
        .map(|&s| {
            let b = boundary_point(ctx, s)?;
            let (p, _, _) = density_at_boundary(ctx, &b)?;
            Ok((b.location(kind), p))
        })
        .collect::<Result<_>>()?;
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Num;

    #[test]
    fn semicircle_center() {
        let p = density_infdiv(&GeneratorSpec::semicircle(1i64), &[0.0, 1.0]).unwrap();
        assert!((p.values[0] - 1.0 / PI).abs() < 1e-12);
        assert!((p.values[1] - 3f64.sqrt() / (2.0 * PI)).abs() < 1e-10);
        assert!(p.atoms.is_empty());
    }

    #[test]
    fn atom_on_half_line() {
        let s = MeasureSpec::new(Carrier::PositiveHalfLine).with_atom(0i64, 0.3);
        let g = GeneratorSpec::new(Kind::MultiplicativePositive, 1i64, s).unwrap();
        let ctx = SubordinationContext::pure(&g);
        let a = detect_atoms(&ctx).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0].0 - (-0.3f64).exp()).abs() < 1e-9);
        assert!((a[0].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn semicircle_mass() {
        let p = density_infdiv(&GeneratorSpec::semicircle(1i64), &linspace(-2.2, 2.2, 101)).unwrap();
        let m = profile_mass(&p).unwrap();
        assert!((m - 1.0).abs() < 2e-6, "{m}");
        let p = density_infdiv(&GeneratorSpec::semicircle(1i64), &linspace(-1.0, 2.2, 101)).unwrap();
        assert!(matches!(profile_mass(&p), Err(Error::SupportNotCovered(..))));
    }

    #[test]
    fn circle_zero_at_minus_one() {
        let g = GeneratorSpec::new(Kind::MultiplicativeCircle, 0i64, MeasureSpec::dirac(Carrier::Circle, 0i64)).unwrap();
        let ctx = SubordinationContext::pure(&g);
        let b = boundary_point(&ctx, PI).unwrap();
        let (v, _, f) = density_at_boundary(&ctx, &b).unwrap();
        assert_eq!((v, f), (0.0, PointFlag::ZeroSet));
    }

    #[test]
    fn semigroup_atoms() {
        let nu = MeasureSpec::new(Carrier::RealLine).with_atom(0i64, 0.8).with_atom(1i64, 0.2);
        let ctx = power_generator(&nu, 2.0, Kind::AdditiveReal).unwrap();
        let a = detect_atoms(&ctx).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].0, 0.0);
        assert!((a[0].1 - 0.6).abs() < 1e-15);
        let ctx = power_generator(&MeasureSpec::dirac(Carrier::PositiveHalfLine, Num::from(2i64)), 3.0, Kind::MultiplicativePositive).unwrap();
        let a = detect_atoms(&ctx).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0].0 - 8.0).abs() < 1e-12 && (a[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_mass_on_fixtures() {
        for (name, mu, g, _) in crate::cusp::fixtures::bounds() {
            let ctx = crate::cusp::context_for(&mu, &g).unwrap();
            let (lo, hi) = if ctx.kind() == Kind::AdditiveReal { (-10.0, 10.0) } else { (-8.0, 8.0) };
            let m = mass_by_parameter(&ctx, lo, hi, 1e-9).unwrap();
            assert!((m - 1.0).abs() < 2e-6, "{name}: {m}");
        }
    }

    #[test]
    fn parameter_range_must_cover_support() {
        let ctx = SubordinationContext::pure(&GeneratorSpec::semicircle(1i64));
        assert!(matches!(mass_by_parameter(&ctx, -0.5, 5.0, 1e-9), Err(Error::SupportNotCovered(..))));
    }
}
