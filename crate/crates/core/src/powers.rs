//! Superconvergence experiments for convolution powers.
//!
//! Each schedule slot is a base law `nu_n`, an order `k_n` and a rescaling;
//! the density of the rescaled power is compared with a target infinitely
//! divisible density in sup norm over a window grid. Every grid point is
//! solved directly, never interpolated.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{density_infdiv, density_semigroup, linspace, PointFlag};
use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, Kind};
use crate::measures::MeasureSpec;

/// `y = scale x + shift` on the line, `y = scale x` on the half-line and
/// rotation by `shift` on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

impl Rescale {
    pub const IDENTITY: Rescale = Rescale { scale: 1.0, shift: 0.0 };

    fn identity() -> Rescale {
        Rescale::IDENTITY
    }

    fn check(&self, kind: Kind) -> Result<()> {
        let ok = match kind {
            Kind::AdditiveReal => self.scale.is_finite() && self.scale != 0.0 && self.shift.is_finite(),
            Kind::MultiplicativePositive => self.scale.is_finite() && self.scale > 0.0 && self.shift == 0.0,
            Kind::MultiplicativeCircle => self.scale == 1.0 && self.shift.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parse(format!("rescaling {self:?} not allowed for {kind:?}")))
        }
    }

    /// Preimage of a window point.
    fn back(&self, kind: Kind, y: f64) -> f64 {
        match kind {
            Kind::AdditiveReal => (y - self.shift) / self.scale,
            Kind::MultiplicativePositive => y / self.scale,
            Kind::MultiplicativeCircle => (y - self.shift).rem_euclid(2.0 * PI),
        }
    }

    fn forward(&self, kind: Kind, x: f64) -> f64 {
        match kind {
            Kind::AdditiveReal => self.scale * x + self.shift,
            Kind::MultiplicativePositive => self.scale * x,
            Kind::MultiplicativeCircle => (x + self.shift).rem_euclid(2.0 * PI),
        }
    }

    /// Density factor `|dx/dy|`.
    fn jacobian(&self) -> f64 {
        1.0 / self.scale.abs()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Slot {
    pub nu: MeasureSpec,
    pub order: f64,
    #[serde(default = "Rescale::identity")]
    pub rescale: Rescale,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Half-width of the neighbourhood removed around each point of `D`.
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
}

fn default_points() -> usize {
    1001
}

fn default_exclusion() -> f64 {
    1e-3
}

impl Window {
    pub fn new(a: f64, b: f64) -> Window {
        Window { a, b, points: default_points(), exclusion: default_exclusion() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuperconvRun {
    pub kind: Kind,
    pub schedule: Vec<Slot>,
    pub target: GeneratorSpec,
    pub window: Window,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlotResult {
    pub n: usize,
    pub order: f64,
    pub sup_error: Option<f64>,
    /// Window points left after removing neighbourhoods of `D` and atoms.
    pub points: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperconvResult {
    pub schema_version: u32,
    pub kind: Kind,
    pub window: Window,
    pub slots: Vec<SlotResult>,
    /// Fraction of consecutive available errors that decrease.
    pub trend: Option<f64>,
}

impl SuperconvResult {
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.slots.iter().map(|s| s.sup_error).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k_n,sup_error,window\n");
        let w = format!("[{:e};{:e}]/{}/{:e}", self.window.a, self.window.b, self.window.points, self.window.exclusion);
        for s in &self.slots {
            let e = s.sup_error.map(|e| format!("{e:.17e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", s.n, s.order, e, w);
        }
        out
    }
}

/// Bernoulli powers of orders `ks`, rescaled by `1/sqrt(k)`, against the
/// standard semicircle law.
pub fn bernoulli_clt(ks: &[f64], window: Window) -> SuperconvRun {
    let schedule = ks
        .iter()
        .map(|&k| Slot { nu: MeasureSpec::bernoulli(), order: k, rescale: Rescale { scale: 1.0 / k.sqrt(), shift: 0.0 } })
        .collect();
    SuperconvRun { kind: Kind::AdditiveReal, schedule, target: GeneratorSpec::semicircle(1i64), window }
}

fn validate(run: &SuperconvRun) -> Result<()> {
    let w = &run.window;
    if !(w.a < w.b) || w.points < 2 || !(w.exclusion >= 0.0) {
        return Err(Error::InvalidGrid(format!("window {w:?}")));
    }
    if run.target.kind != run.kind {
        return Err(Error::UnsupportedKind);
    }
    run.target.validate()?;
    if run.target.sigma.is_zero() {
        return Err(Error::Degenerate("target is a point mass".into()));
    }
    if run.schedule.windows(2).any(|p| !(p[1].order > p[0].order)) {
        return Err(Error::Parse("orders must be strictly increasing".into()));
    }
    for s in &run.schedule {
        s.rescale.check(run.kind)?;
        if s.nu.carrier != run.kind.carrier() {
            return Err(Error::UnsupportedCarrier);
        }
    }
    Ok(())
}

fn near(x: f64, pts: &[f64], r: f64, circle: bool) -> bool {
    pts.iter().any(|&p| {
        let d = (x - p).abs();
        let d = if circle { d.min(2.0 * PI - d) } else { d };
        d < r
    })
}

/// Sup-norm errors of the rescaled powers against the target density.
/// A slot that fails is reported with its error and no value.
pub fn run_superconv(run: &SuperconvRun) -> Result<SuperconvResult> {
    validate(run)?;
    let kind = run.kind;
    let circle = kind == Kind::MultiplicativeCircle;
    let w = run.window;
    let grid = linspace(w.a, w.b, w.points);
    let target = density_infdiv(&run.target, &grid)?;
    let mut d_target: Vec<f64> = target.discontinuities.clone();
    d_target.extend(target.atoms.iter().map(|a| a.0));

    let slots: Vec<SlotResult> = run
        .schedule
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let res = (|| -> Result<(f64, usize)> {
                let pre: Vec<f64> = grid.iter().map(|&y| s.rescale.back(kind, y)).collect();
                // the profile grid must be sorted; a negative scale reverses it
                let mut order: Vec<usize> = (0..pre.len()).collect();
                order.sort_by(|&a, &b| pre[a].total_cmp(&pre[b]));
                let sorted: Vec<f64> = order.iter().map(|&j| pre[j]).collect();
                let p = density_semigroup(&s.nu, s.order, kind, &sorted)?;
                let mut d: Vec<f64> = p.discontinuities.iter().chain(p.atoms.iter().map(|a| &a.0)).map(|&x| s.rescale.forward(kind, x)).collect();
                d.extend_from_slice(&d_target);
                let mut sup: f64 = 0.0;
                let mut used = 0;
                for (pos, &j) in order.iter().enumerate() {
                    let y = grid[j];
                    if near(y, &d, w.exclusion, circle) || target.flags[j] == PointFlag::Singular {
                        continue;
                    }
                    match p.flags[pos] {
                        PointFlag::Failed => return Err(Error::NoConvergence(format!("order {} at {y}", s.order))),
                        PointFlag::Singular => continue,
                        _ => {}
                    }
                    let v = p.values[pos] * s.rescale.jacobian();
                    sup = sup.max((v - target.values[j]).abs());
                    used += 1;
                }
                Ok((sup, used))
            })();
            match res {
                Ok((e, used)) => SlotResult { n: i + 1, order: s.order, sup_error: Some(e), points: used, failure: None },
                Err(e) => SlotResult { n: i + 1, order: s.order, sup_error: None, points: 0, failure: Some(e.to_string()) },
            }
        })
        .collect();

    let present: Vec<f64> = slots.iter().filter_map(|s| s.sup_error).collect();
    let trend = (present.len() >= 2).then(|| {
        let dec = present.windows(2).filter(|p| p[1] < p[0]).count();
        dec as f64 / (present.len() - 1) as f64
    });
    Ok(SuperconvResult { schema_version: 1, kind, window: w, slots, trend })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Carrier;

    fn semicircle(x: f64) -> f64 {
        if x.abs() < 2.0 {
            (4.0 - x * x).sqrt() / (2.0 * PI)
        } else {
            0.0
        }
    }

    /// `nu^{+2}` of the Bernoulli law is the arcsine law on `[-2, 2]`.
    fn arcsine(x: f64) -> f64 {
        1.0 / (PI * (4.0 - x * x).sqrt())
    }

    #[test]
    fn n2_matches_arcsine() {
        let grid = linspace(-1.8, 1.8, 721);
        let p = density_semigroup(&MeasureSpec::bernoulli(), 2.0, Kind::AdditiveReal, &grid).unwrap();
        let err = grid.iter().zip(&p.values).map(|(&x, &v)| (v - arcsine(x)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn pipeline_error_at_n2() {
        let w = Window { points: 201, ..Window::new(-1.9, 1.9) };
        let r = run_superconv(&bernoulli_clt(&[2.0], w)).unwrap();
        let s = 2f64.sqrt();
        let oracle = linspace(-1.9, 1.9, 201).iter().map(|&y| (s * arcsine(s * y) - semicircle(y)).abs()).fold(0.0, f64::max);
        let e = r.slots[0].sup_error.unwrap();
        assert!((e - oracle).abs() < 1e-6, "{e} vs {oracle}");
        assert_eq!(r.slots[0].points, 201);
    }

    #[test]
    fn degenerate_target_rejected() {
        let target = GeneratorSpec { kind: Kind::MultiplicativeCircle, gamma: 1i64.into(), sigma: MeasureSpec::new(Carrier::Circle) };
        let run = SuperconvRun {
            kind: Kind::MultiplicativeCircle,
            schedule: vec![Slot { nu: MeasureSpec::dirac(Carrier::Circle, 1i64), order: 2.0, rescale: Rescale::IDENTITY }],
            target,
            window: Window::new(0.5, 2.5),
        };
        assert!(matches!(run_superconv(&run), Err(Error::Degenerate(_))));
    }

    #[test]
    fn orders_must_increase() {
        let run = bernoulli_clt(&[4.0, 2.0], Window::new(-1.0, 1.0));
        assert!(matches!(run_superconv(&run), Err(Error::Parse(_))));
    }

    #[test]
    fn failed_slot_is_recorded() {
        // order 1 is not a valid power; the other slot still runs
        let w = Window { points: 51, ..Window::new(-1.5, 1.5) };
        let r = run_superconv(&bernoulli_clt(&[1.0, 2.0], w)).unwrap();
        assert!(r.slots[0].sup_error.is_none() && r.slots[0].failure.is_some());
        assert!(r.slots[1].sup_error.is_some());
    }

    #[test]
    fn window_avoids_atoms() {
        // order 3/2 keeps atoms of mass 1/4 at -3/2 and 3/2; order 2 has
        // D = {-2, 2}, where the arcsine density is unbounded
        let w = Window { points: 3801, ..Window::new(-1.9, 1.9) };
        let r = run_superconv(&bernoulli_clt(&[1.5, 2.0], w)).unwrap();
        let grid = linspace(-1.9, 1.9, 3801);
        for (slot, at) in r.slots.iter().zip([1.5 / 1.5f64.sqrt(), 2f64.sqrt()]) {
            let close = grid.iter().filter(|y| (y.abs() - at).abs() < 1e-3).count();
            assert!(close > 0);
            assert_eq!(slot.points, 3801 - close);
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("n,k_n,sup_error,window\n1,1.5,"), "{csv}");
    }

    #[test]
    fn clt_trend() {
        let r = run_superconv(&bernoulli_clt(&[4.0, 16.0, 64.0], Window::new(-1.9, 1.9))).unwrap();
        let e: Vec<f64> = r.errors().into_iter().map(Option::unwrap).collect();
        eprintln!("{e:?}");
        assert!(e[0] > e[1] && e[1] > e[2] && e[2] < 0.02, "{e:?}");
        assert_eq!(r.trend, Some(1.0));
    }
}
