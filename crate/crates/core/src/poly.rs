//! Polynomials and truncated power series over an exact or floating field.
//!
//! The same code runs over `BigRational` (exact coefficients for the cusp
//! and classification pipelines) and over `f64` (irrational supports).

use std::fmt::Debug;
use std::ops::Neg;

use num_complex::Complex64 as C64;
use num_traits::{Num, Zero};

use crate::num::{q_to_f64, Q};

pub trait Scalar: Clone + Debug + Num + Neg<Output = Self> {
    fn to_f64(&self) -> f64;
    fn from_i64(n: i64) -> Self;
    /// Exact zero for rationals; tolerance-based for floats.
    fn negligible(&self, scale: f64) -> bool;
}

impl Scalar for Q {
    fn to_f64(&self) -> f64 {
        q_to_f64(self)
    }
    fn from_i64(n: i64) -> Self {
        Q::from_integer(n.into())
    }
    fn negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-13 * scale.max(1e-300)
    }
}

impl Scalar for C64 {
    fn to_f64(&self) -> f64 {
        self.re
    }
    fn from_i64(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn negligible(&self, scale: f64) -> bool {
        self.norm() <= 1e-13 * scale.max(1e-300)
    }
}

/// `sum_j coeffs[j] (t - center)^j`
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    pub center: T,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(center: T, coeffs: Vec<T>) -> Self {
        Poly { center, coeffs }
    }

    pub fn eval(&self, t: &T) -> T {
        let d = t.clone() - self.center.clone();
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * d.clone() + c.clone();
        }
        acc
    }

    /// Same polynomial expanded about `c`.
    pub fn recenter(&self, c: &T) -> Poly<T> {
        // Horner-style Taylor shift
        let n = self.coeffs.len();
        let mut a = self.coeffs.clone();
        let h = c.clone() - self.center.clone();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let add = a[j + 1].clone() * h.clone();
                a[j] = a[j].clone() + add;
            }
        }
        Poly { center: c.clone(), coeffs: a }
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: &T, b: &T) -> T {
        let da = a.clone() - self.center.clone();
        let db = b.clone() - self.center.clone();
        let mut s = T::zero();
        let mut pa = da.clone();
        let mut pb = db.clone();
        for (j, c) in self.coeffs.iter().enumerate() {
            let k = T::from_i64(j as i64 + 1);
            s = s + c.clone() * (pb.clone() - pa.clone()) / k;
            pa = pa * da.clone();
            pb = pb * db.clone();
        }
        s
    }

    /// Coefficients in powers of `t` itself.
    pub fn monomial(&self) -> Vec<T> {
        self.recenter(&T::zero()).coeffs
    }

    pub fn mul(&self, o: &Poly<T>) -> Poly<T> {
        let o = o.recenter(&self.center);
        let mut c = vec![T::zero(); self.coeffs.len() + o.coeffs.len()];
        for (i, x) in self.coeffs.iter().enumerate() {
            for (j, y) in o.coeffs.iter().enumerate() {
                c[i + j] = c[i + j].clone() + x.clone() * y.clone();
            }
        }
        Poly { center: self.center.clone(), coeffs: c }
    }

    pub fn to_f64(&self) -> Poly<f64> {
        Poly { center: self.center.to_f64(), coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

impl Poly<f64> {
    pub fn eval_c(&self, z: C64) -> C64 {
        let d = z - self.center;
        let mut acc = C64::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * d + *c;
        }
        acc
    }
}

/// Truncated power series in `(z - z0)`, `depth` terms.
pub type Series<T> = Vec<T>;

pub fn s_mul<T: Scalar>(a: &[T], b: &[T], depth: usize) -> Series<T> {
    let mut c = vec![T::zero(); depth];
    for (i, x) in a.iter().enumerate().take(depth) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(depth - i) {
            c[i + j] = c[i + j].clone() + x.clone() * y.clone();
        }
    }
    c
}

/// `sum_j outer[j] inner^j` where `inner` has zero constant term.
pub fn s_compose<T: Scalar>(outer: &[T], inner: &[T], depth: usize) -> Series<T> {
    let mut out = vec![T::zero(); depth];
    let mut pw = vec![T::zero(); depth];
    pw[0] = T::one();
    for (j, c) in outer.iter().enumerate().take(depth) {
        if j > 0 {
            pw = s_mul(&pw, inner, depth);
        }
        if c.is_zero() {
            continue;
        }
        for n in 0..depth {
            out[n] = out[n].clone() + c.clone() * pw[n].clone();
        }
    }
    out
}

/// `exp` of a series with zero constant term.
pub fn s_exp<T: Scalar>(a: &[T], depth: usize) -> Series<T> {
    let mut e = vec![T::zero(); depth];
    e[0] = T::one();
    for n in 1..depth {
        let mut s = T::zero();
        for k in 1..=n.min(a.len() - 1) {
            s = s + T::from_i64(k as i64) * a[k].clone() * e[n - k].clone();
        }
        e[n] = s / T::from_i64(n as i64);
    }
    e
}

/// Series of `ln(z - p)` about `z0` without its constant term.
pub fn log_tail<T: Scalar>(z0: &T, p: &T, depth: usize) -> Series<T> {
    let d = z0.clone() - p.clone();
    let mut s = vec![T::zero(); depth];
    let mut pw = T::one();
    for (m, slot) in s.iter_mut().enumerate().skip(1) {
        pw = pw * d.clone();
        let sign = if m % 2 == 1 { T::one() } else { -T::one() };
        *slot = sign / (T::from_i64(m as i64) * pw.clone());
    }
    s
}

/// Taylor data `rat + sum_i consts[i] * mult[i]` whose constants are
/// transcendental (logarithms, `i pi`).
#[derive(Clone, Debug)]
pub struct TaylorSeries<T> {
    pub rat: Series<T>,
    pub logs: Vec<(C64, Series<T>)>,
}

impl<T: Scalar> TaylorSeries<T> {
    pub fn zero(depth: usize) -> Self {
        TaylorSeries { rat: vec![T::zero(); depth], logs: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.rat.len()
    }

    pub fn add(&mut self, o: &TaylorSeries<T>) {
        for (x, y) in self.rat.iter_mut().zip(&o.rat) {
            *x = x.clone() + y.clone();
        }
        self.logs.extend(o.logs.iter().cloned());
    }

    /// Apply a linear map to all component series.
    pub fn map(&self, f: impl Fn(&[T]) -> Series<T>) -> Self {
        TaylorSeries { rat: f(&self.rat), logs: self.logs.iter().map(|(c, s)| (*c, f(s))).collect() }
    }

    /// Coefficient `n`: exact value when no transcendental constant enters.
    pub fn coeff(&self, n: usize) -> (Option<T>, C64) {
        let mut v = C64::new(self.rat[n].to_f64(), 0.0);
        let mut exact = true;
        for (c, s) in &self.logs {
            if !s[n].is_zero() {
                exact = false;
                v += c * s[n].to_f64();
            }
        }
        (if exact { Some(self.rat[n].clone()) } else { None }, v)
    }
}

/// Which side of the support an analytic continuation comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Taylor series at `z0` of the continuation of `z -> int_a^b p(t)/(z-t) dt`
/// from the given half-plane. `z0` must not be an endpoint.
pub fn cauchy_piece_taylor<T: Scalar>(p: &Poly<T>, a: &T, b: &T, z0: &T, depth: usize, side: Side) -> TaylorSeries<T> {
    // int p(t)/(z-t) = p(z) [ln(z-a) - ln(z-b)] - int_a^b (p(t)-p(z))/(t-z) dt
    let pc = p.recenter(z0);
    let mut pser = pc.coeffs.clone();
    pser.resize(depth.max(pser.len()), T::zero());
    pser.truncate(depth);

    // (p(t)-p(z))/(t-z) = sum_j e_j sum_{i<j} (t-z0)^i (z-z0)^{j-1-i}
    let da = a.clone() - z0.clone();
    let db = b.clone() - z0.clone();
    let mut qpoly = vec![T::zero(); depth];
    let mut ia = vec![T::zero(); pc.coeffs.len()];
    {
        let mut pa = da.clone();
        let mut pb = db.clone();
        for (i, slot) in ia.iter_mut().enumerate() {
            *slot = (pb.clone() - pa.clone()) / T::from_i64(i as i64 + 1);
            pa = pa * da.clone();
            pb = pb * db.clone();
        }
    }
    for (j, e) in pc.coeffs.iter().enumerate() {
        for i in 0..j {
            let m = j - 1 - i;
            if m < depth {
                qpoly[m] = qpoly[m].clone() + e.clone() * ia[i].clone();
            }
        }
    }

    let la = log_tail(z0, a, depth);
    let lb = log_tail(z0, b, depth);
    let tail: Series<T> = la.iter().zip(&lb).map(|(x, y)| x.clone() - y.clone()).collect();
    let mut rat = s_mul(&pser, &tail, depth);
    for (r, qv) in rat.iter_mut().zip(&qpoly) {
        *r = r.clone() - qv.clone();
    }

    let (fa, fb) = (da.to_f64(), db.to_f64());
    let sgn = if side == Side::Upper { 1.0 } else { -1.0 };
    // ln(z0 - a) - ln(z0 - b) with the branch selected by the side
    let mut k = C64::new((fa.abs().ln()) - (fb.abs().ln()), 0.0);
    if fa > 0.0 {
        k.im += sgn * std::f64::consts::PI;
    }
    if fb > 0.0 {
        k.im -= sgn * std::f64::consts::PI;
    }
    TaylorSeries { rat, logs: vec![(k, pser)] }
}

/// Series of `1/(z0 + d)` about `d = 0`.
pub fn recip_series<T: Scalar>(z0: &T, depth: usize) -> Series<T> {
    let mut s = vec![T::zero(); depth];
    let mut pw = z0.clone();
    for (m, slot) in s.iter_mut().enumerate() {
        let sign = if m % 2 == 0 { T::one() } else { -T::one() };
        *slot = sign / pw.clone();
        pw = pw * z0.clone();
    }
    s
}

/// Reciprocal of a series with nonzero constant term.
pub fn s_recip<T: Scalar>(a: &[T], depth: usize) -> Series<T> {
    let mut r = vec![T::zero(); depth];
    r[0] = T::one() / a[0].clone();
    for n in 1..depth {
        let mut s = T::zero();
        for k in 1..=n.min(a.len() - 1) {
            s = s + a[k].clone() * r[n - k].clone();
        }
        r[n] = -s / a[0].clone();
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;

    #[test]
    fn recenter_preserves_values() {
        let p = Poly::new(q(1, 2), vec![q(1, 1), q(-2, 1), q(3, 1)]);
        let r = p.recenter(&q(-3, 1));
        for t in [q(0, 1), q(5, 7), q(-11, 3)] {
            assert_eq!(p.eval(&t), r.eval(&t));
        }
    }

    #[test]
    fn exact_integration() {
        // (5/33) t^4 on [-2, 1] integrates to 1
        let p = Poly::new(q(0, 1), vec![q(0, 1), q(0, 1), q(0, 1), q(0, 1), q(5, 33)]);
        assert_eq!(p.integrate(&q(-2, 1), &q(1, 1)), q(1, 1));
    }

    #[test]
    fn cauchy_taylor_matches_quadrature_off_support() {
        // int_0^1 t^2/(z - t) dt at z0 = 3, compared by differences
        let p = Poly::new(0.0, vec![0.0, 0.0, 1.0]);
        let s = cauchy_piece_taylor(&p, &0.0, &1.0, &3.0, 4, Side::Upper);
        let g = |z: f64| {
            crate::quad::integrate_real(|t| t * t / (z - t), &[0.0, 1.0], Default::default()).unwrap()
        };
        let (_, c0) = s.coeff(0);
        assert!((c0.re - g(3.0)).abs() < 1e-12);
        let h = 1e-4;
        let d1 = (g(3.0 + h) - g(3.0 - h)) / (2.0 * h);
        let (_, c1) = s.coeff(1);
        assert!((c1.re - d1).abs() < 1e-7);
    }

    #[test]
    fn imaginary_part_inside_support() {
        // Im G(x + i0) = -pi p(x)
        let p = Poly::new(0.0, vec![1.0, 0.5]);
        let s = cauchy_piece_taylor(&p, &-1.0, &1.0, &0.25, 3, Side::Upper);
        let (_, c0) = s.coeff(0);
        assert!((c0.im + std::f64::consts::PI * 1.125).abs() < 1e-13);
        let s = cauchy_piece_taylor(&p, &-1.0, &1.0, &0.25, 3, Side::Lower);
        assert!((s.coeff(0).1.im - std::f64::consts::PI * 1.125).abs() < 1e-13);
    }

    #[test]
    fn series_algebra() {
        let a = vec![q(2, 1), q(1, 1), q(0, 1)];
        let r = s_recip(&a, 3);
        let one = s_mul(&a, &r, 3);
        assert_eq!(one, vec![q(1, 1), q(0, 1), q(0, 1)]);
        // exp-free composition check: (1+x)^2 with x = y + y^2
        let outer = vec![q(1, 1), q(2, 1), q(1, 1)];
        let inner = vec![q(0, 1), q(1, 1), q(1, 1)];
        let c = s_compose(&outer, &inner, 4);
        assert_eq!(c, vec![q(1, 1), q(2, 1), q(3, 1), q(2, 1)]);
        // exp(x) = sum x^n/n!
        let e = s_exp(&[q(0, 1), q(1, 1)], 5);
        assert_eq!(e, vec![q(1, 1), q(1, 1), q(1, 2), q(1, 6), q(1, 24)]);
    }
}
