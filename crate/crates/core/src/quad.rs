//! Adaptive Gauss-Kronrod (7/15) quadrature for complex integrands.
//!
//! Panels live in a global max-heap keyed by their error estimate; the
//! worst panel is bisected until the summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOpts {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { rel: 1e-11, abs: 1e-14, max_panels: 2000 }
    }
}

/// Integral judged divergent: a panel was refined past depth 60 while the
/// running total exceeded 10 in modulus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergent {
    pub at: f64,
}

struct Panel {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    let mut err = (k - g).norm();
    // QUADPACK-style rescaling: the raw difference grossly overestimates
    // the error once the rule has converged.
    let scale = (200.0 * err / (k.norm() + 1e-300)).powf(1.5);
    if scale < 1.0 {
        err = err.min(k.norm() * scale).max(50.0 * f64::EPSILON * k.norm());
    }
    if !k.re.is_finite() || !k.im.is_finite() {
        err = f64::INFINITY;
    }
    (k, err)
}

/// Integrate `f` over `[pts[0], pts.last()]`, with every entry of `pts`
/// used as an initial panel boundary. `pts` must be sorted.
pub fn integrate<F: Fn(f64) -> C64>(f: F, pts: &[f64], opts: QuadOpts) -> Result<C64, Divergent> {
    let mut heap = BinaryHeap::new();
    let mut total = C64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&f, w[0], w[1]);
            total += v;
            total_err += e;
            heap.push(Panel { a: w[0], b: w[1], val: v, err: e, depth: 0 });
        }
    }
    let mut panels = heap.len();
    while !heap.is_empty() {
        let tol = opts.abs.max(opts.rel * total.norm());
        if total_err <= tol || panels >= opts.max_panels {
            break;
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if p.depth > 60 || m <= p.a || m >= p.b {
            if total.norm() > 10.0 || !total.norm().is_finite() {
                return Err(Divergent { at: m });
            }
            // cannot refine further in double precision; accept
            heap.push(Panel { err: 0.0, ..p });
            total_err = heap.iter().map(|q| q.err).sum();
            continue;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        total_err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, val: v1, err: e1, depth: p.depth + 1 });
        heap.push(Panel { a: m, b: p.b, val: v2, err: e2, depth: p.depth + 1 });
        panels += 1;
    }
    // re-sum to shed accumulated rounding from the incremental updates
    let mut sum = C64::new(0.0, 0.0);
    for p in heap.iter() {
        sum += p.val;
    }
    if !sum.re.is_finite() || !sum.im.is_finite() {
        let at = heap.peek().map(|p| 0.5 * (p.a + p.b)).unwrap_or(0.0);
        return Err(Divergent { at });
    }
    Ok(sum)
}

pub fn integrate_real<F: Fn(f64) -> f64>(f: F, pts: &[f64], opts: QuadOpts) -> Result<f64, Divergent> {
    integrate(|x| C64::new(f(x), 0.0), pts, opts).map(|v| v.re)
}

/// Panel boundaries on `[lo, hi]` clustering geometrically at `at` down to
/// distance `width`, so that a peak of that width is resolved up front.
pub fn clustered_breaks(lo: f64, hi: f64, at: f64, width: f64, out: &mut Vec<f64>) {
    if !(at > lo - width && at < hi + width) || !(width > 0.0) {
        return;
    }
    let mut d = width;
    let span = hi - lo;
    if at > lo && at < hi {
        out.push(at);
    }
    while d < span {
        for x in [at - d, at + d] {
            if x > lo && x < hi {
                out.push(x);
            }
        }
        d *= 4.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| C64::new(x * x * x - x, x * x), &[0.0, 2.0], QuadOpts::default()).unwrap();
        assert!((v.re - 2.0).abs() < 1e-14);
        assert!((v.im - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sharp_lorentzian() {
        let y = 1e-7;
        let mut pts = vec![-1.0, 1.0];
        clustered_breaks(-1.0, 1.0, 0.3, y, &mut pts);
        pts.sort_by(f64::total_cmp);
        let v = integrate_real(|x| y / ((x - 0.3).powi(2) + y * y), &pts, QuadOpts::default()).unwrap();
        let exact = (0.7 / y).atan() + (1.3 / y).atan();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn endpoint_sqrt_singularity() {
        let v = integrate_real(|x| 1.0 / x.sqrt(), &[0.0, 1.0], QuadOpts::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn divergence_is_reported() {
        let r = integrate_real(|x| 1.0 / (x * x), &[0.0, 1.0], QuadOpts { max_panels: 100000, ..Default::default() });
        assert!(r.is_err());
    }
}
