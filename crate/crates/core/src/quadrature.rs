//! Adaptive Gauss–Kronrod integration and fixed Gauss–Legendre rules.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMat};

/// Values that can be integrated: a vector space with a norm.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += s·other`.
    fn add_scaled(&mut self, other: &Self, s: f64);
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += s * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += other * s;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        self.zip_apply(other, |a, b| *a += b * s);
    }
    fn magnitude(&self) -> f64 {
        frobenius(self)
    }
}

impl QuadValue for Vec<Complex64> {
    fn zero_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * s;
        }
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights at the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Absolute error floor shared by all adaptive integrations.
pub const ABS_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, abs_tol: ABS_FLOOR, max_intervals: 4000 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Piece<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.add_scaled(&fc, WGK[7]);
    gauss.add_scaled(&fc, WG[3]);
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron.add_scaled(&f1, WGK[i]);
        kron.add_scaled(&f2, WGK[i]);
        if i % 2 == 1 {
            gauss.add_scaled(&f1, WG[i / 2]);
            gauss.add_scaled(&f2, WG[i / 2]);
        }
    }
    let mut value = kron.zero_like();
    value.add_scaled(&kron, h);
    let mut diff = kron;
    diff.add_scaled(&gauss, -1.0);
    let error = (diff.magnitude() * h.abs()).max(f64::EPSILON * 50.0 * value.magnitude());
    Piece { a, b, value, error }
}

/// Globally adaptive 7–15 point Gauss–Kronrod integration on `[a, b]`:
/// the interval with the largest error estimate is bisected until the total
/// estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult<T> {
    let mut pieces = vec![gk15(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let mut total = pieces[0].value.zero_like();
        let mut err = 0.0;
        for p in &pieces {
            total.add_scaled(&p.value, 1.0);
            err += p.error;
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if err <= target || pieces.len() >= opts.max_intervals {
            return QuadResult { value: total, error: err, evaluations, converged: err <= target };
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("nonempty");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            // Interval exhausted at machine precision.
            return QuadResult { value: total, error: err, evaluations, converged: false };
        }
        pieces.push(gk15(&mut f, p.a, mid));
        pieces.push(gk15(&mut f, mid, p.b));
        evaluations += 30;
    }
}

/// [`integrate`] that fails unless the tolerance was met.
pub fn integrate_checked<T: QuadValue, F: FnMut(f64) -> T>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<T> {
    let r = integrate(f, a, b, opts);
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::Limit(format!(
            "quadrature on [{a}, {b}] stopped at error {:.3e} after {} evaluations",
            r.error, r.evaluations
        )))
    }
}

/// Integral over `[a, ∞)` through `x = a + t/(1 − t)`.
pub fn integrate_to_infinity<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, a: f64, opts: QuadOptions) -> QuadResult<T> {
    integrate(
        |t| {
            let one = 1.0 - t;
            let v = f(a + t / one);
            let mut out = v.zero_like();
            out.add_scaled(&v, 1.0 / (one * one));
            out
        },
        0.0,
        1.0,
        opts,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(&xi, &wi)| (c + h * xi, h * wi)).collect()
}
