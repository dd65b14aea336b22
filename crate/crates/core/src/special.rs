//! Complex gamma, K-Bessel and Whittaker functions, the two Fourier integrals
//! of `(t² + y²)^{−s}`, and the resolvent Green kernel.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::{point_pair_invariant, PointH};
use crate::linalg::e;
use crate::quadrature::{integrate, QuadOptions};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Relative tolerance of the Bessel and Green-kernel quadratures.
pub const SPECIAL_REL_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `log Γ(s)` by the Lanczos approximation (`g = 7`, 9 terms), with the
/// reflection formula for `Re s < ½`. For `Re s ≥ ½` the branch is the
/// continuation from the positive axis; left of it the imaginary part is
/// determined only modulo `2π`.
pub fn log_gamma(s: Complex64) -> Result<Complex64> {
    if !s.re.is_finite() || !s.im.is_finite() {
        return Err(Error::Domain(format!("log_gamma at non-finite {s}")));
    }
    if s.im == 0.0 && s.re <= 0.0 && s.re == s.re.round() {
        return Err(Error::Domain(format!("Γ has a pole at {}", s.re)));
    }
    if s.re < 0.5 {
        // Γ(s)Γ(1−s) = π / sin(πs)
        let sin = (s * PI).sin();
        return Ok(c(PI.ln()) - sin.ln() - log_gamma(c(1.0) - s)?);
    }
    let z = s - 1.0;
    let mut a = c(LANCZOS[0]);
    for (k, &ck) in LANCZOS.iter().enumerate().skip(1) {
        a += ck / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(c(0.5 * TAU.ln()) + (z + 0.5) * t.ln() - t + a.ln())
}

pub fn gamma(s: Complex64) -> Result<Complex64> {
    Ok(log_gamma(s)?.exp())
}

/// `K_ν(y) = ∫₀^∞ e^{−y cosh x} cosh(νx) dx`.
///
/// The integral is taken in the scaled form `e^{−y}∫ e^{−y(cosh x − 1)}cosh(νx)dx`
/// and truncated once the integrand has fallen below `e^{−45}` of its scale.
pub fn k_bessel(nu: Complex64, y: f64) -> Result<Complex64> {
    Ok(k_bessel_scaled(nu, y)? * (-y).exp())
}

/// `e^{y}K_ν(y)`.
pub fn k_bessel_scaled(nu: Complex64, y: f64) -> Result<Complex64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("K-Bessel needs y > 0, got {y}")));
    }
    let a = nu.re.abs();
    let exponent = |x: f64| a * x - y * (x.cosh() - 1.0);
    // Peak of the envelope e^{a x − y(cosh x − 1)}.
    let peak = (a / y).asinh();
    let top = exponent(peak);
    let mut upper = peak.max(0.25);
    while exponent(upper) > top - 45.0 {
        upper += 0.25 + 0.25 * upper;
    }
    let f = |x: f64| {
        let w = (-y * (x.cosh() - 1.0)).exp();
        (nu * x).cosh() * w
    };
    // Splitting at the peak helps the adaptive rule find the bulk.
    let opts = QuadOptions::rel(SPECIAL_REL_TOL);
    let mut total = c(0.0);
    let mut lo = 0.0;
    for hi in [peak, upper] {
        if hi > lo {
            total += integrate(f, lo, hi, opts).value;
            lo = hi;
        }
    }
    Ok(total)
}

/// `W_s(fz) = 2(|f|y)^{½} K_{s−½}(2π|f|y) e(fx)` for a real frequency `f ≠ 0`.
pub fn whittaker_freq(s: Complex64, f: f64, z: &PointH) -> Result<Complex64> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::Domain(format!("Whittaker frequency must be finite and nonzero, got {f}")));
    }
    let t = f.abs() * z.y();
    Ok(2.0 * t.sqrt() * k_bessel(s - 0.5, TAU * t)? * e(f * z.x()))
}

/// `W_s(z) = 2y^{½} K_{s−½}(2πy) e(x)`.
pub fn whittaker(s: Complex64, z: &PointH) -> Result<Complex64> {
    whittaker_freq(s, 1.0, z)
}

/// `max |W_s(iy)| / (y^{½}e^{−πy})` over the given heights.
pub fn whittaker_decay_constant(s: Complex64, heights: &[f64]) -> Result<f64> {
    let mut best = 0.0f64;
    for &y in heights {
        let w = whittaker(s, &PointH::new(0.0, y)?)?;
        best = best.max(w.norm() / (y.sqrt() * (-PI * y).exp()));
    }
    Ok(best)
}

/// `∫_ℝ (t² + y²)^{−s} dt = π^{½} Γ(s−½)/Γ(s) · y^{1−2s}`.
pub fn fourier_integral_zero(s: Complex64, y: f64) -> Result<Complex64> {
    if !(s.re > 0.5) {
        return Err(Error::Domain(format!("zero-mode integral needs Re s > 1/2, got {s}")));
    }
    if !(y > 0.0) {
        return Err(Error::Domain(format!("zero-mode integral needs y > 0, got {y}")));
    }
    let log = c(0.5 * PI.ln()) + log_gamma(s - 0.5)? - log_gamma(s)? + (1.0 - 2.0 * s) * y.ln();
    Ok(log.exp())
}

/// `∫_ℝ (t² + y²)^{−s} e(−rt) dt = (2π^s/Γ(s)) (|r|/y)^{s−½} K_{s−½}(2π|r|y)`.
pub fn fourier_integral_mode(s: Complex64, r: f64, y: f64) -> Result<Complex64> {
    if r == 0.0 {
        return Err(Error::Domain("mode integral needs r ≠ 0; use the zero-mode integral".into()));
    }
    if !(s.re > 0.5) {
        return Err(Error::Domain(format!("mode integral needs Re s > 1/2, got {s}")));
    }
    if !(y > 0.0) {
        return Err(Error::Domain(format!("mode integral needs y > 0, got {y}")));
    }
    let ra = r.abs();
    let pre = (s * PI.ln() - log_gamma(s)? + (s - 0.5) * (ra / y).ln()).exp();
    Ok(2.0 * pre * k_bessel(s - 0.5, TAU * ra * y)?)
}

/// `G_s(u) = (1/4π)∫₀¹ (ξ(1−ξ))^{s−1}(ξ+u)^{−s} dξ`, integrated after
/// `ξ = sin²θ`, which turns the integrand into
/// `2(sin θ cos θ)^{2s−1}(sin²θ + u)^{−s}` on `[0, π/2]`.
pub fn resolvent_green(s: Complex64, u: f64) -> Result<Complex64> {
    green_integral(s, u, 0)
}

/// `G_s'(u) = −(s/4π)∫₀¹ (ξ(1−ξ))^{s−1}(ξ+u)^{−s−1} dξ`.
pub fn resolvent_green_derivative(s: Complex64, u: f64) -> Result<Complex64> {
    Ok(-s * green_integral(s, u, 1)?)
}

fn green_integral(s: Complex64, u: f64, extra: i32) -> Result<Complex64> {
    if !(s.re > 0.0) {
        return Err(Error::Domain(format!("G_s needs Re s > 0, got {s}")));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("G_s needs u > 0, got {u}")));
    }
    let p = s + extra as f64;
    let f = |t: f64| {
        let (sn, cs) = t.sin_cos();
        let base = (sn * cs).ln();
        2.0 * ((2.0 * s - 1.0) * base - p * (sn * sn + u).ln()).exp()
    };
    let opts = QuadOptions::rel(SPECIAL_REL_TOL);
    // Resolve the transition at sin θ ≈ √u separately.
    let knee = u.sqrt().min(1.0).asin().min(FRAC_PI_2 * 0.5);
    let v = integrate(f, 0.0, knee, opts).value + integrate(f, knee, FRAC_PI_2, opts).value;
    Ok(v / (2.0 * TAU))
}

/// The Green function of the resolvent on ℍ as a function of two points:
/// `G_s(u(z, w)/4)`. The integral above is the Green function in the variable
/// `|z − w|²/(4 Im z Im w)`, a quarter of the point-pair invariant.
pub fn green_kernel(s: Complex64, z: &PointH, w: &PointH) -> Result<Complex64> {
    resolvent_green(s, point_pair_invariant(z, w) / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn gamma_values() {
        assert!(log_gamma(c(1.0)).unwrap().norm() < 1e-14);
        assert!((log_gamma(c(0.5)).unwrap() - c(PI.sqrt().ln())).norm() < 1e-14);
        assert!(close(gamma(c(5.0)).unwrap(), c(24.0), 1e-13));
        // High-precision reference values.
        let lg = log_gamma(Complex64::new(3.0, 2.0)).unwrap();
        assert!(close(lg, Complex64::new(-0.031_639_059_373_961_19, 2.022_193_197_501_327), 1e-12));
        let g = gamma(Complex64::new(-2.5, 0.3)).unwrap();
        assert!(close(g, Complex64::new(-0.613_822_997_437_741_5, -0.211_232_614_937_041_78), 1e-12));
        assert!(log_gamma(c(-3.0)).is_err());
        // |Γ(i)|² = π / sinh π
        let gi = gamma(Complex64::i()).unwrap();
        assert!((gi.norm_sqr() - PI / PI.sinh()).abs() < 1e-13);
    }

    #[test]
    fn bessel_values() {
        for y in [0.5, 1.0, 2.0, 10.0] {
            let exact = (PI / (2.0 * y)).sqrt() * (-y).exp();
            assert!(close(k_bessel(c(0.5), y).unwrap(), c(exact), 1e-11), "y = {y}");
        }
        assert!(close(k_bessel(c(0.0), 1.0).unwrap(), c(0.421_024_438_240_708_3), 1e-11));
        assert!(close(k_bessel(c(1.0), 1.0).unwrap(), c(0.601_907_230_197_234_6), 1e-11));
        let v = k_bessel(Complex64::new(0.7, 1.3), 2.5).unwrap();
        assert!(close(v, Complex64::new(0.048_378_646_355_547_93, 0.015_832_238_394_130_4), 1e-10));
        let v = k_bessel(Complex64::new(2.5, -0.4), 0.3).unwrap();
        assert!(close(v, Complex64::new(36.233_692_383_139_76, -62.615_164_193_692_65), 1e-10));
        let v = k_bessel(Complex64::new(1.5, 3.0), 20.0).unwrap();
        assert!(close(v, Complex64::new(4.752_408_616_888_81e-10, 1.063_771_441_530_365e-10), 1e-9));
        assert!(k_bessel(c(1.0), 0.0).is_err());
    }

    #[test]
    fn whittaker_structure() {
        let s = c(2.3);
        let w = whittaker(s, &PointH::new(0.0, 1.5).unwrap()).unwrap();
        assert!(w.re > 0.0 && w.im.abs() < 1e-15 * w.re);
        let shifted = whittaker(s, &PointH::new(0.37, 1.5).unwrap()).unwrap();
        assert!(close(shifted, w * e(0.37), 1e-13));
        let neg = whittaker_freq(s, -2.0, &PointH::new(0.1, 0.7).unwrap()).unwrap();
        let pos = whittaker_freq(s, 2.0, &PointH::new(-0.1, 0.7).unwrap()).unwrap();
        assert!(close(neg, pos, 1e-13));
    }

    #[test]
    fn fourier_integrals() {
        assert!((fourier_integral_zero(c(1.0), 1.0).unwrap() - c(PI)).norm() < 1e-12);
        assert!((fourier_integral_zero(c(2.0), 1.0).unwrap() - c(PI / 2.0)).norm() < 1e-12);
        assert!(fourier_integral_zero(c(0.5), 1.0).is_err());
        let s = Complex64::new(1.5, 0.7);
        let a = fourier_integral_mode(s, 1.3, 0.8).unwrap();
        let b = fourier_integral_mode(s, -1.3, 0.8).unwrap();
        assert!(close(a, b, 1e-14));
        assert!(fourier_integral_mode(s, 0.0, 1.0).is_err());
    }

    #[test]
    fn green_values() {
        let v = resolvent_green(Complex64::new(1.2, 0.5), 0.3).unwrap();
        assert!(close(v, Complex64::new(0.058_962_480_076_911_91, -0.055_013_224_031_321_53), 1e-10));
        let v = resolvent_green(c(2.0), 5.0).unwrap();
        assert!(close(v, c(0.000_440_630_385_926_530_0), 1e-10));
        assert!(resolvent_green(c(0.0), 1.0).is_err());
        assert!(resolvent_green(c(1.0), 0.0).is_err());
        let (s, u, h) = (Complex64::new(1.7, 0.2), 0.8, 1e-5);
        let fd = (resolvent_green(s, u + h).unwrap() - resolvent_green(s, u - h).unwrap()) / (2.0 * h);
        assert!(close(resolvent_green_derivative(s, u).unwrap(), fd, 1e-7));
    }
}
